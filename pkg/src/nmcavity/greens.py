"""Propagating function u(t), correlation function v(t) and their Born-Markov limits."""

from dataclasses import dataclass, field

import numpy as np
from scipy import integrate, special

from .reservoir import (QuadratureError, ReservoirConfig, bose_occupation, kernel_g, kernel_grids,
                        spectral_density)

OMEGA0 = 1.0
SOLVER_EPS = 1e-6


class ConvergenceError(RuntimeError):
    pass


@dataclass(frozen=True)
class TimeGrid:
    t_end: float
    n_steps: int
    t0: float = 0.0

    def __post_init__(self):
        if self.n_steps < 2:
            raise ValueError("n_steps must be >= 2")
        if not self.t_end > self.t0:
            raise ValueError("t_end must exceed t0")

    @classmethod
    def from_dt(cls, t_end, dt):
        return cls(t_end=float(t_end), n_steps=int(round(t_end / dt)))

    @property
    def dt(self):
        return (self.t_end - self.t0) / self.n_steps

    @property
    def times(self):
        return self.t0 + self.dt * np.arange(self.n_steps + 1)

    def refined(self, factor=2):
        return TimeGrid(t_end=self.t_end, n_steps=self.n_steps * factor, t0=self.t0)

    def resolves(self, sd):
        """Production resolution rule dt * wc <= 0.05."""
        return self.dt * sd.omega_c <= 0.05

    def index(self, t):
        return int(round((t - self.t0) / self.dt))


#: Default production grid: omega0 t in [0, 50], dt = 0.005.
DEFAULT_GRID = TimeGrid(t_end=50.0, n_steps=10000)


@dataclass
class GreenFunctions:
    """u and v sampled on a uniform grid; udot is the right-hand side of the u equation."""

    cfg: ReservoirConfig
    grid: TimeGrid
    u: np.ndarray
    v: np.ndarray
    udot: np.ndarray = field(default=None, repr=False)

    @property
    def times(self):
        return self.grid.times

    def check(self, eps=SOLVER_EPS):
        problems = []
        if self.u[0] != 1:
            problems.append("u(t0) != 1")
        if np.max(np.abs(self.u)) > 1 + eps:
            problems.append(f"max|u| = {np.max(np.abs(self.u)):.8f} exceeds 1")
        if np.min(self.v) < -eps:
            problems.append(f"min v = {np.min(self.v):.3e} is negative")
        if self.v[0] != 0:
            problems.append("v(t0) != 0")
        return problems


@dataclass(frozen=True)
class BmSolution:
    omega_prime: float
    kappa: float
    n_bar: float

    @property
    def kappa_tilde(self):
        return 2 * self.kappa * self.n_bar


@dataclass(frozen=True)
class BoundModeReport:
    exists: bool
    threshold_eta: float
    binding_integral: float


def _volterra(g, dt, omega0=OMEGA0):
    """Adams-Bashforth-2 predictor, trapezoidal corrector (PECE) for
    u' = -i w0 u - int_0^t g(t - tau) u(tau) dtau, u(0) = 1.

    ``g`` holds g(k dt) for k = 0..N. The equation is stepped in the frame
    rotating at w0, w = u exp(i w0 t), so an uncoupled cavity keeps w = 1
    exactly. Returns u and u' on the grid.
    """
    n_total = len(g) - 1
    rot = np.exp(1j * omega0 * dt * np.arange(n_total + 1))
    gr = g * rot
    grev = np.ascontiguousarray(gr[::-1])
    w = np.empty(n_total + 1, dtype=complex)
    f = np.empty(n_total + 1, dtype=complex)
    w[0] = 1.0
    f[0] = 0.0
    half_g0 = 0.5 * dt * gr[0]
    for n in range(n_total):
        # memory integral at t_{n+1} without its w_{n+1} endpoint term
        hist = dt * (0.5 * gr[n + 1] * w[0] + np.dot(grev[n_total - n:n_total], w[1:n + 1]))
        if n == 0:
            pred = w[0] + dt * f[0]
        else:
            pred = w[n] + 0.5 * dt * (3 * f[n] - f[n - 1])
        w[n + 1] = w[n] + 0.5 * dt * (f[n] - hist - half_g0 * pred)
        f[n + 1] = -hist - half_g0 * w[n + 1]
    back = np.conj(rot)
    u = w * back
    return u, (f - 1j * omega0 * w) * back


def solve_u(cfg, grid, omega0=OMEGA0, tol=None):
    """Propagating function on ``grid``.

    With ``tol`` set, the solve is repeated at dt/2 and ConvergenceError is
    raised when max|u| moves by more than ``tol``.
    """
    u, _ = _volterra(kernel_g(np.arange(grid.n_steps + 1) * grid.dt, cfg.spectral), grid.dt, omega0)
    if tol is not None:
        fine = grid.refined(2)
        u2, _ = _volterra(kernel_g(np.arange(fine.n_steps + 1) * fine.dt, cfg.spectral), fine.dt, omega0)
        change = np.max(np.abs(u2[::2] - u))
        if change > tol:
            raise ConvergenceError(f"halving dt changed u by {change:.3e} > {tol:.1e}")
    return u


def v_trajectory(u, g_tilde, dt):
    """v(t_n) for every grid point in O(N^2).

    With ubar(tau) = u(t - tau) the double integral becomes the Hermitian
    form sum_jk w_j w_k u_j g~(t_k - t_j) u_k^*, whose trapezoidal value is
    updated incrementally as the upper limit advances.
    """
    n_total = len(u) - 1
    v = np.zeros(n_total + 1)
    if not np.any(g_tilde):
        return v
    b = dt * np.asarray(u, dtype=complex)
    b[0] *= 0.5
    grev = np.ascontiguousarray(g_tilde[::-1])
    g0 = g_tilde[0].real
    full = abs(b[0]) ** 2 * g0
    for n in range(1, n_total + 1):
        # h = sum_{j<n} b_j g~(t_n - t_j)
        h = np.dot(grev[n_total - n:n_total], b[:n])
        bn = b[n]
        cross = np.real(np.conj(bn) * h)
        v[n] = full + cross + 0.25 * abs(bn) ** 2 * g0
        full += 2 * cross + abs(bn) ** 2 * g0
    return v


def compute_v(cfg, u, t_index, grid):
    """v at a single grid index by the direct trapezoidal double sum (O(n^2)).

    Returns the complex value; its imaginary part is a Hermiticity residue.
    """
    if cfg.zero_temperature or cfg.spectral.eta == 0 or t_index == 0:
        return 0j
    _, gt = kernel_grids(cfg, grid.dt, t_index)
    n = t_index
    idx = np.arange(n + 1)
    diff = idx[None, :] - idx[:, None]          # k - j
    kern = np.where(diff >= 0, gt[np.abs(diff)], np.conj(gt[np.abs(diff)]))
    w = np.full(n + 1, grid.dt)
    w[0] = w[-1] = 0.5 * grid.dt
    a = w * u[:n + 1]
    return complex(a @ kern @ np.conj(a))


def solve(cfg, grid=DEFAULT_GRID, omega0=OMEGA0):
    """Solve u, u' and v on ``grid``; the zero-temperature path skips v entirely."""
    g, gt = kernel_grids(cfg, grid.dt, grid.n_steps)
    u, udot = _volterra(g, grid.dt, omega0)
    if cfg.zero_temperature or cfg.spectral.eta == 0:
        v = np.zeros(grid.n_steps + 1)
    else:
        v = v_trajectory(u, gt, grid.dt)
    return GreenFunctions(cfg=cfg, grid=grid, u=u, v=v, udot=udot)


def bm_frequency_shift(sd, omega0=OMEGA0):
    """Lamb shift delta = -P int_0^inf dw/(2pi) J(w)/(w - w0).

    The sign follows the long-time limit of the second-order frequency, so the
    coupling to modes above omega0 pulls the cavity down. The principal value
    is taken by subtraction on [0, b] with b = 2 w0 plus the exact log term.
    """
    if sd.eta == 0:
        return 0.0
    j0 = spectral_density(omega0, sd)
    b = 2 * omega0

    def regular(w):
        if w == omega0:
            h = 1e-6 * omega0
            return (spectral_density(w + h, sd) - spectral_density(w - h, sd)) / (2 * h)
        return (spectral_density(w, sd) - j0) / (w - omega0)

    inner, e1 = integrate.quad(regular, 0.0, b, limit=400, epsabs=1e-13, points=[omega0])
    log_term = j0 * np.log((b - omega0) / omega0)
    # the finite split keeps quad away from the exponential tail
    mid = b + 60 * sd.omega_c * max(1.0, sd.s)
    outer, e2 = integrate.quad(lambda w: spectral_density(w, sd) / (w - omega0), b, mid,
                               limit=400, epsabs=1e-13, epsrel=1e-12)
    tail, e3 = integrate.quad(lambda w: spectral_density(w, sd) / (w - omega0), mid, np.inf,
                              limit=400, epsabs=1e-13)
    total = inner + log_term + outer + tail
    err = e1 + e2 + e3
    if err > 1e-9 * max(1.0, abs(total)):
        raise QuadratureError(f"principal-value quadrature error {err:.2e}", err)
    return -total / (2 * np.pi)


def bm_solution(cfg, omega0=OMEGA0):
    sd = cfg.spectral
    return BmSolution(
        omega_prime=omega0 + bm_frequency_shift(sd, omega0),
        kappa=spectral_density(omega0, sd) / 2,
        n_bar=bose_occupation(omega0, cfg.theta),
    )


def bm_green_functions(bm, grid):
    t = grid.times - grid.t0
    u = np.exp(-(1j * bm.omega_prime + bm.kappa) * t)
    v = bm.n_bar * (1 - np.exp(-2 * bm.kappa * t))
    return u, v


def bound_mode_diagnostic(sd, omega0=OMEGA0):
    """Localized-mode test omega0 < int dw/(2pi) J(w)/w = eta wc Gamma(s)."""
    binding = sd.eta * sd.omega_c * special.gamma(sd.s)
    threshold = omega0 / (sd.omega_c * special.gamma(sd.s))
    return BoundModeReport(exists=bool(binding > omega0), threshold_eta=float(threshold),
                           binding_integral=float(binding))


def stationary_value(times, values, window=5.0, rtol=1e-4):
    """Trailing-window mean, relative drift and a stationarity flag."""
    times = np.asarray(times)
    values = np.asarray(values)
    sel = times >= times[-1] - window
    tail = values[sel]
    mean = float(np.mean(tail))
    scale = max(abs(mean), 1e-300)
    drift = float(np.ptp(tail) / scale)
    return mean, drift, drift < rtol
