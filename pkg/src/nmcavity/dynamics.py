"""Master-equation coefficients, observables and reduced cavity states.

Closed-form states need only u(t) and v(t). The Fock-space integrator of the
master equation exists to cross-check them.
"""

import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate
from scipy.interpolate import CubicSpline
from scipy.special import gammaln

from .greens import OMEGA0, TimeGrid, bm_green_functions
from .reservoir import kernel_g, kernel_g_tilde_series

log = logging.getLogger(__name__)

#: |u| below this marks the coefficient samples invalid.
U_SINGULAR = 1e-8
TAIL_TOL = 1e-10
TRACE_DRIFT_TOL = 1e-6
TOP_LEVEL_TOL = 1e-8

VACUUM = "vacuum-evolved"
COHERENT = "coherent-evolved"
THERMAL = "thermal-evolved"
NUMERIC = "numeric"


class CutoffError(ValueError):
    def __init__(self, message, tail):
        super().__init__(message)
        self.tail = tail


class MasterEquationError(RuntimeError):
    pass


@dataclass
class CoefficientTrace:
    grid: TimeGrid
    omega_prime: np.ndarray
    kappa: np.ndarray
    kappa_tilde: np.ndarray
    valid: np.ndarray = None

    def __post_init__(self):
        if self.valid is None:
            self.valid = np.ones(len(self.kappa), dtype=bool)

    @property
    def singular_intervals(self):
        """(start, stop) index pairs of consecutive invalid samples."""
        bad = np.flatnonzero(~self.valid)
        if bad.size == 0:
            return []
        breaks = np.flatnonzero(np.diff(bad) > 1)
        starts = np.r_[bad[0], bad[breaks + 1]]
        stops = np.r_[bad[breaks], bad[-1]]
        return list(zip(starts.tolist(), stops.tolist()))


@dataclass(frozen=True)
class PropagatorCoefficients:
    a_coef: float
    b_coef: complex
    c_coef: float
    d_coef: float

    @classmethod
    def from_uv(cls, u, v):
        return cls(a_coef=1 / (1 + v), b_coef=u / (1 + v), c_coef=v / (1 + v),
                   d_coef=1 - abs(u) ** 2 / (1 + v))

    def thermal_mean(self, n0):
        """Mean photon number of an initial thermal state with mean n0 after propagation."""
        # A/(1 + n0 - n0 D) sum_n x^n with x = n0|B|^2/(1 + n0 - n0 D) + C
        x = n0 * abs(self.b_coef) ** 2 / (1 + n0 - n0 * self.d_coef) + self.c_coef
        return x / (1 - x)


def fock_cutoff(mean, tail=TAIL_TOL):
    """Default Fock truncation for a state of the given mean occupation.

    The larger of 1.5 n + 10 sqrt(n) + 20 and the size at which a geometric
    distribution of mean n leaves less than ``tail`` above the cutoff.
    """
    mean = max(float(mean), 0.0)
    base = int(math.ceil(1.5 * mean + 10 * math.sqrt(mean) + 20))
    if mean == 0:
        return base
    geometric = int(math.ceil(math.log(tail) / math.log(mean / (1 + mean))))
    return max(base, geometric)


@dataclass
class CavityState:
    """Reduced cavity state.

    Closed forms are a displaced thermal family: ``alpha`` is the coherent
    amplitude and ``noise`` the thermal occupation about it. ``numeric``
    states carry the lower bands of a truncated density matrix in ``rho``,
    ``rho[k, m] = <m+k|rho|m>``.
    """

    kind: str
    alpha: complex = 0j
    noise: float = 0.0
    rho: np.ndarray = field(default=None, repr=False)
    t: float = 0.0

    @property
    def mean(self):
        if self.kind == NUMERIC:
            return float(np.sum(np.arange(self.rho.shape[1]) * self.populations()))
        return abs(self.alpha) ** 2 + self.noise

    @property
    def is_diagonal(self):
        return self.kind in (VACUUM, THERMAL) or (self.kind == COHERENT and self.alpha == 0)

    def max_coherence(self):
        """Largest |<m+k|rho|m>| over k >= 1."""
        if self.kind == NUMERIC:
            return float(np.max(np.abs(self.rho[1:]))) if self.rho.shape[0] > 1 else 0.0
        if self.is_diagonal:
            return 0.0
        rho = self.density_matrix()
        return float(np.max(np.abs(rho - np.diag(np.diag(rho)))))

    def default_cutoff(self):
        if self.kind == NUMERIC:
            return self.rho.shape[1]
        return fock_cutoff(self.mean)

    def populations(self, n_cutoff=None):
        if self.kind == NUMERIC:
            return self.rho[0].real.copy()
        n_cutoff = n_cutoff or self.default_cutoff()
        if self.is_diagonal:
            return _geometric_populations(self.noise, n_cutoff)
        return np.real(np.diag(self.density_matrix(n_cutoff)))

    def density_matrix(self, n_cutoff=None):
        if self.kind == NUMERIC:
            return _bands_to_matrix(self.rho, self.rho.shape[1])
        n_cutoff = n_cutoff or self.default_cutoff()
        if self.is_diagonal:
            return np.diag(_geometric_populations(self.noise, n_cutoff)).astype(complex)
        return _displaced_thermal_matrix(self.alpha, self.noise, n_cutoff)

    def tail_weight(self, n_cutoff=None):
        """Probability beyond the truncation; closed forms have unit trace exactly."""
        if self.kind == NUMERIC:
            return 0.0
        n_cutoff = n_cutoff or self.default_cutoff()
        if self.is_diagonal:
            x = self.noise / (1 + self.noise)
            return x**n_cutoff
        return max(0.0, 1.0 - float(np.sum(self.populations(n_cutoff))))

    def trace(self, n_cutoff=None):
        if self.kind == NUMERIC:
            return float(np.sum(self.rho[0].real))
        if n_cutoff is None:
            return 1.0
        return float(np.sum(self.populations(n_cutoff)))


def _geometric_populations(mean, n_cutoff):
    n = np.arange(n_cutoff)
    if mean == 0:
        p = np.zeros(n_cutoff)
        p[0] = 1.0
        return p
    return np.exp(n * np.log(mean / (1 + mean)) - np.log1p(mean))


def _displaced_thermal_matrix(alpha, noise, n_cutoff):
    """Fock matrix of the mixture of generalized coherent states.

    rho = exp(-|alpha|^2/(1+v)) sum_n v^n/(1+v)^(n+1) |beta, n><n, beta|,
    |beta, n> = exp(beta a^dag)|n>, beta = alpha/(1+v). Built as a sum of
    rank-one terms so it is positive semidefinite by construction.
    """
    v = float(noise)
    beta = alpha / (1 + v)
    m = np.arange(n_cutoff)
    lg_m = gammaln(m + 1)
    log_b = np.log(abs(beta)) if beta != 0 else -np.inf
    phase = np.exp(1j * np.angle(beta) * m) if beta != 0 else None
    rho = np.zeros((n_cutoff, n_cutoff), dtype=complex)
    norm = -abs(alpha) ** 2 / (1 + v)
    for n in range(n_cutoff):
        if v == 0 and n > 0:
            break
        log_p = -np.log1p(v) + (n * np.log(v / (1 + v)) if n else 0.0)
        k = m[n:] - n
        if beta == 0:
            rho[n, n] += np.exp(log_p)
            continue
        log_c = 0.5 * (log_p + norm) + k * log_b + 0.5 * lg_m[n:] - gammaln(k + 1) - 0.5 * gammaln(n + 1)
        c = np.exp(log_c) * phase[n:] * np.exp(-1j * np.angle(beta) * n)
        rho[n:, n:] += np.outer(c, np.conj(c))
    return rho


def coefficients(gf):
    """omega0'(t), kappa(t), kappa~(t) from u and v.

    u'/u uses the solver's right-hand side when available (otherwise centred
    differences); v' is always a centred difference, one-sided at the ends.
    """
    dt = gf.grid.dt
    u = gf.u
    udot = gf.udot if gf.udot is not None else np.gradient(u, dt, edge_order=2)
    valid = np.abs(u) >= U_SINGULAR
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(valid, udot / np.where(valid, u, 1), np.nan)
    vdot = np.gradient(gf.v, dt, edge_order=2)
    omega_prime = -np.imag(ratio)
    kappa = -np.real(ratio)
    kappa_tilde = vdot - 2 * gf.v * np.real(ratio)
    if np.any(~valid):
        log.warning("u(t) vanishes at %d samples; coefficients flagged invalid there", np.sum(~valid))
    return CoefficientTrace(grid=gf.grid, omega_prime=omega_prime, kappa=kappa,
                            kappa_tilde=kappa_tilde, valid=valid)


def second_order_coefficients(cfg, grid, omega0=OMEGA0):
    """Perturbative (second-order in the coupling) time-dependent coefficients.

    The frequency integral is done in closed form by the kernels, leaving
    omega0'(t) = omega0 + int_0^t Im[g(tau) e^{i omega0 tau}] dtau,
    kappa(t) = int_0^t Re[g e^{i omega0 tau}] and
    kappa~(t) = 2 int_0^t Re[g~ e^{i omega0 tau}], each a cumulative
    trapezoidal integral on the grid.
    """
    tau = grid.times - grid.t0
    rot = np.exp(1j * omega0 * tau)
    gk = kernel_g(tau, cfg.spectral) * rot
    gt = kernel_g_tilde_series(tau, cfg) * rot
    kappa = integrate.cumulative_trapezoid(gk.real, dx=grid.dt, initial=0.0)
    shift = integrate.cumulative_trapezoid(gk.imag, dx=grid.dt, initial=0.0)
    kappa_tilde = 2 * integrate.cumulative_trapezoid(gt.real, dx=grid.dt, initial=0.0)
    return CoefficientTrace(grid=grid, omega_prime=omega0 + shift, kappa=kappa, kappa_tilde=kappa_tilde)


def bm_coefficients(bm, grid):
    n = grid.n_steps + 1
    return CoefficientTrace(grid=grid, omega_prime=np.full(n, bm.omega_prime), kappa=np.full(n, bm.kappa),
                            kappa_tilde=np.full(n, bm.kappa_tilde))


def mean_amplitude(gf, alpha0):
    return gf.u * alpha0


def photon_number(gf, n0):
    if n0 < 0:
        raise ValueError("initial photon number must be >= 0")
    return np.abs(gf.u) ** 2 * n0 + gf.v


def propagator_coefficients(gf, t_index, variant="exact", bm=None):
    """A, B, C, D of the coherent-state propagating function.

    ``variant`` selects the exact row, the zero-temperature row (v = 0), or the
    Born-Markov row built from u_BM and v_BM (``bm`` required).
    """
    if variant == "exact":
        return PropagatorCoefficients.from_uv(gf.u[t_index], gf.v[t_index])
    if variant == "zero_temperature":
        return PropagatorCoefficients.from_uv(gf.u[t_index], 0.0)
    if variant == "bm":
        if bm is None:
            raise ValueError("the BM row needs a BmSolution")
        u_bm, v_bm = bm_green_functions(bm, gf.grid)
        return PropagatorCoefficients.from_uv(u_bm[t_index], v_bm[t_index])
    raise ValueError(f"unknown variant {variant!r}")


def evolve_vacuum(gf, t_index):
    return CavityState(kind=VACUUM, noise=float(gf.v[t_index]), t=float(gf.times[t_index]))


def evolve_thermal(gf, n0, t_index):
    if n0 < 0:
        raise ValueError("initial photon number must be >= 0")
    mean = abs(gf.u[t_index]) ** 2 * n0 + gf.v[t_index]
    return CavityState(kind=THERMAL, noise=float(mean), t=float(gf.times[t_index]))


def evolve_coherent(gf, alpha0, t_index, n_cutoff=None):
    """Exact state from an initial coherent state; the cutoff is checked, not assumed."""
    state = CavityState(kind=COHERENT, alpha=complex(gf.u[t_index] * alpha0), noise=float(gf.v[t_index]),
                        t=float(gf.times[t_index]))
    n_cutoff = n_cutoff or state.default_cutoff()
    tail = state.tail_weight(n_cutoff)
    if tail > TAIL_TOL:
        raise CutoffError(f"Fock cutoff {n_cutoff} leaves tail weight {tail:.2e}", tail)
    return state


def initial_state(kind, alpha0=0j, n0=0.0):
    if kind == "vacuum":
        return CavityState(kind=VACUUM)
    if kind == "coherent":
        return CavityState(kind=COHERENT, alpha=complex(alpha0))
    if kind == "thermal":
        return CavityState(kind=THERMAL, noise=float(n0))
    raise ValueError(f"unknown initial state {kind!r}")


@dataclass
class MasterEquationRun:
    times: np.ndarray
    states: list
    trace_drift: float
    top_population: float
    indices: np.ndarray
    coherence_order: int


def _to_bands(rho, order):
    """bands[k, m] = rho[m + k, m] for k = 0..order (zero-padded)."""
    n = rho.shape[0]
    bands = np.zeros((order + 1, n), dtype=complex)
    for k in range(order + 1):
        bands[k, :n - k] = np.diagonal(rho, -k)
    return bands


def _coherence_order(rho, atol=1e-15):
    n = rho.shape[0]
    order = 0
    for k in range(1, n):
        if np.max(np.abs(np.diagonal(rho, -k))) > atol:
            order = k
    return order


class _BandedGenerator:
    """Master-equation right-hand side acting on the lower bands of rho.

    Each band k (elements rho[m+k, m]) evolves independently as a
    three-term recurrence in m. On the population band the upward flow out
    of the top level is removed, so the truncated generator is trace-free.
    """

    def __init__(self, n_cutoff, order):
        k = np.arange(order + 1)[:, None]
        m = np.arange(n_cutoff)[None, :]
        inside = (m + k) < n_cutoff
        inside_next = (m + k + 1) < n_cutoff
        self.mask = inside
        self.k = np.broadcast_to(k.astype(float), inside.shape)
        # coefficient of rho[m+k+1, m+1] and rho[m+k-1, m-1]
        self.down = np.where(inside_next, np.sqrt((m + k + 1.0) * (m + 1.0)), 0.0)
        self.up = np.where(inside, np.sqrt((m + k + 0.0) * m), 0.0)
        self.total = np.where(inside, 2.0 * m + k, 0.0)
        self.total_noise = self.total + inside
        self.total_noise[0, n_cutoff - 1] -= n_cutoff       # reflecting top level

    def __call__(self, bands, wp, kap, kap_t):
        out = (-1j * wp * self.k - kap * self.total - kap_t * self.total_noise) * bands
        out[:, :-1] += (2 * kap + kap_t) * self.down[:, :-1] * bands[:, 1:]
        out[:, 1:] += kap_t * self.up[:, 1:] * bands[:, :-1]
        return out

    def rate_bound(self, wp, kap, kap_t):
        n = self.total.shape[1]
        order = self.total.shape[0] - 1
        return (np.max(np.abs(wp)) * order + 4 * np.max(np.abs(kap)) * n
                + np.max(np.abs(kap_t)) * (4 * n + 2))


def _bands_to_matrix(bands, n_cutoff):
    rho = np.zeros((n_cutoff, n_cutoff), dtype=complex)
    idx = np.arange(n_cutoff)
    for k in range(bands.shape[0]):
        rows = idx[:n_cutoff - k]
        rho[rows + k, rows] = bands[k, :n_cutoff - k]
        if k:
            rho[rows, rows + k] = np.conj(bands[k, :n_cutoff - k])
    return rho


def integrate_master_equation(rho0, ct, n_cutoff=None, t_stop=None, output_indices=None,
                              coherence_order=None):
    """Integrate the time-local master equation with classical RK4.

    The density matrix is held as its lower bands up to the highest
    coherence order present initially (the generator never mixes orders).
    Coefficients are cubic-spline interpolated between grid samples and each
    grid interval is split into enough substeps to keep RK4 stable for the
    stiffest Fock level. Trace drift beyond 1e-6 aborts; population reaching
    the top Fock level is reported in the result. Windows where kappa~ or
    2 kappa + kappa~ turn negative are refused, since the truncated problem
    is then an unstable backward diffusion.
    """
    grid = ct.grid
    stop = grid.n_steps if t_stop is None else grid.index(t_stop)
    if not np.all(ct.valid[:stop + 1]):
        raise MasterEquationError("coefficient trace has flagged singular samples inside the window")
    kt = ct.kappa_tilde[:stop + 1]
    if np.min(kt) < 0 or np.min(2 * ct.kappa[:stop + 1] + kt) < 0:
        # negative diffusion makes the truncated Fock generator grow like |rate| * N
        raise MasterEquationError(
            f"negative diffusion rate (min kappa~ {np.min(kt):.3g}) inside the window; the truncated Fock "
            "integration is unstable there, use the closed-form states")
    n_cutoff = n_cutoff or rho0.default_cutoff()
    rho_init = np.asarray(rho0.density_matrix(n_cutoff), dtype=complex)
    if coherence_order is None:
        coherence_order = _coherence_order(rho_init)
    bands = _to_bands(rho_init, coherence_order)
    gen = _BandedGenerator(n_cutoff, coherence_order)
    times = grid.times[:stop + 1]
    if output_indices is None:
        output_indices = np.unique(np.linspace(0, stop, min(stop + 1, 21)).round().astype(int))
    output_indices = np.asarray(output_indices)
    wanted = set(output_indices.tolist())

    dt = grid.dt
    arrays = (ct.omega_prime[:stop + 1], ct.kappa[:stop + 1], ct.kappa_tilde[:stop + 1])
    sub = max(1, int(math.ceil(dt * gen.rate_bound(*arrays) / 2.0)))
    h = dt / sub
    # coefficients at every half substep, evaluated once
    fine_t = times[0] + 0.5 * h * np.arange(2 * sub * stop + 1)
    coef = np.array([CubicSpline(times, arr)(fine_t) for arr in arrays]).T if stop else None

    states = []
    top = 0.0
    drift = 0.0
    for j in range(stop + 1):
        if j in wanted:
            states.append(CavityState(kind=NUMERIC, rho=bands.copy(), t=float(times[j])))
        if j == stop:
            break
        for i in range(sub):
            base = 2 * (j * sub + i)
            c0, c1, c2 = coef[base], coef[base + 1], coef[base + 2]
            k1 = gen(bands, *c0)
            k2 = gen(bands + 0.5 * h * k1, *c1)
            k3 = gen(bands + 0.5 * h * k2, *c1)
            k4 = gen(bands + h * k3, *c2)
            bands = bands + (h / 6) * (k1 + 2 * k2 + 2 * k3 + k4)
        drift = max(drift, abs(float(np.sum(bands[0].real)) - 1))
        top = max(top, float(bands[0, -1].real))
        if drift > TRACE_DRIFT_TOL or not np.all(np.isfinite(bands[0])):
            raise MasterEquationError(
                f"trace drift {drift:.2e} at t={times[j + 1]:.3f} (cutoff {n_cutoff}, top level {top:.2e})")
    if top > TOP_LEVEL_TOL:
        log.warning("top Fock level reached population %.2e; raise the cutoff", top)
    return MasterEquationRun(times=times[output_indices], states=states, trace_drift=drift,
                             top_population=top, indices=output_indices, coherence_order=coherence_order)
