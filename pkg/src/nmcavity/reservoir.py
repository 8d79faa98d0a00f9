"""Reservoir spectral density, thermal occupation and memory kernels.

All quantities are dimensionless: hbar = 1 and the bare cavity frequency
omega0 = 1, so times are in units of 1/omega0 and the temperature enters as
theta = k_B T / (hbar omega0).
"""

from dataclasses import dataclass

import numpy as np
from scipy import integrate, special

#: Boltzmann constant in eV/K (CODATA 2018, exact).
K_B_EV = 8.617333262e-5
#: Reference cavity: 21.5 GHz, hbar*omega0 = 13.83 micro-eV.
OMEGA0_GHZ = 21.5
HBAR_OMEGA0_UEV = 13.83

# Euler-Maclaurin tail terms used by the thermal-kernel series.
_EM_DIRECT_TERMS = 24
_EM_ORDER = 6


class QuadratureError(RuntimeError):
    """Numerical integration did not reach the requested tolerance."""

    def __init__(self, message, error_estimate=None):
        super().__init__(message)
        self.error_estimate = error_estimate


@dataclass(frozen=True)
class SpectralDensity:
    """J(w) = 2 pi eta w (w/wc)^(s-1) exp(-w/wc)."""

    eta: float
    s: float = 1.0
    omega_c: float = 1.0

    def __post_init__(self):
        if not self.eta >= 0:
            raise ValueError(f"eta must be >= 0, got {self.eta}")
        if not self.s > 0:
            raise ValueError(f"s must be > 0, got {self.s}")
        if not self.omega_c > 0:
            raise ValueError(f"omega_c must be > 0, got {self.omega_c}")

    def __call__(self, omega):
        return spectral_density(omega, self)

    def scaled(self, eta):
        return SpectralDensity(eta=eta, s=self.s, omega_c=self.omega_c)


@dataclass(frozen=True)
class ReservoirConfig:
    spectral: SpectralDensity
    theta: float = 0.0

    def __post_init__(self):
        if not self.theta >= 0:
            raise ValueError(f"theta must be >= 0, got {self.theta}")

    @property
    def zero_temperature(self):
        return self.theta == 0.0


@dataclass(frozen=True)
class KernelSample:
    tau: float
    g: complex
    g_tilde: complex


def kelvin_to_theta(kelvin, hbar_omega0_uev=HBAR_OMEGA0_UEV):
    """Convert a reservoir temperature in kelvin to theta = k_B T/(hbar omega0)."""
    if kelvin < 0:
        raise ValueError("temperature must be >= 0 K")
    return kelvin * K_B_EV / (hbar_omega0_uev * 1e-6)


def theta_to_kelvin(theta, hbar_omega0_uev=HBAR_OMEGA0_UEV):
    if theta < 0:
        raise ValueError("theta must be >= 0")
    return theta * (hbar_omega0_uev * 1e-6) / K_B_EV


def spectral_density(omega, sd):
    """Evaluate J(omega) for a scalar or array of nonnegative frequencies."""
    w = np.asarray(omega, dtype=float)
    if np.any(w < 0):
        raise ValueError("spectral density is defined for omega >= 0 only")
    with np.errstate(divide="ignore", invalid="ignore"):
        val = 2 * np.pi * sd.eta * sd.omega_c * (w / sd.omega_c) ** sd.s * np.exp(-w / sd.omega_c)
    val = np.where(w == 0, 0.0, val)
    return val if val.ndim else float(val)


def bose_occupation(omega, theta):
    """Bose-Einstein occupation 1/(exp(omega/theta) - 1); identically 0 at theta = 0."""
    w = np.asarray(omega, dtype=float)
    if theta == 0:
        out = np.zeros_like(w)
        return out if out.ndim else 0.0
    if np.any(w <= 0):
        raise ValueError("occupation diverges at omega <= 0 for theta > 0")
    with np.errstate(over="ignore"):
        out = 1.0 / np.expm1(w / theta)
    return out if out.ndim else float(out)


def kernel_g(tau, sd):
    """Closed form of int_0^inf dw/(2pi) J(w) exp(-i w tau).

    Equals eta wc^2 Gamma(s+1) (1 + i wc tau)^-(s+1).
    """
    t = np.asarray(tau, dtype=float)
    val = sd.eta * sd.omega_c**2 * special.gamma(sd.s + 1) * (1 + 1j * sd.omega_c * t) ** (-(sd.s + 1))
    return val if val.ndim else complex(val)


def kernel_g_quad(tau, sd, epsabs=1e-12):
    """Adaptive-quadrature value of g(tau); independent check on kernel_g."""
    if sd.eta == 0:
        return 0j
    return _fourier_quad(lambda w: spectral_density(w, sd) / (2 * np.pi), tau,
                         omega_max=60 * sd.omega_c * max(1.0, sd.s), epsabs=epsabs)


def _fourier_quad(weight, tau, omega_max, epsabs, limit=4000):
    # omega = x^2 absorbs the w^(s-1) endpoint behaviour of J(w) n(w).
    def integrand(x, part):
        w = x * x
        if w == 0.0:
            return 0.0
        f = 2 * x * weight(w)
        return f * np.cos(w * tau) if part == 0 else -f * np.sin(w * tau)

    upper = np.sqrt(omega_max)
    re, err_re = integrate.quad(integrand, 0.0, upper, args=(0,), limit=limit, epsabs=epsabs, epsrel=1e-12)
    im, err_im = integrate.quad(integrand, 0.0, upper, args=(1,), limit=limit, epsabs=epsabs, epsrel=1e-12)
    err = np.hypot(err_re, err_im)
    if not np.isfinite(err) or err > max(100 * epsabs, 1e-6):
        raise QuadratureError(f"thermal kernel quadrature failed at tau={tau}, error estimate {err:.3e}", err)
    return complex(re, im)


def kernel_g_tilde(tau, cfg):
    """int_0^inf dw/(2pi) J(w) n(w, T) exp(-i w tau) by adaptive quadrature.

    Exactly zero at theta = 0. Integration runs over (0, 50 max(wc, theta)]
    in the variable x = sqrt(w), which removes the integrable w^(s-1)
    singularity of sub-Ohmic baths.
    """
    sd = cfg.spectral
    if cfg.zero_temperature or sd.eta == 0:
        return 0j
    omega_max = 50 * max(sd.omega_c, cfg.theta)

    def weight(w):
        with np.errstate(over="ignore"):
            return spectral_density(w, sd) / np.expm1(w / cfg.theta) / (2 * np.pi)

    return _fourier_quad(weight, tau, omega_max, epsabs=1e-10 * sd.eta * sd.omega_c**2)


def hurwitz_zeta_complex(p, a, direct_terms=_EM_DIRECT_TERMS, order=_EM_ORDER):
    """sum_{m>=0} (m + a)^-p for real p > 1 and complex a with Re a > 0.

    Direct summation of the first terms plus an Euler-Maclaurin tail.
    """
    a = np.asarray(a, dtype=complex)
    m = np.arange(direct_terms).reshape((-1,) + (1,) * a.ndim)
    total = np.sum((m + a) ** (-p), axis=0)
    z = direct_terms + a
    tail = z ** (1 - p) / (p - 1) + 0.5 * z ** (-p)
    bern = special.bernoulli(2 * order)
    for j in range(1, order + 1):
        r = 2 * j - 1
        tail = tail + bern[2 * j] / special.factorial(2 * j) * special.poch(p, r) * z ** (-p - r)
    return total + tail


def kernel_g_tilde_series(tau, cfg):
    """Thermal kernel from the Bose series n(w) = sum_m exp(-m w/theta).

    Each term integrates in closed form, giving
    eta wc^(1-s) Gamma(s+1) theta^(s+1) zeta(s+1, 1 + theta/wc + i theta tau).
    Vectorised over tau; used to fill solver grids.
    """
    sd = cfg.spectral
    t = np.asarray(tau, dtype=float)
    if cfg.zero_temperature or sd.eta == 0:
        out = np.zeros(t.shape, dtype=complex)
        return out if out.ndim else 0j
    p = sd.s + 1
    a = 1 + cfg.theta / sd.omega_c + 1j * cfg.theta * t
    pref = sd.eta * sd.omega_c ** (1 - sd.s) * special.gamma(p) * cfg.theta**p
    out = pref * hurwitz_zeta_complex(p, a)
    return out if out.ndim else complex(out)


def kernel_sample(tau, cfg):
    return KernelSample(tau=float(tau), g=kernel_g(tau, cfg.spectral), g_tilde=kernel_g_tilde(tau, cfg))


def kernel_grids(cfg, dt, n):
    """Both kernels sampled at tau = k dt, k = 0..n (the grid-difference cache)."""
    tau = np.arange(n + 1) * dt
    return kernel_g(tau, cfg.spectral), kernel_g_tilde_series(tau, cfg)
