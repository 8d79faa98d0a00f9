"""Brute-force u(t) and v(t) from an explicitly discretized reservoir.

The cavity plus N reservoir modes form a quadratic Hamiltonian whose
one-particle matrix is diagonalized once; u(t) and v(t) then follow from the
cavity row of exp(-i H1 t). Nothing here shares code with the Volterra path.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy import linalg

from .reservoir import bose_occupation, spectral_density

DEFAULT_MODES = 2000
_TIME_CHUNK = 256


@dataclass
class DiscreteReservoir:
    """Mode frequencies and squared couplings |V_k|^2 (hbar = 1)."""

    omegas: np.ndarray
    couplings_sq: np.ndarray
    spacing: np.ndarray = None
    _eig: tuple = field(default=None, init=False, repr=False)

    def __post_init__(self):
        self.omegas = np.asarray(self.omegas, dtype=float)
        self.couplings_sq = np.asarray(self.couplings_sq, dtype=float)
        if np.any(self.omegas <= 0):
            raise ValueError("mode frequencies must be positive")
        if np.any(self.couplings_sq < 0):
            raise ValueError("squared couplings must be nonnegative")

    @property
    def n_modes(self):
        return len(self.omegas)

    def sum_rule(self):
        return float(np.sum(self.couplings_sq))

    def recurrence_time(self):
        """Earliest revival time 2 pi / (largest local mode spacing)."""
        spacing = self.spacing if self.spacing is not None else np.diff(self.omegas)
        return 2 * np.pi / float(np.max(spacing))

    def one_particle_matrix(self, omega0=1.0):
        n = self.n_modes
        h = np.zeros((n + 1, n + 1))
        h[0, 0] = omega0
        h[0, 1:] = h[1:, 0] = np.sqrt(self.couplings_sq)
        h[np.arange(1, n + 1), np.arange(1, n + 1)] = self.omegas
        return h

    def eigensystem(self, omega0=1.0):
        if self._eig is None or self._eig[0] != omega0:
            try:
                vals, vecs = linalg.eigh(self.one_particle_matrix(omega0))
            except linalg.LinAlgError as exc:
                raise RuntimeError(f"eigendecomposition of the one-particle matrix failed: {exc}") from exc
            self._eig = (omega0, vals, vecs)
        return self._eig[1], self._eig[2]


def discretize_reservoir(sd, n_modes=DEFAULT_MODES, omega_max=None, grid="sqrt"):
    """Sample J(w) on N midpoint modes, |V_k|^2 = J(w_k) dw_k / (2 pi).

    ``grid="linear"`` uses equal spacing in w. ``grid="sqrt"`` uses equal
    spacing in x = sqrt(w), which keeps the thermal weight J(w) n(w) smooth
    at w -> 0 for sub-Ohmic baths.
    """
    omega_max = 20 * sd.omega_c if omega_max is None else omega_max
    if grid == "linear":
        dw = omega_max / n_modes
        omegas = (np.arange(n_modes) + 0.5) * dw
        widths = np.full(n_modes, dw)
    elif grid == "sqrt":
        x_max = np.sqrt(omega_max)
        dx = x_max / n_modes
        x = (np.arange(n_modes) + 0.5) * dx
        omegas = x * x
        widths = 2 * x * dx
    else:
        raise ValueError(f"unknown grid {grid!r}")
    couplings_sq = spectral_density(omegas, sd) * widths / (2 * np.pi)
    return DiscreteReservoir(omegas=omegas, couplings_sq=couplings_sq, spacing=widths)


def _cavity_rows(dr, omega0, times):
    """Yield (slice, rows) with rows[i, j] = [exp(-i H1 t_i)]_{0j}."""
    vals, vecs = dr.eigensystem(omega0)
    first = vecs[0]
    times = np.asarray(times, dtype=float)
    for start in range(0, len(times), _TIME_CHUNK):
        sl = slice(start, start + _TIME_CHUNK)
        phases = np.exp(-1j * np.outer(times[sl], vals))
        yield sl, (phases * first) @ vecs.T


def exact_u_oracle(dr, omega0, times):
    out = np.empty(len(times), dtype=complex)
    for sl, rows in _cavity_rows(dr, omega0, times):
        out[sl] = rows[:, 0]
    return out


def exact_v_oracle(dr, theta, omega0, times):
    """v(t) = sum_k n(w_k) |[exp(-i H1 t)]_{0k}|^2; exactly zero at theta = 0."""
    if theta == 0:
        return np.zeros(len(times))
    occ = bose_occupation(dr.omegas, theta)
    out = np.empty(len(times))
    for sl, rows in _cavity_rows(dr, omega0, times):
        out[sl] = np.abs(rows[:, 1:]) ** 2 @ occ
    return out


def exact_green_functions(dr, theta, omega0, times):
    """u, v and the unitarity residual max_t |sum_j |row_j|^2 - 1| in one pass."""
    occ = bose_occupation(dr.omegas, theta)
    u = np.empty(len(times), dtype=complex)
    v = np.empty(len(times))
    residual = 0.0
    for sl, rows in _cavity_rows(dr, omega0, times):
        weights = np.abs(rows) ** 2
        u[sl] = rows[:, 0]
        v[sl] = weights[:, 1:] @ occ
        residual = max(residual, float(np.max(np.abs(weights.sum(axis=1) - 1))))
    return u, v, residual
