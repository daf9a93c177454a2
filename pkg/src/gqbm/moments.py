"""Gaussian state propagation under the time-local master equation.

For Gaussian states the full dynamics reduces to the mean <a> and the
centered second moments delta_n = <da^dag da>, delta_s = <da da>.  The
master-equation coefficients close these into linear ODEs:

    d<a>/dt = (-i omega_s' - gamma/2) <a> - i omega_bar' <a*>
    dN/dt   = A N + N A^dag + D,   N = [[delta_n, delta_s],
                                        [conj(delta_s), 1 + delta_n]]

with A the mean-equation generator and D = [[gamma_tilde, gamma_bar],
[conj(gamma_bar), gamma + gamma_tilde]].  Quadrature covariances follow
from the mode moments through x = (a + a^dag)/sqrt(2 M omega_s),
p = -i sqrt(M omega_s / 2) (a - a^dag).

Integration uses the explicit midpoint rule on the coefficient grid, with
coefficients linearly interpolated at half steps (consistent with the
second-order accuracy of the coefficient series itself).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import NumericalQualityError, ValidationError

# Commutator drift bound for the second-moment integration.
COMMUTATOR_DRIFT_TOL = 1e-6
# Conjugacy bound for the mean-equation pair (<a>, <a^dag>).
CONJUGACY_TOL = 1e-8


@dataclass
class GaussianMoments:
    """Mean and centered second moments of the open mode.

    delta_n must be nonnegative; a physical Gaussian state additionally
    satisfies delta_n (delta_n + 1) >= |delta_s|^2 (checked by
    require_physical, which evolution entry points call on inputs).
    """

    mean_a: complex = 0.0 + 0.0j
    delta_n: float = 0.0
    delta_s: complex = 0.0 + 0.0j

    def __post_init__(self):
        if self.delta_n < 0.0 or not math.isfinite(self.delta_n):
            raise ValidationError(f"delta_n must be >= 0, got {self.delta_n}")

    def heisenberg_defect(self) -> float:
        """delta_n (delta_n + 1) - |delta_s|^2; negative means unphysical."""
        return self.delta_n * (self.delta_n + 1.0) - abs(self.delta_s) ** 2

    def require_physical(self, tol: float = 1e-12):
        defect = self.heisenberg_defect()
        if defect < -tol:
            raise ValidationError(
                f"moments violate the uncertainty bound by {-defect:.3e}")


@dataclass
class QuadratureCovariances:
    """Symmetrized covariances of x and p (var_x, var_p, cov_xp)."""

    var_x: float
    var_p: float
    cov_xp: float


def to_quadratures(moments: GaussianMoments, mass: float = 1.0,
                   omega_s: float = 1.0) -> QuadratureCovariances:
    """Map mode moments to quadrature covariances (vacuum: 1/(2 M w), M w/2, 0)."""
    if mass <= 0.0 or omega_s <= 0.0:
        raise ValidationError("mass and omega_s must be > 0")
    dn = moments.delta_n
    ds = moments.delta_s
    var_x = (1.0 + 2.0 * dn + 2.0 * ds.real) / (2.0 * mass * omega_s)
    var_p = 0.5 * mass * omega_s * (1.0 + 2.0 * dn - 2.0 * ds.real)
    return QuadratureCovariances(var_x=var_x, var_p=var_p, cov_xp=ds.imag)


def quadratures_to_moments(cov: QuadratureCovariances, mass: float = 1.0,
                           omega_s: float = 1.0) -> GaussianMoments:
    """Inverse of to_quadratures (mean left at zero)."""
    if mass <= 0.0 or omega_s <= 0.0:
        raise ValidationError("mass and omega_s must be > 0")
    a = mass * omega_s * cov.var_x
    b = cov.var_p / (mass * omega_s)
    delta_n = 0.5 * (a + b - 1.0)
    delta_s = 0.5 * (a - b) + 1j * cov.cov_xp
    return GaussianMoments(mean_a=0.0 + 0.0j, delta_n=delta_n, delta_s=delta_s)


def _mean_generator(coeffs) -> np.ndarray:
    """Series of the 2x2 generator of (<a>, <a^dag>)."""
    n = coeffs.times.size
    a = np.empty((n, 2, 2), dtype=complex)
    a[:, 0, 0] = -1j * coeffs.omega_s_prime - 0.5 * coeffs.gamma
    a[:, 0, 1] = -1j * coeffs.omega_bar_prime
    a[:, 1, 0] = 1j * np.conj(coeffs.omega_bar_prime)
    a[:, 1, 1] = 1j * coeffs.omega_s_prime - 0.5 * coeffs.gamma
    return a


def _diffusion(coeffs) -> np.ndarray:
    n = coeffs.times.size
    d = np.empty((n, 2, 2), dtype=complex)
    d[:, 0, 0] = coeffs.gamma_tilde
    d[:, 0, 1] = coeffs.gamma_bar
    d[:, 1, 0] = np.conj(coeffs.gamma_bar)
    d[:, 1, 1] = coeffs.gamma + coeffs.gamma_tilde
    return d


def evolve_means(coeffs, init: GaussianMoments, grid) -> np.ndarray:
    """<a>(t) on the grid; the conjugate component is monitored, not trusted."""
    init.require_physical()
    _require_grid_match(coeffs, grid)
    a_ser = _mean_generator(coeffs)
    dt = grid.dt
    n = grid.n_steps

    y = np.array([init.mean_a, np.conj(init.mean_a)], dtype=complex)
    out = np.empty(n + 1, dtype=complex)
    out[0] = y[0]
    for m in range(n):
        a0 = a_ser[m]
        a_half = 0.5 * (a_ser[m] + a_ser[m + 1])
        y_half = y + 0.5 * dt * (a0 @ y)
        y = y + dt * (a_half @ y_half)
        dev = abs(y[1] - np.conj(y[0]))
        if dev > CONJUGACY_TOL * max(1.0, abs(y[0])):
            raise NumericalQualityError(
                f"mean conjugacy violated by {dev:.3e} at t = "
                f"{grid.times[m + 1]:.6g}")
        out[m + 1] = y[0]
    return out


@dataclass
class SecondMomentSeries:
    """delta_n(t), delta_s(t) and the integrated commutator drift."""

    times: np.ndarray
    delta_n: np.ndarray
    delta_s: np.ndarray
    max_commutator_drift: float

    def n_matrix(self) -> np.ndarray:
        out = np.empty((self.times.size, 2, 2), dtype=complex)
        out[:, 0, 0] = self.delta_n
        out[:, 0, 1] = self.delta_s
        out[:, 1, 0] = np.conj(self.delta_s)
        out[:, 1, 1] = 1.0 + self.delta_n
        return out


def evolve_covariances(coeffs, init: GaussianMoments, grid) -> SecondMomentSeries:
    """Second moments under dN/dt = A N + N A^dag + D.

    The redundant <da da^dag> entry is propagated rather than pinned to
    1 + delta_n, so the commutator defect measures integration quality;
    drift beyond 1e-6 raises NumericalQualityError.  No positivity
    clipping is applied anywhere.
    """
    init.require_physical()
    _require_grid_match(coeffs, grid)
    a_ser = _mean_generator(coeffs)
    d_ser = _diffusion(coeffs)
    dt = grid.dt
    n = grid.n_steps

    nm = np.array([[init.delta_n, init.delta_s],
                   [np.conj(init.delta_s), 1.0 + init.delta_n]], dtype=complex)
    delta_n = np.empty(n + 1)
    delta_s = np.empty(n + 1, dtype=complex)
    delta_n[0] = nm[0, 0].real
    delta_s[0] = nm[0, 1]
    drift = abs(nm[1, 1] - nm[0, 0] - 1.0)

    def rhs(a, d, mat):
        return a @ mat + mat @ np.conj(a).T + d

    for m in range(n):
        a0, d0 = a_ser[m], d_ser[m]
        a_half = 0.5 * (a_ser[m] + a_ser[m + 1])
        d_half = 0.5 * (d_ser[m] + d_ser[m + 1])
        half = nm + 0.5 * dt * rhs(a0, d0, nm)
        nm = nm + dt * rhs(a_half, d_half, half)

        drift = max(drift, abs(nm[1, 1] - nm[0, 0] - 1.0))
        if drift > COMMUTATOR_DRIFT_TOL:
            raise NumericalQualityError(
                f"commutator drift {drift:.3e} at t = {grid.times[m + 1]:.6g} "
                f"exceeds {COMMUTATOR_DRIFT_TOL:.1e}")
        delta_n[m + 1] = nm[0, 0].real
        delta_s[m + 1] = nm[0, 1]
    return SecondMomentSeries(times=grid.times, delta_n=delta_n,
                              delta_s=delta_s, max_commutator_drift=drift)


def evolve_hpz_covariances(hpz, init: QuadratureCovariances, grid,
                           mass: float = 1.0, omega_s: float = 1.0) -> dict:
    """Quadrature covariances under the position-coupled (alpha = 1) form.

    d/dt Cov = F Cov + Cov F^T + D_q with
    F = [[0, 1/M], [-M (omega_s^2 + d_omega^2), -2 Gamma]],
    D_q = [[0, Gamma_f], [Gamma_f, 2 M Gamma_h]].
    Returns arrays var_x, var_p, cov_xp on the grid.
    """
    if mass <= 0.0 or omega_s <= 0.0:
        raise ValidationError("mass and omega_s must be > 0")
    n = grid.n_steps
    dt = grid.dt
    if hpz.times.size != n + 1:
        raise ValidationError("coefficient series does not match the grid")

    f_ser = np.zeros((n + 1, 2, 2))
    f_ser[:, 0, 1] = 1.0 / mass
    f_ser[:, 1, 0] = -mass * (omega_s**2 + hpz.delta_omega_sq)
    f_ser[:, 1, 1] = -2.0 * hpz.gamma_damping
    d_ser = np.zeros((n + 1, 2, 2))
    d_ser[:, 0, 1] = hpz.gamma_f
    d_ser[:, 1, 0] = hpz.gamma_f
    d_ser[:, 1, 1] = 2.0 * mass * hpz.gamma_h

    cov = np.array([[init.var_x, init.cov_xp],
                    [init.cov_xp, init.var_p]], dtype=float)
    var_x = np.empty(n + 1)
    var_p = np.empty(n + 1)
    cov_xp = np.empty(n + 1)
    var_x[0], var_p[0], cov_xp[0] = cov[0, 0], cov[1, 1], cov[0, 1]

    def rhs(f, d, mat):
        return f @ mat + mat @ f.T + d

    for m in range(n):
        f0, d0 = f_ser[m], d_ser[m]
        f_half = 0.5 * (f_ser[m] + f_ser[m + 1])
        d_half = 0.5 * (d_ser[m] + d_ser[m + 1])
        half = cov + 0.5 * dt * rhs(f0, d0, cov)
        cov = cov + dt * rhs(f_half, d_half, half)
        var_x[m + 1], var_p[m + 1] = cov[0, 0], cov[1, 1]
        cov_xp[m + 1] = 0.5 * (cov[0, 1] + cov[1, 0])
    return {"var_x": var_x, "var_p": var_p, "cov_xp": cov_xp}


def _require_grid_match(coeffs, grid):
    if coeffs.times.size != grid.n_steps + 1 or not np.isclose(
            coeffs.times[-1], grid.t_end):
        raise ValidationError(
            "coefficient series was computed on a different grid")
