"""Retarded and fluctuation Green functions of the open mode.

The retarded propagator U(t) (2x2, basis a / a^dagger) solves

    dU/dt + i omega_s Z U + int_0^t Z G(t - s) U(s) ds = 0,   U(0) = 1,

and carries the full non-Markovian memory of the bath.  The fluctuation
matrix

    V(tau, t) = int_0^tau int_0^t U(tau - s) Z Gt(s - s') Z U(t - s')^dag ds ds'

is the inhomogeneous part of the second moments: N(t) = U N(0) U^dag + V(t,t).
Two independent routes to V are provided: direct double-quadrature of the
closed form (solve_v_fdt, O(n^2)) and marching of the Volterra equation V
itself satisfies in its first argument (solve_v_volterra, O(n^3), also
yielding the two-time table needed by the coefficient crosscheck).

Numerics: uniform grid, second-order predictor-corrector marching
(two-step Adams-Bashforth predictor, trapezoid corrector, trapezoid memory
integrals, one midpoint step to start).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ContractViolationError, InstabilityError, ValidationError
from .spectral import BathDiscretization, Kernel, Z

# Marching guards: a propagator entry beyond this magnitude means runaway
# pair production (or an unstable discretization), not physics we can trust.
INSTABILITY_MAX_ABS = 1e6
# Resolution guard: dt must resolve the fastest retained scale.
MAX_DT_FACTOR = 0.25


@dataclass(frozen=True)
class TimeGrid:
    """Uniform output grid t = 0 .. t_end with n_steps intervals.

    max_frequency is the fastest scale the grid must resolve (typically
    max(omega_s, cutoff)); construction enforces dt <= 0.25 / max_frequency.
    """

    t_end: float
    n_steps: int
    max_frequency: float = 1.0

    def __post_init__(self):
        if not (self.t_end > 0.0 and math.isfinite(self.t_end)):
            raise ValidationError(f"t_end must be > 0, got {self.t_end}")
        if self.n_steps < 8:
            raise ValidationError(f"n_steps must be >= 8, got {self.n_steps}")
        if not (self.max_frequency > 0.0):
            raise ValidationError("max_frequency must be > 0")
        if self.dt > MAX_DT_FACTOR / self.max_frequency:
            raise ValidationError(
                f"dt = {self.dt:.3e} exceeds {MAX_DT_FACTOR} / max_frequency "
                f"= {MAX_DT_FACTOR / self.max_frequency:.3e}; increase n_steps")

    @property
    def dt(self) -> float:
        return self.t_end / self.n_steps

    @property
    def times(self) -> np.ndarray:
        return np.linspace(0.0, self.t_end, self.n_steps + 1)


@dataclass
class GreensSolution:
    """U, dU/dt, and (optionally) V on a common grid.

    u_dot is evaluated from the integro-differential equation itself, never
    by finite differencing, so it is consistent with u to the order of the
    scheme.  v_two_time[i, j] = V(t_i, t_j) for i <= j when requested.
    """

    grid: TimeGrid
    omega_s: float
    u: np.ndarray
    u_dot: np.ndarray
    v_equal_time: np.ndarray | None = None
    v_two_time: np.ndarray | None = None
    metadata: dict = field(default_factory=dict)


@dataclass
class InitialCorrelations:
    """System-bath cross correlations of the initial total state.

    n_prime[k] = <a^dag b_k>(0), s_prime[k] = <a b_k>(0).
    """

    n_prime: np.ndarray
    s_prime: np.ndarray

    def __post_init__(self):
        n = np.atleast_1d(np.asarray(self.n_prime, dtype=complex))
        s = np.atleast_1d(np.asarray(self.s_prime, dtype=complex))
        if n.shape != s.shape or n.ndim != 1:
            raise ValidationError("n_prime and s_prime must be matching 1-d arrays")
        object.__setattr__(self, "n_prime", n)
        object.__setattr__(self, "s_prime", s)


def _zmul(mats: np.ndarray) -> np.ndarray:
    """Left-multiply a (..., 2, 2) stack by Z = diag(1, -1)."""
    out = mats.copy()
    out[..., 1, :] *= -1.0
    return out


def _check_finite(mat: np.ndarray, step: int, time: float, label: str):
    amax = np.max(np.abs(mat))
    if not np.isfinite(amax) or amax > INSTABILITY_MAX_ABS:
        raise InstabilityError(
            f"|{label}| reached {amax:.3e} at step {step} (t = {time:.6g}); "
            f"bound is {INSTABILITY_MAX_ABS:.1e}")


def solve_u(kernel: Kernel, omega_s: float, grid: TimeGrid) -> GreensSolution:
    """March the retarded propagator U over the grid."""
    n = grid.n_steps
    dt = grid.dt
    times = grid.times

    zg = _zmul(kernel.g_table(grid))          # Z G(t_m) for m = 0..n
    eye = np.eye(2, dtype=complex)
    mws = -1j * omega_s * Z

    u = np.empty((n + 1, 2, 2), dtype=complex)
    udot = np.empty_like(u)
    u[0] = eye
    udot[0] = mws.copy()                      # memory integral vanishes at t = 0

    # midpoint bootstrap; the memory over [0, dt/2] uses the kernel at dt/2
    zg_half = _zmul(kernel.g(np.array([0.5 * dt])))[0]
    u_half = u[0] + 0.5 * dt * udot[0]
    mem_half = 0.25 * dt * (zg_half @ u[0] + zg[0] @ u_half)
    u[1] = u[0] + dt * (mws @ u_half - mem_half)
    mem1 = 0.5 * dt * (zg[1] @ u[0] + zg[0] @ u[1])
    udot[1] = mws @ u[1] - mem1
    _check_finite(u[1], 1, times[1], "U")

    half_zg0 = 0.5 * dt * zg[0]
    for m in range(2, n + 1):
        # history part of the trapezoid memory (everything except the new point)
        hist = np.einsum("jab,jbc->ac", zg[m - 1:0:-1], u[1:m])
        hist += 0.5 * zg[m] @ u[0]
        hist *= dt

        pred = u[m - 1] + dt * (1.5 * udot[m - 1] - 0.5 * udot[m - 2])
        f_pred = mws @ pred - (hist + half_zg0 @ pred)
        u[m] = u[m - 1] + 0.5 * dt * (udot[m - 1] + f_pred)
        udot[m] = mws @ u[m] - (hist + half_zg0 @ u[m])
        _check_finite(u[m], m, times[m], "U")

    return GreensSolution(
        grid=grid, omega_s=omega_s, u=u, u_dot=udot,
        metadata={"u_solver": "pc2(ab2+trapezoid, midpoint start)"},
    )


def _fdt_double_integral(inner: np.ndarray, udag: np.ndarray,
                         zgtz: np.ndarray, n: int, dt: float) -> np.ndarray:
    """Product-trapezoid of int_0^t int_0^t inner(x) ZGtZ(y-x) udag(y) dx dy.

    inner is U (for V) or dU/dt (for the first-argument derivative of V);
    zgtz is the signed-offset table with index n + k at offset k dt.
    Runs in O(n^2) by accumulating B(y, t) = int_0^t inner(x) ZGtZ(y-x) dx
    for every grid y as t advances.
    """
    out = np.empty((n + 1, 2, 2), dtype=complex)
    out[0] = 0.0

    # B[k] accumulates the inner integral for y = t_k; e_old caches the
    # integrand at the previous x endpoint to avoid recomputing it.
    e_old = np.einsum("ab,kbc->kac", inner[0], zgtz[n:2 * n + 1])
    b = np.zeros_like(e_old)
    for m in range(1, n + 1):
        e_new = np.einsum("ab,kbc->kac", inner[m], zgtz[n - m:2 * n + 1 - m])
        b += 0.5 * dt * (e_old + e_new)
        e_old = e_new

        acc = np.einsum("kab,kbc->ac", b[:m + 1], udag[:m + 1])
        acc -= 0.5 * (b[0] @ udag[0] + b[m] @ udag[m])
        out[m] = dt * acc
    return out


def solve_v_fdt(kernel: Kernel, u: np.ndarray, grid: TimeGrid) -> np.ndarray:
    """Equal-time V(t, t) from the closed double-quadrature form."""
    n = grid.n_steps
    if u.shape != (n + 1, 2, 2):
        raise ContractViolationError(
            f"u has shape {u.shape}, expected {(n + 1, 2, 2)} for this grid")
    gt = kernel.gtilde_signed_table(grid)
    zgtz = gt.copy()
    zgtz[:, 0, 1] *= -1.0
    zgtz[:, 1, 0] *= -1.0
    udag = np.conj(np.swapaxes(u, -1, -2))
    return _fdt_double_integral(u, udag, zgtz, n, grid.dt)


def v_first_derivative(kernel: Kernel, sol: GreensSolution) -> np.ndarray:
    """d/dtau V(tau, t) at tau = t, from the differentiated closed form.

    Splits into the boundary term int_0^t Z Gt(s) Z U(s)^dag ds plus the
    same double integral as V with dU/dt in place of U.
    """
    grid = sol.grid
    n = grid.n_steps
    dt = grid.dt
    gt = kernel.gtilde_signed_table(grid)
    zgtz = gt.copy()
    zgtz[:, 0, 1] *= -1.0
    zgtz[:, 1, 0] *= -1.0
    udag = np.conj(np.swapaxes(sol.u, -1, -2))

    vdot = _fdt_double_integral(sol.u_dot, udag, zgtz, n, dt)

    # cumulative trapezoid of the boundary integrand ZGt(s)Z U(s)^dag
    integrand = np.einsum("kab,kbc->kac", zgtz[n:2 * n + 1], udag)
    increments = 0.5 * dt * (integrand[:-1] + integrand[1:])
    vdot[1:] += np.cumsum(increments, axis=0)
    return vdot


def solve_v_volterra(kernel: Kernel, sol: GreensSolution,
                     return_two_time: bool = False):
    """Equal-time V(t, t) by marching the Volterra equation in tau.

    For every fixed second argument t_j the first column argument satisfies

        dV/dtau = -i omega_s Z V - int_0^tau Z G(tau - s) V(s, t_j) ds
                  + int_0^t_j Z Gt(tau - s') Z U(t_j - s')^dag ds',

    with V(0, t_j) = 0.  All columns march together (vectorized over j).
    Returns the equal-time diagonal, or (diagonal, full table) when
    return_two_time is set; table[i, j] = V(t_i, t_j) for i <= j.
    """
    grid = sol.grid
    n = grid.n_steps
    dt = grid.dt
    u = sol.u
    omega_s = sol.omega_s

    zg = _zmul(kernel.g_table(grid))
    gt = kernel.gtilde_signed_table(grid)
    zgtz = gt.copy()
    zgtz[:, 0, 1] *= -1.0
    zgtz[:, 1, 0] *= -1.0
    udag = np.conj(np.swapaxes(u, -1, -2))
    mws = -1j * omega_s * Z

    # Source table R[i, j] = driving at (tau_i, t_j), built cumulatively in j
    # at fixed offset d = i - j: R(tau, t) depends on tau - t and t only.
    # q[d_idx, j] holds the offset d = d_idx - n (so d in [-n, 0]).
    q = np.zeros((n + 1, n + 1, 2, 2), dtype=complex)
    for j in range(1, n + 1):
        inc_old = np.einsum("dab,bc->dac", zgtz[j - 1:j + n], udag[j - 1])
        inc_new = np.einsum("dab,bc->dac", zgtz[j:j + n + 1], udag[j])
        q[:, j] = q[:, j - 1] + 0.5 * dt * (inc_old + inc_new)

    def source_row(i: int) -> np.ndarray:
        # R(tau_i, t_j) for j >= i: gather q at d_idx = n + i - j
        cols = np.arange(i, n + 1)
        return q[n + i - cols, cols]

    v = np.zeros((n + 1, n + 1, 2, 2), dtype=complex)
    # f arrays hold dV/dtau at the last two tau levels for ALL columns; for
    # columns j < i the values are stale but never used again.
    r0 = source_row(0)
    f_prev = r0.copy()  # V(0, t_j) = 0, memory empty: dV/dtau(0) = R(0, t_j)

    zg_half = _zmul(kernel.g(np.array([0.5 * dt])))[0]
    half_zg0 = 0.5 * dt * zg[0]

    # midpoint bootstrap for tau_0 -> tau_1, columns j >= 1
    r1 = np.zeros((n + 1, 2, 2), dtype=complex)
    r1[1:] = source_row(1)
    act = slice(1, n + 1)
    v_half = 0.5 * dt * f_prev[act]
    r_half = 0.5 * (r0[act] + r1[act])
    mem_half = 0.25 * dt * np.einsum("ab,jbc->jac", zg[0], v_half)
    f_half = (np.einsum("ab,jbc->jac", mws, v_half) - mem_half
              - 0.25 * dt * np.einsum("ab,jbc->jac", zg_half, v[0, act])
              + r_half)
    v[1, act] = dt * f_half
    mem1 = 0.5 * dt * (np.einsum("ab,jbc->jac", zg[1], v[0, act])
                       + np.einsum("ab,jbc->jac", zg[0], v[1, act]))
    f_curr = np.zeros_like(f_prev)
    f_curr[act] = (np.einsum("ab,jbc->jac", mws, v[1, act]) - mem1 + r1[act])

    for i in range(2, n + 1):
        act = slice(i, n + 1)
        ri = source_row(i)

        hist = dt * np.einsum("sab,sjbc->jac", zg[i - 1:0:-1], v[1:i, act])
        pred = v[i - 1, act] + dt * (1.5 * f_curr[act] - 0.5 * f_prev[act])
        f_pred = (np.einsum("ab,jbc->jac", mws, pred)
                  - (hist + np.einsum("ab,jbc->jac", half_zg0, pred)) + ri)
        v[i, act] = v[i - 1, act] + 0.5 * dt * (f_curr[act] + f_pred)

        f_prev, f_curr = f_curr, f_prev
        f_curr[act] = (np.einsum("ab,jbc->jac", mws, v[i, act])
                       - (hist + np.einsum("ab,jbc->jac", half_zg0, v[i, act]))
                       + ri)
        _check_finite(v[i, act], i, grid.times[i], "V")

    diag = np.einsum("iiab->iab", v).copy()
    if return_two_time:
        return diag, v
    return diag


def correlated_correction(bath: BathDiscretization, corr: InitialCorrelations,
                          u: np.ndarray, grid: TimeGrid) -> np.ndarray:
    """Equal-time V correction from initial system-bath cross correlations.

    An initially correlated Gaussian total state adds a boundary
    (delta-supported) piece to the fluctuation kernel; after the time-ordered
    integrals collapse it contributes

        dV(t) = -i [ int_0^t U(t - s) Z E(s) ds ] U(t)^dag + h.c.,
        E(s)  = sum_k C_k(s) Q'_k,

    where C_k carries the coupling phases of mode k and Q'_k the initial
    cross moments <a^dag b_k>, <a b_k>.
    """
    if corr.n_prime.size != bath.n_modes:
        raise ContractViolationError(
            f"correlations carry {corr.n_prime.size} modes, bath has {bath.n_modes}")
    n = grid.n_steps
    dt = grid.dt
    if u.shape != (n + 1, 2, 2):
        raise ContractViolationError(
            f"u has shape {u.shape}, expected {(n + 1, 2, 2)} for this grid")

    times = grid.times
    vk = bath.v_couplings
    wk = bath.w_couplings
    np_k = corr.n_prime
    sp_k = corr.s_prime

    # E(s) = sum_k C_k(s) Q'_k with
    # C_k(s) = [[V_k e^{-i w s}, W_k e^{+i w s}], [W_k e^{-i w s}, V_k e^{+i w s}]]
    # Q'_k   = [[n'_k, s'_k], [conj(s'_k), conj(n'_k)]]
    ph_m = np.exp(-1j * np.outer(times, bath.frequencies))
    ph_p = np.conj(ph_m)
    e = np.empty((n + 1, 2, 2), dtype=complex)
    e[:, 0, 0] = ph_m @ (vk * np_k) + ph_p @ (wk * np.conj(sp_k))
    e[:, 0, 1] = ph_m @ (vk * sp_k) + ph_p @ (wk * np.conj(np_k))
    e[:, 1, 0] = ph_m @ (wk * np_k) + ph_p @ (vk * np.conj(sp_k))
    e[:, 1, 1] = ph_m @ (wk * sp_k) + ph_p @ (vk * np.conj(np_k))

    ze = _zmul(e)
    out = np.zeros((n + 1, 2, 2), dtype=complex)
    for m in range(1, n + 1):
        conv = np.einsum("jab,jbc->ac", u[m::-1], ze[:m + 1])
        conv -= 0.5 * (u[m] @ ze[0] + u[0] @ ze[m])
        term1 = -1j * dt * conv @ np.conj(u[m]).T
        out[m] = term1 + np.conj(term1).T
    return out
