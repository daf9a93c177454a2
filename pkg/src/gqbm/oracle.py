"""Exact finite-bath reference dynamics (the validation oracle).

A bath truncated to N discrete modes makes the total Hamiltonian a finite
quadratic form, so the Heisenberg equations close on the operator vector

    A = (a, a^dag, b_1, b_1^dag, ..., b_N, b_N^dag),   dA/dt = generator A,

and every reduced quantity of the open mode follows from the Bogoliubov
propagator S(t) = exp(generator * t) without any master-equation input.
This module never touches the kernel machinery; agreement between the two
routes is therefore a genuine cross-validation.

The generator has arrowhead structure (system row/column plus a diagonal),
so its action costs O(N) and the propagation uses fixed-substep RK4 tuned
to keep the local error at the 1e-10 level.  A finite bath revives: results
are trustworthy only below the recurrence horizon ~ 2 pi / min mode spacing,
which propagate() reports.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    ContractViolationError,
    InstabilityError,
    NumericalQualityError,
    ValidationError,
)
from .greens import InitialCorrelations, TimeGrid
from .moments import GaussianMoments
from .spectral import BathDiscretization, n_bar

# Target local truncation error of one RK4 substep, |lambda h|^5 / 120.
RK4_LOCAL_ERROR = 1e-10
RECURRENCE_GUARD = 0.5
# Fixed-substep RK4 is the wrong tool past this many substeps per output step.
MAX_SUBSTEPS_PER_STEP = 1_000_000


@dataclass
class LinearDynamics:
    """Heisenberg generator of the total (system + N modes) quadratic model.

    Operator ordering: index 0 = a, 1 = a^dag, 2k+2 = b_k, 2k+3 = b_k^dag.
    """

    omega_s: float
    frequencies: np.ndarray
    v_couplings: np.ndarray
    w_couplings: np.ndarray

    @property
    def n_modes(self) -> int:
        return int(self.frequencies.size)

    @property
    def dim(self) -> int:
        return 2 * self.n_modes + 2

    def matvec(self, x: np.ndarray) -> np.ndarray:
        """generator @ x for x of shape (dim,) or (dim, batch)."""
        w = self.frequencies
        v = self.v_couplings
        wc = self.w_couplings
        xs, xsd = x[0], x[1]
        xb, xbd = x[2::2], x[3::2]
        out = np.empty_like(x)
        out[0] = -1j * (self.omega_s * xs + v @ xb + wc @ xbd)
        out[1] = 1j * (self.omega_s * xsd + v @ xbd + wc @ xb)
        shape = (-1,) + (1,) * (x.ndim - 1)
        out[2::2] = -1j * (w.reshape(shape) * xb + np.multiply.outer(v, xs)
                           + np.multiply.outer(wc, xsd))
        out[3::2] = 1j * (w.reshape(shape) * xbd + np.multiply.outer(v, xsd)
                          + np.multiply.outer(wc, xs))
        return out

    def matvec_transpose(self, x: np.ndarray) -> np.ndarray:
        """generator^T @ x (needed to propagate rows of S)."""
        w = self.frequencies
        v = self.v_couplings
        wc = self.w_couplings
        xs, xsd = x[0], x[1]
        xb, xbd = x[2::2], x[3::2]
        out = np.empty_like(x)
        out[0] = -1j * (self.omega_s * xs + v @ xb - wc @ xbd)
        out[1] = 1j * (self.omega_s * xsd + v @ xbd - wc @ xb)
        shape = (-1,) + (1,) * (x.ndim - 1)
        out[2::2] = -1j * (w.reshape(shape) * xb + np.multiply.outer(v, xs)
                           - np.multiply.outer(wc, xsd))
        out[3::2] = 1j * (w.reshape(shape) * xbd + np.multiply.outer(v, xsd)
                          - np.multiply.outer(wc, xs))
        return out

    def as_matrix(self) -> np.ndarray:
        """Dense generator; intended for small N (tests, spectra)."""
        g = np.zeros((self.dim, self.dim), dtype=complex)
        g[0, 0] = -1j * self.omega_s
        g[1, 1] = 1j * self.omega_s
        for k in range(self.n_modes):
            b, bd = 2 * k + 2, 2 * k + 3
            g[b, b] = -1j * self.frequencies[k]
            g[bd, bd] = 1j * self.frequencies[k]
            g[0, b] = -1j * self.v_couplings[k]
            g[0, bd] = -1j * self.w_couplings[k]
            g[1, bd] = 1j * self.v_couplings[k]
            g[1, b] = 1j * self.w_couplings[k]
            g[b, 0] = -1j * self.v_couplings[k]
            g[b, 1] = -1j * self.w_couplings[k]
            g[bd, 1] = 1j * self.v_couplings[k]
            g[bd, 0] = 1j * self.w_couplings[k]
        return g

    def sigma(self) -> np.ndarray:
        """Commutation metric diag(+1, -1, ...) in the interleaved ordering."""
        s = np.ones(self.dim)
        s[1::2] = -1.0
        return s


def build_dynamics(bath: BathDiscretization, omega_s: float) -> LinearDynamics:
    if not math.isfinite(omega_s):
        raise ValidationError("omega_s must be finite")
    return LinearDynamics(
        omega_s=float(omega_s),
        frequencies=np.asarray(bath.frequencies, dtype=float),
        v_couplings=np.asarray(bath.v_couplings, dtype=float),
        w_couplings=np.asarray(bath.w_couplings, dtype=float),
    )


@dataclass
class BogoliubovPropagator:
    """System rows and columns of S(t) = exp(generator t) on a grid.

    sys_cols[m] = S(t_m)[:, :2] (how initial system operators spread into
    the bath); sys_rows[m] = S(t_m)[:2, :] (what the evolved system
    operators are made of).  u_series is the 2x2 system block.
    recurrence_horizon is the earliest finite-bath revival estimate.
    """

    grid: TimeGrid
    dim: int
    sys_cols: np.ndarray
    sys_rows: np.ndarray
    recurrence_horizon: float
    metadata: dict = field(default_factory=dict)

    @property
    def u_series(self) -> np.ndarray:
        return self.sys_cols[:, :2, :]


def _rk4_march(matvec, x: np.ndarray, h: float, n_sub: int) -> np.ndarray:
    for _ in range(n_sub):
        k1 = matvec(x)
        k2 = matvec(x + 0.5 * h * k1)
        k3 = matvec(x + 0.5 * h * k2)
        k4 = matvec(x + h * k3)
        x = x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    return x


def propagate(dyn: LinearDynamics, grid: TimeGrid) -> BogoliubovPropagator:
    """March the system rows and columns of S over the grid with RK4."""
    n = grid.n_steps
    dt = grid.dt

    # |lambda| h <= (120 * tol)^(1/5) keeps one-substep error below tol
    omega_ref = max(float(np.max(dyn.frequencies, initial=0.0)),
                    abs(dyn.omega_s),
                    float(np.sum(np.abs(dyn.v_couplings))
                          + np.sum(np.abs(dyn.w_couplings))))
    h_target = (120.0 * RK4_LOCAL_ERROR) ** 0.2 / max(omega_ref, 1e-12)
    n_sub = max(1, int(math.ceil(dt / h_target)))
    if n_sub > MAX_SUBSTEPS_PER_STEP:
        raise ValidationError(
            f"grid is too stiff for the fixed-substep integrator: "
            f"dt = {dt:.3e} against fastest scale {omega_ref:.3e} needs "
            f"{n_sub} substeps per step (cap {MAX_SUBSTEPS_PER_STEP})")
    h = dt / n_sub

    if dyn.n_modes > 1:
        spacing = float(np.min(np.diff(np.sort(dyn.frequencies))))
        horizon = RECURRENCE_GUARD * 2.0 * math.pi / max(spacing, 1e-300)
    else:
        horizon = math.inf

    cols = np.zeros((dyn.dim, 2), dtype=complex)
    cols[0, 0] = 1.0
    cols[1, 1] = 1.0
    rows_t = cols.copy()  # columns of S^T, i.e. rows of S

    sys_cols = np.empty((n + 1, dyn.dim, 2), dtype=complex)
    sys_rows = np.empty((n + 1, 2, dyn.dim), dtype=complex)
    sys_cols[0] = cols
    sys_rows[0] = rows_t.T

    for m in range(1, n + 1):
        cols = _rk4_march(dyn.matvec, cols, h, n_sub)
        rows_t = _rk4_march(dyn.matvec_transpose, rows_t, h, n_sub)
        amax = max(np.max(np.abs(cols)), np.max(np.abs(rows_t)))
        if not np.isfinite(amax) or amax > 1e6:
            raise InstabilityError(
                f"|S| reached {amax:.3e} at step {m} (t = {grid.times[m]:.6g})")
        sys_cols[m] = cols
        sys_rows[m] = rows_t.T

    return BogoliubovPropagator(
        grid=grid, dim=dyn.dim, sys_cols=sys_cols, sys_rows=sys_rows,
        recurrence_horizon=horizon,
        metadata={"scheme": "rk4-fixed", "substeps_per_step": n_sub,
                  "substep": h},
    )


@dataclass
class OracleMoments:
    """Reduced system moments from the finite-bath propagation."""

    times: np.ndarray
    mean_a: np.ndarray
    delta_n: np.ndarray
    delta_s: np.ndarray
    delta_h: np.ndarray

    def n_matrix(self) -> np.ndarray:
        """Series of [[delta_n, delta_s], [conj(delta_s), delta_h]]."""
        out = np.empty((self.times.size, 2, 2), dtype=complex)
        out[:, 0, 0] = self.delta_n
        out[:, 0, 1] = self.delta_s
        out[:, 1, 0] = np.conj(self.delta_s)
        out[:, 1, 1] = self.delta_h
        return out


def _moments_from_rows(rows: np.ndarray, apply_m0) -> tuple[np.ndarray, ...]:
    """Second moments <A_i A_j> = r_i . M0 . r_j for i, j in the system pair."""
    n_times = rows.shape[0]
    delta_s = np.empty(n_times, dtype=complex)
    delta_n = np.empty(n_times, dtype=complex)
    delta_h = np.empty(n_times, dtype=complex)
    for m in range(n_times):
        r1 = rows[m, 0]
        r2 = rows[m, 1]
        m0_r1 = apply_m0(r1)
        m0_r2 = apply_m0(r2)
        delta_s[m] = r1 @ m0_r1
        delta_n[m] = r2 @ m0_r1
        delta_h[m] = r1 @ m0_r2
    return delta_n, delta_s, delta_h


def _require_commutator(delta_n, delta_h, times):
    drift = np.abs(delta_h - delta_n - 1.0)
    worst = int(np.argmax(drift))
    if drift[worst] > 1e-6:
        raise NumericalQualityError(
            f"oracle commutator drift {drift[worst]:.3e} at t = "
            f"{times[worst]:.6g} exceeds 1e-6")


def reduced_moments(prop: BogoliubovPropagator, bath: BathDiscretization,
                    init: GaussianMoments) -> OracleMoments:
    """Open-mode moments for a product initial state (system x thermal-like bath).

    The bath enters through its per-mode occupations and squeezes only;
    cross correlations with the system are zero by assumption (use
    exact_moments with a full initial table otherwise).
    """
    if 2 * bath.n_modes + 2 != prop.dim:
        raise ContractViolationError(
            f"bath has {bath.n_modes} modes, propagator dimension {prop.dim}")

    occ = bath.occupations
    sqz = bath.squeezes
    dn0, ds0 = init.delta_n, init.delta_s

    def apply_m0(r: np.ndarray) -> np.ndarray:
        # block-diagonal product table <A_p A_q>(0): per pair (x, x^dag)
        # [[<xx>, <x x^dag>], [<x^dag x>, <x^dag x^dag>]]
        out = np.empty_like(r)
        out[0] = ds0 * r[0] + (1.0 + dn0) * r[1]
        out[1] = dn0 * r[0] + np.conj(ds0) * r[1]
        out[2::2] = sqz * r[2::2] + (1.0 + occ) * r[3::2]
        out[3::2] = occ * r[2::2] + np.conj(sqz) * r[3::2]
        return out

    delta_n, delta_s, delta_h = _moments_from_rows(prop.sys_rows, apply_m0)
    times = prop.grid.times
    _require_commutator(delta_n.real, delta_h.real, times)

    mu0 = np.zeros(prop.dim, dtype=complex)
    mu0[0] = init.mean_a
    mu0[1] = np.conj(init.mean_a)
    mean_a = prop.sys_rows[:, 0, :] @ mu0

    return OracleMoments(times=times, mean_a=mean_a,
                         delta_n=delta_n.real, delta_s=delta_s,
                         delta_h=delta_h.real)


def exact_moments(prop: BogoliubovPropagator,
                  product_table: np.ndarray) -> OracleMoments:
    """Open-mode moments for an arbitrary Gaussian initial total state.

    product_table[p, q] = <A_p A_q>(0) in the interleaved operator ordering
    (means assumed zero, as for any thermal total state).
    """
    if product_table.shape != (prop.dim, prop.dim):
        raise ContractViolationError(
            f"product table shape {product_table.shape} does not match "
            f"dimension {prop.dim}")

    def apply_m0(r: np.ndarray) -> np.ndarray:
        return product_table @ r

    delta_n, delta_s, delta_h = _moments_from_rows(prop.sys_rows, apply_m0)
    times = prop.grid.times
    _require_commutator(delta_n.real, delta_h.real, times)
    return OracleMoments(times=times,
                         mean_a=np.zeros(times.size, dtype=complex),
                         delta_n=delta_n.real, delta_s=delta_s,
                         delta_h=delta_h.real)


@dataclass
class ThermalTotalState:
    """Gaussian thermal state of the coupled system + bath Hamiltonian.

    Holds the reduced system moments, the system-bath cross correlations,
    the per-mode bath occupations/squeezes, and the full initial product
    table for exact_moments.
    """

    system: GaussianMoments
    correlations: InitialCorrelations
    bath_occupations: np.ndarray
    bath_squeezes: np.ndarray
    normal_frequencies: np.ndarray
    product_table: np.ndarray


def thermal_total_state(dyn: LinearDynamics, temperature: float,
                        omega_s0: float) -> ThermalTotalState:
    """Thermal (or ground) state of the COUPLED quadratic Hamiltonian.

    omega_s0 is the system frequency entering the Hamiltonian whose Gibbs
    state is prepared (it may differ from dyn.omega_s, which governs the
    subsequent evolution -- a frequency quench).  The Hamiltonian must be
    positive definite, otherwise no thermal state exists and an
    InstabilityError is raised.
    """
    if temperature < 0.0 or not math.isfinite(temperature):
        raise ValidationError("temperature must be >= 0")
    n_m = dyn.n_modes
    nb = n_m + 1

    # single-particle blocks of H = Psi^dag [[h, p], [conj(p), conj(h)]] Psi / 2
    # in the block ordering Psi = (a, b_1..b_N, a^dag, b_1^dag..b_N^dag)
    h = np.zeros((nb, nb), dtype=complex)
    h[0, 0] = omega_s0
    h[np.arange(1, nb), np.arange(1, nb)] = dyn.frequencies
    h[0, 1:] = dyn.v_couplings
    h[1:, 0] = dyn.v_couplings
    p = np.zeros((nb, nb), dtype=complex)
    p[0, 1:] = dyn.w_couplings
    p[1:, 0] = dyn.w_couplings

    m = np.block([[h, p], [np.conj(p), np.conj(h)]])
    min_eig = float(np.linalg.eigvalsh(m).min())
    if min_eig <= 0.0:
        raise InstabilityError(
            f"coupled Hamiltonian is not positive definite (min eigenvalue "
            f"{min_eig:.3e}); no thermal state exists at these couplings")

    sigma_b = np.diag(np.concatenate([np.ones(nb), -np.ones(nb)]))
    evals, evecs = np.linalg.eig(sigma_b @ m)
    if np.max(np.abs(evals.imag)) > 1e-8 * np.max(np.abs(evals.real)):
        raise NumericalQualityError(
            "Bogoliubov spectrum acquired imaginary parts "
            f"(max {np.max(np.abs(evals.imag)):.3e})")
    order = np.argsort(evals.real)[::-1][:nb]  # the nb positive branches
    eps = evals.real[order]
    if eps.min() <= 0.0:
        raise InstabilityError(
            f"nonpositive normal-mode frequency {eps.min():.3e}")
    vpos = evecs[:, order]

    # symplectic normalization v^dag Sigma v = +1 on the positive branch
    norms = np.einsum("ik,ij,jk->k", np.conj(vpos), sigma_b, vpos).real
    if np.any(norms <= 0.0):
        raise NumericalQualityError(
            "positive-branch eigenvector with nonpositive symplectic norm")
    vpos = vpos / np.sqrt(norms)
    swap = np.vstack([np.conj(vpos[nb:]), np.conj(vpos[:nb])])  # particle-hole partner
    t_mat = np.hstack([vpos, swap])

    resid = np.max(np.abs(np.conj(t_mat.T) @ sigma_b @ t_mat - sigma_b))
    if resid > 1e-8:
        raise NumericalQualityError(
            f"Bogoliubov transform breaks the symplectic metric by {resid:.3e}")

    occ_nm = n_bar(eps, temperature)
    # <Psi Psi^dag> = T diag(1 + nbar, nbar) T^dag for the normal modes
    diag = np.concatenate([1.0 + occ_nm, occ_nm])
    cov = (t_mat * diag) @ np.conj(t_mat.T)

    delta_n = cov[nb, nb].real
    delta_s = cov[0, nb]
    n_prime = cov[nb, nb + 1:]
    s_prime = cov[0, nb + 1:]
    bath_occ = np.real(np.diag(cov)[nb + 1:])
    bath_sqz = cov[np.arange(1, nb), np.arange(nb + 1, 2 * nb)]

    # product table <A_p A_q> in interleaved ordering: <Psi_i Psi_j> with
    # the second factor mapped through its particle-hole partner
    inter = np.empty(2 * nb, dtype=int)   # interleaved index -> Psi index
    inter[0], inter[1] = 0, nb
    inter[2::2] = np.arange(1, nb)
    inter[3::2] = np.arange(nb + 1, 2 * nb)
    partner = np.concatenate([np.arange(nb, 2 * nb), np.arange(0, nb)])
    table = cov[np.ix_(inter, partner[inter])]

    system = GaussianMoments(mean_a=0.0 + 0.0j, delta_n=delta_n,
                             delta_s=delta_s)
    return ThermalTotalState(
        system=system,
        correlations=InitialCorrelations(n_prime=n_prime, s_prime=s_prime),
        bath_occupations=bath_occ,
        bath_squeezes=bath_sqz,
        normal_frequencies=np.sort(eps),
        product_table=table,
    )
