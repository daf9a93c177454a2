"""Shared fixtures: the standard weak-damping low-T operating point.

Most tests probe gamma0 = 3e-4, cutoff = 1, T = 0.01 (the jolt-study
parameter set) at the critical system frequency omega_s = sqrt(2 gamma0 / pi).
The n = 2000 grid solves are expensive enough to share; fixtures are
session-scoped and treated as read-only by every consumer.
"""

import numpy as np
import pytest

import gqbm

GAMMA0 = 3e-4
CUTOFF = 1.0
TEMPERATURE = 0.01


def make_model(alpha, temperature=TEMPERATURE, gamma0=GAMMA0, cutoff=CUTOFF):
    return gqbm.SpectralModel(family="ohmic", gamma0=gamma0, cutoff=cutoff,
                              alpha=alpha, temperature=temperature)


@pytest.fixture(scope="session")
def omega_s():
    return gqbm.default_omega_s(make_model(1.0))


@pytest.fixture(scope="session")
def grid10():
    return gqbm.TimeGrid(t_end=10.0, n_steps=2000, max_frequency=CUTOFF)


def _solve_pack(alpha, grid, ws):
    """(model, kernel, solution-with-equal-time-V) at the standard point."""
    model = make_model(alpha)
    kernel = gqbm.build_kernels(model)
    sol = gqbm.solve_u(kernel, ws, grid)
    sol.v_equal_time = gqbm.solve_v_fdt(kernel, sol.u, grid)
    return model, kernel, sol


@pytest.fixture(scope="session")
def pack_alpha0(grid10, omega_s):
    return _solve_pack(0.0, grid10, omega_s)


@pytest.fixture(scope="session")
def pack_alpha05(grid10, omega_s):
    return _solve_pack(0.5, grid10, omega_s)


@pytest.fixture(scope="session")
def pack_alpha1(grid10, omega_s):
    return _solve_pack(1.0, grid10, omega_s)


def coeffs_of(pack):
    _, kernel, sol = pack
    return gqbm.compute_me_coeffs(gqbm.compute_k_lambda(sol, kernel))


@pytest.fixture(scope="session")
def coeffs_alpha0(pack_alpha0):
    return coeffs_of(pack_alpha0)


@pytest.fixture(scope="session")
def coeffs_alpha05(pack_alpha05):
    return coeffs_of(pack_alpha05)


@pytest.fixture(scope="session")
def coeffs_alpha1(pack_alpha1):
    return coeffs_of(pack_alpha1)


def max_abs(x) -> float:
    return float(np.max(np.abs(x)))
