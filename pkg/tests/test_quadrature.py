"""Time-quadrature grids and the stacked first-order operator."""

import numpy as np
import pytest

from sosgibbs.spectral import build_tfim, gibbs_state, vec
from sosgibbs.lindblad import assemble_generator, make_dll, parent_hamiltonian
from sosgibbs.factorization import build_factors, first_order_doubled
from sosgibbs.quadrature import (
    QuadratureGrid,
    assemble_B,
    error_scaling_scan,
    measure_error,
    select_grid,
)
from sosgibbs.paulis import single_site


H2 = build_tfim(2)
COUPS2 = [single_site(2, j, l) for j in range(2) for l in "XZ"]


def dll_setup(beta, eps=0.01):
    G = gibbs_state(H2, beta)
    spec = make_dll(H2, COUPS2, beta)
    pairs = build_factors(spec, G)
    grid = select_grid(beta, H2.norm, len(pairs), eps)
    B = assemble_B(pairs, H2, grid)
    Hhat = parent_hamiltonian(assemble_generator(spec), G)
    return G, pairs, grid, B, Hhat


def test_grid_mass_is_half():
    grid = select_grid(1.0, H2.norm, 4, 0.001)
    assert abs(grid.mass - 0.5) < 1e-3


def test_grid_points_uniform_left_closed():
    grid = QuadratureGrid(T=2.0, N=8, beta=1.0)
    pts = grid.points
    assert pts[0] == -2.0
    assert np.allclose(np.diff(pts), grid.h)
    assert pts[-1] == pytest.approx(2.0 - grid.h)


def test_stacking_order_and_weights():
    beta = 1.0
    G, pairs, grid, B, _ = dll_setup(beta, eps=0.3)
    D = H2.dim ** 2
    # block (j, k) is sqrt(g_k) Bhat_{j, t_k}
    j, k = 1, 2
    blk = B.stacked[(j * grid.N + k) * D:(j * grid.N + k + 1) * D]
    expected = np.sqrt(grid.weights[k]) * first_order_doubled(pairs[j], H2,
                                                              grid.points[k])
    assert np.allclose(blk, expected, atol=1e-12)


@pytest.mark.parametrize("eps", [0.3, 0.1, 0.03, 0.01])
def test_quadrature_error_within_request(eps):
    beta = 1.0
    G, pairs, grid, B, Hhat = dll_setup(beta, eps)
    assert measure_error(B, Hhat) <= eps


def test_T_scales_like_beta_log():
    import math
    rows = error_scaling_scan(make_dll(H2, COUPS2, 1.0), H2,
                              gibbs_state(H2, 1.0), [0.3, 0.1, 0.03, 0.01])
    x = np.log(1.0 / np.array([r["eps_requested"] for r in rows]))
    slope = np.polyfit(x, [r["T"] for r in rows], 1)[0]
    expected = 1.0 / (2 * math.pi)
    assert abs(slope - expected) <= 0.2 * expected


def test_kernel_vector_is_target():
    beta = 1.0
    G, pairs, grid, B, Hhat = dll_setup(beta, eps=0.01)
    v = vec(G.sqrt_sigma)
    v = v / np.linalg.norm(v)
    # B annihilates the purified Gibbs state exactly (every block does)
    assert np.linalg.norm(B.stacked @ v) < 1e-10
    psi = B.smallest_right_singular_vector()
    assert abs(abs(np.vdot(psi, v)) - 1.0) < 1e-10


def test_sqrt_delta_law():
    from sosgibbs.lindblad import spectral_gap
    beta = 1.0
    G, pairs, grid, B, Hhat = dll_setup(beta, eps=0.01)
    delta = spectral_gap(Hhat)
    eps = measure_error(B, Hhat)
    s2 = B.singular_values[-2]
    assert abs(s2 ** 2 - delta) <= eps


def test_gram_matches_stack():
    G, pairs, grid, B, Hhat = dll_setup(1.0, eps=0.3)
    assert np.allclose(B.gram(), B.stacked.conj().T @ B.stacked, atol=1e-12)
