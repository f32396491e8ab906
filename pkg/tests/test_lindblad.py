"""Sampler families, detailed balance and the parent Hamiltonian."""

import math

import numpy as np
import pytest

from sosgibbs.spectral import build_tfim, gibbs_state, kms_inner, vec
from sosgibbs.lindblad import (
    DetailedBalanceError,
    SpecError,
    assemble_generator,
    davies_gamma,
    default_omega_grid,
    factor_psd,
    make_ckg,
    make_davies,
    make_dll,
    parent_hamiltonian,
    spectral_gap,
    weighting_superop,
)
from sosgibbs.paulis import single_site


H2 = build_tfim(2)
COUPS2 = [single_site(2, j, l) for j in range(2) for l in "XZ"]


def davies_spec(beta):
    return make_davies(H2, COUPS2, beta)


def dll_spec(beta):
    return make_dll(H2, COUPS2, beta)


def ckg_spec(beta):
    return make_ckg(H2, COUPS2[0], beta, default_omega_grid(beta))


def random_hermitian(d, rng):
    M = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
    return (M + M.conj().T) / 2


def test_davies_gamma_kms_symmetry():
    beta = 1.0
    assert davies_gamma(0.0, beta) == 1.0
    assert np.isclose(davies_gamma(2.0, beta), math.exp(-2.0))
    assert np.isclose(davies_gamma(-2.0, beta),
                      davies_gamma(2.0, beta) * math.exp(beta * 2.0))


def test_davies_diagonal_kossakowski():
    spec = davies_spec(1.0)
    for blk in spec.blocks:
        off = blk.C - np.diag(np.diag(blk.C))
        assert np.linalg.norm(off) < 1e-14


def test_dll_rank_one():
    spec = dll_spec(1.0)
    for blk in spec.blocks:
        assert np.linalg.matrix_rank(blk.C, tol=1e-10) == 1


def test_dll_q_symmetry_enforced():
    with pytest.raises(SpecError):
        make_dll(H2, COUPS2, 1.0, q=lambda nu: 1.0 + nu)  # q(-nu) != conj q(nu)


def test_ckg_kms_residual_gate():
    # a lopsided grid cannot certify the KMS symmetry
    with pytest.raises(SpecError):
        make_ckg(H2, COUPS2[0], 1.0, np.array([0.0, 1.0]))


def test_factor_psd_roundtrip():
    rng = np.random.default_rng(3)
    A = rng.standard_normal((5, 5)) + 1j * rng.standard_normal((5, 5))
    C = A @ A.conj().T
    Q = factor_psd(C)
    assert np.allclose(Q @ Q.conj().T, C, atol=1e-10)


@pytest.mark.parametrize("builder", [davies_spec, dll_spec, ckg_spec])
@pytest.mark.parametrize("beta", [0.5, 1.0, 2.0])
def test_generator_structure(builder, beta):
    spec = builder(beta)
    G = gibbs_state(H2, beta)
    L = assemble_generator(spec)
    # trace preservation: <<I| L = 0
    idv = vec(np.eye(4))
    assert np.linalg.norm(idv.conj() @ L.matrix) < 1e-9
    # sigma stationary
    assert np.linalg.norm(L.matrix @ vec(G.sigma)) < 1e-8


@pytest.mark.parametrize("builder,tol", [(davies_spec, 1e-8),
                                         (dll_spec, 1e-8),
                                         (ckg_spec, 1e-6)])
def test_kms_detailed_balance(builder, tol):
    beta = 1.0
    spec = builder(beta)
    G = gibbs_state(H2, beta)
    L = assemble_generator(spec)
    # <X, L^dag(Y)>_sigma = <L^dag(X), Y>_sigma on random Hermitian pairs
    rng = np.random.default_rng(11)
    Ld = L.matrix.conj().T
    from sosgibbs.spectral import unvec
    scale = np.linalg.norm(L.matrix, 2)
    for _ in range(20):
        X = random_hermitian(4, rng)
        Y = random_hermitian(4, rng)
        lhs = kms_inner(X, unvec(Ld @ vec(Y)), G)
        rhs = kms_inner(unvec(Ld @ vec(X)), Y, G)
        assert abs(lhs - rhs) <= tol * scale


def test_davies_has_no_coherent_term():
    from sosgibbs.lindblad import coherent_term
    Gm = coherent_term(davies_spec(1.0))
    assert np.linalg.norm(Gm) < 1e-12


def test_parent_similarity_and_kernel():
    beta = 1.0
    spec = dll_spec(beta)
    G = gibbs_state(H2, beta)
    L = assemble_generator(spec)
    Hpar = parent_hamiltonian(L, G)
    # same multiset of eigenvalues as -L
    e1 = np.sort(np.linalg.eigvalsh((Hpar.matrix + Hpar.matrix.conj().T) / 2))
    e2 = np.sort(np.real(np.linalg.eigvals(-L.matrix)))
    assert np.max(np.abs(e1 - e2)) < 1e-8
    # Hermitian PSD with |sigma^{1/2}>> in the kernel
    assert np.linalg.norm(Hpar.matrix - Hpar.matrix.conj().T) < 1e-10
    assert e1[0] > -1e-10
    v = vec(G.sqrt_sigma)
    assert np.linalg.norm(Hpar.matrix @ v) < 1e-9 * np.linalg.norm(v)
    # ergodic: 1-dim kernel
    assert e1[1] > 1e-9


def test_parent_rejects_db_violation():
    beta = 1.0
    G = gibbs_state(H2, beta)
    wrong = gibbs_state(H2, 2 * beta)   # generator balanced at a different beta
    L = assemble_generator(dll_spec(beta))
    with pytest.raises(DetailedBalanceError):
        parent_hamiltonian(L, wrong)


def test_weighting_superop_conjugates():
    G = gibbs_state(H2, 1.0)
    S = weighting_superop(G, 0.5)   # X -> sigma^{1/4} X sigma^{1/4}
    X = random_hermitian(4, np.random.default_rng(5))
    from sosgibbs.spectral import unvec
    expected = G.quarter_sigma @ X @ G.quarter_sigma
    assert np.allclose(unvec(S @ vec(X)), expected, atol=1e-12)


def test_spectral_gap_of_parent():
    beta = 1.0
    G = gibbs_state(H2, beta)
    L = assemble_generator(dll_spec(beta))
    Hpar = parent_hamiltonian(L, G)
    gap = spectral_gap(Hpar)
    eigs = np.sort(np.linalg.eigvalsh((Hpar.matrix + Hpar.matrix.conj().T) / 2))
    assert np.isclose(gap, eigs[1], atol=1e-10)
