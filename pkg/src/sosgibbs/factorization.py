"""First-order factors and the sum-of-squares form of the parent Hamiltonian.

For each jump channel j the factors

    B_j      = sum_nu Q_{nu,j} e^{beta nu/4} A_nu
    B_j^#    = sigma^{1/4} B_j sigma^{-1/4} = sum_nu Q_{nu,j} A_nu
    B_j^b    = sigma^{-1/4} B_j sigma^{1/4} = sum_nu Q_{nu,j} e^{beta nu/2} A_nu

satisfy B^# sigma^{1/2} = sigma^{1/2} B^b, so the vectorized first-order
operator I (x) B^#_t - (B^b_t)^T (x) I annihilates the purified Gibbs state
for every t.  Weighted squares of these operators reproduce the Dirichlet
form and the parent Hamiltonian.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .lindblad import KossakowskiSpec, SpecError, Superoperator
from .spectral import GibbsState, SpectralHamiltonian, kms_inner, vec


def cosh_kernel(beta: float) -> Callable[[float], float]:
    """The KMS time weight g(t) = 1 / (beta cosh(2 pi t / beta)); integral 1/2."""
    def g(t: float) -> float:
        return 1.0 / (beta * math.cosh(2 * math.pi * t / beta))
    return g


@dataclass(frozen=True)
class WeightKernel:
    """Time weight for the generalized discriminant: the KMS cosh kernel,
    the delta limit w = (1/2) delta_0, or a custom (times, weights) table."""

    kind: str                      # "cosh" | "delta" | "custom"
    beta: float = 0.0
    table: tuple | None = None     # (times, weights) for kind == "custom"

    def __post_init__(self):
        if self.kind not in ("cosh", "delta", "custom"):
            raise ValueError(f"unknown kernel kind {self.kind!r}")
        if self.kind == "custom" and self.table is None:
            raise ValueError("custom kernel needs a (times, weights) table")


@dataclass(frozen=True)
class FactorPair:
    """The channel-j factors and their norms."""

    j: int
    B: np.ndarray
    Bsharp: np.ndarray
    Bflat: np.ndarray

    @property
    def norm_sharp(self) -> float:
        return float(np.linalg.norm(self.Bsharp, 2))

    @property
    def norm_flat(self) -> float:
        return float(np.linalg.norm(self.Bflat, 2))


def build_factors(spec: KossakowskiSpec, G: GibbsState) -> list[FactorPair]:
    """All J channel factors of the sampler, one per Q column per coupling."""
    del G  # factors depend only on the spec; kept for interface symmetry
    pairs = []
    beta = spec.beta
    j = 0
    for blk in spec.blocks:
        if blk.Q is None:
            raise SpecError("Kossakowski factor Q unavailable for this block")
        freqs = blk.frequencies
        comps = [blk.bohr.components[f] for f in freqs]
        for col in range(blk.Q.shape[1]):
            q = blk.Q[:, col]
            B = sum(q[i] * math.exp(beta * freqs[i] / 4) * comps[i]
                    for i in range(len(freqs)))
            Bs = sum(q[i] * comps[i] for i in range(len(freqs)))
            Bf = sum(q[i] * math.exp(beta * freqs[i] / 2) * comps[i]
                     for i in range(len(freqs)))
            pairs.append(FactorPair(j=j, B=np.asarray(B), Bsharp=np.asarray(Bs),
                                    Bflat=np.asarray(Bf)))
            j += 1
    return pairs


def evolve_factor(pair: FactorPair, H: SpectralHamiltonian, t: float):
    """(B^#_t, B^b_t) by eigenbasis phase multiplication."""
    U = H.evolve(t)
    Ud = U.conj().T
    return U @ pair.Bsharp @ Ud, U @ pair.Bflat @ Ud


def first_order_doubled(pair: FactorPair, H: SpectralHamiltonian,
                        t: float = 0.0) -> np.ndarray:
    """Vectorized first-order operator I (x) B^#_t - (B^b_t)^T (x) I."""
    Bs, Bf = evolve_factor(pair, H, t) if t != 0.0 else (pair.Bsharp, pair.Bflat)
    d = Bs.shape[0]
    I = np.eye(d)
    return np.kron(I, Bs) - np.kron(Bf.T, I)


# ---------------------------------------------------------------------------
# Dirichlet form
# ---------------------------------------------------------------------------

def dirichlet_form(L: Superoperator, Xm: np.ndarray, Ym: np.ndarray,
                   G: GibbsState) -> complex:
    """E(X, Y) = -<X, L^dag(Y)>_sigma (Hilbert-Schmidt adjoint of L)."""
    from .spectral import unvec
    LdY = unvec(L.matrix.conj().T @ vec(Ym))
    return -kms_inner(Xm, LdY, G)


def dirichlet_form_bohr(spec: KossakowskiSpec, Xm: np.ndarray, Ym: np.ndarray,
                        G: GibbsState) -> complex:
    """Independent Bohr-pair summation of the Dirichlet form:
    sum alpha_{nu,nu'} e^{b(nu+nu')/4} / (2 cosh(b(nu-nu')/4)) <[A_nu',X],[A_nu,Y]>_s."""
    beta = spec.beta
    total = 0.0 + 0.0j
    for blk in spec.blocks:
        freqs = blk.frequencies
        comps = [blk.bohr.components[f] for f in freqs]
        for i, nu in enumerate(freqs):
            for k, nup in enumerate(freqs):
                a = blk.C[i, k]
                if a == 0:
                    continue
                w = math.exp(beta * (nu + nup) / 4) / (2 * math.cosh(beta * (nu - nup) / 4))
                Cx = comps[k] @ Xm - Xm @ comps[k]
                Cy = comps[i] @ Ym - Ym @ comps[i]
                total += a * w * kms_inner(Cx, Cy, G)
    return total


def dirichlet_form_quadrature(spec: KossakowskiSpec, Xm: np.ndarray,
                              Ym: np.ndarray, G: GibbsState,
                              tquad=None) -> complex:
    """Time-domain quadrature of the sum-of-squares representation:
    sum_k w_k g(t_k) sum_j <[B_{j,t_k}, X], [B_{j,t_k}, Y]>_sigma."""
    if tquad is None:
        from .quadrature import select_grid
        tquad = select_grid(spec.beta, spec.H.norm, max(spec.total_channels, 1), 1e-8)
    pairs = build_factors(spec, G)
    g = cosh_kernel(spec.beta)
    total = 0.0 + 0.0j
    for t, w in zip(tquad.points, tquad.raw_weights):
        U = spec.H.evolve(t)
        Ud = U.conj().T
        for pair in pairs:
            Bt = U @ pair.B @ Ud
            Cx = Bt @ Xm - Xm @ Bt
            Cy = Bt @ Ym - Ym @ Bt
            total += w * g(t) * kms_inner(Cx, Cy, G)
    return total


def verify_sos_dirichlet(spec: KossakowskiSpec, G: GibbsState, samples: int = 20,
                         tquad=None, rng=None) -> dict:
    """Compare E(X,Y) from the generator against the quadrature SOS form on
    random Hermitian pairs.  Returns a residual report."""
    from .lindblad import assemble_generator

    rng = np.random.default_rng(rng)
    L = assemble_generator(spec)
    d = spec.H.dim
    if tquad is None:
        from .quadrature import select_grid
        tquad = select_grid(spec.beta, spec.H.norm, max(spec.total_channels, 1), 1e-8)
    # the evolved factors and kernel weights are sample-independent; stack
    # them so the per-sample quadrature is a batched matmul
    pairs = build_factors(spec, G)
    g = cosh_kernel(spec.beta)
    weights, blocks = [], []
    for t, w in zip(tquad.points, tquad.raw_weights):
        U = spec.H.evolve(t)
        Ud = U.conj().T
        for pair in pairs:
            weights.append(w * g(t))
            blocks.append(U @ pair.B @ Ud)
    weights = np.array(weights)
    blocks = np.array(blocks)                 # (m, d, d)
    s = G.sqrt_sigma
    residuals = []
    for _ in range(samples):
        Xm = _random_hermitian(d, rng)
        Ym = _random_hermitian(d, rng)
        lhs = dirichlet_form(L, Xm, Ym, G)
        Cx = blocks @ Xm - Xm @ blocks
        Cy = blocks @ Ym - Ym @ blocks
        # <Cx, Cy>_sigma = Tr(Cx^dag s Cy s), batched over the stack
        inner = np.einsum("mij,mij->m", Cx.conj(), s @ Cy @ s)
        rhs = complex(weights @ inner)
        residuals.append(abs(lhs - rhs))
    return {
        "samples": samples,
        "max_residual": float(np.max(residuals)),
        "mean_residual": float(np.mean(residuals)),
        "residuals": residuals,
    }


def _random_hermitian(d: int, rng) -> np.ndarray:
    M = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
    M = (M + M.conj().T) / 2
    return M / np.linalg.norm(M, 2)


# ---------------------------------------------------------------------------
# parent Hamiltonian from factors
# ---------------------------------------------------------------------------

def parent_from_factors(pairs: Sequence[FactorPair], H: SpectralHamiltonian,
                        kernel: WeightKernel, tquad=None) -> Superoperator:
    """Generalized discriminant sum_t w(t) sum_j Bhat_{j,t}^dag Bhat_{j,t}.

    With the cosh kernel this approximates the parent Hamiltonian at the
    grid's quadrature tolerance; with the delta kernel it is exactly
    H_0 = (1/2) sum_j Bhat_j^dag Bhat_j.
    """
    D = H.dim ** 2
    out = np.zeros((D, D), dtype=complex)
    if kernel.kind == "delta":
        for pair in pairs:
            Bh = first_order_doubled(pair, H, 0.0)
            out += 0.5 * (Bh.conj().T @ Bh)
    else:
        if kernel.kind == "cosh":
            if tquad is None:
                from .quadrature import select_grid
                tquad = select_grid(kernel.beta, H.norm, max(len(pairs), 1), 1e-8)
            g = cosh_kernel(kernel.beta)
            times = tquad.points
            weights = [w * g(t) for t, w in zip(tquad.points, tquad.raw_weights)]
        else:
            times, weights = kernel.table
        for t, w in zip(times, weights):
            for pair in pairs:
                Bh = first_order_doubled(pair, H, t)
                out += w * (Bh.conj().T @ Bh)
    out = (out + out.conj().T) / 2
    return Superoperator(matrix=out, tag="parentHamiltonian")


def _ergodic_gap(S: Superoperator) -> float:
    """Second-smallest eigenvalue of a PSD superoperator.

    For an ergodic sampler the kernel is exactly one-dimensional, so the
    gap is the second eigenvalue regardless of how small it gets.  This
    deliberately keeps exponentially slow modes (which appear at large
    beta) out of the kernel, unlike the norm-scaled zero threshold of
    spectral_gap, because the gap-ratio figure compares exactly those
    slow modes between the two Hamiltonians.
    """
    M = (S.matrix + S.matrix.conj().T) / 2
    eigs = np.sort(np.linalg.eigvalsh(M))
    return float(eigs[1])


def gap_ratio_scan(H: SpectralHamiltonian, spec_builder, betas: Sequence[float]) -> list[dict]:
    """Spectral-gap ratio gap(H_0) / gap(parent) over a beta grid.

    spec_builder(beta) must return a KossakowskiSpec for H.
    """
    from .lindblad import assemble_generator, parent_hamiltonian
    from .spectral import gibbs_state

    rows = []
    for beta in betas:
        spec = spec_builder(beta)
        G = gibbs_state(H, beta)
        L = assemble_generator(spec)
        Hparent = parent_hamiltonian(L, G)
        pairs = build_factors(spec, G)
        H0 = parent_from_factors(pairs, H, WeightKernel(kind="delta"))
        g_parent = _ergodic_gap(Hparent)
        g_zero = _ergodic_gap(H0)
        rows.append({
            "beta": float(beta),
            "gap_H0": g_zero,
            "gap_Hparent": g_parent,
            "ratio": g_zero / g_parent,
        })
    return rows
