"""KMS-detailed-balanced Lindbladians in the unified Kossakowski form.

A sampler is specified per coupling operator by a positive matrix C indexed
by the Bohr frequencies of H, together with a factor Q with C = Q Q^dag.
Davies, CKG and DLL generators differ only in how C decomposes.  All
superoperators are dense 4^n x 4^n matrices in the column-major convention
of the spectral module.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .spectral import (
    BohrDecomposition,
    GibbsState,
    SpectralHamiltonian,
    bohr_decompose,
    left_mult,
    right_mult,
    vec,
)


class SpecError(Exception):
    """A sampler specification violates a structural requirement."""


class QuadratureSpecError(SpecError):
    """An omega-grid is too coarse to certify KMS symmetry."""


class DetailedBalanceError(Exception):
    """A generator failed the KMS detailed-balance check."""


# ---------------------------------------------------------------------------
# specification types
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CouplingBlock:
    """One coupling operator with its Bohr decomposition and Kossakowski data."""

    A: np.ndarray
    bohr: BohrDecomposition
    C: np.ndarray                 # |B_A| x |B_A| PSD, indexed like frequencies
    Q: np.ndarray                 # C = Q Q^dag, columns are jump channels

    @property
    def frequencies(self) -> np.ndarray:
        return self.bohr.frequencies

    @property
    def channels(self) -> int:
        return self.Q.shape[1]


@dataclass(frozen=True)
class KossakowskiSpec:
    """A full sampler: coupling blocks, inverse temperature, family tag."""

    H: SpectralHamiltonian
    beta: float
    blocks: tuple
    family: str = "Custom"
    params: dict = field(default_factory=dict)

    @property
    def total_channels(self) -> int:
        return sum(b.channels for b in self.blocks)

    def kms_residual(self) -> float:
        """Worst relative violation of alpha_{-v',-v} = alpha_{v,v'} e^{b(v+v')/2}."""
        worst = 0.0
        for blk in self.blocks:
            r, _ = _kms_residual_block(blk, self.beta)
            worst = max(worst, r)
        return worst

    def check_kms(self, tol: float = 1e-9):
        for blk in self.blocks:
            r, pair = _kms_residual_block(blk, self.beta)
            if r > tol:
                raise SpecError(
                    f"KMS symmetry violated: residual {r:.3e} at (nu, nu') = {pair}")


def _neg_index(freqs: np.ndarray, tol: float) -> np.ndarray:
    """Index map i -> position of -freqs[i]; -1 when absent."""
    out = np.full(freqs.size, -1, dtype=int)
    for i, f in enumerate(freqs):
        hits = np.where(np.abs(freqs + f) <= tol)[0]
        if hits.size:
            out[i] = hits[0]
    return out


def _kms_residual_block(blk: CouplingBlock, beta: float):
    freqs = blk.frequencies
    tol = 1e-8 * max(1.0, np.max(np.abs(freqs)))
    neg = _neg_index(freqs, tol)
    scale = max(np.max(np.abs(blk.C)), 1e-300)
    worst, pair = 0.0, (0.0, 0.0)
    for i, nu in enumerate(freqs):
        for j, nup in enumerate(freqs):
            lhs = blk.C[neg[j], neg[i]] if neg[i] >= 0 and neg[j] >= 0 else 0.0
            rhs = blk.C[i, j] * math.exp(beta * (nu + nup) / 2)
            r = abs(lhs - rhs) / max(scale, abs(rhs))
            if r > worst:
                worst, pair = r, (nu, nup)
    return worst, pair


def factor_psd(C: np.ndarray, clip: float = -1e-12, prune: float = 1e-10) -> np.ndarray:
    """Q with C = Q Q^dag from an eigendecomposition.

    Negative numerical dust below `clip` raises; columns with weight below
    `prune` are dropped so the channel count stays minimal.
    """
    C = np.asarray(C, dtype=complex)
    scale = max(np.max(np.abs(C)), 1e-300)
    w, V = np.linalg.eigh((C + C.conj().T) / 2)
    if np.min(w) < clip * scale * 1e2 and np.min(w) < -1e-10 * scale:
        raise SpecError(f"Kossakowski matrix is not PSD (min eigenvalue {np.min(w):.3e})")
    w = np.clip(w, 0.0, None)
    keep = w > prune * scale
    if not np.any(keep):
        raise SpecError("Kossakowski matrix is numerically zero")
    return V[:, keep] * np.sqrt(w[keep])


# ---------------------------------------------------------------------------
# sampler families
# ---------------------------------------------------------------------------

def davies_gamma(nu: float, beta: float) -> float:
    """Davies transition weight gamma(nu) = min(1, e^{-beta nu})."""
    return min(1.0, math.exp(-beta * nu))


def make_davies(H: SpectralHamiltonian, couplings: Sequence[np.ndarray],
                beta: float) -> KossakowskiSpec:
    """Davies generator: diagonal Kossakowski matrix alpha_{nu,nu} = gamma(nu)."""
    if not couplings:
        raise SpecError("at least one coupling operator is required")
    blocks = []
    for A in couplings:
        bohr = bohr_decompose(H, A)
        g = np.array([davies_gamma(nu, beta) for nu in bohr.frequencies])
        C = np.diag(g).astype(complex)
        Q = np.diag(np.sqrt(g)).astype(complex)
        blocks.append(CouplingBlock(A=np.asarray(A, complex), bohr=bohr, C=C, Q=Q))
    return KossakowskiSpec(H=H, beta=beta, blocks=tuple(blocks), family="Davies")


def gaussian_weight(beta: float) -> Callable[[float], complex]:
    """Default DLL weighting q(nu) = exp(-nu^2 beta^2 / 32)."""
    return lambda nu: math.exp(-(nu ** 2) * beta ** 2 / 32)


def make_dll(H: SpectralHamiltonian, couplings: Sequence[np.ndarray], beta: float,
             q: Callable[[float], complex] | None = None) -> KossakowskiSpec:
    """DLL sampler: one rank-1 channel per coupling, C = v v^dag with
    v_nu = q(nu) e^{-beta nu / 4}."""
    if not couplings:
        raise SpecError("at least one coupling operator is required")
    if q is None:
        q = gaussian_weight(beta)
    blocks = []
    for A in couplings:
        bohr = bohr_decompose(H, A)
        freqs = bohr.frequencies
        tol = 1e-8 * max(1.0, np.max(np.abs(freqs)))
        for nu in freqs:
            if abs(q(-nu) - np.conj(q(nu))) > tol * max(1.0, abs(q(nu))):
                raise SpecError(f"weighting function violates q(-nu) = conj(q(nu)) at nu={nu}")
        v = np.array([q(nu) * math.exp(-beta * nu / 4) for nu in freqs], dtype=complex)
        C = np.outer(v, v.conj())
        Q = v.reshape(-1, 1)
        blocks.append(CouplingBlock(A=np.asarray(A, complex), bohr=bohr, C=C, Q=Q))
    return KossakowskiSpec(H=H, beta=beta, blocks=tuple(blocks), family="DLL",
                           params={"q": q})


def ckg_gamma(omega: float, beta: float, sigma_gamma: float | None = None,
              omega_gamma: float | None = None) -> float:
    """CKG transition weight, a Gaussian peaked at omega = -omega_gamma."""
    if sigma_gamma is None:
        sigma_gamma = 1.0 / beta
    if omega_gamma is None:
        omega_gamma = 1.0 / beta
    return math.exp(-((omega + omega_gamma) ** 2) / (2 * sigma_gamma ** 2))


def ckg_beta_nu(omega: float, nu: float, sigma_e: float) -> float:
    """CKG frequency profile beta_nu^omega (Gaussian in omega - nu)."""
    return math.exp(-((omega - nu) ** 2) / (4 * sigma_e ** 2)) / math.sqrt(
        2 * sigma_e * math.sqrt(2 * math.pi))


def default_omega_grid(beta: float, points: int = 41) -> np.ndarray:
    """Uniform grid covering the effective support of the CKG gamma weight."""
    og, sg = 1.0 / beta, 1.0 / beta
    return np.linspace(-og - 6 * sg, -og + 6 * sg, points)


def make_ckg(H: SpectralHamiltonian, coupling: np.ndarray, beta: float,
             omega_grid: np.ndarray | None = None,
             kms_gate: float = 1e-6) -> KossakowskiSpec:
    """CKG sampler discretized over an omega-grid with trapezoid weights.

    Uses sigma_E = sigma_gamma = omega_gamma = 1/beta.  One jump channel per
    grid point; the KMS-symmetry residual certifies the grid density.
    """
    if beta <= 0:
        raise ValueError("CKG requires beta > 0")
    if omega_grid is None:
        omega_grid = default_omega_grid(beta)
    omega_grid = np.asarray(omega_grid, dtype=float)
    sigma_e = 1.0 / beta
    w = np.gradient(omega_grid)  # trapezoid weights on a (possibly uneven) grid
    bohr = bohr_decompose(H, coupling)
    freqs = bohr.frequencies
    cols = []
    for wk, ok in zip(w, omega_grid):
        v = np.array([ckg_beta_nu(ok, nu, sigma_e) for nu in freqs])
        cols.append(math.sqrt(wk * ckg_gamma(ok, beta)) * v)
    Q = np.array(cols, dtype=complex).T
    C = Q @ Q.conj().T
    blk = CouplingBlock(A=np.asarray(coupling, complex), bohr=bohr, C=C, Q=Q)
    spec = KossakowskiSpec(H=H, beta=beta, blocks=(blk,), family="CKG",
                           params={"sigma_e": sigma_e, "omega_grid": omega_grid})
    r = spec.kms_residual()
    if r > kms_gate:
        raise QuadratureSpecError(
            f"omega-grid too coarse: KMS residual {r:.3e} > {kms_gate:.0e}")
    return spec


def make_custom(H: SpectralHamiltonian, couplings: Sequence[np.ndarray],
                Cs: Sequence[np.ndarray], beta: float) -> KossakowskiSpec:
    """Custom sampler from explicit per-coupling Kossakowski matrices."""
    blocks = []
    for A, C in zip(couplings, Cs):
        bohr = bohr_decompose(H, A)
        if C.shape[0] != bohr.frequencies.size:
            raise SpecError("Kossakowski matrix does not match the Bohr frequency count")
        blocks.append(CouplingBlock(A=np.asarray(A, complex), bohr=bohr,
                                    C=np.asarray(C, complex), Q=factor_psd(C)))
    return KossakowskiSpec(H=H, beta=beta, blocks=tuple(blocks), family="Custom")


# ---------------------------------------------------------------------------
# generator assembly
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Superoperator:
    """A vectorized superoperator with a role tag."""

    matrix: np.ndarray
    tag: str = "custom"

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def norm(self) -> float:
        return float(np.linalg.norm(self.matrix, 2))

    def apply(self, X: np.ndarray) -> np.ndarray:
        from .spectral import unvec
        return unvec(self.matrix @ vec(X))


def _kms_gate(spec: KossakowskiSpec, kms_tol: float | None) -> float:
    if kms_tol is not None:
        return kms_tol
    # CKG is detailed-balanced only up to omega-quadrature error
    return 1e-6 if spec.family == "CKG" else 1e-9


def coherent_term(spec: KossakowskiSpec, kms_tol: float | None = None) -> np.ndarray:
    """The KMS-mandated coherent part G (Hermitian; zero for Davies)."""
    spec.check_kms(tol=_kms_gate(spec, kms_tol))
    beta = spec.beta
    d = spec.H.dim
    G = np.zeros((d, d), dtype=complex)
    for blk in spec.blocks:
        freqs = blk.frequencies
        comps = [blk.bohr.components[f] for f in freqs]
        for i, nu in enumerate(freqs):
            for j, nup in enumerate(freqs):
                a = blk.C[i, j]
                if a == 0:
                    continue
                wgt = math.tanh(beta * (nup - nu) / 4)
                if wgt == 0:
                    continue
                G += (a * wgt / 2j) * (comps[j].conj().T @ comps[i])
    return G


def assemble_generator(spec: KossakowskiSpec, kms_tol: float | None = None) -> Superoperator:
    """Vectorized Lindbladian of the Kossakowski-form sampler."""
    G = coherent_term(spec, kms_tol=kms_tol)
    d = spec.H.dim
    Iv = np.eye(d)
    L = -1j * (left_mult(G) - right_mult(G))
    for blk in spec.blocks:
        freqs = blk.frequencies
        comps = [blk.bohr.components[f] for f in freqs]
        for i in range(len(freqs)):
            for j in range(len(freqs)):
                a = blk.C[i, j]
                if a == 0:
                    continue
                Ai, Aj = comps[i], comps[j]
                AdA = Aj.conj().T @ Ai
                L += a * (np.kron(Aj.conj(), Ai)
                          - 0.5 * (left_mult(AdA) + right_mult(AdA)))
    return Superoperator(matrix=L, tag="generator")


def weighting_superop(G: GibbsState, power: float) -> np.ndarray:
    """Vectorized Gamma_sigma^power : X -> sigma^{p/2} X sigma^{p/2}."""
    lam = G.H.raw_eigenvalues
    V = G.H.eigenvectors
    w = np.exp(-G.beta * (lam - lam[0]))
    p = (w / w.sum()) ** (power / 2)
    s = (V * p) @ V.conj().T
    return np.kron(s.T, s)


def parent_hamiltonian(L: Superoperator, G: GibbsState,
                       db_tol: float = 1e-8) -> Superoperator:
    """Parent Hamiltonian: the Gibbs-weighted similarity transform of -L.

    Checks KMS detailed balance (Gamma L^dag = L Gamma) before transforming.
    """
    Gam = weighting_superop(G, 1.0)
    Lm = L.matrix
    resid = np.linalg.norm(Gam @ Lm.conj().T - Lm @ Gam, 2)
    if resid > db_tol * max(1.0, np.linalg.norm(Lm, 2)):
        raise DetailedBalanceError(
            f"KMS detailed balance violated: residual {resid:.3e}")
    Gp = weighting_superop(G, 0.5)    # Gamma^{1/2}
    Gm = weighting_superop(G, -0.5)   # Gamma^{-1/2}
    Hhat = -Gm @ Lm @ Gp
    Hhat = (Hhat + Hhat.conj().T) / 2
    return Superoperator(matrix=Hhat, tag="parentHamiltonian")


def spectral_gap(S: Superoperator, zero_tol: float = 1e-9) -> float:
    """Gap = -max Re(lambda) over nonzero eigenvalues of a generator, or the
    smallest nonzero eigenvalue of a PSD parent Hamiltonian."""
    M = S.matrix
    scale = max(np.linalg.norm(M, 2), 1e-300)
    tol = zero_tol * scale
    if S.tag == "parentHamiltonian":
        w = np.linalg.eigvalsh(M)
        nonzero = w[np.abs(w) > tol]
        return float(np.min(nonzero)) if nonzero.size else 0.0
    w = np.linalg.eigvals(M)
    nonzero = w[np.abs(w) > tol]
    if nonzero.size == 0:
        return 0.0
    return float(-np.max(nonzero.real))
