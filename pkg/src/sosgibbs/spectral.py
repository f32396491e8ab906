"""Spectral substrate: Hamiltonians, Bohr decompositions, Gibbs states.

Everything is dense and exact at desk scale (n <= 6 by default).  The
column-major vectorization convention is fixed here once and for all:

    vec(X)[j*d + i] = X[i, j]          (stack columns)
    vec(A X B) = (B^T kron A) vec(X)

so left multiplication acts on the second tensor factor and right
multiplication acts (transposed) on the first.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .paulis import single_site

DEFAULT_QUBIT_CAP = 6


class CapacityError(Exception):
    """Dense storage would exceed the configured qubit cap."""


class DegenerateInputError(Exception):
    """An input matrix is zero (or otherwise carries no information)."""


# ---------------------------------------------------------------------------
# vectorization helpers
# ---------------------------------------------------------------------------

def vec(X: np.ndarray) -> np.ndarray:
    """Column-major vectorization |X>>."""
    return np.asarray(X).flatten(order="F")


def unvec(v: np.ndarray) -> np.ndarray:
    d = int(round(np.sqrt(v.size)))
    return np.asarray(v).reshape((d, d), order="F")


def left_mult(A: np.ndarray) -> np.ndarray:
    """Superoperator matrix of X -> A X."""
    d = A.shape[0]
    return np.kron(np.eye(d), A)


def right_mult(B: np.ndarray) -> np.ndarray:
    """Superoperator matrix of X -> X B."""
    d = B.shape[0]
    return np.kron(B.T, np.eye(d))


# ---------------------------------------------------------------------------
# Hamiltonians
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SpectralHamiltonian:
    """An n-qubit Hermitian matrix with cached eigendecomposition.

    Degenerate levels (within merge_tol * norm) are merged into single
    eigenprojectors so that Bohr components are defined per level pair.
    """

    n: int
    matrix: np.ndarray
    eigenvalues: np.ndarray          # distinct levels, ascending
    projectors: tuple                # matching orthogonal projectors
    raw_eigenvalues: np.ndarray      # all 2^n eigenvalues, ascending
    eigenvectors: np.ndarray         # columns, matching raw_eigenvalues

    @property
    def dim(self) -> int:
        return 2 ** self.n

    @property
    def norm(self) -> float:
        return float(np.max(np.abs(self.raw_eigenvalues)))

    def bohr_frequencies(self, tol: float | None = None) -> np.ndarray:
        """Sorted distinct differences of merged eigenvalues."""
        diffs = (self.eigenvalues[:, None] - self.eigenvalues[None, :]).ravel()
        return _merge_close(np.sort(diffs), self._merge_tol(tol))

    def _merge_tol(self, tol: float | None) -> float:
        if tol is None:
            tol = 1e-9 * max(self.norm, 1.0)
        return tol

    def evolve(self, t: float) -> np.ndarray:
        """exp(i H t), exact in the eigenbasis."""
        V = self.eigenvectors
        phases = np.exp(1j * self.raw_eigenvalues * t)
        return (V * phases) @ V.conj().T


def _merge_close(sorted_vals: np.ndarray, tol: float) -> np.ndarray:
    """Cluster a sorted array, returning one representative (mean) per group."""
    if sorted_vals.size == 0:
        return sorted_vals
    groups = [[sorted_vals[0]]]
    for v in sorted_vals[1:]:
        if v - groups[-1][-1] <= tol:
            groups[-1].append(v)
        else:
            groups.append([v])
    return np.array([np.mean(g) for g in groups])


def spectral_hamiltonian(matrix: np.ndarray, n: int | None = None,
                         cap: int = DEFAULT_QUBIT_CAP) -> SpectralHamiltonian:
    """Diagonalize a Hermitian matrix and merge degenerate levels."""
    matrix = np.asarray(matrix, dtype=complex)
    d = matrix.shape[0]
    if n is None:
        n = int(round(np.log2(d)))
    if d != 2 ** n:
        raise ValueError(f"matrix dimension {d} is not 2^{n}")
    if n > cap:
        raise CapacityError(f"n={n} exceeds the dense-storage cap {cap}")
    scale = max(np.linalg.norm(matrix, 2), 1.0)
    if np.linalg.norm(matrix - matrix.conj().T, 2) > 1e-12 * scale:
        raise ValueError("matrix is not Hermitian")
    evals, evecs = np.linalg.eigh(matrix)
    merge_tol = 1e-9 * max(np.max(np.abs(evals)), 1.0)
    levels = _merge_close(evals, merge_tol)
    projectors = []
    for lam in levels:
        sel = np.abs(evals - lam) <= merge_tol + 1e-12
        V = evecs[:, sel]
        projectors.append(V @ V.conj().T)
    return SpectralHamiltonian(
        n=n, matrix=matrix, eigenvalues=levels, projectors=tuple(projectors),
        raw_eigenvalues=evals, eigenvectors=evecs,
    )


def build_tfim(n: int, J: float = 1.0, h: float = 0.1,
               cap: int = DEFAULT_QUBIT_CAP) -> SpectralHamiltonian:
    """Open-chain transverse-field Ising model -J sum Z_i Z_{i+1} - h sum X_i."""
    if n < 1:
        raise ValueError("n must be >= 1")
    if n > cap:
        raise CapacityError(f"n={n} exceeds the dense-storage cap {cap}")
    d = 2 ** n
    H = np.zeros((d, d), dtype=complex)
    for i in range(n - 1):
        H -= J * (single_site(n, i, "Z") @ single_site(n, i + 1, "Z"))
    for i in range(n):
        H -= h * single_site(n, i, "X")
    return spectral_hamiltonian(H, n=n, cap=cap)


# ---------------------------------------------------------------------------
# Bohr decomposition
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class BohrDecomposition:
    """A = sum_nu A_nu with A_nu oscillating at e^{i nu t} under H."""

    frequencies: np.ndarray
    components: dict = field(repr=False)

    def component(self, nu: float, tol: float = 1e-9) -> np.ndarray:
        for f in self.frequencies:
            if abs(f - nu) <= tol:
                return self.components[f]
        raise KeyError(f"no Bohr component at frequency {nu}")


def bohr_decompose(H: SpectralHamiltonian, A: np.ndarray,
                   tol: float | None = None) -> BohrDecomposition:
    """Split A into Bohr components A_nu = sum_{lam_i - lam_j = nu} P_i A P_j."""
    A = np.asarray(A, dtype=complex)
    normA = np.linalg.norm(A, 2)
    if normA == 0:
        raise DegenerateInputError("coupling operator is zero")
    tol = H._merge_tol(tol)
    pieces = {}
    for li, Pi in zip(H.eigenvalues, H.projectors):
        for lj, Pj in zip(H.eigenvalues, H.projectors):
            nu = li - lj
            piece = Pi @ A @ Pj
            if np.linalg.norm(piece, 2) <= 1e-14 * normA:
                continue
            for key in pieces:
                if abs(key - nu) <= tol:
                    pieces[key] = pieces[key] + piece
                    break
            else:
                pieces[nu] = piece
    freqs = np.array(sorted(pieces))
    return BohrDecomposition(frequencies=freqs,
                             components={f: pieces[f] for f in freqs})


# ---------------------------------------------------------------------------
# Gibbs states and purifications
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class GibbsState:
    """sigma = e^{-beta H} / Z with cached fractional powers."""

    beta: float
    H: SpectralHamiltonian
    sigma: np.ndarray
    sqrt_sigma: np.ndarray
    quarter_sigma: np.ndarray
    inv_quarter_sigma: np.ndarray
    log_z: float

    @property
    def dim(self) -> int:
        return self.sigma.shape[0]


def gibbs_state(H: SpectralHamiltonian, beta: float) -> GibbsState:
    """Gibbs state of H at inverse temperature beta >= 0."""
    if beta < 0:
        raise ValueError("beta must be non-negative")
    lam = H.raw_eigenvalues
    V = H.eigenvectors
    # shift by the ground energy for numerical stability at large beta
    w = np.exp(-beta * (lam - lam[0]))
    Zs = w.sum()
    log_z = float(np.log(Zs) - beta * lam[0])
    p = w / Zs

    def power(expo):
        return (V * p ** expo) @ V.conj().T

    return GibbsState(
        beta=beta, H=H, sigma=power(1.0), sqrt_sigma=power(0.5),
        quarter_sigma=power(0.25), inv_quarter_sigma=power(-0.25),
        log_z=log_z,
    )


@dataclass(frozen=True)
class DoubledState:
    """A pure vector or a density matrix on the 4^n-dimensional doubled space."""

    dim: int
    vector: np.ndarray | None = None
    density: np.ndarray | None = None

    def __post_init__(self):
        if (self.vector is None) == (self.density is None):
            raise ValueError("exactly one of vector / density must be given")

    @property
    def is_pure(self) -> bool:
        return self.vector is not None

    def as_density(self) -> np.ndarray:
        if self.density is not None:
            return self.density
        return np.outer(self.vector, self.vector.conj())


def pure_doubled(v: np.ndarray) -> DoubledState:
    v = np.asarray(v, dtype=complex)
    return DoubledState(dim=v.size, vector=v / np.linalg.norm(v))


def purified_gibbs(G: GibbsState) -> DoubledState:
    """The thermofield double |sigma^{1/2}>> = vec(sigma^{1/2}), unit norm."""
    v = vec(G.sqrt_sigma)
    return DoubledState(dim=v.size, vector=v / np.linalg.norm(v))


def kms_inner(Xm: np.ndarray, Ym: np.ndarray, G: GibbsState) -> complex:
    """KMS inner product <X, Y>_sigma = Tr(X^dag sigma^{1/2} Y sigma^{1/2})."""
    Xm = np.asarray(Xm)
    Ym = np.asarray(Ym)
    if Xm.shape != Ym.shape or Xm.shape != G.sigma.shape:
        raise ValueError("dimension mismatch in KMS inner product")
    s = G.sqrt_sigma
    return complex(np.trace(Xm.conj().T @ s @ Ym @ s))


# ---------------------------------------------------------------------------
# matrix serialization (golden-file layout)
# ---------------------------------------------------------------------------

def save_matrix(path: str, M: np.ndarray):
    """Write a complex matrix as row-major (re, im) float64 pairs.

    A JSON sidecar at path + '.json' records the dims and the vectorization
    convention tag so a golden file is self-describing.
    """
    import json

    M = np.ascontiguousarray(np.asarray(M, dtype=complex))
    buf = np.empty(M.shape + (2,), dtype=np.float64)
    buf[..., 0] = M.real
    buf[..., 1] = M.imag
    with open(path, "wb") as fh:
        fh.write(buf.tobytes("C"))
    header = {
        "dims": list(M.shape),
        "payload": "float64-re-im-pairs",
        "order": "row-major",
        "convention": "col-major-vec",
    }
    with open(path + ".json", "w") as fh:
        json.dump(header, fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_matrix(path: str) -> np.ndarray:
    """Read a matrix written by save_matrix, checking the header tags."""
    import json

    with open(path + ".json") as fh:
        header = json.load(fh)
    if header.get("convention") != "col-major-vec":
        raise ValueError(f"unknown convention {header.get('convention')!r}")
    if header.get("payload") != "float64-re-im-pairs":
        raise ValueError(f"unknown payload {header.get('payload')!r}")
    dims = header["dims"]
    data = np.fromfile(path, dtype=np.float64)
    expected = int(np.prod(dims)) * 2
    if data.size != expected:
        raise ValueError(f"payload holds {data.size} floats, header implies "
                         f"{expected}")
    data = data.reshape(*dims, 2)
    return data[..., 0] + 1j * data[..., 1]
