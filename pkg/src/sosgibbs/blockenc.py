"""Composite block encoding of the stacked first-order operator.

Dense, toy-size (1-2 qubit) assembly of the filtering circuit's input
unitary from its constituent oracles: channel-selected encodings of the
sharp/flat factors, controlled time evolution over the quadrature grid,
and the quadrature-weight preparation oracle.  The point is to verify the
(2 sqrt(JC), p+1, 0) contract and the query counts exactly, not to compile
gates.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .quadrature import QuadratureGrid
from .spectral import SpectralHamiltonian
from .factorization import FactorPair

# oracle uses per query to the composite encoding
QUERY_COUNTS = {"U_Bsharp": 1, "U_BflatT": 1, "U_sel": 2, "U_selT": 2,
                "U_prep": 1}

_UNITARITY_TOL = 1e-10


class AssemblyError(Exception):
    """The assembled encoding violates its block contract."""


def _check_unitary(U: np.ndarray, name: str):
    D = U.shape[0]
    err = np.linalg.norm(U.conj().T @ U - np.eye(D), 2)
    if err > _UNITARITY_TOL:
        raise AssemblyError(f"{name} is not unitary (defect {err:.3e})")


def _next_pow2(m: int) -> int:
    return 1 << max(0, (m - 1).bit_length())


def _complete_columns(V: np.ndarray) -> np.ndarray:
    """Extend an isometry (orthonormal columns) to a square unitary whose
    leading columns are V, filling the rest from the orthogonal complement."""
    D, K = V.shape
    P = np.eye(D) - V @ V.conj().T
    U_c, s, _ = np.linalg.svd(P)
    W = U_c[:, :D - K]
    return np.hstack([V, W])


def _dilate(X: np.ndarray, out_dim: int) -> np.ndarray:
    """One-ancilla unitary dilation of a tall block X (norm <= 1): the
    returned unitary on 2*out_dim dimensions maps the leading columns to
    |0> X e_i + |1>|0..> sqrt(I - X^dag X) e_i."""
    rows, K = X.shape
    if rows > out_dim:
        raise ValueError("block taller than the stated output dimension")
    nrm = np.linalg.norm(X, 2)
    if nrm > 1 + 1e-12:
        raise AssemblyError(f"block norm {nrm:.6f} exceeds 1; rescale first")
    gram = X.conj().T @ X
    lam, W = np.linalg.eigh((gram + gram.conj().T) / 2)
    R = (W * np.sqrt(np.clip(1.0 - lam, 0.0, None))) @ W.conj().T
    cols = np.zeros((2 * out_dim, K), dtype=complex)
    cols[:rows] = X
    cols[out_dim:out_dim + K] = R
    return _complete_columns(cols)


def embed(op: np.ndarray, dims: list[int], targets: list[int]) -> np.ndarray:
    """Act with `op` on the listed subsystems of a register stack with the
    given dimensions (identity elsewhere)."""
    D = int(np.prod(dims))
    rest = [i for i in range(len(dims)) if i not in targets]
    order = list(targets) + rest
    rest_dim = D // int(np.prod([dims[t] for t in targets]))
    M = np.kron(op, np.eye(rest_dim))
    # permutation fixing [targets..., rest...] ordering back to natural order
    idx = np.arange(D).reshape(dims)
    perm_idx = np.transpose(idx, order).reshape(-1)
    P = np.zeros((D, D))
    P[perm_idx, np.arange(D)] = 1.0  # maps reordered basis to natural basis
    return P @ M @ P.T


@dataclass(frozen=True)
class OracleSet:
    """Dense oracle unitaries plus the bookkeeping needed to read them."""

    U_Bsharp: np.ndarray   # on [p ancilla, channel, system]
    U_BflatT: np.ndarray   # same layout
    U_sel: np.ndarray      # on [grid, system]
    U_selT: np.ndarray     # transposed-Hamiltonian select
    U_prep: np.ndarray     # on [grid]
    J: int                 # padded channel count (power of two)
    N: int                 # padded grid count (power of two)
    J_actual: int
    N_actual: int
    d: int                 # system dimension 2^n
    rescale: float         # common factor pulled out of the sharp/flat blocks
    grid: QuadratureGrid

    @property
    def p(self) -> int:
        return 1


@dataclass(frozen=True)
class BlockEncoding:
    """A dense (alpha, m, 0)-block-encoding together with its target."""

    unitary: np.ndarray
    alpha: float
    ancilla_count: int
    target: np.ndarray     # what alpha * extracted block should equal
    queries: dict

    def extracted(self) -> np.ndarray:
        rows_t, cols_t = self.target.shape
        return self.unitary[:rows_t, :cols_t]

    def contract_error(self) -> float:
        return float(np.linalg.norm(
            self.target - self.alpha * self.extracted(), 2))


def build_oracles(pairs: list[FactorPair], H: SpectralHamiltonian,
                  grid: QuadratureGrid) -> OracleSet:
    """Dilate the factor blocks and build the select/prepare oracles.

    Channel and grid counts are padded to powers of two with zero blocks
    and zero weights.  If any factor norm exceeds 1 both families are
    rescaled by the common maximum, recorded in `rescale`.
    """
    d = H.dim
    J_actual = len(pairs)
    J = _next_pow2(J_actual)
    N_actual = grid.N
    N = _next_pow2(N_actual)

    c = max(1.0, max(max(p.norm_sharp, p.norm_flat) for p in pairs))

    Xs = np.zeros((J * d, d), dtype=complex)
    Xf = np.zeros((J * d, d), dtype=complex)
    for j, pair in enumerate(pairs):
        Xs[j * d:(j + 1) * d] = pair.Bsharp / (math.sqrt(J) * c)
        Xf[j * d:(j + 1) * d] = pair.Bflat.T / (math.sqrt(J) * c)
    U_Bsharp = _dilate(Xs, J * d)
    U_BflatT = _dilate(Xf, J * d)

    # select oracles: exact eigenbasis evolution on real points, identity on pads
    blocks_sel, blocks_selT = [], []
    for k in range(N):
        if k < N_actual:
            U_t = H.evolve(grid.points[k])   # e^{+i t_k H}
        else:
            U_t = np.eye(d, dtype=complex)
        blocks_sel.append(U_t)
        blocks_selT.append(U_t.T)  # e^{i t H^T} = (e^{i t H})^T
    U_sel = np.zeros((N * d, N * d), dtype=complex)
    U_selT = np.zeros((N * d, N * d), dtype=complex)
    for k in range(N):
        U_sel[k * d:(k + 1) * d, k * d:(k + 1) * d] = blocks_sel[k]
        U_selT[k * d:(k + 1) * d, k * d:(k + 1) * d] = blocks_selT[k]

    g = np.zeros(N)
    g[:N_actual] = grid.weights
    v = np.sqrt(g / g.sum()).astype(complex).reshape(N, 1)
    U_prep = _complete_columns(v)

    oset = OracleSet(U_Bsharp=U_Bsharp, U_BflatT=U_BflatT, U_sel=U_sel,
                     U_selT=U_selT, U_prep=U_prep, J=J, N=N,
                     J_actual=J_actual, N_actual=N_actual, d=d,
                     rescale=c, grid=grid)
    for name in ("U_Bsharp", "U_BflatT", "U_sel", "U_selT", "U_prep"):
        _check_unitary(getattr(oset, name), name)
    return oset


def _hx() -> np.ndarray:
    H2 = np.array([[1, 1], [1, -1]]) / math.sqrt(2)
    X2 = np.array([[0, 1], [1, 0]])
    return H2 @ X2


def assemble_UB(oracles: OracleSet, target: np.ndarray | None = None,
                check_tol: float = 1e-10) -> BlockEncoding:
    """Compose the oracles into the encoding of the stacked operator.

    Register stack: [p ancilla, branch, channel, grid, slow copy, fast copy];
    the sharp factor acts on the fast (left-multiplication) copy, the
    transposed flat factor on the slow copy, matching the column-major
    vectorization used everywhere else.
    """
    o = oracles
    d = o.d
    dims = [2, 2, o.J, o.N, d, d]
    D = int(np.prod(dims))

    sel_fast = embed(o.U_sel, dims, [3, 5])
    selT_slow = embed(o.U_selT, dims, [3, 4])
    Bsharp_fast = embed(o.U_Bsharp, dims, [0, 2, 5])
    BflatT_slow = embed(o.U_BflatT, dims, [0, 2, 4])

    U_sharp = sel_fast @ Bsharp_fast @ sel_fast.conj().T
    U_flat = selT_slow.conj().T @ BflatT_slow @ selT_slow

    # branch-controlled select: the sub-unitaries never touch the branch
    # register, so P0 U_sharp + P1 U_flat is itself unitary
    P0 = embed(np.diag([1.0, 0.0]), dims, [1])
    P1 = embed(np.diag([0.0, 1.0]), dims, [1])
    S = P0 @ U_sharp + P1 @ U_flat
    H2 = np.array([[1, 1], [1, -1]]) / math.sqrt(2)
    prep_branch = embed(_hx(), dims, [1])
    unprep_branch = embed(H2, dims, [1])
    U_Bt = unprep_branch @ S @ prep_branch
    _check_unitary(U_Bt, "branch LCU")

    U_B = U_Bt @ embed(o.U_prep, dims, [3])
    _check_unitary(U_B, "composite encoding")

    C = float(o.grid.mass)
    alpha = 2.0 * math.sqrt(o.J * C) * o.rescale

    if target is None:
        target = _dense_target(oracles)
    enc = BlockEncoding(unitary=U_B, alpha=alpha,
                        ancilla_count=oracles.p + 1, target=target,
                        queries=dict(QUERY_COUNTS))
    err = enc.contract_error()
    if err > check_tol * max(1.0, np.linalg.norm(target, 2)):
        raise AssemblyError(f"block contract violated: |target - alpha block| "
                            f"= {err:.3e}")
    return enc


def _dense_target(o: OracleSet) -> np.ndarray:
    """Independent dense assembly of the padded stacked operator from the
    oracle blocks themselves (j outer, k inner, zero rows on pads)."""
    d = o.d
    rows = o.J * o.N * d * d
    out = np.zeros((rows, d * d), dtype=complex)
    c = o.rescale
    for j in range(o.J_actual):
        Bs = o.U_Bsharp[j * d:(j + 1) * d, :d] * math.sqrt(o.J) * c
        Bf_T = o.U_BflatT[j * d:(j + 1) * d, :d] * math.sqrt(o.J) * c
        for k in range(o.N_actual):
            U_t = o.U_sel[k * d:(k + 1) * d, k * d:(k + 1) * d]
            Bs_t = U_t @ Bs @ U_t.conj().T
            Bf_T_t = U_t.conj() @ Bf_T @ U_t.T
            op = np.kron(np.eye(d), Bs_t) - np.kron(Bf_T_t, np.eye(d))
            w = math.sqrt(o.grid.weights[k])
            r0 = (j * o.N + k) * d * d
            out[r0:r0 + d * d] = w * op
    return out


def padded_from_quadrature(B_stacked: np.ndarray, o: OracleSet) -> np.ndarray:
    """Re-index the quadrature module's stacked operator (J_actual, N_actual)
    into the padded (J, N) row layout for entrywise comparison."""
    d = o.d
    rows = o.J * o.N * d * d
    out = np.zeros((rows, d * d), dtype=complex)
    for j in range(o.J_actual):
        for k in range(o.N_actual):
            src = (j * o.N_actual + k) * d * d
            dst = (j * o.N + k) * d * d
            out[dst:dst + d * d] = B_stacked[src:src + d * d]
    return out


def circuit_json(o: OracleSet) -> str:
    """The composite circuit as named oracle applications with wiring."""
    regs = {"ancilla": 1, "branch": 1, "channel": int(math.log2(o.J)),
            "grid": int(math.log2(o.N)), "slow": int(math.log2(o.d)),
            "fast": int(math.log2(o.d))}
    steps = [
        {"apply": "U_prep", "on": ["grid"]},
        {"apply": "HX", "on": ["branch"]},
        {"apply": "U_selT", "on": ["grid", "slow"], "controlled_on": {"branch": 1}},
        {"apply": "U_BflatT", "on": ["ancilla", "channel", "slow"], "controlled_on": {"branch": 1}},
        {"apply": "U_selT_dagger", "on": ["grid", "slow"], "controlled_on": {"branch": 1}},
        {"apply": "U_sel_dagger", "on": ["grid", "fast"], "controlled_on": {"branch": 0}},
        {"apply": "U_Bsharp", "on": ["ancilla", "channel", "fast"], "controlled_on": {"branch": 0}},
        {"apply": "U_sel", "on": ["grid", "fast"], "controlled_on": {"branch": 0}},
        {"apply": "H", "on": ["branch"]},
    ]
    return json.dumps({"registers": regs, "steps": steps,
                       "queries": QUERY_COUNTS}, indent=2)
