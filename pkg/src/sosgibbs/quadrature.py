"""Time-grid discretization of the parent Hamiltonian factorization.

The rectangular operator stacks sqrt(h g(t_k)) Bhat_{j,t_k} over channels j
(outer) and grid points k (inner).  Grid parameters follow the closed forms

    T   = (beta / 2 pi) log(32 / (pi eps'))
    1/h = max(4 log(17/eps') / (pi beta), 2 pi / beta, 4 |H| / pi)

with the per-channel split eps' = eps / J.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .factorization import FactorPair, cosh_kernel, first_order_doubled
from .lindblad import Superoperator
from .spectral import CapacityError, SpectralHamiltonian


@dataclass(frozen=True)
class QuadratureGrid:
    """Left-closed uniform grid t_k = -T + 2Tk/N, k = 0..N-1."""

    T: float
    N: int
    beta: float

    @property
    def h(self) -> float:
        return 2 * self.T / self.N

    @property
    def points(self) -> np.ndarray:
        return -self.T + self.h * np.arange(self.N)

    @property
    def raw_weights(self) -> np.ndarray:
        """Plain step weights h (before the g(t_k) factor)."""
        return np.full(self.N, self.h)

    @property
    def weights(self) -> np.ndarray:
        """g_k = g(t_k) h."""
        g = cosh_kernel(self.beta)
        return np.array([g(t) * self.h for t in self.points])

    @property
    def mass(self) -> float:
        """sum g_k, close to the exact integral 1/2 on adequate grids."""
        return float(np.sum(self.weights))


def select_grid(beta: float, normH: float, J: int, eps: float) -> QuadratureGrid:
    """Grid certified by the quadrature error lemma to reach |Hhat - B'B| <= eps."""
    if not 0 < eps < 1:
        raise ValueError("eps must lie in (0, 1)")
    if beta <= 0:
        raise ValueError("beta must be positive")
    epsj = eps / max(J, 1)
    T = (beta / (2 * math.pi)) * math.log(32 / (math.pi * epsj))
    inv_h = max(4 * math.log(17 / epsj) / (math.pi * beta),
                2 * math.pi / beta,
                4 * normH / math.pi)
    N = math.ceil(2 * T * inv_h)
    return QuadratureGrid(T=T, N=max(N, 1), beta=beta)


@dataclass(frozen=True)
class RectFactor:
    """The tall stacked operator with its grid and cached singular values."""

    grid: QuadratureGrid
    J: int
    stacked: np.ndarray            # (J N D) x D
    singular_values: np.ndarray    # descending

    @property
    def dim(self) -> int:
        return self.stacked.shape[1]

    def gram(self) -> np.ndarray:
        return self.stacked.conj().T @ self.stacked

    def smallest_right_singular_vector(self) -> np.ndarray:
        _, _, Vh = np.linalg.svd(self.stacked, full_matrices=False)
        return Vh[-1].conj()

    def block(self, j: int, k: int) -> np.ndarray:
        D = self.dim
        row = (j * self.grid.N + k) * D
        return self.stacked[row:row + D]


def assemble_B(pairs: Sequence[FactorPair], H: SpectralHamiltonian,
               grid: QuadratureGrid, memory_cap: float = 2e9) -> RectFactor:
    """Stack sqrt(g_k) Bhat_{j,t_k} in (j outer, k inner) order."""
    D = H.dim ** 2
    J = len(pairs)
    nbytes = J * grid.N * D * D * 16
    if nbytes > memory_cap:
        raise CapacityError(
            f"stacked operator would need {nbytes / 1e9:.1f} GB (cap {memory_cap / 1e9:.1f} GB)")
    weights = grid.weights
    blocks = []
    for pair in pairs:
        for k, t in enumerate(grid.points):
            blocks.append(math.sqrt(weights[k]) * first_order_doubled(pair, H, t))
    stacked = np.vstack(blocks)
    sv = np.linalg.svd(stacked, compute_uv=False)
    return RectFactor(grid=grid, J=J, stacked=stacked, singular_values=sv)


def measure_error(B: RectFactor, Hhat: Superoperator) -> float:
    """Operator norm of Hhat - B^dag B."""
    if Hhat.dim != B.dim:
        raise ValueError("dimension mismatch between Hhat and the stacked operator")
    return float(np.linalg.norm(Hhat.matrix - B.gram(), 2))


def error_scaling_scan(spec, H: SpectralHamiltonian, G, eps_list: Sequence[float],
                       Hhat: Superoperator | None = None) -> list[dict]:
    """Measured quadrature error against the requested eps over a sweep.

    Raises if any measured error exceeds its request.
    """
    from .factorization import build_factors
    from .lindblad import assemble_generator, parent_hamiltonian

    if sorted(eps_list, reverse=True) != list(eps_list):
        raise ValueError("eps_list must be descending")
    if Hhat is None:
        Hhat = parent_hamiltonian(assemble_generator(spec), G)
    pairs = build_factors(spec, G)
    J = len(pairs)
    rows = []
    for eps in eps_list:
        grid = select_grid(spec.beta, H.norm, J, eps)
        B = assemble_B(pairs, H, grid)
        err = measure_error(B, Hhat)
        if err > eps:
            raise AssertionError(
                f"measured quadrature error {err:.3e} exceeds requested {eps:.3e}")
        rows.append({"eps_requested": float(eps), "T": grid.T, "N": grid.N,
                     "h": grid.h, "massC": grid.mass, "error_measured": err})
    return rows
