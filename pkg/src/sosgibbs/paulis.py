"""Pauli-string algebra on n qubits.

Dense 2^n x 2^n matrices throughout.  A PauliString stores per-site letters
in {I, X, Y, Z} together with a unit phase in {+1, -1, +i, -i}; products of
Pauli strings are again Pauli strings, which is the only algebraic fact the
rest of the package relies on.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import reduce

import numpy as np

I2 = np.eye(2, dtype=complex)
X = np.array([[0, 1], [1, 0]], dtype=complex)
Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
Z = np.array([[1, 0], [0, -1]], dtype=complex)

PAULI_MATRICES = {"I": I2, "X": X, "Y": Y, "Z": Z}

# single-qubit multiplication table: (phase, letter) of a*b
_MUL = {
    ("I", "I"): (1, "I"), ("I", "X"): (1, "X"), ("I", "Y"): (1, "Y"), ("I", "Z"): (1, "Z"),
    ("X", "I"): (1, "X"), ("X", "X"): (1, "I"), ("X", "Y"): (1j, "Z"), ("X", "Z"): (-1j, "Y"),
    ("Y", "I"): (1, "Y"), ("Y", "X"): (-1j, "Z"), ("Y", "Y"): (1, "I"), ("Y", "Z"): (1j, "X"),
    ("Z", "I"): (1, "Z"), ("Z", "X"): (1j, "Y"), ("Z", "Y"): (-1j, "X"), ("Z", "Z"): (1, "I"),
}

_PHASES = (1, -1, 1j, -1j)


@dataclass(frozen=True)
class PauliString:
    """An n-qubit Pauli string with a unit phase."""

    letters: str
    phase: complex = 1

    def __post_init__(self):
        if not self.letters or any(c not in "IXYZ" for c in self.letters):
            raise ValueError(f"invalid Pauli letters {self.letters!r}")
        if not any(abs(self.phase - p) < 1e-14 for p in _PHASES):
            raise ValueError(f"phase must be a fourth root of unity, got {self.phase}")

    @property
    def n(self) -> int:
        return len(self.letters)

    @property
    def weight(self) -> int:
        """Number of non-identity sites."""
        return sum(1 for c in self.letters if c != "I")

    @property
    def support(self) -> frozenset:
        return frozenset(i for i, c in enumerate(self.letters) if c != "I")

    def __mul__(self, other: "PauliString") -> "PauliString":
        if self.n != other.n:
            raise ValueError("qubit count mismatch")
        phase = self.phase * other.phase
        letters = []
        for a, b in zip(self.letters, other.letters):
            p, c = _MUL[(a, b)]
            phase *= p
            letters.append(c)
        return PauliString("".join(letters), phase)

    def matrix(self) -> np.ndarray:
        mats = [PAULI_MATRICES[c] for c in self.letters]
        return self.phase * reduce(np.kron, mats)


def single_site(n: int, site: int, letter: str) -> np.ndarray:
    """Dense matrix for a single-site Pauli, e.g. X on qubit `site` of n."""
    letters = ["I"] * n
    letters[site] = letter
    return PauliString("".join(letters)).matrix()


def all_pauli_strings(n: int):
    """All 4^n phase-free Pauli strings on n qubits, lexicographic in IXYZ."""
    from itertools import product

    return [PauliString("".join(p)) for p in product("IXYZ", repeat=n)]


def parse_coupling(text: str, n: int) -> np.ndarray:
    """Parse a coupling-operator label like "X1" or "Z1Z2" (1-based sites).

    Returns the dense matrix on n qubits.
    """
    import re

    tokens = re.findall(r"([XYZ])(\d+)", text.strip())
    if not tokens or "".join(f"{l}{s}" for l, s in tokens) != text.strip().replace(" ", ""):
        raise ValueError(f"cannot parse coupling label {text!r}")
    letters = ["I"] * n
    for letter, site in tokens:
        idx = int(site) - 1
        if not 0 <= idx < n:
            raise ValueError(f"site {site} out of range for n={n} in {text!r}")
        if letters[idx] != "I":
            raise ValueError(f"repeated site {site} in {text!r}")
        letters[idx] = letter
    return PauliString("".join(letters)).matrix()
