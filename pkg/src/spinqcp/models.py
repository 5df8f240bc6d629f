"""Spin-1/2 chain Hamiltonians (XXZ and transverse-field XY family) with
periodic boundary conditions, plus their conserved-quantity sector plans."""

import math
from dataclasses import dataclass, replace

import numpy as np
from scipy import sparse

from .paulis import pauli_string, site_index

XXZ = "xxz"
XY = "xy"


@dataclass(frozen=True)
class ModelSpec:
    """One chain Hamiltonian instance.

    family "xxz": H = sum_j [sx sx + sy sy + delta sz sz - (h/2) sz_j]
    family "xy":  H = -(lam/4) sum_j [(1+gamma) sx sx + (1-gamma) sy sy]
                      - (1/2) sum_j sz_j
    Bonds run j = 1..L with site L+1 = site 1, so L = 2 counts its single
    bond twice.
    """

    family: str
    L: int
    delta: float = 0.0
    h: float = 0.0
    lam: float = 0.0
    gamma: float = 0.0

    def __post_init__(self):
        if self.family not in (XXZ, XY):
            raise ValueError(f"unknown model family {self.family!r}")
        if self.L < 2:
            raise ValueError(f"chain length must be >= 2, got {self.L}")
        for name in ("delta", "h", "lam", "gamma"):
            v = getattr(self, name)
            if not math.isfinite(v):
                raise ValueError(f"coupling {name}={v} is not finite")

    @classmethod
    def xxz(cls, L, delta, h=0.0):
        return cls(family=XXZ, L=L, delta=float(delta), h=float(h))

    @classmethod
    def xy(cls, L, lam, gamma):
        return cls(family=XY, L=L, lam=float(lam), gamma=float(gamma))

    def with_tuning(self, name, value):
        """Return a copy with tuning parameter `name` in {delta, lam, gamma} replaced."""
        if name not in ("delta", "lam", "gamma"):
            raise ValueError(f"unknown tuning parameter {name!r}")
        return replace(self, **{name: float(value)})


@dataclass(frozen=True)
class SectorPlan:
    """Partition of the 2^L basis into blocks of a conserved quantity."""

    kind: str  # "magnetization" or "parity"
    labels: tuple
    indices: tuple  # tuple of int64 arrays, one per label

    @property
    def sizes(self):
        return tuple(len(ix) for ix in self.indices)


def build_hamiltonian(spec):
    """Full 2^L-dimensional Hamiltonian as sparse CSR (complex, Hermitian)."""
    L = spec.L
    dim = 1 << L
    H = sparse.csr_matrix((dim, dim), dtype=complex)
    for j in range(1, L + 1):
        jn = site_index(j + 1, L)
        if spec.family == XXZ:
            H = H + pauli_string({j: "x", jn: "x"}, L)
            H = H + pauli_string({j: "y", jn: "y"}, L)
            H = H + spec.delta * pauli_string({j: "z", jn: "z"}, L)
            H = H - (spec.h / 2.0) * pauli_string({j: "z"}, L)
        else:
            H = H - (spec.lam / 4.0) * (1.0 + spec.gamma) * pauli_string({j: "x", jn: "x"}, L)
            H = H - (spec.lam / 4.0) * (1.0 - spec.gamma) * pauli_string({j: "y", jn: "y"}, L)
            H = H - 0.5 * pauli_string({j: "z"}, L)
    return H.tocsr()


def symmetry_sectors(spec):
    """Sector plan block-diagonalizing build_hamiltonian(spec).

    XXZ and the isotropic XX chain conserve total magnetization (sum sz);
    the anisotropic XY family conserves only spin-flip parity (prod sz).
    """
    L = spec.L
    states = np.arange(1 << L, dtype=np.int64)
    nflip = np.bitwise_count(states).astype(np.int64)
    if spec.family == XXZ or spec.gamma == 0.0:
        mag = L - 2 * nflip  # sum of sz eigenvalues
        labels = tuple(range(L, -L - 1, -2))
        indices = tuple(states[mag == m] for m in labels)
        return SectorPlan("magnetization", labels, indices)
    par = 1 - 2 * (nflip & 1)  # prod of sz eigenvalues
    labels = (1, -1)
    indices = tuple(states[par == p] for p in labels)
    return SectorPlan("parity", labels, indices)
