"""Sparse Pauli-string operators, partial traces and expectation values.

Convention used everywhere in this package: site 1 is the most significant
bit of the computational basis index, and bit value 0 corresponds to the
sigma^z = +1 eigenstate |0>.
"""

import numpy as np
from scipy import sparse

SIGMA = {
    "i": np.eye(2, dtype=complex),
    "x": np.array([[0.0, 1.0], [1.0, 0.0]], dtype=complex),
    "y": np.array([[0.0, -1.0j], [1.0j, 0.0]], dtype=complex),
    "z": np.array([[1.0, 0.0], [0.0, -1.0]], dtype=complex),
}

# tolerances enforced at density-matrix construction
HERM_TOL = 1e-12
TRACE_TOL = 1e-10
PSD_TOL = 1e-10


class NumericalConsistencyError(Exception):
    """A numerical invariant (hermiticity, realness, trace) was violated."""


def site_index(j, L):
    """Wrap a 1-based site label periodically onto 1..L."""
    return (j - 1) % L + 1


def site_operator(axis, j, L):
    """sigma^axis acting on site j of an L-qubit register, as sparse CSR."""
    if axis not in ("x", "y", "z"):
        raise ValueError(f"unknown Pauli axis {axis!r}")
    if not 1 <= j <= L:
        raise IndexError(f"site {j} out of range 1..{L}")
    return pauli_string({j: axis}, L)


def pauli_string(factors, L):
    """Tensor product of Pauli matrices given as {site: axis}, identity elsewhere."""
    for j in factors:
        if not 1 <= j <= L:
            raise IndexError(f"site {j} out of range 1..{L}")
    op = sparse.identity(1, dtype=complex, format="csr")
    for j in range(1, L + 1):
        factor = SIGMA[factors.get(j, "i")]
        op = sparse.kron(op, sparse.csr_matrix(factor), format="csr")
    return op


def partial_trace(rho, keep, L):
    """Trace out all sites not in `keep` (1-based); kept sites appear in the given order."""
    keep = list(keep)
    if not keep:
        raise ValueError("keep must be nonempty")
    if len(set(keep)) != len(keep):
        raise ValueError(f"duplicate sites in keep={keep}")
    for j in keep:
        if not 1 <= j <= L:
            raise ValueError(f"site {j} out of range 1..{L}")
    dim = 1 << L
    rho = np.asarray(rho)
    if rho.shape != (dim, dim):
        raise ValueError(f"expected a {dim}x{dim} matrix, got {rho.shape}")
    keep_axes = [j - 1 for j in keep]
    env_axes = [a for a in range(L) if a not in keep_axes]
    perm = keep_axes + env_axes
    arr = rho.reshape((2,) * (2 * L))
    arr = arr.transpose(perm + [L + a for a in perm])
    dk = 1 << len(keep)
    de = 1 << len(env_axes)
    arr = arr.reshape(dk, de, dk, de)
    return np.einsum("aibi->ab", arr)


def expectation(rho, op):
    """Tr[op rho] for a sparse operator and dense state; must be real."""
    rho = np.asarray(rho)
    if op.shape != rho.shape:
        raise ValueError(f"dimension mismatch: {op.shape} vs {rho.shape}")
    coo = op.tocoo()
    val = np.sum(coo.data * rho[coo.col, coo.row])
    if abs(val.imag) > 1e-8:
        raise NumericalConsistencyError(
            f"expectation has imaginary part {val.imag:.3e} (non-Hermitian input?)"
        )
    return float(val.real)


def check_density_matrix(rho, herm_tol=HERM_TOL, trace_tol=TRACE_TOL, psd_tol=PSD_TOL):
    """Validate hermiticity, unit trace and positivity; returns rho unchanged."""
    rho = np.asarray(rho)
    n = rho.shape[0]
    if rho.shape != (n, n) or n & (n - 1):
        raise ValueError(f"density matrix must be square with power-of-two size, got {rho.shape}")
    if np.max(np.abs(rho - rho.conj().T)) > herm_tol:
        raise NumericalConsistencyError("density matrix is not Hermitian")
    if abs(np.trace(rho).real - 1.0) > trace_tol or abs(np.trace(rho).imag) > trace_tol:
        raise NumericalConsistencyError(f"trace is {np.trace(rho)}, expected 1")
    evals = np.linalg.eigvalsh(rho)
    if evals.min() < -psd_tol:
        raise NumericalConsistencyError(f"negative eigenvalue {evals.min():.3e}")
    return rho
