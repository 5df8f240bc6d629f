"""Canonical-ensemble states of finite chains: sector-blocked diagonalization,
Gibbs weights, reduced density matrices and nearest-neighbor correlators."""

from dataclasses import dataclass, field

import numpy as np
from scipy.special import logsumexp

from . import kernels
from .models import SectorPlan, build_hamiltonian, symmetry_sectors
from .paulis import SIGMA, NumericalConsistencyError, check_density_matrix, site_index

# relative Gibbs weights below this are dropped from reduced-state sums
WEIGHT_CUTOFF = 1e-300
TRANSLATION_TOL = 1e-9


@dataclass(frozen=True)
class Spectrum:
    """Eigendecomposition of a chain Hamiltonian, one block per symmetry sector."""

    spec: object  # ModelSpec
    plan: SectorPlan
    evals: tuple  # float64 arrays, one per sector
    evecs: tuple  # float64 (n_states, n_states) arrays, one per sector

    @property
    def ground_energy(self):
        return min(e.min() for e in self.evals)


@dataclass(frozen=True)
class ThermalState:
    """Gibbs state exp(-H/kT)/Z held in the eigenbasis of H."""

    spectrum: Spectrum
    kT: float
    weights: tuple  # per-sector normalized Gibbs weights
    logZ: float

    @property
    def spec(self):
        return self.spectrum.spec


@dataclass(frozen=True)
class CorrelatorSet:
    """Nearest-neighbor one- and two-point functions <sz>, <ss'> for s=x,y,z."""

    z: float
    xx: float
    yy: float
    zz: float


def diagonalize(spec, blocked=True):
    """Diagonalize H(spec), sector by sector when blocked (results identical)."""
    H = build_hamiltonian(spec)
    if H.nnz and np.abs(H.imag).max() > 1e-12:
        raise NumericalConsistencyError("Hamiltonian has complex entries")
    Hr = H.real.tocsr()
    if blocked:
        plan = symmetry_sectors(spec)
    else:
        plan = SectorPlan("none", (None,), (np.arange(1 << spec.L, dtype=np.int64),))
    evals, evecs = [], []
    for ix in plan.indices:
        block = Hr[ix][:, ix].toarray()
        e, v = np.linalg.eigh(block)
        evals.append(e)
        evecs.append(v)
    return Spectrum(spec=spec, plan=plan, evals=tuple(evals), evecs=tuple(evecs))


def gibbs_state(spec, kT, spectrum=None, blocked=True):
    """Thermal state at temperature kT > 0; reuses `spectrum` when provided."""
    if kT <= 0:
        raise ValueError(f"kT must be positive, got {kT} (reach T=0 by extrapolation)")
    if spectrum is None:
        spectrum = diagonalize(spec, blocked=blocked)
    elif spec is not None and spectrum.spec != spec:
        raise ValueError("spectrum was computed for a different model spec")
    emin = spectrum.ground_energy
    raw = [np.exp(-(e - emin) / kT) for e in spectrum.evals]
    total = sum(r.sum() for r in raw)
    weights = tuple(r / total for r in raw)
    logZ = -emin / kT + float(logsumexp(np.concatenate(
        [-(e - emin) / kT for e in spectrum.evals])))
    return ThermalState(spectrum=spectrum, kT=float(kT), weights=weights, logZ=logZ)


def _site_codes(states, sites, L):
    """Pack the bits of `sites` (in order) and of the remaining sites."""
    keep = np.zeros_like(states)
    for pos, j in enumerate(sites):
        bit = (states >> (L - j)) & 1
        keep |= bit << (len(sites) - 1 - pos)
    env = np.zeros_like(states)
    pos = 0
    site_set = set(sites)
    for j in range(L, 0, -1):
        if j in site_set:
            continue
        env |= ((states >> (L - j)) & 1) << pos
        pos += 1
    return keep, env


def reduced_state(ts, sites, validate=True):
    """Reduced density matrix of `sites` (ordered), never materializing the full state."""
    L = ts.spec.L
    sites = [int(j) for j in sites]
    if not sites or len(set(sites)) != len(sites) or any(not 1 <= j <= L for j in sites):
        raise ValueError(f"sites {sites} must be distinct values in 1..{L}")
    dk = 1 << len(sites)
    rdm = np.zeros((dk, dk), dtype=complex)
    wmax = max(wi.max() for wi in ts.weights)
    for ix, w, v in zip(ts.spectrum.plan.indices, ts.weights, ts.spectrum.evecs):
        cols = w / wmax > WEIGHT_CUTOFF
        if not cols.any():
            continue
        keep, env = _site_codes(ix, sites, L)
        rdm += kernels.accumulate_reduced(v[:, cols], w[cols], keep, env, dk)
    rdm = 0.5 * (rdm + rdm.conj().T)
    if validate:
        check_density_matrix(rdm)
    return rdm


def full_state(ts):
    """Dense 2^L Gibbs matrix; oracle/validation use only (memory-bound at large L)."""
    L = ts.spec.L
    dim = 1 << L
    rho = np.zeros((dim, dim), dtype=complex)
    for ix, w, v in zip(ts.spectrum.plan.indices, ts.weights, ts.spectrum.evecs):
        vw = v * np.sqrt(w)[None, :]
        rho[np.ix_(ix, ix)] += vw @ vw.conj().T
    return rho


_Z1 = np.kron(SIGMA["z"], SIGMA["i"])
_PAIR = {s: np.kron(SIGMA[s], SIGMA[s]) for s in ("x", "y", "z")}


def _pair_correlators(rho2):
    z = np.trace(_Z1 @ rho2)
    ss = {s: np.trace(_PAIR[s] @ rho2) for s in ("x", "y", "z")}
    vals = [z] + list(ss.values())
    if max(abs(v.imag) for v in vals) > 1e-10:
        raise NumericalConsistencyError("correlator has a nonzero imaginary part")
    return float(z.real), float(ss["x"].real), float(ss["y"].real), float(ss["z"].real)


def correlators(ts, check_translation=True):
    """z = <sz_1> and ss = <ss_1 ss_2> from the (1,2) reduced state.

    Translation invariance is asserted against the (2,3) pair.
    """
    c1 = _pair_correlators(reduced_state(ts, (1, 2)))
    if check_translation:
        L = ts.spec.L
        c2 = _pair_correlators(reduced_state(ts, (2, site_index(3, L))))
        worst = max(abs(a - b) for a, b in zip(c1, c2))
        if worst > TRANSLATION_TOL:
            raise NumericalConsistencyError(
                f"translation invariance violated by {worst:.3e}")
    return CorrelatorSet(z=c1[0], xx=c1[1], yy=c1[2], zz=c1[3])


def energy(ts):
    """Tr[H rho] from the spectral data."""
    return float(sum((w * e).sum() for w, e in zip(ts.weights, ts.spectrum.evals)))


def purity(ts):
    """Tr[rho^2] = sum of squared Gibbs weights."""
    return float(sum((w ** 2).sum() for w in ts.weights))
