"""Hot numerical kernels with a compiled (Cython) core and a pure-numpy fallback.

The only kernel that matters for sweep throughput besides LAPACK itself is
the weighted accumulation of reduced density matrices from sector
eigenvectors.  The implementation is chosen once at import time; set
SPINQCP_PURE_PYTHON=1 to force the numpy path.
"""

import os

import numpy as np

try:
    from . import _kernels as _compiled
except ImportError:  # extension not built
    _compiled = None

USING_COMPILED = _compiled is not None and not os.environ.get("SPINQCP_PURE_PYTHON")


def _prepare(vectors, weights, keep_codes, env_codes):
    """Scale eigenvector columns by sqrt(weight) and sort rows by env code."""
    vw = vectors * np.sqrt(weights)[None, :]
    order = np.argsort(env_codes, kind="stable")
    return vw[order], keep_codes[order], env_codes[order]


def accumulate_reduced_numpy(vectors, weights, keep_codes, env_codes, dim_keep):
    """sum_n w_n Tr_env |v_n><v_n| restricted to the kept-site subspace.

    vectors: (n_states, n_vecs) eigenvector block over an arbitrary subset of
    the full basis; keep_codes/env_codes give, per basis state, the packed
    bit patterns of the kept and traced-out sites.  (keep, env) pairs are
    distinct by construction (they re-encode the basis index).
    """
    vw = vectors * np.sqrt(weights)[None, :]
    uenv, inv = np.unique(env_codes, return_inverse=True)
    z = np.zeros((dim_keep, len(uenv), vectors.shape[1]), dtype=vw.dtype)
    z[keep_codes, inv, :] = vw
    zf = z.reshape(dim_keep, -1)
    out = zf @ zf.conj().T
    return out.astype(complex, copy=False)


def accumulate_reduced_compiled(vectors, weights, keep_codes, env_codes, dim_keep):
    vw, kc, ec = _prepare(vectors, weights, keep_codes, env_codes)
    vw = np.ascontiguousarray(vw)
    kc = np.ascontiguousarray(kc, dtype=np.int64)
    ec = np.ascontiguousarray(ec, dtype=np.int64)
    out = np.zeros((dim_keep, dim_keep), dtype=complex)
    if vw.dtype == np.float64:
        _compiled.accumulate_real(vw, kc, ec, out)
    else:
        _compiled.accumulate_complex(np.ascontiguousarray(vw, dtype=complex), kc, ec, out)
    return out


if USING_COMPILED:
    accumulate_reduced = accumulate_reduced_compiled
else:
    accumulate_reduced = accumulate_reduced_numpy
