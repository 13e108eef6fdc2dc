"""Hot numerical kernels: numba-compiled with a pure-numpy fallback.

The environment variable ``POINTCTL_BACKEND`` selects the implementation
once, at import time:

* ``numba`` (default when numba imports cleanly) -- the loop kernels below
  are compiled with ``numba.njit(cache=True)``.
* ``numpy`` -- the same loops run as plain Python, and the sparse
  matrix-vector product switches to a vectorised numpy path.  This is the
  debugging/portability fallback; results agree with the compiled path up
  to floating point summation order.

Everything else in the package is vectorised numpy and identical across
backends.  ``benchmarks/backend_bench.py`` times the two paths side by side.
"""

import os

import numpy as np

_env = os.environ.get("POINTCTL_BACKEND", "auto").strip().lower()
if _env in ("", "auto"):
    try:
        import numba

        NUMBA_ENABLED = True
    except ImportError:  # pragma: no cover - numba is a hard dependency
        NUMBA_ENABLED = False
elif _env == "numba":
    import numba

    NUMBA_ENABLED = True
elif _env in ("numpy", "python"):
    NUMBA_ENABLED = False
else:  # pragma: no cover
    raise RuntimeError(
        f"POINTCTL_BACKEND={_env!r} not recognised (use 'numba' or 'numpy')"
    )


def backend_name():
    """Name of the active kernel backend, 'numba' or 'numpy'."""
    return "numba" if NUMBA_ENABLED else "numpy"


def _jit(fn):
    if NUMBA_ENABLED:
        return numba.njit(fn, cache=True)
    return fn


@_jit
def _csr_matvec_loop(row_offsets, col_indices, values, x, out):
    n = row_offsets.shape[0] - 1
    for i in range(n):
        acc = 0.0
        for k in range(row_offsets[i], row_offsets[i + 1]):
            acc += values[k] * x[col_indices[k]]
        out[i] = acc
    return out


def _csr_matvec_numpy(row_offsets, col_indices, values, x, out):
    # add.reduceat over the start offsets of the nonempty rows; consecutive
    # starts still bracket each nonempty row exactly because empty rows
    # contribute no entries in between.
    prod = values * x[col_indices]
    counts = np.diff(row_offsets)
    nonempty = counts > 0
    out[:] = 0.0
    if prod.size:
        out[nonempty] = np.add.reduceat(prod, row_offsets[:-1][nonempty])
    return out


if NUMBA_ENABLED:
    csr_matvec = _csr_matvec_loop
else:
    csr_matvec = _csr_matvec_numpy


@_jit
def ilu0_factor(row_offsets, col_indices, values, diag_index):
    """In-place ILU(0) factorisation of a CSR matrix.

    ``values`` is overwritten with the combined L (strictly lower, unit
    diagonal implied) and U factors on the original sparsity pattern.
    ``diag_index[i]`` must point at the diagonal entry of row i.  Returns
    the row of the first zero pivot, or -1 on success.
    """
    n = row_offsets.shape[0] - 1
    for i in range(n):
        for kk in range(row_offsets[i], diag_index[i]):
            k = col_indices[kk]
            piv = values[diag_index[k]]
            if piv == 0.0:
                return k
            lik = values[kk] / piv
            values[kk] = lik
            # eliminate within the existing pattern of row i only
            pk = diag_index[k] + 1
            pi = kk + 1
            endk = row_offsets[k + 1]
            endi = row_offsets[i + 1]
            while pk < endk and pi < endi:
                ck = col_indices[pk]
                ci = col_indices[pi]
                if ci < ck:
                    pi += 1
                elif ci == ck:
                    values[pi] -= lik * values[pk]
                    pi += 1
                    pk += 1
                else:
                    pk += 1
        if values[diag_index[i]] == 0.0:
            return i
    return -1


@_jit
def ilu0_solve(row_offsets, col_indices, values, diag_index, rhs, out):
    """Apply the ILU(0) preconditioner: solve L U out = rhs."""
    n = row_offsets.shape[0] - 1
    for i in range(n):
        acc = rhs[i]
        for kk in range(row_offsets[i], diag_index[i]):
            acc -= values[kk] * out[col_indices[kk]]
        out[i] = acc
    for i in range(n - 1, -1, -1):
        acc = out[i]
        for kk in range(diag_index[i] + 1, row_offsets[i + 1]):
            acc -= values[kk] * out[col_indices[kk]]
        out[i] = acc / values[diag_index[i]]
    return out


@_jit
def gauss_seidel_sweep(row_offsets, col_indices, values, rhs, out):
    """One forward Gauss-Seidel sweep: solve (D + L) out = rhs."""
    n = row_offsets.shape[0] - 1
    for i in range(n):
        acc = rhs[i]
        diag = 0.0
        for kk in range(row_offsets[i], row_offsets[i + 1]):
            j = col_indices[kk]
            if j < i:
                acc -= values[kk] * out[j]
            elif j == i:
                diag = values[kk]
        out[i] = acc / diag
    return out
