"""Dense order-3 image tensors, order-6 operators and the Einstein product.

Images are plain ``float64`` numpy arrays of shape ``(n1, n2, n3)`` (rows,
columns, channels). Operators are arrays of shape ``(n1, n2, n3, n1, n2, n3)``
indexed ``T[i1, i2, i3, j1, j2, j3]``.

The flat layout is C order with the channel index fastest: the 0-based
multi-index ``(i1, i2, i3)`` maps to ``(i1 * n2 + i2) * n3 + i3``. Every module
in the package relies on this single convention.
"""

import struct
import warnings

import numpy as np
import scipy.linalg

__all__ = [
    "DEFAULT_DENSE_CAP",
    "DimensionError",
    "DenseCapError",
    "SingularOperatorError",
    "as_image",
    "as_operator",
    "identity_operator",
    "einstein_product",
    "inner",
    "fro_norm",
    "unfold_operator",
    "unfold_tensor",
    "refold",
    "direct_solve",
    "save_eten",
    "load_eten",
    "dumps_eten",
    "loads_eten",
]

# Upper bound on n1*n2*n3 for anything that materializes an order-6 tensor.
DEFAULT_DENSE_CAP = 4096

ETEN_MAGIC = b"ETEN"
ETEN_VERSION = 1


class DimensionError(ValueError):
    """Raised when tensor dimensions violate an operation's contract."""


class DenseCapError(ValueError):
    """Raised when a dense order-6 tensor would exceed the configured cap."""


class SingularOperatorError(np.linalg.LinAlgError):
    """Raised when the unfolded operator cannot be factorized reliably."""

    def __init__(self, message, condition=None):
        super().__init__(message)
        self.condition = condition


def as_image(x, name="tensor"):
    """Validate and return ``x`` as a finite float64 order-3 array."""
    arr = np.asarray(x, dtype=np.float64)
    if arr.ndim != 3:
        raise DimensionError(f"{name} must be order 3, got shape {arr.shape}")
    if min(arr.shape) < 1:
        raise DimensionError(f"{name} has an empty dimension: {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite values")
    return arr


def as_operator(t, name="operator"):
    """Validate and return ``t`` as a square order-6 float64 array."""
    arr = np.asarray(t, dtype=np.float64)
    if arr.ndim != 6:
        raise DimensionError(f"{name} must be order 6, got shape {arr.shape}")
    if arr.shape[:3] != arr.shape[3:]:
        raise DimensionError(
            f"{name} is not square in the Einstein sense: {arr.shape[:3]} vs {arr.shape[3:]}"
        )
    return arr


def _check_cap(dims, cap):
    size = int(np.prod(dims))
    if size > cap:
        raise DenseCapError(
            f"dense order-6 tensor over dims {tuple(dims)} has {size} unknowns, "
            f"cap is {cap}; use the convolution form instead"
        )


def identity_operator(dims, cap=DEFAULT_DENSE_CAP):
    """Order-6 identity: ``T[i, j] = 1`` iff the two multi-indices agree."""
    dims = tuple(int(d) for d in dims)
    _check_cap(dims, cap)
    n = int(np.prod(dims))
    return np.eye(n).reshape(dims + dims)


def einstein_product(T, X):
    """Contract the last three indices of ``T`` against all indices of ``X``.

    ``Y[i1,i2,i3] = sum_{j1,j2,j3} T[i1,i2,i3,j1,j2,j3] * X[j1,j2,j3]``
    """
    T = as_operator(T)
    X = as_image(X, "X")
    if T.shape[3:] != X.shape:
        raise DimensionError(f"operator input dims {T.shape[3:]} != tensor dims {X.shape}")
    return np.tensordot(T, X, axes=3)


def inner(A, B):
    """Sum of elementwise products of two same-shape tensors."""
    A = np.asarray(A, dtype=np.float64)
    B = np.asarray(B, dtype=np.float64)
    if A.shape != B.shape:
        raise DimensionError(f"inner product of mismatched dims {A.shape} and {B.shape}")
    return float(np.dot(A.ravel(), B.ravel()))


def fro_norm(A):
    """Frobenius norm, ``sqrt(inner(A, A))``."""
    A = np.asarray(A, dtype=np.float64)
    return float(np.sqrt(np.dot(A.ravel(), A.ravel())))


def unfold_operator(T):
    """The ``N x N`` matrix of ``T`` under the flat layout (``N = n1*n2*n3``)."""
    T = as_operator(T)
    n = int(np.prod(T.shape[:3]))
    return T.reshape(n, n)


def unfold_tensor(X):
    return as_image(X, "X").reshape(-1)


def refold(v, dims):
    v = np.asarray(v, dtype=np.float64)
    dims = tuple(int(d) for d in dims)
    if v.ndim != 1 or v.size != int(np.prod(dims)):
        raise DimensionError(f"cannot refold vector of shape {v.shape} into {dims}")
    return v.reshape(dims)


def direct_solve(T, G, cap=DEFAULT_DENSE_CAP, rtol=1e-10):
    """Solve ``T *3 F = G`` exactly through the unfolded matrix.

    Used for the coarsest level of a cascade and as the oracle for the
    iterative smoothers.

    Raises
    ------
    DenseCapError
        If ``n1*n2*n3`` exceeds ``cap``.
    SingularOperatorError
        If the LU factorization fails or the solution misses ``rtol``;
        ``condition`` carries the 2-norm condition number of the matrix.
    """
    T = as_operator(T)
    G = as_image(G, "G")
    if T.shape[3:] != G.shape:
        raise DimensionError(f"operator dims {T.shape[3:]} != right-hand side dims {G.shape}")
    _check_cap(G.shape, cap)

    A = unfold_operator(T)
    b = unfold_tensor(G)
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("error", scipy.linalg.LinAlgWarning)
            lu, piv = scipy.linalg.lu_factor(A, check_finite=False)
        x = scipy.linalg.lu_solve((lu, piv), b, check_finite=False)
    except (np.linalg.LinAlgError, scipy.linalg.LinAlgWarning, ValueError) as exc:
        raise SingularOperatorError(
            f"factorization failed: {exc}", condition=float(np.linalg.cond(A))
        ) from exc

    bnorm = np.linalg.norm(b)
    if np.all(np.isfinite(x)):
        # One step of iterative refinement keeps ill-conditioned coarse systems
        # inside the residual contract.
        r = b - A @ x
        x = x + scipy.linalg.lu_solve((lu, piv), r, check_finite=False)
        res = np.linalg.norm(b - A @ x)
        if res <= rtol * max(bnorm, np.finfo(float).tiny):
            return refold(x, G.shape)
    cond = float(np.linalg.cond(A))
    raise SingularOperatorError(
        f"operator is numerically singular (condition number {cond:.3e})", condition=cond
    )


# -- ETEN raw tensor format ------------------------------------------------
#
# magic "ETEN", u32 LE version, u32 LE order, order x u64 LE dims, then
# float64 LE values in C order.


def dumps_eten(x):
    arr = np.asarray(x, dtype=np.float64)
    if arr.ndim not in (3, 6):
        raise DimensionError(f"ETEN stores order 3 or 6 tensors, got order {arr.ndim}")
    header = ETEN_MAGIC + struct.pack("<II", ETEN_VERSION, arr.ndim)
    header += struct.pack(f"<{arr.ndim}Q", *arr.shape)
    return header + np.ascontiguousarray(arr, dtype="<f8").tobytes()


def loads_eten(data):
    data = bytes(data)
    if data[:4] != ETEN_MAGIC:
        raise ValueError("not an ETEN stream (bad magic)")
    version, order = struct.unpack_from("<II", data, 4)
    if version != ETEN_VERSION:
        raise ValueError(f"unsupported ETEN version {version}")
    if order not in (3, 6):
        raise ValueError(f"unsupported ETEN order {order}")
    dims = struct.unpack_from(f"<{order}Q", data, 12)
    offset = 12 + 8 * order
    count = int(np.prod(dims))
    if len(data) - offset != 8 * count:
        raise ValueError(
            f"ETEN payload has {len(data) - offset} bytes, expected {8 * count} for dims {dims}"
        )
    values = np.frombuffer(data, dtype="<f8", count=count, offset=offset)
    return values.astype(np.float64).reshape(dims)


def save_eten(path, x):
    with open(path, "wb") as fh:
        fh.write(dumps_eten(x))


def load_eten(path):
    with open(path, "rb") as fh:
        return loads_eten(fh.read())
