"""Tail inverse regression estimators and baselines.

The first-order tail process  C_n(u) = (1/k) sum_{i<=ceil(ku)} z_(i)  and its
second-order analogue  B_n(u) = (1/k) sum_{i<=ceil(ku)} (z_(i) z_(i)^T - I)
are cumulative sums over covariates ordered by descending target.  Both are
piecewise constant in u with breakpoints at j/k, so their squared integrals
over u in [0, 1] collapse to closed forms over prefix sums:

    M1 = (1/k^3) sum_{j<=k} S_j S_j^T,    S_j = sum_{i<=j} z_(i)
    M2 = (1/k^3) sum_{j<=k} T_j T_j^T,    T_j = sum_{i<=j} (z_(i) z_(i)^T - I)

computed incrementally, which costs O(n log n) for the sort plus O(k p^2)
(first order) or O(k p^3) (second order, matrix-product form).  Choosing
k = n recovers the classical cumulative slicing matrices (CUME / CUVE); both
identities are enforced here and cross-checked against brute-force double
sums in the tests.
"""

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .data import RankView, ceil_index, descending_order, standardize
from .errors import InvalidInputError
from .linalg import (
    EigenDecomposition,
    Projector,
    orthonormal_columns,
    projector_from_basis,
    sym_eigen,
    symmetrize,
)

METHODS = ("tirex1", "tirex2", "cume", "cuve", "pca", "svd_pca")

# k-free methods: cume/cuve pin k to n, the PCA variants ignore it entirely
_K_FORCED_TO_N = ("cume", "cuve")
_PCA_METHODS = ("pca", "svd_pca")

_BLOCK = 1024


def _order_indices(order, n):
    idx = order.order_desc if isinstance(order, RankView) else np.asarray(order)
    if idx.shape != (n,):
        raise InvalidInputError(f"order must be a permutation of {n} row indices")
    return idx


def _check_k(k, n):
    if not (1 <= k <= n):
        raise InvalidInputError(f"k must satisfy 1 <= k <= n={n}, got {k}")


def c_process(z, order, k, u):
    """First-order tail process value: (1/k) sum of the top ceil(k*u) rows of
    z ordered by descending target."""
    z = np.asarray(z, dtype=float)
    n = z.shape[0]
    _check_k(k, n)
    if not (0.0 <= u <= 1.0):
        raise InvalidInputError(f"u must lie in [0, 1], got {u}")
    m = min(ceil_index(k * u), k)
    if m == 0:
        return np.zeros(z.shape[1])
    idx = _order_indices(order, n)
    return z[idx[:m]].sum(axis=0) / k


def b_process(z, order, k, u):
    """Second-order tail process value with summand z z^T - I."""
    z = np.asarray(z, dtype=float)
    n, p = z.shape
    _check_k(k, n)
    if not (0.0 <= u <= 1.0):
        raise InvalidInputError(f"u must lie in [0, 1], got {u}")
    m = min(ceil_index(k * u), k)
    if m == 0:
        return np.zeros((p, p))
    idx = _order_indices(order, n)
    zm = z[idx[:m]]
    return symmetrize((zm.T @ zm - m * np.eye(p)) / k)


@dataclass(frozen=True)
class ProcessPoint:
    """Joint evaluation of the two tail processes at one u.

    Both components vanish at u = 0 and are piecewise constant in u with
    breakpoints at j/k (right-closed pieces).
    """

    u: float
    c: np.ndarray
    b: np.ndarray


def process_point(z, order, k, u):
    """Evaluate the first- and second-order tail processes at the same u."""
    return ProcessPoint(u=float(u), c=c_process(z, order, k, u), b=b_process(z, order, k, u))


def tirex1_matrix(z, order, k):
    """First-order candidate matrix (1/k^3) sum_j S_j S_j^T over prefix sums
    of target-ordered covariate rows.  Positive semi-definite, rank <= min(k, p)."""
    z = np.asarray(z, dtype=float)
    n = z.shape[0]
    _check_k(k, n)
    idx = _order_indices(order, n)
    prefixes = np.cumsum(z[idx[:k]], axis=0)
    return symmetrize(prefixes.T @ prefixes / float(k) ** 3)


def tirex2_matrix(z, order, k):
    """Second-order candidate matrix (1/k^3) sum_j T_j T_j^T with symmetric
    p x p accumulants T_j = sum_{i<=j} (z_(i) z_(i)^T - I).

    Runs in blocks so memory stays at O(block * p^2) for large k.
    """
    z = np.asarray(z, dtype=float)
    n, p = z.shape
    _check_k(k, n)
    idx = _order_indices(order, n)
    zk = z[idx[:k]]
    eye = np.eye(p)
    total = np.zeros((p, p))
    running = np.zeros((p, p))
    for start in range(0, k, _BLOCK):
        zb = zk[start : start + _BLOCK]
        grads = np.einsum("ji,jl->jil", zb, zb) - eye
        t_block = running + np.cumsum(grads, axis=0)
        total += np.einsum("jab,jcb->ac", t_block, t_block)
        running = t_block[-1]
    return symmetrize(total / float(k) ** 3)


def cume_matrix_oracle(z, y):
    """Brute-force cumulative-mean matrix for the negated target.

    (1/n) sum_a m_a m_a^T with m_a = (1/n) sum_i z_i 1{-y_i <= -y_a}.  This is
    the k = n limit of the first-order candidate matrix; kept as an
    independent O(n^2) reference implementation.
    """
    z = np.asarray(z, dtype=float)
    yt = -np.asarray(y, dtype=float)
    n = z.shape[0]
    ind = (yt[None, :] <= yt[:, None]).astype(float)
    m = ind @ z / n
    return symmetrize(m.T @ m / n)


def cuve_matrix_oracle(z, y):
    """Brute-force second-order analogue of cume_matrix_oracle, with summand
    z_i z_i^T - I; the k = n reference for the second-order candidate."""
    z = np.asarray(z, dtype=float)
    yt = -np.asarray(y, dtype=float)
    n, p = z.shape
    grads = np.einsum("ji,jl->jil", z, z) - np.eye(p)
    ind = (yt[None, :] <= yt[:, None]).astype(float)
    w = np.einsum("ai,ijk->ajk", ind, grads) / n
    return symmetrize(np.einsum("ajk,alk->jl", w, w) / n)


def pca_basis(ds, d, centered=True):
    """Top-d eigenvectors of the raw covariate covariance (centered) or raw
    second-moment matrix (non-centered), divide-by-n convention."""
    if not (1 <= d <= ds.p):
        raise InvalidInputError(f"d must satisfy 1 <= d <= p={ds.p}, got {d}")
    x = ds.x - ds.x.mean(axis=0) if centered else ds.x
    moment = symmetrize(x.T @ x / ds.n)
    eig = sym_eigen(moment)
    return eig.eigenvectors[:, :d].copy()


@dataclass(frozen=True)
class SdrFit:
    """Fitted dimension-reduction subspace.

    ``basis_whitened`` holds the top-d eigenvectors of the candidate matrix in
    whitened coordinates; ``basis_raw`` maps them back through the whitener
    and re-orthonormalizes.  For the PCA variants no whitening happens and the
    two coordinate systems coincide.  ``mean``/``whitener`` are retained so
    held-out points can be projected consistently with the training fit.
    """

    method: str
    k: Optional[int]
    d: int
    candidate_matrix: np.ndarray
    eigen: EigenDecomposition
    basis_whitened: np.ndarray
    projector_whitened: Projector
    basis_raw: np.ndarray
    mean: np.ndarray
    whitener: Optional[np.ndarray]

    def transform(self, x):
        """Reduce covariate rows to d coordinates in the fit's frame."""
        x = np.asarray(x, dtype=float)
        if self.whitener is not None:
            return (x - self.mean) @ self.whitener @ self.basis_whitened
        return (x - self.mean) @ self.basis_raw

    def to_json_dict(self):
        return {
            "method": self.method,
            "k": self.k,
            "d": self.d,
            "eigenvalues": [float(v) for v in self.eigen.eigenvalues],
        }


def _validate_method(method):
    if method not in METHODS:
        raise InvalidInputError(
            f"unknown method {method!r}; expected one of {', '.join(METHODS)}"
        )


def _default_d(method, d):
    if d is not None:
        return int(d)
    if method in ("tirex1", "cume"):
        return 1  # the first-order limit is rank one
    raise InvalidInputError(f"method {method!r} requires an explicit d")


def fit(ds, method, k=None, d=None, eig_floor=None, ridge=0.0):
    """Estimate a dimension-reduction subspace on a dataset.

    tirex1/tirex2 need 1 <= k <= n (the number of top order statistics);
    cume/cuve force k = n; the PCA variants ignore k.  d defaults to 1 for
    the first-order methods and must be given otherwise.
    """
    _validate_method(method)
    d = _default_d(method, d)
    if not (1 <= d <= ds.p):
        raise InvalidInputError(f"d must satisfy 1 <= d <= p={ds.p}, got {d}")

    if method in _PCA_METHODS:
        centered = method == "pca"
        x = ds.x - ds.x.mean(axis=0) if centered else ds.x
        candidate = symmetrize(x.T @ x / ds.n)
        eig = sym_eigen(candidate)
        basis = eig.eigenvectors[:, :d].copy()
        return SdrFit(
            method=method,
            k=None,
            d=d,
            candidate_matrix=candidate,
            eigen=eig,
            basis_whitened=basis,
            projector_whitened=projector_from_basis(basis),
            basis_raw=basis,
            mean=ds.x.mean(axis=0) if centered else np.zeros(ds.p),
            whitener=None,
        )

    if method in _K_FORCED_TO_N:
        k = ds.n
    if k is None:
        raise InvalidInputError(f"method {method!r} requires k (no default)")
    k = int(k)
    _check_k(k, ds.n)

    std = standardize(ds, eig_floor=eig_floor, ridge=ridge)
    order = descending_order(ds.y)
    return _fit_standardized(std, order, method, k, d)


def _fit_standardized(std, order, method, k, d):
    """Fit from pre-standardized covariates (shared by fit() and the sweep
    harness, which reuses one standardization across many k)."""
    if method in ("tirex1", "cume"):
        candidate = tirex1_matrix(std.z, order, k)
    else:
        candidate = tirex2_matrix(std.z, order, k)
    eig = sym_eigen(candidate)
    basis_w = eig.eigenvectors[:, :d].copy()
    return SdrFit(
        method=method,
        k=k,
        d=d,
        candidate_matrix=candidate,
        eigen=eig,
        basis_whitened=basis_w,
        projector_whitened=projector_from_basis(basis_w),
        basis_raw=orthonormal_columns(std.whitener @ basis_w),
        mean=std.mean,
        whitener=std.whitener,
    )
