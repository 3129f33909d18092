"""Dense symmetric linear algebra: eigendecomposition, inverse square root,
orthogonal projectors and Frobenius distances.

All routines are deterministic: the eigensolver is a cyclic Jacobi sweep
(adequate and exact-enough for the moderate dimensions used here, p <~ 150),
eigenvector signs follow a fixed rule and eigenvalue ties are broken by a
lexicographic rule on the sign-normalized eigenvectors.  Everything is pure
and reentrant; no global state.
"""

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConvergenceError, InvalidInputError, RankDeficiencyError

# Jacobi convergence: off-diagonal Frobenius norm relative to the input norm.
# <= (not <) so the zero matrix converges immediately.
_JACOBI_RTOL = 1e-12
_JACOBI_MAX_SWEEPS = 100

# First eigenvector entry with magnitude above this is forced positive.
_SIGN_RULE_TOL = 1e-12


def symmetrize(m):
    """Return the symmetric average (M + M^T)/2 as a new float array.

    Averaging makes entries [i, j] and [j, i] bitwise equal, which the rest
    of the module relies on.
    """
    m = np.asarray(m, dtype=float)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise InvalidInputError(f"expected a square matrix, got shape {m.shape}")
    return 0.5 * (m + m.T)


@dataclass(frozen=True)
class EigenDecomposition:
    """Eigenvalues sorted descending with matching orthonormal eigenvectors.

    ``eigenvectors[:, i]`` belongs to ``eigenvalues[i]``; each column has its
    first entry of magnitude > 1e-12 positive (sign determinism).
    """

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray


@dataclass(frozen=True)
class Projector:
    """Orthogonal projection matrix together with its rank."""

    matrix: np.ndarray
    rank: int

    @property
    def dim(self):
        return self.matrix.shape[0]


def _check_finite(m, what):
    if not np.all(np.isfinite(m)):
        raise InvalidInputError(f"{what} contains non-finite entries")


def _jacobi(a):
    """Cyclic Jacobi diagonalization of a symmetric matrix (in place).

    Returns (diagonal values, accumulated rotation matrix). Raises
    ConvergenceError after the sweep cap, which for symmetric input of this
    size never triggers in practice.
    """
    dim = a.shape[0]
    v = np.eye(dim)
    if dim == 1:
        return np.array([a[0, 0]]), v
    tol = _JACOBI_RTOL * np.linalg.norm(a)
    # entries this small cannot push the off-diagonal norm above tol
    skip = tol / dim
    idx = np.arange(dim)
    for _ in range(_JACOBI_MAX_SWEEPS):
        # off-diagonal Frobenius norm, summed directly (the subtraction
        # sum(a^2) - sum(diag^2) cancels catastrophically near convergence)
        offdiag = a - np.diag(np.diag(a))
        off = math.sqrt(np.sum(offdiag * offdiag))
        if off <= tol:
            return np.diag(a).copy(), v
        for p in range(dim - 1):
            for q in range(p + 1, dim):
                apq = a[p, q]
                if abs(apq) <= skip:
                    continue
                # Rutishauser's stable rotation angle
                tau = (a[q, q] - a[p, p]) / (2.0 * apq)
                if tau >= 0.0:
                    t = 1.0 / (tau + math.sqrt(1.0 + tau * tau))
                else:
                    t = -1.0 / (-tau + math.sqrt(1.0 + tau * tau))
                c = 1.0 / math.sqrt(1.0 + t * t)
                s = t * c
                app, aqq = a[p, p], a[q, q]
                others = idx[(idx != p) & (idx != q)]
                aop, aoq = a[others, p], a[others, q]
                a[others, p] = a[p, others] = c * aop - s * aoq
                a[others, q] = a[q, others] = s * aop + c * aoq
                a[p, p] = c * c * app - 2.0 * s * c * apq + s * s * aqq
                a[q, q] = s * s * app + 2.0 * s * c * apq + c * c * aqq
                a[p, q] = a[q, p] = 0.0
                vp, vq = v[:, p].copy(), v[:, q].copy()
                v[:, p] = c * vp - s * vq
                v[:, q] = s * vp + c * vq
    raise ConvergenceError(
        f"Jacobi eigensolver did not converge within {_JACOBI_MAX_SWEEPS} sweeps"
    )


def _apply_sign_rule(vecs):
    """Flip eigenvector columns so the first entry above 1e-12 is positive."""
    vecs = vecs.copy()
    for j in range(vecs.shape[1]):
        col = vecs[:, j]
        big = np.nonzero(np.abs(col) > _SIGN_RULE_TOL)[0]
        if big.size and col[big[0]] < 0.0:
            vecs[:, j] = -col
    return vecs


def sym_eigen(m):
    """Eigendecomposition of a symmetric matrix, deterministic ordering.

    The input is symmetrized by averaging first.  Eigenvalues come out
    descending; exact ties are ordered by the lexicographically larger
    sign-normalized eigenvector first, so repeated runs and permuted inputs
    give reproducible output.
    """
    m = symmetrize(m)
    _check_finite(m, "matrix")
    vals, vecs = _jacobi(m.copy())
    vecs = _apply_sign_rule(vecs)
    order = sorted(range(len(vals)), key=lambda j: (-vals[j], tuple(-vecs[:, j])))
    return EigenDecomposition(
        eigenvalues=vals[order].copy(),
        eigenvectors=vecs[:, order].copy(),
    )


def default_eig_floor(eigenvalues):
    """Scale-free rank floor: 1e-10 times the largest eigenvalue."""
    return 1e-10 * float(np.max(eigenvalues))


def inv_sqrt(m, eig_floor=None, ridge=0.0):
    """Inverse square root V diag(lambda^{-1/2}) V^T of a symmetric matrix.

    Every eigenvalue must be >= ``eig_floor`` (default: 1e-10 times the
    largest); otherwise a RankDeficiencyError naming the offending eigenvalue
    is raised -- there is no silent pseudo-inverse.  ``ridge`` > 0 adds
    ridge * I before decomposition as an explicit opt-in regularization.
    """
    m = symmetrize(m)
    _check_finite(m, "matrix")
    if ridge:
        if ridge < 0:
            raise InvalidInputError("ridge must be >= 0")
        m = m + ridge * np.eye(m.shape[0])
    eig = sym_eigen(m)
    floor = default_eig_floor(eig.eigenvalues) if eig_floor is None else float(eig_floor)
    if floor <= 0.0:
        raise RankDeficiencyError(
            f"matrix has no positive spectral scale (largest eigenvalue "
            f"{eig.eigenvalues[0]:.6g})",
            eigenvalue=float(eig.eigenvalues[-1]),
        )
    lo = float(eig.eigenvalues[-1])
    if lo < floor:
        raise RankDeficiencyError(
            f"rank-deficient matrix: eigenvalue {lo:.6g} is below the floor "
            f"{floor:.6g}; pass a ridge term to regularize explicitly",
            eigenvalue=lo,
        )
    v = eig.eigenvectors
    return symmetrize((v / np.sqrt(eig.eigenvalues)) @ v.T)


def projector_from_basis(basis):
    """Orthogonal projector B B^T onto the span of orthonormal columns."""
    basis = np.asarray(basis, dtype=float)
    if basis.ndim == 1:
        basis = basis[:, None]
    _check_finite(basis, "basis")
    gram = basis.T @ basis
    if np.max(np.abs(gram - np.eye(basis.shape[1]))) > 1e-8:
        raise InvalidInputError("basis columns are not orthonormal to 1e-8")
    return Projector(matrix=symmetrize(basis @ basis.T), rank=basis.shape[1])


def _as_matrix(p):
    return p.matrix if isinstance(p, Projector) else np.asarray(p, dtype=float)


def frobenius_dist_sq(p1, p2):
    """Squared Frobenius distance between two projectors (or plain matrices)."""
    m1, m2 = _as_matrix(p1), _as_matrix(p2)
    if m1.shape != m2.shape:
        raise InvalidInputError(f"dimension mismatch: {m1.shape} vs {m2.shape}")
    d = m1 - m2
    return float(np.sum(d * d))


def orthonormal_columns(b):
    """Orthonormalize columns (thin QR) with the deterministic sign rule.

    Spans the same subspace as the input; requires full column rank.
    """
    b = np.asarray(b, dtype=float)
    if b.ndim == 1:
        b = b[:, None]
    q, r = np.linalg.qr(b)
    if np.min(np.abs(np.diag(r))) <= 1e-12 * max(1.0, float(np.abs(r).max())):
        raise InvalidInputError("columns are numerically dependent")
    # QR returns columns up to sign; re-apply the sign rule for determinism
    return _apply_sign_rule(q)
