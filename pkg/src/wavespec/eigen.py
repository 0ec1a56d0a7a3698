"""Dense symmetric eigensolver and eigenvalue inequality checks.

The solver reduces a real symmetric matrix to tridiagonal form with
Householder reflections and diagonalizes the tridiagonal matrix with the
implicit-shift QL iteration (Wilkinson-type shift).  Eigenvalues are returned
in ascending order, ``lambda_1 <= ... <= lambda_m``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import DomainError, SolverError, ValidationError

MAX_SWEEPS = 50
_EPS2 = np.finfo(float).eps ** 2


class SymmetricMatrix:
    """Real symmetric matrix kept as its packed upper triangle (row-major)."""

    __slots__ = ("order", "packed")

    def __init__(self, order: int, packed):
        packed = np.asarray(packed, dtype=float)
        if packed.shape != (order * (order + 1) // 2,):
            raise ValidationError(
                f"packed storage of order {order} needs {order * (order + 1) // 2} entries, "
                f"got shape {packed.shape}"
            )
        self.order = int(order)
        self.packed = packed
        self.packed.setflags(write=False)

    @classmethod
    def from_dense(cls, a, atol: Optional[float] = None) -> "SymmetricMatrix":
        """Pack the upper triangle of ``a``.

        When ``atol`` is given, ``a`` must be symmetric to that tolerance.
        """
        a = np.asarray(a, dtype=float)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise ValidationError(f"expected a square matrix, got shape {a.shape}")
        if atol is not None and not np.allclose(a, a.T, rtol=0.0, atol=atol):
            raise ValidationError("matrix is not symmetric")
        iu = np.triu_indices(a.shape[0])
        return cls(a.shape[0], a[iu])

    def to_dense(self) -> np.ndarray:
        m = self.order
        out = np.zeros((m, m))
        iu = np.triu_indices(m)
        out[iu] = self.packed
        out.T[iu] = self.packed
        return out

    def __repr__(self):
        return f"SymmetricMatrix(order={self.order})"


@dataclass(frozen=True)
class EigenDecomposition:
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray

    def reconstruct(self) -> np.ndarray:
        v = self.eigenvectors
        return (v * self.eigenvalues) @ v.T


def _as_dense(a) -> np.ndarray:
    if isinstance(a, SymmetricMatrix):
        dense = a.to_dense()
    else:
        dense = SymmetricMatrix.from_dense(a).to_dense()
    if not np.all(np.isfinite(dense)):
        raise DomainError("matrix has non-finite entries")
    return dense


_SAFE_EXP = 400


def _safe_scale(dense: np.ndarray):
    """Power-of-two rescaling into a range where QL cannot under/overflow."""
    top = float(np.max(np.abs(dense))) if dense.size else 0.0
    if top == 0.0:
        return dense, 0
    exp = math.frexp(top)[1]
    if -_SAFE_EXP <= exp <= _SAFE_EXP:
        return dense, 0
    return np.ldexp(dense, -exp), exp


def tridiagonalize(a: np.ndarray, want_q: bool = True):
    """Householder reduction ``a = Q T Q^T``.

    Returns the diagonal ``d``, the sub-diagonal ``e`` (length ``m``, last
    entry 0) and ``Q`` (``None`` unless requested).
    """
    a = np.array(a, dtype=float)
    m = a.shape[0]
    q = np.eye(m) if want_q else None
    for k in range(m - 2):
        x = a[k + 1:, k]
        if not np.any(x[1:]):
            continue
        # power-of-two scaling keeps v @ v clear of underflow, exactly
        shift = math.frexp(float(np.max(np.abs(x))))[1]
        xs = np.ldexp(x, -shift)
        alpha = math.copysign(np.linalg.norm(xs), xs[0])
        v = xs.copy()
        v[0] += alpha
        alpha = math.ldexp(alpha, shift)
        beta = 2.0 / (v @ v)
        sub = a[k + 1:, k + 1:]
        p = beta * (sub @ v)
        w = p - (0.5 * beta * (p @ v)) * v
        sub -= np.outer(v, w) + np.outer(w, v)
        a[k + 2:, k] = 0.0
        a[k, k + 2:] = 0.0
        a[k + 1, k] = a[k, k + 1] = -alpha
        if want_q:
            qs = q[:, k + 1:]
            qs -= beta * np.outer(qs @ v, v)
    d = np.diag(a).copy()
    e = np.zeros(m)
    if m > 1:
        e[:-1] = np.diag(a, -1)
    return d, e, q


def _ql_implicit(d, e, zt=None):
    """Implicit-shift QL on a symmetric tridiagonal matrix, in place.

    ``d`` and ``e`` are Python lists; ``zt`` holds the accumulated transform
    with one eigenvector per row.
    """
    m = len(d)
    # couplings below eps^2 ||T|| are dropped even when the local diagonal is
    # tinier still; otherwise the chase underflows and the shift never lands
    floor = _EPS2 * (max(map(abs, d), default=0.0) + max(map(abs, e), default=0.0))
    for l in range(m):
        sweeps = 0
        while True:
            mm = l
            while mm < m - 1:
                dd = abs(d[mm]) + abs(d[mm + 1])
                if abs(e[mm]) + dd == dd or abs(e[mm]) <= floor:
                    break
                mm += 1
            if mm == l:
                break
            sweeps += 1
            if sweeps > MAX_SWEEPS:
                raise SolverError(
                    f"QL iteration did not converge for eigenvalue {l} after {MAX_SWEEPS} sweeps "
                    f"(|diag| max {max(abs(x) for x in d):.3e}, off-diagonal {e[l]:.3e})"
                )
            g = (d[l + 1] - d[l]) / (2.0 * e[l])
            r = math.hypot(g, 1.0)
            g = d[mm] - d[l] + e[l] / (g + math.copysign(r, g))
            s = c = 1.0
            p = 0.0
            i = mm - 1
            underflow = False
            while i >= l:
                f = s * e[i]
                b = c * e[i]
                r = math.hypot(f, g)
                e[i + 1] = r
                if r == 0.0:
                    d[i + 1] -= p
                    e[mm] = 0.0
                    underflow = True
                    break
                s = f / r
                c = g / r
                g = d[i + 1] - p
                r = (d[i] - g) * s + 2.0 * c * b
                p = s * r
                d[i + 1] = g + p
                g = c * r - b
                if zt is not None:
                    f_row = zt[i + 1].copy()
                    zt[i + 1] = s * zt[i] + c * f_row
                    zt[i] = c * zt[i] - s * f_row
                i -= 1
            if underflow:
                continue
            d[l] -= p
            e[l] = g
            e[mm] = 0.0


def eigh(a) -> EigenDecomposition:
    """Eigenvalues (ascending) and orthonormal eigenvectors of a symmetric matrix.

    ``a`` is a :class:`SymmetricMatrix` or a square array whose upper
    triangle is used.
    """
    dense, exp = _safe_scale(_as_dense(a))
    d, e, q = tridiagonalize(dense, want_q=True)
    d, e = d.tolist(), e.tolist()
    zt = np.ascontiguousarray(q.T)
    _ql_implicit(d, e, zt)
    order = np.argsort(d, kind="stable")
    return EigenDecomposition(np.ldexp(np.asarray(d)[order], exp), zt[order].T.copy())


def eigvalsh(a) -> np.ndarray:
    """Ascending eigenvalues only; skips eigenvector accumulation."""
    dense, exp = _safe_scale(_as_dense(a))
    d, e, _ = tridiagonalize(dense, want_q=False)
    d, e = d.tolist(), e.tolist()
    _ql_implicit(d, e)
    return np.ldexp(np.sort(np.asarray(d)), exp)


def singular_values(m) -> np.ndarray:
    """Ascending singular values of ``m``.

    Taken from the eigenvalues ``+-sigma`` of ``[[0, m], [m^T, 0]]``, which keeps
    absolute error near ``eps * ||m||``.  A Gram matrix would square the
    condition number and lose the small values.
    """
    m = np.asarray(m, dtype=float)
    if m.ndim != 2 or min(m.shape) < 1:
        raise DomainError(f"expected a non-empty 2-D matrix, got shape {m.shape}")
    rows, cols = m.shape
    k = min(rows, cols)
    if not np.any(m - np.eye(rows, cols) * m):
        return np.sort(np.abs(np.diagonal(m)))
    aug = np.zeros((rows + cols, rows + cols))
    aug[:rows, rows:] = m
    aug[rows:, :rows] = m.T
    lam = eigvalsh(aug)[-k:]
    return np.clip(lam, 0.0, None)


def psd_sqrt(a) -> np.ndarray:
    """Symmetric square root of a positive semidefinite matrix."""
    dec = eigh(a)
    root = np.sqrt(np.clip(dec.eigenvalues, 0.0, None))
    v = dec.eigenvectors
    return (v * root) @ v.T


@dataclass(frozen=True)
class WeylReport:
    """Slacks ``rhs - lhs`` of each inequality, per eigenvalue rank.

    Negative entries are violations.  ``cyclic`` is ``None`` unless both
    matrices are positive semidefinite, in which case it holds
    ``-|lambda_l(AB) - lambda_l(BA)|``.
    """

    sum_lower: np.ndarray
    sum_upper: np.ndarray
    perturbation: float
    product_lower: np.ndarray
    product_upper: np.ndarray
    singular_sum: np.ndarray
    cyclic: Optional[np.ndarray]

    @property
    def min_slack(self) -> float:
        parts = [self.sum_lower, self.sum_upper, [self.perturbation],
                 self.product_lower, self.product_upper, self.singular_sum]
        if self.cyclic is not None:
            parts.append(self.cyclic)
        return float(min(np.min(p) for p in parts))


def _op_norm(m) -> float:
    return float(singular_values(m)[-1])


def check_weyl(a, b, psd_tol: float = 1e-12) -> WeylReport:
    """Evaluate Weyl's sum/product inequalities and the cyclic property.

    Violations are reported in the returned slacks, never raised.
    """
    a = _as_dense(a)
    b = _as_dense(b)
    if a.shape != b.shape:
        raise ValidationError(f"orders differ: {a.shape[0]} vs {b.shape[0]}")
    la, lb, lab = eigvalsh(a), eigvalsh(b), eigvalsh(a + b)
    sum_lower = lab - (la + lb[0])
    sum_upper = (la + lb[-1]) - lab
    perturbation = _op_norm(a - b) - float(np.max(np.abs(la - lb)))

    sa, sb = singular_values(a), singular_values(b)
    sab = singular_values(a @ b)
    product_lower = sab - sa * sb[0]
    product_upper = sa * sb[-1] - sab
    singular_sum = (sa + sb[-1]) - singular_values(a + b)

    cyclic = None
    if la[0] >= -psd_tol and lb[0] >= -psd_tol:
        ra, rb = psd_sqrt(a), psd_sqrt(b)
        # lambda(AB) = lambda(A^1/2 B A^1/2), lambda(BA) = lambda(B^1/2 A B^1/2)
        cyclic = -np.abs(eigvalsh(ra @ b @ ra) - eigvalsh(rb @ a @ rb))
    return WeylReport(sum_lower, sum_upper, perturbation, product_lower,
                      product_upper, singular_sum, cyclic)
