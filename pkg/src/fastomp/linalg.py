"""Dense kernels with scalar-operation (flop) accounting.

Every kernel does its arithmetic through numpy/LAPACK and charges the
counter with the number of scalar multiplies, adds/subtracts and divides the
textbook loop would perform.  Comparisons and copies are free.
"""

from collections import defaultdict
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import solve_triangular

from .errors import DimensionError, RankDeficiencyError, SingularSystemError

#: Relative threshold separating rank collapse from roundoff.
EPS_RANK = 1e-10


@dataclass
class FlopCounter:
    """Counts scalar operations, in total and per named kernel."""

    mults: int = 0
    adds: int = 0
    divs: int = 0
    by_kernel: dict = field(default_factory=lambda: defaultdict(int))
    calls: dict = field(default_factory=lambda: defaultdict(int))

    def add(self, kernel="misc", mults=0, adds=0, divs=0):
        if mults < 0 or adds < 0 or divs < 0:
            raise ValueError("flop counts cannot be negative")
        self.mults += mults
        self.adds += adds
        self.divs += divs
        self.by_kernel[kernel] += mults + adds + divs
        self.calls[kernel] += 1

    def total(self):
        return self.mults + self.adds + self.divs

    def reset(self):
        self.mults = self.adds = self.divs = 0
        self.by_kernel.clear()
        self.calls.clear()

    def snapshot(self):
        """Copy of the per-kernel totals (for computing deltas)."""
        return dict(self.by_kernel)


def _charge(ctr, kernel, mults=0, adds=0, divs=0):
    if ctr is not None:
        ctr.add(kernel, mults=mults, adds=adds, divs=divs)


def as_vector(v, name="vector"):
    v = np.asarray(v, dtype=float)
    if v.ndim != 1:
        raise DimensionError(f"{name} must be one-dimensional, got shape {v.shape}")
    if not np.all(np.isfinite(v)):
        raise ValueError(f"{name} has non-finite entries")
    return v


def as_matrix(a, name="matrix"):
    a = np.asarray(a, dtype=float)
    if a.ndim == 1:
        a = a[:, None]
    if a.ndim != 2:
        raise DimensionError(f"{name} must be two-dimensional, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValueError(f"{name} has non-finite entries")
    return a


def dot(u, v, ctr=None, kernel="dot"):
    """Inner product; charges ``n`` mults and ``n - 1`` adds."""
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    if u.shape != v.shape or u.ndim != 1:
        raise DimensionError(f"length mismatch: {u.shape} vs {v.shape}")
    n = u.shape[0]
    if n == 0:
        raise DimensionError("dot of empty vectors")
    _charge(ctr, kernel, mults=n, adds=n - 1)
    return float(u @ v)


def matvec_t(A, v, ctr=None, kernel="matvec"):
    """``A.T @ v`` charged as ``A.shape[1]`` inner products."""
    n, m = A.shape
    if v.shape[0] != n:
        raise DimensionError(f"length mismatch: {n} rows vs vector of {v.shape[0]}")
    if m and n:
        _charge(ctr, kernel, mults=m * n, adds=m * (n - 1))
    return A.T @ v


def axpy_update(r, coeffs, columns, ctr=None, kernel="axpy"):
    """Return ``r - columns @ coeffs``.

    An empty coefficient vector leaves ``r`` unchanged at no cost.
    """
    r = np.asarray(r, dtype=float)
    coeffs = np.asarray(coeffs, dtype=float).reshape(-1)
    columns = np.asarray(columns, dtype=float)
    if columns.ndim == 1:
        columns = columns[:, None]
    if columns.shape[0] != r.shape[0] or columns.shape[1] != coeffs.shape[0]:
        raise DimensionError(
            f"cannot update length-{r.shape[0]} vector with {columns.shape} "
            f"columns and {coeffs.shape[0]} coefficients"
        )
    n, m = columns.shape
    if m == 0:
        return r.copy()
    # n*m mults, n*(m-1) adds for the product, n subtractions
    _charge(ctr, kernel, mults=n * m, adds=n * m)
    return r - columns @ coeffs


def _rank_check(R, scale, offset=0):
    diag = np.abs(np.diag(R))
    bad = np.flatnonzero(diag <= EPS_RANK * scale)
    if bad.size:
        col = int(bad[0]) + offset
        raise RankDeficiencyError(
            f"rank deficiency at column {col} "
            f"(|R_ii| = {diag[bad[0]]:.3e}, scale {scale:.3e})",
            column=col,
        )


def householder_qr(A, ctr=None, kernel="householder", scale=None):
    """Thin Householder QR with a rank check on the diagonal of ``R``.

    A diagonal entry at or below ``EPS_RANK * scale`` (default: the largest
    column norm) raises :class:`RankDeficiencyError`.  Charged at the
    standard Householder count ``2 m^2 (n - m/3)``.
    """
    A = as_matrix(A)
    n, m = A.shape
    if m < 1:
        raise DimensionError(f"need at least one column, got {A.shape}")
    if n < m:
        raise RankDeficiencyError(f"{m} columns in {n} dimensions cannot have full rank", column=n)
    if scale is None:
        scale = float(np.max(np.linalg.norm(A, axis=0)))
    Q, R = np.linalg.qr(A, mode="reduced")
    _rank_check(R, scale)
    flops = int(round(2 * m * m * (n - m / 3)))
    _charge(ctr, kernel, mults=flops // 2, adds=flops - flops // 2)
    return Q, R


def solve_small_ls(A, y, ctr=None, kernel="least_squares"):
    """Least-squares minimizer of ``||y - A b||_2`` via Householder QR.

    Raises :class:`RankDeficiencyError` naming the first column whose
    ``R`` diagonal falls below ``EPS_RANK`` times the largest column norm.
    """
    A = as_matrix(A, "A")
    y = as_vector(y, "y")
    if A.shape[0] != y.shape[0]:
        raise DimensionError(f"A has {A.shape[0]} rows but y has {y.shape[0]} entries")
    Q, R = householder_qr(A, ctr, kernel)
    h = matvec_t(Q, y, ctr, kernel)
    return back_substitute(R, h, ctr, kernel)


def back_substitute(R, h, ctr=None, kernel="back_substitute"):
    """Solve upper-triangular ``R x = h``.

    Charges ``t`` divides plus one multiply-add per nonzero above the
    diagonal, so a dense ``R`` costs exactly ``t^2`` and a diagonal one ``t``.
    """
    R = np.asarray(R, dtype=float)
    h = np.asarray(h, dtype=float)
    t = R.shape[0]
    if R.shape != (t, t) or h.shape != (t,):
        raise DimensionError(f"shape mismatch: R {R.shape}, h {h.shape}")
    if t == 0:
        return np.zeros(0)
    diag = np.abs(np.diag(R))
    if np.any(diag <= EPS_RANK * max(float(diag.max()), 1.0)):
        i = int(np.argmin(diag))
        raise SingularSystemError(f"near-zero diagonal R[{i},{i}] = {R[i, i]:.3e}")
    off = int(np.count_nonzero(np.triu(R, 1)))
    _charge(ctr, kernel, mults=off, adds=off, divs=t)
    return solve_triangular(R, h, lower=False, check_finite=False)


def qr_append_column(Q, R, a, ctr=None, kernel="qr_update"):
    """Append column ``a`` to the thin factorization ``Q R``.

    Uses classical Gram-Schmidt with one reorthogonalization pass, which
    keeps ``Q`` orthonormal to working precision.  Returns new arrays.
    """
    a = as_vector(a, "a")
    n = a.shape[0]
    if Q is None or np.size(Q) == 0:
        Q = np.zeros((n, 0))
        R = np.zeros((0, 0))
    Q = np.asarray(Q, dtype=float)
    R = np.asarray(R, dtype=float)
    t = Q.shape[1]
    if Q.shape[0] != n or R.shape != (t, t):
        raise DimensionError(f"shape mismatch: Q {Q.shape}, R {R.shape}, a {a.shape}")

    h = np.zeros(t)
    v = a.copy()
    if t:
        for _ in range(2):
            g = matvec_t(Q, v, ctr, kernel)
            v = axpy_update(v, g, Q, ctr, kernel)
            h += g
        _charge(ctr, kernel, adds=t)
    anorm = float(np.linalg.norm(a))
    rnn = float(np.sqrt(v @ v))
    _charge(ctr, kernel, mults=n, adds=n - 1, divs=1)  # norm, sqrt
    if rnn <= EPS_RANK * anorm or rnn == 0.0:
        raise RankDeficiencyError(
            f"appended column lies in the span of the existing {t} columns",
            column=t,
        )
    q = v / rnn
    _charge(ctr, kernel, divs=n)

    Q_new = np.empty((n, t + 1))
    Q_new[:, :t] = Q
    Q_new[:, t] = q
    R_new = np.zeros((t + 1, t + 1))
    R_new[:t, :t] = R
    R_new[:t, t] = h
    R_new[t, t] = rnn
    return Q_new, R_new
