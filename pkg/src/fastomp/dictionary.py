"""Dictionaries of unit-norm atoms and their coherence quantities."""

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .errors import DegenerateAtomError, ParameterError
from .linalg import EPS_RANK, as_matrix

UNIT_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class Dictionary:
    """An ``N x d`` matrix whose columns (atoms) have unit l2 norm.

    ``scales`` holds the original column norms when the dictionary was
    produced by :func:`normalize_columns`; a coefficient ``b_j`` found for
    the normalized atom corresponds to ``b_j / scales[j]`` on the raw column.
    """

    matrix: np.ndarray
    scales: np.ndarray = field(default=None)

    def __post_init__(self):
        m = as_matrix(self.matrix, "dictionary")
        norms = np.linalg.norm(m, axis=0)
        bad = np.flatnonzero(np.abs(norms - 1.0) > UNIT_TOL)
        if bad.size:
            raise ValueError(
                f"column {int(bad[0])} has norm {norms[bad[0]]!r}; "
                "use normalize_columns() for raw matrices"
            )
        m = m.copy()
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)
        scales = np.ones(m.shape[1]) if self.scales is None else np.asarray(self.scales, float)
        scales = scales.copy()
        scales.setflags(write=False)
        object.__setattr__(self, "scales", scales)

    @property
    def n_measurements(self):
        return self.matrix.shape[0]

    @property
    def n_atoms(self):
        return self.matrix.shape[1]

    @property
    def shape(self):
        return self.matrix.shape

    def atom(self, j):
        return self.matrix[:, j]

    @cached_property
    def abs_gram(self):
        """``|Phi^T Phi|`` with the diagonal zeroed."""
        g = np.abs(self.matrix.T @ self.matrix)
        np.fill_diagonal(g, 0.0)
        g.setflags(write=False)
        return g


def normalize_columns(raw):
    """Scale every column of ``raw`` to unit l2 norm.

    The returned dictionary carries the original norms in ``scales``.
    Zero (or numerically zero) columns raise :class:`DegenerateAtomError`.
    """
    raw = as_matrix(raw, "raw matrix")
    norms = np.linalg.norm(raw, axis=0)
    cutoff = EPS_RANK * max(float(norms.max(initial=0.0)), 1.0)
    bad = np.flatnonzero(norms <= cutoff)
    if bad.size:
        raise DegenerateAtomError(f"column {int(bad[0])} is (numerically) zero", column=int(bad[0]))
    m = raw / norms
    # one more pass so every column is within an ulp or two of unit norm
    m /= np.linalg.norm(m, axis=0)
    return Dictionary(m, scales=norms)


def coherence(D):
    """Largest absolute inner product between two distinct atoms."""
    if D.n_atoms < 2:
        raise ParameterError("coherence needs at least two atoms")
    return float(min(D.abs_gram.max(), 1.0))


def cumulative_coherence(D, m):
    """Largest total absolute correlation of one atom against ``m`` others.

    For each atom the ``m`` largest absolute inner products with the other
    atoms are summed; the maximum over atoms is returned.  ``m = 0`` gives 0.
    """
    d = D.n_atoms
    if m == 0:
        return 0.0
    if not 1 <= m <= d - 1:
        raise ParameterError(f"m must lie in [1, {d - 1}], got {m}")
    g = D.abs_gram
    # drop the self-correlation slot so it never counts among the top m
    others = g[~np.eye(d, dtype=bool)].reshape(d, d - 1)
    top = np.partition(others, d - 1 - m, axis=1)[:, d - 1 - m:]
    return float(top.sum(axis=1).max())


def check_strong_condition(D, k):
    """``mu * (2k - 1) < 1`` (strict)."""
    if not 1 <= k <= D.n_atoms:
        raise ParameterError(f"k must lie in [1, {D.n_atoms}], got {k}")
    return coherence(D) * (2 * k - 1) < 1.0


def check_cumulative_condition(D, l, n):
    """Return ``(mu1(l) + mu1(n) < 1, mu1(l) + mu1(n))``."""
    d = D.n_atoms
    if not 0 <= l <= d - 1 or not 1 <= n <= d - 1:
        raise ParameterError(f"need 0 <= l <= {d - 1} and 1 <= n <= {d - 1}, got l={l}, n={n}")
    s = cumulative_coherence(D, l) + cumulative_coherence(D, n)
    return s < 1.0, s


@dataclass
class RecoveryConditionReport:
    mu: float
    mu1_values: dict
    strong_ok: bool
    l: int
    n: int
    weak_sum: float

    @property
    def weak_ok(self):
        return self.weak_sum < 1.0


def recovery_report(D, k, l=None, n=None):
    """Collect coherence, the cumulative coherence profile and both verdicts.

    ``l`` and ``n`` default to their values before the first iteration
    (``k - 1`` and ``k``).
    """
    d = D.n_atoms
    l = k - 1 if l is None else l
    n = k if n is None else n
    mu1 = {m: cumulative_coherence(D, m) for m in range(1, d)}
    _, weak = check_cumulative_condition(D, l, n)
    return RecoveryConditionReport(
        mu=coherence(D),
        mu1_values=mu1,
        strong_ok=check_strong_condition(D, k),
        l=l,
        n=n,
        weak_sum=weak,
    )
