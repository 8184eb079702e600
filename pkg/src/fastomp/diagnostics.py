"""Greedy-choice ratios, recovery-condition traces and error metrics.

These quantities need the true support, so they are for analysing runs on
instances with known ground truth, not for use inside a solver.
"""

import math
from dataclasses import dataclass, field
from itertools import combinations

import numpy as np

from .dictionary import coherence, cumulative_coherence
from .errors import (
    DegenerateResidualError,
    InstanceTooLargeError,
    ParameterError,
    RankDeficiencyError,
)
from .linalg import as_vector, householder_qr
from .pursuit import SolverConfig, SparseSignal, bsr

ENUMERATION_LIMIT = 10**6


@dataclass(frozen=True)
class OptimalPartition:
    """Split of the atom indices into the true support and the rest."""

    lambda_opt: frozenset
    psi_indices: frozenset

    def __post_init__(self):
        if self.lambda_opt & self.psi_indices:
            raise ParameterError("support and complement overlap")

    @classmethod
    def from_support(cls, support, d):
        lam = frozenset(int(i) for i in support)
        if any(i < 0 or i >= d for i in lam):
            raise ParameterError(f"support index outside [0, {d})")
        return cls(lam, frozenset(range(d)) - lam)

    @property
    def d(self):
        return len(self.lambda_opt) + len(self.psi_indices)

    def opt_mask(self):
        m = np.zeros(self.d, dtype=bool)
        m[list(self.lambda_opt)] = True
        return m


def greedy_ratio(D, r, part):
    """``||Psi^T r||_inf / ||Phi_opt^T r||_inf``.

    A value below one means the next single-atom greedy pick is optimal.
    """
    r = as_vector(r, "r")
    corr = np.abs(D.matrix.T @ r)
    mask = part.opt_mask()
    den = corr[mask].max(initial=0.0)
    if den == 0.0:
        raise DegenerateResidualError("residual is orthogonal to every optimal atom")
    num = corr[~mask].max(initial=0.0)
    return float(num / den)


def greedy_ratio_block(D, r, part, c, excluded=(), variant="pairs"):
    """Block greedy-choice ratio by exhaustive subset enumeration.

    Subsets ``Omega`` of size ``min(c, remaining)`` range over the atoms not
    in ``excluded`` (already selected atoms are orthogonal to the residual
    and cannot be picked again).  A pair ``(Omega_1, Omega_2)`` is admissible
    when ``Omega_2`` holds more optimal atoms than ``Omega_1``.

    ``variant="pairs"`` returns the supremum over admissible pairs of
    ``||Phi_{Omega_1}^T r|| / ||Phi_{Omega_2}^T r||``.  ``variant="maxima"``
    instead compares, for every pair of optimal-atom counts ``a1 < a2``, the
    largest norm reachable with ``a1`` optimal atoms to the largest reachable
    with ``a2`` and returns the worst such ratio.  With no admissible pair
    the ratio is 0.
    """
    if c < 1:
        raise ParameterError("block size must be positive")
    if variant not in ("pairs", "maxima"):
        raise ParameterError(f"unknown variant {variant!r}")
    r = as_vector(r, "r")
    ex = set(int(i) for i in excluded)
    free = [j for j in range(D.n_atoms) if j not in ex]
    m = min(c, len(free))
    if m == 0 or math.comb(len(free), m) > ENUMERATION_LIMIT:
        if m == 0:
            return 0.0
        raise InstanceTooLargeError(
            f"C({len(free)}, {m}) = {math.comb(len(free), m)} subsets exceeds {ENUMERATION_LIMIT}"
        )
    corr2 = (D.matrix[:, free].T @ r) ** 2
    is_opt = np.array([j in part.lambda_opt for j in free])

    best = {}
    worst = {}
    for omega in combinations(range(len(free)), m):
        idx = list(omega)
        cnt = int(is_opt[idx].sum())
        val = float(corr2[idx].sum())
        best[cnt] = max(best.get(cnt, -1.0), val)
        worst[cnt] = min(worst.get(cnt, math.inf), val)

    ratio = 0.0
    for a1 in best:
        for a2 in best:
            if a2 <= a1:
                continue
            num = best[a1]
            den = worst[a2] if variant == "pairs" else best[a2]
            if den == 0.0:
                if num > 0.0:
                    return math.inf
                raise DegenerateResidualError("residual is orthogonal to an admissible block")
            ratio = max(ratio, math.sqrt(num / den))
    return ratio


def _pinv_rows(X, rows):
    Q, R = householder_qr(X, scale=float(np.max(np.linalg.norm(X, axis=0))))
    # X^+ = R^{-1} Q^T
    Rinv = np.linalg.solve(R, np.eye(R.shape[0]))
    return (Rinv @ Q.T)[rows]


def lemma1_quantity(D, part, selected_nonoptimal=(), unselected_optimal=None):
    """``max_psi ||(X^+)_{Pi,:} psi||_1`` over the unselected non-optimal atoms.

    ``X = [Phi_opt | Psi_J]`` stacks the optimal atoms (in increasing index
    order) and the selected non-optimal atoms ``J``; ``Pi`` indexes the
    optimal atoms not yet selected (all of them by default).
    """
    opt = sorted(part.lambda_opt)
    J = [int(j) for j in selected_nonoptimal]
    if set(J) & part.lambda_opt:
        raise ParameterError("selected_nonoptimal contains optimal atoms")
    pi = opt if unselected_optimal is None else sorted(int(i) for i in unselected_optimal)
    if not pi:
        raise ParameterError("no unselected optimal atoms")
    pos = {j: i for i, j in enumerate(opt)}
    try:
        rows = [pos[i] for i in pi]
    except KeyError:
        raise ParameterError("unselected_optimal must be a subset of the support") from None
    X = D.matrix[:, opt + J]
    if X.shape[1] > X.shape[0]:
        raise ParameterError("X has more columns than rows and cannot have full column rank")
    P = _pinv_rows(X, rows)
    rest = sorted(part.psi_indices - set(J))
    if not rest:
        return 0.0
    return float(np.abs(P @ D.matrix[:, rest]).sum(axis=0).max())


def nmse(x_true, x_est):
    """``||x_est - x_true||^2 / ||x_true||^2``."""
    a = _dense(x_true)
    b = _dense(x_est)
    if a.shape != b.shape:
        raise ParameterError("signals have different dimensions")
    den = float(a @ a)
    if den == 0.0:
        raise ParameterError("true signal is zero")
    diff = b - a
    return float(diff @ diff) / den


def normalized_residual(y, D, x):
    """``||y - Phi x|| / ||y||``."""
    y = as_vector(y, "y")
    ny = float(np.linalg.norm(y))
    if ny == 0.0:
        raise ParameterError("measurement is zero")
    return float(np.linalg.norm(y - D.matrix @ _dense(x))) / ny


def _dense(x):
    if isinstance(x, SparseSignal):
        return x.to_dense()
    return as_vector(x)


@dataclass
class TraceRecord:
    iteration: int
    rho: float
    rho_c: float  # None when the enumeration guard trips
    n_optimal_selected: int
    n_nonoptimal_selected: int
    l: int
    n: int
    mu1_sum: float  # None when n exceeds d - 1
    lemma1: float  # None when X is rank deficient or Pi is empty
    block: tuple = ()
    block_optimal: int = 0

    @property
    def rho_ok(self):
        return self.rho < 1.0

    @property
    def rho_c_ok(self):
        return self.rho_c is not None and self.rho_c < 1.0

    @property
    def weak_ok(self):
        return self.mu1_sum is not None and self.mu1_sum < 1.0


@dataclass
class ConditionTrace:
    k: int
    c: int
    mu: float
    lambda_opt: frozenset = frozenset()
    records: list = field(default_factory=list)
    result: object = None

    @property
    def iterations(self):
        return len(self.records)

    def recovered(self):
        return set(self.result.selection_order) >= set(self.lambda_opt)


def trace_conditions(D, y, x_true, cfg=None, variant="pairs"):
    """Run :func:`bsr` and record the condition quantities before each pick.

    Per iteration this stores the weak ratio, the block ratio (``None`` past
    the enumeration guard), the selected-set composition, ``l = min(|Pi|,
    k - 1)``, ``n = |X|``, ``mu1(l) + mu1(n)`` and :func:`lemma1_quantity`, plus
    how many optimal atoms the block then picked.  Nothing is asserted.
    """
    cfg = cfg or SolverConfig()
    x_true = x_true if isinstance(x_true, SparseSignal) else SparseSignal.from_dense(x_true)
    part = OptimalPartition.from_support(x_true.support, D.n_atoms)
    k = x_true.sparsity
    d = D.n_atoms
    trace = ConditionTrace(k=k, c=cfg.block_size, mu=coherence(D) if d > 1 else 0.0,
                           lambda_opt=part.lambda_opt)
    mu1_cache = {}

    def mu1(m):
        if m not in mu1_cache:
            mu1_cache[m] = cumulative_coherence(D, m)
        return mu1_cache[m]

    def observe(t, r, selected):
        sel = set(selected)
        opt_sel = sel & part.lambda_opt
        J = sorted(sel - part.lambda_opt)
        pi = sorted(part.lambda_opt - sel)
        try:
            rho = greedy_ratio(D, r, part)
        except DegenerateResidualError:
            rho = math.inf
        try:
            rho_c = greedy_ratio_block(D, r, part, cfg.block_size, excluded=sel, variant=variant)
        except (InstanceTooLargeError, DegenerateResidualError):
            rho_c = None
        l = min(len(pi), k - 1)
        n = k + len(J)
        s = mu1(l) + mu1(n) if n <= d - 1 else None
        lem = None
        if pi and n <= D.n_measurements:
            try:
                lem = lemma1_quantity(D, part, J, pi)
            except RankDeficiencyError:
                lem = None
        trace.records.append(TraceRecord(t + 1, rho, rho_c, len(opt_sel), len(J), l, n, s, lem))

    trace.result = bsr(D, y, cfg, observer=observe)
    for rec, blk in zip(trace.records, trace.result.blocks):
        rec.block = blk
        rec.block_optimal = len(set(blk) & part.lambda_opt)
    return trace
