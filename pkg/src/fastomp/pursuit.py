"""Greedy pursuit solvers.

Five solvers share one selection rule, one halting rule and one result type:

* :func:`omp_naive`  - OMP with a full least-squares refit every iteration
* :func:`omp_qr`     - OMP on an incrementally updated thin QR factorization
* :func:`omp_sr`     - OMP through successive regression (one new
  orthogonalized direction per iteration plus a backtracking pass)
* :func:`gomp`       - generalized OMP, ``c`` atoms per iteration, full refit
* :func:`bsr`        - blocked successive regression (gOMP's selection with
  the successive-regression solve)

In exact arithmetic the first three return identical iterates, as do the last
two.  All solvers record per-iteration residual norms, cumulative flops and
elapsed wall time.
"""

import math
import time
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np
from scipy.linalg import solve_triangular

from .errors import (
    DimensionError,
    ExhaustedDictionaryError,
    ParameterError,
    RankDeficiencyError,
    ZeroResidualError,
)
from .linalg import (
    EPS_RANK,
    FlopCounter,
    as_vector,
    axpy_update,
    back_substitute,
    dot,
    householder_qr,
    matvec_t,
    qr_append_column,
    solve_small_ls,
)

METHODS = ("omp_naive", "omp_qr", "omp_sr", "gomp", "bsr")
BLOCKED = ("gomp", "bsr")

#: Default halting threshold, relative to ||y||_2.
DEFAULT_REL_DELTA = 1e-9


@dataclass(frozen=True)
class SparseSignal:
    """Coefficients of a length-``dim`` vector on an explicit support."""

    dim: int
    support: tuple
    values: np.ndarray

    def __post_init__(self):
        support = tuple(int(i) for i in self.support)
        values = np.asarray(self.values, dtype=float).reshape(-1)
        if len(support) != values.shape[0]:
            raise DimensionError("support and values differ in length")
        if len(set(support)) != len(support):
            raise ParameterError("support has duplicate indices")
        if any(i < 0 or i >= self.dim for i in support):
            raise ParameterError(f"support index outside [0, {self.dim})")
        if not np.all(np.isfinite(values)):
            raise ValueError("non-finite coefficient")
        object.__setattr__(self, "support", support)
        object.__setattr__(self, "values", values)

    @property
    def sparsity(self):
        return len(self.support)

    def to_dense(self):
        x = np.zeros(self.dim)
        if self.support:
            x[list(self.support)] = self.values
        return x

    @classmethod
    def from_dense(cls, x):
        x = as_vector(x, "x")
        support = np.flatnonzero(x)
        return cls(x.shape[0], tuple(support), x[support])


@dataclass(frozen=True)
class SolverConfig:
    """Halting and selection parameters.

    ``residual_threshold`` is absolute on ``||r||_2``; ``None`` means
    ``1e-9 * ||y||_2``.  ``max_iterations`` ``None`` means ``min(N, d)``.
    ``oracle_support``, when given, halts the solver as soon as every index
    in it has been selected (benchmark "oracle stop" mode).
    """

    max_iterations: int = None
    residual_threshold: float = None
    block_size: int = 1
    ones_regressor_mode: bool = False
    tie_break: str = "lowest_index"
    oracle_support: frozenset = None

    def __post_init__(self):
        if self.max_iterations is not None and self.max_iterations < 1:
            raise ParameterError("max_iterations must be positive")
        if self.residual_threshold is not None and self.residual_threshold < 0:
            raise ParameterError("residual_threshold must be nonnegative")
        if self.block_size < 1:
            raise ParameterError("block_size must be positive")
        if self.tie_break != "lowest_index":
            raise ParameterError(f"unknown tie-break rule {self.tie_break!r}")


class IterationRecord(NamedTuple):
    residual_norm: float
    flops: int
    elapsed: float


@dataclass
class SolverResult:
    method: str
    coefficients: SparseSignal
    selection_order: list
    blocks: list
    per_iteration: list
    iterations_used: int
    halted_by: str
    residual: np.ndarray
    flops: FlopCounter = field(repr=False)

    @property
    def x(self):
        return self.coefficients.to_dense()

    @property
    def residual_norms(self):
        return [rec.residual_norm for rec in self.per_iteration]

    @property
    def wall_time(self):
        return self.per_iteration[-1].elapsed if self.per_iteration else 0.0


def _excluded_mask(excluded, d):
    mask = np.zeros(d, dtype=bool)
    if excluded is None:
        return mask
    ex = np.asarray(list(excluded) if not isinstance(excluded, np.ndarray) else excluded)
    if ex.dtype == bool:
        if ex.shape != (d,):
            raise DimensionError("boolean exclusion mask has the wrong length")
        return ex.copy()
    if ex.size:
        mask[ex.astype(int)] = True
    return mask


def _scores(D, r, mask, ctr):
    if r.shape[0] != D.n_measurements:
        raise DimensionError(f"residual has length {r.shape[0]}, dictionary has {D.n_measurements} rows")
    n_free = D.n_atoms - int(mask.sum())
    if n_free == 0:
        raise ExhaustedDictionaryError("every atom has already been selected")
    if not np.any(r):
        raise ZeroResidualError("residual is exactly zero; the solver should have halted")
    score = np.abs(D.matrix.T @ r)
    if ctr is not None:
        # only candidate atoms count toward the scan
        n = D.n_measurements
        ctr.add("select", mults=n_free * n, adds=n_free * (n - 1))
    score[mask] = -1.0
    return score, n_free


def select_atom(D, r, excluded=None, ctr=None):
    """Index of the non-excluded atom most correlated with ``r``.

    Ties go to the lowest index.
    """
    r = np.asarray(r, dtype=float)
    score, _ = _scores(D, r, _excluded_mask(excluded, D.n_atoms), ctr)
    return int(np.argmax(score))


def select_block(D, r, excluded=None, c=1, ctr=None):
    """The ``min(c, remaining)`` non-excluded atoms with largest ``|<phi_j, r>|``.

    Returned in decreasing order of correlation magnitude, ties by lowest
    index.  This subset maximizes ``||Phi_Omega^T r||_2`` over all subsets of
    that size.
    """
    if c < 1:
        raise ParameterError("block size must be positive")
    r = np.asarray(r, dtype=float)
    score, n_free = _scores(D, r, _excluded_mask(excluded, D.n_atoms), ctr)
    m = min(c, n_free)
    if m == 1:
        return [int(np.argmax(score))]
    order = np.argsort(-score, kind="stable")
    return [int(j) for j in order[:m]]


class _Run:
    """Bookkeeping shared by all solvers: halting, timing and results."""

    def __init__(self, method, D, y, cfg, ctr, blocked):
        self.method = method
        self.D = D
        self.y = as_vector(y, "y")
        N, d = D.shape
        if self.y.shape[0] != N:
            raise DimensionError(f"y has length {self.y.shape[0]}, dictionary has {N} rows")
        self.cfg = cfg = cfg or SolverConfig()
        if not blocked and cfg.block_size != 1:
            raise ParameterError(f"{method} requires block_size = 1")
        if cfg.block_size > d:
            raise ParameterError(f"block size {cfg.block_size} exceeds the {d} atoms")
        self.c = cfg.block_size
        self.kappa = min(N, d) if cfg.max_iterations is None else cfg.max_iterations
        if self.kappa > d:
            raise ParameterError(f"max_iterations {self.kappa} exceeds the {d} atoms")
        ynorm = float(np.linalg.norm(self.y))
        self.delta = DEFAULT_REL_DELTA * ynorm if cfg.residual_threshold is None else cfg.residual_threshold
        self.oracle = None if cfg.oracle_support is None else frozenset(int(i) for i in cfg.oracle_support)
        self.ctr = ctr if ctr is not None else FlopCounter()
        self.mask = np.zeros(d, dtype=bool)
        self.order = []
        self.blocks = []
        self.records = []
        self.t0 = time.perf_counter()
        self.rnorm = ynorm
        self.support = ()
        self.values = np.zeros(0)
        self.residual = self.y.copy()

    def halt_reason(self):
        if self.rnorm <= self.delta:
            return "threshold"
        if self.oracle is not None and self.oracle.issubset(self.order):
            return "oracle"
        if len(self.blocks) >= self.kappa or self.mask.all():
            return "budget"
        return None

    def commit(self, block, values, residual):
        """Accept an iteration: ``values`` are coefficients on ``self.order``."""
        self.blocks.append(tuple(block))
        self.support = tuple(self.order)
        self.values = np.asarray(values, dtype=float).copy()
        self.residual = residual
        self.rnorm = float(np.linalg.norm(residual))
        self.records.append(IterationRecord(self.rnorm, self.ctr.total(), time.perf_counter() - self.t0))

    def add(self, block):
        for j in block:
            self.mask[j] = True
            self.order.append(j)

    def result(self, halted_by):
        coeffs = SparseSignal(self.D.n_atoms, self.support, self.values)
        return SolverResult(
            method=self.method,
            coefficients=coeffs,
            selection_order=list(self.support),
            blocks=list(self.blocks),
            per_iteration=list(self.records),
            iterations_used=len(self.blocks),
            halted_by=halted_by,
            residual=self.residual,
            flops=self.ctr,
        )

    def fail(self, err, pending=None):
        """Attach the partial result; map a matrix position to an atom index.

        ``pending`` lists the atoms that followed ``self.order`` in the
        matrix being factored when ``err.column`` is a column position.
        """
        if pending is not None and getattr(err, "column", None) is not None:
            cols = self.order + list(pending)
            err.column = cols[err.column] if err.column < len(cols) else None
        err.partial = self.result("error")
        return err


def _observe(observer, run):
    if observer is not None:
        observer(len(run.blocks), run.residual, list(run.support))


def omp_naive(D, y, cfg=None, ctr=None):
    """OMP re-solving the full least-squares problem on every iteration."""
    run = _Run("omp_naive", D, y, cfg, ctr, blocked=False)
    Phi, ctr = D.matrix, run.ctr
    N = D.n_measurements
    A = np.empty((N, run.kappa))
    while (why := run.halt_reason()) is None:
        j = select_atom(D, run.residual, run.mask, ctr)
        t = len(run.order)
        A[:, t] = Phi[:, j]
        try:
            x = solve_small_ls(A[:, : t + 1], run.y, ctr)
        except RankDeficiencyError as err:
            raise run.fail(err, [j])
        run.add([j])
        r = axpy_update(run.y, x, A[:, : t + 1], ctr, "residual")
        run.commit([j], x, r)
    return run.result(why)


def omp_qr(D, y, cfg=None, ctr=None):
    """OMP on an incrementally updated QR factorization of the selected atoms.

    Each iteration appends the new atom to ``Q R``, extends ``h = Q^T y`` by
    one entry and back-substitutes ``R x = h``.
    """
    run = _Run("omp_qr", D, y, cfg, ctr, blocked=False)
    Phi, ctr = D.matrix, run.ctr
    N = D.n_measurements
    A = np.empty((N, run.kappa))
    Q = R = None
    h = []
    while (why := run.halt_reason()) is None:
        j = select_atom(D, run.residual, run.mask, ctr)
        t = len(run.order)
        try:
            Q, R = qr_append_column(Q, R, Phi[:, j], ctr, "qr_update")
        except RankDeficiencyError as err:
            raise run.fail(err, [j])
        h.append(dot(Q[:, t], run.y, ctr, "h_update"))
        x = back_substitute(R, np.asarray(h), ctr, "back_substitute")
        A[:, t] = Phi[:, j]
        run.add([j])
        r = axpy_update(run.y, x, A[:, : t + 1], ctr, "residual")
        run.commit([j], x, r)
    return run.result(why)


def omp_sr(D, y, cfg=None, ctr=None, observer=None):
    """OMP through successive regression.

    Iteration ``t`` regresses the new atom ``a_t`` on the stored directions
    ``z_l`` to get ``gamma_{l,t}``, forms ``z_t = a_t - sum gamma_{l,t} z_l``,
    regresses ``y`` on ``z_t`` alone for ``beta_t`` and then backtracks
    ``b_l = beta_l - sum_{k>l} b_k gamma_{l,k}``.  ``<z_t, z_t>`` is computed
    once and cached.

    With ``ones_regressor_mode`` the all-ones vector is used as an extra
    leading direction ``z_0``; it takes part in the orthogonalization but
    carries no coefficient, so the residual is then not the OMP residual.

    Flops are charged per kernel: ``select``, ``gamma_dot``, ``gamma_div``,
    ``z_update``, ``zz``, ``beta``, ``backtrack`` and ``residual``.
    """
    run = _Run("omp_sr", D, y, cfg, ctr, blocked=False)
    Phi, ctr = D.matrix, run.ctr
    N = D.n_measurements
    kappa = run.kappa
    off = 1 if run.cfg.ones_regressor_mode else 0
    Z = np.empty((N, kappa + off))
    zz = np.empty(kappa + off)
    if off:
        Z[:, 0] = 1.0
        zz[0] = float(N)
        ctr.add("init", mults=N, adds=N - 1)
    A = np.empty((N, kappa))
    G = np.zeros((kappa, kappa))
    beta = np.zeros(kappa)
    y = run.y

    while (why := run.halt_reason()) is None:
        _observe(observer, run)
        j = select_atom(D, run.residual, run.mask, ctr)
        a = Phi[:, j]
        t = len(run.order)  # zero-based slot of the new atom
        m = t + off  # directions already stored
        if m:
            g = Z[:, :m].T @ a
            ctr.add("gamma_dot", mults=m * N, adds=m * (N - 1))
            gam = g / zz[:m]
            ctr.add("gamma_div", divs=m)
            z = a - Z[:, :m] @ gam
            ctr.add("z_update", mults=m * N, adds=m * N)
        else:
            gam = np.zeros(0)
            z = a.copy()
        zz_t = float(z @ z)
        ctr.add("zz", mults=N, adds=N - 1)
        if math.sqrt(zz_t) <= EPS_RANK * float(np.linalg.norm(a)):
            raise run.fail(RankDeficiencyError(
                f"atom {j} lies numerically in the span of the selected atoms", column=j))
        Z[:, m] = z
        zz[m] = zz_t
        beta[t] = float(z @ y) / zz_t
        ctr.add("beta", mults=N, adds=N - 1, divs=1)
        G[:t, t] = gam[off:]
        A[:, t] = a

        n = t + 1
        if n > 1:
            b = solve_triangular(G[:n, :n], beta[:n], lower=False, unit_diagonal=True, check_finite=False)
            half = n * (n - 1) // 2
            ctr.add("backtrack", mults=half, adds=half)
        else:
            b = beta[:1].copy()
        run.add([j])
        r = axpy_update(y, b, A[:, :n], ctr, "residual")
        run.commit([j], b, r)
    return run.result(why)


def gomp(D, y, cfg=None, ctr=None):
    """Generalized OMP: ``c`` atoms per iteration, full least-squares refit."""
    run = _Run("gomp", D, y, cfg, ctr, blocked=True)
    Phi, ctr = D.matrix, run.ctr
    N, d = D.shape
    A = np.empty((N, min(d, run.kappa * run.c)))
    while (why := run.halt_reason()) is None:
        block = select_block(D, run.residual, run.mask, run.c, ctr)
        t = len(run.order)
        n = t + len(block)
        A[:, t:n] = Phi[:, block]
        try:
            x = solve_small_ls(A[:, :n], run.y, ctr)
        except RankDeficiencyError as err:
            raise run.fail(err, block)
        run.add(block)
        r = axpy_update(run.y, x, A[:, :n], ctr, "residual")
        run.commit(block, x, r)
    return run.result(why)


def bsr(D, y, cfg=None, ctr=None, observer=None):
    """Blocked successive regression.

    Each iteration selects the block ``Gamma_t`` of ``c`` atoms with the
    largest correlations, orthogonalizes every new atom against each earlier
    block (``gamma_{Gamma_l, j} = Z_{Gamma_l}^+ a_j``), regresses ``y`` on the
    new block ``Z_{Gamma_t}`` alone and backtracks the earlier coefficients.
    Directions inside a block are not mutually orthogonal; blocks are.

    Each block's thin QR factorization is kept so that later
    pseudo-inverse applications cost a projection plus a small
    back-substitution.
    """
    run = _Run("bsr", D, y, cfg, ctr, blocked=True)
    Phi, ctr = D.matrix, run.ctr
    N, d = D.shape
    y = run.y
    cap = min(d, run.kappa * run.c)
    off = 1 if run.cfg.ones_regressor_mode else 0
    Qall = np.empty((N, cap + off))  # orthonormal bases of earlier blocks
    if off:
        Qall[:, 0] = 1.0 / math.sqrt(N)
        ctr.add("init", divs=1)
    factors = []  # (start, stop, R) per block, positions in atom order
    A = np.empty((N, cap))
    G = np.zeros((cap, cap))
    beta = np.zeros(cap)

    while (why := run.halt_reason()) is None:
        _observe(observer, run)
        block = select_block(D, run.residual, run.mask, run.c, ctr)
        s = len(run.order)
        m = len(block)
        e = s + m
        Ablk = Phi[:, block]
        p = s + off
        if p:
            H = Qall[:, :p].T @ Ablk
            ctr.add("gamma_dot", mults=p * m * N, adds=p * m * (N - 1))
            if off:
                # regression on z_0 = 1: <1, a> / <1, 1>
                ctr.add("gamma_div", divs=m)
            for start, stop, Rl in factors:
                G[start:stop, s:e] = solve_triangular(Rl, H[start + off : stop + off], check_finite=False)
                w = stop - start
                ctr.add("gamma_solve", mults=m * w * (w - 1) // 2, adds=m * w * (w - 1) // 2, divs=m * w)
            Zblk = Ablk - Qall[:, :p] @ H
            ctr.add("z_update", mults=p * m * N, adds=p * m * N)
        else:
            Zblk = Ablk.copy()
        try:
            Qt, Rt = _block_factor(Zblk, ctr)
        except RankDeficiencyError as err:
            err.column = None if err.column is None else err.column + s
            raise run.fail(err, block)
        h = matvec_t(Qt, y, ctr, "beta")
        beta[s:e] = back_substitute(Rt, h, ctr, "beta")
        Qall[:, p : p + m] = Qt
        factors.append((s, e, Rt))
        A[:, s:e] = Ablk

        if s:
            b = solve_triangular(G[:e, :e], beta[:e], lower=False, unit_diagonal=True, check_finite=False)
            # entries before each block's end pair with every later entry
            later = sum((e - stop) * (stop - start) for start, stop, _ in factors)
            ctr.add("backtrack", mults=later, adds=later)
        else:
            b = beta[:e].copy()
        run.add(block)
        r = axpy_update(y, b, A[:, :e], ctr, "residual")
        run.commit(block, b, r)
    return run.result(why)


def _block_factor(Z, ctr):
    # rank is judged against the unit norm of the original atoms, not the
    # (possibly much shorter) orthogonalized directions
    return householder_qr(Z, ctr, "beta", scale=1.0)


SOLVERS = {
    "omp_naive": omp_naive,
    "omp_qr": omp_qr,
    "omp_sr": omp_sr,
    "gomp": gomp,
    "bsr": bsr,
}


def solve(method, D, y, cfg=None, ctr=None):
    try:
        fn = SOLVERS[method]
    except KeyError:
        raise ParameterError(f"unknown method {method!r}; expected one of {', '.join(METHODS)}") from None
    return fn(D, y, cfg, ctr)


def cost_model(solver, t, N, d=None):
    """Closed-form flop count of iteration ``t``.

    ``omp_sr``: ``t(2N-1) + 4N - 1 + t^2``;
    ``omp_qr``: ``(d-t)(4N-1) + 5N + 1 + t^2``.
    """
    if t < 1 or N < 1:
        raise ParameterError("t and N must be positive")
    if solver == "omp_sr":
        return t * (2 * N - 1) + 4 * N - 1 + t * t
    if solver == "omp_qr":
        if d is None or t > d:
            raise ParameterError("omp_qr cost needs d >= t")
        return (d - t) * (4 * N - 1) + 5 * N + 1 + t * t
    raise ParameterError(f"no cost model for solver {solver!r}")


def cost_model_rows(solver, t, N, d=None):
    """Per-operation breakdown behind :func:`cost_model`."""
    if solver == "omp_sr":
        return {"gamma": 2 * N * t, "beta": 4 * N - 1, "backtrack": t * t - t}
    if solver == "omp_qr":
        cost_model(solver, t, N, d)
        return {"qr_update": (d - t) * (4 * N - 1) + 3 * N + 1, "h_update": 2 * N, "back_substitute": t * t}
    raise ParameterError(f"no cost model for solver {solver!r}")
