"""Benchmark harness and report writer."""

import logging
import math
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from ..diagnostics import nmse, normalized_residual
from ..errors import FastOMPError, ParameterError
from ..linalg import FlopCounter
from ..pursuit import BLOCKED, METHODS, SOLVERS, SolverConfig
from .instances import gen_instance

log = logging.getLogger(__name__)

CSV_HEADER = "method,ite,found,nmse,approx_err,time_s,flops"
DEFAULT_C_GRID = (2, 3, 4, 8)


@dataclass
class BenchReportRow:
    method: str
    ite: int
    found: int  # None without ground truth
    nmse: float
    approx_err: float
    time_s: float
    flops: int
    c: int = 1
    instance: int = 0
    seed: int = 0
    best_c: bool = False
    halted_by: str = ""
    error: str = None

    @property
    def label(self):
        if self.method not in BLOCKED:
            return self.method
        return f"{self.method}[c={self.c}]" + ("*" if self.best_c else "")


def _budget(spec, method, c, oracle_stop, max_iterations):
    if max_iterations is not None:
        return max_iterations
    if oracle_stop:
        return min(spec.N, spec.d) if c == 1 else min(math.ceil(min(spec.N, spec.d) / c), spec.d // c)
    return max(1, math.ceil(spec.k / c))


def _run_cell(inst_no, spec, inst, method, c, oracle_stop, max_iterations, delta):
    D, signal, y, _ = inst
    truth = frozenset(signal.support)
    cfg = SolverConfig(
        max_iterations=_budget(spec, method, c, oracle_stop, max_iterations),
        residual_threshold=delta,
        block_size=c,
        oracle_support=truth if oracle_stop else None,
    )
    ctr = FlopCounter()
    row = BenchReportRow(method, 0, None, math.nan, math.nan, 0.0, 0, c=c, instance=inst_no, seed=spec.seed)
    start = time.perf_counter()
    try:
        res = SOLVERS[method](D, y, cfg, ctr)
    except FastOMPError as err:
        row.time_s = time.perf_counter() - start
        row.error = str(err)
        res = getattr(err, "partial", None)
        log.warning("instance %d seed %d %s(c=%d): %s", inst_no, spec.seed, method, c, err)
        if res is None:
            return row
    else:
        row.time_s = time.perf_counter() - start
        row.halted_by = res.halted_by
    row.ite = res.iterations_used
    row.flops = ctr.total()
    if signal.sparsity:
        row.found = len(truth & set(res.selection_order))
        row.nmse = nmse(signal, res.coefficients)
    if np.any(y):
        row.approx_err = normalized_residual(y, D, res.coefficients)
    return row


def _score(row):
    key = row.nmse if row.found is not None else row.approx_err
    return (math.inf if row.error or math.isnan(key) else key, row.flops, row.c)


def run_benchmark(specs, methods, c_grid=DEFAULT_C_GRID, oracle_stop=False,
                  max_iterations=None, delta=None, jobs=1):
    """One row per (instance, method, c), in that nesting order.

    Single-atom methods run once per instance; ``gomp``/``bsr`` run once per
    block size in ``c_grid`` and the best block size per instance (lowest
    NMSE, or approximation error without ground truth; ties by flops, then
    by smaller ``c``) is flagged.  Wall time covers only the solver call.
    The default iteration budget is ``ceil(k / c)``; ``oracle_stop`` instead
    runs until the whole true support is selected.  Solver errors are logged
    and recorded on their row.  ``jobs > 1`` runs cells on a thread pool,
    which distorts timings.
    """
    methods = list(methods)
    for m in methods:
        if m not in METHODS:
            raise ParameterError(f"unknown method {m!r}")
    c_grid = sorted(set(int(c) for c in c_grid)) or [1]
    cells = []
    for i, spec in enumerate(specs):
        inst = gen_instance(spec)
        for m in methods:
            for c in (c_grid if m in BLOCKED else [1]):
                if c > spec.d:
                    continue
                cells.append((i, spec, inst, m, c, oracle_stop, max_iterations, delta))
    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            rows = list(pool.map(lambda a: _run_cell(*a), cells))
    else:
        rows = [_run_cell(*a) for a in cells]

    groups = {}
    for row in rows:
        if row.method in BLOCKED:
            groups.setdefault((row.instance, row.method), []).append(row)
    for group in groups.values():
        min(group, key=_score).best_c = True
    return rows


def _fmt(v):
    if v is None:
        return ""
    if isinstance(v, (int, np.integer)) and not isinstance(v, bool):
        return str(int(v))
    return format(float(v), ".6g")


def _cells(row):
    return [row.label, _fmt(row.ite), _fmt(row.found), _fmt(row.nmse),
            _fmt(row.approx_err), _fmt(row.time_s), _fmt(row.flops)]


def emit_report(rows, path=None, format="csv"):
    """Write rows as CSV (exact header, 6 significant digits) or an aligned table.

    ``path`` of ``None`` or ``"-"`` writes to stdout.
    """
    rows = list(rows)
    if not rows:
        raise ParameterError("no rows to report")
    if format not in ("csv", "pretty"):
        raise ParameterError(f"unknown report format {format!r}")
    table = [_cells(r) for r in rows]
    if format == "csv":
        text = CSV_HEADER + "\n" + "".join(",".join(t) + "\n" for t in table)
    else:
        head = CSV_HEADER.split(",")
        widths = [max(len(h), *(len(t[i]) for t in table)) for i, h in enumerate(head)]
        lines = ["  ".join(h.ljust(w) if i == 0 else h.rjust(w) for i, (h, w) in enumerate(zip(head, widths)))]
        lines.append("  ".join("-" * w for w in widths))
        for t in table:
            lines.append("  ".join(v.ljust(w) if i == 0 else v.rjust(w) for i, (v, w) in enumerate(zip(t, widths))))
        text = "\n".join(lines) + "\n"
    if path is None or path == "-":
        sys.stdout.write(text)
    else:
        with open(path, "w", newline="") as fh:
            fh.write(text)


def parse_report(path):
    """Read a CSV report back into a list of dicts of strings."""
    with open(path) as fh:
        lines = fh.read().splitlines()
    head = lines[0].split(",")
    return [dict(zip(head, line.split(","))) for line in lines[1:] if line]
