"""Command-line entry point: ``fastomp {gen,recover,bench,diagnose}``.

Exit codes: 0 success, 1 usage error, 2 data error, 3 numerical error.
"""

import argparse
import csv
import json
import logging
import math
import os
import sys

import numpy as np

from ..diagnostics import nmse, normalized_residual, trace_conditions
from ..dictionary import check_strong_condition, coherence, normalize_columns
from ..errors import DataError, NumericalError, ParameterError
from ..pursuit import BLOCKED, METHODS, SolverConfig, SparseSignal, solve
from .bench import DEFAULT_C_GRID, emit_report, run_benchmark
from .instances import DICT_KINDS, SIGNAL_KINDS, VALUE_DISTS, InstanceSpec, gen_instance
from .io import load_csv_matrix, load_csv_vector, save_csv_matrix, save_csv_vector

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERICAL = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _int_list(text):
    """``"1..5"``, ``"1,2,7"`` or a mix like ``"1..3,9"``."""
    out = []
    try:
        for part in text.split(","):
            part = part.strip()
            if ".." in part:
                lo, hi = part.split("..")
                out.extend(range(int(lo), int(hi) + 1))
            elif part:
                out.append(int(part))
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer list: {text!r}") from None
    if not out:
        raise argparse.ArgumentTypeError("empty integer list")
    return out


def _methods(text):
    ms = [m.strip() for m in text.split(",") if m.strip()]
    bad = [m for m in ms if m not in METHODS]
    if bad or not ms:
        raise argparse.ArgumentTypeError(f"unknown method(s) {bad}; choose from {', '.join(METHODS)}")
    return ms


def _add_instance_flags(p, defaults):
    p.add_argument("--N", type=int, default=defaults[0], help="measurements (rows)")
    p.add_argument("--d", type=int, default=defaults[1], help="atoms (columns)")
    p.add_argument("--k", type=int, default=defaults[2], help="sparsity")
    p.add_argument("--noise", type=float, default=0.0, help="exact l2 norm of the additive noise")
    p.add_argument("--value-dist", choices=VALUE_DISTS, default="gaussian")
    p.add_argument("--dict-kind", choices=DICT_KINDS, default="gaussian_normalized")
    p.add_argument("--signal-kind", choices=SIGNAL_KINDS, default="random")
    p.add_argument("--dict-file", help="CSV dictionary for --dict-kind from_file")


def _spec_from_args(a, seed, c=1):
    return InstanceSpec(N=a.N, d=a.d, k=a.k, c=c, noise_l2=a.noise, seed=seed,
                        value_dist=a.value_dist, dict_kind=a.dict_kind,
                        signal_kind=a.signal_kind, dict_path=a.dict_file)


def build_parser():
    p = _Parser(prog="fastomp", description="Greedy sparse recovery workbench")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    g = sub.add_parser("gen", help="write a synthetic instance to CSV files")
    _add_instance_flags(g, (64, 256, 8))
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out-dir", default=".", help="directory for dict.csv, y.csv, x.csv")

    r = sub.add_parser("recover", help="run one solver on files")
    r.add_argument("--dict", required=True, help="CSV dictionary (columns are normalized)")
    r.add_argument("--signal", required=True, help="CSV measurement vector y")
    r.add_argument("--method", choices=METHODS, default="omp_sr")
    r.add_argument("--k", type=int, help="sparsity budget; sets --max-iter to ceil(k/c)")
    r.add_argument("--c", type=int, default=1, help="block size for gomp/bsr")
    r.add_argument("--delta", type=float, help="absolute residual threshold (default 1e-9 ||y||)")
    r.add_argument("--max-iter", type=int, help="iteration budget (default min(N, d))")
    r.add_argument("--ones-regressor", action="store_true", help="include z0 = 1 in the orthogonalization")
    r.add_argument("--truth", help="CSV true coefficients; reports NMSE")
    r.add_argument("--out", help="write recovered coefficients here")

    b = sub.add_parser("bench", help="benchmark solvers over seeded instances")
    b.add_argument("--spec", help="JSON file with one instance spec or a list of them")
    _add_instance_flags(b, (64, 256, 8))
    b.add_argument("--methods", type=_methods, default=["omp_naive", "omp_sr"])
    b.add_argument("--c-grid", type=_int_list, default=list(DEFAULT_C_GRID))
    b.add_argument("--seeds", type=_int_list, default=[0])
    b.add_argument("--oracle-stop", action="store_true", help="run until the true support is found")
    b.add_argument("--max-iter", type=int)
    b.add_argument("--delta", type=float)
    b.add_argument("--jobs", type=int, default=1, help="parallel cells; keep 1 for clean timings")
    b.add_argument("--report", default="-", help="output path ('-' for stdout)")
    b.add_argument("--format", choices=("csv", "pretty"), default="csv")

    dg = sub.add_parser("diagnose", help="recovery-condition traces on small instances")
    _add_instance_flags(dg, (16, 24, 3))
    dg.add_argument("--c", type=int, default=1)
    dg.add_argument("--seed", type=int, default=0)
    dg.add_argument("--variant", choices=("pairs", "maxima"), default="pairs")
    dg.add_argument("--trace-out", help="CSV file for per-iteration records")
    return p


def cmd_gen(a):
    inst = gen_instance(_spec_from_args(a, a.seed))
    os.makedirs(a.out_dir, exist_ok=True)
    paths = {name: os.path.join(a.out_dir, f"{name}.csv") for name in ("dict", "y", "x")}
    save_csv_matrix(inst.dictionary.matrix, paths["dict"])
    save_csv_vector(inst.y, paths["y"])
    save_csv_vector(inst.signal.to_dense(), paths["x"])
    mu = coherence(inst.dictionary)
    print(f"wrote {paths['dict']} {paths['y']} {paths['x']}")
    print(f"coherence {mu:.6g}  mu(2k-1) < 1: {check_strong_condition(inst.dictionary, max(a.k, 1))}")
    return EXIT_OK


def _load(path, loader):
    if not os.path.exists(path):
        raise DataError(f"no such file: {path}")
    return loader(path)


def cmd_recover(a):
    D = normalize_columns(_load(a.dict, load_csv_matrix))
    y = _load(a.signal, load_csv_vector)
    if y.shape[0] != D.n_measurements:
        raise DataError(f"{a.signal}: length {y.shape[0]} does not match {D.n_measurements} dictionary rows")
    if a.method not in BLOCKED and a.c != 1:
        raise UsageError(f"--c applies only to {', '.join(BLOCKED)}")
    kappa = a.max_iter
    if kappa is None and a.k is not None:
        kappa = max(1, math.ceil(a.k / a.c))
    cfg = SolverConfig(max_iterations=kappa, residual_threshold=a.delta, block_size=a.c,
                       ones_regressor_mode=a.ones_regressor)
    res = solve(a.method, D, y, cfg)
    x = res.x / D.scales  # back to the raw column scaling
    if a.out:
        save_csv_vector(x, a.out)
    print(f"method {a.method}  iterations {res.iterations_used}  halted_by {res.halted_by}")
    print(f"support {' '.join(str(j) for j in sorted(res.selection_order))}")
    print(f"approx_err {normalized_residual(y, D, res.x) if np.any(y) else 0.0:.6g}")
    if a.truth:
        xt = _load(a.truth, load_csv_vector)
        if xt.shape[0] != D.n_atoms:
            raise DataError(f"{a.truth}: length {xt.shape[0]} does not match {D.n_atoms} atoms")
        print(f"nmse {nmse(SparseSignal.from_dense(xt), x):.6g}")
    return EXIT_OK


def _load_specs(path):
    with open(path) as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as err:
            raise DataError(f"{path}: {err}") from None
    data = data if isinstance(data, list) else [data]
    try:
        return [InstanceSpec(**entry) for entry in data]
    except TypeError as err:
        raise DataError(f"{path}: {err}") from None


def cmd_bench(a):
    if a.spec:
        base = _load(a.spec, _load_specs)
        specs = [s.replace(seed=seed) for s in base for seed in a.seeds] if len(a.seeds) > 1 else base
    else:
        specs = [_spec_from_args(a, seed) for seed in a.seeds]
    rows = run_benchmark(specs, a.methods, a.c_grid, oracle_stop=a.oracle_stop,
                         max_iterations=a.max_iter, delta=a.delta, jobs=a.jobs)
    emit_report(rows, a.report, a.format)
    return EXIT_OK


TRACE_FIELDS = ("iteration", "rho", "rho_c", "n_optimal_selected", "n_nonoptimal_selected",
                "l", "n", "mu1_sum", "lemma1", "block_optimal")


def cmd_diagnose(a):
    inst = gen_instance(_spec_from_args(a, a.seed, a.c))
    cfg = SolverConfig(max_iterations=max(1, math.ceil(a.k / a.c)) if a.noise else None, block_size=a.c)
    trace = trace_conditions(inst.dictionary, inst.y, inst.signal, cfg, variant=a.variant)
    print(f"coherence {trace.mu:.6g}  mu(2k-1) < 1: {check_strong_condition(inst.dictionary, max(a.k, 1))}")
    print(f"iterations {trace.iterations}  recovered {trace.recovered()}")
    for rec in trace.records:
        print(f"  t={rec.iteration} rho={rec.rho:.4g} rho_c={_opt(rec.rho_c)} "
              f"l={rec.l} n={rec.n} mu1(l)+mu1(n)={_opt(rec.mu1_sum)} lemma1={_opt(rec.lemma1)} "
              f"picked_optimal={rec.block_optimal}/{len(rec.block)}")
    if a.trace_out:
        with open(a.trace_out, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(TRACE_FIELDS)
            for rec in trace.records:
                w.writerow(["" if getattr(rec, f) is None else _fmt_val(getattr(rec, f)) for f in TRACE_FIELDS])
    return EXIT_OK


def _opt(v):
    return "NA" if v is None else f"{v:.4g}"


def _fmt_val(v):
    return str(v) if isinstance(v, int) else format(v, ".6g")


COMMANDS = {"gen": cmd_gen, "recover": cmd_recover, "bench": cmd_bench, "diagnose": cmd_diagnose}


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except (UsageError, ParameterError) as err:
        print(f"fastomp: error: {err}", file=sys.stderr)
        return EXIT_USAGE
    except (DataError, OSError) as err:
        print(f"fastomp: data error: {err}", file=sys.stderr)
        return EXIT_DATA
    except NumericalError as err:
        print(f"fastomp: numerical error: {err}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
