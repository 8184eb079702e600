"""Instance generation, data ingestion, benchmarking and the CLI."""

from .bench import BenchReportRow, emit_report, run_benchmark
from .instances import Instance, InstanceSpec, gen_instance
from .io import load_csv_matrix, load_csv_vector, load_pgm, save_csv_matrix, save_csv_vector, save_pgm

__all__ = [
    "BenchReportRow",
    "Instance",
    "InstanceSpec",
    "emit_report",
    "gen_instance",
    "load_csv_matrix",
    "load_csv_vector",
    "load_pgm",
    "run_benchmark",
    "save_csv_matrix",
    "save_csv_vector",
    "save_pgm",
]
