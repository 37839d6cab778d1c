"""Experiment execution, trace persistence and reporting.

Every (solver, seed index) cell gets its own PCG64 stream seeded from
``SeedSequence([base_seed, crc32(solver), seed_index])``, so a cell's trace
does not depend on which other cells run or in what order. Cells may run in
a process pool; the parent process is the only writer.
"""
import csv
import io
import json
import math
import sys
import zlib
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import acceptance
from . import diagnostics as diag
from .config import load_config
from .errors import CapabilityError, ConfigError, InvalidInputError, OneSFWError
from .solvers import TRACE_FIELDS, Mode, run

TRACE_HEADER = ("run_id", "solver", "seed") + TRACE_FIELDS
TRACE_SCHEMA_VERSION = 1
_INT_FIELDS = {"t", "queries"}
_METRICS = ("subopt", "fw_gap", "grad_err_sq")


def cell_rng(base_seed, solver, seed_index):
    """Independent generator for one (solver, seed index) cell."""
    ss = np.random.SeedSequence([int(base_seed), zlib.crc32(solver.encode("utf-8")), int(seed_index)])
    return np.random.Generator(np.random.PCG64(ss))


def format_float(v):
    """Shortest round-trip decimal, empty for absent (NaN) values."""
    v = float(v)
    return "" if math.isnan(v) else repr(v)


def _format_cell(name, v):
    if name in _INT_FIELDS:
        return "" if math.isnan(v) else str(int(v))
    return format_float(v)


@dataclass
class CellResult:
    solver: str
    seed_index: int
    columns: dict
    final: dict
    queries: int

    @property
    def run_id(self):
        return f"{self.solver}-s{self.seed_index:04d}"


def _reference_value(oracle, K, mode):
    try:
        return diag.brute_force_opt(oracle, K, mode).value
    except (CapabilityError, InvalidInputError, NotImplementedError):
        return None


def _final_metrics(oracle, K, cfg, res, f_star):
    out = {"F": math.nan, "subopt": math.nan, "fw_gap": math.nan}
    if not oracle.caps.has_exact_expectation:
        return out
    # the non-convex guarantee is stated for the randomly drawn output point
    point = res.x_o if cfg.mode is Mode.NONCONVEX_MIN else res.x_final
    out["F"] = oracle.exact_value(point)
    if f_star is not None:
        out["subopt"] = out["F"] - f_star if cfg.mode.sense == "minimize" else f_star - out["F"]
    out["fw_gap"] = diag.fw_gap(oracle.exact_grad, K, point, cfg.mode.sense)
    return out


def _run_cell(job):
    oracle, K, cfg, solver, seed_index, base_seed, f_star = job
    cfg.seed = cell_rng(base_seed, solver, seed_index)
    cfg.f_star = f_star
    res = run(solver, oracle, K, cfg)
    final = _final_metrics(oracle, K, cfg, res, f_star)
    return CellResult(solver, seed_index, res.trace.columns, final, res.oracle_queries)


def trace_csv(cell):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(TRACE_HEADER)
    cols = cell.columns
    for i in range(len(cols["t"])):
        w.writerow([cell.run_id, cell.solver, cell.seed_index]
                   + [_format_cell(name, cols[name][i]) for name in TRACE_FIELDS])
    return buf.getvalue()


def _mean_se(values):
    v = np.asarray([x for x in values if not math.isnan(x)], dtype=float)
    if v.size == 0:
        return math.nan, math.nan
    se = float(v.std(ddof=1) / math.sqrt(v.size)) if v.size > 1 else 0.0
    return float(v.mean()), se


SUMMARY_HEADER = ("solver", "runs", "T", "F_mean", "F_se", "subopt_mean", "subopt_se",
                  "fw_gap_mean", "fw_gap_se", "queries_mean")


def summarize(cells, T):
    rows = []
    for solver in dict.fromkeys(c.solver for c in cells):
        group = [c for c in cells if c.solver == solver]
        row = {"solver": solver, "runs": len(group), "T": T}
        for key in ("F", "subopt", "fw_gap"):
            row[f"{key}_mean"], row[f"{key}_se"] = _mean_se([c.final[key] for c in group])
        row["queries_mean"] = float(np.mean([c.queries for c in group]))
        rows.append(row)
    return rows


def _table_text(header, rows, title):
    cells = [[str(h) for h in header]]
    for r in rows:
        cells.append([_text_value(r[h]) for h in header])
    widths = [max(len(row[i]) for row in cells) for i in range(len(header))]
    lines = [title, ""]
    for k, row in enumerate(cells):
        lines.append("  ".join(v.rjust(w) for v, w in zip(row, widths)))
        if k == 0:
            lines.append("  ".join("-" * w for w in widths))
    return "\n".join(lines) + "\n"


def _text_value(v):
    if isinstance(v, float):
        return "absent" if math.isnan(v) else f"{v:.6g}"
    return str(v)


def _csv_rows(header, rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([format_float(r[h]) if isinstance(r[h], float) else r[h] for h in header])
    return buf.getvalue()


def _json_safe(v):
    if isinstance(v, float) and math.isnan(v):
        return None
    if isinstance(v, np.ndarray):
        return [_json_safe(float(x)) for x in v]
    return v


def execute(cfg_file, workers=1, out=None):
    """Run every cell of a config; returns ``(output directory, cells, summary rows)``."""
    config = load_config(cfg_file)
    oracle, K = config.validate()
    solvers, seeds, base = config.algorithms, config.seed_indices, config.base_seed
    formats = config.formats
    out_dir = Path(out if out is not None else config.directory)
    probe = config.solver_config(0)
    f_star = None
    if config.solver.get("reference_opt", True) and probe.mode is not Mode.NONCONVEX_MIN:
        f_star = _reference_value(oracle, K, probe.mode)
    jobs = [(oracle, K, config.solver_config(0), s, k, base, f_star) for s in solvers for k in seeds]
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            cells = list(pool.map(_run_cell, jobs))
    else:
        cells = [_run_cell(job) for job in jobs]

    traces = out_dir / "traces"
    traces.mkdir(parents=True, exist_ok=True)
    for cell in cells:
        (traces / f"{cell.run_id}.csv").write_text(trace_csv(cell), encoding="utf-8")
        if "json" in formats:
            payload = {"run_id": cell.run_id, "solver": cell.solver, "seed": cell.seed_index,
                       "schema_version": TRACE_SCHEMA_VERSION,
                       "trace": {k: _json_safe(v) for k, v in cell.columns.items()},
                       "final": {k: _json_safe(v) for k, v in cell.final.items()}}
            (traces / f"{cell.run_id}.json").write_text(json.dumps(payload), encoding="utf-8")
    rows = summarize(cells, probe.T)
    (out_dir / "summary.csv").write_text(_csv_rows(SUMMARY_HEADER, rows), encoding="utf-8")
    title = f"{oracle.name} over {type(K).__name__}, mode {probe.mode.value}, {len(seeds)} seeds"
    (out_dir / "summary.txt").write_text(_table_text(SUMMARY_HEADER, rows, title), encoding="utf-8")
    if "json" in formats:
        safe = [{k: _json_safe(v) for k, v in r.items()} for r in rows]
        (out_dir / "summary.json").write_text(json.dumps(safe, indent=2), encoding="utf-8")
    return out_dir, cells, rows


def cmd_run(cfg_file, workers=1, out=None):
    try:
        out_dir, cells, _ = execute(cfg_file, workers, out)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except OneSFWError as exc:
        print(f"run failed: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return 3
    print((out_dir / "summary.txt").read_text(encoding="utf-8"), end="")
    print(f"wrote {len(cells)} traces to {out_dir / 'traces'}")
    return 0


def cmd_verify(suite, out=None):
    if suite not in acceptance.SUITES:
        print(f"unknown suite {suite!r}; choose from {', '.join(acceptance.SUITES)}", file=sys.stderr)
        return 2
    lines = []

    def report(result):
        line = acceptance.format_result(result)
        lines.append(line)
        print(line, flush=True)

    results = acceptance.run_suite(suite, report)
    passed = sum(r.passed for r in results)
    tail = f"{passed}/{len(results)} criteria passed"
    print(tail)
    if out is not None:
        path = Path(out)
        path.mkdir(parents=True, exist_ok=True)
        (path / f"verify_{suite}.txt").write_text("\n".join(lines + [tail]) + "\n", encoding="utf-8")
    return 0 if passed == len(results) else 1


# --- report -------------------------------------------------------------------


REPORT_HEADER = ("solver", "runs", "T", "subopt_slope", "fw_gap_slope", "grad_err_sq_slope",
                 "final_subopt", "final_fw_gap", "final_grad_err_sq", "queries_mean")


def _read_traces(directory):
    runs = {}
    for path in sorted(Path(directory).rglob("*.csv")):
        with path.open(newline="", encoding="utf-8") as fh:
            reader = csv.reader(fh)
            header = next(reader, None)
            if tuple(header or ()) != TRACE_HEADER:
                continue
            rows = list(reader)
        if not rows:
            continue
        cols = {name: np.array([float(r[i]) if r[i] != "" else math.nan for r in rows])
                for i, name in enumerate(TRACE_HEADER) if name in TRACE_FIELDS}
        runs[rows[0][0]] = (rows[0][1], cols)
    return runs


def _slope(mean_series, t):
    keep = ~np.isnan(mean_series) & (mean_series > 0) & (t >= min(10.0, t.max() / 10.0))
    if keep.sum() < 2:
        return math.nan
    return diag.rate_fit(mean_series[keep], t=t[keep]).slope


def aggregate(runs):
    rows = []
    for solver in sorted({s for s, _ in runs.values()}):
        group = [cols for s, cols in runs.values() if s == solver]
        T = min(len(c["t"]) for c in group)
        t = group[0]["t"][:T]
        row = {"solver": solver, "runs": len(group), "T": T}
        for metric in _METRICS:
            stack = np.array([c[metric][:T] for c in group])
            if np.all(np.isnan(stack)):
                row[f"{metric}_slope"] = row[f"final_{metric}"] = math.nan
                continue
            mean = np.nanmean(stack, axis=0)
            row[f"{metric}_slope"] = _slope(mean, t)
            row[f"final_{metric}"] = float(mean[-1])
        row["queries_mean"] = float(np.mean([c["queries"][T - 1] for c in group]))
        rows.append(row)
    return rows


def cmd_report(directory, out=None):
    directory = Path(directory)
    if not directory.is_dir():
        print(f"not a directory: {directory}", file=sys.stderr)
        return 2
    runs = _read_traces(directory)
    if not runs:
        print(f"no trace files under {directory}", file=sys.stderr)
        return 1
    rows = aggregate(runs)
    text = _table_text(REPORT_HEADER, rows, f"{len(runs)} traces from {directory}")
    target = Path(out) if out is not None else directory
    try:
        target.mkdir(parents=True, exist_ok=True)
        (target / "report.csv").write_text(_csv_rows(REPORT_HEADER, rows), encoding="utf-8")
        (target / "report.txt").write_text(text, encoding="utf-8")
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return 3
    print(text, end="")
    return 0
