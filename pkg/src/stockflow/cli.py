"""Command-line interface: ``stockflow run|calibrate|compare|stats|plot``."""
from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .calibrate import (
    CalibrationError,
    StatsError,
    calibrate_price_law,
    descriptive_stats,
    fit_rows,
    stats_table_rows,
    table_one,
)
from .errors import ModelError, StockflowError
from .integrate import IntegratorKind, simulate
from .modelfmt import ScenarioDoc
from .oilmarket import data_path
from .scenario import apply_scenario, load_model, load_scenario
from .sdcore import TimeGrid
from .series import TimeSeries
from .svgplot import line_chart
from .tables import (
    QUARTER_LABEL,
    SCHEMAS,
    CsvError,
    compare_series,
    day_offsets,
    ingest_csv,
    read_table,
    write_rows,
    write_trajectory,
)

DATA_DIR_ENV = "STOCKFLOW_DATA_DIR"


class CliError(Exception):
    pass


def _emit(text: str, out: str | None) -> None:
    if out is None:
        sys.stdout.write(text)
    else:
        Path(out).write_text(text, encoding="utf-8")


def _constant_overrides(items) -> dict[str, float]:
    values = {}
    for item in items or ():
        name, sep, value = item.partition("=")
        if not sep:
            raise CliError(f"--set expects NAME=VALUE, got {item!r}")
        try:
            values[name.strip()] = float(value)
        except ValueError:
            raise CliError(f"--set {name.strip()}: {value!r} is not a number") from None
    return values


def _input(path: str) -> Path:
    """A local path, or the bundled fixture of that name if no such file exists."""
    local = Path(path)
    if not local.exists() and local.name == path and data_path(path).is_file():
        return data_path(path)
    return local


def cmd_run(args) -> int:
    if args.scenario:
        model, doc = load_scenario(_input(args.scenario))
        if args.model:
            model = load_model(_input(args.model))
    elif args.model:
        model, doc = load_model(_input(args.model)), ScenarioDoc()
    else:
        raise CliError("run needs a model file or --scenario")
    overrides = _constant_overrides(args.set)
    if args.calibration:
        fit = calibrate_price_law(ingest_csv(_input(args.calibration), "quarterly-sdp")).per_day()
        if not {"alpha1", "beta1"} <= set(model.constant_values):
            raise CliError("--calibration needs constants alpha1 and beta1 in the model")
        overrides = {"alpha1": fit.alpha, "beta1": fit.beta, **overrides}
    if overrides:
        model = model.with_constants(overrides)
    model, grid, events = apply_scenario(model, doc, horizon=args.horizon, dt_internal=args.dt, t0=args.t0)
    if args.vars:
        names = [v.strip() for v in args.vars.split(",") if v.strip()]
    else:
        consts = set(model.constant_values)
        names = [n for n in model.variable_names if n not in consts]
    traj = simulate(model, grid, IntegratorKind(args.integrator), names, events)
    _emit(write_trajectory(traj, names), args.out)
    return 0


def _report_text(blocks) -> str:
    return "\n".join(write_rows(rows) for rows in blocks)


def cmd_calibrate(args) -> int:
    data = ingest_csv(_input(args.csv), "quarterly-sdp")
    fit = calibrate_price_law(data)
    daily = fit.per_day()
    rows = fit_rows(fit)
    rows += [["beta1_per_day", repr(daily.beta)], ["alpha1_per_day", repr(daily.alpha)]]
    _emit(_report_text([rows, stats_table_rows(table_one(data))]), args.out)
    return 0


def _time_axis(table, what: str):
    """(times, label) from the first column, converting ISO dates to day offsets."""
    first = table.header[0]
    col = table.columns[first]
    if isinstance(col, tuple):
        if QUARTER_LABEL.match(col[0]):
            return np.arange(len(col), dtype=np.float64), f"quarters since {col[0]}"
        offsets = day_offsets(TimeSeries(first, np.zeros(len(col)), labels=col))
        return offsets, f"days since {col[0]}"
    if np.any(np.diff(col) <= 0):
        raise CsvError(f"{what}: first column '{first}' must increase strictly")
    return col, first


def _pick(table, name: str | None, what: str) -> str:
    if name is None:
        if len(table.header) < 2:
            raise CsvError(f"{what}: needs a value column after the time column")
        return table.header[1]
    if name not in table.columns:
        raise CsvError(f"{what}: no column '{name}' (have {', '.join(table.header)})")
    return name


def cmd_compare(args) -> int:
    sim = read_table(args.sim)
    ref = read_table(args.ref)
    sim_t, _ = _time_axis(sim, args.sim)
    ref_t, _ = _time_axis(ref, args.ref)
    if isinstance(ref.columns[ref.header[0]], tuple):
        ref_t = ref_t + (sim_t[0] if args.ref_t0 is None else args.ref_t0)
    elif args.ref_t0 is not None:
        ref_t = ref_t - ref_t[0] + args.ref_t0
    sim_col = _pick(sim, args.column, args.sim)
    ref_col = _pick(ref, args.ref_column, args.ref)
    report = compare_series(sim_t, sim.numeric(sim_col), ref_t, ref.numeric(ref_col))
    _emit(write_rows(report.rows()), args.out)
    print(report.summary(), file=sys.stderr if args.out is None else sys.stdout)
    return 0


def cmd_stats(args) -> int:
    header = read_table(args.csv).header
    if [h.lower() for h in header[:4]] == list(SCHEMAS["quarterly-sdp"]) and not args.columns:
        columns = table_one(ingest_csv(args.csv, "quarterly-sdp"))
    else:
        table = read_table(args.csv)
        names = _columns_arg(args.columns) or [h for h in table.header[1:]]
        columns = {}
        for name in names:
            if name not in table.columns:
                raise CsvError(f"{args.csv}: no column '{name}'")
            columns[name] = descriptive_stats(table.numeric(name))
    _emit(write_rows(stats_table_rows(columns)), args.out)
    for name, row in columns.items():
        for field, why in row.undefined.items():
            print(f"warning: {name}: {field} undefined ({why})", file=sys.stderr)
    return 0


def _columns_arg(text: str | None) -> list[str]:
    return [c.strip() for c in text.split(",") if c.strip()] if text else []


def cmd_plot(args) -> int:
    table = read_table(args.csv)
    x, x_label = _time_axis(table, args.csv)
    names = _columns_arg(args.columns) or list(table.header[1:])
    for name in names:
        if name not in table.columns or name == table.header[0]:
            raise CsvError(f"{args.csv}: no value column '{name}' (have {', '.join(table.header[1:])})")
    svg = line_chart(x, {n: table.numeric(n) for n in names}, args.title or "", x_label, args.y_label or "")
    _emit(svg, args.out)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="stockflow",
        description="Stock-and-flow simulation, calibration and comparison tools.",
        epilog=f"The optional historical dataset directory is read from ${DATA_DIR_ENV}.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")

    p = sub.add_parser("run", help="simulate a model, optionally with a scenario overlay",
                       description="Simulate and write a CSV t,<var1>,<var2>,... at internal-step resolution.")
    p.add_argument("model", nargs="?", help="model file (.sfm); defaults to the scenario's model")
    p.add_argument("--scenario", help="scenario overlay (.sfs); bare names fall back to the bundled fixtures")
    p.add_argument("--integrator", choices=[k.value for k in IntegratorKind], default="rk4")
    p.add_argument("--dt", type=float, default=None, metavar="DAYS",
                   help=f"internal step (default {TimeGrid.__dataclass_fields__['dt_internal'].default})")
    p.add_argument("--horizon", type=float, help="simulated duration; overrides the scenario")
    p.add_argument("--t0", type=float, help="start time; overrides the scenario")
    p.add_argument("--set", action="append", metavar="NAME=VALUE", help="override a constant (repeatable)")
    p.add_argument("--calibration", metavar="CSV",
                   help="quarterly CSV; fit the price law and use it for alpha1/beta1 (per day)")
    p.add_argument("--vars", help="comma-separated variables to write (default: all but constants)")
    p.add_argument("--out", help="output CSV (default stdout)")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("calibrate", help="fit the price law to quarterly data",
                       description="Fit PCR = alpha1 * supply/demand + beta1 by least squares and report "
                                   "the coefficients with descriptive statistics of every column.")
    p.add_argument("csv", help="quarterly CSV: quarter,demand,supply,price")
    p.add_argument("--out", help="report file (default stdout)")
    p.set_defaults(func=cmd_calibrate)

    p = sub.add_parser("compare", help="compare a simulated trajectory with reference data",
                       description="The reference is resampled onto the simulation grid by nearest-preceding "
                                   "(step) interpolation: each simulated time takes the latest reference sample "
                                   "at or before it, as daily closes hold between trading days. Dated reference "
                                   "rows are placed at day offsets from --ref-t0 (default: the simulation start).")
    p.add_argument("sim", help="simulation CSV (first column t)")
    p.add_argument("ref", help="reference CSV (first column t or ISO date)")
    p.add_argument("--column", help="simulated column (default: second column)")
    p.add_argument("--ref-column", help="reference column (default: second column)")
    p.add_argument("--ref-t0", type=float, help="simulation time of the first reference row")
    p.add_argument("--out", help="report CSV (default stdout)")
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("stats", help="descriptive statistics of CSV columns",
                       description="Rows Min, Max, Mean, Median, STD, Kurtosis (excess), Skewness; one column "
                                   "per input column. Quarterly files get demand, supply, ratio, price and PCR.")
    p.add_argument("csv")
    p.add_argument("--columns", help="comma-separated columns (default: all after the first)")
    p.add_argument("--out", help="output CSV (default stdout)")
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("plot", help="SVG line chart of CSV columns against the first column")
    p.add_argument("csv")
    p.add_argument("--columns", help="comma-separated columns (default: all after the first)")
    p.add_argument("--title")
    p.add_argument("--y-label")
    p.add_argument("--out", help="output SVG (default stdout)")
    p.set_defaults(func=cmd_plot)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ModelError as exc:
        for d in exc.diagnostics:
            print(d, file=sys.stderr)
    except (StockflowError, CsvError, CalibrationError, StatsError, CliError, KeyError, ValueError) as exc:
        msg = exc.args[0] if isinstance(exc, KeyError) and exc.args else exc
        print(f"stockflow: error: {msg}", file=sys.stderr)
    except OSError as exc:
        print(f"stockflow: error: {exc.strerror}: {exc.filename}", file=sys.stderr)
    return 1


if __name__ == "__main__":
    sys.exit(main())
