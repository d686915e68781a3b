"""Command-line client for the pipeline service.

Every subcommand is a thin wrapper over one or two service routes: it loads
file inputs, posts JSON, and writes the returned artifacts. By default the
service runs in-process; --server-url switches to a remote instance. Exit
codes: 0 success, 2 data error, 3 calibration failure, 4 usage.

Artifacts that feed back into the pipeline (chains, models, recovery payloads)
are written as full-precision JSON so a reload is exact. Human-facing tables
(CSV or JSON per --format) carry 10 significant digits.
"""

from __future__ import annotations

import csv
import json
import sys
from pathlib import Path
from typing import List, Optional, Sequence

import click

EXIT_CODES = {"data": 2, "calibration": 3, "usage": 4}
SIG_DIGITS = 10


def fmt(value) -> str:
    """One table cell: floats at 10 significant digits, None as empty."""
    if value is None:
        return ""
    if isinstance(value, bool):
        return str(value)
    if isinstance(value, float):
        return format(value, f".{SIG_DIGITS}g")
    return str(value)


def round_floats(obj):
    """Copy of a JSON-ready structure with floats cut to 10 significant digits."""
    if isinstance(obj, float):
        return float(format(obj, f".{SIG_DIGITS}g"))
    if isinstance(obj, dict):
        return {k: round_floats(v) for k, v in obj.items()}
    if isinstance(obj, list):
        return [round_floats(v) for v in obj]
    return obj


class ServiceClient:
    """POSTs to the in-process app or a remote server, mapping errors to exits."""

    def __init__(self, server_url: Optional[str] = None):
        if server_url:
            import httpx

            self._client = httpx.Client(base_url=server_url, timeout=600.0)
        else:
            import warnings

            with warnings.catch_warnings():
                # the installed fastapi emits a deprecation notice on import
                warnings.simplefilter("ignore")
                from fastapi.testclient import TestClient

            from .service import create_app

            self._client = TestClient(create_app(), raise_server_exceptions=False)

    def post(self, path: str, payload: dict) -> dict:
        response = self._client.post(path, json=payload)
        if response.status_code == 200:
            return response.json()
        if response.status_code == 422:
            detail = response.json().get("detail")
            if isinstance(detail, dict) and "kind" in detail:
                kind, message = detail["kind"], detail["message"]
            else:
                kind, message = "usage", json.dumps(detail)
            click.echo(f"{kind} error: {message}", err=True)
            sys.exit(EXIT_CODES.get(kind, 4))
        click.echo(f"service error {response.status_code}: {response.text}", err=True)
        sys.exit(1)


def load_json(path: Path) -> dict:
    try:
        with open(path) as handle:
            return json.load(handle)
    except (OSError, json.JSONDecodeError) as exc:
        click.echo(f"data error: cannot read {path}: {exc}", err=True)
        sys.exit(EXIT_CODES["data"])


def write_json(path: Path, obj) -> None:
    with open(path, "w") as handle:
        json.dump(obj, handle, indent=2)
        handle.write("\n")


def write_table(path: Path, rows: List[dict], columns: Sequence[str], fmt_json: bool) -> None:
    if fmt_json:
        write_json(path, [round_floats({c: r.get(c) for c in columns}) for r in rows])
        return
    with open(path, "w", newline="") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(columns)
        for row in rows:
            writer.writerow([fmt(row.get(c)) for c in columns])


def collect_inputs(inputs: Sequence[str]) -> List[Path]:
    """Expand chain inputs; a directory contributes its chain_*.json files."""
    paths: List[Path] = []
    for item in inputs:
        p = Path(item)
        if p.is_dir():
            paths.extend(sorted(p.glob("chain_*.json")))
        else:
            paths.append(p)
    if not paths:
        raise click.UsageError("no input files found")
    return paths


def resolve_degree(degree: Optional[int], cv: bool) -> Optional[int]:
    if degree is not None and cv:
        raise click.UsageError("--degree and --cv are mutually exclusive")
    return degree


def fit_config(seed, max_evaluations, restarts, max_rel_rms) -> Optional[dict]:
    config = {}
    if seed is not None:
        config["seed"] = seed
    if max_evaluations is not None:
        config["max_evaluations"] = max_evaluations
    if restarts is not None:
        config["restarts"] = restarts
    if max_rel_rms is not None:
        config["max_rel_rms"] = max_rel_rms
    return config or None


def out_path(out_dir: str, name: str) -> Path:
    directory = Path(out_dir)
    directory.mkdir(parents=True, exist_ok=True)
    return directory / name


def table_name(stem: str, fmt_json: bool) -> str:
    return f"{stem}.json" if fmt_json else f"{stem}.csv"


format_option = click.option(
    "--format", "output_format", type=click.Choice(["csv", "json"]), default="csv",
    show_default=True, help="Table artifact format.",
)
out_dir_option = click.option(
    "--out-dir", default=".", show_default=True, help="Directory for written artifacts."
)


@click.group()
@click.option("--server-url", default=None, help="Remote service URL; in-process when omitted.")
@click.version_option(package_name="cmmv", prog_name="cmmv")
@click.pass_context
def cli(ctx, server_url):
    """Calibration and pricing toolkit for increasing heat-kernel martingales."""
    ctx.obj = {"server_url": server_url}


def client_of(ctx) -> ServiceClient:
    return ServiceClient(ctx.obj["server_url"])


@cli.command()
@click.option("--input", "input_path", required=True, type=click.Path(), help="Quote CSV file.")
@click.option("--quote-date", default=None, help="Keep only this quote date (ISO).")
@click.option("--expiry", default=None, help="Keep only this expiry (ISO).")
@click.option("--min-volume", default=1, show_default=True, type=int)
@out_dir_option
@format_option
@click.pass_context
def ingest(ctx, input_path, quote_date, expiry, min_volume, out_dir, output_format):
    """Parse a quote CSV into per-(date, expiry) chain artifacts."""
    try:
        text = Path(input_path).read_text()
    except OSError as exc:
        click.echo(f"data error: cannot read {input_path}: {exc}", err=True)
        sys.exit(EXIT_CODES["data"])
    payload = {"csv": text, "min_volume": min_volume}
    if quote_date:
        payload["quote_date"] = quote_date
    if expiry:
        payload["expiry"] = expiry
    body = client_of(ctx).post("/chains/ingest", payload)
    written = []
    for chain in body["chains"]:
        name = f"chain_{chain['quote_date']}_{chain['expiry']}.json"
        write_json(out_path(out_dir, name), chain)
        written.append(name)
    rejects_name = table_name("rejects", output_format == "json")
    write_table(
        out_path(out_dir, rejects_name), body["rejects"], ["line_no", "reason"],
        output_format == "json",
    )
    click.echo(f"rows={body['n_rows']} chains={len(written)} rejects={len(body['rejects'])}")
    for name in written:
        click.echo(f"wrote {name}")
    click.echo(f"wrote {rejects_name}")


def echo_calibration(body: dict, model_name: str, report_name: str) -> None:
    report = body["report"]
    click.echo(
        f"method={body['model']['method']} degree={report['degree']} "
        f"rms={fmt(report['residual_rms'])} evaluations={report['evaluations']}"
    )
    for warning in body.get("warnings", []):
        click.echo(f"warning: {warning}")
    click.echo(f"wrote {model_name}")
    click.echo(f"wrote {report_name}")


@cli.command("calibrate-m1")
@click.option("--input", "input_path", required=True, type=click.Path(), help="Chain JSON.")
@click.option("--degree", default=None, type=int, help="Fix the polynomial degree of f'.")
@click.option("--cv", is_flag=True, help="Cross-validate the degree (default when no --degree).")
@click.option("--seed", default=None, type=int)
@click.option("--max-evaluations", default=None, type=int)
@click.option("--restarts", default=None, type=int)
@click.option("--max-rel-rms", default=None, type=float,
              help="Reject the fit when relative residual RMS exceeds this.")
@out_dir_option
@click.pass_context
def calibrate_m1(ctx, input_path, degree, cv, seed, max_evaluations, restarts, max_rel_rms,
                 out_dir):
    """Fit the terminal map from one chain's strike ladder (method M1)."""
    payload = {"chain": load_json(Path(input_path))}
    resolved = resolve_degree(degree, cv)
    if resolved is not None:
        payload["degree"] = resolved
    config = fit_config(seed, max_evaluations, restarts, max_rel_rms)
    if config:
        payload["config"] = config
    body = client_of(ctx).post("/calibrate/m1", payload)
    write_json(out_path(out_dir, "model_m1.json"), body["model"])
    write_json(out_path(out_dir, "report_m1.json"), round_floats(body["report"]))
    echo_calibration(body, "model_m1.json", "report_m1.json")


@cli.command("calibrate-m2")
@click.option("--input", "inputs", required=True, multiple=True, type=click.Path(),
              help="Chain JSON files or directories; repeatable.")
@click.option("--strike", required=True, type=float, help="Strike of the tracked option.")
@click.option("--degree", default=None, type=int)
@click.option("--cv", is_flag=True)
@click.option("--seed", default=None, type=int)
@click.option("--max-evaluations", default=None, type=int)
@click.option("--restarts", default=None, type=int)
@click.option("--max-rel-rms", default=None, type=float,
              help="Reject the fit when relative residual RMS exceeds this.")
@out_dir_option
@click.pass_context
def calibrate_m2(ctx, inputs, strike, degree, cv, seed, max_evaluations, restarts, max_rel_rms,
                 out_dir):
    """Fit the terminal map from one option's time series (method M2)."""
    chains = [load_json(p) for p in collect_inputs(inputs)]
    chains.sort(key=lambda c: (c.get("quote_date", ""), c.get("expiry", "")))
    payload = {"chains": chains, "strike": strike}
    resolved = resolve_degree(degree, cv)
    if resolved is not None:
        payload["degree"] = resolved
    config = fit_config(seed, max_evaluations, restarts, max_rel_rms)
    if config:
        payload["config"] = config
    body = client_of(ctx).post("/calibrate/m2", payload)
    write_json(out_path(out_dir, "model_m2.json"), body["model"])
    write_json(out_path(out_dir, "report_m2.json"), round_floats(body["report"]))
    echo_calibration(body, "model_m2.json", "report_m2.json")


@cli.command("fit-ss")
@click.option("--input", "input_path", required=True, type=click.Path(), help="Chain JSON.")
@click.option("--degree", default=4, show_default=True, type=int)
@out_dir_option
@click.pass_context
def fit_ss(ctx, input_path, degree, out_dir):
    """Fit the Sticky-Strike baseline smile to one chain."""
    body = client_of(ctx).post(
        "/baseline/fit", {"chain": load_json(Path(input_path)), "degree": degree}
    )
    write_json(out_path(out_dir, "model_ss.json"), body["model"])
    skipped = body["skipped_strikes"]
    click.echo(f"method=ss degree={degree} skipped_strikes={len(skipped)}")
    click.echo("wrote model_ss.json")


PREDICT_COLUMNS = [
    "model", "quote_date", "strike", "observed", "predicted", "abs_error", "rel_error", "note",
]


@cli.command()
@click.option("--model", "models", required=True, multiple=True, type=click.Path(),
              help="Model JSON files; repeatable, labeled by file stem.")
@click.option("--input", "inputs", required=True, multiple=True, type=click.Path(),
              help="Chain JSON files or directories; repeatable.")
@out_dir_option
@format_option
@click.pass_context
def predict(ctx, models, inputs, out_dir, output_format):
    """Price every chain under every model and tabulate errors per quote."""
    model_map = {Path(p).stem: load_json(Path(p)) for p in models}
    chains = [load_json(p) for p in collect_inputs(inputs)]
    body = client_of(ctx).post("/predict", {"models": model_map, "chains": chains})
    name = table_name("predictions", output_format == "json")
    write_table(out_path(out_dir, name), body["records"], PREDICT_COLUMNS,
                output_format == "json")
    failed = sum(1 for r in body["records"] if r["predicted"] is None)
    click.echo(f"records={len(body['records'])} failed={failed}")
    click.echo(f"wrote {name}")


def read_records(path: Path) -> List[dict]:
    """Read a predictions table (csv or json) back into record dicts."""
    if path.suffix == ".json":
        return load_json(path)
    try:
        with open(path, newline="") as handle:
            rows = list(csv.DictReader(handle))
    except OSError as exc:
        click.echo(f"data error: cannot read {path}: {exc}", err=True)
        sys.exit(EXIT_CODES["data"])
    records = []
    for row in rows:
        rec = dict(row)
        for key in ("strike", "observed", "predicted", "abs_error", "rel_error"):
            rec[key] = float(row[key]) if row.get(key) else None
        records.append(rec)
    return records


@cli.command()
@click.option("--input", "input_path", required=True, type=click.Path(),
              help="Predictions table from the predict command.")
@click.option("--by", type=click.Choice(["date", "strike"]), default="date", show_default=True)
@click.option("--start", default=None, help="Quote-date window start (ISO), strike mode only.")
@click.option("--end", default=None, help="Quote-date window end (ISO), strike mode only.")
@out_dir_option
@format_option
@click.pass_context
def errors(ctx, input_path, by, start, end, out_dir, output_format):
    """Aggregate prediction errors per quote date or per strike."""
    records = read_records(Path(input_path))
    if by == "date":
        if start or end:
            raise click.UsageError("--start/--end apply only with --by strike")
        body = client_of(ctx).post("/errors/by-date", {"records": records})
        columns = ["model", "quote_date", "n", "n_failed", "mean_abs", "mean_rel"]
    else:
        payload = {"records": records}
        if start:
            payload["start"] = start
        if end:
            payload["end"] = end
        body = client_of(ctx).post("/errors/by-strike", payload)
        columns = ["model", "strike", "n", "n_failed", "mean_abs", "mean_rel"]
    name = table_name(f"errors_by_{by}", output_format == "json")
    write_table(out_path(out_dir, name), body["rows"], columns, output_format == "json")
    click.echo(f"rows={len(body['rows'])}")
    click.echo(f"wrote {name}")


def parse_floats(text: str, option: str) -> List[float]:
    try:
        return [float(part) for part in text.split(",") if part.strip() != ""]
    except ValueError:
        raise click.UsageError(f"{option} expects a comma-separated float list, got {text!r}")


@cli.command()
@click.option("--model", "model_path", required=True, type=click.Path())
@click.option("--maturities", required=True, help="Comma-separated maturities in days.")
@click.option("--strikes", required=True, help="Comma-separated strike grid.")
@click.option("--forward", required=True, type=float, help="Underlying forward at t=0.")
@click.option("--discounts", default=None,
              help="Per-maturity discount factors as tau:df pairs, e.g. 30:0.998,184:0.99.")
@click.option("--input", "inputs", multiple=True, type=click.Path(),
              help="Chains joined as observed vols; repeatable.")
@click.option("--extend-horizon", default=None, type=float,
              help="Re-anchor the terminal map at this horizon for longer maturities.")
@out_dir_option
@format_option
@click.pass_context
def surface(ctx, model_path, maturities, strikes, forward, discounts, inputs, extend_horizon,
            out_dir, output_format):
    """Implied-vol surface over a maturity/strike grid from one calibration."""
    payload = {
        "model": load_json(Path(model_path)),
        "maturities": parse_floats(maturities, "--maturities"),
        "strikes": parse_floats(strikes, "--strikes"),
        "forward": forward,
    }
    if discounts:
        table = {}
        for pair in discounts.split(","):
            tau, _, df = pair.partition(":")
            if not df:
                raise click.UsageError("--discounts expects tau:df pairs")
            table[tau] = float(df)
        payload["discounts"] = table
    if inputs:
        payload["chains"] = [load_json(p) for p in collect_inputs(inputs)]
    if extend_horizon is not None:
        payload["extend_horizon"] = extend_horizon
    body = client_of(ctx).post("/surface", payload)
    name = table_name("surface", output_format == "json")
    write_table(out_path(out_dir, name), body["points"],
                ["strike", "maturity_days", "predicted_vol", "observed_vol"],
                output_format == "json")
    click.echo(f"points={len(body['points'])} dropped={body['dropped']}")
    click.echo(f"wrote {name}")


@cli.command("smile-shift")
@click.option("--input", "input_path", required=True, type=click.Path(), help="Base chain JSON.")
@click.option("--shifts", required=True,
              help="Comma-separated absolute spot shifts in price points, e.g. -100,0,62.")
@click.option("--degree", default=3, show_default=True, type=int)
@click.option("--seed", default=None, type=int)
@click.option("--model", "model_path", default=None, type=click.Path(),
              help="Reuse a fitted model instead of refitting the base chain.")
@out_dir_option
@format_option
@click.pass_context
def smile_shift(ctx, input_path, shifts, degree, seed, model_path, out_dir, output_format):
    """Implied-vol curves under shifted spots, with each curve's minimum."""
    payload = {
        "chain": load_json(Path(input_path)),
        "shifts": parse_floats(shifts, "--shifts"),
        "degree": degree,
    }
    if seed is not None:
        payload["config"] = {"seed": seed}
    if model_path:
        payload["model"] = load_json(Path(model_path))
    body = client_of(ctx).post("/smile-shift", payload)
    curve_rows = [
        {"shift": c["shift"], "strike": k, "vol": v}
        for c in body["curves"]
        for k, v in zip(c["strikes"], c["vols"])
    ]
    curves_name = table_name("smile_shift", output_format == "json")
    write_table(out_path(out_dir, curves_name), curve_rows, ["shift", "strike", "vol"],
                output_format == "json")
    minima_name = table_name("smile_shift_minima", output_format == "json")
    write_table(out_path(out_dir, minima_name), body["curves"],
                ["shift", "forward", "min_strike", "dropped", "error"],
                output_format == "json")
    for c in body["curves"]:
        status = f"min_strike={fmt(c['min_strike'])}" if c["error"] is None else f"error={c['error']}"
        click.echo(f"shift={fmt(c['shift'])} forward={fmt(c['forward'])} {status}")
    click.echo(f"wrote {curves_name}")
    click.echo(f"wrote {minima_name}")


@cli.command()
@click.option("--model", "model_path", required=True, type=click.Path())
@click.option("--n-steps", required=True, type=int)
@click.option("--horizon", required=True, type=float,
              help="Last observation time in days, strictly before expiry.")
@click.option("--n-paths", default=1, show_default=True, type=int)
@click.option("--seed", default=0, show_default=True, type=int)
@out_dir_option
@click.pass_context
def simulate(ctx, model_path, n_steps, horizon, n_paths, seed, out_dir):
    """Simulated (t, B, S) paths, one CSV per path."""
    body = client_of(ctx).post(
        "/simulate",
        {"model": load_json(Path(model_path)), "n_steps": n_steps, "horizon": horizon,
         "n_paths": n_paths, "seed": seed},
    )
    for k, path in enumerate(body["paths"]):
        rows = [
            {"t": t, "B": b, "S": s}
            for t, b, s in zip(body["times"], path["brownian"], path["price"])
        ]
        name = f"path_{k:03d}.csv"
        write_table(out_path(out_dir, name), rows, ["t", "B", "S"], fmt_json=False)
        click.echo(f"wrote {name}")
    click.echo(f"paths={n_paths} steps={n_steps} seed={seed}")


@cli.command()
@click.option("--input", "input_path", required=True, type=click.Path(),
              help="Path CSV with t,B,S columns.")
@click.option("--horizon", required=True, type=float, help="Model horizon in days.")
@click.option("--n-max", default=4, show_default=True, type=int)
@click.option("--s1-window", default=None, type=int)
@click.option("--head-fraction", default=0.02, show_default=True, type=float)
@out_dir_option
@click.pass_context
def recover(ctx, input_path, horizon, n_max, s1_window, head_fraction, out_dir):
    """Recover the map's derivatives at the origin from one observed path."""
    try:
        with open(input_path, newline="") as handle:
            rows = list(csv.DictReader(handle))
    except OSError as exc:
        click.echo(f"data error: cannot read {input_path}: {exc}", err=True)
        sys.exit(EXIT_CODES["data"])
    if not rows or not {"t", "S"} <= set(rows[0]):
        click.echo("data error: path file needs t,B,S columns", err=True)
        sys.exit(EXIT_CODES["data"])
    payload = {
        "times": [float(r["t"]) for r in rows],
        "price": [float(r["S"]) for r in rows],
        "horizon": horizon,
        "n_max": n_max,
        "head_fraction": head_fraction,
    }
    if rows[0].get("B") is not None:
        payload["brownian"] = [float(r["B"]) for r in rows]
    if s1_window is not None:
        payload["s1_window"] = s1_window
    body = client_of(ctx).post("/recover", payload)
    write_json(out_path(out_dir, "recovery.json"), body)
    estimates = " ".join(fmt(v) for v in body["estimates"])
    click.echo(f"estimates {estimates}")
    click.echo("wrote recovery.json")


@cli.command("benchmark-cma")
@click.option("--seed", default=0, show_default=True, type=int)
@click.option("--sphere-budget", default=2000, show_default=True, type=int)
@click.option("--rosenbrock-budget", default=100000, show_default=True, type=int)
@out_dir_option
@format_option
@click.pass_context
def benchmark_cma(ctx, seed, sphere_budget, rosenbrock_budget, out_dir, output_format):
    """Reference optimizer runs on the sphere and Rosenbrock problems."""
    body = client_of(ctx).post(
        "/optimizer/benchmark",
        {"seed": seed, "sphere_budget": sphere_budget, "rosenbrock_budget": rosenbrock_budget},
    )
    name = table_name("benchmark", output_format == "json")
    write_table(out_path(out_dir, name), body["problems"],
                ["name", "dimension", "budget", "evaluations", "best_value", "target",
                 "reached", "seed"],
                output_format == "json")
    for p in body["problems"]:
        click.echo(
            f"{p['name']}: best={fmt(p['best_value'])} evaluations={p['evaluations']} "
            f"reached={p['reached']}"
        )
    click.echo(f"wrote {name}")


def main(argv: Optional[List[str]] = None):
    try:
        cli.main(args=argv, standalone_mode=False)
    except click.exceptions.Exit as exc:
        sys.exit(exc.exit_code)
    except click.UsageError as exc:
        click.echo(f"usage error: {exc.format_message()}", err=True)
        sys.exit(EXIT_CODES["usage"])
    except click.ClickException as exc:
        exc.show()
        sys.exit(exc.exit_code)
    except click.exceptions.Abort:
        sys.exit(1)


if __name__ == "__main__":
    main()
