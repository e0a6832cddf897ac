"""Command-line entry point: ``rfmseg <command> [options]``.

Every command reads a transaction CSV, builds standardized RFM features and
writes plot-ready CSV/JSON files plus a ``manifest.json`` into ``--out-dir``.
Exit codes: 0 success, 1 data error, 2 usage error.
"""
from __future__ import annotations

import configparser
import functools
import hashlib
import io
import json
import secrets
import sys
import time
import warnings
from contextlib import contextmanager
from dataclasses import dataclass
from pathlib import Path

import click

from . import __version__
from . import pipelines as pl
from . import synthetic
from .clustering import (
    BACKEND,
    DEFAULT_SIZE_CAP,
    LINKAGES,
    DbscanParams,
    PointSet,
    dbscan_param_sweep,
    dendrogram_to_json,
    elbow_curve,
)
from .ingest import FeatureMatrix, Schema, SchemaError, load_transactions, write_transactions
from .rfm import RFM_COLUMNS, compute_reference_date, compute_rfm, rfm_matrix, score_rfm, standardize, write_rfm_csv, write_scores_csv

MANIFEST = "manifest.json"
CONFIG_SECTION = "rfmseg"


class DataError(click.ClickException):
    exit_code = 1


# ---------------------------------------------------------------- config files


def _load_config(ctx: click.Context, _param, path):
    """Eager ``--config`` callback: INI keys become defaults; explicit flags still win."""
    if not path:
        return path
    parser = configparser.ConfigParser(interpolation=None)
    try:
        with open(path, encoding="utf-8") as fh:
            parser.read_file(fh)
    except (OSError, configparser.Error) as exc:
        raise click.BadParameter(f"cannot read config {path}: {exc}", ctx=ctx, param=_param)
    values = dict(parser.defaults())
    if parser.has_section(CONFIG_SECTION):
        values.update(parser.items(CONFIG_SECTION))
    # keys may use the flag spelling (input, k-min) or the parameter name (input_path)
    lookup = {}
    for p in ctx.command.params:
        for alias in [p.name, *getattr(p, "opts", [])]:
            lookup[alias.lstrip("-").replace("-", "_")] = p
    defaults = {}
    for key, val in values.items():
        param = lookup.get(key.strip().lstrip("-").replace("-", "_"))
        if param is not None and param.name != "config":
            if getattr(param, "is_flag", False):
                val = val.strip().lower() in {"1", "true", "yes", "on"}
            defaults[param.name] = val
        elif param is None:
            click.echo(f"note: config key {key!r} does not apply to this command; ignored", err=True)
    ctx.default_map = {**(ctx.default_map or {}), **defaults}
    return path


def common_options(fn):
    opts = [
        click.option("--config", type=click.Path(dir_okay=False), is_eager=True, expose_value=False,
                     callback=_load_config, help="INI file ([rfmseg] section) supplying defaults for any flag."),
        click.option("--input", "input_path", type=click.Path(exists=True, dir_okay=False),
                     required=True, help="Transaction CSV (UTF-8, header row)."),
        click.option("--out-dir", type=click.Path(file_okay=False), default="rfmseg-out", show_default=True),
        click.option("--schema", default=Schema().to_text(), show_default=True,
                     help="Header names for the roles holder, id, amount, date."),
        click.option("--seed", type=int, default=None, help="RNG seed; drawn from entropy and recorded if omitted."),
        click.option("--allow-negative", is_flag=True, default=False, help="Accept negative amounts (refunds)."),
    ]
    for opt in reversed(opts):
        fn = opt(fn)
    return fn


# ---------------------------------------------------------------- shared plumbing


@dataclass
class Prepared:
    vectors: list
    points: PointSet
    report: dict
    input_sha256: str


class Run:
    """Collects stage timings and written files, then writes the manifest."""

    def __init__(self, command: str, params: dict):
        self.command = command
        self.params = dict(params)
        self.out_dir = Path(params["out_dir"])
        self.out_dir.mkdir(parents=True, exist_ok=True)
        self.timings = {}
        self.outputs = []
        self.input_sha256 = None

    @contextmanager
    def stage(self, name):
        t0 = time.perf_counter()
        yield
        self.timings[name] = round(time.perf_counter() - t0, 6)

    def open(self, name: str):
        self.outputs.append(name)
        return open(self.out_dir / name, "w", encoding="utf-8", newline="")

    def write_text(self, name: str, text: str) -> None:
        with self.open(name) as fh:
            fh.write(text)

    def finish(self) -> dict:
        config = {k: v for k, v in self.params.items() if k != "out_dir"}
        if config.get("input_path"):
            config["input_path"] = str(Path(config["input_path"]).resolve())
        doc = {
            "tool": "rfmseg",
            "version": __version__,
            "backend": BACKEND,
            "command": self.command,
            "config": config,
            "input_sha256": self.input_sha256,
            "timings": self.timings,
            "outputs": {name: sha256_file(self.out_dir / name) for name in self.outputs},
        }
        with open(self.out_dir / MANIFEST, "w", encoding="utf-8") as fh:
            json.dump(doc, fh, indent=1, sort_keys=True)
            fh.write("\n")
        return doc


def sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 16), b""):
            h.update(block)
    return h.hexdigest()


def resolve_seed(params: dict) -> int:
    if params.get("seed") is None:
        params["seed"] = secrets.randbits(32)
        click.echo(f"note: no --seed given; using {params['seed']} (recorded in manifest)", err=True)
    return params["seed"]


def prepare(run: Run) -> Prepared:
    p = run.params
    try:
        schema = Schema.parse(p["schema"])
    except SchemaError as exc:
        raise click.UsageError(str(exc))
    raw = Path(p["input_path"]).read_bytes()
    run.input_sha256 = hashlib.sha256(raw).hexdigest()
    with run.stage("ingest"):
        try:
            txns, report = load_transactions(io.BytesIO(raw), schema, allow_negative=p["allow_negative"])
        except SchemaError as exc:
            raise click.UsageError(str(exc))
    for sample in report.error_samples:
        click.echo(f"rejected {sample}", err=True)
    if not txns:
        raise DataError(
            f"no usable transactions in {p['input_path']}: {report.rows_read} row(s) read, "
            f"{report.rows_rejected} rejected, {report.duplicates_dropped} duplicate(s) dropped"
        )
    with run.stage("rfm"):
        vectors = compute_rfm(txns, compute_reference_date(txns))
        try:
            z, _ = standardize(rfm_matrix(vectors))
        except ValueError as exc:
            raise DataError(f"cannot standardize RFM features: {exc}")
    points = PointSet(z.rows, tuple(v.customer_id for v in vectors))
    return Prepared(vectors, points, report.to_dict(), run.input_sha256)


def data_errors(fn):
    """Map library ValueError/KeyError to exit code 1."""

    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except click.ClickException:
            raise
        except (ValueError, KeyError) as exc:
            raise DataError(str(exc.args[0]) if exc.args else repr(exc))

    return wrapper


def parse_grid(text: str, kind=float) -> list:
    try:
        values = [kind(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise click.BadParameter(f"not a comma-separated list of {kind.__name__}: {text!r}")
    if not values:
        raise click.BadParameter("grid is empty")
    return values


# ---------------------------------------------------------------- commands


@click.group(context_settings={"help_option_names": ["-h", "--help"]})
@click.version_option(__version__, prog_name="rfmseg")
def main():
    """RFM features and customer segmentation from card transaction logs."""


@main.command("rfm")
@common_options
@data_errors
def cmd_rfm(**params):
    """Write per-customer RFM features (raw and standardized) and the ingest report."""
    run = Run("rfm", params)
    prep = prepare(run)
    z = FeatureMatrix(RFM_COLUMNS, prep.points.points, prep.points.ids)
    with run.stage("export"):
        with run.open("rfm.csv") as fh:
            write_rfm_csv(prep.vectors, fh, z)
        run.write_text("ingest_report.json", json.dumps(prep.report, indent=1, sort_keys=True) + "\n")
    run.finish()
    click.echo(f"{len(prep.vectors)} customers -> {run.out_dir / 'rfm.csv'}")


@main.command("score")
@common_options
@click.option("--q", "quantiles", type=int, default=5, show_default=True, help="Quantiles per feature.")
@data_errors
def cmd_score(**params):
    """Quantile RFM scores and the count of distinct score triples."""
    run = Run("score", params)
    prep = prepare(run)
    q = params["quantiles"]
    if q < 2 or q > len(prep.vectors):
        raise click.UsageError(f"--q must lie in [2, {len(prep.vectors)}] (number of customers), got {q}")
    with run.stage("score"):
        scores = score_rfm(prep.vectors, q)
    with run.stage("export"), run.open("scores.csv") as fh:
        write_scores_csv(scores, fh)
    run.finish()
    distinct = len({s.combined for s in scores})
    click.echo(f"distinct RFM scores: {distinct} (at most {q}^3 = {q ** 3})")


@main.command("elbow")
@common_options
@click.option("--k-min", type=int, default=1, show_default=True)
@click.option("--k-max", type=int, default=10, show_default=True)
@click.option("--restarts", type=int, default=5, show_default=True)
@data_errors
def cmd_elbow(**params):
    """WCSS for a range of k, with a knee suggestion."""
    if not 1 <= params["k_min"] <= params["k_max"]:
        raise click.UsageError(f"need 1 <= --k-min <= --k-max, got {params['k_min']} and {params['k_max']}")
    if params["restarts"] < 1:
        raise click.UsageError("--restarts must be >= 1")
    run = Run("elbow", params)
    seed = resolve_seed(run.params)
    prep = prepare(run)
    with run.stage("cluster"):
        curve = elbow_curve(prep.points, params["k_min"], params["k_max"], params["restarts"], seed=seed)
    with run.stage("export"), run.open("elbow.csv") as fh:
        fh.write("k,wcss,knee_flag\n")
        for k, w in curve.entries:
            fh.write(f"{k},{w!r},{int(k == curve.knee)}\n")
    run.finish()
    for k, w in curve.entries:
        click.echo(f"k={k:>3}  wcss={w:.6g}" + ("  <- knee" if k == curve.knee else ""))
    click.echo(f"suggested k (knee): {curve.knee if curve.knee is not None else 'n/a'}")


@main.command("sweep")
@common_options
@click.option("--eps-grid", default="0.2,0.4,0.6,0.8,1.0", show_default=True)
@click.option("--minpts-grid", default="3,5,10", show_default=True)
@data_errors
def cmd_sweep(**params):
    """DBSCAN outcome for every (eps, min_points) pair."""
    eps = parse_grid(params["eps_grid"], float)
    mps = parse_grid(params["minpts_grid"], int)
    if any(e <= 0 for e in eps) or any(m < 1 for m in mps):
        raise click.UsageError("eps values must be > 0 and min_points values >= 1")
    run = Run("sweep", params)
    prep = prepare(run)
    with run.stage("cluster"):
        rows = dbscan_param_sweep(prep.points, eps, mps)
    with run.stage("export"), run.open("sweep.csv") as fh:
        fh.write("eps,min_points,clusters,noise_fraction,largest_cluster_size\n")
        for r in rows:
            fh.write(f"{r.eps!r},{r.min_points},{r.clusters},{r.noise_fraction!r},{r.largest_cluster_size}\n")
    run.finish()
    for r in rows:
        click.echo(f"eps={r.eps:<6g} min_points={r.min_points:<4d} clusters={r.clusters:<4d} "
                   f"noise={r.noise_fraction:.3f} largest={r.largest_cluster_size}")


def sidecar_parameters(run: Run) -> dict:
    """Run parameters minus locations; the input is identified by digest."""
    out = {k: v for k, v in run.params.items() if k not in ("out_dir", "input_path", "prior_manifest")}
    out["input_sha256"] = run.input_sha256
    return out


def _write_segments(run: Run, seg, prep: Prepared, parameters: dict) -> None:
    labelled = pl.label_segments(seg, prep.vectors)
    with run.stage("export"):
        with run.open("segments.csv") as fh:
            pl.write_segments_csv(labelled, fh)
        with run.open("segments.json") as fh:
            pl.write_sidecar(pl.sidecar(labelled, prep.points, parameters), fh)
        with run.open("scatter.csv") as fh:
            pl.write_scatter_csv(labelled, prep.vectors, fh)
        if labelled.tree is not None:
            run.write_text("dendrogram.json", dendrogram_to_json(labelled.tree))
    for s in range(labelled.n_segments):
        click.echo(f"segment {s}: {int(labelled.sizes()[s]):>6d} customers  "
                   f"[{labelled.provenance[s]}]  {labelled.labels[s].text}")


@main.command("segment")
@common_options
@click.option("--model", type=click.Choice(["1", "2", "3"]), required=True)
@click.option("--k1", type=int, default=4, show_default=True, help="Model 1: first-stage clusters.")
@click.option("--k2", type=int, default=2, show_default=True, help="Model 1: pieces for the refined segment.")
@click.option("--refine-target", default=pl.MAX_RECENCY_SPREAD, show_default=True,
              help="Model 1: first-stage segment id to split, or max-recency-spread.")
@click.option("--eps", type=float, default=0.8, show_default=True, help="Model 2: DBSCAN radius.")
@click.option("--min-points", type=int, default=5, show_default=True, help="Model 2: DBSCAN density threshold.")
@click.option("--k-outliers", type=int, default=2, show_default=True, help="Model 2: k-means groups over noise.")
@click.option("--n-clusters", type=int, default=4, show_default=True, help="Model 3: groups to cut.")
@click.option("--linkage", type=click.Choice(LINKAGES), default="ward", show_default=True)
@click.option("--size-cap", type=int, default=DEFAULT_SIZE_CAP, show_default=True,
              help="Model 3: refuse inputs with more customers than this.")
@click.option("--restarts", type=int, default=10, show_default=True, help="k-means restarts per fit.")
@data_errors
def cmd_segment(**params):
    """Run segmentation model 1, 2 or 3."""
    run = Run("segment", params)
    seed = resolve_seed(run.params)
    prep = prepare(run)
    model = params["model"]
    with run.stage("cluster"):
        if model == "1":
            seg = pl.run_model1(prep.points, params["refine_target"], params["k1"], params["k2"], seed=seed,
                                restarts=params["restarts"])
        elif model == "2":
            try:
                dbp = DbscanParams(params["eps"], params["min_points"])
            except ValueError as exc:
                raise click.UsageError(str(exc))
            with warnings.catch_warnings(record=True) as caught:
                warnings.simplefilter("always")
                seg = pl.run_model2(prep.points, dbp, params["k_outliers"], seed=seed, restarts=params["restarts"])
            for w in caught:
                click.echo(f"warning: {w.message}", err=True)
        else:
            seg = pl.run_model3(prep.points, params["n_clusters"], params["linkage"], size_cap=params["size_cap"])
    _write_segments(run, seg, prep, sidecar_parameters(run))
    run.finish()


@main.command("refine")
@common_options
@click.option("--manifest", "prior_manifest", type=click.Path(exists=True, dir_okay=False), required=True,
              help="Manifest of the segment/refine run to refine.")
@click.option("--segment", "target", required=True, help="Segment id to split, or max-recency-spread.")
@click.option("--method", type=click.Choice(pl.METHODS), default="kmeans", show_default=True)
@click.option("--k", type=int, default=2, show_default=True, help="kmeans: pieces.")
@click.option("--restarts", type=int, default=10, show_default=True, help="kmeans: restarts.")
@click.option("--eps", type=float, default=0.8, show_default=True, help="dbscan: radius.")
@click.option("--min-points", type=int, default=5, show_default=True, help="dbscan: density threshold.")
@click.option("--n-clusters", type=int, default=2, show_default=True, help="agglomerative: groups.")
@click.option("--linkage", type=click.Choice(LINKAGES), default="ward", show_default=True)
@data_errors
def cmd_refine(**params):
    """Split one segment of an earlier run and write the updated segment files."""
    prior_path = Path(params["prior_manifest"])
    prior = json.loads(prior_path.read_text(encoding="utf-8"))
    if prior.get("command") not in ("segment", "refine"):
        raise click.UsageError(f"{prior_path} is not a segment/refine manifest")
    run = Run("refine", params)
    seed = resolve_seed(run.params)
    prep = prepare(run)
    prior_dir = prior_path.parent
    with open(prior_dir / "segments.csv", encoding="utf-8", newline="") as fh:
        doc = json.loads((prior_dir / "segments.json").read_text(encoding="utf-8"))
        seg = pl.read_segment_set(fh, doc)
    if seg.ids != prep.points.ids:
        raise DataError("prior segments do not cover the same customers as --input")
    try:
        target = pl.resolve_target(seg, params["target"], prep.points)
    except (KeyError, ValueError) as exc:
        raise click.UsageError(str(exc.args[0]))
    method = params["method"]
    if method == "kmeans":
        step_params = {"k": params["k"], "restarts": params["restarts"]}
    elif method == "dbscan":
        step_params = {"eps": params["eps"], "min_points": params["min_points"]}
    else:
        step_params = {"n_clusters": params["n_clusters"], "linkage": params["linkage"]}
    with run.stage("cluster"):
        refined = pl.refine(seg, pl.RefinementStep(target, method, step_params), prep.points, seed=seed)
    parameters = sidecar_parameters(run)
    parameters["prior_manifest"] = prior.get("outputs", {})
    _write_segments(run, refined, prep, parameters)
    run.finish()


@main.command("replay")
@click.argument("manifest", type=click.Path(exists=True, dir_okay=False))
@click.option("--out-dir", type=click.Path(file_okay=False), required=True)
@click.pass_context
def cmd_replay(ctx, manifest, out_dir):
    """Re-run a recorded command and compare output digests with its manifest."""
    doc = json.loads(Path(manifest).read_text(encoding="utf-8"))
    cmd = main.commands.get(doc.get("command"))
    if cmd is None or cmd is ctx.command:
        raise click.UsageError(f"manifest records no replayable command: {doc.get('command')!r}")
    if doc.get("version") != __version__:
        click.echo(f"warning: manifest written by version {doc.get('version')}, running {__version__}", err=True)
    params = dict(doc["config"])
    params["out_dir"] = out_dir
    ctx.invoke(cmd, **params)
    fresh = json.loads((Path(out_dir) / MANIFEST).read_text(encoding="utf-8"))
    bad = [name for name, digest in doc["outputs"].items() if fresh["outputs"].get(name) != digest]
    if bad or fresh["input_sha256"] != doc["input_sha256"]:
        raise DataError(f"replay differs from manifest: {', '.join(bad) or 'input digest'}")
    click.echo(f"replay matches manifest: {len(doc['outputs'])} output file(s) identical")


@main.command("synth")
@click.option("--kind", type=click.Choice(["random", "four-blobs", "bimodal", "outliers"]), default="random",
              show_default=True)
@click.option("--customers", type=int, default=500, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--output", type=click.Path(dir_okay=False), required=True)
def cmd_synth(kind, customers, seed, output):
    """Write a synthetic transaction CSV."""
    if kind == "random":
        txns = synthetic.random_transactions(customers, seed=seed)
    else:
        make = {"four-blobs": synthetic.four_blobs, "bimodal": synthetic.bimodal_blobs,
                "outliers": synthetic.dense_plus_outliers}[kind]
        pts, _ = make(customers, seed=seed)
        txns = synthetic.transactions_from_rfm(synthetic.to_raw_rfm(pts), seed=seed)
    with open(output, "w", encoding="utf-8", newline="") as fh:
        write_transactions(txns, fh)
    click.echo(f"{len(txns)} transactions for {customers} customers -> {output}")


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
