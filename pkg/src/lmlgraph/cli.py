"""Command-line interface: reproducible transform, fit, check, and search runs.

Every command is a pure function of its inputs and flags.  Each run
emits a manifest recording the command, the SHA-256 of every input file,
a hash of the effective configuration, and the outputs written, so a
rerun with identical inputs produces byte-identical artifacts.  Machine
output is JSON with a ``schema_version`` field; a one-line human summary
goes to stdout.  Exit codes: 0 success, 2 usage error, 3 data or schema
error, 4 fit did not converge.
"""

from __future__ import annotations

import hashlib
import json
import sys
from pathlib import Path

import click

from . import __version__
from .errors import LmlError
from .fit import FitOptions, ModelSpec, fit_mle
from .graphs import constraints_of, export_dot, graph_to_dict, load_graph
from .search import SearchConfig, search as run_search
from .tables import (
    CountTable,
    empirical_prob,
    load_counts,
    load_schema,
    schema_to_dict,
)
from .transform import (
    MoebiusParam,
    moebius_to_lml,
    param_from_dict,
    param_to_dict,
    prob_to_lml,
    prob_to_moebius,
)

EXIT_DATA_ERROR = 3
EXIT_NOT_CONVERGED = 4


def _sha256(path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as handle:
        for chunk in iter(lambda: handle.read(65536), b""):
            digest.update(chunk)
    return digest.hexdigest()


def _dump(doc) -> str:
    return json.dumps(doc, indent=2, sort_keys=False) + "\n"


def _manifest(command: str, config: dict, inputs: dict, outputs: list) -> dict:
    config_bytes = json.dumps(config, sort_keys=True).encode()
    return {
        "schema_version": 1,
        "tool": {"name": "lmlgraph", "version": __version__},
        "command": command,
        "config": config,
        "config_sha256": hashlib.sha256(config_bytes).hexdigest(),
        "inputs": {
            name: {"path": str(path), "sha256": _sha256(path)}
            for name, path in inputs.items()
            if path is not None
        },
        "outputs": outputs,
    }


def _emit(doc: dict, manifest: dict, out_dir, stem: str) -> None:
    """Write ``<stem>.json`` plus ``manifest.json``, or print one document."""
    if out_dir is None:
        doc = dict(doc)
        doc["manifest"] = manifest
        click.echo(_dump(doc), nl=False)
        return
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    manifest["outputs"] = [f"{stem}.json", "manifest.json"]
    (out / f"{stem}.json").write_text(_dump(doc))
    (out / "manifest.json").write_text(_dump(manifest))


def _load_table(counts_path, schema_path) -> CountTable:
    schema = load_schema(schema_path) if schema_path else None
    return load_counts(counts_path, schema=schema)


def _parse_expand(entries) -> tuple:
    """``v`` or ``v:baseline`` strings to expand-config entries."""
    parsed = []
    for entry in entries:
        if ":" in entry:
            var, baseline = entry.split(":", 1)
            parsed.append((var, baseline))
        else:
            parsed.append(entry)
    return tuple(parsed)


def _rebaseline(data: CountTable, expand_entries) -> CountTable:
    baselines = {
        var: baseline
        for var, baseline in (
            e for e in _parse_expand(expand_entries) if isinstance(e, tuple)
        )
    }
    if not baselines:
        return data
    return CountTable(data.schema.with_baselines(baselines), data.counts)


def _prob_keyed(schema, values) -> dict:
    out = {}
    for cell in schema.iter_cells():
        key = ",".join(str(label) for label in schema.labels_of_cell(cell))
        out[key] = float(values[schema.flat_index(cell)])
    return out


def _summary_line(result) -> str:
    return (
        f"deviance={result.deviance:.4f} df={result.df} "
        f"p={result.p_value:.4f} bic={result.bic:.3f} "
        f"converged={str(result.converged).lower()}"
    )


def _say(line: str, out_dir) -> None:
    """Human summary: stdout when files carry the JSON, stderr otherwise."""
    click.echo(line, err=out_dir is None)


class _Failure(click.ClickException):
    exit_code = EXIT_DATA_ERROR

    def __init__(self, message):
        super().__init__(message)


@click.group()
@click.version_option(__version__, prog_name="lmlgraph")
def main() -> None:
    """Graphical models of marginal independence for categorical data."""


def _guard(fn):
    """Map library errors to exit code 3 with a terse message."""

    def wrapped(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except LmlError as exc:
            raise _Failure(str(exc)) from exc

    wrapped.__name__ = fn.__name__
    wrapped.__doc__ = fn.__doc__
    return wrapped


@main.command()
@click.option("--counts", "counts_path", required=True, type=click.Path(exists=True))
@click.option("--schema", "schema_path", type=click.Path(exists=True))
@click.option(
    "--direction",
    type=click.Choice(["prob", "moebius", "lml"]),
    required=True,
    help="Which representation of the empirical table to emit.",
)
@click.option("--out-dir", type=click.Path(file_okay=False))
@_guard
def transform(counts_path, schema_path, direction, out_dir) -> None:
    """Empirical probabilities or their interaction representations."""
    data = _load_table(counts_path, schema_path)
    probs = empirical_prob(data)
    if direction == "prob":
        body = {
            "schema_version": 1,
            "kind": "prob",
            "schema": schema_to_dict(data.schema),
            "n": data.n,
            "values": _prob_keyed(data.schema, probs.probs),
        }
    else:
        mu = prob_to_moebius(probs)
        param = mu if direction == "moebius" else moebius_to_lml(mu)
        body = param_to_dict(param)
        body["n"] = data.n
    config = {
        "direction": direction,
        "counts": str(counts_path),
        "schema": str(schema_path) if schema_path else None,
    }
    manifest = _manifest(
        "transform", config, {"counts": counts_path, "schema": schema_path}, []
    )
    _emit(body, manifest, out_dir, "transform")


@main.command()
@click.option("--counts", "counts_path", required=True, type=click.Path(exists=True))
@click.option("--schema", "schema_path", type=click.Path(exists=True))
@click.option("--graph", "graph_path", required=True, type=click.Path(exists=True))
@click.option(
    "--expand",
    "expand_entries",
    multiple=True,
    help="v or v:baseline; moves the baseline used for expanded levels.",
)
@click.option("--tol", default=1e-8, show_default=True)
@click.option("--max-iter", default=500, show_default=True)
@click.option("--out-dir", type=click.Path(file_okay=False))
@_guard
def fit(
    counts_path, schema_path, graph_path, expand_entries, tol, max_iter, out_dir
) -> None:
    """Maximum-likelihood fit of one graph model; summary on stdout."""
    data = _rebaseline(_load_table(counts_path, schema_path), expand_entries)
    graph = load_graph(graph_path, data.schema)
    model = ModelSpec.from_graph(data.schema, graph)
    result = fit_mle(data, model, FitOptions(tol=tol, max_iter=max_iter))
    body = {
        "schema_version": 1,
        "kind": "fit",
        "schema": schema_to_dict(data.schema),
        "graph": graph_to_dict(graph),
        "n": data.n,
        "deviance": result.deviance,
        "df": result.df,
        "p_value": result.p_value,
        "bic": result.bic,
        "loglik": result.loglik,
        "iterations": result.iterations,
        "converged": result.converged,
        "grad_norm": result.grad_norm,
        "fitted": _prob_keyed(data.schema, result.fitted.probs),
        "gamma": param_to_dict(result.gamma_hat)["values"]
        if result.gamma_hat is not None
        else None,
    }
    config = {
        "counts": str(counts_path),
        "schema": str(schema_path) if schema_path else None,
        "graph": str(graph_path),
        "expand": list(expand_entries),
        "tol": tol,
        "max_iter": max_iter,
    }
    manifest = _manifest(
        "fit",
        config,
        {"counts": counts_path, "schema": schema_path, "graph": graph_path},
        [],
    )
    _emit(body, manifest, out_dir, "fit")
    _say(_summary_line(result), out_dir)
    if not result.converged:
        sys.exit(EXIT_NOT_CONVERGED)


@main.command()
@click.option("--counts", "counts_path", type=click.Path(exists=True))
@click.option(
    "--prob",
    "prob_path",
    type=click.Path(exists=True),
    help="JSON from `transform --direction moebius|lml` instead of counts.",
)
@click.option("--schema", "schema_path", type=click.Path(exists=True))
@click.option("--graph", "graph_path", required=True, type=click.Path(exists=True))
@click.option("--tol", default=1e-8, show_default=True)
@_guard
def check(counts_path, prob_path, schema_path, graph_path, tol) -> None:
    """Empirical values of every interaction the graph pins to zero."""
    if (counts_path is None) == (prob_path is None):
        raise click.UsageError("pass exactly one of --counts or --prob")
    if counts_path is not None:
        data = _load_table(counts_path, schema_path)
        schema = data.schema
        gamma = prob_to_lml(empirical_prob(data), allow_undefined=True)
    else:
        with open(prob_path) as handle:
            param = param_from_dict(json.load(handle))
        schema = param.schema
        if isinstance(param, MoebiusParam):
            gamma = moebius_to_lml(param, allow_undefined=True)
        else:
            gamma = param
    graph = load_graph(graph_path, schema)
    constraints = constraints_of(graph, schema)
    rows = []
    for idx in constraints:
        if gamma.is_defined(idx):
            value = gamma.value(idx)
            rows.append(
                {"index": idx.as_key(), "value": value, "within_tol": abs(value) <= tol}
            )
        else:
            rows.append({"index": idx.as_key(), "value": None, "within_tol": None})
    rows.sort(
        key=lambda r: (-(abs(r["value"]) if r["value"] is not None else float("inf")))
    )
    body = {
        "schema_version": 1,
        "kind": "check",
        "graph": graph_to_dict(graph),
        "tol": tol,
        "n_constraints": len(rows),
        "all_within_tol": all(r["within_tol"] for r in rows) if rows else True,
        "violations": rows,
    }
    config = {
        "counts": str(counts_path) if counts_path else None,
        "prob": str(prob_path) if prob_path else None,
        "schema": str(schema_path) if schema_path else None,
        "graph": str(graph_path),
        "tol": tol,
    }
    manifest = _manifest(
        "check",
        config,
        {"counts": counts_path, "prob": prob_path, "schema": schema_path,
         "graph": graph_path},
        [],
    )
    _emit(body, manifest, None, "check")
    for row in rows:
        shown = "undefined" if row["value"] is None else f"{row['value']:+.6f}"
        click.echo(f"{row['index']}  {shown}", err=True)


@main.command(name="search")
@click.option("--counts", "counts_path", required=True, type=click.Path(exists=True))
@click.option("--schema", "schema_path", type=click.Path(exists=True))
@click.option(
    "--expand",
    "expand_entries",
    multiple=True,
    help="v or v:baseline; variables modeled through their level indicators.",
)
@click.option("--alpha", default=0.05, show_default=True)
@click.option(
    "--orderings", default="all", show_default=True,
    help="'all' or a sampled count of variable orderings.",
)
@click.option("--seed", default=0, show_default=True)
@click.option("--budget", default=200_000, show_default=True)
@click.option("--tol", default=1e-8, show_default=True)
@click.option("--max-iter", default=500, show_default=True)
@click.option("--out-dir", type=click.Path(file_okay=False))
@_guard
def search_cmd(
    counts_path, schema_path, expand_entries, alpha, orderings, seed, budget,
    tol, max_iter, out_dir,
) -> None:
    """Learn a graph by ordered pairwise edge-subset search."""
    if orderings != "all":
        try:
            orderings = int(orderings)
        except ValueError:
            raise click.UsageError("--orderings takes 'all' or an integer")
        if orderings < 1:
            raise click.UsageError("--orderings must be positive")
    data = _load_table(counts_path, schema_path)
    cfg = SearchConfig(
        alpha=alpha,
        expand=_parse_expand(expand_entries),
        max_orderings=orderings,
        seed=seed,
        fit_budget=budget,
        fit_options=FitOptions(tol=tol, max_iter=max_iter),
    )
    trace = run_search(data, cfg)
    result = trace.final
    final_doc = graph_to_dict(trace.final_graph)
    body = {
        "schema_version": 1,
        "kind": "search",
        "schema": schema_to_dict(trace.schema),
        "n": data.n,
        "alpha": alpha,
        "n_orderings": len(trace.orderings),
        "n_distinct_fits": trace.n_distinct_fits,
        "final_graph": final_doc,
        "deviance": result.deviance,
        "df": result.df,
        "p_value": result.p_value,
        "bic": result.bic,
        "converged": result.converged,
        "orderings": [
            {
                "ordering": [str(v) for v in rec.ordering],
                "deviance": rec.fit.deviance,
                "df": rec.fit.df,
                "p_value": rec.fit.p_value,
                "bic": rec.fit.bic,
                "selected": i == trace.final_index,
            }
            for i, rec in enumerate(trace.orderings)
        ],
    }
    config = {
        "counts": str(counts_path),
        "schema": str(schema_path) if schema_path else None,
        "expand": list(expand_entries),
        "alpha": alpha,
        "orderings": orderings if orderings == "all" else int(orderings),
        "seed": seed,
        "budget": budget,
        "tol": tol,
        "max_iter": max_iter,
    }
    manifest = _manifest(
        "search", config, {"counts": counts_path, "schema": schema_path}, []
    )
    if out_dir is None:
        body["trace"] = trace.records()
        _emit(body, manifest, None, "search")
    else:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        manifest["outputs"] = [
            "search.json", "graph.json", "graph.dot", "trace.jsonl", "manifest.json",
        ]
        (out / "search.json").write_text(_dump(body))
        (out / "graph.json").write_text(_dump(final_doc))
        (out / "graph.dot").write_text(export_dot(trace.final_graph))
        with open(out / "trace.jsonl", "w") as handle:
            for row in trace.records():
                handle.write(json.dumps(row, sort_keys=False) + "\n")
        (out / "manifest.json").write_text(_dump(manifest))
    _say(_summary_line(result), out_dir)
    if not result.converged:
        sys.exit(EXIT_NOT_CONVERGED)


if __name__ == "__main__":
    main()
