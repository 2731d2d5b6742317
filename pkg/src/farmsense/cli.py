"""Command-line entry point.

Subcommand groups mirror the system's surfaces: `sim` (node simulation),
`gateway` (store-and-forward uplink), `kb` (retrieval index), `eval`
(benchmark suite, grounding, latency; reports land as CSV plus rendered
figures), and `serve` (the HTTP service).
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

import click

from .evalharness import (
    Answerer,
    ConstantJudge,
    RemoteJudge,
    default_jury,
    grounding_suite,
    load_benchmark,
    measure_latency,
    render_grounding_csv,
    render_grounding_table,
    render_jury_csv,
    render_jury_table,
    render_latency_csv,
    run_suite,
    save_grounding_figure,
    save_jury_figure,
    save_latency_figure,
)
from .gateway import Gateway, HttpUplink, OutageInjectedUplink, run_gateway
from .knowledge import KnowledgeBase
from .llm import BackendConfig, make_backend
from .telemetry import load_scenario, read_ndjson_readings, run_scenario


@click.group()
def main() -> None:
    """Sensor-grounded farm advisory toolkit."""


# -- sim ---------------------------------------------------------------


@main.group()
def sim() -> None:
    """Telemetry node simulation."""


@sim.command("run")
@click.option("--scenario", "scenario_path", required=True, type=click.Path(exists=True))
@click.option("--duration", "duration_s", required=True, type=float, help="simulated seconds")
@click.option("--out", "out_path", default="-", help="readings file (NDJSON), - for stdout")
def sim_run(scenario_path: str, duration_s: float, out_path: str) -> None:
    """Emit deterministic reading streams for a scenario."""
    scenario = load_scenario(scenario_path)
    if out_path == "-":
        count = run_scenario(scenario, duration_s, sys.stdout)
    else:
        with open(out_path, "w") as fh:
            count = run_scenario(scenario, duration_s, fh)
    click.echo(f"wrote {count} readings from {len(scenario.nodes)} node(s)", err=True)


# -- gateway ------------------------------------------------------------


@main.group()
def gateway() -> None:
    """Store-and-forward gateway."""


@gateway.command("run")
@click.option(
    "--in",
    "source",
    required=True,
    help="readings file (NDJSON), or 'live' to simulate from --scenario",
)
@click.option("--endpoint", required=True, help="ingestion base URL, e.g. http://localhost:8000")
@click.option("--interval", "interval_s", default=300.0, type=float, help="sampling interval (s)")
@click.option("--scenario", "scenario_path", default=None, type=click.Path(exists=True))
@click.option("--duration", "duration_s", default=86400.0, type=float, help="live-mode seconds")
@click.option(
    "--inject-outage",
    "outages",
    multiple=True,
    help="virtual-time outage window 'from,to' in seconds (repeatable)",
)
def gateway_run(
    source: str,
    endpoint: str,
    interval_s: float,
    scenario_path: str | None,
    duration_s: float,
    outages: tuple[str, ...],
) -> None:
    """Feed readings through the buffer to the uplink in virtual time
    (each reading's own timestamp is 'now'). `--in live` streams straight
    from the scenario simulator instead of a file."""
    uplink = HttpUplink(endpoint)
    if outages:
        windows = []
        for spec in outages:
            start, end = (float(part) for part in spec.split(","))
            windows.append((start, end))
        uplink = OutageInjectedUplink(uplink, windows)
    gw = Gateway(uplink, sampling_interval_s=interval_s)
    if source == "live":
        if scenario_path is None:
            raise click.BadParameter("--in live requires --scenario")
        import heapq

        from .telemetry import NodeSimulator

        scenario = load_scenario(scenario_path)
        streams = [
            NodeSimulator(cfg, start_time=scenario.start_time).stream(
                scenario.start_time, duration_s
            )
            for cfg in scenario.nodes
        ]
        merged = heapq.merge(*streams, key=lambda r: (r.timestamp, r.node_id, r.seq))
        stats = run_gateway(gw, merged)
    else:
        with open(source) as fh:
            stats = run_gateway(gw, read_ndjson_readings(fh))
    remaining = len(gw.buffer)
    click.echo(
        f"processed {stats['readings']} readings "
        f"(urgencies {stats['urgencies']}, evicted {stats['evicted']}, "
        f"unflushed {remaining})"
    )


# -- kb ------------------------------------------------------------------


@main.group()
def kb() -> None:
    """Knowledge-base index over extension manuals."""


@kb.command("build")
@click.option("--corpus", "corpus_dir", required=True, type=click.Path(exists=True))
@click.option("--out", "out_path", required=True, type=click.Path())
def kb_build(corpus_dir: str, out_path: str) -> None:
    index = KnowledgeBase.build(corpus_dir)
    index.save(out_path)
    click.echo(f"indexed {index.size} chunks from {corpus_dir} -> {out_path}")


@kb.command("query")
@click.option("--index", "index_path", required=True, type=click.Path(exists=True))
@click.option("--q", "query", required=True)
@click.option("--k", default=4, type=int)
def kb_query(index_path: str, query: str, k: int) -> None:
    index = KnowledgeBase.load(index_path)
    for passage, score in index.search(query, k=k):
        snippet = " ".join(passage.text.split())[:100]
        click.echo(f"{score:8.4f}  {index.cite(passage)}  {snippet}")


# -- eval -----------------------------------------------------------------


def _parse_judges(spec: str) -> list:
    judges = []
    for part in spec.split(","):
        part = part.strip()
        if part == "mock":
            judges.extend(default_jury())
        elif part.startswith("constant:"):
            judges.append(ConstantJudge(float(part.split(":", 1)[1])))
        elif part.startswith("remote:"):
            import yaml

            doc = yaml.safe_load(Path(part.split(":", 1)[1]).read_text())
            backend = make_backend(BackendConfig.from_dict(doc))
            judges.append(RemoteJudge(backend, name=doc.get("model", "remote")))
        else:
            raise click.BadParameter(f"unknown judge spec {part!r}")
    return judges


@main.group(name="eval")
def eval_group() -> None:
    """Benchmark evaluation suite."""


@eval_group.command("run")
@click.option("--benchmark", "benchmark_path", default=None, type=click.Path(exists=True))
@click.option("--judges", "judges_spec", default="mock", show_default=True)
@click.option("--runs", default=3, show_default=True, type=int)
@click.option("--out", "out_path", default="report.csv", show_default=True)
def eval_run(benchmark_path: str | None, judges_spec: str, runs: int, out_path: str) -> None:
    """Answer every benchmark item, score with the jury, and write the
    tier x dimension report (CSV + figures alongside)."""
    items = load_benchmark(benchmark_path)
    answerer = Answerer()
    judges = _parse_judges(judges_spec)
    report = run_suite(answerer, items, judges, runs=runs)
    out = Path(out_path)
    out.write_text(render_jury_csv(report))
    save_jury_figure(report, out.with_suffix(".png"))
    grounding = grounding_suite(answerer, items)
    grounding_csv = out.with_name(out.stem + "_grounding.csv")
    grounding_csv.write_text(render_grounding_csv(grounding))
    save_grounding_figure(grounding, grounding_csv.with_suffix(".png"))
    click.echo(render_jury_table(report))
    click.echo(render_grounding_table(grounding))
    click.echo(
        f"wrote {out}, {out.with_suffix('.png').name}, "
        f"{grounding_csv.name}, {grounding_csv.with_suffix('.png').name}"
    )


@eval_group.command("latency")
@click.option("--benchmark", "benchmark_path", default=None, type=click.Path(exists=True))
@click.option("--out", "out_path", default=None, help="also write CSV + histogram figure")
def eval_latency(benchmark_path: str | None, out_path: str | None) -> None:
    """Measure end-to-end per-answer latency over the benchmark."""
    items = load_benchmark(benchmark_path)
    report = measure_latency(Answerer(), items)
    for line in render_latency_csv(report).strip().splitlines():
        click.echo(line.replace(",", ": ") + " ms" if not line.startswith("metric") else line)
    if out_path:
        out = Path(out_path)
        out.write_text(render_latency_csv(report))
        save_latency_figure(report, out.with_suffix(".png"))
        click.echo(f"wrote {out} and {out.with_suffix('.png').name}")


# -- serve ----------------------------------------------------------------


@main.command("serve")
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", default=8000, show_default=True, type=int)
@click.option("--data", "data_dir", default=None, help="store directory (default: in-memory)")
@click.option("--frontend", "frontend_dir", default=None, type=click.Path(), help="static UI dir")
@click.option("--backend-kind", default="mock", show_default=True, type=click.Choice(["mock", "remote"]))
@click.option("--backend-endpoint", default=None)
@click.option("--backend-model", default=None)
def serve(
    host: str,
    port: int,
    data_dir: str | None,
    frontend_dir: str | None,
    backend_kind: str,
    backend_endpoint: str | None,
    backend_model: str | None,
) -> None:
    """Run the advisory service (ingest + webhook + farm API + UI)."""
    import uvicorn

    from .server import ServerConfig, create_app

    config = ServerConfig(
        data_dir=data_dir,
        backend=BackendConfig(
            kind=backend_kind, endpoint=backend_endpoint, model=backend_model
        ),
        frontend_dir=frontend_dir,
    )
    uvicorn.run(create_app(config), host=host, port=port, log_level="info")


if __name__ == "__main__":
    main()
