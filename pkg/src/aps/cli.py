"""Operator command line: simulate, fit, train-trees, analyze, serve, replay.

Every command honors --seed and is reproducible; all paths and numeric
knobs can also come from the plan/config files the commands take.
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

import click
import numpy as np

import aps.analytics as analytics
from aps.beliefs import (
    fit_mixture_em,
    load_belief_dataset,
    save_mixture_bundle,
    select_component_count,
)
from aps.concerns import (
    TreeTrainConfig,
    UserProfile,
    load_profiles,
    load_rankings,
    train_tree_bundle,
)
from aps.dialogue import canonical_json, dialogue_from_transcript
from aps.graph import GraphFormatError, load_graph
from aps.sessions import EngineConfig, SessionEngine, SessionError
from aps.simulate import SimulationPlan, comparison_summary, run_simulation
from aps.usermodel import UserModel


@click.group()
def main():
    """Persuasion dialogue engine."""


def _fail(message: str) -> None:
    raise click.ClickException(message)


def _load_user_model(population: dict, base: Path) -> tuple[UserModel, list[UserProfile]]:
    def resolve(value):
        path = Path(value)
        return path if path.is_absolute() else base / path

    mixtures = {}
    rankings = []
    trees = None
    profiles: list[UserProfile] = []
    if population.get("mixtures"):
        from aps.beliefs import load_mixture_bundle

        mixtures = load_mixture_bundle(resolve(population["mixtures"]))
    if population.get("rankings"):
        rankings = load_rankings(resolve(population["rankings"]))
    if population.get("trees"):
        from aps.concerns import PreferenceTreeBundle

        trees = PreferenceTreeBundle.load(resolve(population["trees"]))
    if population.get("profiles"):
        profiles = [p for _, p in sorted(load_profiles(resolve(population["profiles"])).items())]
    vocabulary = tuple(sorted({c for r in rankings for c in r.order}))
    model = UserModel(
        mixtures=mixtures, rankings=rankings, trees=trees, concern_vocabulary=vocabulary
    )
    return model, profiles


@main.command()
@click.option("--plan", "plan_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--out", "out_dir", required=True, type=click.Path(file_okay=False))
@click.option("--seed", type=int, default=None, help="Override the plan's master seed.")
@click.option("--trials", type=int, default=None, help="Override trials per arm.")
def simulate(plan_path, out_dir, seed, trials):
    """Run an A/B strategy comparison described by a plan file."""
    base = Path(plan_path).parent
    data = json.loads(Path(plan_path).read_text())
    if trials is not None and trials < 1:
        _fail("trials must be >= 1")
    try:
        graphs = {
            label: load_graph(path if Path(path).is_absolute() else base / path)
            for label, path in data["graphs"].items()
        }
    except GraphFormatError as exc:
        _fail(str(exc))
    model, profiles = _load_user_model(data.get("population", {}), base)
    plan = SimulationPlan(
        graphs=graphs,
        strategies=tuple(data.get("strategies", ("advanced", "baseline"))),
        trials=trials if trials is not None else int(data.get("trials", 100)),
        seed=seed if seed is not None else int(data.get("seed", 0)),
        simulations=int(data.get("simulations", 1000)),
        max_move_size=int(data.get("max_move_size", 6)),
        user_withholds=bool(data.get("user_withholds", True)),
        flagged_graph=data.get("flagged_graph"),
        profiles=tuple(profiles),
    )
    report = run_simulation(plan, model)

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "trials.jsonl", "w") as handle:
        for strategy in plan.strategies:
            for result in report.results[strategy]:
                record = result.record
                handle.write(
                    canonical_json(
                        {
                            "v": 1,
                            "trial": result.trial,
                            "seed": result.seed,
                            "strategy": strategy,
                            "graph": record.graph_label,
                            "belief_before": round(record.belief_before, 9),
                            "belief_after": round(record.belief_after, 9),
                            "reward": round(result.reward, 9),
                            "transcript": analytics_transcript(record),
                        }
                    )
                    + "\n"
                )
    summary = comparison_summary(plan, report)
    flagged = plan.flagged_graph or sorted(plan.graphs)[0]
    lines = []
    for strategy in plan.strategies:
        records = report.records(strategy)
        lines.append(f"== {strategy} ==")
        lines.append(
            analytics.render_structural_table(
                analytics.structural_table(records, flagged), flag_name="Flagged Graph"
            )
        )
        lines.append("")
        lines.append(analytics.render_change_report(records))
        lines.append(f"mean reward: {report.mean_reward(strategy):.6f}")
        lines.append("")
        summary["arms"][strategy]["analytics"] = analytics.summary_record(
            records, flagged
        )
    (out / "report.txt").write_text("\n".join(lines))
    (out / "summary.json").write_text(json.dumps(summary, indent=2) + "\n")
    click.echo("\n".join(lines))
    click.echo(f"wrote {out / 'trials.jsonl'}, {out / 'report.txt'}, {out / 'summary.json'}")


def analytics_transcript(record) -> dict:
    from aps.dialogue import transcript

    return transcript(record.dialogue, graph_label=record.graph_label)


@main.command()
@click.option("--data", "data_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--counts", default="1,2,3", help="Candidate component counts, comma separated.")
@click.option("--seed", type=int, default=0)
@click.option("--restarts", type=int, default=8)
@click.option("--out", "out_path", required=True, type=click.Path(dir_okay=False))
def fit(data_path, counts, seed, restarts, out_path):
    """Fit belief mixtures per argument from a survey CSV."""
    try:
        candidate_counts = [int(c) for c in counts.split(",") if c.strip()]
    except ValueError:
        _fail(f"bad --counts value {counts!r}")
    dataset = load_belief_dataset(data_path)
    if not dataset:
        _fail(f"{data_path}: no rows")
    mixtures = {}
    rng = np.random.default_rng(seed)
    for argument_id, samples in sorted(dataset.items()):
        if len(candidate_counts) == 1:
            fit_result = fit_mixture_em(
                samples, candidate_counts[0], rng, restarts=restarts
            )
            mixtures[argument_id] = fit_result.mixture
        else:
            best, fits = select_component_count(
                samples, candidate_counts, rng, restarts=restarts
            )
            mixtures[argument_id] = fits[best].mixture
        click.echo(
            f"{argument_id}: {len(mixtures[argument_id].components)} component(s) "
            f"from {len(samples)} samples"
        )
    save_mixture_bundle(mixtures, out_path)
    click.echo(f"wrote {out_path}")


@main.command("train-trees")
@click.option("--rankings", "rankings_path", required=True, type=click.Path(exists=True))
@click.option("--profiles", "profiles_path", required=True, type=click.Path(exists=True))
@click.option("--depth-grid", default="1,2,3,4")
@click.option("--min-leaf-grid", default="1,2,5,10")
@click.option("--folds", type=int, default=5)
@click.option("--seed", type=int, default=0)
@click.option("--out", "out_path", required=True, type=click.Path(dir_okay=False))
def train_trees(rankings_path, profiles_path, depth_grid, min_leaf_grid, folds, seed, out_path):
    """Train one preference tree per concern pair."""
    rankings = load_rankings(rankings_path)
    profiles = load_profiles(profiles_path)
    missing = sorted({r.participant_id for r in rankings} - set(profiles))
    if missing:
        click.echo(f"warning: {len(missing)} ranked participants lack profiles", err=True)
    config = TreeTrainConfig(
        depth_grid=tuple(int(d) for d in depth_grid.split(",")),
        min_leaf_grid=tuple(int(m) for m in min_leaf_grid.split(",")),
        folds=folds,
    )
    bundle = train_tree_bundle(rankings, profiles, config, np.random.default_rng(seed))
    bundle.save(out_path)
    click.echo(f"wrote {out_path} ({len(bundle.trees)} pair trees)")


@main.command()
@click.option("--corpus", "corpus_path", required=True, type=click.Path(exists=True))
@click.option(
    "--graph",
    "graph_specs",
    multiple=True,
    help="label=path of every graph the corpus references.",
)
@click.option("--flag", "flagged", default=None, help="Graph label counted as flagged.")
@click.option("--out-dir", type=click.Path(file_okay=False), default=None)
def analyze(corpus_path, graph_specs, flagged, out_dir):
    """Structural and belief-change tables for a trial corpus."""
    graphs = {}
    for entry in graph_specs:
        label, _, path = entry.partition("=")
        if not path:
            _fail(f"--graph needs label=path, got {entry!r}")
        graphs[label] = load_graph(path)
    records = []
    with open(corpus_path) as handle:
        for line_number, line in enumerate(handle, start=1):
            if not line.strip():
                continue
            row = json.loads(line)
            label = row["graph"]
            if label not in graphs:
                _fail(f"{corpus_path}:{line_number}: no --graph for label {label!r}")
            dialogue = dialogue_from_transcript(row["transcript"], graphs[label])
            records.append(
                analytics.TrialRecord(
                    dialogue=dialogue,
                    strategy=row["strategy"],
                    belief_before=row["belief_before"],
                    belief_after=row["belief_after"],
                    graph_label=label,
                )
            )
    flagged = flagged or (sorted(graphs)[0] if graphs else "")
    table = analytics.structural_table(records, flagged)
    output = [analytics.render_structural_table(table, flag_name="Flagged Graph")]
    if records:
        output.append("")
        output.append(analytics.render_change_report(records))
    text = "\n".join(output)
    click.echo(text)
    if out_dir:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        (out / "tables.txt").write_text(text + "\n")
        analytics.save_summary(
            analytics.summary_record(records, flagged), out / "summary.json"
        )
        click.echo(f"wrote {out / 'tables.txt'}, {out / 'summary.json'}")


@main.command()
@click.option("--config", "config_path", required=True, type=click.Path(exists=True))
@click.option("--host", default=None)
@click.option("--port", type=int, default=None)
def serve(config_path, host, port):
    """Serve the dialogue session API."""
    import os

    import uvicorn

    from aps.service import ServiceConfig, create_app

    try:
        config = ServiceConfig.from_file(config_path)
    except (GraphFormatError, FileNotFoundError, KeyError, ValueError) as exc:
        _fail(f"{config_path}: {exc}")
    data = json.loads(Path(config_path).read_text())
    host = host or os.environ.get("APS_HOST", data.get("host", "127.0.0.1"))
    port = port or int(os.environ.get("APS_PORT", data.get("port", 8642)))
    uvicorn.run(create_app(config), host=host, port=port, log_level="warning")


@main.command()
@click.option("--config", "config_path", type=click.Path(exists=True), default=None,
              help="Service config supplying graphs and user model (matches serve).")
@click.option("--graph", "graph_path", type=click.Path(exists=True), default=None,
              help="Bare graph file when no service config is used.")
@click.option("--graph-id", default=None, help="Graph label (config key or file stem).")
@click.option("--script", "script_path", required=True, type=click.Path(exists=True))
@click.option("--out", "out_path", type=click.Path(dir_okay=False), default=None)
def replay(config_path, graph_path, graph_id, script_path, out_path):
    """Engine-only trace of a scripted dialogue (no HTTP involved).

    With --config, the engine is wired exactly like a served session, so the
    trace is byte-identical to the transcript of the same script over HTTP.
    """
    script = json.loads(Path(script_path).read_text())
    if config_path:
        from aps.service import ServiceConfig

        service_config = ServiceConfig.from_file(config_path)
        if graph_id is None:
            stance = float(script.get("stance", 1.0))
            topic = script.get("topic") or service_config.default_topic
            if topic not in service_config.topics:
                _fail(f"no topic {topic!r} in {config_path}")
            positive, negative = service_config.topics[topic]
            graph_id = positive if stance > 0 else negative
        if graph_id not in service_config.graphs:
            _fail(f"no graph {graph_id!r} in {config_path}")
        graph = service_config.graphs[graph_id]
        model = service_config.user_model
        engine_config = service_config.engine
    elif graph_path:
        graph = load_graph(graph_path)
        graph_id = graph_id or Path(graph_path).stem
        model = UserModel()
        engine_config = EngineConfig(
            simulations=int(script.get("simulations", 1000)),
            max_move_size=int(script.get("max_move_size", 6)),
        )
    else:
        _fail("pass --config or --graph")
    profile = None
    if script.get("profile"):
        profile = UserProfile.from_record(script["profile"])
    engine = SessionEngine(
        graph,
        graph_id,
        model,
        strategy=script.get("strategy", "advanced"),
        stance=float(script.get("stance", 1.0)),
        profile=profile,
        seed=int(script.get("seed", 0)),
        config=engine_config,
    )
    try:
        for selections in script.get("selections", []):
            if engine.terminated:
                _fail("script continues past termination")
            if selections == "accept-all":
                selections = [
                    {"argument": listing["argument"], "null": "acc"}
                    for listing in engine.listings()
                ]
            engine.submit(selections)
        if "belief_after" in script and engine.terminated:
            engine.record_belief("after", float(script["belief_after"]))
    except SessionError as exc:
        _fail(f"script rejected: {exc}")
    canonical = canonical_json(engine.transcript())
    if out_path:
        Path(out_path).write_text(canonical)
        click.echo(f"wrote {out_path}")
    else:
        click.echo(canonical)


if __name__ == "__main__":
    sys.exit(main())
