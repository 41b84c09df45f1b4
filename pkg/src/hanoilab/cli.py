"""Command-line pipeline: solve targets, generate cohorts, recover rewards,
compare models, summarize datasets, and serve the live experiment.

Every run writes a ``manifest.json`` next to its outputs recording the
subcommand, inputs, seed, and configuration; reruns with an equal manifest
produce byte-identical outputs.  A ``--config`` JSON file supplies defaults
that explicit flags override.
"""

from __future__ import annotations

import json
from pathlib import Path

import click

from . import __version__
from .agents import AgentSpec, CohortProtocol, simulate_cohort
from .errors import EmptyDataset, HanoiLabError
from .feedback import Condition
from .irl import (
    DEFAULT_LAMBDA_GRID,
    Demonstrations,
    FeatureMap,
    IrlConfig,
    cross_validate,
    reward_map_csv,
    reward_map_export,
)
from .mdp import target_reward_mdp, value_iteration
from .models import MODEL_LAMBDA_GRID, MODELS, model_selection_report, partition_groups
from .stats import per_trial_csv, summarize, summary_csv, summary_json, two_sample_t_test
from .toh import build_state_graph, path_between, start_state
from .trajectories import (
    PHASE_TRAINING,
    filter_condition,
    filter_phase,
    filter_successful,
    filter_trials,
    read_jsonl,
    split_by_triangle,
    write_jsonl,
)


def _load_config(path: str | None) -> dict:
    if not path:
        return {}
    with open(path, "r", encoding="utf-8") as fh:
        return json.load(fh)


def _setting(flag, config: dict, key: str, default):
    """Flag beats config file beats default."""
    if flag is not None:
        return flag
    return config.get(key, default)


def _write_manifest(out: Path, subcommand: str, params: dict, outputs: list[str]) -> None:
    manifest = {
        "artifact_version": __version__,
        "subcommand": subcommand,
        "params": params,
        "outputs": sorted(outputs),
    }
    (out / "manifest.json").write_text(
        json.dumps(manifest, sort_keys=True, indent=2) + "\n", encoding="utf-8"
    )


def _out_dir(out: str) -> Path:
    p = Path(out)
    p.mkdir(parents=True, exist_ok=True)
    return p


def _parse_grid(text: str | None) -> tuple[float, ...] | None:
    if text is None:
        return None
    return tuple(float(x) for x in text.split(",") if x.strip() != "")


class _CliError(click.ClickException):
    exit_code = 1


@click.group()
@click.version_option(version=__version__, prog_name="hanoilab")
def main():
    """Tower of Hanoi feedback experiments."""


@main.command()
@click.option("--n", type=int, default=None, help="Disk count.")
@click.option("--target", "target", default=None, help="Target state digits.")
@click.option("--gamma", type=float, default=None)
@click.option("--out", default="out/solve", show_default=True)
@click.option("--seed", type=int, default=None, help="Recorded in the manifest only.")
@click.option("--config", "config_path", default=None, help="JSON config file.")
def solve(n, target, gamma, out, seed, config_path):
    """Value-iterate one target and export values, Q table, and optimal path."""
    cfg = _load_config(config_path)
    n = int(_setting(n, cfg, "n", 4))
    gamma = float(_setting(gamma, cfg, "gamma", 0.95))
    target = _setting(target, cfg, "target", None)
    if target is None:
        raise _CliError("--target is required")
    try:
        graph = build_state_graph(n)
        table = value_iteration(target_reward_mdp(graph, target, gamma))
        path = path_between(graph, start_state(n), target)
    except HanoiLabError as exc:
        raise _CliError(str(exc)) from exc
    outdir = _out_dir(out)
    (outdir / "values.csv").write_text(table.values_csv(), encoding="utf-8")
    (outdir / "q_values.csv").write_text(table.q_csv(), encoding="utf-8")
    (outdir / "path.json").write_text(
        json.dumps({"start": path[0], "target": target, "moves": len(path) - 1, "path": path},
                   sort_keys=True, indent=2) + "\n",
        encoding="utf-8",
    )
    _write_manifest(outdir, "solve", {"n": n, "target": target, "gamma": gamma, "seed": seed},
                    ["values.csv", "q_values.csv", "path.json"])
    click.echo(f"solved n={n} target={target}: optimal path length {len(path) - 1}")


@main.command()
@click.option("--spec", "spec_path", required=True, help="Cohort spec JSON.")
@click.option("--out", default="out/simulate", show_default=True)
@click.option("--seed", type=int, default=None, help="Overrides the spec's base seed.")
@click.option("--config", "config_path", default=None)
def simulate(spec_path, out, seed, config_path):
    """Generate a synthetic cohort dataset (JSONL).

    The spec file either lists agents explicitly under "agents" or gives a
    template: {"condition", "count", "model", "k", "gamma", "target_weight",
    "base_seed"}.
    """
    cfg = _load_config(config_path)
    with open(spec_path, "r", encoding="utf-8") as fh:
        spec = json.load(fh)
    spec = {**cfg, **spec}
    condition = Condition(spec.get("condition", "numeric"))
    base_seed = int(seed if seed is not None else spec.get("base_seed", 0))
    try:
        if "agents" in spec:
            agents = [
                AgentSpec(
                    model=a["model"],
                    k=float(a.get("k", 1.0)),
                    gamma=float(a.get("gamma", 0.95)),
                    rng_seed=int(a.get("seed", base_seed + i)),
                    target_weight=float(a.get("target_weight", 1.0)),
                )
                for i, a in enumerate(spec["agents"])
            ]
        else:
            agents = [
                AgentSpec(
                    model=spec.get("model", "M2"),
                    k=float(spec.get("k", 1.0)),
                    gamma=float(spec.get("gamma", 0.95)),
                    rng_seed=base_seed + i,
                    target_weight=float(spec.get("target_weight", 1.0)),
                )
                for i in range(int(spec.get("count", 20)))
            ]
        records = simulate_cohort(agents, CohortProtocol(condition=condition))
    except (HanoiLabError, ValueError, KeyError) as exc:
        raise _CliError(f"bad cohort spec: {exc}") from exc
    outdir = _out_dir(out)
    count = write_jsonl(records, outdir / "dataset.jsonl")
    _write_manifest(outdir, "simulate",
                    {"spec": spec, "base_seed": base_seed}, ["dataset.jsonl"])
    click.echo(f"wrote {count} records to {outdir / 'dataset.jsonl'}")


def _apply_filters(records, trials: str | None, success_only: bool):
    if trials:
        lo, _, hi = trials.partition("-")
        records = filter_trials(records, int(lo), int(hi or lo))
    if success_only:
        records = filter_successful(records)
    return records


@main.command("irl")
@click.option("--data", "data_path", required=True, help="Trajectory JSONL file.")
@click.option("--features", type=click.Choice(["all_states", "subset8"]), default=None)
@click.option("--trials", default=None, help="Keep trial indices lo-hi (e.g. 6-10).")
@click.option("--success-only", is_flag=True, default=False)
@click.option("--split-by-triangle", "split", is_flag=True, default=False)
@click.option("--gamma", type=float, default=None)
@click.option("--lambda-grid", "lambda_grid", default=None, help="Comma-separated values.")
@click.option("--folds", type=int, default=None)
@click.option("--seed", type=int, default=None)
@click.option("--out", default="out/irl", show_default=True)
@click.option("--config", "config_path", default=None)
def irl_cmd(data_path, features, trials, success_only, split, gamma, lambda_grid,
            folds, seed, out, config_path):
    """Recover rewards from a dataset by cross-validated MaxEnt IRL."""
    cfg = _load_config(config_path)
    features = _setting(features, cfg, "features", "all_states")
    gamma = float(_setting(gamma, cfg, "gamma", 0.95))
    folds = int(_setting(folds, cfg, "folds", 5))
    seed = int(_setting(seed, cfg, "seed", 0))
    grid = _parse_grid(lambda_grid) or tuple(cfg.get("lambda_grid", DEFAULT_LAMBDA_GRID))
    trials = _setting(trials, cfg, "trials", None)

    records = read_jsonl(data_path)
    records = [r for r in records if r.phase == PHASE_TRAINING]
    records = _apply_filters(records, trials, success_only)
    if not records:
        raise _CliError("no records left after filtering")
    ns = {r.n for r in records}
    if len(ns) != 1:
        raise _CliError(f"mixed disk counts in dataset: {sorted(ns)}")
    graph = build_state_graph(ns.pop())
    featmap = FeatureMap.for_mode(features, graph)
    config = IrlConfig(gamma=gamma, lambda_grid=grid, folds=folds, seed=seed)

    splits = split_by_triangle(records) if split else {"all": records}
    outdir = _out_dir(out)
    outputs = []
    for name in sorted(splits):
        demos = Demonstrations.from_records(splits[name], graph)
        try:
            result = cross_validate(demos, featmap, config)
        except HanoiLabError as exc:
            raise _CliError(f"split {name}: {exc}") from exc
        rm = reward_map_export(result, featmap, graph)
        (outdir / f"irl_{name}.json").write_text(
            json.dumps(result.to_dict(), sort_keys=True, indent=2) + "\n", encoding="utf-8")
        (outdir / f"reward_map_{name}.csv").write_text(reward_map_csv(rm), encoding="utf-8")
        outputs += [f"irl_{name}.json", f"reward_map_{name}.csv"]
        click.echo(
            f"split {name}: {demos.n_paths} trajectories, lambda={result.selected_lambda}, "
            f"train logL={result.train_loglik:.3f}"
        )
    _write_manifest(outdir, "irl",
                    {"data": str(data_path), "features": features, "trials": trials,
                     "success_only": success_only, "split_by_triangle": split,
                     "gamma": gamma, "lambda_grid": list(grid), "folds": folds, "seed": seed},
                    outputs)


@main.command("fit-models")
@click.option("--data", "data_path", required=True)
@click.option("--featmaps", default="subset8,all_states", show_default=True)
@click.option("--models", "models_opt", default=",".join(MODELS), show_default=True)
@click.option("--lambda-grid", "lambda_grid", default=None)
@click.option("--folds", type=int, default=None)
@click.option("--gamma", type=float, default=None)
@click.option("--seed", type=int, default=None)
@click.option("--out", default="out/fit_models", show_default=True)
@click.option("--config", "config_path", default=None)
def fit_models(data_path, featmaps, models_opt, lambda_grid, folds, gamma, seed, out, config_path):
    """Fit the four feedback-integration models per group and rank by AIC/BIC."""
    cfg = _load_config(config_path)
    gamma = float(_setting(gamma, cfg, "gamma", 0.95))
    folds = int(_setting(folds, cfg, "folds", 5))
    seed = int(_setting(seed, cfg, "seed", 0))
    grid = _parse_grid(lambda_grid) or tuple(cfg.get("lambda_grid", MODEL_LAMBDA_GRID))
    modes = [m.strip() for m in featmaps.split(",") if m.strip()]
    models = [m.strip() for m in models_opt.split(",") if m.strip()]

    records = filter_phase(read_jsonl(data_path), PHASE_TRAINING)
    if not records:
        raise _CliError("dataset holds no training records")
    try:
        partition = partition_groups(records, n=records[0].n)
        report = model_selection_report(
            partition,
            IrlConfig(gamma=gamma, lambda_grid=grid, folds=folds, seed=seed),
            featmap_modes=modes,
            models=models,
        )
    except HanoiLabError as exc:
        raise _CliError(str(exc)) from exc
    outdir = _out_dir(out)
    (outdir / "model_selection.csv").write_text(report.to_csv(), encoding="utf-8")
    (outdir / "model_selection.txt").write_text(report.to_text(), encoding="utf-8")
    for row in report.rows:
        if row.warning:
            click.echo(f"warning: group {row.group} ({row.featmap}): {row.warning}")
    _write_manifest(outdir, "fit-models",
                    {"data": str(data_path), "featmaps": modes, "models": models,
                     "lambda_grid": list(grid), "folds": folds, "gamma": gamma, "seed": seed},
                    ["model_selection.csv", "model_selection.txt"])
    click.echo(report.to_text())


@main.command("stats")
@click.option("--data", "data_path", required=True)
@click.option("--condition", default=None)
@click.option("--phase", default=None)
@click.option("--compare", nargs=2, default=None, help="Two condition names to t-test.")
@click.option("--welch", is_flag=True, default=False)
@click.option("--out", default="out/stats", show_default=True)
@click.option("--seed", type=int, default=None, help="Recorded in the manifest only.")
@click.option("--config", "config_path", default=None)
def stats_cmd(data_path, condition, phase, compare, welch, out, seed, config_path):
    """Summarize a dataset; optionally t-test two conditions' percentage scores."""
    _load_config(config_path)
    records = read_jsonl(data_path)
    try:
        bundle = summarize(records, condition=condition, phase=phase)
    except EmptyDataset as exc:
        raise _CliError(str(exc)) from exc
    outdir = _out_dir(out)
    (outdir / "summary.csv").write_text(summary_csv(bundle), encoding="utf-8")
    (outdir / "summary.json").write_text(summary_json(bundle) + "\n", encoding="utf-8")
    (outdir / "per_trial_means.csv").write_text(per_trial_csv(bundle), encoding="utf-8")
    outputs = ["summary.csv", "summary.json", "per_trial_means.csv"]
    if compare:
        cond_a, cond_b = compare
        pool = filter_phase(records, phase) if phase else records
        a = [r.pct for r in filter_condition(pool, cond_a)]
        b = [r.pct for r in filter_condition(pool, cond_b)]
        try:
            res = two_sample_t_test(a, b, welch=welch)
        except HanoiLabError as exc:
            raise _CliError(str(exc)) from exc
        (outdir / "ttest.json").write_text(
            json.dumps({"a": cond_a, "b": cond_b, "t": res.t, "p": res.p,
                        "df": res.df, "welch": res.welch}, sort_keys=True, indent=2) + "\n",
            encoding="utf-8",
        )
        outputs.append("ttest.json")
        click.echo(f"t({res.df:.1f}) = {res.t:.4f}, p = {res.p:.4g}")
    _write_manifest(outdir, "stats",
                    {"data": str(data_path), "condition": condition, "phase": phase,
                     "compare": list(compare) if compare else None, "welch": welch,
                     "seed": seed},
                    outputs)
    click.echo(summary_csv(bundle).rstrip("\n"))


@main.command()
@click.option("--port", type=int, default=8000, show_default=True)
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--data-dir", default="data", show_default=True)
@click.option("--seed", type=int, default=None)
@click.option("--ui-dir", default=None, help="Serve a built web UI from this directory.")
def serve(port, host, data_dir, seed, ui_dir):
    """Run the live experiment service."""
    import uvicorn

    from .service import ExperimentService, create_app

    service = ExperimentService(data_dir=data_dir, seed=seed)
    app = create_app(service)
    if ui_dir:
        from fastapi.staticfiles import StaticFiles

        app.mount("/", StaticFiles(directory=ui_dir, html=True), name="ui")
    uvicorn.run(app, host=host, port=port)


if __name__ == "__main__":
    main()
