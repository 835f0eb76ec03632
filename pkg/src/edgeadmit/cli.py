"""Config-driven experiment commands: solve, train, evaluate, compare.

Exit codes: 0 success, 2 configuration error, 3 numeric failure.
"""

from __future__ import annotations

import sys
from pathlib import Path

import click
import numpy as np

from . import artifacts, config as cfgmod, dp, evaluate as ev, learners, salmut
from .config import ConfigError, Experiment
from .dp import SolverError
from .scenarios import trajectory


def _load_experiment(config_path, overrides) -> Experiment:
    cfg = cfgmod.load_config(config_path, overrides)
    return Experiment.from_config(cfg)


def _common_overrides(seed, out, scenario, horizon_scale, learner=None) -> dict:
    ov: dict = {}
    if seed is not None:
        ov["seeds"] = [seed]
    if out is not None:
        ov["output_dir"] = out
    if scenario is not None:
        ov["scenario"] = {"kind": scenario}
    if learner is not None:
        ov["learner"] = {"kind": learner}
    return ov


def _apply_horizon_scale(cfg: dict, factor: float | None) -> None:
    if factor is not None:
        cfg["learner"]["horizon"] = max(1, round(cfg["learner"]["horizon"] * factor))


def config_option(fn):
    fn = click.option("--config", "config_path", type=click.Path(), default=None,
                      help="JSON config file; defaults cover the canonical setup.")(fn)
    fn = click.option("--seed", type=int, default=None, help="Single seed override.")(fn)
    fn = click.option("--out", type=click.Path(), default=None, help="Output directory.")(fn)
    fn = click.option("--scenario", type=click.IntRange(1, 6), default=None,
                      help="Traffic scenario kind.")(fn)
    fn = click.option("--horizon-scale", type=float, default=None,
                      help="Scale the training horizon (change points scale with it).")(fn)
    return fn


@click.group()
def main():
    """Edge-server admission control: planning, learning, evaluation."""


def _run(body) -> None:
    try:
        body()
    except ConfigError as exc:
        click.echo(str(exc), err=True)
        sys.exit(2)
    except FileNotFoundError as exc:
        click.echo(str(exc), err=True)
        sys.exit(2)
    except SolverError as exc:
        click.echo(f"numeric failure: {exc} (residual {exc.residual!r})", err=True)
        sys.exit(3)


@main.command()
@config_option
@click.option("--tol", type=float, default=None, help="Value-iteration tolerance.")
@click.option("--self-loop-variant", is_flag=True, default=False,
              help="Add the self-loop continuation to the offload branch.")
def solve(config_path, seed, out, scenario, horizon_scale, tol, self_loop_variant):
    """Solve the planning problem and write the solution artifact."""

    def body():
        ov = _common_overrides(seed, out, scenario, horizon_scale)
        if tol is not None:
            ov.setdefault("solver", {})["tol"] = tol
        if self_loop_variant:
            ov.setdefault("solver", {})["self_loop"] = True
        exp = _load_experiment(config_path, ov)
        _apply_horizon_scale(exp.raw, horizon_scale)
        sol = dp.value_iteration(
            exp.planning_rate(),
            exp.params,
            exp.costs,
            exp.resources,
            tol=exp.raw["solver"]["tol"],
            max_iter=exp.raw["solver"]["max_iter"],
            self_loop=exp.raw["solver"]["self_loop"],
        )
        sha = artifacts.config_hash(exp.raw)
        out_dir = exp.output_dir / "dp"
        artifacts.write_json(out_dir / "solution.json", artifacts.solution_to_dict(sol, sha))
        artifacts.write_json(
            out_dir / "policy.json",
            artifacts.policy_artifact("dp", sha, policy=sol.policy.tolist()),
        )
        artifacts.write_manifest(out_dir / "manifest.json", "solve", exp.raw, exp.seeds)
        x0, l0 = exp.eval_config.initial_state
        click.echo(
            f"iterations={sol.iterations} residual={sol.residual!r} "
            f"V({x0},{l0})={float(sol.v[x0, l0])!r}"
        )

    _run(body)


def _make_eval_hook(exp: Experiment, seed: int, kind: str):
    """Periodic evaluation against the traffic seen at the evaluation step."""
    ecfg = exp.eval_config

    def hook(step: int, lam: float, snapshot: np.ndarray) -> dict[str, float]:
        if kind == "salmut":
            policy = ev.ThresholdPolicy(snapshot)
        else:
            policy = ev.TablePolicy(dp.greedy_policy(snapshot, exp.params.buffer_capacity))
        report = ev.evaluate(
            policy, ecfg, lam, exp.params, exp.costs, exp.resources,
            seed=(seed << 20) + step,
        )
        return {
            "mean": report.mean,
            "q1": report.q1,
            "median": report.median,
            "q3": report.q3,
        }

    return hook


@main.command()
@config_option
@click.option("--learner", type=click.Choice(["salmut", "qlearning"]), default=None)
@click.option("--paper-literal-sign", is_flag=True, default=False,
              help="Use the published ascent sign in the threshold update.")
@click.option("--no-periodic-eval", is_flag=True, default=False,
              help="Skip rollout evaluation at eval points (faster).")
def train(config_path, seed, out, scenario, horizon_scale, learner, paper_literal_sign,
          no_periodic_eval):
    """Train the configured learner for every seed; write logs and artifacts."""

    def body():
        ov = _common_overrides(seed, out, scenario, horizon_scale, learner)
        if paper_literal_sign:
            ov.setdefault("learner", {}).setdefault("salmut", {})["paper_literal_sign"] = True
        exp = _load_experiment(config_path, ov)
        _apply_horizon_scale(exp.raw, horizon_scale)
        kind = exp.raw["learner"]["kind"]
        if kind not in ("salmut", "qlearning"):
            raise ConfigError("learner.kind", "train requires salmut or qlearning")
        sha = artifacts.config_hash(exp.raw)
        out_dir = exp.output_dir / kind
        horizon = exp.raw["learner"]["horizon"]
        logs = []
        for s in exp.seeds:
            hook = None if no_periodic_eval else _make_eval_hook(exp, s, kind)
            seed_dir = out_dir / f"seed_{s}"
            if kind == "salmut":
                scfg = cfgmod.build_salmut_config(exp.raw)
                result = salmut.train(
                    exp.scenario, exp.params, exp.costs, exp.resources, scfg, s,
                    eval_hook=hook,
                )
                art = artifacts.policy_artifact(
                    "salmut", sha, seed=s,
                    tau=result.tau.tolist(), temperature=scfg.temperature,
                )
            else:
                qcfg = cfgmod.build_qlearning_config(exp.raw)
                result = learners.qlearning_train(
                    exp.scenario, exp.params, exp.costs, exp.resources, qcfg, s,
                    eval_hook=hook,
                )
                art = artifacts.policy_artifact(
                    "qlearning", sha, seed=s,
                    q=result.q.tolist(), policy=result.policy.tolist(),
                )
            artifacts.write_json(seed_dir / "policy.json", art)
            artifacts.log_rows_to_csv(seed_dir / "log.csv", result.log)
            artifacts.write_csv(
                seed_dir / "trajectory.csv",
                ("step", "lambda", "n_users"),
                trajectory(exp.scenario, horizon, s),
            )
            logs.append(result.log)
            click.echo(f"{kind} seed {s}: done ({horizon} steps)")
        curve = ev.aggregate_training_curves(logs)
        if curve:
            artifacts.write_csv(
                out_dir / "training_curve.csv", ("step", "median", "q1", "q3"), curve
            )
        artifacts.write_manifest(out_dir / "manifest.json", "train", exp.raw, exp.seeds)

    _run(body)


def _policy_from_artifact(art: dict, exp: Experiment):
    kind = art["kind"]
    if kind == "salmut":
        return ev.ThresholdPolicy(np.array(art["tau"]))
    if kind == "qlearning":
        return ev.TablePolicy(np.array(art["policy"]))
    if kind == "dp":
        return ev.TablePolicy(np.array(art["policy"]))
    if kind == "baseline":
        return ev.StaticPolicy(
            learners.BaselinePolicy(art["accept_below"]), exp.params.buffer_capacity
        )
    raise ValueError(f"unknown policy kind {kind!r}")


@main.command()
@config_option
@click.option("--artifact", "artifact_path", type=click.Path(), default=None,
              help="Policy artifact to evaluate.")
@click.option("--check-structure", "structure_path", type=click.Path(), default=None,
              help="Print monotone-value / threshold-policy verdicts for a solution artifact.")
@click.option("--curves-from", "curves_dir", type=click.Path(), default=None,
              help="Aggregate per-seed training logs under DIR into a training curve.")
def evaluate(config_path, seed, out, scenario, horizon_scale, artifact_path,
             structure_path, curves_dir):
    """Evaluate a policy artifact, check structure, or aggregate training curves."""

    def body():
        exp = _load_experiment(
            config_path, _common_overrides(seed, out, scenario, horizon_scale)
        )
        did_something = False
        if structure_path is not None:
            sol = artifacts.load_artifact(Path(structure_path), artifacts.SOLUTION_SCHEMA)
            v = np.array(sol["v"])
            policy = np.array(sol["policy"])
            mono = dp.check_value_monotone(v)
            thr = dp.check_threshold_structure(policy)
            click.echo(
                "value monotone in load: "
                + ("PASS" if mono.passed else f"FAIL ({len(mono.violations)} violations)")
            )
            click.echo(
                "threshold policy: "
                + ("PASS" if thr.passed else f"FAIL (first violation {thr.violation})")
            )
            did_something = True
        if curves_dir is not None:
            rows = _aggregate_curves_from_dir(Path(curves_dir))
            artifacts.write_csv(
                Path(curves_dir) / "training_curve.csv",
                ("step", "median", "q1", "q3"),
                rows,
            )
            click.echo(f"training_curve.csv: {len(rows)} points")
            did_something = True
        if artifact_path is not None:
            art = artifacts.load_artifact(Path(artifact_path), artifacts.POLICY_SCHEMA)
            policy = _policy_from_artifact(art, exp)
            report = ev.evaluate(
                policy,
                exp.eval_config,
                exp.planning_rate(),
                exp.params,
                exp.costs,
                exp.resources,
                seed=exp.seeds[0],
            )
            out_dir = exp.output_dir / "eval"
            artifacts.write_json(
                out_dir / "report.json",
                {
                    "kind": art["kind"],
                    "mean": report.mean,
                    "q1": report.q1,
                    "median": report.median,
                    "q3": report.q3,
                    "n_rollouts": report.n_rollouts,
                    "lambda": exp.planning_rate(),
                    "config_sha256": artifacts.config_hash(exp.raw),
                },
            )
            artifacts.write_manifest(out_dir / "manifest.json", "evaluate", exp.raw, exp.seeds)
            click.echo(
                f"{art['kind']}: mean={report.mean!r} median={report.median!r} "
                f"q1={report.q1!r} q3={report.q3!r}"
            )
            did_something = True
        if not did_something:
            raise ConfigError("evaluate", "nothing to do: pass --artifact, "
                                          "--check-structure or --curves-from")

    _run(body)


def _aggregate_curves_from_dir(root: Path):
    import csv

    logs = []
    for log_path in sorted(root.glob("seed_*/log.csv")):
        rows = []
        with open(log_path, newline="") as fh:
            for rec in csv.DictReader(fh):
                mean = rec["eval_mean"]
                rows.append(
                    salmut.LogRow(
                        step=int(rec["step"]),
                        policy_hash=rec["policy_hash"],
                        eval_mean=float(mean) if mean else None,
                        eval_q1=None,
                        eval_median=None,
                        eval_q3=None,
                        grad_abs_window=float(rec["grad_abs_window"]),
                        grad_step_window=float(rec["grad_step_window"]),
                    )
                )
        logs.append(rows)
    if not logs:
        raise FileNotFoundError(f"no seed_*/log.csv under {root}")
    return ev.aggregate_training_curves(logs)


@main.command()
@config_option
@click.option("--trace-seed", type=int, default=1234, show_default=True,
              help="Seed of the shared event trace.")
@click.option("--trace-length", type=int, default=None,
              help="Trace length; defaults to the configured horizon.")
def compare(config_path, seed, out, scenario, horizon_scale, trace_seed, trace_length):
    """Run planner, learners and baseline on one shared trace; emit metrics CSVs.

    Expects dp/solution.json plus salmut and qlearning seed_*/policy.json
    artifacts under the output directory (from `solve` and `train`).
    """

    def body():
        exp = _load_experiment(
            config_path, _common_overrides(seed, out, scenario, horizon_scale)
        )
        _apply_horizon_scale(exp.raw, horizon_scale)
        root = exp.output_dir
        sol = artifacts.load_artifact(root / "dp" / "solution.json", artifacts.SOLUTION_SCHEMA)
        policies = {"dp": ev.TablePolicy(np.array(sol["policy"]))}
        for kind in ("salmut", "qlearning"):
            art_path = root / kind / f"seed_{exp.seeds[0]}" / "policy.json"
            art = artifacts.load_artifact(art_path, artifacts.POLICY_SCHEMA)
            policies[kind] = _policy_from_artifact(art, exp)
        policies["baseline"] = ev.StaticPolicy(
            cfgmod.build_baseline(exp.raw), exp.params.buffer_capacity
        )

        horizon = trace_length or exp.raw["learner"]["horizon"]
        trace = ev.EventTrace.generate(trace_seed, horizon)
        series = ev.behavioral_compare(
            policies,
            exp.scenario,
            exp.params,
            exp.costs,
            exp.resources,
            trace,
            window=exp.eval_config.window,
            overload_level=exp.eval_config.overload_level,
            initial_state=exp.eval_config.initial_state,
        )
        out_dir = root / "compare"
        artifacts.write_csv(
            out_dir / "behavioral.csv",
            ("window", "policy", "c_ov", "c_off", "cost_discounted", "cost_undiscounted"),
            (
                (w.index, name, w.c_ov, w.c_off, w.cost_discounted, w.cost_undiscounted)
                for name in sorted(series)
                for w in series[name]
            ),
        )
        artifacts.write_csv(
            out_dir / "scatter.csv",
            ("policy", "window", "c_off", "c_ov"),
            (
                (name, w.index, w.c_off, w.c_ov)
                for name in sorted(series)
                for w in series[name]
            ),
        )
        cost_rows = []
        for name in sorted(policies):
            report = ev.evaluate(
                policies[name],
                exp.eval_config,
                exp.planning_rate(),
                exp.params,
                exp.costs,
                exp.resources,
                seed=exp.seeds[0],
            )
            cost_rows.append((name, report.mean, report.q1, report.median, report.q3))
            click.echo(f"{name}: mean={report.mean!r}")
        artifacts.write_csv(
            out_dir / "compare_costs.csv",
            ("policy", "mean", "q1", "median", "q3"),
            cost_rows,
        )
        artifacts.write_json(
            out_dir / "summary.json",
            {
                "trace_seed": trace_seed,
                "trace_length": horizon,
                "totals": {
                    name: {
                        "c_ov": sum(w.c_ov for w in ws),
                        "c_off": sum(w.c_off for w in ws),
                    }
                    for name, ws in sorted(series.items())
                },
                "config_sha256": artifacts.config_hash(exp.raw),
            },
        )
        artifacts.write_manifest(out_dir / "manifest.json", "compare", exp.raw, exp.seeds)

    _run(body)


if __name__ == "__main__":
    main()
