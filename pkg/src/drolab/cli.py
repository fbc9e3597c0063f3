"""Command-line interface.

Exit codes: 0 on success, 1 on validation/config errors, 2 when a verified
inequality fails to hold (the falsification signal).
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

import click
import numpy as np

import drolab
from drolab.bayes import Infeasible, prior_from_regularizer
from drolab.cost import DecisionSpace, Regularizer, make_cost, with_lipschitz_scale
from drolab.divergence import AmbiguityBall, DivergenceKind
from drolab.experiment import ConfigError, load_config, plan, run as run_experiment, verify_bounds
from drolab.robustness import (
    DirichletPrior,
    absolute_measure,
    local_measure,
    pac_robustness,
    relative_measure,
    set_robustness,
)
from drolab.solvers import (
    solve_absolute_dro,
    solve_bayes_dp,
    solve_minmax_dro,
    solve_regularized_saa,
    solve_robust_satisficing,
    solve_saa,
)
from drolab.support import DiscreteDistribution, SampleSet, SupportGrid, load_json


def _die_validation(message: str) -> None:
    click.echo(f"error: {message}", err=True)
    sys.exit(1)


def _divergence_kind(kind: str, p: float, orientation: str) -> DivergenceKind:
    if kind == "wasserstein":
        return DivergenceKind.wasserstein_order(p)
    ctor = {"kl": DivergenceKind.kl, "chi2": DivergenceKind.chi2, "tv": DivergenceKind.tv}[kind]
    return ctor(orientation)


def _load_problem(path: str) -> dict:
    doc = load_json(path)
    for key in ("grid", "center", "cost", "space"):
        if key not in doc:
            raise ConfigError(f"problem document misses {key!r}")
    grid = SupportGrid.from_json(doc["grid"])
    center = DiscreteDistribution(grid, np.asarray(doc["center"]["weights"], dtype=float))
    space_doc = doc["space"]
    if "points" in space_doc:
        space = DecisionSpace.from_points(space_doc["points"])
    else:
        iv = space_doc["interval"]
        space = DecisionSpace.interval(iv["lo"], iv["hi"], iv["num"])
    cost_doc = doc["cost"]
    cf = make_cost(cost_doc["name"], grid=grid, space=space, params=cost_doc.get("params"))
    if cost_doc.get("lip_scale") not in (None, 1.0):
        cf = with_lipschitz_scale(cf, float(cost_doc["lip_scale"]))
    out = {"grid": grid, "center": center, "cf": cf, "space": space}
    if "prior" in doc:
        out["prior"] = DiscreteDistribution(grid, np.asarray(doc["prior"]["weights"], dtype=float))
    if "samples" in doc:
        out["samples"] = SampleSet(
            grid, np.asarray(doc["samples"]["indices"], dtype=np.int64), doc["samples"].get("seed")
        )
    return out


@click.group()
@click.version_option(version=drolab.__version__, prog_name="drolab")
def main() -> None:
    """Distributionally robust optimization toolkit on finite supports."""


@main.command("divergence")
@click.argument("a_path", type=click.Path(exists=True, dir_okay=False))
@click.argument("b_path", type=click.Path(exists=True, dir_okay=False))
@click.option("--kind", type=click.Choice(["wasserstein", "kl", "chi2", "tv"]), default="wasserstein")
@click.option("--p", type=float, default=1.0, help="Wasserstein order.")
@click.option("--orientation", type=click.Choice(["forward", "reverse"]), default="forward")
def divergence_cmd(a_path: str, b_path: str, kind: str, p: float, orientation: str) -> None:
    """Print the divergence between two distribution documents."""
    try:
        doc_a = load_json(a_path)
        a = DiscreteDistribution.from_json(doc_a)
        doc_b = load_json(b_path)
        b = DiscreteDistribution.from_json(doc_b, grid=a.grid if "atoms" not in doc_b else None)
        value = _divergence_kind(kind, p, orientation).distance(b, a)
    except (ValueError, KeyError) as exc:
        _die_validation(str(exc))
        return
    click.echo(repr(float(value)))


@main.command("solve")
@click.argument("problem", type=click.Path(exists=True, dir_okay=False))
@click.option(
    "--method",
    type=click.Choice(["saa", "reg_saa", "bayes_dp", "minmax_dro", "abs_dro", "satisficing"]),
    required=True,
)
@click.option("--eps", type=float, default=0.0, help="Ball radius for the DRO methods.")
@click.option("--divergence", "div_kind", type=click.Choice(["wasserstein", "kl", "chi2", "tv"]), default="wasserstein")
@click.option("--p", type=float, default=1.0)
@click.option("--orientation", type=click.Choice(["forward", "reverse"]), default="forward")
@click.option("--alpha", type=float, default=0.0, help="Prior concentration for bayes_dp.")
@click.option("--beta", type=float, default=None, help="Explicit mixture weight override.")
@click.option("--lam", "--lambda", "lam", type=float, default=0.0, help="Regularization weight.")
@click.option("--delta", type=float, default=0.0, help="Target slack for satisficing.")
@click.option("--sided", type=click.Choice(["one", "two"]), default="one")
@click.option("--output", type=click.Path(dir_okay=False), default=None, help="Write JSON here instead of stdout.")
def solve_cmd(problem, method, eps, div_kind, p, orientation, alpha, beta, lam, delta, sided, output) -> None:
    """Solve one decision model described by a problem document."""
    try:
        prob = _load_problem(problem)
        kind = _divergence_kind(div_kind, p, orientation)
        if method == "saa":
            sol = solve_saa(prob["center"], prob["cf"], prob["space"])
        elif method == "reg_saa":
            if "prior" not in prob:
                raise ConfigError("reg_saa needs a 'prior' in the problem document")
            from drolab.bayes import regularizer_from_prior

            f = regularizer_from_prior(prob["prior"], prob["cf"])
            sol = solve_regularized_saa(prob["center"], prob["cf"], f, lam, prob["space"])
        elif method == "bayes_dp":
            if "prior" not in prob or "samples" not in prob:
                raise ConfigError("bayes_dp needs 'prior' and 'samples' in the problem document")
            sol = solve_bayes_dp(prob["prior"], alpha, prob["samples"], prob["cf"], prob["space"], beta=beta)
        elif method == "minmax_dro":
            sol = solve_minmax_dro(AmbiguityBall(prob["center"], eps, kind), prob["cf"], prob["space"])
        elif method == "abs_dro":
            sol = solve_absolute_dro(AmbiguityBall(prob["center"], eps, kind), prob["cf"], prob["space"])
        else:
            sol = solve_robust_satisficing(prob["center"], prob["cf"], prob["space"], kind, sided, delta)
    except (ConfigError, ValueError, KeyError) as exc:
        _die_validation(str(exc))
        return
    payload = json.dumps(sol.to_json(), indent=2, sort_keys=True)
    if output:
        Path(output).write_text(payload + "\n", encoding="utf-8")
    else:
        click.echo(payload)


@main.command("measure")
@click.argument("problem", type=click.Path(exists=True, dir_okay=False))
@click.option(
    "--kind",
    "measure_kind",
    type=click.Choice(["absolute", "relative", "local", "set", "pac"]),
    required=True,
)
@click.option("--variant", type=click.Choice(["objective", "solution"]), default="objective")
@click.option("--x-index", type=int, default=None, help="Decision index into the space (default: nominal argmin).")
@click.option("--ref", type=float, default=None, help="Reference value (default: best nominal value).")
@click.option("--eps", type=float, default=0.0)
@click.option("--divergence", "div_kind", type=click.Choice(["wasserstein", "kl", "chi2", "tv"]), default="wasserstein")
@click.option("--p", type=float, default=1.0)
@click.option("--orientation", type=click.Choice(["forward", "reverse"]), default="forward")
@click.option("--alpha", type=float, default=1.0, help="Dirichlet concentration for pac.")
@click.option("--level", type=float, default=1.0, help="Robustness level L for pac.")
@click.option("--draws", type=int, default=10000)
@click.option("--budget", type=int, default=200)
@click.option("--seed", type=int, default=0)
def measure_cmd(problem, measure_kind, variant, x_index, ref, eps, div_kind, p, orientation,
                alpha, level, draws, budget, seed) -> None:
    """Report a robustness measure of a decision (JSON on stdout)."""
    try:
        prob = _load_problem(problem)
        kind = _divergence_kind(div_kind, p, orientation)
        center, cf, space = prob["center"], prob["cf"], prob["space"]
        nominal = solve_saa(center, cf, space)
        x = space[x_index] if x_index is not None else nominal.x
        ref_value = nominal.objective_value if ref is None else ref
        if measure_kind == "absolute":
            report = absolute_measure(x, ref_value, AmbiguityBall(center, eps, kind), cf)
        elif measure_kind == "relative":
            report = relative_measure(x, ref_value, kind, center, cf)
        elif measure_kind == "local":
            report = local_measure(space, center, ref_value, cf, kind, variant)
        elif measure_kind == "set":
            report = set_robustness(AmbiguityBall(center, eps, kind), cf, space, variant, budget, seed)
        else:
            report = pac_robustness(DirichletPrior(center, alpha), cf, x, ref_value, level, draws, seed)
    except (ConfigError, ValueError, KeyError, IndexError) as exc:
        _die_validation(str(exc))
        return
    click.echo(json.dumps(report.to_json(), indent=2, sort_keys=True))


@main.command("prior-from-reg")
@click.argument("spec_path", type=click.Path(exists=True, dir_okay=False))
@click.option("--max-entropy", is_flag=True, help="Nudge the vertex toward the max-entropy representative.")
def prior_from_reg_cmd(spec_path: str, max_entropy: bool) -> None:
    """Find weights reproducing a regularizer table ``{x_k: f_k}``.

    The document needs ``grid``, ``cost``, and ``f_table`` with parallel
    ``points`` and ``values`` arrays.
    """
    try:
        doc = load_json(spec_path)
        grid = SupportGrid.from_json(doc["grid"])
        table = doc["f_table"]
        points = [np.atleast_1d(np.asarray(x, dtype=float)) for x in table["points"]]
        values = [float(v) for v in table["values"]]
        if len(points) != len(values):
            raise ConfigError("f_table points and values must have equal length")
        space = DecisionSpace.from_points(np.array([pt for pt in points]))
        cf = make_cost(doc["cost"]["name"], grid=grid, space=space, params=doc["cost"].get("params"))
        lookup = {tuple(pt.tolist()): v for pt, v in zip(points, values)}
        f = Regularizer(lambda x: lookup[tuple(np.atleast_1d(np.asarray(x, dtype=float)).tolist())])
        result = prior_from_regularizer(f, cf, points, grid, max_entropy=max_entropy)
    except (ConfigError, ValueError, KeyError) as exc:
        _die_validation(str(exc))
        return
    if isinstance(result, Infeasible):
        click.echo(json.dumps({"infeasible": True, "residual": result.residual}, sort_keys=True))
    else:
        click.echo(json.dumps({"infeasible": False, "weights": result.weights.tolist()}, sort_keys=True))


@main.command("verify-bounds")
@click.argument("config", type=click.Path(exists=True, dir_okay=False))
def verify_bounds_cmd(config: str) -> None:
    """Check every deviation bound on the configured instances.

    Exits 2 if any finite bound fails to contain its gap.
    """
    try:
        cfg = load_config(config)
        ok, report = verify_bounds(cfg)
    except (ConfigError, ValueError, KeyError) as exc:
        _die_validation(str(exc))
        return
    click.echo(json.dumps(report, indent=2, sort_keys=True))
    if not ok:
        click.echo(f"{len(report['violations'])} bound violation(s) detected", err=True)
        sys.exit(2)


@main.command("run")
@click.argument("config", type=click.Path(exists=True, dir_okay=False))
@click.option("--dry-run", is_flag=True, help="Print the resolved plan and write nothing.")
@click.option("--jobs", type=int, default=1, help="Replication-level parallelism.")
def run_cmd(config: str, dry_run: bool, jobs: int) -> None:
    """Execute a full experiment config; write CSV results and a run record."""
    try:
        cfg = load_config(config)
    except (ConfigError, ValueError, KeyError) as exc:
        _die_validation(str(exc))
        return
    if dry_run:
        click.echo(json.dumps(plan(cfg), indent=2, sort_keys=True))
        return
    record = run_experiment(cfg, jobs=jobs)
    click.echo(json.dumps({k: record[k] for k in ("config_hash", "row_count", "holds_violations", "csv_path")},
                          indent=2, sort_keys=True))
    if record["errors"]:
        click.echo("\n".join(record["errors"]), err=True)
        sys.exit(1)
    if record["holds_violations"]:
        sys.exit(2)


if __name__ == "__main__":
    main()
