"""Config-driven experiment runner: validation, execution, persistence.

A run executes every configured method across the n-sweep and replications,
collects gap and bound records, and writes a CSV of one row per record plus
a JSON run record.  Everything is deterministic given the config and seed;
per-replication seeds are derived from ``(seed, n, replication)`` and stored
in the rows so any number can be replayed through library calls.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import jsonschema
import numpy as np

import drolab
from drolab.bayes import regularizer_from_prior
from drolab.bounds import (
    BoundRecord,
    GapRecord,
    absolute_bound,
    minmax_one_sided_bound,
    relative_bound,
    uniform_bound,
)
from drolab.cost import CostFunction, DecisionSpace, make_cost, with_lipschitz_scale
from drolab.divergence import AmbiguityBall, DivergenceKind
from drolab.solvers import (
    solve_bayes_dp,
    solve_regularized_saa,
    solve_robust_satisficing,
    solve_saa,
)
from drolab.support import (
    RNG_ALGORITHM,
    DiscreteDistribution,
    SupportGrid,
    derive_seed,
    empirical,
    mixture,
    sample,
)

CSV_HEADER = ["kind", "n", "seed", "x_star", "gap", "bound", "holds", "ingredients_json"]
OUTPUT_DIR_ENV = "DROLAB_OUTPUT_DIR"


class ConfigError(ValueError):
    """Configuration rejected, with a JSON-pointer path when available."""


def _schema() -> dict:
    text = resources.files("drolab").joinpath("schemas/config.schema.json").read_text()
    return json.loads(text)


def validate_config(doc: dict) -> None:
    """Schema-validate a config document; raises :class:`ConfigError`."""
    validator = jsonschema.Draft202012Validator(_schema())
    errors = sorted(validator.iter_errors(doc), key=lambda e: list(e.absolute_path))
    if errors:
        err = errors[0]
        pointer = "/" + "/".join(str(p) for p in err.absolute_path)
        raise ConfigError(f"{pointer}: {err.message}")
    names = {"saa", "reg_saa", "bayes_dp", "minmax_dro", "abs_dro", "satisficing"}
    for i, method in enumerate(doc["methods"]):
        kind = method["method"]
        if kind not in names:  # unreachable given the schema; defensive
            raise ConfigError(f"/methods/{i}/method: unknown method {kind!r}")
        if kind in ("reg_saa", "bayes_dp") and "prior" not in method:
            raise ConfigError(f"/methods/{i}: {kind} needs a 'prior'")
        if kind == "reg_saa" and "lambda" not in method:
            raise ConfigError(f"/methods/{i}: reg_saa needs a 'lambda'")
        if kind == "bayes_dp" and ("alpha" in method) == ("beta" in method):
            raise ConfigError(f"/methods/{i}: bayes_dp needs exactly one of 'alpha'/'beta'")


def config_hash(doc: dict) -> str:
    canonical = json.dumps(doc, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode()).hexdigest()


def _divergence_from(doc: dict | None) -> DivergenceKind:
    if not doc:
        return DivergenceKind.wasserstein_order(1.0)
    kind = doc["kind"]
    if kind == "wasserstein":
        return DivergenceKind.wasserstein_order(doc.get("p", 1.0))
    ctor = {"kl": DivergenceKind.kl, "chi2": DivergenceKind.chi2, "tv": DivergenceKind.tv}[kind]
    return ctor(doc.get("orientation", "forward"))


@dataclass(frozen=True)
class ResolvedConfig:
    raw: dict
    grid: SupportGrid
    p0: DiscreteDistribution
    cf: CostFunction
    space: DecisionSpace
    methods: list[dict]
    ns: list[int]
    replications: int
    seed: int
    output: Path


def resolve_config(doc: dict, output_override: str | None = None) -> ResolvedConfig:
    """Validate and materialize a config document into library objects."""
    validate_config(doc)
    grid = SupportGrid.from_json(doc["grid"])
    try:
        p0 = DiscreteDistribution(grid, np.asarray(doc["p0"]["weights"], dtype=float))
    except ValueError as exc:
        raise ConfigError(f"/p0/weights: {exc}") from exc
    space_doc = doc["space"]
    if "points" in space_doc:
        space = DecisionSpace.from_points(space_doc["points"])
    else:
        iv = space_doc["interval"]
        space = DecisionSpace.interval(iv["lo"], iv["hi"], iv["num"])
    cost_doc = doc["cost"]
    try:
        cf = make_cost(cost_doc["name"], grid=grid, space=space, params=cost_doc.get("params"))
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"/cost: {exc}") from exc
    scale = cost_doc.get("lip_scale")
    if scale is not None and scale != 1.0:
        cf = with_lipschitz_scale(cf, float(scale))
    for i, method in enumerate(doc["methods"]):
        if "prior" in method and len(method["prior"]["weights"]) != grid.size:
            raise ConfigError(f"/methods/{i}/prior/weights: expected {grid.size} weights")
    out = output_override or os.environ.get(OUTPUT_DIR_ENV) or doc.get("output", "results")
    return ResolvedConfig(
        raw=doc,
        grid=grid,
        p0=p0,
        cf=cf,
        space=space,
        methods=list(doc["methods"]),
        ns=[int(v) for v in doc["n"]],
        replications=int(doc["replications"]),
        seed=int(doc["seed"]),
        output=Path(out),
    )


def load_config(path: str | Path, output_override: str | None = None) -> ResolvedConfig:
    with open(path, "r", encoding="utf-8") as fh:
        doc = json.load(fh)
    return resolve_config(doc, output_override)


def _format_x(x) -> str:
    return ";".join(repr(float(v)) for v in np.atleast_1d(np.asarray(x, dtype=float)))


def _row(kind: str, n: int, seed: int, x, gap: float, bound: float, holds: bool, ingredients: dict) -> dict:
    return {
        "kind": kind,
        "n": n,
        "seed": seed,
        "x_star": _format_x(x),
        "gap": repr(float(gap)),
        "bound": repr(float(bound)),
        "holds": str(bool(holds)),
        "ingredients_json": json.dumps(ingredients, sort_keys=True),
    }


def _bound_row(n: int, seed: int, gap: GapRecord, rec: BoundRecord, method: str) -> dict:
    ingredients = dict(rec.ingredients)
    ingredients["method"] = method
    if rec.degenerate:
        ingredients["degenerate"] = True
    return _row(rec.kind, n, seed, gap.x, rec.observed, rec.bound, rec.holds, ingredients)


def _resolve_radius(spec, kind: DivergenceKind, p0, center) -> float:
    if spec == "auto" or spec is None:
        return float(kind.distance(p0, center))
    return float(spec)


def _run_method(cfg: ResolvedConfig, method: dict, n: int, rep: int) -> tuple[list[dict], dict]:
    """Execute one method on one replication; returns (csv rows, solution summary)."""
    rep_seed = derive_seed(cfg.seed, n, rep)
    data = sample(cfg.p0, n, rep_seed)
    pbar = empirical(data)
    name = method["method"]
    kind = _divergence_from(method.get("divergence"))
    rows: list[dict] = []

    if name == "saa":
        sol = solve_saa(pbar, cfg.cf, cfg.space)
        nominal = pbar
    elif name == "reg_saa":
        prior = DiscreteDistribution(cfg.grid, np.asarray(method["prior"]["weights"], dtype=float))
        f = regularizer_from_prior(prior, cfg.cf)
        sol = solve_regularized_saa(pbar, cfg.cf, f, float(method["lambda"]), cfg.space)
        nominal = pbar
    elif name == "bayes_dp":
        prior = DiscreteDistribution(cfg.grid, np.asarray(method["prior"]["weights"], dtype=float))
        alpha = float(method.get("alpha", 0.0))
        beta = method.get("beta")
        sol = solve_bayes_dp(prior, alpha, data, cfg.cf, cfg.space, beta=beta)
        nominal = mixture(sol.diagnostics["beta"], prior, pbar)
    elif name == "minmax_dro":
        radius = _resolve_radius(method.get("eps"), kind, cfg.p0, pbar)
        ball = AmbiguityBall(pbar, radius, kind)
        gap, rec, sol = minmax_one_sided_bound(cfg.p0, ball, cfg.cf, cfg.space)
        rows.append(_bound_row(n, rep_seed, gap, rec, name))
        return rows, {"method": name, "n": n, "rep": rep, "seed": rep_seed, "solution": sol.to_json()}
    elif name == "abs_dro":
        radius = _resolve_radius(method.get("eps"), kind, cfg.p0, pbar)
        ball = AmbiguityBall(pbar, radius, kind)
        pairs, sol = absolute_bound(cfg.p0, ball, cfg.cf, cfg.space)
        rows.extend(_bound_row(n, rep_seed, g, r, name) for g, r in pairs)
        return rows, {"method": name, "n": n, "rep": rep, "seed": rep_seed, "solution": sol.to_json()}
    elif name == "satisficing":
        sided = method.get("sided", "two")
        delta = float(method.get("delta", 0.0))
        pairs, sol = relative_bound(cfg.p0, pbar, cfg.cf, cfg.space, kind)
        if sided != "two" or delta != 0.0:
            sol = solve_robust_satisficing(pbar, cfg.cf, cfg.space, kind, sided, delta)
        rows.extend(_bound_row(n, rep_seed, g, r, name) for g, r in pairs)
        return rows, {"method": name, "n": n, "rep": rep, "seed": rep_seed, "solution": sol.to_json()}
    else:  # unreachable after validation
        raise ConfigError(f"unknown method {name!r}")

    # SAA-family methods: one uniform deviation record at the solution.
    pairs = uniform_bound(cfg.p0, nominal, cfg.cf, DecisionSpace(np.array([sol.x])))
    gap, rec = pairs[0]
    rows.append(_bound_row(n, rep_seed, gap, rec, name))
    return rows, {"method": name, "n": n, "rep": rep, "seed": rep_seed, "solution": sol.to_json()}


def _run_replication(doc: dict, n: int, rep: int) -> tuple[int, int, list[dict], list[dict], list[str]]:
    """Worker: run all methods of one replication; errors recorded, not swallowed."""
    cfg = resolve_config(doc)
    rows: list[dict] = []
    summaries: list[dict] = []
    errors: list[str] = []
    for method in cfg.methods:
        try:
            m_rows, summary = _run_method(cfg, method, n, rep)
        except Exception as exc:  # recorded and re-raised through the run record
            errors.append(f"n={n} rep={rep} method={method['method']}: {type(exc).__name__}: {exc}")
            break
        rows.extend(m_rows)
        summaries.append(summary)
    return n, rep, rows, summaries, errors


def _csv_bytes(rows: list[dict]) -> bytes:
    buf = io.StringIO(newline="")
    writer = csv.DictWriter(buf, fieldnames=CSV_HEADER, lineterminator="\n")
    writer.writeheader()
    writer.writerows(rows)
    return buf.getvalue().encode()


def plan(cfg: ResolvedConfig) -> dict:
    """The resolved execution plan (what ``run --dry-run`` prints)."""
    return {
        "config_hash": config_hash(cfg.raw),
        "methods": [m["method"] for m in cfg.methods],
        "n_sweep": cfg.ns,
        "replications": cfg.replications,
        "tasks": len(cfg.ns) * cfg.replications,
        "rows_per_task_max": 2 * len(cfg.methods),
        "grid_size": cfg.grid.size,
        "decision_count": len(cfg.space),
        "output_dir": str(cfg.output),
        "rng_algorithm": RNG_ALGORITHM,
    }


def run(cfg: ResolvedConfig, jobs: int = 1) -> dict:
    """Execute the full plan and write ``results.csv`` and ``run_record.json``.

    Returns the run record.  Replications can run in parallel; rows are
    reduced in (n, replication) order so output is schedule-independent.
    """
    start = time.perf_counter()
    tasks = [(n, rep) for n in cfg.ns for rep in range(cfg.replications)]
    outcomes = []
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            futures = [pool.submit(_run_replication, cfg.raw, n, rep) for n, rep in tasks]
            outcomes = [f.result() for f in futures]
    else:
        outcomes = [_run_replication(cfg.raw, n, rep) for n, rep in tasks]
    outcomes.sort(key=lambda t: (t[0], t[1]))

    rows: list[dict] = []
    summaries: list[dict] = []
    errors: list[str] = []
    for _, _, r, s, e in outcomes:
        rows.extend(r)
        summaries.extend(s)
        errors.extend(e)

    cfg.output.mkdir(parents=True, exist_ok=True)
    csv_path = cfg.output / "results.csv"
    csv_path.write_bytes(_csv_bytes(rows))
    record = {
        "config_hash": config_hash(cfg.raw),
        "library_version": drolab.__version__,
        "rng_algorithm": RNG_ALGORITHM,
        "config": cfg.raw,
        "solutions": summaries,
        "errors": errors,
        "row_count": len(rows),
        "holds_violations": sum(1 for r in rows if r["holds"] == "False"),
        "csv_path": str(csv_path),
        "wall_time_s": time.perf_counter() - start,
    }
    record_path = cfg.output / "run_record.json"
    with open(record_path, "w", encoding="utf-8") as fh:
        json.dump(record, fh, indent=2, sort_keys=True)
    return record


def verify_bounds(cfg: ResolvedConfig) -> tuple[bool, dict]:
    """Run every bound suite across the plan; returns (all_held, report).

    Ball radii are set to the exact divergence from the configured true
    distribution so every hypothesis holds; any finite bound that fails to
    contain its gap is a violated inequality (exit code 2 in the CLI).
    """
    kind = DivergenceKind.wasserstein_order(1.0)
    failures: list[dict] = []
    checked = 0
    for n in cfg.ns:
        for rep in range(cfg.replications):
            rep_seed = derive_seed(cfg.seed, n, rep)
            pbar = empirical(sample(cfg.p0, n, rep_seed))
            records: list[tuple[GapRecord, BoundRecord]] = []
            records.extend(uniform_bound(cfg.p0, pbar, cfg.cf, cfg.space))
            radius = kind.distance(cfg.p0, pbar)
            ball = AmbiguityBall(pbar, radius, kind)
            pairs, _ = absolute_bound(cfg.p0, ball, cfg.cf, cfg.space)
            records.extend(pairs)
            pairs, _ = relative_bound(cfg.p0, pbar, cfg.cf, cfg.space, kind)
            records.extend(pairs)
            gap, rec, _ = minmax_one_sided_bound(cfg.p0, ball, cfg.cf, cfg.space)
            records.append((gap, rec))
            for gap, rec in records:
                checked += 1
                if not rec.holds and math.isfinite(rec.bound):
                    failures.append(
                        {
                            "kind": rec.kind,
                            "n": n,
                            "seed": rep_seed,
                            "x": _format_x(gap.x),
                            "gap": rec.observed,
                            "bound": rec.bound,
                        }
                    )
    report = {"checked": checked, "violations": failures, "config_hash": config_hash(cfg.raw)}
    return not failures, report
