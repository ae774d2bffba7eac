"""Command-line front end: instance generation, explanations, bounds and the experiment grid.

Exit codes: 0 success, 2 usage or invalid input, 3 infeasible desired space,
4 time limit reached (the incumbent is still written).
"""

from __future__ import annotations

import argparse
import csv
import itertools
import json
import math
import statistics
import sys
import traceback
from pathlib import Path

import numpy as np

from . import instance as instance_mod
from .errors import ConfigError, InfeasibleDesiredSpace, InstanceParseError
from .explain import DesiredSpace, Explanation, SolverConfig, explain, metrics, model_free_bound
from .explain.warmstart import facility_ranking
from .factual import solve_factual

SCHEMA_VERSION = 1
EXIT_OK, EXIT_USAGE, EXIT_INFEASIBLE, EXIT_TIME_LIMIT = 0, 2, 3, 4
CSV_COLUMNS = ["N", "D", "r", "lambda", "q_factual", "q_new", "w2", "sparsity",
               "avg_time_s", "median_time_s", "tl_count", "gap"]
TIMING_COLUMNS = ["N", "D", "r", "lambda", "instance", "category", "time_s",
                  "warm_start_s", "bound_s"]
NULL_GAP = "-"


class UsageError(Exception):
    pass


def _finite(v):
    """JSON-safe float: non-finite values become ``None``."""
    v = float(v)
    return v if math.isfinite(v) else None


def _index_list(text: str | None) -> list[int]:
    if not text:
        return []
    try:
        return [int(t) for t in text.replace(" ", "").split(",") if t]
    except ValueError:
        raise UsageError(f"expected a comma-separated list of candidate indices, got {text!r}")


def _write_json(path, data) -> None:
    Path(path).write_text(json.dumps(data, indent=2) + "\n")


# -- generate ------------------------------------------------------------------

def cmd_generate(args) -> int:
    cfg = instance_mod.GenerationConfig(
        n_customers=args.n, n_candidates=args.d, n_competitors=args.e,
        box_side=args.box, seed=args.seed,
    )
    try:
        inst = instance_mod.generate(cfg)
    except ConfigError as exc:
        raise UsageError(str(exc))
    instance_mod.save(inst, args.out)
    print(f"wrote {args.out}: N={args.n} D={args.d} E={args.e} seed={args.seed}")
    return EXIT_OK


# -- explain / bound ------------------------------------------------------------

def _setup(args):
    try:
        inst = instance_mod.load(args.instance)
    except (OSError, InstanceParseError) as exc:
        raise UsageError(f"cannot load instance {args.instance}: {exc}")
    pre = instance_mod.precompute(inst)
    desired = DesiredSpace(_index_list(args.force_open), _index_list(args.force_closed))
    cfg = SolverConfig(
        alpha=args.alpha, lam=getattr(args, "lam", 0.0), budget=args.budget,
        epsilon=args.epsilon, time_limit=getattr(args, "time_limit", 3600.0),
        seed=getattr(args, "seed", 0), support_mode=args.support_mode,
    )
    try:
        cfg.validate()
    except ConfigError as exc:
        raise UsageError(str(exc))
    desired.validate(pre.n_candidates, cfg.budget)
    try:
        factual = solve_factual(inst, pre, cfg.budget, method=args.factual)
    except ConfigError as exc:
        raise UsageError(str(exc))
    return inst, pre, desired, cfg, factual


def distribution_records(expl: Explanation, n_candidates: int) -> list[dict]:
    """One record per customer and alternative with factual and counterfactual probabilities."""
    records = []
    N, K = expl.p_factual.shape
    for n in range(N):
        for c in range(K):
            kind = "candidate" if c < n_candidates else "competitor"
            records.append({
                "customer": n,
                "alternative": c,
                "kind": kind,
                "index": c if c < n_candidates else c - n_candidates,
                "factual": float(expl.p_factual[n, c]),
                "counterfactual": float(expl.p_new[n, c]),
            })
    return records


def explanation_record(expl: Explanation, inst, pre, cfg: SolverConfig, desired: DesiredSpace, factual) -> dict:
    m = metrics(expl, inst, pre)
    return {
        "schema_version": SCHEMA_VERSION,
        "kind": "explanation",
        "config": {
            "alpha": cfg.alpha, "lambda": cfg.lam, "budget": cfg.budget, "epsilon": cfg.epsilon,
            "time_limit": cfg.time_limit, "seed": cfg.seed, "support_mode": cfg.support_mode,
        },
        "desired_space": {
            "forced_open": sorted(desired.forced_open),
            "forced_closed": sorted(desired.forced_closed),
        },
        "factual": {
            "open_set": list(factual.open_set),
            "q_factual": factual.q_factual,
            "method": factual.method,
        },
        "decision": list(expl.open_set),
        "phi": expl.phi.tolist(),
        "x": expl.x.tolist(),
        "objective": {"j_cost": expl.j_cost, "w_cost": expl.w_cost, "total": expl.total},
        "q_new": m["q_new"],
        "q_factual": expl.q_factual,
        "lower_bound": _finite(expl.lower_bound),
        "gap": _finite(expl.gap),
        "timed_out": expl.timed_out,
        "metrics": {
            "sparsity": m["sparsity"],
            "w2": m["w2"],
            "solve_seconds": expl.solve_seconds,
            "warm_start_seconds": expl.warm_start_seconds,
            "bound_seconds": expl.bound_seconds,
            "warm_start_total": expl.warm_start_total,
        },
        "search": {k: v for k, v in expl.info.items() if k != "bound_per_decision"},
        "distributions": distribution_records(expl, pre.n_candidates),
    }


def cmd_explain(args) -> int:
    inst, pre, desired, cfg, factual = _setup(args)
    expl = explain(inst, pre, factual, desired, cfg)
    record = explanation_record(expl, inst, pre, cfg, desired, factual)
    if args.out:
        _write_json(args.out, record)
    print(f"factual open set {list(factual.open_set)}  q_factual {expl.q_factual:.6f}")
    print(f"decision {list(expl.open_set)}  q_new {record['q_new']:.6f}")
    print(f"j_cost {expl.j_cost:.6f}  W2^2 {expl.w_cost:.6f}  total {expl.total:.6f}")
    print(f"sparsity {record['metrics']['sparsity']:.4f}  lower bound {expl.lower_bound:.6f}  gap {expl.gap:.4f}")
    if expl.timed_out:
        print("time limit reached; returning the incumbent")
        return EXIT_TIME_LIMIT
    return EXIT_OK


def cmd_bound(args) -> int:
    inst, pre, desired, cfg, factual = _setup(args)
    lb = model_free_bound(inst, pre, factual, desired, cfg)
    record = {
        "schema_version": SCHEMA_VERSION,
        "kind": "model_free_bound",
        "alpha": cfg.alpha,
        "epsilon": cfg.epsilon,
        "support_mode": cfg.support_mode,
        "budget": cfg.budget,
        "value": _finite(lb.value),
        "per_decision": [{"open_set": list(k), "value": _finite(v)} for k, v in sorted(lb.per_z.items())],
        "seconds": lb.seconds,
    }
    if args.out:
        _write_json(args.out, record)
    print(f"global bound {lb.value:.6f} over {len(lb.per_z)} decisions")
    return EXIT_OK


# -- experiment ------------------------------------------------------------------

def _spec_cells(spec: dict) -> list[tuple[int, int, int, float, float | None]]:
    """Cells as ``(N, D, r, lambda, time_limit)``; a ``cells`` entry may override the time limit."""
    if "cells" in spec:
        cells = [(int(c["N"]), int(c["D"]), int(c["r"]), float(c["lambda"]),
                  float(c["time_limit"]) if "time_limit" in c else None) for c in spec["cells"]]
    elif "grid" in spec:
        g = spec["grid"]
        cells = [(int(n), int(d), int(r), float(lam), None)
                 for n, d, r, lam in itertools.product(g["N"], g["D"], g["r"], g["lambda"])]
    else:
        raise UsageError("experiment spec needs a 'grid' or a 'cells' entry")
    for n, d, r, lam, tl in cells:
        if n < 1 or d < 1 or r < 1 or r > d or lam < 0 or (tl is not None and not tl > 0):
            raise UsageError(f"invalid cell N={n} D={d} r={r} lambda={lam} time_limit={tl}")
    return cells


def instance_seed(base: int, n: int, d: int, e: int, i: int) -> int:
    """Seed of instance ``i`` in a cell; independent of ``r`` and ``lambda`` so cells share instances."""
    return int(np.random.SeedSequence([base, n, d, e, i]).generate_state(1, dtype=np.uint64)[0])


def _desired_for(spec_desired, inst, pre, factual) -> DesiredSpace:
    if spec_desired in (None, "best_unselected"):
        ranked = [d for d in facility_ranking(inst, pre, factual) if not factual.z0[d]]
        return DesiredSpace(forced_open=ranked[:1])
    if spec_desired == "none":
        return DesiredSpace()
    return DesiredSpace(spec_desired.get("forced_open", ()), spec_desired.get("forced_closed", ()))


def _fmt(v) -> str:
    return f"{v:.6g}" if isinstance(v, float) else str(v)


def run_experiment(spec: dict, out_dir: Path, log=print) -> list[dict]:
    cells = _spec_cells(spec)
    per_cell = int(spec.get("instances", 10))
    if per_cell < 1:
        raise UsageError("instances per cell must be at least 1")
    alpha = float(spec.get("alpha", 1.0))
    n_comp = int(spec.get("competitors", 5))
    time_limit = float(spec.get("time_limit", 3600.0))
    base = int(spec.get("seed", 0))
    factual_method = spec.get("factual_method", "enumeration")
    out_dir.mkdir(parents=True, exist_ok=True)
    raw_path = out_dir / "raw.jsonl"
    rows = []
    timing = []
    bounds: dict = {}
    with raw_path.open("a") as raw:
        for N, D, r, lam, cell_limit in cells:
            done = []
            failures = 0
            for i in range(per_cell):
                seed = instance_seed(base, N, D, n_comp, i)
                entry = {"schema_version": SCHEMA_VERSION, "N": N, "D": D, "r": r, "lambda": lam,
                         "instance": i, "seed": seed}
                try:
                    inst = instance_mod.generate(instance_mod.GenerationConfig(N, D, n_comp, seed=seed))
                    pre = instance_mod.precompute(inst)
                    factual = solve_factual(inst, pre, r, method=factual_method)
                    desired = _desired_for(spec.get("desired"), inst, pre, factual)
                    cfg = SolverConfig(alpha=alpha, lam=lam, budget=r,
                                       time_limit=time_limit if cell_limit is None else cell_limit,
                                       seed=int(spec.get("solver_seed", 0)))
                    key = (N, D, r, i)
                    if key not in bounds:
                        bounds[key] = model_free_bound(inst, pre, factual, desired, cfg)
                    expl = explain(inst, pre, factual, desired, cfg, bound=bounds[key])
                    m = metrics(expl, inst, pre)
                    changed = set(np.flatnonzero(np.abs(expl.phi - pre.phi0) > 1e-6).tolist())
                    aligned = changed <= set(desired.forced_open)
                    entry.update(status="ok", open_set=list(expl.open_set),
                                 forced_open=sorted(desired.forced_open), total=expl.total,
                                 lower_bound=_finite(expl.lower_bound), warm_start_total=expl.warm_start_total,
                                 warm_start_s=expl.warm_start_seconds, bound_s=bounds[key].seconds,
                                 aligned=aligned, **{k: m[k] for k in ("q_factual", "q_new", "w2", "sparsity",
                                                                        "time_s", "gap", "timed_out")})
                    done.append(entry)
                    timing.append({"N": N, "D": D, "r": r, "lambda": lam, "instance": i,
                                   "category": "aligned" if aligned else "not_aligned",
                                   "time_s": m["time_s"], "warm_start_s": expl.warm_start_seconds,
                                   "bound_s": bounds[key].seconds})
                except Exception as exc:  # one bad instance must not sink the cell
                    failures += 1
                    entry.update(status="failed", error=f"{type(exc).__name__}: {exc}",
                                 traceback=traceback.format_exc(limit=3))
                raw.write(json.dumps(entry) + "\n")
                raw.flush()
            rows.append(_report_row(N, D, r, lam, done, failures))
            log(f"N={N} D={D} r={r} lambda={lam}: {len(done)} ok, {failures} failed")

    with (out_dir / "results.csv").open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(CSV_COLUMNS)
        for row in rows:
            w.writerow([_fmt(row[c]) for c in CSV_COLUMNS])
    with (out_dir / "timing.csv").open("w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=TIMING_COLUMNS)
        w.writeheader()
        for t in timing:
            w.writerow({k: _fmt(v) for k, v in t.items()})
    _write_json(out_dir / "summary.json", {
        "schema_version": SCHEMA_VERSION, "kind": "experiment", "spec": spec,
        "rows": [{k: (v if not isinstance(v, float) or math.isfinite(v) else None) for k, v in row.items()}
                 for row in rows],
    })
    return rows


def _mean(values) -> float:
    return float(np.mean(values)) if values else float("nan")


def _report_row(N, D, r, lam, done: list[dict], failures: int) -> dict:
    times = [e["time_s"] for e in done]
    tl = [e for e in done if e["timed_out"]]
    gaps = [e["gap"] for e in tl if e["gap"] is not None]
    return {
        "N": N, "D": D, "r": r, "lambda": lam,
        "q_factual": _mean([e["q_factual"] for e in done]),
        "q_new": _mean([e["q_new"] for e in done]),
        "w2": _mean([e["w2"] for e in done]),
        "sparsity": _mean([e["sparsity"] for e in done]),
        "avg_time_s": _mean(times),
        "median_time_s": float(statistics.median(times)) if times else float("nan"),
        "tl_count": len(tl),
        # gap averages over the timed-out instances only, as in the TL accounting
        "gap": _mean(gaps) if tl else NULL_GAP,
        "failures": failures,
    }


def cmd_experiment(args) -> int:
    try:
        spec = json.loads(Path(args.spec).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise UsageError(f"cannot read experiment spec {args.spec}: {exc}")
    if not isinstance(spec, dict):
        raise UsageError("experiment spec must be a JSON object")
    rows = run_experiment(spec, Path(args.out_dir))
    print(f"wrote {len(rows)} rows to {Path(args.out_dir) / 'results.csv'}")
    return EXIT_OK


# -- entry point -------------------------------------------------------------------

def _add_problem_flags(p, with_solver: bool) -> None:
    p.add_argument("instance", help="instance JSON file")
    p.add_argument("--budget", "-r", type=int, required=True, help="number of facilities to open")
    p.add_argument("--alpha", type=float, default=1.0)
    p.add_argument("--force-open", default="", help="comma-separated candidate indices")
    p.add_argument("--force-closed", default="", help="comma-separated candidate indices")
    p.add_argument("--epsilon", type=float, default=1e-4)
    p.add_argument("--support-mode", choices=["aggregated", "per_customer"], default="aggregated")
    p.add_argument("--factual", choices=["enumeration", "haase_bnb"], default="enumeration")
    p.add_argument("--out", help="output JSON file")
    if with_solver:
        p.add_argument("--lambda", dest="lam", type=float, default=0.0)
        p.add_argument("--time-limit", type=float, default=3600.0)
        p.add_argument("--seed", type=int, default=0)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="cflexplain", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="generate a random instance")
    g.add_argument("--n", type=int, required=True, help="customers")
    g.add_argument("--d", type=int, required=True, help="candidate locations")
    g.add_argument("--e", type=int, default=5, help="competitor locations")
    g.add_argument("--box", type=float, default=20.0, help="side of the square region")
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out", required=True)
    g.set_defaults(func=cmd_generate)

    e = sub.add_parser("explain", help="compute a counterfactual explanation")
    _add_problem_flags(e, with_solver=True)
    e.set_defaults(func=cmd_explain)

    b = sub.add_parser("bound", help="model-free lower bound on the Wasserstein term")
    _add_problem_flags(b, with_solver=False)
    b.set_defaults(func=cmd_bound)

    x = sub.add_parser("experiment", help="run an experiment grid from a JSON spec")
    x.add_argument("spec")
    x.add_argument("--out-dir", default="results")
    x.set_defaults(func=cmd_experiment)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"{parser.prog} {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except InfeasibleDesiredSpace as exc:
        print(f"{parser.prog} {args.command}: infeasible desired space: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except ConfigError as exc:
        print(f"{parser.prog} {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
