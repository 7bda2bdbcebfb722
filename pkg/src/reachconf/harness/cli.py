"""Command-line front end.

Subcommands: ``identify`` (one method on one suite), ``bench``
(scalability / comparison experiments), ``validate`` (containment of a
saved model on a suite under a safety factor).  Result JSON carries no
timing fields, so identical seeds reproduce identical bytes; wall times
go to the metrics CSV only.  REACHCONF_THREADS caps experiment workers.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from pathlib import Path

import numpy as np

from ..models import NarxModel
from ..serialize import (
    load_model_bundle,
    model_bundle,
    read_json,
    result_to_dict,
    spec_from_dict,
    spec_to_dict,
    suite_from_dict,
    suite_to_dict,
    write_json,
)
from ..systems import make_system
from ..validation import check_suite_model, default_template
from .experiments import (
    PROFILES,
    comparison_experiment,
    run_identification,
    scalability_experiment,
    vehicle_experiment,
    _model_order,
    _sub_seed,
)
from .generate import generate_suite, identification_template, random_true_spec
from .metrics import (
    MetricsRow,
    is_failure,
    normalized_cost,
    reference_cost,
    rows_to_csv,
    validation_containment,
)

METHODS = ("white", "whiteadd", "grayseq", "grayseq2", "graysim",
           "blackgp", "blackcgp")


def _build_parser() -> argparse.ArgumentParser:
    top = argparse.ArgumentParser(prog="reachconf",
                                  description=__doc__.splitlines()[0])
    sub = top.add_subparsers(dest="command", required=True)

    ident = sub.add_parser("identify", help="run one identification method")
    ident.add_argument("--system", required=True,
                       help="catalog system id (see reachconf.systems)")
    ident.add_argument("--method", required=True, choices=METHODS)
    ident.add_argument("--suite", default="generate",
                       help="suite JSON path, or 'generate'")
    ident.add_argument("--constraints", default="halfspace",
                       choices=("halfspace", "generator"))
    ident.add_argument("--seed", type=int, default=0)
    ident.add_argument("--out", default=".", help="output directory")
    ident.add_argument("--cases", type=int, default=20,
                       help="generated suite: number of test cases")
    ident.add_argument("--steps", type=int, default=None,
                       help="generated suite: steps per case (default order+6)")
    ident.add_argument("--samples", type=int, default=10,
                       help="generated suite: trajectories per case")

    bench = sub.add_parser("bench", help="run a benchmark experiment")
    bench.add_argument("experiment", choices=("scalability", "comparison",
                                              "vehicle"))
    bench.add_argument("--profile", default="desk", choices=sorted(PROFILES))
    bench.add_argument("--seed", type=int, default=0)
    bench.add_argument("--out", default=".", help="output directory")

    val = sub.add_parser("validate", help="check a saved model on a suite")
    val.add_argument("--model", required=True, help="model bundle JSON path")
    val.add_argument("--suite", required=True, help="suite JSON path")
    val.add_argument("--epsilon", type=float, default=1.0,
                     help="safety factor applied to the uncertainty scalings")
    return top


def _cmd_identify(args) -> int:
    out = Path(args.out)
    model = make_system(args.system)
    order = _model_order(args.system, model)
    n_k = args.steps if args.steps is not None else order + 6
    true_spec = None
    if args.suite == "generate":
        true_spec = random_true_spec(model, _sub_seed(args.seed, 0))
        suite = generate_suite(model, true_spec, args.cases, n_k, args.samples,
                               _sub_seed(args.seed, 1))
        template = identification_template(
            true_spec, known_centers=args.system != "narx1")
        write_json(out / "suite.json", suite_to_dict(suite))
        write_json(out / "true_spec.json", spec_to_dict(true_spec))
    else:
        suite = suite_from_dict(read_json(args.suite))
        check_suite_model(model, suite)
        template = default_template(model)

    t0 = time.perf_counter()
    result = run_identification(args.method, model, suite, template,
                                _sub_seed(args.seed, 2), n_p=order,
                                constraints=args.constraints)
    elapsed = time.perf_counter() - t0

    write_json(out / "result.json", result_to_dict(result))
    ncost = None
    if true_spec is not None and result.status == "conformant":
        ncost = normalized_cost(result.cost,
                                reference_cost(model, suite, true_spec))
    row = MetricsRow(system=args.system, suite=0, method=args.method,
                     normalized_cost=ncost,
                     failure=is_failure(result.status, ncost),
                     wall_time=elapsed)
    rows_to_csv([row], out / "metrics.csv")

    if result.spec is not None:
        if args.method.startswith("black"):
            write_json(out / "model.json", model_bundle(result.model, result.spec))
        else:
            fitted = (model.with_params(result.p)
                      if args.method.startswith("gray") else model)
            write_json(out / "model.json",
                       model_bundle(fitted, result.spec, system_id=args.system,
                                    augment=args.method == "whiteadd"))
    print(f"{args.method} on {args.system}: status={result.status} "
          f"cost={result.cost:.6g}" +
          (f" normalized={ncost:.4f}" if ncost is not None else ""))
    return 0


def _cmd_bench(args) -> int:
    out = Path(args.out)
    if args.experiment == "scalability":
        rows = scalability_experiment(args.profile, seed=args.seed, out_dir=out)
        for r in rows:
            print(r)
    elif args.experiment == "comparison":
        rows = comparison_experiment(args.profile, seed=args.seed, out_dir=out)
        n_fail = sum(r.failure for r in rows)
        print(f"{len(rows)} runs, {n_fail} failures; tables in {out}")
    else:
        for r in vehicle_experiment(seed=args.seed, out_dir=out):
            print(r)
    return 0


def _cmd_validate(args) -> int:
    model, spec = load_model_bundle(read_json(args.model))
    suite = suite_from_dict(read_json(args.suite))
    if args.epsilon < 1:
        print("epsilon must be at least 1", file=sys.stderr)
        return 2
    if suite.n_u < model.n_u:
        # bundles of additivity-restricted models expect the extra zero
        # input block the identification ran with
        from ..conform import pad_suite_inputs

        suite = pad_suite_inputs(suite, model.n_u - suite.n_u)
    check_suite_model(model, suite)
    scaled = spec.scaled(args.epsilon) if args.epsilon != 1 else spec
    rate = validation_containment(model, suite, scaled)
    print(json.dumps({"containment_rate": rate, "epsilon": args.epsilon},
                     sort_keys=True))
    return 0


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    if args.command == "identify":
        return _cmd_identify(args)
    if args.command == "bench":
        return _cmd_bench(args)
    return _cmd_validate(args)


if __name__ == "__main__":
    sys.exit(main())
