"""Command-line driver.

Exit codes: 0 success / property verified; 1 property falsified or cache
stale; 2 usage, parse, type or compile errors.  Machine-readable JSON goes
to stdout, human diagnostics to stderr.
"""
from __future__ import annotations

import argparse
import json
import sys
from fractions import Fraction

from . import cache as cache_mod
from . import frontend, itp, loss, nbe, sim, typecheck, verify
from .errors import (
    CacheError, ExportError, PatternBudgetExceeded, ResourceError, SpecError,
)
from .network import load_network
from .resources import ResourceEnv, bind_resources
from .syntax import print_expr, program_to_json

USAGE_ERROR = 2


def _split_binding(raw: str, flag: str):
    if "=" not in raw:
        raise ResourceError(f"{flag} expects name=value, got {raw!r}")
    name, value = raw.split("=", 1)
    return name, value


def _bindings(items):
    return dict(_split_binding(x, "--network/--dataset/--parameter")
                for x in (items or []))


def _load_checked(path: str):
    with open(path) as fh:
        source = fh.read()
    program = frontend.load(source)
    return program, typecheck.check_program(program)


def _emit(doc):
    json.dump(doc, sys.stdout, indent=1, sort_keys=True)
    sys.stdout.write("\n")


# -- subcommands -------------------------------------------------------------

def cmd_parse(args) -> int:
    with open(args.file) as fh:
        program = frontend.load(fh.read())
    if args.dump_ast:
        _emit(program_to_json(program))
    else:
        _emit({"declarations": len(program.decls),
               "names": program.names()})
    return 0


def cmd_check(args) -> int:
    program, tp = _load_checked(args.file)
    if args.dump_normal_form:
        nf = nbe.normalise_property(tp, args.dump_normal_form)
        print(print_expr(nbe.quote_nf(nf)))
        return 0
    _emit({"checked": True,
           "properties": tp.properties(),
           "networks": {k: list(v) for k, v in tp.networks.items()}})
    return 0


def _logic_from_args(args) -> loss.Logic:
    p = Fraction(args.yager_p) if args.logic == "yager" else None
    return loss.Logic(args.logic, p)


def cmd_compile(args) -> int:
    program, tp = _load_checked(args.file)
    if args.target == "loss":
        resources = bind_resources(
            tp, _bindings(args.network), _bindings(args.dataset),
            _bindings(args.parameter), require_all=False)
        fallback = None
        if args.fallback_domain:
            fallback = (Fraction(args.fallback_domain[0]),
                        Fraction(args.fallback_domain[1]))
        lp = loss.compile_loss(
            tp, args.property, _logic_from_args(args),
            sigma=Fraction(args.sigma), xi=Fraction(args.xi),
            fallback=fallback, resources=resources)
        lp["defaults"] = {"samples": args.samples, "seed": args.seed}
        if args.output:
            with open(args.output, "w") as fh:
                json.dump(lp, fh, indent=1, sort_keys=True)
                fh.write("\n")
            print(f"wrote {args.output}", file=sys.stderr)
        else:
            _emit(lp)
        return 0
    # queries
    resources = bind_resources(
        tp, _bindings(args.network), _bindings(args.dataset),
        _bindings(args.parameter))
    dump = (lambda line: print(line, file=sys.stderr)) \
        if args.dump_elimination else None
    tree = verify.compile_queries(tp, args.property, resources, dump=dump)
    if not args.cache_dir:
        raise ResourceError("--target queries needs --cache-dir")
    cache_mod.write_cache(
        args.cache_dir, spec_path=args.file, prop=args.property, tree=tree,
        resources=resources, parameters=resources.parameters,
        slack=Fraction(args.slack))
    leaves = verify.tree_leaves(tree)
    _emit({"cache": args.cache_dir,
           "queries": [q.qid for q in leaves]})
    return 0


def cmd_export(args) -> int:
    program, tp = _load_checked(args.file)
    status = cache_mod.read_status(args.cache_dir)
    manifest_path = f"{args.cache_dir}/manifest.json"
    manifest_hash = cache_mod.hash_file(manifest_path)
    text = itp.export_interface(
        program, args.property, status=status.verdict,
        cache_dir=args.cache_dir, manifest_hash=manifest_hash,
        module_name=args.module, table_path=args.table,
        allow_unverified=args.allow_unverified)
    if args.output:
        with open(args.output, "w") as fh:
            fh.write(text)
        print(f"wrote {args.output}", file=sys.stderr)
    else:
        sys.stdout.write(text)
    return 0


def _solve_and_record(tree, resources, budget, cache_dir):
    existing = {}
    if cache_dir:
        existing = cache_mod.load_manifest(cache_dir).get("results", {})

    def solve(query):
        if query.qid in existing:
            stored = existing[query.qid]
            if stored["status"] == "sat":
                return ("sat", {k: Fraction(v) for k, v in
                                stored["assignment"].items()})
            return ("unsat", None)
        verdict, assignment = verify.solve_query(
            query, resources.networks, budget)
        if cache_dir:
            if verdict == "sat":
                lifted = verify.lift_counterexample(query, assignment)
                cache_mod.record_result(cache_dir, query.qid, {
                    "status": "sat",
                    "assignment": {k: str(v) for k, v in assignment.items()},
                    "witness": {k: verify._tensor_to_json(v)
                                for k, v in lifted.items()}})
            else:
                cache_mod.record_result(cache_dir, query.qid,
                                        {"status": "unsat"})
        return (verdict, assignment)

    return solve


def cmd_verify(args) -> int:
    if args.file:
        if not args.property:
            raise ResourceError("verify <file> needs a property name")
        program, tp = _load_checked(args.file)
        resources = bind_resources(
            tp, _bindings(args.network), _bindings(args.dataset),
            _bindings(args.parameter))
        tree = verify.compile_queries(tp, args.property, resources)
        prop = args.property
        if args.cache_dir:
            cache_mod.write_cache(
                args.cache_dir, spec_path=args.file, prop=prop, tree=tree,
                resources=resources, parameters=resources.parameters)
    else:
        if not args.cache_dir:
            raise ResourceError("verify needs a spec file or --cache-dir")
        report = cache_mod.check_cache(args.cache_dir)
        if report.status != "valid":
            _emit(report.to_json())
            return 1 if report.status == "stale" else USAGE_ERROR
        manifest = cache_mod.load_manifest(args.cache_dir)
        spec_path = cache_mod.resolve_resource(args.cache_dir,
                                               manifest["spec"])
        program, tp = _load_checked(spec_path)
        prop = manifest["property"]
        network_paths = {}
        dataset_paths = {}
        for entry in manifest["resources"]:
            path = cache_mod.resolve_resource(args.cache_dir, entry)
            if path is None:
                raise CacheError(f"resource {entry['name']!r} not found")
            if entry["role"] == "network":
                network_paths[entry["name"]] = path
            else:
                dataset_paths[entry["name"]] = path
        parameters = {e["name"]: e["value"]
                      for e in manifest.get("parameters", [])}
        resources = bind_resources(tp, network_paths, dataset_paths,
                                   parameters)
        tree = cache_mod.load_tree(args.cache_dir)
    solve = _solve_and_record(tree, resources, args.budget, args.cache_dir)
    status = verify.decide_tree(tp, prop, tree, resources,
                                args.budget, solver=solve)
    _emit(status.to_json())
    return 0 if status.verdict == "verified" else 1


def cmd_check_cache(args) -> int:
    report = cache_mod.check_cache(args.cache_dir)
    _emit(report.to_json())
    return {"valid": 0, "stale": 1, "corrupt": 2}[report.status]


def cmd_simulate(args) -> int:
    net = load_network(args.network)
    reports = sim.monte_carlo(
        net, steps=args.steps, runs=args.runs, seed=args.seed,
        wind_bound=Fraction(args.wind_shift_bound),
        sensor_bound=Fraction(args.sensor_error_bound))
    on_road = sum(r.on_road for r in reports)
    out = {
        "runs": args.runs,
        "steps": args.steps,
        "on_road": on_road,
        "max_abs_position": str(max(r.max_abs_position for r in reports)),
        "guard_violations": sum(r.guard_violations for r in reports),
        "verdicts": ["on-road" if r.on_road else "off-road"
                     for r in reports],
    }
    _emit(out)
    return 0 if on_road == args.runs else 1


def cmd_loss_eval(args) -> int:
    program, tp = _load_checked(args.file)
    resources = bind_resources(
        tp, _bindings(args.network), _bindings(args.dataset),
        _bindings(args.parameter))
    fallback = None
    if args.fallback_domain:
        fallback = (Fraction(args.fallback_domain[0]),
                    Fraction(args.fallback_domain[1]))
    lp = loss.compile_loss(
        tp, args.property, _logic_from_args(args),
        sigma=Fraction(args.sigma), xi=Fraction(args.xi),
        fallback=fallback, resources=resources)
    value = loss.eval_loss(lp, resources, args.seed, args.samples)
    _emit({"loss": value, "logic": args.logic,
           "samples": args.samples, "seed": args.seed})
    return 0


# -- argument parsing ---------------------------------------------------------

def _add_resource_flags(p):
    p.add_argument("--network", action="append", metavar="NAME=PATH")
    p.add_argument("--dataset", action="append", metavar="NAME=PATH")
    p.add_argument("--parameter", action="append", metavar="NAME=VALUE")


def _add_loss_flags(p):
    p.add_argument("--logic", default="dl2",
                   choices=["dl2", "godel", "lukasiewicz", "product",
                            "yager"])
    p.add_argument("--yager-p", default="2")
    p.add_argument("--sigma", default="1")
    p.add_argument("--xi", default="1")
    p.add_argument("--samples", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--fallback-domain", nargs=2, metavar=("LO", "HI"))


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="specbridge",
        description="Compile problem-space network specifications to "
                    "training losses, verifier queries and prover "
                    "interfaces.")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("parse", help="parse and name-resolve a spec")
    p.add_argument("file")
    p.add_argument("--dump-ast", action="store_true")
    p.set_defaults(fn=cmd_parse)

    p = sub.add_parser("check", help="type-check a spec")
    p.add_argument("file")
    p.add_argument("--dump-normal-form", metavar="PROPERTY")
    p.set_defaults(fn=cmd_check)

    p = sub.add_parser("compile", help="compile a property")
    p.add_argument("--target", required=True, choices=["loss", "queries"])
    p.add_argument("file")
    p.add_argument("property")
    _add_resource_flags(p)
    _add_loss_flags(p)
    p.add_argument("--cache-dir")
    p.add_argument("--slack", default="0",
                   help="tightening of strict inequalities in emitted "
                        "query files")
    p.add_argument("--dump-elimination", action="store_true",
                   help="print each variable-elimination stage to stderr")
    p.add_argument("-o", "--output")
    p.set_defaults(fn=cmd_compile)

    p = sub.add_parser("export", help="export a prover interface file")
    p.add_argument("--target", required=True, choices=["itp"])
    p.add_argument("file")
    p.add_argument("property")
    p.add_argument("--cache-dir", required=True)
    p.add_argument("--module")
    p.add_argument("--table", help="rendering table JSON")
    p.add_argument("--allow-unverified", action="store_true")
    p.add_argument("-o", "--output")
    p.set_defaults(fn=cmd_export)

    p = sub.add_parser("verify", help="solve the query tree for a property")
    p.add_argument("file", nargs="?")
    p.add_argument("property", nargs="?")
    _add_resource_flags(p)
    p.add_argument("--cache-dir")
    p.add_argument("--budget", type=int, default=24,
                   help="activation-pattern budget (total ReLU units)")
    p.set_defaults(fn=cmd_verify)

    p = sub.add_parser("check-cache", help="re-validate cache integrity")
    p.add_argument("--cache-dir", required=True)
    p.set_defaults(fn=cmd_check_cache)

    p = sub.add_parser("simulate", help="Monte-Carlo runs of the car model")
    p.add_argument("--network", required=True, metavar="PATH")
    p.add_argument("--steps", type=int, default=100)
    p.add_argument("--runs", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--wind-shift-bound", default="1")
    p.add_argument("--sensor-error-bound", default="0.25")
    p.set_defaults(fn=cmd_simulate)

    p = sub.add_parser("loss-eval", help="evaluate a property's loss")
    p.add_argument("file")
    p.add_argument("property")
    _add_resource_flags(p)
    _add_loss_flags(p)
    p.set_defaults(fn=cmd_loss_eval)

    return ap


def main(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return USAGE_ERROR if exc.code not in (0, None) else 0
    try:
        return args.fn(args)
    except PatternBudgetExceeded as exc:
        _emit(exc.to_json())
        print(f"error: {exc}", file=sys.stderr)
        return USAGE_ERROR
    except SpecError as exc:
        _emit(exc.to_json())
        print(f"error: {exc}", file=sys.stderr)
        return USAGE_ERROR
    except OSError as exc:
        _emit({"error": "io-error", "message": str(exc)})
        print(f"error: {exc}", file=sys.stderr)
        return USAGE_ERROR


if __name__ == "__main__":
    sys.exit(main())
