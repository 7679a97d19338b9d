"""Batch command-line front-end for the control-law learning pipeline.

Subcommands cover dataset generation, training, baselines, MILP export and
solution import, point prediction, closed-loop simulation, and report
merging. Every written artifact records provenance (config hash, dataset
hash, tool version) so downstream steps can refuse mismatched inputs.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from . import __version__
from .basis import canonical_basis
from .baselines import fit_cart_constant, fit_cart_linear, fit_sparse
from .closed_loop import (constant_controller, iae, latency_stats,
                          model_controller, mpc_controller, simulate)
from .config import load_config
from .errors import ConfigError, SymtreeError
from .learner import Dataset, fit_tree, objective_of
from .milp import build_milp, parse_solution_text, read_solution, write_mps
from .mpc import generate_dataset
from .tree import deserialize, predict, serialize

USAGE_ERROR = 1
RUNTIME_ERROR = 2


def _provenance(cfg, data=None) -> dict:
    out = {"tool_version": __version__, "config_hash": cfg.config_hash()}
    if data is not None:
        out["dataset_sha256"] = data.sha256()
    return out


def _write_json(path, doc) -> None:
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2)
        fh.write("\n")


def _read_dataset(path) -> Dataset:
    with open(path) as fh:
        return Dataset.from_csv(fh.read())


def _sibling(path, suffix) -> str:
    base = path[: -len(".tree.json")] if path.endswith(".tree.json") else \
        os.path.splitext(path)[0]
    return base + suffix


def _model_metrics(model, data, lcfg) -> dict:
    objective, (l_acc, l_c, l_m) = objective_of(model, data, lcfg)
    return {"objective": objective, "train_mae": l_acc,
            "n_branch": int(l_c), "coeff_l1": l_m}


def cmd_gen_data(args) -> int:
    cfg = load_config(args.config)
    spec = cfg.mpc_spec()
    d = cfg["data"]
    lo, hi = d["range"]
    train = generate_dataset(spec, d["n_train"], lo, hi, mode=d["mode"],
                             seed=d["seed"])
    test = generate_dataset(spec, d["n_test"], lo, hi, mode="seeded-random",
                            seed=d["seed"] + 1)
    os.makedirs(args.out_dir, exist_ok=True)
    for name, ds in (("train", train), ("test", test)):
        with open(os.path.join(args.out_dir, f"{name}.csv"), "w") as fh:
            fh.write(ds.to_csv())
    _write_json(os.path.join(args.out_dir, "datasets.json"), {
        "provenance": _provenance(cfg),
        "train_sha256": train.sha256(),
        "test_sha256": test.sha256(),
        "n_train": train.n_points, "n_test": test.n_points,
    })
    print(f"wrote train.csv ({train.n_points} pts), test.csv ({test.n_points} pts)"
          f" to {args.out_dir}")
    return 0


def cmd_train(args) -> int:
    cfg = load_config(args.config)
    data = _read_dataset(args.data)
    lcfg = cfg.learn_config()
    rep = fit_tree(data, canonical_basis(), lcfg)
    with open(args.out, "w") as fh:
        fh.write(serialize(rep.model))
    doc = {
        "provenance": _provenance(cfg, data),
        "kind": "symbolic",
        "model_file": os.path.basename(args.out),
        **_model_metrics(rep.model, data, lcfg),
        "splits": [{"node": n, "feature": r.feature, "threshold": r.threshold}
                   for n, r in sorted(rep.model.rules.items())],
        "subproblems_solved": rep.subproblems_solved,
        "wall_time_s": rep.wall_time,
    }
    _write_json(_sibling(args.out, ".report.json"), doc)
    print(f"objective {rep.objective:.6g} with {doc['n_branch']} branch nodes"
          f" ({rep.subproblems_solved} leaf subproblems, {rep.wall_time:.1f} s)")
    return 0


def cmd_baseline(args) -> int:
    cfg = load_config(args.config)
    data = _read_dataset(args.data)
    lcfg = cfg.learn_config()
    if args.kind == "sparse":
        model = fit_sparse(data, canonical_basis(), lcfg.lambda_m,
                           (lcfg.c_lb, lcfg.c_ub))
    elif args.kind == "cart":
        model = fit_cart_constant(data, lcfg.depth)
    else:
        model = fit_cart_linear(data, lcfg.depth)
    with open(args.out, "w") as fh:
        fh.write(serialize(model))
    doc = {
        "provenance": _provenance(cfg, data),
        "kind": args.kind,
        "model_file": os.path.basename(args.out),
        **_model_metrics(model, data, lcfg),
    }
    _write_json(_sibling(args.out, ".report.json"), doc)
    print(f"{args.kind}: train MAE {doc['train_mae']:.6g}")
    return 0


def cmd_export_milp(args) -> int:
    cfg = load_config(args.config)
    data = _read_dataset(args.data)
    art = build_milp(data, canonical_basis(), cfg.learn_config())
    write_mps(art, args.out)
    _write_json(_sibling(args.out, ".counts.json"), {
        "provenance": _provenance(cfg, data),
        "n_vars": art.n_vars, "n_binary": art.n_binary, "n_rows": art.n_rows,
    })
    print(f"{art.n_vars} variables ({art.n_binary} binary), {art.n_rows} rows"
          f" -> {args.out}")
    return 0


def cmd_import_sol(args) -> int:
    cfg = load_config(args.config)
    data = _read_dataset(args.data)
    art = build_milp(data, canonical_basis(), cfg.learn_config())
    with open(args.sol) as fh:
        assignments = parse_solution_text(fh.read())
    decoded = read_solution(art, assignments)
    with open(args.out, "w") as fh:
        fh.write(serialize(decoded.model))
    doc = {
        "provenance": _provenance(cfg, data),
        "kind": "milp-import",
        "model_file": os.path.basename(args.out),
        **_model_metrics(decoded.model, data, cfg.learn_config()),
        "claimed_objective": decoded.claimed_objective,
        "recomputed_objective": decoded.objective,
    }
    _write_json(_sibling(args.out, ".report.json"), doc)
    claimed = ("none" if decoded.claimed_objective is None
               else f"{decoded.claimed_objective:.6g}")
    print(f"recomputed objective {decoded.objective:.6g} (claimed: {claimed})")
    return 0


def cmd_predict(args) -> int:
    with open(args.model) as fh:
        model = deserialize(fh.read())
    print(repr(predict(model, args.x)))
    return 0


def _make_controller(spec, cfg, name):
    if name == "mpc":
        return mpc_controller(spec)
    if name.startswith("model:"):
        with open(name[len("model:"):]) as fh:
            return model_controller(deserialize(fh.read()), spec.u_bounds)
    if name.startswith("const:"):
        return constant_controller(float(name[len("const:"):]), spec.u_bounds)
    raise ConfigError(f"unknown controller {name!r} "
                      "(expected mpc, model:<path>, or const:<value>)")


def cmd_simulate(args) -> int:
    cfg = load_config(args.config)
    spec = cfg.mpc_spec()
    sim = cfg["sim"]
    ctrl = _make_controller(spec, cfg, args.controller)
    trace = simulate(cfg.plant_spec(), ctrl, sim["x0"], sim["t_final"],
                     sim["dt_sample"])
    with open(args.out, "w") as fh:
        fh.write(trace.to_csv())
    lat_mean, lat_max = latency_stats(trace)
    doc = {
        "provenance": _provenance(cfg),
        "controller": args.controller,
        "iae": iae(trace, spec.x_sp),
        "latency_mean_s": lat_mean, "latency_max_s": lat_max,
        "trace_file": os.path.basename(args.out),
    }
    _write_json(_sibling(args.out, ".metrics.json"), doc)
    print(f"IAE {doc['iae']:.6g}, mean latency {lat_mean:.3g} s")
    return 0


def cmd_report(args) -> int:
    test = _read_dataset(args.test)
    entries = []
    train_hashes = set()
    for rpath in args.reports:
        with open(rpath) as fh:
            rep = json.load(fh)
        train_hashes.add(rep["provenance"].get("dataset_sha256"))
        mpath = os.path.join(os.path.dirname(rpath) or ".", rep["model_file"])
        with open(mpath) as fh:
            model = deserialize(fh.read())
        errs = [abs(test.y[i] - predict(model, test.X[i]))
                for i in range(test.n_points)]
        entries.append({"kind": rep["kind"], "model_file": rep["model_file"],
                        "train_mae": rep.get("train_mae"),
                        "test_mae": float(np.mean(errs))})
    if len(train_hashes) != 1:
        raise ConfigError(
            f"refusing to compare models trained on different datasets: "
            f"{sorted(str(h) for h in train_hashes)}")
    entries.sort(key=lambda e: e["test_mae"])
    doc = {"test_sha256": test.sha256(),
           "train_sha256": train_hashes.pop(),
           "models": entries}
    _write_json(args.out, doc)
    for e in entries:
        print(f"{e['kind']:<12} test MAE {e['test_mae']:.6g}")
    return 0


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"error: {message}", file=sys.stderr)
        raise SystemExit(USAGE_ERROR)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="symtree", description=__doc__)
    p.add_argument("--version", action="version", version=f"symtree {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    def add(name, fn, helptext):
        sp = sub.add_parser(name, help=helptext)
        sp.set_defaults(fn=fn)
        sp.add_argument("--config", default=None, help="JSON config file")
        return sp

    sp = add("gen-data", cmd_gen_data, "generate MPC-labeled train/test data")
    sp.add_argument("--out-dir", default=".")
    sp = add("train", cmd_train, "fit the symbolic decision tree")
    sp.add_argument("--data", required=True)
    sp.add_argument("--out", default="model.tree.json")
    sp = add("baseline", cmd_baseline, "fit a comparison model")
    sp.add_argument("--kind", required=True, choices=["sparse", "cart", "lintree"])
    sp.add_argument("--data", required=True)
    sp.add_argument("--out", default="baseline.tree.json")
    sp = add("export-milp", cmd_export_milp, "write the learning problem as MPS")
    sp.add_argument("--data", required=True)
    sp.add_argument("--out", default="learning.mps")
    sp = add("import-sol", cmd_import_sol, "decode an external solver solution")
    sp.add_argument("--data", required=True)
    sp.add_argument("--sol", required=True)
    sp.add_argument("--out", default="imported.tree.json")
    sp = add("predict", cmd_predict, "evaluate a model at one point")
    sp.add_argument("--model", required=True)
    sp.add_argument("--x", type=float, required=True)
    sp = add("simulate", cmd_simulate, "closed-loop run under a controller")
    sp.add_argument("--controller", required=True,
                    help="mpc | model:<path> | const:<value>")
    sp.add_argument("--out", default="trace.csv")
    sp = add("report", cmd_report, "merge model metrics into one comparison")
    sp.add_argument("--test", required=True)
    sp.add_argument("--reports", nargs="+", required=True)
    sp.add_argument("--out", default="comparison.json")
    return p


def run(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.fn(args)
    except SymtreeError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return RUNTIME_ERROR
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return RUNTIME_ERROR


def main() -> None:
    raise SystemExit(run())


if __name__ == "__main__":
    main()
