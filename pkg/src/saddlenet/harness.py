"""Command-line front end: run experiments, verify invariants, list presets.

Subcommands
-----------
solve
    Build the configured instance, run each requested method, and write
    one trace CSV per method plus the certified reference solution and
    a summary file into the output directory.
verify
    Run the invariant suite (monotonicity, Lipschitz bound, gradient
    finite differences, distributed/stacked equivalence, rate
    certificates, optimistic-step descent, extra-gradient contraction)
    and emit a machine-readable report.
list-presets
    Show the shipped experiment presets.

Configs are JSON objects; every key can also be set from the command
line. Exit codes: 0 success, 1 validation error, 2 divergence,
3 invariant or certification failure.
"""

import argparse
import json
import os
import sys
import time

import numpy as np

from . import allocation, catalog, consensus, network, oracle, sets
from .core import ValidationError, check_monotone, estimate_kappa, vi_residual
from .solvers import (DivergenceError, METHODS, SolverConfig, delta_diagnostic,
                      eg_contraction_check, run)

__all__ = ["PRESETS", "load_config", "resolve_config", "cmd_solve",
           "cmd_verify", "cmd_list_presets", "main"]


class ConfigError(ValueError):
    """An experiment config failed validation."""


PRESETS = {
    "example1": {
        "kind": "saddle",
        "build": catalog.example1_bilinear,
        "methods": ["GDA", "OGDA", "EG"],
        "iters": 5000,
        "record_every": 1,
        "stop_tol": 0.0,
        "alpha": "paper",
        "seed": 0,
        "description": "bilinear f(x,y)=x'By on boxes, B ~ U[0,5]^(10x10)",
    },
    "quadratic-saddle": {
        "kind": "saddle",
        "build": lambda seed: catalog.quadratic_saddle(),
        "methods": ["GDA", "OGDA", "EG"],
        "iters": 5000,
        "record_every": 1,
        "stop_tol": 0.0,
        "alpha": None,
        "seed": 0,
        "description": "scalar f(x,y)=x^2/2-y^2/2 on boxes; identity operator",
    },
    "consensus5": {
        "kind": "consensus",
        "build": lambda seed: catalog.consensus_quadratics(5),
        "methods": ["OGDA", "EG"],
        "iters": 100000,
        "record_every": 1,
        "stop_tol": 1e-8,
        "alpha": None,
        "seed": 0,
        "description": "5-agent ring, quadratic trackers, agreement at 3",
    },
    "allocation3": {
        "kind": "allocation",
        "build": lambda seed: catalog.allocation_quadratics(),
        "methods": ["OGDA", "EG"],
        "iters": 50000,
        "record_every": 1,
        "stop_tol": 1e-9,
        "alpha": None,
        "seed": 0,
        "description": "3-agent ring, quadratic suppliers, optimum (-1,0,1)",
    },
    "example2": {
        "kind": "allocation",
        "build": catalog.example2_allocation,
        "methods": ["OGDA", "EG"],
        "iters": {"OGDA": 999999, "EG": 499999},
        "record_every": 100,
        "stop_tol": 1e-8,
        "alpha": None,
        "seed": 0,
        "description": "20-agent ring, logistic objectives, coupled supply",
    },
    "consensus5-badgrad": {
        "kind": "consensus",
        "build": lambda seed: catalog.consensus_quadratics_badgrad(5),
        "methods": ["OGDA", "EG"],
        "iters": 2000,
        "record_every": 1,
        "stop_tol": 0.0,
        "alpha": None,
        "seed": 0,
        "negative_control": True,
        "description": "negative control: agent 0 reports a wrong gradient",
    },
}

_CONFIG_KEYS = ("preset", "seed", "methods", "alpha", "iters",
                "record_every", "stop_tol", "out")


def load_config(path):
    """Parse a JSON config file; decode errors keep line/column info."""
    try:
        with open(path) as fh:
            cfg = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ConfigError("{}: invalid JSON at line {} column {}: {}"
                          .format(path, exc.lineno, exc.colno, exc.msg))
    if not isinstance(cfg, dict):
        raise ConfigError("{}: config must be a JSON object".format(path))
    return cfg


def resolve_config(cfg):
    """Merge a raw config with its preset defaults and validate it."""
    unknown = sorted(set(cfg) - set(_CONFIG_KEYS))
    if unknown:
        raise ConfigError("unknown config keys: {}".format(", ".join(unknown)))
    name = cfg.get("preset")
    if name is None:
        raise ConfigError("config key 'preset' is required")
    if name not in PRESETS:
        raise ConfigError("unknown preset '{}'; available: {}"
                          .format(name, ", ".join(sorted(PRESETS))))
    preset = PRESETS[name]
    out = dict(preset)
    out["preset"] = name
    for key in ("seed", "alpha", "iters", "record_every", "stop_tol"):
        if cfg.get(key) is not None:
            out[key] = cfg[key]
    if cfg.get("methods") is not None:
        out["methods"] = list(cfg["methods"])
    out["out"] = cfg.get("out") or os.path.join("runs", name)

    if not isinstance(out["seed"], int):
        raise ConfigError("config key 'seed': expected an integer")
    if not out["methods"]:
        raise ConfigError("config key 'methods': at least one method required")
    bad = [m for m in out["methods"] if str(m).upper() not in METHODS]
    if bad:
        raise ConfigError("config key 'methods': unknown method(s) {};"
                          " choose from {}".format(bad, sorted(METHODS)))
    upper = [str(m).upper() for m in out["methods"]]
    out["methods"] = sorted(set(upper), key=upper.index)
    if out["kind"] != "saddle":
        nonsim = [m for m in out["methods"] if m == "GDA"]
        if nonsim:
            raise ConfigError("config key 'methods': GDA is not a distributed"
                              " method; use OGDA or EG for preset '{}'"
                              .format(name))
    if isinstance(out["iters"], dict):
        out["iters"] = {k: int(v) for k, v in out["iters"].items()}
    else:
        out["iters"] = int(out["iters"])
        if out["iters"] < 0:
            raise ConfigError("config key 'iters': must be nonnegative")
    if not isinstance(out["record_every"], int) or out["record_every"] < 1:
        raise ConfigError("config key 'record_every': positive integer required")
    if out["alpha"] not in (None, "paper"):
        out["alpha"] = float(out["alpha"])
        if out["alpha"] <= 0:
            raise ConfigError("config key 'alpha': must be positive")
    out["stop_tol"] = float(out["stop_tol"])
    if out["stop_tol"] < 0:
        raise ConfigError("config key 'stop_tol': must be nonnegative")
    return out


def _iters_for(config, method):
    iters = config["iters"]
    if isinstance(iters, dict):
        return int(iters.get(method, max(iters.values())))
    return iters


def _jsonable(value):
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, (np.floating, np.integer)):
        return value.item()
    if isinstance(value, dict):
        return {k: _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    return value


def _write_json(path, payload):
    with open(path, "w") as fh:
        json.dump(_jsonable(payload), fh, indent=2, sort_keys=True)
        fh.write("\n")


def _stacked(problem, kind):
    if kind == "consensus":
        return consensus.as_saddle_problem(problem)
    if kind == "allocation":
        return allocation.as_saddle_problem(problem)
    return problem


def _reference(problem, config):
    """Certified reference for the configured instance, as a dict."""
    kind = config["kind"]
    if kind == "saddle":
        z_star = problem.meta.get("z_star")
        if z_star is None:
            return None
        return {"z_star": z_star, "f_star": problem.meta.get("f_star"),
                "vi_residual": vi_residual(problem, z_star)}
    if kind == "consensus":
        if config.get("negative_control"):
            return None
        ref = oracle.solve_consensus_reference(problem)
        return {"x_bar": ref.x_bar, "x": ref.x, "v": ref.v,
                "objective": ref.objective,
                "cone_residual": ref.cone_residual,
                "saddle_residual": ref.saddle_residual, "_obj": ref}
    kkt = problem.meta.get("kkt")
    if kkt is None:
        kkt = oracle.solve_allocation_kkt(problem)
    return {"y": kkt.y, "mu": kkt.mu, "a": kkt.a, "lam": kkt.lam,
            "objective": kkt.objective, "feasibility": kkt.feasibility,
            "stationarity_gap": kkt.stationarity_gap,
            "saddle_residual": kkt.saddle_residual, "_obj": kkt}


def _resolve_alpha(problem, config, method):
    alpha = config["alpha"]
    if alpha == "paper":
        value, halvings = catalog.paper_step_size(
            problem, method, problem.meta.get("alpha_paper", 0.01))
        if halvings:
            print("note: step size for {} halved {}x to {:g} to satisfy"
                  " its bound".format(method, halvings, value))
        return value
    return alpha


def _solve_saddle(problem, config, outdir, summary):
    z0 = problem.meta.get("z0")
    if z0 is None:
        z0 = problem.domain.project(np.zeros(problem.domain.dim))
    z_star = problem.meta.get("z_star")
    for method in config["methods"]:
        alpha = _resolve_alpha(problem, config, method)
        cfg = SolverConfig(method=method, step_size=alpha,
                           max_iters=_iters_for(config, method),
                           stop_tol=config["stop_tol"],
                           record_every=config["record_every"])
        t0 = time.perf_counter()
        trace = run(problem, cfg, z0, z_star=z_star)
        wall = time.perf_counter() - t0
        if (method == "OGDA" and z_star is not None
                and config["record_every"] == 1):
            delta_diagnostic(problem, trace)
        path = os.path.join(outdir, "{}-{}.csv".format(config["preset"], method))
        trace.to_csv(path)
        entry = {"method": method, "alpha": trace.alpha,
                 "iterations": int(trace.iters[-1]),
                 "stopped_at": trace.stopped_at,
                 "gradient_calls": trace.gradient_calls,
                 "wall_time_s": wall,
                 "final_vi_residual": float(trace.vi_residual[-1]),
                 "final_f": float(trace.f_value[-1]), "trace_csv": path}
        if trace.f_star is not None:
            entry["final_f_gap"] = abs(float(trace.f_value[-1]) - trace.f_star)
        summary["runs"].append(entry)


def _solve_network(problem, config, outdir, summary):
    kind = config["kind"]
    simulate = (consensus.simulate_consensus if kind == "consensus"
                else allocation.simulate_allocation)
    for method in config["methods"]:
        alpha = _resolve_alpha(problem, config, method)
        t0 = time.perf_counter()
        trace = simulate(problem, method, alpha=alpha,
                         max_iters=_iters_for(config, method),
                         record_every=config["record_every"],
                         stop_tol=config["stop_tol"])
        wall = time.perf_counter() - t0
        path = os.path.join(outdir, "{}-{}.csv".format(config["preset"], method))
        trace.to_csv(path)
        entry = {"method": method, "alpha": trace.alpha,
                 "iterations": int(trace.iters[-1]),
                 "stopped_at": trace.stopped_at,
                 "gradient_calls": trace.gradient_calls,
                 "wall_time_s": wall,
                 "final_vi_residual": float(trace.vi_residual[-1]),
                 "final_objective": float(trace.objective[-1]),
                 "trace_csv": path}
        if kind == "consensus":
            entry["final_consensus_residual"] = float(
                trace.consensus_residual[-1])
        else:
            entry["final_feasibility_gap"] = float(trace.feasibility_gap[-1])
            lam = trace.lam[-1]
            entry["dual_consensus"] = float(
                np.max(lam, axis=0).max() - np.min(lam, axis=0).min())
        summary["runs"].append(entry)


def cmd_solve(config):
    """Run the configured experiment and write its artifacts."""
    problem = PRESETS[config["preset"]]["build"](config["seed"])
    outdir = config["out"]
    os.makedirs(outdir, exist_ok=True)
    summary = {"preset": config["preset"], "seed": config["seed"], "runs": []}
    reference = _reference(problem, config)
    if reference is not None:
        ref_payload = {k: v for k, v in reference.items() if k != "_obj"}
        _write_json(os.path.join(
            outdir, "{}-reference.json".format(config["preset"])), ref_payload)
    if config["kind"] == "saddle":
        _solve_saddle(problem, config, outdir, summary)
    else:
        _solve_network(problem, config, outdir, summary)
    _write_json(os.path.join(outdir, "config.json"),
                {k: v for k, v in config.items()
                 if k in _CONFIG_KEYS or k in ("kind",)})
    _write_json(os.path.join(outdir, "summary.json"), summary)
    for entry in summary["runs"]:
        print("{method}: alpha={alpha:g} iters={iterations}"
              " calls={gradient_calls} residual={final_vi_residual:.3e}"
              " wall={wall_time_s:.2f}s".format(**entry))
    return 0


def _sample_domain_points(problem, count, seed):
    rng = np.random.default_rng(seed)
    return sets.sample_points(problem.domain, count, rng)


def _check_equivalence(problem, kind, method, iters=1000):
    if kind == "consensus":
        trace = consensus.simulate_consensus(problem, method, max_iters=iters,
                                             stop_tol=0.0)
        sim = network.ConsensusNetworkSimulator(problem, method=method)
        xh, vh = sim.run(iters)
        return max(float(np.max(np.abs(trace.x - xh[trace.iters]))),
                   float(np.max(np.abs(trace.v - vh[trace.iters]))))
    trace = allocation.simulate_allocation(problem, method, max_iters=iters,
                                           stop_tol=0.0)
    sim = network.AllocationNetworkSimulator(problem, method=method)
    yh, ah, lh = sim.run(iters)
    return max(float(np.max(np.abs(trace.y - yh[trace.iters]))),
               float(np.max(np.abs(trace.a - ah[trace.iters]))),
               float(np.max(np.abs(trace.lam - lh[trace.iters]))))


def _reference_z(problem, config, reference):
    kind = config["kind"]
    if kind == "saddle":
        return problem.meta.get("z_star")
    if reference is None or "_obj" not in reference:
        return None
    ref = reference["_obj"]
    if kind == "consensus":
        return np.concatenate([ref.x.ravel(), ref.v.ravel()])
    return np.concatenate([ref.y, ref.a.ravel(), ref.lam.ravel()])


def cmd_verify(config):
    """Run the invariant suite on the configured instance."""
    problem = PRESETS[config["preset"]]["build"](config["seed"])
    kind = config["kind"]
    stacked = _stacked(problem, kind)
    checks = []

    def add(name, passed, margin, detail):
        checks.append({"check": name, "passed": bool(passed),
                       "margin": margin, "detail": detail})

    mono = check_monotone(stacked, n_pairs=1000, seed=config["seed"])
    add("monotonicity", mono["passed"], mono["min_inner"],
        "min inner product over 1000 pairs (bound -1e-10)")

    try:
        kap = estimate_kappa(stacked, n_pairs=1000, seed=config["seed"])
        add("lipschitz_bound", kap["passed"],
            kap["kappa_m"] - kap["max_ratio"],
            "declared kappa {:.6g} minus max sampled ratio {:.6g}"
            .format(kap["kappa_m"], kap["max_ratio"]))
    except ValidationError as exc:
        add("lipschitz_bound", False, None, str(exc))

    points = _sample_domain_points(stacked, 100, config["seed"])
    fd = oracle.finite_diff_check(
        lambda p: stacked.value(*stacked.split(p)),
        lambda p: np.concatenate([stacked.grad_x(*stacked.split(p)),
                                  stacked.grad_y(*stacked.split(p))]),
        points)
    add("gradient_finite_diff", fd["passed"], fd["max_rel_error"],
        "max relative error over 100 points (tolerance 1e-5)")

    if kind in ("consensus", "allocation"):
        for method in ("OGDA", "EG"):
            dev = _check_equivalence(problem, kind, method)
            add("distributed_stacked_equivalence_{}".format(method),
                dev <= 1e-12, dev, "max trajectory deviation, 1000 iterations")

    reference = None
    if not config.get("negative_control"):
        try:
            reference = _reference(problem, config)
        except oracle.CertificationError as exc:
            add("reference_certification", False, None, str(exc))
    z_star = _reference_z(problem, config, reference)

    if z_star is not None:
        if kind == "saddle":
            z0 = problem.meta.get("z0")
        else:
            if kind == "consensus":
                st = consensus.initial_state(problem)
                z0 = np.concatenate([st.x.ravel(), st.v.ravel()])
            else:
                st = allocation.initial_state(problem)
                z0 = np.concatenate([st.y, st.a.ravel(), st.lam.ravel()])
        for method in ("OGDA", "EG"):
            cfg = SolverConfig(method=method, max_iters=1000, stop_tol=0.0)
            trace = run(stacked, cfg, z0, z_star=z_star)
            bound = trace.rate_certificate()
            gap = trace.ergodic_gap[1:] - (bound[1:] + 1e-10)
            add("rate_certificate_{}".format(method),
                bool(np.all(gap <= 0)), float(np.max(gap)),
                "max(ergodic gap minus bound) over recorded T (<= 0 passes)")
            if method == "OGDA":
                delta = delta_diagnostic(stacked, trace)
                eta = 1.0 / (2.0 * trace.alpha) - trace.kappa_m
                steps = np.sum(np.diff(trace.z, axis=0) ** 2, axis=1)
                viol = float(np.max(delta[1:] - delta[:-1] + eta * steps))
                add("optimistic_descent", viol <= 1e-10, viol,
                    "max descent violation along 1000 iterations (bound 1e-10)")
            else:
                rep = eg_contraction_check(trace)
                add("eg_contraction", rep["holds"], rep["max_violation"],
                    "max contraction violation (bound 1e-10)")

    passed = all(c["passed"] for c in checks)
    report = {"preset": config["preset"], "seed": config["seed"],
              "passed": passed, "checks": checks}
    print(json.dumps(_jsonable(report), indent=2, sort_keys=True))
    if config.get("out"):
        os.makedirs(config["out"], exist_ok=True)
        _write_json(os.path.join(config["out"], "verify.json"), report)
    return 0 if passed else 3


def cmd_list_presets():
    for name in sorted(PRESETS):
        preset = PRESETS[name]
        flags = " [negative control]" if preset.get("negative_control") else ""
        print("{:<20} {:<11} {}{}".format(name, preset["kind"],
                                          preset["description"], flags))
    return 0


def _add_common(parser):
    parser.add_argument("--config", help="JSON config file")
    parser.add_argument("--preset", help="preset name (see list-presets)")
    parser.add_argument("--seed", type=int)
    parser.add_argument("--alpha", type=float)
    parser.add_argument("--iters", type=int)
    parser.add_argument("--record-every", type=int, dest="record_every")
    parser.add_argument("--stop-tol", type=float, dest="stop_tol")
    parser.add_argument("--method", action="append", dest="methods",
                        help="repeatable; subset of GDA, OGDA, EG")
    parser.add_argument("--out", help="output directory")


def _gather_config(args):
    cfg = {}
    if args.config:
        cfg.update(load_config(args.config))
    for key in _CONFIG_KEYS:
        value = getattr(args, key, None)
        if value is not None:
            cfg[key] = value
    return resolve_config(cfg)


class _Parser(argparse.ArgumentParser):
    """Argument parser whose usage errors exit with the validation code."""

    def error(self, message):
        self.print_usage(sys.stderr)
        print("error: {}".format(message), file=sys.stderr)
        raise SystemExit(1)


def main(argv=None):
    parser = _Parser(
        prog="saddlenet",
        description="projected saddle-point solvers and distributed"
                    " optimization experiments")
    sub = parser.add_subparsers(dest="command", required=True)
    _add_common(sub.add_parser("solve", help="run an experiment"))
    _add_common(sub.add_parser("verify", help="run the invariant suite"))
    sub.add_parser("list-presets", help="show shipped presets")
    args = parser.parse_args(argv)

    if args.command == "list-presets":
        return cmd_list_presets()
    try:
        config = _gather_config(args)
        if args.command == "solve":
            return cmd_solve(config)
        return cmd_verify(config)
    except (ConfigError, ValidationError) as exc:
        print("error: {}".format(exc), file=sys.stderr)
        return 1
    except DivergenceError as exc:
        print("error: divergence guard tripped: {}".format(exc),
              file=sys.stderr)
        return 2
    except oracle.CertificationError as exc:
        print("error: certification failed: {}".format(exc), file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
