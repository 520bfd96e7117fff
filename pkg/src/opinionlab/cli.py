"""Command-line driver: ``opinionlab <subcommand> [--config FILE] [overrides]``."""

import argparse
import csv
import io
import json
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import closed_forms as cf
from .coarse import CoarseModel, _echo_variance, coarse_equilibrium, coarse_longrun
from .config import (build_network, build_noise, build_rules, build_signal, config_hash,
                     load_config, set_path, validate_config)
from .exceptions import ConfigError, OpinionLabError
from .game import (best_response, best_response_curve, compare_networks, nash_solve,
                   polarization_optimum, polarization_study, social_optimum, symmetry_classes)
from .longrun import influence, solve_longrun
from .loss import analytic_loss, mc_loss
from .net import make_complete
from .rules import NoiseSpec, sample_realization
from .sim import Protocol, alternating_protocol, random_covering_protocol, run

COMMANDS = ("simulate", "longrun", "loss", "best-response", "nash", "social-opt",
            "compare-networks", "polarization", "coarse", "reproduce")
TARGETS = ("fig1", "table-two-player", "prop-a0", "result5")

# Output schemas: each subcommand's JSON payload must validate against these.
_arr = {"type": "array", "items": {"type": ["number", "null"]}}
_rows = {"type": "array", "items": {"type": "object"}}
OUTPUT_SCHEMAS = {
    "simulate": {"type": "object", "required": ["status", "t_stop", "y_final"],
                 "properties": {"status": {"enum": ["converged", "maxed_out", "diverged"]},
                                "t_stop": {"type": "integer"}, "y_final": _arr}},
    "longrun": {"type": "object", "required": ["y", "P", "dg_set"],
                "properties": {"y": _arr, "P": {"type": "array"}}},
    "loss": {"type": "object", "required": ["L", "v_star"], "properties": {"L": _arr}},
    "best-response": {"type": "object", "required": ["player", "m_i"],
                      "properties": {"m_i": {"type": "number"}}},
    "nash": {"type": "object", "required": ["m_star", "residual"],
             "properties": {"m_star": _arr, "residual": {"type": "number"}}},
    "social-opt": {"type": "object", "required": ["m_star_star", "total_loss"],
                   "properties": {"m_star_star": _arr}},
    "compare-networks": {"type": "object", "required": ["rows"], "properties": {"rows": _rows}},
    "polarization": {"type": "object", "required": ["rows", "m_social"],
                     "properties": {"rows": _rows}},
    "coarse": {"type": "object", "required": ["rows", "m_star"], "properties": {"rows": _rows}},
    "reproduce": {"type": "object", "required": ["target", "files", "rows"]},
}


def _threads():
    try:
        return max(1, int(os.environ.get("OPINIONLAB_THREADS", "1")))
    except ValueError:
        return 1


def ordered_map(fn, items):
    """Map in parallel (capped by OPINIONLAB_THREADS) keeping input order."""
    items = list(items)
    k = _threads()
    if k == 1 or len(items) < 2:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=k) as pool:
        return list(pool.map(fn, items))


def _fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return str(bool(v)).lower()
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return f"{float(v):.12g}"
    return str(v)


def rows_to_csv(rows, columns=None):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    columns = columns or list(rows[0].keys())
    w.writerow(columns)
    for r in rows:
        w.writerow([_fmt(r.get(c, "")) for c in columns])
    return buf.getvalue()


def _jsonable(x):
    if isinstance(x, dict):
        return {k: _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, np.ndarray):
        return _jsonable(x.tolist())
    if isinstance(x, (np.floating, float)):
        return float(x) if np.isfinite(x) else None
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, np.bool_):
        return bool(x)
    return x


def _vector_arg(text):
    try:
        vals = [float(v) for v in text.split(",")]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a number or comma list, got {text!r}")
    return vals[0] if len(vals) == 1 else vals


def build_parser():
    p = argparse.ArgumentParser(prog="opinionlab", description=__doc__)
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("target", nargs="?", help="reproduce target: " + ", ".join(TARGETS))
    p.add_argument("--config", help="JSON run configuration")
    p.add_argument("--network", help="generator name (complete, directed_circle, star, two_stars)")
    p.add_argument("--n", type=int, help="player count (per star for two_stars)")
    p.add_argument("--varpi", type=float, help="persistent error variance")
    p.add_argument("--m", type=_vector_arg, help="seed weight(s), scalar or comma list")
    p.add_argument("--gamma", type=_vector_arg, help="adjustment speed(s)")
    p.add_argument("--seed", type=int, help="random seed")
    p.add_argument("--out", help="output file (directory for reproduce)")
    p.add_argument("--format", choices=("json", "csv"), default="json")
    p.add_argument("--trace", help="write the trajectory CSV here (simulate)")
    return p


def _merge_overrides(cfg, args):
    for flag, path in (("network", "network.generator"), ("n", "network.n"),
                       ("varpi", "noise.persistent_variance"), ("m", "rules.m"),
                       ("gamma", "rules.gamma"), ("seed", "seed")):
        v = getattr(args, flag)
        if v is not None:
            set_path(cfg, path, v)
    validate_config(cfg, None, "<flags>")
    return cfg


def _protocol(cfg, net):
    p = cfg.get("protocol", {})
    kind = p.get("kind", "synchronous")
    if kind == "alternating":
        return alternating_protocol(net.n)
    if kind == "random_covering":
        return random_covering_protocol(net, p.get("coverage_K", 3), p.get("seed", 0))
    return Protocol.synchronous()


# ---------------------------------------------------------------- commands

def cmd_simulate(cfg, args):
    net = build_network(cfg)
    rules = build_rules(cfg, net.n)
    noise = build_noise(cfg)
    o = cfg.get("options", {})
    real = sample_realization(build_signal(cfg), noise, net.n, cfg.get("seed", 0), net)
    every = o.get("trace_every", 1) if args.trace else 0
    tr = run(net, rules, real, _protocol(cfg, net), max_T=o.get("max_T", 10**6),
             tol=o.get("tol", 1e-10), blowup_threshold=o.get("blowup_threshold", 1e9),
             record_every=every)
    if args.trace:
        Path(args.trace).write_text(tr.to_csv())
    payload = {"status": tr.status, "reason": tr.reason, "t_stop": tr.t_stop,
               "y_final": tr.y_final, "theta": real.theta}
    row = {"status": tr.status, "t_stop": tr.t_stop}
    row.update({f"y_{i + 1}": v for i, v in enumerate(tr.y_final)})
    return payload, [row]


def cmd_longrun(cfg, args):
    net = build_network(cfg)
    rules = build_rules(cfg, net.n)
    noise = build_noise(cfg)
    real = sample_realization(build_signal(cfg), noise, net.n, cfg.get("seed", 0), net)
    sol = solve_longrun(net, rules.m, real.x, real.xi)
    payload = {"y": sol.y, "P": sol.P, "dg_set": sol.dg_set.tolist(), "x": real.x, "xi": real.xi}
    player = cfg.get("options", {}).get("player")
    if player is not None:
        payload["decomposition"] = influence(net, rules.m, player, noise,
                                             build_signal(cfg).sigma_sq_vector(net.n)).to_dict()
    return payload, [{"player": i, "y": v} for i, v in enumerate(sol.y)]


def cmd_loss(cfg, args):
    net = build_network(cfg)
    rules = build_rules(cfg, net.n)
    noise, signal = build_noise(cfg), build_signal(cfg)
    rep = analytic_loss(net, rules, noise, signal, on_diverge="marker")
    payload = rep.to_dict()
    o = cfg.get("options", {})
    if "replicas" in o:
        mc = mc_loss(net, rules, noise, signal, o["replicas"], o.get("horizon", 10**5),
                     cfg.get("seed", 0))
        payload["mc_L"], payload["mc_se"] = mc.L, mc.se
    rows = [{"player": i, "L": rep.L[i], "W": rep.W[i], "delta_hat": rep.delta_hat[i]}
            for i in range(net.n)]
    return payload, rows


def cmd_best_response(cfg, args):
    net = build_network(cfg)
    rules = build_rules(cfg, net.n)
    i = cfg.get("options", {}).get("player", 0)
    g = rules.gamma
    v = best_response(net, rules.m, build_noise(cfg), build_signal(cfg), i, g)
    return {"player": i, "m_i": v, "m_others": rules.m}, [{"player": i, "m_i": v}]


def _classes(cfg, net):
    sym = cfg.get("options", {}).get("symmetry")
    if sym in (None, "none"):
        return None
    return symmetry_classes(net, sym)


def cmd_nash(cfg, args):
    net = build_network(cfg)
    o = cfg.get("options", {})
    eq = nash_solve(net, build_noise(cfg), build_signal(cfg), damping=o.get("damping", 0.5),
                    classes=_classes(cfg, net))
    payload = eq.to_dict()
    if eq.gamma is not None:
        payload["gamma"] = eq.gamma
    rows = [{"player": i, "m_star": v, "L": eq.losses.L[i]} for i, v in enumerate(eq.m_star)]
    return payload, rows


def cmd_social_opt(cfg, args):
    net = build_network(cfg)
    so = social_optimum(net, build_noise(cfg), build_signal(cfg), classes=_classes(cfg, net),
                        seed=cfg.get("seed", 0))
    rows = [{"player": i, "m_star_star": v, "L": so.losses.L[i]} for i, v in enumerate(so.m)]
    return so.to_dict(), rows


COMPARE_COLUMNS = ["network", "n", "varpi", "correlation", "m_star", "m0_star", "delta_hat",
                   "L_star"]


def cmd_compare_networks(cfg, args):
    n = cfg.get("network", {}).get("n", 5)
    noise = cfg.get("noise", {})
    rows = compare_networks(n, noise.get("persistent_variance", 1e-6),
                            noise.get("correlation", "independent"),
                            cfg.get("options", {}).get("varpi0"))
    return {"rows": rows}, rows


def _polarization_rows(n_per_star, grid, varpi, varpi0, hub_mode):
    reps = polarization_study(n_per_star, grid, varpi, varpi0, hub_mode)
    return [{"m": r.m, "d": r.d, "D": r.D, "D_leading": r.D_leading, "D_finite": r.D_finite,
             "m0": r.m0, "loss": r.loss, "Dd_over_4varpi0": r.D * r.d / (4 * varpi0)}
            for r in reps]


def cmd_polarization(cfg, args):
    o = cfg.get("options", {})
    varpi = cfg.get("noise", {}).get("persistent_variance", 0.0)
    varpi0 = o.get("varpi0", 1e-4)
    grid = o.get("grid", list(np.round(np.linspace(0.02, 0.2, 10), 10)))
    n_per_star = o.get("n_per_star", cfg.get("network", {}).get("n", 500))
    rows = ordered_map(lambda m: _polarization_rows(n_per_star, [m], varpi, varpi0,
                                                    o.get("hub_mode", "dg"))[0], grid)
    m_soc = polarization_optimum(varpi, varpi0)
    return {"rows": rows, "m_social": m_soc, "varpi": varpi, "varpi0": varpi0}, rows


def cmd_coarse(cfg, args):
    o = cfg.get("options", {})
    varpi = cfg.get("noise", {}).get("persistent_variance", 1e-4)
    model = CoarseModel(o.get("b_mean", 0.0), o.get("b_sd", 1.0), 1.0, varpi)
    xi = o.get("xi", float(np.sqrt(varpi)))
    theta = o.get("theta", 0.0)
    grid = o.get("grid", [0.02, 0.05, 0.1, 0.2, 0.5])

    def one(m):
        out = coarse_longrun(model, theta, m, xi)
        loss = m * m + (1 - m) ** 2 * _echo_variance(model, m) if m > 0 else float("inf")
        return {"m": m, "xi_hat": out.xi_hat, "loss": loss}
    rows = ordered_map(one, grid)
    eq = coarse_equilibrium(model)
    return {"rows": rows, "m_star": eq.m_star, "m_social": eq.m_social,
            "m_star_numeric": eq.m_star_numeric, "m_social_numeric": eq.m_social_numeric}, rows


# ---------------------------------------------------------------- reproduce

def _fig1(cfg):
    varpi = 0.01
    net = make_complete(2)
    grid = np.round(np.linspace(0.01, 1.0, 100), 10)
    g, br = best_response_curve(net, NoiseSpec(varpi), grid=grid)
    rows = [{"m_j": a, "br_m_i": b} for a, b in zip(g, br)]
    m_star = cf.two_player_nash(varpi)
    return {"br_curve.csv": rows}, {"varpi": varpi, "m_star": m_star}


def _table_two_player(cfg):
    net = make_complete(2)
    grid = cfg.get("options", {}).get("varpi_grid", [1e-2, 1e-3, 1e-4, 1e-6, 1e-8])

    def one(v):
        eq = nash_solve(net, NoiseSpec(v), classes=[[0, 1]])
        so = social_optimum(net, NoiseSpec(v), symmetric_hint=True)
        return {"varpi": v, "m_star": eq.m_star[0], "m_star_star": so.m[0],
                "ratio": so.m[0] / eq.m_star[0], "L_star": eq.losses.L[0],
                "L_star_star": so.losses.L[0]}
    rows = ordered_map(one, grid)
    return {"two_player.csv": rows}, {}


def _prop_a0(cfg):
    varpi = cfg.get("noise", {}).get("persistent_variance", 1e-6)
    rows = []
    for part in ordered_map(lambda n: compare_networks(n, varpi), [5, 200]):
        rows.extend(part)
    return {"prop_a0.csv": [{c: r[c] for c in COMPARE_COLUMNS} for r in rows]}, {}


def _result5(cfg):
    varpi0 = cfg.get("options", {}).get("varpi0", 1e-4)
    grid = np.round(np.linspace(0.02, 0.3, 29), 10)
    rows = _polarization_rows(500, grid, 0.0, varpi0, "dg")
    return {"result5.csv": rows}, {"m_social": polarization_optimum(0.0, varpi0)}


REPRODUCERS = {"fig1": _fig1, "table-two-player": _table_two_player, "prop-a0": _prop_a0,
               "result5": _result5}


def cmd_reproduce(cfg, args):
    if args.target not in REPRODUCERS:
        raise ConfigError(f"reproduce needs a target from {TARGETS}, got {args.target!r}")
    t0 = time.perf_counter()
    tables, extra = REPRODUCERS[args.target](cfg)
    out_dir = Path(args.out or f"reproduce-{args.target}")
    out_dir.mkdir(parents=True, exist_ok=True)
    files = []
    all_rows = []
    for name, rows in tables.items():
        (out_dir / name).write_text(rows_to_csv(rows))
        files.append(name)
        all_rows.extend(rows)
    manifest = {"target": args.target, "config_hash": config_hash(cfg),
                "seed": cfg.get("seed", 0), "files": files,
                "runtime_s": round(time.perf_counter() - t0, 3)}
    (out_dir / "manifest.json").write_text(json.dumps(manifest, indent=2) + "\n")
    payload = {"target": args.target, "files": [str(out_dir / f) for f in files],
               "rows": all_rows}
    payload.update(extra)
    args.out = None  # data already written; the summary goes to stdout
    return payload, all_rows


HANDLERS = {"simulate": cmd_simulate, "longrun": cmd_longrun, "loss": cmd_loss,
            "best-response": cmd_best_response, "nash": cmd_nash, "social-opt": cmd_social_opt,
            "compare-networks": cmd_compare_networks, "polarization": cmd_polarization,
            "coarse": cmd_coarse, "reproduce": cmd_reproduce}


def render(payload, rows, fmt):
    if fmt == "csv":
        return rows_to_csv(rows) if rows else ""
    return json.dumps(_jsonable(payload), indent=2) + "\n"


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config) if args.config else {}
        cfg = _merge_overrides(cfg, args)
        payload, rows = HANDLERS[args.command](cfg, args)
    except ConfigError as exc:
        print(f"opinionlab: config error: {exc}", file=sys.stderr)
        return 2
    except OpinionLabError as exc:
        print(f"opinionlab: {args.command} failed: {type(exc).__name__}: {exc}", file=sys.stderr)
        trace = getattr(exc, "trace", None)
        if trace:
            print(f"last iterates: {trace[-5:]}", file=sys.stderr)
        return 1
    text = render(payload, rows, args.format)
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    return 0


if __name__ == "__main__":
    sys.exit(main())
