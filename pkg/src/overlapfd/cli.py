"""Batch command-line front end.

Subcommands: solve, converge, spectrum, lebesgue-map, bench. Each reads a
flat JSON config (or direct flags for the diagnostics) and writes CSV
outputs. All randomness flows from a single seed, so identical configs
produce byte-identical files.
"""

from __future__ import annotations

import argparse
import json
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

USAGE_ERROR, RUNTIME_ERROR = 2, 1

_DEFAULTS = {
    "problem": "disk2d",
    "pe": 1000,
    "xi": 2,
    "seed": 0,
    "t_final": None,   # problem default
    "out_dir": ".",
}


def _load_config(path):
    p = Path(path)
    if not p.exists():
        raise FileNotFoundError(f"config file not found: {path}")
    cfg = dict(_DEFAULTS)
    cfg.update(json.loads(p.read_text()))
    return cfg


def _resolve_h(cfg):
    from . import geometry

    if cfg.get("h"):
        return float(cfg["h"])
    if cfg.get("n_target"):
        return geometry.h_for_target(int(cfg["n_target"]))
    raise KeyError("config needs either 'h' or 'n_target'")


def _get_problem(cfg):
    import dataclasses

    from . import problems

    prob = problems.get_problem(cfg["problem"], pe=int(cfg.get("pe", 1000)))
    if cfg.get("t_final"):
        prob = dataclasses.replace(prob, T=float(cfg["t_final"]))
    return prob


def _fmt(v):
    if isinstance(v, float):
        return f"{v:.17g}"
    return str(v)


def _write_rows(path, header, rows):
    with open(path, "w", newline="") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(v) for v in row) + "\n")


def _cmd_solve(args):
    from . import timestepper

    cfg = _load_config(args.config)
    if args.seed is not None:
        cfg["seed"] = args.seed
    out = Path(args.out or cfg["out_dir"])
    out.mkdir(parents=True, exist_ok=True)
    prob = _get_problem(cfg)
    res = timestepper.run(prob, xi=int(cfg["xi"]), h=_resolve_h(cfg),
                          seed=int(cfg["seed"]))
    lvl = res.state.history[0]
    nodes = lvl.nodes
    coords = nodes.extended_coords[: nodes.n_eq]
    _write_rows(out / "solution.csv", ["x", "y", "value"],
                [(coords[i, 0], coords[i, 1], lvl.values_eq[i])
                 for i in range(nodes.n_eq)])
    _write_rows(out / "steps.csv", list(timestepper.StepRecord.FIELDS),
                [tuple(getattr(s, f) for f in timestepper.StepRecord.FIELDS)
                 for s in res.log])
    print(f"solved {prob.name}: N={res.n_final} error={res.error:.6e} "
          f"avg_iters={res.avg_gmres_iters:.1f}")
    return 0


def _one_converge(task):
    from . import geometry, timestepper

    prob_cfg, xi, n_target, seed = task
    prob = _get_problem(prob_cfg)
    res = timestepper.run(prob, xi=xi, h=geometry.h_for_target(n_target),
                          seed=seed)
    return (res.n_final, xi, res.error, res.avg_gmres_iters)


def _cmd_converge(args):
    cfg = _load_config(args.config)
    if args.seed is not None:
        cfg["seed"] = args.seed
    out = Path(args.out or cfg["out_dir"])
    out.mkdir(parents=True, exist_ok=True)
    xi_list = cfg.get("xi_list", [int(cfg["xi"])])
    n_list = cfg.get("n_list", [700, 1400, 2800])
    tasks = [(cfg, int(xi), int(n), int(cfg["seed"]))
             for xi in xi_list for n in n_list]
    if args.jobs > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as ex:
            rows = list(ex.map(_one_converge, tasks))
    else:
        rows = [_one_converge(t) for t in tasks]
    _write_rows(out / "convergence.csv", ["N", "xi", "error", "iters"], rows)
    print(f"wrote {out / 'convergence.csv'} ({len(rows)} rows)")
    return 0


def _cmd_spectrum(args):
    from . import diagnostics
    from .params import ScalingLaw

    if args.config:
        cfg = _load_config(args.config)
        n = int(cfg.get("n_target", 658))
        ell = int(cfg.get("ell", 6))
        law = ScalingLaw(cfg.get("law", "minus_one"))
        seed = int(cfg.get("seed", 0))
        out = Path(args.out or cfg.get("out_dir", ".")) / "spectrum.csv"
    else:
        n, ell, seed = args.n, args.ell, args.seed or 0
        law = ScalingLaw(args.law)
        out = Path(args.out or "spectrum.csv")
    pts = diagnostics.disk_nodes(n, seed=seed)
    res = diagnostics.spectrum_study(pts, ell, law)
    out.parent.mkdir(parents=True, exist_ok=True)
    _write_rows(out, ["re", "im"],
                [(float(v.real), float(v.imag)) for v in res.eigenvalues])
    print(f"spectrum: N={res.N} N_s={res.N_s} max_re={res.max_real:.6g} -> {out}")
    return 0


def _cmd_lebesgue(args):
    from . import diagnostics
    from .params import ScalingLaw

    if args.config:
        cfg = _load_config(args.config)
        n = int(cfg.get("n_halton", 4000))
        ell = int(cfg.get("ell", 6))
        law = ScalingLaw(cfg.get("law", "minus_one"))
        out = Path(args.out or cfg.get("out_dir", ".")) / "lebesgue.csv"
    else:
        n, ell = args.n, args.ell
        law = ScalingLaw(args.law)
        out = Path(args.out or "lebesgue.csv")
    pts = diagnostics.halton_nodes_with_boundary(n)
    vals = diagnostics.lebesgue_map(pts, ell, law)
    out.parent.mkdir(parents=True, exist_ok=True)
    _write_rows(out, ["x", "y", "lambda"],
                [(pts[i, 0], pts[i, 1], vals[i]) for i in range(len(pts))])
    print(f"lebesgue map: {len(pts)} nodes, median={np.median(vals):.6g} -> {out}")
    return 0


def _cmd_bench(args):
    from . import diagnostics

    cfg = _load_config(args.config)
    if args.seed is not None:
        cfg["seed"] = args.seed
    out = Path(args.out or cfg["out_dir"])
    out.mkdir(parents=True, exist_ok=True)
    prob = _get_problem(cfg)
    n_list = cfg.get("n_list", [700, 1400, 2800, 5600])
    rows, slopes = diagnostics.timing_run(prob, int(cfg["xi"]),
                                          [int(n) for n in n_list],
                                          seed=int(cfg["seed"]))
    flat = []
    for r in rows:
        flat.append((r["N"], "preprocess", r["preprocess_ms"]))
        flat.append((r["N"], "step", r["step_ms"]))
    _write_rows(out / "timing.csv", ["N", "phase", "ms"], flat)
    print(f"timing slopes: preprocess={slopes['preprocess']:.2f} "
          f"step={slopes['step']:.2f} -> {out / 'timing.csv'}")
    return 0


def build_parser():
    p = argparse.ArgumentParser(prog="overlapfd",
                                description="meshfree advection-diffusion on "
                                            "moving embedded boundaries")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, config_required=True):
        sp.add_argument("--config", required=config_required,
                        help="JSON config file")
        sp.add_argument("--out", help="output directory (or file for diagnostics)")
        sp.add_argument("--seed", type=int, default=None,
                        help="override the config seed")
        sp.add_argument("--jobs", type=int, default=1,
                        help="parallel workers for sweeps")

    sp = sub.add_parser("solve", help="run the solver once")
    common(sp)
    sp.set_defaults(fn=_cmd_solve)

    sp = sub.add_parser("converge", help="error/iteration sweep over (xi, N)")
    common(sp)
    sp.set_defaults(fn=_cmd_converge)

    sp = sub.add_parser("spectrum", help="discrete-Laplacian spectrum study")
    common(sp, config_required=False)
    sp.add_argument("--n", type=int, default=658)
    sp.add_argument("--ell", type=int, default=6)
    sp.add_argument("--law", default="minus_one",
                    choices=["classical", "plus_one", "minus_one"])
    sp.set_defaults(fn=_cmd_spectrum)

    sp = sub.add_parser("lebesgue-map", help="per-node Lebesgue values on Halton points")
    common(sp, config_required=False)
    sp.add_argument("--n", type=int, default=4000)
    sp.add_argument("--ell", type=int, default=6)
    sp.add_argument("--law", default="minus_one",
                    choices=["classical", "plus_one", "minus_one"])
    sp.set_defaults(fn=_cmd_lebesgue)

    sp = sub.add_parser("bench", help="wall-clock scaling over N")
    common(sp)
    sp.set_defaults(fn=_cmd_bench)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return USAGE_ERROR if exc.code not in (0, None) else 0
    try:
        return args.fn(args)
    except (FileNotFoundError, KeyError, json.JSONDecodeError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return USAGE_ERROR
    except Exception as exc:  # noqa: BLE001
        print(f"runtime failure: {exc}", file=sys.stderr)
        return RUNTIME_ERROR


if __name__ == "__main__":
    sys.exit(main())
