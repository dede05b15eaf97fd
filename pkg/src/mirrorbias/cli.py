"""
Command line entry point.

    mirrorbias run --config sweep.json --out runs/fig1 --workers 4
    mirrorbias train --dataset fig2 --width 270 --potential scaled:pow:p=3,omega=1 --out run1
    mirrorbias variational --dataset fig1 --out sol
    mirrorbias compare --run run1 --solution sol/variational_quadratic.csv
    mirrorbias diagnose --run run1
    mirrorbias pca --run run1
    mirrorbias potentials

Flags override the matching fields of ``--config``. The exit status is 0 when
every run succeeds (for training: reaches the loss threshold), 1 when a run
fails and 2 for invalid input.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import warnings

import numpy as np

from . import svgplot
from .experiments import (PRESETS, ConfigError, ExperimentConfig, cell_seed, linf_error,
                          pca2, run_experiment, variational_for)
from .kernel_diag import drift_report
from .mirror_flow import read_trajectory, train
from .potentials import parse_potential, phi_eval, phi_grad, phi_hess
from .shallow_net import Activation, InitSpec, NetParams, init_params, predict, write_params_csv
from .variational import DiscreteFunction, Grid

EXAMPLE_POTENTIALS = [
    ("quadratic", "x**2"),
    ("pow:p=3,omega=1", "|x|**3 + x**2"),
    ("pow:p=4,omega=1", "x**4 + x**2"),
    ("pow:p=3,omega=1,normalized=1", "(|x|**3 + x**2) / 2"),
    ("hypentropy:beta=1", "x asinh(x / beta) - sqrt(x**2 + beta**2)"),
    ("scaled:<any of the above>", "width-scaled deployment n**-2 phi(n (theta - anchor))"),
]


def _add_common(p):
    p.add_argument("--config", help="JSON experiment config; flags override its fields")
    p.add_argument("--out", help="output directory")
    p.add_argument("--seed", type=int, help="seed (a single sweep seed for 'run')")
    p.add_argument("--workers", type=int, help="parallel worker processes")


def _add_setup(p, sweep=False):
    p.add_argument("--dataset", help="preset name (fig1, fig2) or JSON file with xs, ys")
    p.add_argument("--activation", choices=["relu", "abs"])
    p.add_argument("--grid-n", type=int, help="variational grid intervals")
    if sweep:
        p.add_argument("--widths", type=lambda s: [int(v) for v in s.split(",")],
                       help="comma separated widths")
        p.add_argument("--potentials", type=lambda s: s.split(";"),
                       help="semicolon separated potential strings")
        p.add_argument("--seeds", type=lambda s: [int(v) for v in s.split(",")],
                       help="comma separated seeds")
    else:
        p.add_argument("--width", type=int, help="network width")
        p.add_argument("--potential", help="potential string, e.g. scaled:pow:p=3,omega=1")
    p.add_argument("--eta0", type=float, help="step size times width")
    p.add_argument("--max-steps", type=int)
    p.add_argument("--threshold", type=float, help="loss threshold")
    p.add_argument("--step-mode", choices=["preconditioned", "exact_mirror"])


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mirrorbias",
                                     description="Mirror-flow training of shallow networks and "
                                                 "the variational problems characterizing them.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="full width/potential/seed sweep")
    _add_common(p)
    _add_setup(p, sweep=True)
    p.add_argument("--no-diagnose", action="store_true", help="skip kernel diagnostics")

    p = sub.add_parser("train", help="train one network")
    _add_common(p)
    _add_setup(p)

    p = sub.add_parser("variational", help="solve the variational problem for a dataset")
    _add_common(p)
    _add_setup(p)

    p = sub.add_parser("compare", help="sup-norm distance of a trained net from a solution")
    _add_common(p)
    p.add_argument("--run", required=True, help="directory written by 'train'")
    p.add_argument("--solution", required=True, help="CSV written by 'variational'")

    p = sub.add_parser("diagnose", help="parameter and kernel drift of a training run")
    _add_common(p)
    p.add_argument("--run", required=True, help="directory written by 'train'")

    p = sub.add_parser("pca", help="2D PCA of a recorded trajectory")
    _add_common(p)
    p.add_argument("--run", required=True, help="directory written by 'train'")

    p = sub.add_parser("potentials", help="list potential strings")
    _add_common(p)
    p.add_argument("--at", type=float, nargs="*", default=[-1.0, 0.0, 0.5, 1.0],
                   help="points at which to tabulate phi, phi', phi''")
    return parser


# ---------------------------------------------------------------------------


def _config_from(args, sweep=False) -> ExperimentConfig:
    d = {}
    if args.config:
        with open(args.config) as fh:
            try:
                d = json.load(fh)
            except json.JSONDecodeError as exc:
                raise ConfigError(f"{args.config}: invalid JSON ({exc})") from None
        if not isinstance(d, dict):
            raise ConfigError("config must be a JSON object")
    if getattr(args, "dataset", None):
        if args.dataset in PRESETS:
            d["dataset"] = args.dataset
        else:
            with open(args.dataset) as fh:
                d["dataset"] = json.load(fh)
    if getattr(args, "activation", None):
        d["activation"] = args.activation
    if getattr(args, "grid_n", None):
        d.setdefault("variational", {}).setdefault("grid", {})["N"] = args.grid_n
    tr = d.setdefault("train", {})
    for flag, key in (("eta0", "eta0"), ("max_steps", "max_steps"),
                      ("threshold", "loss_threshold"), ("step_mode", "step_mode")):
        v = getattr(args, flag, None)
        if v is not None:
            tr[key] = v
    if sweep:
        for key in ("widths", "potentials", "seeds"):
            v = getattr(args, key, None)
            if v is not None:
                d[key] = v
        if args.seed is not None:
            d["seeds"] = [args.seed]
    else:
        if getattr(args, "width", None) is not None:
            d["widths"] = [args.width]
        if getattr(args, "potential", None):
            d["potentials"] = [args.potential]
    if args.out:
        d["outputs"] = args.out
    if args.workers is not None:
        d["workers"] = args.workers
    return ExperimentConfig.from_dict(d)


def _cmd_run(args) -> int:
    cfg = _config_from(args, sweep=True)
    if args.no_diagnose:
        cfg.diagnose = False
    rep = run_experiment(cfg)
    n_ok = sum(c.get("ok", False) for c in rep.cells)
    print(f"{n_ok}/{len(rep.cells)} cells succeeded; report in {cfg.outputs}/report.json")
    for c in rep.cells:
        if not c.get("ok", False):
            print(f"  FAILED n={c['width']} {c['potential']} seed={c['seed']}: {c.get('error')}",
                  file=sys.stderr)
    return 0 if rep.all_ok else 1


def _cmd_train(args) -> int:
    cfg = _config_from(args)
    pot_s = cfg.potential_strings()[0]
    pot = parse_potential(pot_s)
    width = cfg.widths[0]
    seed = args.seed if args.seed is not None else cfg.seeds[0]
    data = cfg.data()
    act = Activation(cfg.activation_name())
    init = InitSpec(cfg.init.bias_density, cfg.init.a_scale, cfg.init.d_init,
                    cell_seed(seed, width))
    params = init_params(width, data.dim, init, act)
    tcfg = cfg.train_config(pot)
    traj = train(params, data, pot, tcfg)
    out = cfg.outputs
    os.makedirs(out, exist_ok=True)
    traj.write_csv(os.path.join(out, "trajectory.csv"))
    net = traj.params()
    write_params_csv(net, os.path.join(out, "params.csv"))
    traj.write_meta(os.path.join(out, "meta.json"), potential=pot_s, seed=seed,
                    config=cfg.to_dict(), train=tcfg.to_dict())
    print(f"{traj.status} after {traj.steps} steps, loss {traj.final.loss:.3e}; wrote {out}")
    return 0 if traj.converged else 1


def _cmd_variational(args) -> int:
    cfg = _config_from(args)
    data, grid = cfg.data(), cfg.grid()
    act = Activation(cfg.activation_name())
    os.makedirs(cfg.outputs, exist_ok=True)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        for p in cfg.potential_strings():
            h = variational_for(parse_potential(p), act, data, cfg.init.bias_density, grid)
            stem = os.path.join(cfg.outputs, "variational_" + p.replace(":", "_")
                                .replace(",", "_").replace("=", ""))
            h.write(stem, grid)
            print(f"{p}: objective {h.info.get('objective', float('nan')):.6g}, "
                  f"constraint residual {h.info.get('constraint_residual', float('nan')):.2e}"
                  f" -> {stem}.csv")
    for w in {str(c.message) for c in caught}:
        print(f"warning: {w}", file=sys.stderr)
    return 0


def _load_run(run_dir):
    with open(os.path.join(run_dir, "meta.json")) as fh:
        meta = json.load(fh)
    traj = read_trajectory(os.path.join(run_dir, "trajectory.csv"), meta["n"], meta["d"],
                           meta["activation"])
    return meta, traj


def _load_solution(path):
    stem = path[:-4] if path.endswith(".csv") else path
    with open(stem + ".json") as fh:
        meta = json.load(fh)
    rows = np.loadtxt(stem + ".csv", delimiter=",", skiprows=1, ndmin=2)
    g = meta["grid"]
    grid = Grid(g["lo"], g["hi"], g["N"])
    return DiscreteFunction(rows[:, 1], meta["slope_neg"], meta["slope_pos"]), grid


def _cmd_compare(args) -> int:
    meta, traj = _load_run(args.run)
    h, grid = _load_solution(args.solution)
    err = linf_error(traj.params(), h, grid)
    print(json.dumps({"linf_error": err, "converged": meta["status"] == "Converged",
                      "steps": meta["steps"]}))
    return 0


def _cmd_diagnose(args) -> int:
    meta, traj = _load_run(args.run)
    cfg = ExperimentConfig.from_dict(meta["config"])
    pot = parse_potential(meta["potential"])
    rep = drift_report(traj, pot, cfg.data())
    out = args.out or args.run
    os.makedirs(out, exist_ok=True)
    rep.write_json(os.path.join(out, "kernel_report.json"))
    rep.write_lambda_csv(os.path.join(out, "lambda_min.csv"))
    print(json.dumps({"param_drift_sup": rep.param_drift_sup,
                      "kernel_drift_spectral": rep.kernel_drift_spectral,
                      "lambda_min_H0": rep.lambda_min_series[0][1],
                      "lambda_min_final": rep.lambda_min_series[-1][1]}))
    return 0


def _cmd_pca(args) -> int:
    _, traj = _load_run(args.run)
    scores = pca2([s.theta for s in traj.snapshots])
    out = args.out or args.run
    os.makedirs(out, exist_ok=True)
    path = os.path.join(out, "pca.csv")
    with open(path, "w") as fh:
        fh.write("step,pc1,pc2\n")
        for s, (a, b) in zip(traj.snapshots, scores):
            fh.write(f"{s.step},{a:.17g},{b:.17g}\n")
    rows = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    svgplot.scatter_chart(os.path.join(out, "pca.svg"),
                          [svgplot.Series("trajectory", rows[:, 1], rows[:, 2])],
                          title="parameter trajectory (PCA)", xlabel="PC 1", ylabel="PC 2")
    print(f"wrote {path}")
    return 0


def _cmd_potentials(args) -> int:
    xs = np.array(args.at, dtype=float)
    print("potential strings (prefix 'scaled:' for width-scaled deployment):")
    for s, formula in EXAMPLE_POTENTIALS:
        print(f"  {s:34s} {formula}")
    print()
    print(f"{'potential':28s} {'x':>8s} {'phi':>12s} {'phi_1':>12s} {'phi_2':>12s}")
    for s, _ in EXAMPLE_POTENTIALS[:-1]:
        pot = parse_potential(s)
        for x, v, g, h in zip(xs, phi_eval(pot, xs), phi_grad(pot, xs), phi_hess(pot, xs)):
            print(f"{s:28s} {x:8.3g} {v:12.6g} {g:12.6g} {h:12.6g}")
    return 0


COMMANDS = {"run": _cmd_run, "train": _cmd_train, "variational": _cmd_variational,
            "compare": _cmd_compare, "diagnose": _cmd_diagnose, "pca": _cmd_pca,
            "potentials": _cmd_potentials}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except (ConfigError, ValueError, FileNotFoundError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
