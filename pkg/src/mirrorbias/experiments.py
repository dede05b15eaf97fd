"""
Width sweeps comparing trained networks with variational solutions.

A sweep trains one network per ``(width, potential, seed)`` cell, measures the
sup-norm distance of the learned function from the matching variational
solution, records lazy-training diagnostics and writes a JSON report, CSV
tables and SVG views of those tables.

Initial parameters depend on ``(seed, width)`` only, so every potential in a
cell row starts from the same network.
"""

from __future__ import annotations

import csv
import itertools
import json
import os
import time
import traceback
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import svgplot
from .densities import BiasDensity
from .kernel_diag import analytic_kernel, drift_report
from .linalg import jacobi_eigh
from .mirror_flow import TrainConfig, default_eta0, train
from .potentials import Potential, parse_potential
from .shallow_net import Activation, Dataset, InitSpec, NetParams, init_params, predict
from .variational import (DiscreteFunction, Grid, VariationalMode, VariationalSpec,
                          second_diff, solve)

__all__ = [
    "PRESETS",
    "ExperimentConfig",
    "ComparisonReport",
    "ConfigError",
    "cell_seed",
    "linf_error",
    "pca2",
    "variational_for",
    "run_experiment",
]

PRESETS = {
    "fig1": {"xs": [-1.0, -0.2, 0.0, 0.2, 1.0], "ys": [-0.15, -0.15, 0.15, -0.15, -0.15],
             "activation": "relu",
             "potentials": ["quadratic", "pow:p=3,omega=1", "pow:p=4,omega=1"]},
    "fig2": {"xs": [-1.0, 0.35, 0.65, 1.0], "ys": [0.15, 0.15, -0.15, 0.15],
             "activation": "abs",
             "potentials": ["scaled:quadratic", "scaled:pow:p=3,omega=1",
                            "scaled:pow:p=4,omega=1"]},
}

# N = 600 puts every preset abscissa and the support edges +-1 on a node
DEFAULT_GRID = {"lo": -1.5, "hi": 1.5, "N": 600}

_TOP_KEYS = {"dataset", "activation", "widths", "potentials", "init", "train",
             "variational", "seeds", "outputs", "workers", "diagnose", "save_trajectories"}


class ConfigError(ValueError):
    pass


def _require(cond, msg):
    if not cond:
        raise ConfigError(msg)


@dataclass
class ExperimentConfig:
    """A sweep over widths, potentials and seeds.

    ``train.eta0 = None`` selects :func:`default_eta0` per potential.
    """

    dataset: object = "fig1"
    widths: list = field(default_factory=lambda: [30, 270, 2430])
    potentials: list | None = None
    activation: str | None = None
    init: InitSpec = field(default_factory=InitSpec)
    train: dict = field(default_factory=dict)
    variational: dict = field(default_factory=lambda: {"grid": dict(DEFAULT_GRID)})
    seeds: list = field(default_factory=lambda: [0, 1, 2, 3, 4])
    outputs: str = "runs"
    workers: int = 1
    diagnose: bool = True
    save_trajectories: bool = False

    def __post_init__(self):
        self.validate()

    # -- validation -------------------------------------------------------

    def validate(self):
        ds = self.dataset
        if isinstance(ds, str):
            _require(ds in PRESETS, f"unknown dataset preset {ds!r}; choose one of {sorted(PRESETS)}")
        else:
            _require(isinstance(ds, dict) and set(ds) == {"xs", "ys"},
                     'inline dataset must be {"xs": [...], "ys": [...]}')
            _require(len(ds["xs"]) == len(ds["ys"]) and len(ds["xs"]) > 0,
                     "dataset xs and ys must be non-empty and of equal length")
        _require(isinstance(self.widths, list) and len(self.widths) > 0,
                 "widths must be a non-empty list")
        for w in self.widths:
            _require(isinstance(w, int) and not isinstance(w, bool) and w >= 1,
                     f"widths must be integers >= 1, got {w!r}")
        _require(isinstance(self.seeds, list) and len(self.seeds) > 0,
                 "seeds must be a non-empty list")
        for s in self.seeds:
            _require(isinstance(s, int) and not isinstance(s, bool) and s >= 0,
                     f"seeds must be non-negative integers, got {s!r}")
        pots = self.potential_strings()
        _require(len(pots) > 0, "potentials must be a non-empty list")
        for p in pots:
            try:
                parse_potential(p)
            except ValueError as exc:
                raise ConfigError(f"bad potential {p!r}: {exc}") from None
        try:
            Activation(self.activation_name())
        except ValueError:
            raise ConfigError(f"activation must be 'relu' or 'abs', got {self.activation!r}") from None
        extra = set(self.train) - {"eta0", "max_steps", "loss_threshold", "step_mode",
                                   "scope", "record_stride"}
        _require(not extra, f"unexpected train fields {sorted(extra)}")
        try:
            self.train_config(parse_potential(pots[0]))
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"bad train section: {exc}") from None
        extra = set(self.variational) - {"grid"}
        _require(not extra, f"unexpected variational fields {sorted(extra)}")
        try:
            self.grid()
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"bad variational grid: {exc}") from None
        _require(isinstance(self.workers, int) and self.workers >= 1, "workers must be >= 1")
        x = self.data().xs[:, 0]
        B = self.init.bias_density.B
        _require(np.all(np.abs(x) <= B), f"data must lie inside the bias support [-{B}, {B}]")

    # -- derived objects --------------------------------------------------

    def _preset(self):
        return PRESETS[self.dataset] if isinstance(self.dataset, str) else {}

    def data(self) -> Dataset:
        src = self._preset() or self.dataset
        return Dataset(np.array(src["xs"], dtype=float), np.array(src["ys"], dtype=float))

    def activation_name(self) -> str:
        return self.activation or self._preset().get("activation", "relu")

    def potential_strings(self) -> list:
        if self.potentials is not None:
            _require(isinstance(self.potentials, list), "potentials must be a list of strings")
            return [str(p) for p in self.potentials]
        return list(self._preset().get("potentials", ["quadratic"]))

    def grid(self) -> Grid:
        g = dict(DEFAULT_GRID)
        g.update(self.variational.get("grid", {}))
        extra = set(g) - {"lo", "hi", "N"}
        if extra:
            raise ValueError(f"unexpected grid fields {sorted(extra)}")
        return Grid(float(g["lo"]), float(g["hi"]), int(g["N"]))

    def train_config(self, pot: Potential) -> TrainConfig:
        d = dict(self.train)
        if d.get("eta0") is None:
            d["eta0"] = default_eta0(pot)
        return TrainConfig.from_dict(d)

    # -- serialization ----------------------------------------------------

    def to_dict(self) -> dict:
        return {"dataset": self.dataset, "activation": self.activation_name(),
                "widths": list(self.widths), "potentials": self.potential_strings(),
                "init": self.init.to_dict(), "train": dict(self.train),
                "variational": {"grid": self.grid().to_dict()}, "seeds": list(self.seeds),
                "outputs": self.outputs, "workers": self.workers,
                "diagnose": self.diagnose, "save_trajectories": self.save_trajectories}

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        _require(isinstance(d, dict), "config must be a JSON object")
        extra = set(d) - _TOP_KEYS
        _require(not extra, f"unexpected config fields {sorted(extra)}; "
                            f"allowed: {sorted(_TOP_KEYS)}")
        kw = dict(d)
        if "init" in kw:
            try:
                kw["init"] = InitSpec.from_dict(kw["init"])
            except (TypeError, ValueError) as exc:
                raise ConfigError(f"bad init section: {exc}") from None
        for key in ("train", "variational"):
            if key in kw:
                _require(isinstance(kw[key], dict), f"{key} must be a JSON object")
        return cls(**kw)

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        with open(path) as fh:
            try:
                d = json.load(fh)
            except json.JSONDecodeError as exc:
                raise ConfigError(f"{path}: invalid JSON ({exc})") from None
        return cls.from_dict(d)


# ---------------------------------------------------------------------------
# measurements
# ---------------------------------------------------------------------------


def cell_seed(seed: int, width: int) -> int:
    """Initialization seed for a sweep cell, a function of ``(seed, width)``."""
    return int(np.random.SeedSequence([seed, width]).generate_state(1, dtype=np.uint64)[0])


def linf_error(net: NetParams, h: DiscreteFunction, grid: Grid) -> float:
    """``max_i |f(t_i) - f_init(t_i) - h_i|`` over the grid nodes."""
    if net.d != 1:
        raise ValueError("linf_error is defined for univariate networks")
    t = grid.t
    diff = predict(net, t) - predict(net.initial(), t)
    return float(np.max(np.abs(diff - h.h)))


def pca2(snapshots) -> np.ndarray:
    """Two-dimensional PCA scores of a sequence of parameter vectors.

    Uses the ``T x T`` Gram matrix of the centred snapshots. Each principal
    direction is signed so that its first nonzero loading is positive;
    directions with numerically zero variance give zero scores.
    """
    X = np.asarray(snapshots, dtype=float)
    if X.ndim != 2 or X.shape[0] < 3:
        raise ValueError("pca2 needs at least 3 snapshots")
    Xc = X - X.mean(axis=0)
    K = Xc @ Xc.T
    K = 0.5 * (K + K.T)
    w, U = jacobi_eigh(K)
    order = np.argsort(-w, kind="stable")[:2]
    top = max(float(w[order[0]]), 0.0)
    scores = np.zeros((X.shape[0], 2))
    for j, k in enumerate(order):
        lam = float(w[k])
        if lam <= 1e-12 * X.shape[0] * top or lam <= 0.0:
            continue
        loading = Xc.T @ U[:, k]
        loading /= np.linalg.norm(loading)
        nz = np.flatnonzero(np.abs(loading) > 1e-12 * np.max(np.abs(loading)))
        if nz.size and loading[nz[0]] < 0:
            loading = -loading
        # projecting rows keeps identical snapshots bitwise identical
        scores[:, j] = np.sum(Xc * loading, axis=1)
    return scores


def variational_for(pot: Potential, activation: Activation, data: Dataset,
                    density: BiasDensity, grid: Grid, init_outputs=None) -> DiscreteFunction:
    """Solve the variational problem matching a training setup.

    Unscaled potentials with ReLU networks give the curvature-plus-boundary
    problem. Scaled potentials with absolute-value networks give the Bregman
    problem. For unscaled training of absolute-value networks the limit does
    not depend on the potential, so the quadratic Bregman problem is used.
    """
    activation = Activation(activation)
    if not pot.scaled:
        if activation is Activation.RELU:
            spec = VariationalSpec(data, density, grid, VariationalMode.UNSCALED_RELU,
                                   init_outputs=init_outputs)
        else:
            spec = VariationalSpec(data, density, grid, VariationalMode.SCALED_ABS,
                                   Potential.quadratic(True), init_outputs)
    else:
        if activation is not Activation.ABS:
            raise ConfigError("scaled potentials are characterized for absolute-value "
                              "networks only; use activation 'abs'")
        spec = VariationalSpec(data, density, grid, VariationalMode.SCALED_ABS, pot, init_outputs)
    return solve(spec)


def _variational_key(pot: Potential, activation: Activation, init_outputs) -> tuple:
    base = ("scaled", str(pot)) if pot.scaled else ("unscaled", Activation(activation).value)
    io = None if init_outputs is None else tuple(np.round(np.asarray(init_outputs), 17).tolist())
    return base + (io,)


# ---------------------------------------------------------------------------
# sweep cells
# ---------------------------------------------------------------------------


def _run_cell(task):
    """Train and measure one cell; never raises."""
    cfg_d, width, pidx, seed = task
    cfg = ExperimentConfig.from_dict(cfg_d)
    pot_s = cfg.potential_strings()[pidx]
    out = {"width": width, "potential": pot_s, "seed": seed}
    t0 = time.perf_counter()
    try:
        pot = parse_potential(pot_s)
        data = cfg.data()
        grid = cfg.grid()
        act = Activation(cfg.activation_name())
        init = InitSpec(cfg.init.bias_density, cfg.init.a_scale, cfg.init.d_init,
                        cell_seed(seed, width))
        params = init_params(width, data.dim, init, act)
        traj = train(params, data, pot, cfg.train_config(pot))
        net = traj.params()
        f0 = predict(net.initial(), data.xs)
        init_outputs = None if not np.any(f0) else f0
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            h = variational_for(pot, act, data, cfg.init.bias_density, grid, init_outputs)
        out.update(status=traj.status, converged=traj.converged, steps=traj.steps,
                   final_loss=traj.final.loss,
                   linf_error=linf_error(net, h, grid) if data.dim == 1 else None,
                   init_outputs_nonzero=init_outputs is not None)
        out["preds"] = (predict(net, grid.t) - predict(net.initial(), grid.t)).tolist()
        if cfg.diagnose:
            rep = drift_report(traj, pot, data)
            out.update(param_drift_sup=rep.param_drift_sup,
                       kernel_drift_spectral=rep.kernel_drift_spectral,
                       lambda_min_H0=rep.lambda_min_series[0][1],
                       lambda_min_final=rep.lambda_min_series[-1][1],
                       lambda_min_series=[[int(s), float(v)] for s, v in rep.lambda_min_series])
            snaps = [s.theta for s in traj.snapshots]
            if len(snaps) >= 3:
                sc = pca2(snaps)
                out["pca"] = [[int(s.step), float(a), float(b)]
                              for s, (a, b) in zip(traj.snapshots, sc)]
        if cfg.save_trajectories:
            out["trajectory"] = [[s.step, s.loss] + s.theta.tolist() for s in traj.snapshots]
        out["ok"] = bool(traj.converged)
        if not traj.converged:
            out["error"] = f"loss {traj.final.loss:.3e} above threshold after {traj.steps} steps"
    except Exception as exc:  # recorded per cell, the sweep continues
        out.update(ok=False, status="Failed", converged=False,
                   error=f"{type(exc).__name__}: {exc}",
                   traceback=traceback.format_exc(limit=5))
    out["seconds"] = time.perf_counter() - t0
    return out


@dataclass
class ComparisonReport:
    """Sweep results; ``timestamps`` holds everything that varies between reruns."""

    config: dict
    cells: list
    variational: dict
    pairwise: list
    summary: dict
    kernel: dict = field(default_factory=dict)
    timestamps: dict = field(default_factory=dict)

    @property
    def all_ok(self) -> bool:
        return all(c.get("ok", False) for c in self.cells)

    def cell(self, width, potential, seed) -> dict:
        for c in self.cells:
            if (c["width"], c["potential"], c["seed"]) == (width, potential, seed):
                return c
        raise KeyError((width, potential, seed))

    def to_dict(self) -> dict:
        strip = ("preds", "pca", "lambda_min_series", "trajectory", "seconds", "traceback")
        cells = [{k: v for k, v in c.items() if k not in strip} for c in self.cells]
        return {"config": self.config, "cells": cells, "variational": self.variational,
                "pairwise": self.pairwise, "summary": self.summary, "kernel": self.kernel,
                "timestamps": self.timestamps}

    def write_json(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=2, sort_keys=True)


def _pairwise(cells, pots, widths, seeds):
    rows = []
    for w, s in itertools.product(widths, seeds):
        by_pot = {c["potential"]: c for c in cells
                  if c["width"] == w and c["seed"] == s and "preds" in c}
        for a, b in itertools.combinations(pots, 2):
            if a in by_pot and b in by_pot:
                d = np.max(np.abs(np.array(by_pot[a]["preds"]) - np.array(by_pot[b]["preds"])))
                rows.append({"width": w, "seed": s, "a": a, "b": b, "linf": float(d)})
    return rows


def _mean(values):
    vals = [v for v in values if v is not None]
    return float(np.mean(vals)) if vals else None


def _summary(cells, pairwise, pots, widths, seeds):
    per = {}
    for p in pots:
        per[p] = {}
        for w in widths:
            cs = [c for c in cells if c["potential"] == p and c["width"] == w]
            per[p][str(w)] = {
                "mean_linf_error": _mean([c.get("linf_error") for c in cs]),
                "mean_param_drift": _mean([c.get("param_drift_sup") for c in cs]),
                "mean_kernel_drift": _mean([c.get("kernel_drift_spectral") for c in cs]),
                "converged": sum(bool(c.get("converged")) for c in cs),
                "cells": len(cs),
            }
        errs = {s: [next((c.get("linf_error") for c in cells if c["potential"] == p
                          and c["width"] == w and c["seed"] == s), None) for w in widths]
                for s in seeds}
        per[p]["monotone_seeds"] = sum(
            all(e is not None for e in v) and all(x > y for x, y in zip(v, v[1:]))
            for v in errs.values())
    pw = {}
    for w in widths:
        rows = [r for r in pairwise if r["width"] == w]
        pw[str(w)] = {f'{r["a"]}|{r["b"]}': _mean([q["linf"] for q in rows
                                                 if q["a"] == r["a"] and q["b"] == r["b"]])
                      for r in rows}
    return {"per_potential": per, "mean_pairwise_linf": pw}


# ---------------------------------------------------------------------------
# artifacts
# ---------------------------------------------------------------------------


def _write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for r in rows:
            w.writerow([f"{v:.17g}" if isinstance(v, float) else v for v in r])


def _read_csv(path):
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    return rows[0], rows[1:]


def _col(rows, k):
    return np.array([float(r[k]) if r[k] not in ("", "None") else np.nan for r in rows])


def _slug(s: str) -> str:
    return s.replace(":", "_").replace(",", "_").replace("=", "")


def _write_artifacts(rep: ComparisonReport, cfg: ExperimentConfig, sols: dict, out: str):
    grid = cfg.grid()
    t = grid.t
    pots = cfg.potential_strings()
    widths, seeds = cfg.widths, cfg.seeds

    # variational solutions and trained functions
    for p, h in sols.items():
        h.write(os.path.join(out, f"variational_{_slug(p)}"), grid)
    data = cfg.data()
    _write_csv(os.path.join(out, "data.csv"), ["x", "y"],
               [[float(a), float(b)] for a, b in zip(data.xs[:, 0], data.ys)])
    for w, s in itertools.product(widths, seeds):
        cols, header = [t], ["t"]
        for p in pots:
            if p in sols:
                cols.append(sols[p].h)
                header.append(f"h[{p}]")
        for p in pots:
            c = rep.cell(w, p, s)
            if "preds" in c:
                cols.append(np.array(c["preds"]))
                header.append(f"f[{p}]")
        path = os.path.join(out, f"functions_n{w}_s{s}.csv")
        _write_csv(path, header, [[float(v) for v in row] for row in zip(*cols)])
        if s == seeds[0] and data.dim == 1:
            hdr, rows = _read_csv(path)
            series = [svgplot.Series(name, _col(rows, 0), _col(rows, k), dashed=name.startswith("h["))
                      for k, name in enumerate(hdr) if k > 0]
            _, drows = _read_csv(os.path.join(out, "data.csv"))
            series.append(svgplot.Series("data", _col(drows, 0), _col(drows, 1), markers=True))
            svgplot.line_chart(os.path.join(out, f"functions_n{w}_s{s}.svg"), series,
                               title=f"trained vs variational, n={w}, seed={s}",
                               xlabel="x", ylabel="f(x) - f_init(x)")

    # per-cell table
    header = ["width", "potential", "seed", "status", "steps", "final_loss", "linf_error",
              "param_drift_sup", "kernel_drift_spectral", "lambda_min_H0", "lambda_min_final"]
    rows = [[c["width"], c["potential"], c["seed"], c.get("status"), c.get("steps"),
             c.get("final_loss"), c.get("linf_error"), c.get("param_drift_sup"),
             c.get("kernel_drift_spectral"), c.get("lambda_min_H0"), c.get("lambda_min_final")]
            for c in rep.cells]
    _write_csv(os.path.join(out, "cells.csv"), header, rows)

    # width summaries and their plots
    srows = []
    for p in pots:
        for w in widths:
            e = rep.summary["per_potential"][p][str(w)]
            srows.append([p, w, e["mean_linf_error"], e["mean_param_drift"], e["mean_kernel_drift"]])
    spath = os.path.join(out, "summary.csv")
    _write_csv(spath, ["potential", "width", "mean_linf_error", "mean_param_drift",
                       "mean_kernel_drift"], srows)
    hdr, rows = _read_csv(spath)
    for k, name, fname in ((2, "L-inf error", "error_vs_width.svg"),
                           (3, "parameter drift (sup)", "drift_vs_width.svg"),
                           (4, "kernel drift (spectral)", "kernel_drift_vs_width.svg")):
        series = []
        for p in pots:
            rr = [r for r in rows if r[0] == p]
            series.append(svgplot.Series(p, _col(rr, 1), _col(rr, k), markers=True))
        if any(np.isfinite(s.y).any() for s in series):
            svgplot.line_chart(os.path.join(out, fname), series, title=f"{name} vs width",
                               xlabel="width n", ylabel=name, logx=True, logy=True)

    # lambda_min series and PCA trajectories
    for c in rep.cells:
        stem = f"n{c['width']}_{_slug(c['potential'])}_s{c['seed']}"
        if "lambda_min_series" in c:
            _write_csv(os.path.join(out, f"lambda_{stem}.csv"), ["step", "lambda_min"],
                       c["lambda_min_series"])
        if "pca" in c:
            _write_csv(os.path.join(out, f"pca_{stem}.csv"), ["step", "pc1", "pc2"], c["pca"])
        if "trajectory" in c:
            p = len(c["trajectory"][0]) - 2
            _write_csv(os.path.join(out, f"trajectory_{stem}.csv"),
                       ["step", "loss"] + [f"theta_{k}" for k in range(p)], c["trajectory"])
    for w in widths:
        series = []
        for p in pots:
            path = os.path.join(out, f"pca_n{w}_{_slug(p)}_s{seeds[0]}.csv")
            if os.path.exists(path):
                _, rows = _read_csv(path)
                series.append(svgplot.Series(p, _col(rows, 1), _col(rows, 2)))
        if series:
            svgplot.scatter_chart(os.path.join(out, f"pca_n{w}_s{seeds[0]}.svg"), series,
                                  title=f"parameter trajectories (PCA), n={w}",
                                  xlabel="PC 1", ylabel="PC 2")


# ---------------------------------------------------------------------------
# driver
# ---------------------------------------------------------------------------


def run_experiment(cfg: ExperimentConfig, out: str | None = None,
                   workers: int | None = None, write: bool = True) -> ComparisonReport:
    """Run every cell of the sweep and write the report and artifacts.

    Cell failures (exceptions, unconverged runs) are recorded in the report
    and do not stop the sweep.
    """
    cfg.validate()
    started = time.strftime("%Y-%m-%dT%H:%M:%S%z")
    out = out or cfg.outputs
    workers = workers or cfg.workers
    pots = cfg.potential_strings()
    cfg_d = cfg.to_dict()
    tasks = [(cfg_d, w, k, s) for w in cfg.widths for k in range(len(pots)) for s in cfg.seeds]
    if workers > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            cells = list(ex.map(_run_cell, tasks))
    else:
        cells = [_run_cell(t) for t in tasks]

    data = cfg.data()
    grid = cfg.grid()
    act = Activation(cfg.activation_name())
    dens = cfg.init.bias_density
    sols, var = {}, {}
    for p in pots:
        try:
            pot = parse_potential(p)
            with warnings.catch_warnings():
                warnings.simplefilter("ignore")
                h = variational_for(pot, act, data, dens, grid)
            sols[p] = h
            var[p] = {"max_abs_h2": float(np.max(np.abs(second_diff(h, grid)))),
                      "slope_neg": h.slope_neg, "slope_pos": h.slope_pos,
                      "info": {k: float(v) for k, v in h.info.items()}}
        except Exception as exc:
            var[p] = {"error": f"{type(exc).__name__}: {exc}"}
    kernel = {}
    if data.dim == 1:
        try:
            G, lam0 = analytic_kernel(data, dens, act)
            kernel = {"G": G.tolist(), "lambda0": lam0}
        except ValueError as exc:
            kernel = {"error": str(exc)}
    pairwise = _pairwise(cells, pots, cfg.widths, cfg.seeds)
    summary = _summary(cells, pairwise, pots, cfg.widths, cfg.seeds)
    summary["all_ok"] = all(c.get("ok", False) for c in cells)
    rep = ComparisonReport(config=cfg_d, cells=cells, variational=var, pairwise=pairwise,
                           summary=summary, kernel=kernel)
    rep.timestamps = {"started": started, "finished": time.strftime("%Y-%m-%dT%H:%M:%S%z"),
                      "cell_seconds": {f'{c["width"]}|{c["potential"]}|{c["seed"]}': c["seconds"]
                                       for c in cells}}
    if write:
        os.makedirs(out, exist_ok=True)
        rep.write_json(os.path.join(out, "report.json"))
        _write_artifacts(rep, cfg, sols, out)
    return rep
