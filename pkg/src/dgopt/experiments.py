"""Experiment drivers behind the command line: denoising, inpainting,
resolution scaling, ordering comparison and solver comparison.

Configuration is plain ``key = value`` text; every key maps onto a field of
:class:`ExperimentConfig`.
"""

import csv
import dataclasses
import math
import os
import time
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .baselines import ArmijoParams, gradient_descent_run, heavy_ball_run
from .core import (AdaptConfig, SolverConfig, dg_adapt_run, dg_run,
                   tv_inpainting_rate)
from .imaging import (ImageGrid, corrupt, load_image, load_mask, make_mask,
                      phantom, psnr, save_image, ssim)
from .objectives import Fidelity, ImagingObjective, Regularizer
from .parallel import ParallelPlan, dg_parallel_run
from .partition import build_partition
from .scalar_solve import RootConfig

__all__ = ["ExperimentConfig", "ConfigError", "PRESETS", "parse_config",
           "load_config", "build_objective", "run_denoise", "run_inpaint",
           "run_scaling", "run_orderings", "run_compare", "relative_optimality",
           "fit_rate", "COMMANDS"]


class ConfigError(ValueError):
    pass


@dataclass
class ExperimentConfig:
    command: str = "denoise"
    input: Optional[str] = None
    size: int = 64
    output: Optional[str] = None
    trace: Optional[str] = None
    results: Optional[str] = None
    seed: int = 0
    workers: int = 1
    # corruption / mask
    noise: str = "gaussian"
    sigma: float = 0.2
    fraction: float = 0.25
    mask: str = "random_loss"
    mask_file: Optional[str] = None
    loss: float = 0.95
    # energy
    regularizer: str = "elastica"
    a: float = 0.9
    b: float = 0.9
    eps: float = 1e-4
    fidelity: str = "l2sq"
    fidelity_eps: float = 1e-12
    spacing: str = "unit"
    area_weighted: bool = False
    # solver
    solver: str = "dg"
    tau: float = 0.01
    tol: float = 1e-6
    max_sweeps: int = 500
    ordering: str = "natural"
    grad_every: int = 0
    c1: float = 0.7
    c2: float = 0.9
    rho: float = 0.99
    lam: float = 1.005
    blocks_x: int = 4
    blocks_y: int = 1
    root_tol: float = 1e-10
    init: str = "data"
    init_file: Optional[str] = None
    # scaling / orderings
    resolutions: str = "5,6,7"
    sweeps_base: int = 600
    reference_sweeps: int = 20000
    s0: float = 1.0
    momentum: float = 0.9

    def validate(self):
        choices = {
            "command": COMMANDS, "noise": ("gaussian", "impulse", "none"),
            "mask": ("random_loss", "center_square", "file"),
            "regularizer": ("elastica", "tv_eps", "tv_nonsmooth", "none"),
            "fidelity": ("l2sq", "l1", "l1_smoothed", "none"),
            "spacing": ("unit", "grid"),
            "solver": ("dg", "dg-adapt", "dg-parallel", "gd", "heavy-ball"),
            "ordering": ("natural", "red_black", "random", "block"),
            "init": ("data", "random", "unicolor", "file"),
        }
        for key, allowed in choices.items():
            if getattr(self, key) not in allowed:
                raise ConfigError(f"{key} must be one of {', '.join(allowed)}")
        for key in ("input", "mask_file", "init_file"):
            path = getattr(self, key)
            if path is not None and not os.path.exists(path):
                raise ConfigError(f"{key}: no such file {path}")
        if self.mask == "file" and self.mask_file is None and \
                self.command == "inpaint":
            raise ConfigError("mask = file needs mask_file")
        if self.init == "file" and self.init_file is None:
            raise ConfigError("init = file needs init_file")
        for key in ("tau", "tol", "size", "max_sweeps", "workers", "eps"):
            if not getattr(self, key) > 0:
                raise ConfigError(f"{key} must be positive")
        if self.sigma < 0 or not 0 <= self.fraction <= 1:
            raise ConfigError("noise parameters out of range")
        if not 0 <= self.loss < 1:
            raise ConfigError("loss must lie in [0, 1)")
        try:
            self.levels()
            self.adapt()
            self.armijo()
        except ValueError as e:
            raise ConfigError(str(e)) from None
        return self

    def levels(self):
        return [int(s) for s in self.resolutions.replace(" ", "").split(",") if s]

    def adapt(self):
        return AdaptConfig(self.c1, self.c2, self.rho, self.lam)

    def armijo(self):
        return ArmijoParams(s0=self.s0, momentum=self.momentum)

    def solver_config(self, **over):
        kw = dict(tau=self.tau, tol=self.tol, max_sweeps=self.max_sweeps,
                  ordering=self.ordering, seed=self.seed,
                  adapt=self.adapt() if self.solver == "dg-adapt" else None,
                  root=RootConfig(abs_tol=self.root_tol),
                  grad_every=self.grad_every,
                  blocks=(self.blocks_x, self.blocks_y))
        kw.update(over)
        return SolverConfig(**kw)


COMMANDS = ("denoise", "inpaint", "scaling", "orderings", "compare")

PRESETS = {
    "denoise-gauss": dict(command="denoise", noise="gaussian", sigma=0.2,
                          regularizer="elastica", a=0.9, b=0.9, eps=1e-4,
                          fidelity="l2sq", tau=0.01),
    "denoise-impulse": dict(command="denoise", noise="impulse", fraction=0.25,
                            regularizer="tv_eps", a=0.8, b=0.0, eps=1e-4,
                            fidelity="l1", tau=0.01),
    "inpaint-random": dict(command="inpaint", noise="none", mask="random_loss",
                           loss=0.95, regularizer="elastica", a=1e-6, b=1e-5,
                           eps=1e-4, fidelity="l2sq", tau=10.0, max_sweeps=500,
                           init="unicolor"),
    "scaling": dict(command="scaling", regularizer="tv_eps", a=1 / 16, b=0.0,
                    eps=0.1, fidelity="l2sq", spacing="grid",
                    area_weighted=True, resolutions="5,6,7", sweeps_base=600),
    "orderings": dict(command="orderings", size=32, noise="gaussian",
                      sigma=0.1, regularizer="elastica", a=0.3, b=0.3,
                      eps=1e-2, fidelity="l2sq", tau=0.01, max_sweeps=500,
                      tol=1e-300, reference_sweeps=1500),
    "compare": dict(command="compare", noise="gaussian", sigma=0.1,
                    regularizer="elastica", a=0.9, b=0.9, eps=1e-6,
                    fidelity="l2sq", tau=3e-3, max_sweeps=400, tol=1e-300),
}


def _convert(field, text):
    t, low = field.type, text.lower()
    try:
        if t is bool:
            if low in ("1", "true", "yes", "on"):
                return True
            if low in ("0", "false", "no", "off"):
                return False
            raise ValueError
        if t is int:
            return int(float(text)) if "e" in low else int(text)
        if t is float:
            return float(text)
    except ValueError:
        raise ConfigError(f"{field.name}: cannot read {text!r}") from None
    return None if low in ("", "none") else text


def parse_config(text, base=None):
    """Overlay ``key = value`` lines on ``base`` (a dict of field values).

    Blank lines and ``#`` comments are ignored; unknown keys are errors.
    """
    fields = {f.name: f for f in dataclasses.fields(ExperimentConfig)}
    values = dict(base or {})
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key = value")
        key, val = (s.strip() for s in line.split("=", 1))
        key = key.replace("-", "_")
        if key not in fields:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        values[key] = _convert(fields[key], val)
    return values


def load_config(path=None, preset=None, overrides=None):
    values = {}
    if preset is not None:
        if preset not in PRESETS:
            raise ConfigError(f"unknown preset {preset!r}; "
                              f"choose from {', '.join(PRESETS)}")
        values.update(PRESETS[preset])
    if path is not None:
        with open(path) as f:
            values = parse_config(f.read(), values)
    values.update({k: v for k, v in (overrides or {}).items() if v is not None})
    return ExperimentConfig(**values).validate()


# -- problem assembly -------------------------------------------------------

def _clean_image(cfg):
    if cfg.input is not None:
        return load_image(cfg.input)
    return phantom(cfg.size)


def build_objective(cfg, g, mask=None):
    reg = Regularizer(cfg.regularizer, cfg.a, cfg.b, cfg.eps)
    fid = Fidelity(cfg.fidelity, cfg.fidelity_eps)
    h = 1.0 if cfg.spacing == "unit" else None
    return ImagingObjective(g, reg, fid, mask=mask,
                            area_weighted=cfg.area_weighted, h=h)


def _initial(cfg, g, mask=None):
    g = np.asarray(getattr(g, "data", g))
    rng = np.random.default_rng(cfg.seed + 1)
    if cfg.init == "data":
        u0 = g.copy()
        if mask is not None:
            u0[~mask.known] = g[mask.known].mean()
        return u0
    if cfg.init == "random":
        return rng.random(g.shape)
    if cfg.init == "unicolor":
        known = g if mask is None else g[mask.known]
        return np.full(g.shape, float(known.mean()))
    u0 = load_image(cfg.init_file).data
    if u0.shape != g.shape:
        raise ConfigError("init_file dimensions do not match the data")
    return u0


def _solve(cfg, obj, u0, **over):
    scfg = cfg.solver_config(**over)
    if cfg.solver == "dg":
        return dg_run(obj, u0, scfg)
    if cfg.solver == "dg-adapt":
        return dg_adapt_run(obj, u0, scfg)
    if cfg.solver == "dg-parallel":
        part = build_partition(obj.shape, obj.dependency_radius(),
                               cfg.blocks_x, cfg.blocks_y)
        return dg_parallel_run(obj, u0, scfg, ParallelPlan(part, cfg.workers))
    if cfg.solver == "gd":
        return gradient_descent_run(obj, u0, cfg.armijo(), cfg.tol,
                                    cfg.max_sweeps)
    return heavy_ball_run(obj, u0, cfg.armijo(), cfg.tol, cfg.max_sweeps)


def _metrics_line(path, name, values):
    line = ",".join([f"run={name}"] + [f"{k}={v:.6g}" for k, v in values.items()])
    if path is not None:
        with open(path, "a") as f:
            f.write(line + "\n")
    return line


def _restore(cfg, mask):
    clean = _clean_image(cfg)
    if cfg.noise == "none":
        noisy = clean
    else:
        noisy = corrupt(clean, cfg.noise, seed=cfg.seed, sigma=cfg.sigma,
                        fraction=cfg.fraction)
    obj = build_objective(cfg, noisy, mask)
    u, trace = _solve(cfg, obj, _initial(cfg, noisy, mask))
    if cfg.output is not None:
        save_image(ImageGrid(u), cfg.output)
    if cfg.trace is not None:
        trace.to_csv(cfg.trace)
    metrics = {"psnr": psnr(u, clean), "ssim": ssim(u, clean),
               "sweeps": len(trace) - 1, "energy": trace.energies[-1]}
    line = _metrics_line(cfg.results, cfg.command, metrics)
    return {"u": u, "trace": trace, "metrics": metrics, "line": line,
            "clean": clean, "data": noisy}


def run_denoise(cfg):
    """Corrupt (or load) an image, restore it and report PSNR/SSIM."""
    return _restore(cfg, None)


def run_inpaint(cfg):
    """Remove pixels under a mask, fill them in and report PSNR/SSIM."""
    shape = _clean_image(cfg).shape
    if cfg.mask == "file":
        mask = load_mask(cfg.mask_file)
        if mask.shape != shape:
            raise ConfigError("mask dimensions do not match the image")
    else:
        mask = make_mask(shape, cfg.mask, fraction=cfg.loss, seed=cfg.seed)
    return _restore(cfg, mask)


# -- convergence studies ----------------------------------------------------

def relative_optimality(energies, v_star):
    e = np.asarray(energies, dtype=float)
    return (e - v_star) / (e[0] - v_star)


def fit_rate(errors, start=0.5, floor=1e-12):
    """Exponential fit over the tail: returns ``(rate, ok)`` with
    ``errors[k] ~ C exp(-rate k)``.

    The tail is the last ``1 - start`` fraction of the samples, cut off
    where errors drop below ``floor``.  ``ok`` is False when the tail is
    too short or not monotonically decreasing.
    """
    e = np.asarray(errors, dtype=float)
    k = np.arange(len(e))
    sel = (k >= int(start * len(e))) & (e > floor)
    if sel.sum() < 3:
        return math.nan, False
    slope = np.polyfit(k[sel], np.log(e[sel]), 1)[0]
    ok = bool(np.all(np.diff(e[sel]) <= 0))
    return float(-slope), ok


def square_inpainting(m, a=1 / 16, eps=0.1):
    """Centre-square TV_eps inpainting of an all-black image at ``2^m``
    resolution, area weighted.  Returns ``(obj, u0, v_star)``.

    Starting from white, the minimiser is black everywhere, so
    ``V* = a sqrt(eps)`` exactly.
    """
    n = 2 ** m
    mask = make_mask((n, n), "center_square")
    obj = ImagingObjective(np.zeros((n, n)), Regularizer("tv_eps", a, 0.0, eps),
                           Fidelity("l2sq"), mask=mask, area_weighted=True)
    return obj, np.ones((n, n)), a * math.sqrt(eps)


def run_scaling(cfg):
    """Linear convergence rates of DG on centre-square inpainting.

    For each level ``m`` the step is the radius-optimal ``1 / ((2R+1) L)``
    and the run lasts ``sweeps_base * 4**(m - m0)`` sweeps, so every level
    covers the same stretch of the continuous flow.  Emits the CSV
    ``m,n,rate,predicted_rate``.
    """
    levels = cfg.levels()
    rows = []
    for m in levels:
        obj, u0, v_star = square_inpainting(m, cfg.a, cfg.eps)
        R = obj.dependency_radius()
        pred = tv_inpainting_rate(obj.h, cfg.a, cfg.eps, R)
        sweeps = int(cfg.sweeps_base * 4 ** (m - levels[0]))
        t0 = time.perf_counter()
        _, trace = dg_run(obj, u0, SolverConfig(tau=pred.tau, tol=1e-300,
                                                max_sweeps=sweeps, grad_every=0))
        rate, ok = fit_rate(trace.energies - v_star)
        rows.append({"m": m, "n": obj.h ** -2, "rate": rate,
                     "predicted_rate": pred.rate, "bound_rate": pred.bound_rate,
                     "fit_ok": ok, "sweeps": sweeps,
                     "seconds": time.perf_counter() - t0})
    out = cfg.output
    if out is not None:
        with open(out, "w", newline="") as f:
            w = csv.writer(f)
            w.writerow(["m", "n", "rate", "predicted_rate"])
            for r in rows:
                w.writerow([r["m"], int(r["n"]), repr(r["rate"]),
                            repr(r["predicted_rate"])])
    return {"rows": rows}


ORDERINGS = ("natural", "red_black", "random", "block")


def _problem(cfg):
    clean = _clean_image(cfg)
    data = clean if cfg.noise == "none" else corrupt(
        clean, cfg.noise, seed=cfg.seed, sigma=cfg.sigma, fraction=cfg.fraction)
    return clean, data, build_objective(cfg, data)


def run_orderings(cfg):
    """Same problem under the four visiting orders, measured against one
    shared reference energy.

    ``V*`` is the lowest energy seen by a long natural-order reference run
    or by any of the four runs.  The output CSV has one relative-optimality
    column per ordering.
    """
    _, data, obj = _problem(cfg)
    u0 = _initial(cfg, data)
    base = dict(tol=1e-300, grad_every=0)
    _, ref = dg_run(obj, u0, cfg.solver_config(max_sweeps=cfg.reference_sweeps,
                                               ordering="natural", **base))
    traces = {}
    for kind in ORDERINGS:
        _, traces[kind] = dg_run(obj, u0, cfg.solver_config(ordering=kind, **base))
    v_star = min([ref.energies.min()] + [t.energies.min() for t in traces.values()])
    rel = {k: relative_optimality(t.energies, v_star) for k, t in traces.items()}
    slopes = {k: fit_rate(r, start=0.0, floor=1e-10)[0]
              for k, r in rel.items()}
    if cfg.output is not None:
        with open(cfg.output, "w", newline="") as f:
            w = csv.writer(f)
            w.writerow(["sweep"] + list(ORDERINGS))
            for s in range(max(len(r) for r in rel.values())):
                w.writerow([s] + [repr(float(rel[k][s])) if s < len(rel[k]) else ""
                                  for k in ORDERINGS])
    return {"v_star": v_star, "relative": rel, "slopes": slopes,
            "traces": traces, "reference": ref}


def run_compare(cfg):
    """DG, DG-ADAPT, gradient descent and Heavy-ball on the same problem.

    The target energy is 99% of the decrease achieved by the longest DG
    run; each solver reports the iteration at which it first got there.
    """
    clean, data, obj = _problem(cfg)
    u0 = _initial(cfg, data)
    runs = {}
    t0 = time.perf_counter()
    runs["dg"] = dg_run(obj, u0, cfg.solver_config(adapt=None, grad_every=0))
    runs["dg"][1].meta["seconds"] = time.perf_counter() - t0
    t0 = time.perf_counter()
    runs["dg-adapt"] = dg_adapt_run(obj, u0, cfg.solver_config(adapt=cfg.adapt()))
    runs["dg-adapt"][1].meta["seconds"] = time.perf_counter() - t0
    v0 = runs["dg"][1].energies[0]
    v_bar = min(t.energies.min() for _, t in runs.values())
    target = v_bar + 0.01 * (v0 - v_bar)
    for name, fn in (("gd", gradient_descent_run), ("heavy-ball", heavy_ball_run)):
        t0 = time.perf_counter()
        runs[name] = fn(obj, u0, cfg.armijo(), 1e-300, 10 * cfg.max_sweeps,
                        target=target)
        runs[name][1].meta["seconds"] = time.perf_counter() - t0
    rows = []
    for name, (u, tr) in runs.items():
        hit = np.flatnonzero(tr.energies <= target)
        rows.append({"solver": name,
                     "iterations": int(hit[0]) if len(hit) else None,
                     "final_energy": float(tr.energies[-1]),
                     "seconds": tr.meta["seconds"], "psnr": psnr(u, clean)})
    if cfg.output is not None:
        with open(cfg.output, "w", newline="") as f:
            w = csv.DictWriter(f, ["solver", "iterations", "final_energy",
                                   "seconds", "psnr"])
            w.writeheader()
            for r in rows:
                w.writerow({k: ("" if v is None else v) for k, v in r.items()})
    return {"target": target, "rows": rows, "runs": runs}

