"""Command-line experiment runner.

Every subcommand writes its artifacts under ``--out`` and prints one summary
line.  Exit status: 0 when every verdict passes, 1 on a failed verdict or a
failed experiment, 2 on invalid configuration or selection.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from . import estimates as est
from .grid import (GridError, l2_norm, load_field, make_grid, random_band_limited, save_field,
                   synthesize_gaussian)
from .norms import NormConfig, SweepRow, strichartz_ratio, timed, write_sweep_csv, xp_norm
from .profiles import (BUBBLE_GRID, ExtractConfig, orthogonal_bubble_specs, profile_decompose,
                       save_decomposition, synthesize_bubbles)
from .propagator import EvolveConfig, nls_evolve

SCHEMA_VERSION = 1
TRIAL_KINDS = ("gaussian", "random", "bubbles")


class ConfigError(ValueError):
    pass


# -- configuration ----------------------------------------------------------------------

@dataclass
class TrialSpec:
    kind: str = "gaussian"
    count: int = 1
    seed: Optional[int] = 0
    band: Tuple[float, float] = (0.0, 3.0)
    envelope: Optional[float] = None


@dataclass
class ExperimentConfig:
    grid: Tuple[int, int, float, float] = (256, 256, 40.0, 40.0)
    norm: NormConfig = field(default_factory=NormConfig)
    trials: TrialSpec = field(default_factory=TrialSpec)
    estimates: List[str] = field(default_factory=list)
    output: str = "hnlslab-out"
    tolerances: Dict[str, float] = field(default_factory=dict)
    workers: int = 1
    seed: int = 0

    def to_dict(self) -> dict:
        d = asdict(self)
        d["schema_version"] = SCHEMA_VERSION
        return d


_TOP_KEYS = {"schema_version", "grid", "norm", "trials", "estimates", "output", "tolerances",
             "workers", "seed"}


def parse_config(raw: dict) -> ExperimentConfig:
    """Validate a decoded JSON document; raises :class:`ConfigError`."""
    if not isinstance(raw, dict):
        raise ConfigError("config must be a JSON object")
    if raw.get("schema_version") != SCHEMA_VERSION:
        raise ConfigError(f"schema_version must be {SCHEMA_VERSION}, got {raw.get('schema_version')!r}")
    unknown = set(raw) - _TOP_KEYS
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    cfg = ExperimentConfig()
    try:
        if "grid" in raw:
            g = raw["grid"]
            cfg.grid = (int(g["nx"]), int(g["ny"]), float(g["lx"]), float(g["ly"]))
            make_grid(*cfg.grid)
        if "norm" in raw:
            cfg.norm = NormConfig(**raw["norm"])
        if "trials" in raw:
            t = dict(raw["trials"])
            if "band" in t:
                t["band"] = tuple(float(v) for v in t["band"])
            cfg.trials = TrialSpec(**t)
            if "seed" not in raw["trials"] and cfg.trials.kind != "gaussian" and "seed" not in raw:
                raise ConfigError("trials use randomness but no seed is given")
        cfg.estimates = list(raw.get("estimates", []))
        cfg.output = str(raw.get("output", cfg.output))
        cfg.tolerances = {str(k): float(v) for k, v in raw.get("tolerances", {}).items()}
        cfg.workers = int(raw.get("workers", 1))
        cfg.seed = int(raw.get("seed", 0))
    except (KeyError, TypeError, ValueError, GridError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"invalid config: {exc}") from exc
    validate(cfg)
    return cfg


def validate(cfg: ExperimentConfig):
    if cfg.trials.kind not in TRIAL_KINDS:
        raise ConfigError(f"trial kind must be one of {TRIAL_KINDS}, got {cfg.trials.kind!r}")
    if cfg.trials.count < 1:
        raise ConfigError("trial count must be >= 1")
    bad = [k for k, v in cfg.tolerances.items() if not (v > 0 and math.isfinite(v))]
    if bad:
        raise ConfigError(f"tolerances must be positive: {bad}")
    unknown = [n for n in cfg.estimates if n not in REGISTRY]
    if unknown:
        raise ConfigError(f"unknown estimates {unknown}; available: {', '.join(REGISTRY)}")
    unknown_tol = [k for k in cfg.tolerances if k not in REGISTRY]
    if unknown_tol:
        raise ConfigError(f"tolerances for unknown estimates {unknown_tol}")
    if cfg.workers < 1:
        raise ConfigError("workers must be >= 1")


def load_config(path) -> ExperimentConfig:
    try:
        raw = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return parse_config(raw)


# -- trial families ---------------------------------------------------------------------

def make_trials(spec: TrialSpec, grid_params, seed: Optional[int] = None) -> list:
    grid = make_grid(*grid_params)
    seed = spec.seed if seed is None else seed
    rng = np.random.default_rng(seed)
    out = []
    for i in range(spec.count):
        if spec.kind == "gaussian":
            # the first trial is the plain Gaussian; later ones carry random symmetries
            if i == 0:
                out.append(synthesize_gaussian(grid, 1.0, 0.5))
                continue
            c = rng.uniform(-2, 2, 2)
            b = 1j * rng.uniform(-1, 1, 2)
            out.append(synthesize_gaussian(grid, 1.0, 0.5, float(rng.uniform(-0.5, 0.5)),
                                           tuple(c), tuple(b)))
        elif spec.kind == "random":
            out.append(random_band_limited(grid, seed + i, spec.band, spec.envelope))
        else:
            out.append(est.multi_bubble(grid, 3, seed + i))
    return out


# -- estimate registry ---------------------------------------------------------------------

@dataclass(frozen=True)
class RunContext:
    config: ExperimentConfig
    seed: int
    scale: float

    def tol(self, name: str, default: float) -> float:
        return self.config.tolerances.get(name, default) * self.scale

    def trials(self, default: TrialSpec, grid=(128, 128, 24.0, 24.0)) -> list:
        spec = self.config.trials if self.config.trials.kind != "gaussian" else default
        return make_trials(spec, grid, self.seed)


_RANDOM = TrialSpec("random", 4, 0, (0.0, 3.0), 2.0)


def _strichartz(ctx: RunContext):
    trials = make_trials(ctx.config.trials, ctx.config.grid, ctx.seed)
    return est.verify_strichartz_constant(trials, ctx.config.norm,
                                          tol=ctx.tol("strichartz_constant", 0.01))


REGISTRY: Dict[str, Tuple[str, Callable[[RunContext], est.EstimateReport]]] = {
    "strichartz_constant": ("sharp L4 Strichartz constant", _strichartz),
    "bs1": ("separated bilinear bound, slope in N",
            lambda c: est.verify_bilinear_separated(seed=c.seed, tol=c.tol("bs1", 0.1))),
    "bs2": ("doubly separated bilinear bound at q = 2",
            lambda c: est.verify_bilinear_transverse(q=2.0, seed=c.seed, tol=c.tol("bs2", 0.1))),
    "bse3": ("bilinear L^(40/21) area exponent",
             lambda c: est.verify_bilinear_transverse(seed=c.seed, tol=c.tol("bse3", 0.05))),
    "local_smoothing_x": ("local smoothing in N",
                          lambda c: est.verify_local_smoothing(axis="x", seed=c.seed,
                                                               tol=c.tol("local_smoothing_x", 0.1))),
    "local_smoothing_y": ("mirrored local smoothing in M",
                          lambda c: est.verify_local_smoothing(axis="y", seed=c.seed,
                                                               tol=c.tol("local_smoothing_y", 0.1))),
    "sob1": ("improved Sobolev, L^6 case",
             lambda c: est.verify_improved_sobolev(c.trials(_RANDOM), "sob1",
                                                   uniformity=c.tol("sob1", 2.0))),
    "sob2": ("improved Sobolev, L^4 case",
             lambda c: est.verify_improved_sobolev(c.trials(_RANDOM), "sob2",
                                                   uniformity=c.tol("sob2", 2.0))),
    "inverse_strichartz": ("inverse Strichartz L^8 bound",
                           lambda c: est.verify_inverse_strichartz(
                               c.trials(_RANDOM), uniformity=c.tol("inverse_strichartz", 2.0))),
    "xp_bounds": ("X_p bounds at p = 2.1",
                  lambda c: est.verify_xp_bounds(c.trials(_RANDOM),
                                                 uniformity=c.tol("xp_bounds", 2.0))),
}


def run_estimate(name: str, config: ExperimentConfig, seed: int, scale: float) -> est.EstimateReport:
    return REGISTRY[name][1](RunContext(config, seed, scale))


def _available() -> str:
    return ", ".join(REGISTRY)


# -- subcommands -----------------------------------------------------------------------------

def _emit(rep: est.EstimateReport, out: Path) -> bool:
    rep.write(out)
    print(rep.summary_line())
    return rep.passed


def _run_many(names: Sequence[str], config: ExperimentConfig, seed: int, scale: float,
              workers: int, out: Path) -> int:
    if not names:
        print("error: no estimates selected", file=sys.stderr)
        return 2
    reports: List[Optional[est.EstimateReport]] = []
    failed = False
    if workers > 1 and len(names) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futs = [pool.submit(run_estimate, n, config, seed, scale) for n in names]
            for n, fu in zip(names, futs):
                try:
                    reports.append(fu.result())
                except Exception as exc:  # experiment failure
                    print(f"{n}: ERROR {exc}", file=sys.stderr)
                    reports.append(None)
    else:
        for n in names:
            try:
                reports.append(run_estimate(n, config, seed, scale))
            except Exception as exc:
                print(f"{n}: ERROR {exc}", file=sys.stderr)
                reports.append(None)
    for rep in reports:          # fixed order regardless of completion order
        if rep is None or not _emit(rep, out):
            failed = True
    return 1 if failed else 0


def cmd_run(args, config, seed, scale, out) -> int:
    return _run_many(config.estimates, config, seed, scale, args.workers or config.workers, out)


def cmd_verify_constant(args, config, seed, scale, out) -> int:
    return _run_many(["strichartz_constant"], config, seed, scale, 1, out)


def cmd_verify_estimate(args, config, seed, scale, out) -> int:
    if args.name not in REGISTRY:
        print(f"error: unknown estimate {args.name!r}; available: {_available()}", file=sys.stderr)
        return 2
    return _run_many([args.name], config, seed, scale, 1, out)


def cmd_evolve(args, config, seed, scale, out) -> int:
    if args.input:
        f = load_field(args.input)
    else:
        f = synthesize_gaussian(make_grid(*config.grid), 1.0, 0.5)
    ecfg = EvolveConfig(p=args.p, dt=args.dt, nsteps=args.steps,
                        record_every=max(1, args.steps // 10))
    tr = nls_evolve(f, ecfg)
    drift = tr.info["mass_drift"]
    tol = 1e-10 * scale
    ok = drift <= tol
    out.mkdir(parents=True, exist_ok=True)
    save_field(out / "evolve_final.field", tr.snapshots[-1], seed)
    manifest = {"p": args.p, "dt": args.dt, "steps": args.steps, "final_time": args.dt * args.steps,
                "grid": f.grid.to_dict(), "masses": tr.info["masses"], "mass_drift": drift,
                "tolerance": tol, "verdict": "pass" if ok else "fail",
                "final_field": "evolve_final.field"}
    (out / "evolve.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    print(f"evolve: {'PASS' if ok else 'FAIL'} p={args.p} steps={args.steps} mass_drift={drift:.3e}")
    return 0 if ok else 1


def cmd_synthesize(args, config, seed, scale, out) -> int:
    specs = orthogonal_bubble_specs(seed, count=args.count)
    grid = make_grid(*BUBBLE_GRID)
    f = synthesize_bubbles(specs, grid)
    out.mkdir(parents=True, exist_ok=True)
    path = out / args.name
    save_field(path, f, seed)
    truth = [{"weight": [w.real, w.imag], **p.params()} for w, p in specs]
    Path(str(path) + ".truth.json").write_text(json.dumps(truth, indent=2, sort_keys=True) + "\n")
    print(f"synthesize: wrote {path} with {len(specs)} bubbles")
    return 0


def cmd_decompose(args, config, seed, scale, out) -> int:
    f = load_field(args.input)
    dec = profile_decompose(f, args.jmax, args.eps, ExtractConfig())
    d = dec.diagnostics
    ok = d["decoupling_defect_fraction"] < 0.05 * scale
    save_decomposition(out / "decomposition", dec)
    print(f"decompose: {'PASS' if ok else 'FAIL'} profiles={d['count']} "
          f"decoupling_defect={d['decoupling_defect_fraction']:.3e} "
          f"remainder_mass={d['remainder_mass_fraction']:.3e}")
    return 0 if ok else 1


def cmd_extremize(args, config, seed, scale, out) -> int:
    acfg = est.AscentConfig()
    guard = est.SHARP_CONSTANT * (1 + 5e-3 * scale)
    rep = est.EstimateReport("extremize", "sharpness guard for ascent runs: ratio <= 2^(-1/4) "
                             "and terminal fields near the Gaussian family",
                             tolerances={"guard": guard, "distance": 0.05 * scale})
    rows = []
    ok = True
    for s in range(args.starts):
        f0 = est.ascent_trial(seed + s, acfg)
        f, hist, info = est.extremizer_ascent(f0, steps=args.steps, cfg=acfg, return_info=True)
        dist = est.fit_gaussian_family(f)["distance"]
        viol = sum(h > guard for h in hist)
        ok = ok and viol == 0 and dist <= 0.05 * scale
        rep.sweep.append(est.SweepPoint({"start": seed + s, "distance": dist, "violations": viol,
                                         "iterations": len(hist) - 1}, hist[-1], est.SHARP_CONSTANT))
        rows += [SweepRow("ascent_ratio", {"start": seed + s, "iteration": i}, h)
                 for i, h in enumerate(hist)]
    rep.constant_estimate = max(p.lhs for p in rep.sweep)
    rep.verdict = "pass" if ok else "fail"
    write_sweep_csv(out / "extremize_history.csv", rows,
                    "ascent history of the L4 Strichartz ratio", runtime=False)
    return 0 if _emit(rep, out) else 1


def cmd_sweep(args, config, seed, scale, out) -> int:
    rows = []
    if args.kind == "strichartz-horizon":
        grid = make_grid(*config.grid)
        f = synthesize_gaussian(grid, 1.0, 0.5)
        for T in (2.0, 4.0, 8.0):
            steps = int(round(40 * T)) + 1
            rows.append(timed("strichartz_ratio", {"T": T, "steps": steps},
                              lambda: strichartz_ratio(f, NormConfig(T, steps))["ratio"]))
        ref = "sharp L4 Strichartz constant 2^(-1/4) vs time horizon"
    else:
        grid = make_grid(256, 256, 64.0, 64.0)
        for lam in (0.05, 0.1, 0.2, 0.5, 1.0, 2.0):
            f = synthesize_gaussian(grid, 1.0, lam)
            rows.append(timed("xp_ratio", {"p": 2.1, "lam": lam},
                              lambda: xp_norm(f, 2.1) / l2_norm(f)))
        ref = "X_p norm over L2 across a Gaussian scale sweep, p = 2.1"
    path = write_sweep_csv(out / f"sweep_{args.kind}.csv", rows, ref, runtime=args.timings)
    print(f"sweep: wrote {len(rows)} rows to {path}")
    return 0


# -- argument parsing ---------------------------------------------------------------------------

def _common() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False, argument_default=argparse.SUPPRESS)
    p.add_argument("--config", help="JSON experiment configuration")
    p.add_argument("--out", help="output directory")
    p.add_argument("--workers", type=int, help="parallel experiments")
    p.add_argument("--seed", type=int, help="overrides the config seed")
    p.add_argument("--tolerance-scale", type=float, dest="tolerance_scale",
                   help="multiplies every tolerance")
    return p


def build_parser() -> argparse.ArgumentParser:
    common = _common()
    ap = argparse.ArgumentParser(prog="hnlslab", parents=[common],
                                 description="Experiments for i u_t + u_xy = |u|^p u.")
    sub = ap.add_subparsers(dest="command", required=True)
    sub.add_parser("run", parents=[common], help="run the estimates selected in --config")
    sub.add_parser("verify-constant", parents=[common], help="sharp Strichartz constant")
    p = sub.add_parser("verify-estimate", parents=[common], help="one named estimate")
    p.add_argument("name")
    p = sub.add_parser("evolve", parents=[common], help="split-step evolution with mass manifest")
    p.add_argument("--p", type=int, default=2, choices=(0, 2, 4))
    p.add_argument("--steps", type=int, default=1000)
    p.add_argument("--dt", type=float, default=1e-3)
    p.add_argument("--input", default=None, help="initial Field container")
    p = sub.add_parser("synthesize", parents=[common], help="write a multi-bubble Field container")
    p.add_argument("--count", type=int, default=3)
    p.add_argument("--name", default="bubble3.field")
    p = sub.add_parser("decompose", parents=[common], help="profile decomposition of a Field")
    p.add_argument("--input", required=True)
    p.add_argument("--jmax", type=int, default=5)
    p.add_argument("--eps", type=float, default=None)
    p = sub.add_parser("extremize", parents=[common], help="ascent runs of the L4 ratio")
    p.add_argument("--starts", type=int, default=5)
    p.add_argument("--steps", type=int, default=80)
    p = sub.add_parser("sweep", parents=[common], help="tidy CSV for plotting")
    p.add_argument("--kind", choices=("strichartz-horizon", "xp-scale"), default="xp-scale")
    p.add_argument("--timings", action="store_true", help="add a runtime column")
    return ap


COMMANDS = {
    "run": cmd_run, "verify-constant": cmd_verify_constant, "verify-estimate": cmd_verify_estimate,
    "evolve": cmd_evolve, "synthesize": cmd_synthesize, "decompose": cmd_decompose,
    "extremize": cmd_extremize, "sweep": cmd_sweep,
}


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    for k in ("config", "out", "workers", "seed", "tolerance_scale"):
        if not hasattr(args, k):
            setattr(args, k, None)
    try:
        config = load_config(args.config) if args.config else ExperimentConfig()
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    if args.command == "run" and not args.config:
        print("error: run needs --config", file=sys.stderr)
        return 2
    scale = 1.0 if args.tolerance_scale is None else args.tolerance_scale
    if not scale > 0:
        print("error: --tolerance-scale must be positive", file=sys.stderr)
        return 2
    if args.workers is not None and args.workers < 1:
        print("error: --workers must be >= 1", file=sys.stderr)
        return 2
    seed = config.seed if args.seed is None else args.seed
    out = Path(args.out if args.out else config.output)
    out.mkdir(parents=True, exist_ok=True)
    try:
        return COMMANDS[args.command](args, config, seed, scale, out)
    except (GridError, ValueError, RuntimeError, OSError) as exc:
        print(f"{args.command}: ERROR {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
