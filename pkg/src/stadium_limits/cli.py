"""Command-line front end: experiments, CSV/JSON emission, validation."""

from __future__ import annotations

import argparse
import dataclasses
import json
import math
import os
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__, cascades, limits, observables
from .errors import StadiumError
from .geometry import StadiumGeometry, kac_mean_return, mu0_of_X
from .kernel import K, backend
from .observables import (centered_free_path, compute_I, critical_ell,
                          free_path_observable, mean_tau, segment_bump,
                          tabulated_observable, zero_observable)
from .parallel import default_workers
from .sampling import SeedSpec, sample_mu, stream_for
from .validate import run_validation

COMMANDS = ("constants", "simulate", "tails", "transitions", "cascade",
            "clt", "variance", "correlations", "flow", "validate")


@dataclass
class RunConfig:
    ell: float = 2.0
    observable: str = "tau0"
    n: int = 32768
    n_grid: str = "2^10..2^17"
    samples: int = 100000
    pairs: int = 1000000
    t_horizon: float = 10000.0
    quad_nodes: int = 8
    cap_k: float = 10.0
    s: float = 1.5
    master_seed: int = 7
    workers: int = 0          # 0: use STADIUM_LIMITS_THREADS or 1
    output_dir: str = "."
    tier: str = "quick"
    strict_nominal: bool = False

    def resolved_workers(self) -> int:
        return self.workers if self.workers > 0 else default_workers()

    def to_json(self) -> str:
        return json.dumps(dataclasses.asdict(self), indent=2, sort_keys=True)

    @classmethod
    def from_file(cls, path: str) -> "RunConfig":
        with open(path) as fh:
            raw = json.load(fh)
        cfg = cls()
        for key, value in raw.items():
            if not hasattr(cfg, key):
                raise ValueError(f"unknown config field {key!r}")
            want = type(getattr(cfg, key))
            try:
                setattr(cfg, key, want(value))
            except (TypeError, ValueError) as exc:
                raise ValueError(f"bad value for config field {key!r}: {exc}")
        return cfg


def parse_n_grid(text: str) -> list[int]:
    """Parse '2^10..2^17' or a comma list of integers."""
    text = text.strip()
    if ".." in text:
        lo, hi = text.split("..")
        def _v(tok):
            tok = tok.strip()
            if "^" in tok:
                b, e = tok.split("^")
                return int(b) ** int(e)
            return int(tok)
        a, b = _v(lo), _v(hi)
        out = []
        n = a
        while n <= b:
            out.append(n)
            n *= 2
        return out
    return [int(tok) for tok in text.split(",") if tok.strip()]


def make_observable(geom: StadiumGeometry, name: str):
    if name == "tau":
        return free_path_observable()
    if name == "tau0":
        return centered_free_path(geom)
    if name == "bump":
        return segment_bump(geom)
    if name == "bump0":
        return observables.center(geom, segment_bump(geom))
    if name == "zero":
        return zero_observable()
    if name.startswith("const:"):
        return observables.constant_observable(float(name.split(":", 1)[1]))
    if name.startswith("table:"):
        return tabulated_observable(name.split(":", 1)[1])
    raise ValueError(f"unknown observable {name!r} "
                     "(try tau, tau0, bump, bump0, zero, const:<v>, table:<path>)")


def write_csv(path: Path, header: str, rows) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(header + "\n")
        for row in rows:
            fh.write(",".join(_fmt(v) for v in row) + "\n")


def _fmt(v) -> str:
    if isinstance(v, float):
        return repr(v)
    return str(v)


# ---------------------------------------------------------------------------
# commands


def cmd_constants(cfg: RunConfig, out: Path) -> dict:
    geom = StadiumGeometry(cfg.ell)
    tau0 = centered_free_path(geom)
    I0 = compute_I(geom, tau0)
    scalars = {
        "ell": cfg.ell,
        "I_tau": compute_I(geom, free_path_observable()),
        "I_tau0": I0,
        "taubar": mean_tau(geom),
        "ell_star": critical_ell(),
        "taubar_at_ell_star": mean_tau(StadiumGeometry(critical_ell())),
        "c_tau0": limits.theoretical_c(geom, I0) if abs(I0) > 1e-8 else 0.0,
        "y": limits.y_const(),
        "two_y_minus_one": limits.two_y_minus_one(),
        "mu0_X_exact": mu0_of_X(geom),
        "mu0_X_quoted": math.pi / (2 * (math.pi + geom.ell)),
        "kac_mean_exact": kac_mean_return(geom),
        "I_bump": compute_I(geom, segment_bump(geom)),
    }
    for k, v in scalars.items():
        print(f"{k} = {v:.10g}")
    return scalars


def cmd_simulate(cfg: RunConfig, out: Path) -> dict:
    """Measure-identity run: mean free path, mu0(X) occupancy, Kac mean."""
    geom = StadiumGeometry(cfg.ell)
    seed = SeedSpec(cfg.master_seed)
    rep = limits.mu0X_check(geom, cfg.samples,
                            seed.child(stream_for("simulate/mu0x")))
    per = 1000
    g = seed.child(stream_for("simulate/tau")).generator()
    m = max(1, cfg.samples // per)
    rs = g.uniform(0, geom.perimeter, m)
    ths = np.arcsin(2 * g.uniform(size=m) - 1)
    emp_tau = K.tau_sum_batch(geom.ell, rs, ths, per) / (m * per)
    rs, ths = sample_mu(geom, seed.child(stream_for("simulate/kac")),
                        cfg.samples)
    phi = np.empty(cfg.samples, dtype=np.int64)
    fsum = np.empty(cfg.samples)
    nseg = np.empty(cfg.samples, dtype=np.int64)
    narc = np.empty(cfg.samples, dtype=np.int64)
    K.excursion_batch(geom.ell, rs, ths, 1, 10**7, 0, np.zeros(8),
                      np.empty(0), np.empty(0), np.empty((0, 0)), None,
                      phi, fsum, nseg, narc)
    scalars = {
        "mu0X_estimate": rep["estimate"],
        "mu0X_exact": rep["closed_form_exact"],
        "mu0X_quoted": rep["closed_form_nominal"],
        "mean_free_path": float(emp_tau),
        "taubar": mean_tau(geom),
        "kac_mean": float(phi.mean()),
        "kac_exact": kac_mean_return(geom),
    }
    for k, v in scalars.items():
        print(f"{k} = {v:.8g}")
    return scalars


def cmd_tails(cfg: RunConfig, out: Path) -> dict:
    geom = StadiumGeometry(cfg.ell)
    seed = SeedSpec(cfg.master_seed, stream_for("tails"))
    rep = limits.tail_report(geom, cfg.samples, seed,
                             workers=cfg.resolved_workers())
    phi = rep.pop("phi")
    rep.pop("f_abs")
    counts = np.bincount(phi, minlength=302)
    rows = []
    for n in range(1, 301):
        prob = counts[n] / cfg.samples
        theory = geom.ell**2 / 4.0 / n**3
        rows.append((n, int(counts[n]), prob, theory))
    write_csv(out / "tails.csv", "n,count,prob,theory", rows)
    for k, v in rep.items():
        print(f"{k} = {v}")
    return rep


def cmd_transitions(cfg: RunConfig, out: Path) -> dict:
    geom = StadiumGeometry(cfg.ell)
    n = cfg.n if cfg.n < 1000 else 100
    hist = cascades.transition_histogram(
        geom, n, cfg.samples, SeedSpec(cfg.master_seed, stream_for("trans")))
    rows = [(n, int(i), float(p), float(t))
            for i, p, t in zip(hist["i"], hist["empirical_p"],
                               hist["theory_p"])]
    write_csv(out / "transitions.csv", "n,i,empirical_p,theory_p", rows)
    dev = cascades.decile_deviation(hist)
    scalars = {"window_mass": hist["window_mass"], "decile_deviation": dev,
               "n": n, "samples": cfg.samples}
    for k, v in scalars.items():
        print(f"{k} = {v}")
    return scalars


def cmd_cascade(cfg: RunConfig, out: Path) -> dict:
    geom = StadiumGeometry(cfg.ell)
    obs = segment_bump(geom)
    I = compute_I(geom, obs)
    n_list = [100, 200]
    res = cascades.cascade_mean(geom, obs, n_list, cfg.samples,
                                SeedSpec(cfg.master_seed, stream_for("casc")),
                                cap_K=cfg.cap_k, I=I)
    rows = [(n, row["mean_ratio"], row["ci_lo"], row["ci_hi"], row["samples"])
            for n, row in res.items()]
    write_csv(out / "cascade_means.csv", "n,mean_ratio,ci_lo,ci_hi,samples",
              rows)
    y1 = limits.y_const() - 1.0
    scalars = {"target_y_minus_1": y1}
    for n, row in res.items():
        scalars[f"ratio_n{n}"] = row["mean_ratio"] / y1
        scalars[f"capped_fraction_n{n}"] = row["capped_fraction"]
    for k, v in scalars.items():
        print(f"{k} = {v}")
    return scalars


def cmd_clt(cfg: RunConfig, out: Path) -> dict:
    geom = StadiumGeometry(cfg.ell)
    obs = make_observable(geom, cfg.observable)
    if not obs.centered:
        obs = observables.center(geom, obs)
    seed = SeedSpec(cfg.master_seed, stream_for("clt"))
    I = compute_I(geom, obs)
    if abs(I) > observables.I_TOLERANCE:
        samples, rep = limits.birkhoff_samples(
            geom, obs, cfg.n, cfg.samples, seed, "sqrt_cnlogn", I=I,
            workers=cfg.resolved_workers())
    else:
        fit = limits.variance_growth(geom, obs,
                                     [cfg.n // 8, cfg.n // 4, cfg.n // 2,
                                      cfg.n],
                                     max(200, cfg.samples // 4), seed,
                                     workers=cfg.resolved_workers())
        samples, rep = limits.birkhoff_samples(
            geom, obs, cfg.n, cfg.samples, seed, "sqrt_n",
            sigma2=max(fit["beta"], 1e-12), workers=cfg.resolved_workers())
    write_csv(out / "clt_samples.csv", "sample_index,value",
              list(enumerate(samples.tolist())))
    scalars = {"n": cfg.n, "samples": cfg.samples, "I": I,
               "ks_distance": rep.ks_distance,
               "normalization": rep.normalization,
               "variance_ratio": rep.variance_ratio}
    for k, v in scalars.items():
        print(f"{k} = {v}")
    return scalars


def cmd_variance(cfg: RunConfig, out: Path) -> dict:
    geom = StadiumGeometry(cfg.ell)
    obs = make_observable(geom, cfg.observable)
    if not obs.centered:
        obs = observables.center(geom, obs)
    grid = parse_n_grid(cfg.n_grid)
    fit = limits.variance_growth(geom, obs, grid,
                                 max(100, cfg.samples),
                                 SeedSpec(cfg.master_seed, stream_for("var")),
                                 workers=cfg.resolved_workers())
    rows = [(n, v * n, v) for n, v in zip(fit["n_grid"], fit["var_over_n"])]
    write_csv(out / "variance_growth.csv", "n,var,var_over_n", rows)
    I = compute_I(geom, obs)
    scalars = {"alpha": fit["alpha"], "beta": fit["beta"],
               "alpha_plain": fit["alpha_plain"]}
    if abs(I) > observables.I_TOLERANCE:
        scalars["c"] = limits.theoretical_c(geom, I)
        scalars["alpha_over_c"] = fit["alpha"] / scalars["c"]
    for k, v in scalars.items():
        print(f"{k} = {v}")
    return scalars


def cmd_correlations(cfg: RunConfig, out: Path) -> dict:
    geom = StadiumGeometry(cfg.ell)
    obs = make_observable(geom, cfg.observable)
    if not obs.centered:
        obs = observables.center(geom, obs)
    lags = [8, 16, 32, 64]
    res = limits.correlation(geom, obs, lags, cfg.pairs,
                             SeedSpec(cfg.master_seed, stream_for("corr")),
                             workers=cfg.resolved_workers())
    rows = [(lag, row["estimate"], row["ci_lo"], row["ci_hi"],
             row["n_times_estimate"]) for lag, row in res.items()]
    write_csv(out / "correlations.csv",
              "n,estimate,ci_lo,ci_hi,n_times_estimate", rows)
    scalars = {f"lag{lag}": row["n_times_estimate"]
               for lag, row in res.items()}
    for k, v in scalars.items():
        print(f"{k} = {v}")
    return scalars


def cmd_flow(cfg: RunConfig, out: Path) -> dict:
    geom = StadiumGeometry(cfg.ell)
    obs = make_observable(geom, cfg.observable)
    if not obs.centered:
        obs = observables.center(geom, obs)
    phi = limits.flow_pullback(obs)
    samples, rep = limits.flow_birkhoff(
        geom, phi, cfg.t_horizon, cfg.samples, cfg.quad_nodes,
        SeedSpec(cfg.master_seed, stream_for("flow")),
        workers=cfg.resolved_workers())
    write_csv(out / "flow_samples.csv", "sample_index,value",
              list(enumerate(samples.tolist())))
    scalars = {"T": cfg.t_horizon, "J": rep["J"], "c": rep["c"],
               "ks_distance": rep["ks_distance"]}
    for k, v in scalars.items():
        print(f"{k} = {v}")
    return scalars


def cmd_validate(cfg: RunConfig, out: Path) -> tuple[dict, int]:
    quick = cfg.tier != "full"
    results = run_validation(ell=cfg.ell, quick=quick,
                             master_seed=cfg.master_seed,
                             workers=cfg.resolved_workers())
    summary = {}
    failed = 0
    for res in results:
        crit = {
            "title": res.title,
            "passed": res.passed,
            "seconds": round(res.seconds, 2),
            "checks": [dataclasses.asdict(c) for c in res.checks],
        }
        summary[f"criterion_{res.index}"] = crit
        if not res.passed:
            failed += 1
        elif cfg.strict_nominal:
            if any(not c.passed for c in res.checks):
                failed += 1
    status = 2 if failed else 0
    print(f"validate: {len(results) - failed}/{len(results)} criteria passed"
          f" ({'quick' if quick else 'full'} tier)")
    return summary, status


# ---------------------------------------------------------------------------
# entry point


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="stadium-limits",
        description="Stadium billiard simulator and limit-theorem harness")
    ap.add_argument("command", choices=COMMANDS)
    ap.add_argument("--ell", type=float, default=None)
    ap.add_argument("--obs", type=str, default=None,
                    help="tau | tau0 | bump | bump0 | zero | const:<v> | table:<path>")
    ap.add_argument("--n", type=int, default=None)
    ap.add_argument("--n-grid", type=str, default=None)
    ap.add_argument("--samples", type=int, default=None)
    ap.add_argument("--pairs", type=int, default=None)
    ap.add_argument("--t-horizon", type=float, default=None)
    ap.add_argument("--quad-nodes", type=int, default=None)
    ap.add_argument("--cap-k", type=float, default=None)
    ap.add_argument("--s", type=float, default=None)
    ap.add_argument("--seed", type=int, default=None)
    ap.add_argument("--workers", type=int, default=None)
    ap.add_argument("--out", type=str, default=None)
    ap.add_argument("--config", type=str, default=None)
    ap.add_argument("--quick", action="store_true")
    ap.add_argument("--full", action="store_true")
    ap.add_argument("--strict-nominal", action="store_true",
                    help="also fail validate on the known-defective quoted "
                         "closed forms")
    return ap


_FLAG_TO_FIELD = {
    "ell": "ell", "obs": "observable", "n": "n", "n_grid": "n_grid",
    "samples": "samples", "pairs": "pairs", "t_horizon": "t_horizon",
    "quad_nodes": "quad_nodes", "cap_k": "cap_k", "s": "s",
    "seed": "master_seed", "workers": "workers", "out": "output_dir",
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = RunConfig.from_file(args.config) if args.config else RunConfig()
    except (OSError, ValueError, json.JSONDecodeError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    for flag, fieldname in _FLAG_TO_FIELD.items():
        val = getattr(args, flag)
        if val is not None:
            setattr(cfg, fieldname, val)
    if args.full:
        cfg.tier = "full"
    elif args.quick:
        cfg.tier = "quick"
    if args.strict_nominal:
        cfg.strict_nominal = True

    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    t0 = time.perf_counter()
    status = 0
    try:
        if args.command == "constants":
            scalars = cmd_constants(cfg, out)
        elif args.command == "simulate":
            scalars = cmd_simulate(cfg, out)
        elif args.command == "tails":
            scalars = cmd_tails(cfg, out)
        elif args.command == "transitions":
            scalars = cmd_transitions(cfg, out)
        elif args.command == "cascade":
            scalars = cmd_cascade(cfg, out)
        elif args.command == "clt":
            scalars = cmd_clt(cfg, out)
        elif args.command == "variance":
            scalars = cmd_variance(cfg, out)
        elif args.command == "correlations":
            scalars = cmd_correlations(cfg, out)
        elif args.command == "flow":
            scalars = cmd_flow(cfg, out)
        else:
            scalars, status = cmd_validate(cfg, out)
    except StadiumError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1

    summary = {
        "command": args.command,
        "config": dataclasses.asdict(cfg),
        "version": __version__,
        "kernel_backend": backend(),
        "master_seed": cfg.master_seed,
        "wall_seconds": round(time.perf_counter() - t0, 3),
        "results": scalars,
    }
    with open(out / "summary.json", "w") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True, default=str)
        fh.write("\n")
    return status


if __name__ == "__main__":
    sys.exit(main())
