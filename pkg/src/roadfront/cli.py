"""Scenario runner: ``roadfront run|validate <config.ini>`` and ``roadfront list-scenarios``.

Exit codes: 0 success (science verdicts live in the JSON outputs),
1 configuration error, 2 runtime failure.
"""

from __future__ import annotations

import argparse
import configparser
import json
import logging
import math
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import diagnostics as dg
from . import io
from .linearized import (
    ContourSpec,
    RepresentationError,
    asymptotic_u,
    crosscheck_linearized,
    eval_h,
    log_asymptotic_u,
    road_ubar,
)
from .model import ModelParams, ReactionSpec, derive_constants
from .solver import RectGrid, SchemeConfig, SolverError, bump_initial, run, run_dirichlet, solve_steady
from .subsolution import ConstructionError, build_strip_subsolution, check_below, fit_eps0, moving_constants, verify_phi

log = logging.getLogger("roadfront")

MODEL = {"alpha": 0.5, "mu": 1.0, "k": 0.0, "rate": 1.0}

SCENARIOS = {
    "road-spreading": {
        "model": MODEL,
        "grid": {"nx": 32768, "ny": 97, "X": 4000.0, "Y": 24.0},
        "scheme": {"dt": 0.1, "T": 14.0, "probe_dt": 0.5, "linearized": True},
        "diagnostics": {"level": 0.1, "tail_t": 12.0, "tail_lo": 30.0, "tail_hi": 300.0},
    },
    "field-spreading": {
        "model": MODEL,
        "grid": {"nx": 256, "ny": 481, "X": 128.0, "Y": 120.0},
        "scheme": {"dt": 0.05, "T": 40.0, "probe_dt": 1.0, "linearized": False},
        "diagnostics": {"level": 0.1, "thetas_deg": "90,45"},
    },
    "steady-state": {
        "model": MODEL,
        "grid": {"ny": 201, "Y": 20.0},
    },
    "linearized-asymptotics": {
        "model": MODEL,
        "grid": {"nx": 32768, "ny": 97, "X": 4000.0, "Y": 24.0},
        "linearized": {"dt": 0.1, "t": 12.0, "xs": "5,10,20,50,100,300", "law_t": 50.0, "law_xs": "10,100,1000,10000", "h_ts": "50,200,700"},
    },
    "subsolution-verify": {
        "model": MODEL,
        "grid": {"nx": 1024, "ny": 81, "X": 512.0, "Y": 20.0},
        "scheme": {"dt": 0.05, "T": 14.0, "probe_dt": 0.5},
        "subsolution": {"gamma_fraction": 0.8, "epsilon": 0.0, "t_fit": 2.0},
    },
    "dirichlet-benchmark": {
        "model": MODEL,
        "grid": {"nx": 256, "ny": 481, "X": 128.0, "Y": 120.0},
        "scheme": {"dt": 0.05, "T": 40.0, "probe_dt": 1.0},
        "diagnostics": {"level": 0.1, "source_y": 5.0, "source_r": 2.0},
    },
    "rescaled-view": {
        "model": MODEL,
        "rescaled": {"times": "30,40,50,60,70,80,90,100", "profile_times": "30,60,100", "level": 0.1, "xi_min": 0.01, "xi_max": 200.0, "n_xi": 24},
    },
}


class ConfigError(ValueError):
    def __init__(self, problems):
        super().__init__("; ".join(problems))
        self.problems = problems


@dataclass
class RunConfig:
    scenario: str
    output: Path
    seed: int
    sections: dict = field(default_factory=dict)

    def model(self) -> ModelParams:
        m = self.sections["model"]
        return ModelParams(alpha=m["alpha"], mu=m["mu"], k=m["k"], reaction=ReactionSpec(m["rate"]))

    def to_ini(self) -> str:
        cp = configparser.ConfigParser()
        cp.optionxform = str
        cp["scenario"] = {"name": self.scenario, "output": str(self.output), "seed": str(self.seed)}
        for name, block in self.sections.items():
            cp[name] = {k: _fmt(v) for k, v in block.items()}
        lines = []
        for sec in cp.sections():
            lines.append(f"[{sec}]")
            lines += [f"{k} = {v}" for k, v in cp[sec].items()]
            lines.append("")
        return "\n".join(lines)


def _fmt(v):
    if isinstance(v, bool):
        return "true" if v else "false"
    return repr(v) if isinstance(v, float) else str(v)


def _coerce(raw: str, default, where: str):
    try:
        if isinstance(default, bool):
            low = raw.strip().lower()
            if low not in ("true", "false", "1", "0", "yes", "no"):
                raise ValueError(raw)
            return low in ("true", "1", "yes")
        if isinstance(default, int):
            return int(raw)
        if isinstance(default, float):
            return float(raw)
        return raw.strip()
    except ValueError:
        raise ConfigError([f"{where}: cannot parse {raw!r} as {type(default).__name__}"]) from None


def floats(text: str) -> list[float]:
    return [float(s) for s in text.split(",") if s.strip()]


def load_config(path) -> RunConfig:
    path = Path(path)
    cp = configparser.ConfigParser()
    cp.optionxform = str
    try:
        if not cp.read(path):
            raise ConfigError([f"cannot read config file {path}"])
    except configparser.Error as exc:
        raise ConfigError([f"malformed config: {exc}"]) from None
    problems = []
    if not cp.has_section("scenario"):
        raise ConfigError(["missing [scenario] block"])
    sc = cp["scenario"]
    name = sc.get("name", "").strip()
    if name not in SCENARIOS:
        raise ConfigError([f"[scenario] name {name!r} is not one of {sorted(SCENARIOS)}"])
    out = Path(sc.get("output", f"out/{name}"))
    if not out.is_absolute():
        out = (path.parent / out).resolve()
    seed = _coerce(sc.get("seed", "0"), 0, "[scenario] seed")
    sections = {}
    for block, defaults in SCENARIOS[name].items():
        if not cp.has_section(block):
            problems.append(f"missing [{block}] block required by scenario {name}")
            continue
        vals = {}
        for key in cp[block]:
            if key not in defaults:
                problems.append(f"[{block}] unknown key {key!r}")
        for key, default in defaults.items():
            if key in cp[block]:
                try:
                    vals[key] = _coerce(cp[block][key], default, f"[{block}] {key}")
                except ConfigError as exc:
                    problems += exc.problems
            else:
                vals[key] = default
        sections[block] = vals
    for extra in set(cp.sections()) - set(SCENARIOS[name]) - {"scenario"}:
        problems.append(f"block [{extra}] is not used by scenario {name}")
    if problems:
        raise ConfigError(problems)
    cfg = RunConfig(name, out, seed, sections)
    _semantic_checks(cfg)
    return cfg


def _semantic_checks(cfg: RunConfig):
    problems = []
    try:
        params = cfg.model()
    except ValueError as exc:
        raise ConfigError([f"[model] {exc}"]) from None
    s = cfg.sections
    if "grid" in s:
        g = s["grid"]
        try:
            if "nx" in g:
                RectGrid(g["nx"], g["ny"], g["X"], g["Y"])
            else:
                RectGrid(1, g["ny"], 1.0, g["Y"])
        except ValueError as exc:
            problems.append(f"[grid] {exc}")
        if g["Y"] < 10:
            problems.append("[grid] Y must be at least 10")
    if "scheme" in s:
        sch = s["scheme"]
        try:
            SchemeConfig(dt=sch["dt"], linearized=sch.get("linearized", False)).validate(params)
        except ValueError as exc:
            problems.append(f"[scheme] {exc}")
        if not sch["T"] > 0 or not sch["probe_dt"] > 0:
            problems.append("[scheme] T and probe_dt must be positive")
    if "diagnostics" in s and not 0 < s["diagnostics"]["level"] < 1:
        problems.append("[diagnostics] level must lie in (0, 1)")
    if "subsolution" in s and not 0 < s["subsolution"]["gamma_fraction"] < 1:
        problems.append("[subsolution] gamma_fraction must lie in (0, 1)")
    if "rescaled" in s:
        r = s["rescaled"]
        for key in ("times", "profile_times"):
            try:
                ts = floats(r[key])
                if len(ts) < 2 or min(ts) <= 1 or ts != sorted(ts):
                    problems.append(f"[rescaled] {key} must be sorted, > 1, at least two")
            except ValueError:
                problems.append(f"[rescaled] {key} must be a comma-separated list of numbers")
        if not 0 < r["xi_min"] < r["xi_max"] or r["n_xi"] < 2:
            problems.append("[rescaled] need 0 < xi_min < xi_max and n_xi >= 2")
    if "linearized" in s:
        lin = s["linearized"]
        for key in ("xs", "law_xs", "h_ts"):
            try:
                floats(lin[key])
            except ValueError:
                problems.append(f"[linearized] {key} must be a comma-separated list of numbers")
    if problems:
        raise ConfigError(problems)


# scenario runners: each returns (summary dict, tainted flag) and writes into out


def _grid(cfg):
    g = cfg.sections["grid"]
    return RectGrid(g["nx"], g["ny"], g["X"], g["Y"])


def _probes(sch, start=0.0):
    return np.round(np.arange(start, sch["T"] + 1e-9, sch["probe_dt"]), 12)


def _road_spreading(cfg, out):
    params, grid = cfg.model(), _grid(cfg)
    sch, dgc = cfg.sections["scheme"], cfg.sections["diagnostics"]
    probes = sorted(set(_probes(sch)) | {dgc["tail_t"]})
    res = run(bump_initial(grid), SchemeConfig(dt=sch["dt"], linearized=sch["linearized"]), params, grid, sch["T"], probes, keep_field=False)
    snaps = [s for s in res.snapshots if s.t > 0]
    trace = dg.extract_levels(snaps, dgc["level"], grid)
    trace.write_csv(out / "trace.csv")
    fit = dg.fit_road_exponent(trace)
    tail_snap = min(res.snapshots, key=lambda s: abs(s.t - dgc["tail_t"]))
    tail = dg.fit_tail_exponent(grid.x, tail_snap.u, dgc["tail_lo"], dgc["tail_hi"])
    io.save_snapshot(out / "final", res.snapshots[-1], grid, params)
    gs = derive_constants(params).gammaStar
    summary = {
        "gamma_hat": fit,
        "gamma_star": gs,
        "tail_fit": tail,
        "tail_target": -(1 + 2 * params.alpha),
        "tail_time": tail_snap.t,
    }
    io.write_json(out / "fit.json", summary)
    return summary, res.tainted


def _field_spreading(cfg, out):
    params, grid = cfg.model(), _grid(cfg)
    sch, dgc = cfg.sections["scheme"], cfg.sections["diagnostics"]
    thetas = [math.radians(d) for d in floats(dgc["thetas_deg"])]
    res = run(bump_initial(grid), SchemeConfig(dt=sch["dt"], linearized=sch["linearized"]), params, grid, sch["T"], _probes(sch))
    trace = dg.extract_levels(res.snapshots, dgc["level"], grid, thetas=thetas)
    fits = {}
    for d, th in zip(floats(dgc["thetas_deg"]), thetas):
        trace.write_csv(out / f"trace_theta{d:g}.csv", theta=th)
        fits[f"{d:g}"] = dg.fit_field_speed(trace, th)
    cK = derive_constants(params).cK
    summary = {"speeds": fits, "cK": cK, "targets": {k: cK / math.sin(math.radians(float(k))) for k in fits}}
    if len(thetas) >= 2:
        keys = list(fits)
        summary["ratio"] = fits[keys[1]].estimate / fits[keys[0]].estimate
    dg.heatmap(out / "field_final.pgm", res.snapshots[-1])
    io.save_snapshot(out / "final", res.snapshots[-1], grid, params)
    io.write_json(out / "fit.json", summary)
    return summary, res.tainted


def _steady_state(cfg, out):
    params = cfg.model()
    g = cfg.sections["grid"]
    grid = RectGrid(1, g["ny"], 1.0, g["Y"])
    st = solve_steady(params, grid)
    slope0 = (-3 * st.Vs[0] + 4 * st.Vs[1] - st.Vs[2]) / (2 * grid.hy)
    summary = {
        "Us": st.Us,
        "Vs0": st.Vs0,
        "Vs_top": float(st.Vs[-1]),
        "iterations": st.iterations,
        "road_balance": (params.mu + params.k) * st.Us - st.Vs0,
        "flux_balance": slope0 - params.k * st.Us,
    }
    io.write_csv(out / "steady_profile.csv", ["y", "Vs"], zip(st.y.tolist(), st.Vs.tolist()))
    io.write_json(out / "steady.json", summary)
    return summary, False


def _linearized(cfg, out):
    params, grid = cfg.model(), _grid(cfg)
    lin = cfg.sections["linearized"]
    rep = crosscheck_linearized(params, lin["t"], floats(lin["xs"]), grid=grid, dt=lin["dt"])
    io.write_csv(out / "crosscheck.csv", rep.header(), rep.rows)
    spec = ContourSpec()
    t = lin["law_t"]
    rows = []
    for x in floats(lin["law_xs"]):
        ub = road_ubar(x, t, params, spec, log=True)
        la = float(log_asymptotic_u(x, t, params))
        rows.append((x, t, math.exp(ub - params.fprime0 * t), math.exp(la - params.fprime0 * t), math.exp(ub - la)))
    io.write_csv(out / "law.csv", ["x", "t", "scaled_ubar", "scaled_asymptote", "ratio"], rows)
    h = {f"{tt:g}": tt**1.5 * eval_h(tt, params) for tt in floats(lin["h_ts"])}
    summary = {"crosscheck": rep.summary(), "law_ratio": {f"{r[0]:g}": r[4] for r in rows}, "t32_h": h}
    io.write_json(out / "linearized.json", summary)
    return summary, rep.tainted


def _subsolution(cfg, out):
    params, grid = cfg.model(), _grid(cfg)
    sch, sub = cfg.sections["scheme"], cfg.sections["subsolution"]
    gamma = sub["gamma_fraction"] * derive_constants(params).gammaStar
    strip = build_strip_subsolution(params, gamma, epsilon=sub["epsilon"] or None)
    phi_rep = verify_phi(strip.phi, params.alpha)
    mov = moving_constants(strip)
    res = run(bump_initial(grid), SchemeConfig(dt=sch["dt"]), params, grid, sch["T"], _probes(sch, sub["t_fit"]))
    eps0 = fit_eps0(res.snapshots[0], grid, strip)
    below = check_below(res.snapshots, grid, strip, eps0)
    phi = strip.phi
    io.write_json(out / "phi.json", {"constants": {k: getattr(phi, k) for k in ("sigma", "epsilon", "A", "A1", "A2", "A3", "beta", "gamma", "delta")}, "report": phi_rep})
    io.write_json(out / "moving.json", {"L": strip.L, "L_min": strip.L_min, "h": strip.h, "C": strip.C, "report": mov})
    io.write_json(out / "below.json", below)
    summary = {"phi_passed": phi_rep.passed, "moving_passed": mov.passed, "below_passed": below.passed, "eps0": eps0}
    return summary, res.tainted


def _dirichlet(cfg, out):
    params, grid = cfg.model(), _grid(cfg)
    sch, dgc = cfg.sections["scheme"], cfg.sections["diagnostics"]
    Yg, Xg = np.meshgrid(grid.y, grid.x, indexing="ij")
    w0 = ((Xg**2 + (Yg - dgc["source_y"]) ** 2) <= dgc["source_r"] ** 2).astype(float)
    res = run_dirichlet(w0, params, grid, sch["T"], dt=sch["dt"], probes=_probes(sch))
    th = math.pi / 2
    trace = dg.extract_levels(res.snapshots, dgc["level"], grid, thetas=[th])
    trace.write_csv(out / "trace.csv", theta=th)
    fit = dg.fit_field_speed(trace, th)
    dg.heatmap(out / "field_final.pgm", res.snapshots[-1])
    summary = {"speed": fit, "cK": derive_constants(params).cK}
    io.write_json(out / "fit.json", summary)
    return summary, res.tainted


def _rescaled(cfg, out):
    params = cfg.model()
    r = cfg.sections["rescaled"]
    times = floats(r["times"])
    spec = ContourSpec()
    l = derive_constants(params).gammaStar
    level = r["level"]
    logd = lambda x, t: road_ubar(x, t, params, spec, log=True)
    ptimes = floats(r["profile_times"])

    def density(x, t):
        try:
            return math.exp(logd(x, t))
        except RepresentationError:
            return math.nan

    xi = np.geomspace(r["xi_min"], r["xi_max"], r["n_xi"])
    # physical level positions, then mapped into each frame
    pos = []
    for t in times:
        xa = (float(asymptotic_u(1.0, t, params)) / level) ** (1 / (1 + 2 * params.alpha))
        pos.append(dg.level_position_function(logd, t, level, xa / 10, xa * 10))
    pos = np.array(pos)
    summary = {"l": l, "level": level, "regimes": {}}
    rows = []
    for name, m in dg.regime_exponents(params.alpha).items():
        xis = pos * np.exp(-l * np.array(times)) * np.array(times) ** m
        view = dg.rescaled_view_function(density, ptimes, l, m, xi)
        io.write_csv(out / f"profiles_{name}.csv", ["t"] + [f"{s:.6g}" for s in xi], [[t] + list(p) for t, p in zip(ptimes, view.profiles)])
        d = dg.drift(xis)
        summary["regimes"][name] = {"m": m, "xi_levels": xis.tolist(), "drift": d}
        rows += [(name, m, t, x) for t, x in zip(times, xis)]
    io.write_csv(out / "levels.csv", ["regime", "m", "t", "xi_level"], rows)
    io.write_json(out / "rescaled.json", summary)
    return summary, False


RUNNERS = {
    "road-spreading": _road_spreading,
    "field-spreading": _field_spreading,
    "steady-state": _steady_state,
    "linearized-asymptotics": _linearized,
    "subsolution-verify": _subsolution,
    "dirichlet-benchmark": _dirichlet,
    "rescaled-view": _rescaled,
}


def run_scenario(cfg: RunConfig) -> dict:
    out = cfg.output
    out.mkdir(parents=True, exist_ok=True)
    np.random.seed(cfg.seed)
    (out / "effective.ini").write_text(cfg.to_ini())
    summary, tainted = RUNNERS[cfg.scenario](cfg, out)
    io.write_json(out / "summary.json", summary)
    files = sorted(p for p in out.iterdir() if p.is_file() and p.name != "manifest.json")
    manifest = {
        "scenario": cfg.scenario,
        "seed": cfg.seed,
        "tainted": bool(tainted),
        "config": {"scenario": cfg.scenario, "seed": cfg.seed, **cfg.sections},
        "files": {p.name: io.sha256_of(p) for p in files},
    }
    io.write_json(out / "manifest.json", manifest)
    return manifest


def _diag(kind, problems):
    print(json.dumps({"error": kind, "problems": problems}), file=sys.stderr)


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(prog="roadfront", description="Road-field invasion scenarios")
    sub = ap.add_subparsers(dest="cmd", required=True)
    p_run = sub.add_parser("run", help="run a scenario from an INI config")
    p_run.add_argument("config")
    p_val = sub.add_parser("validate", help="check a config and print the effective version")
    p_val.add_argument("config")
    sub.add_parser("list-scenarios", help="print scenario names and their required blocks")
    ap.add_argument("-v", "--verbose", action="store_true")
    args = ap.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")

    if args.cmd == "list-scenarios":
        for name, blocks in SCENARIOS.items():
            print(f"{name}: {', '.join(blocks)}")
        return 0
    try:
        cfg = load_config(args.config)
    except ConfigError as exc:
        _diag("validation", exc.problems)
        return 1
    if args.cmd == "validate":
        print(cfg.to_ini(), end="")
        return 0
    try:
        manifest = run_scenario(cfg)
    except (SolverError, ConstructionError, dg.FitError, dg.EmptyTraceError, ArithmeticError, RuntimeError, ValueError) as exc:
        _diag("runtime", [f"{type(exc).__name__}: {exc}"])
        return 2
    print(json.dumps({"output": str(cfg.output), "tainted": manifest["tainted"], "files": len(manifest["files"])}))
    return 0
