"""Scenario runner.

Parses key=value configuration files, executes the six canonical closed-loop
experiments (variational integrator modes and the sampled digital-controller
modes), and writes delimited trajectories, a force schedule, rendered PNG
figures, and a machine-readable summary of verdicts.

Exit codes: 0 all verdicts pass, 1 numerical failure, 2 configuration error.
"""
from __future__ import annotations

import argparse
import json
import math
import sys
from dataclasses import asdict, dataclass, replace
from pathlib import Path

import numpy as np

from .cartpend import CartPendulumModel, ModelParameters
from .core import (
    ConfigurationPoint,
    SolverFailure,
    SolverSettings,
    Trajectory,
    forced_del_residual,
    initialize_from_state,
    simulate,
)
from .mpc import (
    MPC_MODES,
    PlantSimulator,
    make_control_law,
    measure_cycle_time,
    run_digital_controller,
)
from .plots import render_run_figures
from .shaping import (
    ConfigurationError,
    DegenerateGainError,
    assemble_closed_loop,
    matched_gains,
)
from .stability import (
    DegenerateLinearizationError,
    damped_kinetic_map,
    kinetic_spectral_condition,
    linearized_potential_map,
    potential_spectral_condition,
    verify_matching_equivalence,
)

DEL_MODES = ("kinetic", "kinetic+diss", "potential", "potential+diss")
ALL_MODES = DEL_MODES + MPC_MODES
POTENTIAL_FAMILY = ("potential", "potential+diss", "mpc-potential")

KEY_ALIASES = {"κ": "kappa", "ρ": "rho", "ε": "epsilon", "ψ": "psi"}
FLOAT_KEYS = ("m", "M", "l", "psi", "g", "h", "kappa", "rho", "epsilon", "D",
              "p", "phi0", "s0", "dphi0", "ds0", "Tf", "tol")
KNOWN_KEYS = FLOAT_KEYS + ("mode", "N")

# mode-specific dissipation gains used when the config omits D; these are
# artifact choices (visible decay within the standard run lengths), not
# physically distinguished values
D_DEFAULTS = {
    "kinetic": 0.0,
    "kinetic+diss": 0.05,
    "potential": 0.0,
    "potential+diss": 0.001,
    "mpc-kinetic": 0.0,
    "mpc-potential": 0.0024,
}


class ConfigError(ValueError):
    """Configuration text rejected; message names the key and line."""


@dataclass(frozen=True)
class ScenarioConfig:
    params: ModelParameters
    mode: str
    kappa: float
    rho: float
    epsilon: float
    D: float
    p: float
    phi0: float
    s0: float
    dphi0: float
    ds0: float
    n_steps: int
    tol: float
    seed: int = 0

    def gains(self):
        return matched_gains(self.params, self.kappa, rho=self.rho,
                             epsilon=self.epsilon, D=self.D, p=self.p)

    def echo(self) -> dict:
        pr = self.params
        return {
            "m": pr.m, "M": pr.M, "l": pr.l, "psi": pr.psi, "g": pr.g,
            "h": pr.h, "mode": self.mode, "kappa": self.kappa,
            "rho": self.rho, "epsilon": self.epsilon, "D": self.D,
            "p": self.p, "phi0": self.phi0, "s0": self.s0,
            "dphi0": self.dphi0, "ds0": self.ds0, "N": self.n_steps,
            "Tf": self.n_steps * pr.h, "tol": self.tol, "seed": self.seed,
        }


def _parse_lines(text: str) -> tuple[dict, dict]:
    values: dict[str, str] = {}
    lines: dict[str, int] = {}
    for i, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {i}: expected key=value, got {line!r}")
        key, _, val = line.partition("=")
        key = KEY_ALIASES.get(key.strip(), key.strip())
        val = val.strip()
        if key not in KNOWN_KEYS:
            raise ConfigError(f"line {i}: unknown key {key!r}")
        if key in values:
            raise ConfigError(
                f"duplicate key {key!r} on lines {lines[key]} and {i}")
        if not val:
            raise ConfigError(f"line {i}: key {key!r} has an empty value")
        values[key] = val
        lines[key] = i
    return values, lines


def _typed(values: dict, lines: dict) -> dict:
    out: dict = {}
    for key, val in values.items():
        if key == "mode":
            if val not in ALL_MODES:
                raise ConfigError(
                    f"line {lines[key]}: key 'mode' must be one of "
                    f"{', '.join(ALL_MODES)}; got {val!r}")
            out[key] = val
        elif key == "N":
            try:
                out[key] = int(val)
            except ValueError:
                raise ConfigError(
                    f"line {lines[key]}: key 'N' expects an integer, "
                    f"got {val!r}") from None
        else:
            try:
                out[key] = float(val)
            except ValueError:
                raise ConfigError(
                    f"line {lines[key]}: key {key!r} expects a number, "
                    f"got {val!r}") from None
    return out


def _where(lines: dict, key: str) -> str:
    return f"line {lines[key]}: " if key in lines else ""


def build_config(typed: dict, lines: dict | None = None, seed: int = 0) -> ScenarioConfig:
    """Validate resolved key values and fill mode-dependent defaults."""
    lines = lines or {}
    for key in ("m", "M", "l", "mode", "kappa"):
        if key not in typed:
            raise ConfigError(f"missing required key {key!r}")
    mode = typed["mode"]
    if mode in POTENTIAL_FAMILY:
        for key in ("rho", "epsilon"):
            if key not in typed:
                raise ConfigError(
                    f"missing required key {key!r} (mode {mode!r})")
        if typed["rho"] > 0.0:
            raise ConfigError(
                f"{_where(lines, 'rho')}rho={typed['rho']} violates the "
                "asymptotic-stability requirement rho < 0 for potential "
                "shaping")
    try:
        params = ModelParameters(
            m=typed["m"], M=typed["M"], l=typed["l"],
            psi=typed.get("psi", 0.0), g=typed.get("g", 9.81),
            h=typed.get("h", 0.05))
    except ValueError as exc:
        raise ConfigError(f"invalid model parameters: {exc}") from None

    n_key = "N" in typed
    tf_key = "Tf" in typed
    if not n_key and not tf_key:
        raise ConfigError("missing required key 'N' (or 'Tf')")
    if n_key:
        n_steps = typed["N"]
        if n_steps < 0:
            raise ConfigError(f"{_where(lines, 'N')}key 'N' must be >= 0")
        if tf_key and abs(n_steps * params.h - typed["Tf"]) > 1e-9 * max(1.0, abs(typed["Tf"])):
            raise ConfigError(
                f"{_where(lines, 'Tf')}keys 'N' and 'Tf' disagree: "
                f"N*h = {n_steps * params.h} but Tf = {typed['Tf']}")
    else:
        ratio = typed["Tf"] / params.h
        n_steps = int(round(ratio))
        if n_steps < 0 or abs(n_steps - ratio) > 1e-9 * max(1.0, abs(ratio)):
            raise ConfigError(
                f"{_where(lines, 'Tf')}key 'Tf' must be a nonnegative "
                f"integer multiple of h = {params.h}")
    if mode in MPC_MODES and n_steps < 5:
        raise ConfigError(
            f"mode {mode!r} needs at least 5 control intervals; got N={n_steps}")

    tol = typed.get("tol", 1e-8 if mode in MPC_MODES else 1e-10)
    if tol <= 0.0 or not math.isfinite(tol):
        raise ConfigError(f"{_where(lines, 'tol')}key 'tol' must be positive")

    cfg = ScenarioConfig(
        params=params, mode=mode, kappa=typed["kappa"],
        rho=typed.get("rho", 1.0), epsilon=typed.get("epsilon", 0.0),
        D=typed.get("D", D_DEFAULTS[mode]), p=typed.get("p", 0.0),
        phi0=typed.get("phi0", 0.1), s0=typed.get("s0", 0.0),
        dphi0=typed.get("dphi0", 0.0), ds0=typed.get("ds0", 0.0),
        n_steps=n_steps, tol=tol, seed=seed)
    try:
        cfg.gains()
    except (DegenerateGainError, ConfigurationError, ValueError) as exc:
        raise ConfigError(f"{_where(lines, 'kappa')}invalid gains: {exc}") from None
    return cfg


def parse_config(text: str, seed: int = 0) -> ScenarioConfig:
    values, lines = _parse_lines(text)
    return build_config(_typed(values, lines), lines, seed=seed)


@dataclass
class RunSummary:
    mode: str
    n_steps: int
    seed: int
    final_phi_abs: float | None = None
    final_s_abs: float | None = None
    max_residual: float | None = None
    momentum_drift: float | None = None
    energy_band: float | None = None
    spectral_radius: float | None = None
    kappa_crit: float | None = None
    matching_deviation: float | None = None
    cycle_mean: float | None = None
    cycle_p99: float | None = None
    cycle_real_time: bool | None = None
    solver_failure_step: int | None = None
    error: str | None = None

    def passes(self) -> bool:
        if self.solver_failure_step is not None or self.error is not None:
            return False
        required = (self.final_phi_abs, self.final_s_abs, self.max_residual,
                    self.momentum_drift, self.energy_band)
        if not all(v is not None and math.isfinite(v) for v in required):
            return False
        optional = (self.spectral_radius, self.kappa_crit,
                    self.matching_deviation, self.cycle_mean, self.cycle_p99)
        return all(v is None or math.isfinite(v) for v in optional)


def _fmt(value) -> str:
    if value is None:
        return ""
    return repr(float(value))


def write_csv(rows, path: Path) -> None:
    """Trajectory table: header k,t,phi,s,u,p_k,E; full round-trip floats,
    empty cells for absent values, LF line endings."""
    try:
        with open(path, "w", newline="\n") as fh:
            fh.write("k,t,phi,s,u,p_k,E\n")
            for k, t, phi, s, u, p, e in rows:
                fh.write(f"{k},{_fmt(t)},{_fmt(phi)},{_fmt(s)},"
                         f"{_fmt(u)},{_fmt(p)},{_fmt(e)}\n")
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc}") from exc


def write_force_csv(entries, path: Path) -> None:
    try:
        with open(path, "w", newline="\n") as fh:
            fh.write("interval_start_time,u_held\n")
            for t, u in entries:
                fh.write(f"{_fmt(t)},{_fmt(u)}\n")
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc}") from exc


def _trajectory_rows(traj: Trajectory) -> list:
    n = len(traj.points) - 1
    rows = []
    for k, q in enumerate(traj.points):
        u = traj.us[k - 1] if 1 <= k <= n - 1 and traj.us else None
        p = traj.p[k] if k < len(traj.p) else None
        e = traj.E[k] if k < len(traj.E) else None
        rows.append((k, k * traj.h, q.phi, q.s, u, p, e))
    return rows


def _family_spectral_radius(cfg: ScenarioConfig) -> float | None:
    gains = cfg.gains()
    try:
        if cfg.mode in POTENTIAL_FAMILY:
            # map-level friction equivalent to loop dissipation gain D
            d_map = 0.0 if cfg.mode in MPC_MODES else abs(cfg.rho) * cfg.D
            return linearized_potential_map(cfg.params, gains, D=d_map).spectral_radius()
        g = gains if cfg.mode not in MPC_MODES else replace(gains, D=0.0)
        return damped_kinetic_map(cfg.params, g).spectral_radius()
    except (DegenerateLinearizationError, DegenerateGainError):
        return None


def _matching_deviation(cfg: ScenarioConfig, q0: ConfigurationPoint,
                        q1: ConfigurationPoint) -> float | None:
    if cfg.D != 0.0 or cfg.n_steps < 2:
        return None
    if cfg.mode == "kinetic" and cfg.params.psi == 0.0:
        variant = "thm1"
    elif cfg.mode == "potential":
        variant = "thm3"
    else:
        return None
    n = min(cfg.n_steps, 200)
    report = verify_matching_equivalence(
        cfg.params, cfg.gains(), variant, q0, q1, n,
        SolverSettings(tol=cfg.tol))
    return report.dev_phi if variant == "thm1" else report.dev


def _del_run(cfg: ScenarioConfig, summary: RunSummary, out_dir: Path) -> None:
    model = CartPendulumModel(cfg.params)
    gains = cfg.gains()
    force = assemble_closed_loop(cfg.params, gains, cfg.mode)
    settings = SolverSettings(tol=cfg.tol)
    q0 = ConfigurationPoint(cfg.phi0, cfg.s0)

    if cfg.n_steps == 0:
        rows = [(0, 0.0, q0.phi, q0.s, None, None, None)]
        write_csv(rows, out_dir / "trajectory.csv")
        write_force_csv([], out_dir / "forces.csv")
        summary.final_phi_abs = abs(q0.phi)
        summary.final_s_abs = abs(q0.s)
        summary.max_residual = 0.0
        summary.momentum_drift = 0.0
        summary.energy_band = 0.0
        render_run_figures(out_dir, np.array([0.0]), np.array([q0.phi]),
                           np.array([q0.s]), np.array([]))
        return

    q1 = initialize_from_state(model, force, q0, (cfg.dphi0, cfg.ds0), settings)
    traj = simulate(model, force, q0, q1, cfg.n_steps, settings)
    pts = traj.points

    resid = 0.0
    for k in range(1, len(pts) - 1):
        r = forced_del_residual(model, force, pts[k - 1], pts[k], pts[k + 1])
        resid = max(resid, float(np.max(np.abs(r))))
    p_vals = [v for v in traj.p if v is not None]
    e_vals = [v for v in traj.E if v is not None]

    summary.final_phi_abs = abs(pts[-1].phi)
    summary.final_s_abs = abs(pts[-1].s)
    summary.max_residual = resid
    summary.momentum_drift = (max(abs(v - p_vals[0]) for v in p_vals)
                              if p_vals else 0.0)
    summary.energy_band = (max(e_vals) - min(e_vals)) if e_vals else 0.0
    summary.matching_deviation = _matching_deviation(cfg, q0, q1)

    write_csv(_trajectory_rows(traj), out_dir / "trajectory.csv")
    write_force_csv(
        [((k + 1) * traj.h, u) for k, u in enumerate(traj.us) if u is not None],
        out_dir / "forces.csv")
    t = traj.h * np.arange(len(pts))
    render_run_figures(out_dir, t, traj.phi(), traj.s(),
                       np.array([u for u in traj.us if u is not None]),
                       np.array(p_vals), np.array(e_vals))


def _mpc_run(cfg: ScenarioConfig, summary: RunSummary, out_dir: Path) -> None:
    model = CartPendulumModel(cfg.params)
    law = make_control_law(cfg.params, cfg.gains(), cfg.mode)
    z0 = (cfg.phi0, cfg.s0, cfg.dphi0, cfg.ds0)
    run = run_digital_controller(cfg.params, law, z0,
                                 t_final=cfg.n_steps * cfg.params.h,
                                 settings=SolverSettings(tol=cfg.tol))
    n = run.forces.size
    states = run.states

    plant = PlantSimulator(cfg.params)
    resid = 0.0
    for k in range(n):
        replay = plant.hold(states[k], float(run.forces[k]))
        resid = max(resid, float(np.max(np.abs(replay - states[k + 1]))))

    pts = [ConfigurationPoint(float(z[0]), float(z[1])) for z in states]
    p_vals = [model.momentum(pts[k], pts[k + 1]) for k in range(n)]
    e_vals = [model.energy(pts[k], pts[k + 1]) for k in range(n)]

    summary.final_phi_abs = abs(pts[-1].phi)
    summary.final_s_abs = abs(pts[-1].s)
    summary.max_residual = resid
    summary.momentum_drift = max(abs(v - p_vals[0]) for v in p_vals)
    summary.energy_band = max(e_vals) - min(e_vals)
    stats = measure_cycle_time(run)
    summary.cycle_mean = stats.mean
    summary.cycle_p99 = stats.p99
    summary.cycle_real_time = stats.real_time

    rows = []
    for k in range(n + 1):
        u = float(run.forces[k]) if k < n else None
        p = p_vals[k] if k < n else None
        e = e_vals[k] if k < n else None
        rows.append((k, k * run.h, pts[k].phi, pts[k].s, u, p, e))
    write_csv(rows, out_dir / "trajectory.csv")
    write_force_csv([(k * run.h, float(run.forces[k])) for k in range(n)],
                    out_dir / "forces.csv")
    render_run_figures(out_dir, run.times(), np.array([q.phi for q in pts]),
                       np.array([q.s for q in pts]), run.forces,
                       np.array(p_vals), np.array(e_vals))


def run_scenario(cfg: ScenarioConfig, out_dir: Path) -> RunSummary:
    """Execute one scenario and write trajectory.csv, forces.csv, figures,
    and summary.json into out_dir."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    summary = RunSummary(mode=cfg.mode, n_steps=cfg.n_steps, seed=cfg.seed)
    summary.kappa_crit = kinetic_spectral_condition(cfg.params).kappa_crit
    summary.spectral_radius = _family_spectral_radius(cfg)
    try:
        if cfg.mode in MPC_MODES:
            _mpc_run(cfg, summary, out_dir)
        else:
            _del_run(cfg, summary, out_dir)
    except SolverFailure as exc:
        summary.solver_failure_step = exc.step_index if exc.step_index is not None else -1
        summary.error = str(exc)
    except (DegenerateGainError, DegenerateLinearizationError,
            ConfigurationError) as exc:
        summary.error = str(exc)

    payload = {"config": cfg.echo(), "summary": asdict(summary),
               "passes": summary.passes()}
    with open(out_dir / "summary.json", "w", newline="\n") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return summary


def analyze_config(cfg: ScenarioConfig) -> dict:
    """Stability predicates and spectra only; no simulation."""
    params = cfg.params
    gains = cfg.gains()
    cond = kinetic_spectral_condition(params)
    report: dict = {
        "mode": cfg.mode,
        "kappa": cfg.kappa,
        "kappa_crit": cond.kappa_crit,
        "sigma_low": cond.sigma_low,
        "kinetic_condition_holds": cond.holds_for_kappa(cfg.kappa),
    }
    verdicts = []
    try:
        radius = damped_kinetic_map(params, replace(gains, D=0.0)).spectral_radius()
        report["kinetic_radius_undamped"] = radius
        on_circle = abs(radius - 1.0) <= 1e-8
        report["kinetic_predicate_matches_spectrum"] = (
            cond.holds_for_kappa(cfg.kappa) == on_circle)
        verdicts.append(report["kinetic_predicate_matches_spectrum"])
        if cfg.D:
            report["kinetic_radius_damped"] = damped_kinetic_map(
                params, replace(gains, D=cfg.D)).spectral_radius()
    except DegenerateLinearizationError as exc:
        report["kinetic_radius_error"] = str(exc)

    if cfg.mode in POTENTIAL_FAMILY:
        cert = potential_spectral_condition(params, gains)
        lin = linearized_potential_map(params, gains, D=0.0)
        report["potential_certificate"] = {
            "satisfied": bool(cert),
            "sigma_ok": cert.sigma_ok,
            "rho_ok": cert.rho_ok,
            "epsilon_ok": cert.epsilon_ok,
            "energy_negative_definite": cert.energy_negative_definite,
        }
        report["potential_radius_undamped"] = lin.spectral_radius()
        report["potential_on_unit_circle"] = lin.on_unit_circle()
        report["potential_predicate_matches_spectrum"] = (
            bool(cert) == lin.on_unit_circle())
        verdicts.append(report["potential_predicate_matches_spectrum"])
        d_map = abs(cfg.rho) * cfg.D
        if d_map:
            report["potential_radius_damped"] = linearized_potential_map(
                params, gains, D=d_map).spectral_radius()
    report["passes"] = all(verdicts) if verdicts else True
    return report


def _load(path: Path, seed: int) -> ScenarioConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    return parse_config(text, seed=seed)


def _print_summary(summary: RunSummary) -> None:
    for key, value in asdict(summary).items():
        if value is not None:
            print(f"{key}: {value}")
    print("verdict: PASS" if summary.passes() else "verdict: FAIL")


def _cmd_run(args) -> int:
    cfg = _load(args.config, args.seed)
    out_dir = Path(args.out) if args.out else Path(args.config).with_suffix("")
    summary = run_scenario(cfg, out_dir)
    _print_summary(summary)
    print(f"artifacts: {out_dir}")
    return 0 if summary.passes() else 1


def _cmd_sweep(args) -> int:
    cfg = _load(args.config, args.seed)
    key = KEY_ALIASES.get(args.key, args.key)
    if key not in FLOAT_KEYS:
        raise ConfigError(f"sweep key {key!r} is not a numeric config key")
    out_root = Path(args.out) if args.out else Path(args.config).with_suffix("")
    out_root.mkdir(parents=True, exist_ok=True)
    base = cfg.echo()
    base.pop("Tf")
    base.pop("seed")
    rows = []
    worst = 0
    for value in args.values:
        typed = dict(base)
        if key == "Tf":
            typed.pop("N", None)
        typed[key] = value
        try:
            sub_cfg = build_config(typed, seed=args.seed)
        except ConfigError as exc:
            print(f"{key}={value}: config error: {exc}", file=sys.stderr)
            rows.append((value, "", "config-error"))
            worst = 2
            continue
        sub_dir = out_root / f"{key}={value!r}"
        summary = run_scenario(sub_cfg, sub_dir)
        ok = summary.passes()
        rows.append((value, str(sub_dir), "pass" if ok else "fail"))
        if not ok:
            worst = max(worst, 1)
        print(f"{key}={value:g}: {'PASS' if ok else 'FAIL'} "
              f"(final |phi|={summary.final_phi_abs}, final |s|={summary.final_s_abs})")
    with open(out_root / "sweep_summary.csv", "w", newline="\n") as fh:
        fh.write(f"{key},out_dir,verdict\n")
        for value, sub_dir, verdict in rows:
            fh.write(f"{_fmt(value)},{sub_dir},{verdict}\n")
    return worst


def _cmd_analyze(args) -> int:
    cfg = _load(args.config, args.seed)
    report = analyze_config(cfg)
    text = json.dumps(report, indent=2, sort_keys=True)
    print(text)
    if args.out:
        out_dir = Path(args.out)
        out_dir.mkdir(parents=True, exist_ok=True)
        with open(out_dir / "analysis.json", "w", newline="\n") as fh:
            fh.write(text + "\n")
    return 0 if report["passes"] else 1


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="delshape",
        description="Closed-loop cart-pendulum scenarios on a variational "
                    "integrator, with stability certificates and a sampled "
                    "digital controller.")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="execute a scenario config")
    p_run.add_argument("config")
    p_run.set_defaults(func=_cmd_run)

    p_sweep = sub.add_parser("sweep", help="re-run a config over a gain range")
    p_sweep.add_argument("config")
    p_sweep.add_argument("--key", required=True)
    p_sweep.add_argument("--values", required=True, nargs="+", type=float)
    p_sweep.set_defaults(func=_cmd_sweep)

    p_an = sub.add_parser("analyze", help="stability predicates only, no simulation")
    p_an.add_argument("config")
    p_an.set_defaults(func=_cmd_analyze)

    for p in (p_run, p_sweep, p_an):
        p.add_argument("--out", default=None, help="output directory")
        p.add_argument("--seed", type=int, default=0,
                       help="seed recorded with the run (reserved for "
                            "optional sensing noise)")

    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (SolverFailure, DegenerateGainError, DegenerateLinearizationError,
            ConfigurationError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
