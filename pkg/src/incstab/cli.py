"""Command-line driver.

Subcommands: gain-bound, simulate, pair, check-lyapunov, verify-bound,
demo-pendulum.  All outputs are deterministic for a fixed (config, seed);
summaries carry the tool version, the config hash, and the seeds used.

Exit codes: 0 ok/PASS, 1 config error, 2 gain violation, 3 bound FAIL,
4 numerical divergence.
"""
from __future__ import annotations

import argparse
import json
import os
import sys as _sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .backstepping import comparison_functions, feedback_coefficient, synthesize, transform
from .config import ExperimentConfig, build_gains, build_inputs, build_model, load_config
from .errors import ConfigError, DivergenceError, GainBoundError
from .integrator import sample_noise, simulate_pair, simulate
from .lyapunov import sample_dissipation
from .montecarlo import estimate_moment, verify_bound
from .pendulum import PendulumParams

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_GAIN = 2
EXIT_BOUND = 3
EXIT_DIVERGED = 4

OUTPUT_DIR_ENV = "INCSTAB_OUT"


def _resolve_outdir(args, config: ExperimentConfig | None) -> Path:
    if args.out is not None:
        out = Path(args.out)
    elif os.environ.get(OUTPUT_DIR_ENV):
        out = Path(os.environ[OUTPUT_DIR_ENV])
    elif config is not None and config.output_dir:
        out = Path(config.output_dir)
    else:
        out = Path("incstab-out")
    out.mkdir(parents=True, exist_ok=True)
    return out


def _summary_base(command: str, config: ExperimentConfig, seed: int, args) -> dict:
    return {
        "tool": "incstab",
        "version": __version__,
        "command": command,
        "config_sha256": config.sha256(),
        "seed": seed,
        "jobs": args.jobs,
    }


def _controls_along(ctrl, traj, signal):
    """Recompute the actual control force applied along a closed-loop trajectory."""
    n = traj.states.shape[1] // 2
    q = traj.states[:-1, :n]
    p = traj.states[:-1, n:]
    return ctrl(q, p, traj.applied_inputs)


def _prepare(config: ExperimentConfig):
    sys_, params, box = build_model(config)
    gains = build_gains(config, sys_)
    ctrl = synthesize(sys_, gains)
    return sys_, params, box, gains, ctrl


def cmd_gain_bound(args) -> int:
    config = load_config(args.config)
    seed = args.seed if args.seed is not None else config.seed
    outdir = _resolve_outdir(args, config)
    t0 = time.perf_counter()
    sys_, _, _, = build_model(config)
    gs = config.gains_spec
    from .backstepping import gain_lower_bound

    c = sys_.constants
    bound = gain_lower_bound(
        gs["k"], c.L1, c.L2, c.Lsigma, c.Lrho,
        sys_.total_rate, sys_.dof, sys_.brownian_dim, gs["eps1"], gs["eps2"],
    )
    report = _summary_base("gain-bound", config, seed, args)
    report.update({
        "k": gs["k"], "kappa1": gs["kappa1"], "eps1": gs["eps1"], "eps2": gs["eps2"],
        "gain_lower_bound": bound,
        "constants": {"L1": c.L1, "L2": c.L2, "Lsigma": c.Lsigma, "Lrho": c.Lrho,
                      "lam": sys_.total_rate},
    })
    try:
        gains = build_gains(config, sys_)
    except GainBoundError as exc:
        report.update({"pass": False, "margin": exc.margin, "error": str(exc)})
        report["wall_time_s"] = time.perf_counter() - t0
        (outdir / "gain_bound.json").write_text(json.dumps(report, indent=2, sort_keys=True) + "\n")
        print(json.dumps(report, indent=2, sort_keys=True))
        return EXIT_GAIN
    report.update({
        "pass": True,
        "margin": gains.kappa1 - bound,
        "derived": {
            "r1": gains.r1, "s1": gains.s1, "r2": gains.r2,
            "s2": None if gains.s2 == float("inf") else gains.s2,
            "c1": gains.c1, "c2": gains.c2, "c3": gains.c3, "kappa": gains.kappa,
            "feedback_coefficient": feedback_coefficient(sys_, gains),
            "beta_decay_rate": gains.kappa,
            "gamma_coefficient": comparison_functions(gains).gamma_coefficient(),
        },
    })
    report["wall_time_s"] = time.perf_counter() - t0
    (outdir / "gain_bound.json").write_text(json.dumps(report, indent=2, sort_keys=True) + "\n")
    print(json.dumps(report, indent=2, sort_keys=True))
    return EXIT_OK


def cmd_simulate(args) -> int:
    config = load_config(args.config)
    seed = args.seed if args.seed is not None else config.seed
    outdir = _resolve_outdir(args, config)
    t0 = time.perf_counter()
    sys_, _, _, gains, ctrl = _prepare(config)
    if config.x0 is None:
        raise ConfigError("missing required section", "initial.x0")
    u, _ = build_inputs(config, sys_.dof)
    from .model import to_jump_diffusion

    closed = to_jump_diffusion(sys_, ctrl)
    sim = config.simulation
    steps = int(round(sim["t_final"] / sim["dt"]))
    noise = sample_noise(seed, steps, sim["dt"], sys_.brownian_dim, sys_.rates)
    traj = simulate(closed, u, config.x0, noise)
    traj.write_csv(outdir / "trajectory.csv")
    outputs = ["trajectory.csv"]
    if not args.no_figures:
        from .report import render_pair_figure

        controls = _controls_along(ctrl, traj, u)
        render_pair_figure(traj, traj, controls, controls, outdir / "trajectory.png")
        outputs.append("trajectory.png")
    summary = _summary_base("simulate", config, seed, args)
    summary.update({
        "pass": True,
        "steps": steps,
        "dt": sim["dt"],
        "final_state": [float(v) for v in traj.states[-1]],
        "outputs": outputs,
        "wall_time_s": time.perf_counter() - t0,
    })
    from .report import write_summary

    write_summary(outdir / "summary.json", summary)
    print(f"simulate: {steps} steps -> {outdir}/trajectory.csv")
    return EXIT_OK


def cmd_pair(args) -> int:
    config = load_config(args.config)
    seed = args.seed if args.seed is not None else config.seed
    outdir = _resolve_outdir(args, config)
    t0 = time.perf_counter()
    sys_, _, _, gains, ctrl = _prepare(config)
    if config.x0 is None or config.x0_prime is None:
        raise ConfigError("pair simulation needs both x0 and x0_prime", "initial")
    u, up = build_inputs(config, sys_.dof)
    from .model import to_jump_diffusion

    closed = to_jump_diffusion(sys_, ctrl)
    sim = config.simulation
    steps = int(round(sim["t_final"] / sim["dt"]))
    noise = sample_noise(seed, steps, sim["dt"], sys_.brownian_dim, sys_.rates)
    traj_a, traj_b = simulate_pair(closed, u, up, config.x0, config.x0_prime, noise)
    traj_a.write_csv(outdir / "trajectory_a.csv")
    traj_b.write_csv(outdir / "trajectory_b.csv")
    outputs = ["trajectory_a.csv", "trajectory_b.csv"]
    from .backstepping import metric

    dist = metric(sys_, gains, traj_a.states, traj_b.states)
    if not args.no_figures:
        from .report import render_pair_figure

        ca = _controls_along(ctrl, traj_a, u)
        cb = _controls_along(ctrl, traj_b, up)
        render_pair_figure(traj_a, traj_b, ca, cb, outdir / "pair.png")
        outputs.append("pair.png")
    summary = _summary_base("pair", config, seed, args)
    summary.update({
        "pass": True,
        "initial_metric": float(dist[0]),
        "final_metric": float(dist[-1]),
        "outputs": outputs,
        "wall_time_s": time.perf_counter() - t0,
    })
    from .report import write_summary

    write_summary(outdir / "summary.json", summary)
    print(f"pair: metric {dist[0]:.6g} -> {dist[-1]:.6g} over T={sim['t_final']}")
    return EXIT_OK


def cmd_check_lyapunov(args) -> int:
    config = load_config(args.config)
    seed = args.seed if args.seed is not None else config.seed
    outdir = _resolve_outdir(args, config)
    t0 = time.perf_counter()
    sys_, _, box, gains, ctrl = _prepare(config)
    ver = config.verification
    sweep = sample_dissipation(
        sys_, ctrl, box, ver["samples"], seed, input_bound=ver["input_bound"]
    )
    n = sys_.dof
    header = (
        [f"x{i+1}" for i in range(2 * n)] + [f"xp{i+1}" for i in range(2 * n)]
        + [f"u{j+1}" for j in range(n)] + [f"up{j+1}" for j in range(n)]
        + ["drift_term", "trace_term", "jump_term", "total", "rhs_bound", "margin"]
    )
    bd = sweep.breakdown
    with open(outdir / "lyapunov_margins.csv", "w", newline="\n") as fh:
        fh.write(",".join(header) + "\n")
        for i in range(ver["samples"]):
            row = [
                *sweep.states[i], *sweep.states_prime[i],
                *sweep.inputs[i], *sweep.inputs_prime[i],
                bd.drift_term[i], bd.trace_term[i], bd.jump_term[i],
                bd.total[i], bd.rhs_bound[i], bd.margin[i],
            ]
            fh.write(",".join(f"{v:.17g}" for v in row) + "\n")
    outputs = ["lyapunov_margins.csv"]
    if not args.no_figures:
        from .report import render_margin_figure

        render_margin_figure(sweep, outdir / "lyapunov_margins.png")
        outputs.append("lyapunov_margins.png")
    scaled = sweep.scaled_margin
    worst = int(np.argmin(scaled))
    passed = bool(scaled[worst] >= -ver["margin_tolerance"])
    summary = _summary_base("check-lyapunov", config, seed, args)
    summary.update({
        "pass": passed,
        "samples": ver["samples"],
        "min_margin": sweep.min_margin,
        "min_scaled_margin": float(scaled[worst]),
        "margin_tolerance": ver["margin_tolerance"],
        "argmin_state": [float(v) for v in sweep.states[sweep.argmin_index]],
        "argmin_state_prime": [float(v) for v in sweep.states_prime[sweep.argmin_index]],
        "outputs": outputs,
        "wall_time_s": time.perf_counter() - t0,
    })
    from .report import write_summary

    write_summary(outdir / "summary.json", summary)
    print(
        f"check-lyapunov: min margin {sweep.min_margin:.6g} over {ver['samples']} pairs "
        f"-> {'PASS' if passed else 'FAIL'}"
    )
    return EXIT_OK if passed else EXIT_BOUND


def cmd_verify_bound(args) -> int:
    config = load_config(args.config)
    seed = args.seed if args.seed is not None else config.seed
    outdir = _resolve_outdir(args, config)
    t0 = time.perf_counter()
    sys_, _, _, gains, ctrl = _prepare(config)
    if config.x0 is None or config.x0_prime is None:
        raise ConfigError("bound verification needs both x0 and x0_prime", "initial")
    u, up = build_inputs(config, sys_.dof)
    sim = config.simulation
    stats = estimate_moment(
        sys_, ctrl, gains, config.x0, config.x0_prime, u, up,
        realizations=sim["realizations"], t_final=sim["t_final"], dt=sim["dt"],
        seed=seed, record_stride=sim["record_stride"],
        chunk_size=sim["chunk_size"], jobs=args.jobs,
    )
    stats.write_csv(outdir / "moment.csv")
    outputs = ["moment.csv"]
    report = verify_bound(stats, slack_sigmas=config.verification["slack_sigmas"])
    if not args.no_figures:
        from .report import render_moment_figure

        render_moment_figure(stats, outdir / "moment.png")
        outputs.append("moment.png")
    summary = _summary_base("verify-bound", config, seed, args)
    summary.update({
        "pass": report.passed,
        "realizations": stats.realizations,
        "diverged": list(stats.diverged),
        "worst_margin": report.worst_margin,
        "worst_time": report.worst_time,
        "slack_sigmas": report.slack_sigmas,
        "initial_moment": float(stats.mean_dk[0]),
        "outputs": outputs,
        "wall_time_s": time.perf_counter() - t0,
    })
    from .report import write_summary

    write_summary(outdir / "summary.json", summary)
    print(
        f"verify-bound: worst margin {report.worst_margin:.6g} at t={report.worst_time:.3g} "
        f"-> {'PASS' if report.passed else 'FAIL'}"
    )
    return EXIT_OK if report.passed else EXIT_BOUND


DEMO_CONFIG = {
    "model": {"name": "pendulum"},
    "gains": {"k": 2, "kappa1": 4.0, "eps1": 0.5},
    "simulation": {"t_final": 5.0, "dt": 0.001, "realizations": 5000, "record_stride": 10},
    "initial": {"x0": [0.5, -0.4, -2.5, 3.0], "x0_prime": [-0.5, 0.6, 1.0, -0.5]},
    "inputs": {"u": {"family": "sinusoid", "amplitude": 0.5, "angular_frequency": 1.0}},
    "seed": 20260808,
}


def cmd_demo_pendulum(args) -> int:
    """Full reproduction run with the case-study defaults.

    Emits fig2_trajectories.csv (one coupled pair over T=10) and
    fig3_moment.csv (ensemble moment vs bound over T=5) plus figures.
    """
    doc = json.loads(json.dumps(DEMO_CONFIG))
    if args.realizations is not None:
        doc["simulation"]["realizations"] = args.realizations
    from .config import parse_config

    config = parse_config(doc)
    seed = args.seed if args.seed is not None else config.seed
    outdir = _resolve_outdir(args, config)
    t0 = time.perf_counter()
    sys_, params, box, gains, ctrl = _prepare(config)
    u, up = build_inputs(config, sys_.dof)
    from .model import to_jump_diffusion

    closed = to_jump_diffusion(sys_, ctrl)

    # coupled pair over a longer horizon for the trajectory figure
    pair_steps = int(round(10.0 / config.simulation["dt"]))
    noise = sample_noise(seed, pair_steps, config.simulation["dt"],
                         sys_.brownian_dim, sys_.rates)
    traj_a, traj_b = simulate_pair(closed, u, up, config.x0, config.x0_prime, noise)
    n = sys_.dof
    ca = _controls_along(ctrl, traj_a, u)
    cb = _controls_along(ctrl, traj_b, up)
    with open(outdir / "fig2_trajectories.csv", "w", newline="\n") as fh:
        names = [f"q{i+1}" for i in range(n)] + [f"p{i+1}" for i in range(n)]
        header = (["t"] + names + [f"v{j+1}" for j in range(n)]
                  + [s + "_prime" for s in names] + [f"v{j+1}_prime" for j in range(n)])
        fh.write(",".join(header) + "\n")
        ca_pad = np.vstack([ca, ca[-1:]])
        cb_pad = np.vstack([cb, cb[-1:]])
        for i, t in enumerate(traj_a.times):
            row = [t, *traj_a.states[i], *ca_pad[i], *traj_b.states[i], *cb_pad[i]]
            fh.write(",".join(f"{v:.17g}" for v in row) + "\n")

    sim = config.simulation
    stats = estimate_moment(
        sys_, ctrl, gains, config.x0, config.x0_prime, u, u,
        realizations=sim["realizations"], t_final=sim["t_final"], dt=sim["dt"],
        seed=seed, record_stride=sim["record_stride"],
        chunk_size=sim["chunk_size"], jobs=args.jobs,
    )
    stats.write_csv(outdir / "fig3_moment.csv")
    report = verify_bound(stats, slack_sigmas=config.verification["slack_sigmas"])
    outputs = ["fig2_trajectories.csv", "fig3_moment.csv"]
    if not args.no_figures:
        from .report import render_moment_figure, render_pair_figure

        render_pair_figure(traj_a, traj_b, ca, cb, outdir / "fig2_trajectories.png")
        render_moment_figure(stats, outdir / "fig3_moment.png")
        outputs += ["fig2_trajectories.png", "fig3_moment.png"]
    summary = _summary_base("demo-pendulum", config, seed, args)
    summary.update({
        "pass": report.passed,
        "realizations": stats.realizations,
        "initial_moment": float(stats.mean_dk[0]),
        "worst_margin": report.worst_margin,
        "worst_time": report.worst_time,
        "kappa": gains.kappa,
        "outputs": outputs,
        "wall_time_s": time.perf_counter() - t0,
    })
    from .report import write_summary

    write_summary(outdir / "summary.json", summary)
    print(
        f"demo-pendulum: initial moment {stats.mean_dk[0]:.6g}, "
        f"bound check {'PASS' if report.passed else 'FAIL'} -> {outdir}"
    )
    return EXIT_OK if report.passed else EXIT_BOUND


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="incstab",
        description="Backstepping synthesis and incremental-stability verification "
                    "for stochastic Hamiltonian systems with jumps.",
    )
    parser.add_argument("--version", action="version", version=f"incstab {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, needs_config=True):
        if needs_config:
            p.add_argument("--config", required=True, help="experiment JSON document")
        p.add_argument("--seed", type=int, default=None, help="override the config seed")
        p.add_argument("--jobs", type=int, default=os.cpu_count() or 1,
                       help="parallel chunks for ensemble runs (results are identical "
                            "for any value)")
        p.add_argument("--out", default=None,
                       help=f"output directory (overrides ${OUTPUT_DIR_ENV} and config)")
        p.add_argument("--no-figures", action="store_true",
                       help="skip PNG rendering; CSV/JSON outputs only")

    p = sub.add_parser("gain-bound", help="check kappa1 against the synthesis bound")
    common(p)
    p.set_defaults(func=cmd_gain_bound)

    p = sub.add_parser("simulate", help="one closed-loop trajectory")
    common(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("pair", help="coupled trajectory pair sharing one noise path")
    common(p)
    p.set_defaults(func=cmd_pair)

    p = sub.add_parser("check-lyapunov", help="sampled generator dissipation check")
    common(p)
    p.set_defaults(func=cmd_check_lyapunov)

    p = sub.add_parser("verify-bound", help="ensemble moment against the analytic bound")
    common(p)
    p.set_defaults(func=cmd_verify_bound)

    p = sub.add_parser("demo-pendulum", help="full case-study reproduction with defaults")
    common(p, needs_config=False)
    p.add_argument("--realizations", type=int, default=None,
                   help="override the demo ensemble size")
    p.set_defaults(func=cmd_demo_pendulum)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=_sys.stderr)
        return EXIT_CONFIG
    except GainBoundError as exc:
        print(f"gain violation: {exc}", file=_sys.stderr)
        return EXIT_GAIN
    except DivergenceError as exc:
        print(f"numerical divergence: {exc}", file=_sys.stderr)
        return EXIT_DIVERGED


if __name__ == "__main__":
    raise SystemExit(main())
