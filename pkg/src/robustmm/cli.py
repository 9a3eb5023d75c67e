"""Command line front end: solve, radius, simulate, validate.

Every command reads one flat config file, writes its outputs atomically
into the output directory, and drops a manifest echoing the resolved
configuration so a rerun with the same inputs is byte-identical.

Exit codes: 0 success, 2 configuration problem, 3 solver failure,
4 degenerate policy, 5 validation failure.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from . import __version__
from .config import ConfigError, RunConfig, parse_config
from .moments import SampleSet, empirical_moments, read_sample_csv
from .policy import DegeneratePolicyError, SolverError, build_policy, solve_inner
from .profile import gram_bound_check, select_radius
from .simulator import shift_experiment
from .validation import format_table, run_validation


def _atomic_write(path: Path, data: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.parent / (path.name + ".tmp")
    with tmp.open("w", encoding="utf-8") as fh:
        fh.write(data)
    os.replace(tmp, path)


def _json_dumps(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True, allow_nan=False) + "\n"


def _write_manifest(cfg: RunConfig, command: str) -> None:
    manifest = {
        "command": command,
        "version": __version__,
        "seed": cfg.seed,
        "config": dict(sorted(cfg.raw.items())),
    }
    _atomic_write(cfg.out_dir / "manifest.json", _json_dumps(manifest))


def _load_samples(cfg: RunConfig) -> tuple[SampleSet, SampleSet]:
    buy_path, sell_path = cfg.require_samples()
    try:
        buy = read_sample_csv(buy_path, "buy")
        sell = read_sample_csv(sell_path, "sell")
    except (OSError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc
    return buy, sell


def _resolve_budget(cfg: RunConfig, samples) -> float:
    """Solver budget (squared-radius units). A confidence level chi picks
    the radius delta_hat first; squaring converts it to the budget."""
    if cfg.delta is not None:
        return cfg.delta
    if cfg.chi is None:
        raise ConfigError("give one of radius.delta or radius.chi")
    selection = select_radius(samples[0], samples[1], cfg.chi,
                              resamples=cfg.resamples, rng_seed=cfg.seed)
    return selection.delta_hat ** 2


def cmd_solve(cfg: RunConfig) -> int:
    samples = _load_samples(cfg)
    model = cfg.require_model()
    domain = cfg.require_domain()
    summaries = (empirical_moments(samples[0]), empirical_moments(samples[1]))
    delta = _resolve_budget(cfg, samples)
    solution = solve_inner(model, domain, summaries, delta)
    policy = build_policy(model, domain, solution)

    nodes = domain.axis_nodes
    lines = ["eps_plus,eps_minus,density"]
    dens = policy.density
    for i in range(domain.grid_n):
        for j in range(domain.grid_n):
            lines.append(f"{nodes[i]!r},{nodes[j]!r},{dens[i, j]!r}")
    _atomic_write(cfg.out_dir / "policy.csv", "\n".join(lines) + "\n")

    summary = {
        "alpha_star": {"plus": solution.alpha_star_plus, "minus": solution.alpha_star_minus},
        "beta_star": {"plus": solution.beta_star_plus, "minus": solution.beta_star_minus},
        "objective": solution.objective,
        "delta": delta,
        "concave_certificate": solution.concave_certificate,
        "eps_max": domain.eps_max,
        "grid_n": domain.grid_n,
    }
    _atomic_write(cfg.out_dir / "solution.json", _json_dumps(summary))
    _write_manifest(cfg, "solve")
    print(f"solve: objective {solution.objective!r} at delta {delta!r} -> {cfg.out_dir}")
    return 0


def cmd_radius(cfg: RunConfig) -> int:
    samples = _load_samples(cfg)
    if cfg.chi is None:
        raise ConfigError("radius command requires radius.chi")
    selection = select_radius(samples[0], samples[1], cfg.chi,
                              resamples=cfg.resamples, rng_seed=cfg.seed)
    summaries = (empirical_moments(samples[0]), empirical_moments(samples[1]))
    payload = {
        "chi": selection.chi,
        "n": samples[0].n,
        "resamples": selection.resamples,
        "profile_quantile": selection.profile_quantile,
        "delta_hat": selection.delta_hat,
        "gram_bound": gram_bound_check(summaries),
        "seed": cfg.seed,
    }
    _atomic_write(cfg.out_dir / "radius.json", _json_dumps(payload))
    _write_manifest(cfg, "radius")
    print(f"radius: delta_hat {selection.delta_hat!r} at chi {selection.chi!r} -> {cfg.out_dir}")
    return 0


def cmd_simulate(cfg: RunConfig) -> int:
    samples = _load_samples(cfg)
    model = cfg.require_model()
    domain = cfg.require_domain()
    report = shift_experiment(
        samples,
        model,
        domain,
        deltas=cfg.sim_deltas,
        shift=cfg.shift,
        episodes=cfg.episodes,
        rng_seed=cfg.seed,
    )
    lines = ["delta,mean_objective,std_err,p10_objective,concave_certificate"]
    for row in report.rows:
        cert = "true" if row.concave_certificate else "false"
        lines.append(
            f"{row.delta!r},{row.mean_objective!r},{row.std_err!r},{row.p10_objective!r},{cert}"
        )
    _atomic_write(cfg.out_dir / "shift.csv", "\n".join(lines) + "\n")
    _write_manifest(cfg, "simulate")
    print(f"simulate: {len(report.rows)} radii x {report.episodes} episodes -> {cfg.out_dir}")
    return 0


def cmd_validate(cfg: RunConfig) -> int:
    samples = _load_samples(cfg)
    rows = run_validation(samples[0], samples[1], deltas=cfg.validate_deltas, tol=cfg.validate_tol)
    _atomic_write(cfg.out_dir / "validation.json", _json_dumps([r.as_dict() for r in rows]))
    _write_manifest(cfg, "validate")
    print(format_table(rows))
    failures = [r for r in rows if r.passed is False]
    if failures:
        print(f"validate: {len(failures)} check(s) failed", file=sys.stderr)
        return 5
    print(f"validate: all {sum(1 for r in rows if r.passed is not None)} checks passed")
    return 0


_COMMANDS = {
    "solve": cmd_solve,
    "radius": cmd_radius,
    "simulate": cmd_simulate,
    "validate": cmd_validate,
}


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="robustmm",
        description="Wasserstein-robust market making: solve, calibrate, simulate, validate.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in (
        ("solve", "solve the robust inner problem and write the quoting policy"),
        ("radius", "pick the transport radius from data at confidence 1 - chi"),
        ("simulate", "run the shift experiment across radii"),
        ("validate", "compare closed forms against the transport oracle"),
    ):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", required=True, help="path to a key = value config file")
        p.add_argument("--out", default=None, help="output directory (overrides output.dir)")
        p.add_argument("--seed", type=int, default=None, help="seed override")
    args = parser.parse_args(argv)

    try:
        cfg = parse_config(args.config).with_overrides(args.out, args.seed)
        return _COMMANDS[args.command](cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except SolverError as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return 3
    except DegeneratePolicyError as exc:
        print(f"degenerate policy: {exc}", file=sys.stderr)
        return 4
    except ValueError as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
