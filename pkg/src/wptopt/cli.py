"""Command-line front end: config ingestion, experiment dispatch, summaries.

Subcommands: solve, sweep, compare, fading, heatmap, certify.  Settings are
resolved as flags > config file (YAML) > defaults; the resolved configuration
is echoed into the output directory so any run can be reproduced from its own
artifacts.  Exit codes: 0 success, 2 config error, 3 solver failure,
4 certificate failure, 5 I/O error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import yaml

from .channel import PhysicalParams
from .experiments import (
    ENVIRONMENTS,
    SUPPORT_THRESHOLD,
    emit_heatmap,
    full_ceiling_layout,
    run_fading_ensemble,
    run_lod_sweep,
    run_scheme_comparison,
    solve_environment,
    write_csv,
)
from .geometry import RoomGeometry
from .schemes import evaluate_min_power
from .solver import SolverError, extract_support

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_SOLVER = 3
EXIT_CERTIFICATE = 4
EXIT_IO = 5

OUTPUT_ROOT_ENV = "WPTOPT_OUTPUT_ROOT"

DEFAULTS = {
    "environment": "1-1",
    "environments": ["1-1", "1-3", "1-4", "1-5"],
    "dimensionality": "two_d",
    "lod": 81,
    "lods": [21, 41, 61, 81],
    "power_watts": 10.0,
    "wavelength": 0.0125,
    "gain_calibration": None,       # None: (wavelength / 4 pi)^2
    "kappa": 10.0,
    "fading_lod": 41,
    "realizations": 200,
    "seed": 0,
    "nlos_mode": "shared",
    "n_jobs": 1,
    "tol": 1e-9,
    "tol_cert": 1e-6,
    "support_threshold": SUPPORT_THRESHOLD,
    "schemes": ["m_opt", "m_ff", "m_uni", "m_s75"],
    "output_dir": None,             # None: $WPTOPT_OUTPUT_ROOT or ./wptopt_out
}


class ConfigError(ValueError):
    pass


def load_config(path: str | None) -> dict:
    """Resolved configuration: file values over defaults, unknown keys rejected."""
    cfg = dict(DEFAULTS)
    if path is not None:
        try:
            with open(path) as fh:
                loaded = yaml.safe_load(fh)
        except (OSError, yaml.YAMLError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        if loaded is None:
            loaded = {}
        if not isinstance(loaded, dict):
            raise ConfigError("config file must contain a mapping")
        unknown = set(loaded) - set(DEFAULTS)
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        cfg.update(loaded)
    return cfg


def _validated(cfg: dict) -> dict:
    if cfg["environment"] not in ENVIRONMENTS:
        raise ConfigError(
            f"unknown environment {cfg['environment']!r}; choose from {sorted(ENVIRONMENTS)}"
        )
    for name in cfg["environments"]:
        if name not in ENVIRONMENTS:
            raise ConfigError(f"unknown environment {name!r} in environments list")
    if cfg["dimensionality"] not in ("one_d", "two_d"):
        raise ConfigError("dimensionality must be one_d or two_d")
    for key in ("lod", "fading_lod", "realizations", "n_jobs"):
        if int(cfg[key]) < 1:
            raise ConfigError(f"{key} must be a positive integer")
        cfg[key] = int(cfg[key])
    lods = [int(v) for v in cfg["lods"]]
    if any(b <= a for a, b in zip(lods, lods[1:])) or not lods:
        raise ConfigError("lods must be a strictly increasing list")
    cfg["lods"] = lods
    for key in ("power_watts", "wavelength", "tol", "tol_cert", "support_threshold", "kappa"):
        cfg[key] = float(cfg[key])
        if cfg[key] < 0 or (key not in ("kappa",) and cfg[key] == 0):
            raise ConfigError(f"{key} must be positive")
    if cfg["nlos_mode"] not in ("shared", "independent"):
        raise ConfigError("nlos_mode must be shared or independent")
    if cfg["seed"] is not None:
        cfg["seed"] = int(cfg["seed"])
    return cfg


def _params(cfg: dict) -> PhysicalParams:
    kwargs = dict(total_tx_power=cfg["power_watts"], rician_k=cfg["kappa"])
    if cfg["gain_calibration"] is not None:
        kwargs["gain_calibration"] = float(cfg["gain_calibration"])
    return PhysicalParams.with_wavelength(cfg["wavelength"], **kwargs)


def _room(cfg: dict) -> RoomGeometry:
    return ENVIRONMENTS[cfg["environment"]]

def _out_dir(cfg: dict, command: str) -> str:
    root = cfg["output_dir"] or os.environ.get(OUTPUT_ROOT_ENV) or "wptopt_out"
    path = os.path.join(root, command)
    os.makedirs(path, exist_ok=True)
    return path


def _echo_config(cfg: dict, out_dir: str) -> None:
    with open(os.path.join(out_dir, "config_echo.yaml"), "w") as fh:
        yaml.safe_dump(cfg, fh, sort_keys=True)


def _certificate_rows(cert) -> list:
    return [
        ("max_fbar_excess", cert.max_fbar_excess),
        ("support_deviation", cert.support_deviation),
        ("slackness_residual", cert.slackness_residual),
        ("symmetry_residual", cert.symmetry_residual),
        ("tol_cert", cert.tol_cert),
        ("tol_sym", cert.tol_sym),
        ("passed", cert.passed),
    ]


def _emit_summary(summary: dict, as_json: bool, lines: list[str]) -> None:
    if as_json:
        print(json.dumps(summary, sort_keys=True))
    else:
        for line in lines:
            print(line)


def _solve_once(cfg: dict):
    room = _room(cfg)
    layout = full_ceiling_layout(room, cfg["lod"], cfg["dimensionality"])
    env = solve_environment(room, layout, tol=cfg["tol"], tol_cert=cfg["tol_cert"])
    alloc = extract_support(env.solution.allocation, cfg["support_threshold"])
    watts = evaluate_min_power(alloc, env.gains, _params(cfg))
    return env, alloc, watts


def cmd_solve(cfg: dict, as_json: bool) -> int:
    env, alloc, watts = _solve_once(cfg)
    out_dir = _out_dir(cfg, "solve")
    name = cfg["environment"]
    write_csv(
        os.path.join(out_dir, "report.csv"),
        ["environment", "dimensionality", "lod", "objective_m", "min_power_watts",
         "antenna_count", "certificate_passed"],
        [(name, cfg["dimensionality"], cfg["lod"], env.solution.objective_m, watts,
          env.antenna_count, env.certificate.passed)],
    )
    write_csv(os.path.join(out_dir, f"certificate_{name}.csv"), ["field", "value"],
              _certificate_rows(env.certificate))
    emit_heatmap(
        alloc, env.tx_grid, os.path.join(out_dir, f"heatmap_{name}.csv"),
        meta={"environment": name, "room": [env.room.len_x, env.room.len_y, env.room.len_z],
              "lod": cfg["lod"], "scheme": "m_opt", "objective_m": env.solution.objective_m},
    )
    _echo_config(cfg, out_dir)
    verdict = "PASS" if env.certificate.passed else "FAIL"
    summary = {
        "command": "solve", "environment": name, "lod": cfg["lod"],
        "dimensionality": cfg["dimensionality"],
        "objective_m": env.solution.objective_m, "min_power_watts": watts,
        "antenna_count": env.antenna_count,
        "certificate_passed": bool(env.certificate.passed), "output_dir": out_dir,
    }
    _emit_summary(summary, as_json, [
        f"antennas: {env.antenna_count}, min power: {watts:.4g} W, certificate: {verdict}"
    ])
    return EXIT_OK if env.certificate.passed else EXIT_CERTIFICATE


def cmd_certify(cfg: dict, as_json: bool) -> int:
    env, _, _ = _solve_once(cfg)
    out_dir = _out_dir(cfg, "certify")
    name = cfg["environment"]
    write_csv(os.path.join(out_dir, f"certificate_{name}.csv"), ["field", "value"],
              _certificate_rows(env.certificate))
    _echo_config(cfg, out_dir)
    cert = env.certificate
    summary = {
        "command": "certify", "environment": name, "lod": cfg["lod"],
        "max_fbar_excess": cert.max_fbar_excess,
        "support_deviation": cert.support_deviation,
        "slackness_residual": cert.slackness_residual,
        "symmetry_residual": cert.symmetry_residual,
        "certificate_passed": bool(cert.passed), "output_dir": out_dir,
    }
    _emit_summary(summary, as_json, [
        f"certificate: {'PASS' if cert.passed else 'FAIL'} "
        f"(excess {cert.max_fbar_excess:.3e}, support dev {cert.support_deviation:.3e})"
    ])
    return EXIT_OK if cert.passed else EXIT_CERTIFICATE


def cmd_heatmap(cfg: dict, as_json: bool) -> int:
    env, alloc, _ = _solve_once(cfg)
    out_dir = _out_dir(cfg, "heatmap")
    name = cfg["environment"]
    path = os.path.join(out_dir, f"heatmap_{name}.csv")
    emit_heatmap(
        alloc, env.tx_grid, path,
        meta={"environment": name, "room": [env.room.len_x, env.room.len_y, env.room.len_z],
              "lod": cfg["lod"], "scheme": "m_opt", "objective_m": env.solution.objective_m},
    )
    _echo_config(cfg, out_dir)
    summary = {"command": "heatmap", "environment": name, "lod": cfg["lod"],
               "antenna_count": env.antenna_count, "heatmap": path, "output_dir": out_dir}
    _emit_summary(summary, as_json, [f"wrote {path} ({env.antenna_count} antennas)"])
    return EXIT_OK


def cmd_sweep(cfg: dict, as_json: bool) -> int:
    room = _room(cfg)
    series = run_lod_sweep(room, cfg["dimensionality"], cfg["lods"], tol=cfg["tol"])
    out_dir = _out_dir(cfg, "sweep")
    write_csv(
        os.path.join(out_dir, "report.csv"),
        ["lod", "objective_m", "rel_diff_percent", "antenna_count"],
        series.rows(),
    )
    _echo_config(cfg, out_dir)
    summary = {
        "command": "sweep", "environment": cfg["environment"], "lods": series.lods,
        "objectives": series.objectives, "antenna_counts": series.antenna_counts,
        "output_dir": out_dir,
    }
    _emit_summary(summary, as_json, [
        f"lod {lod}: m={m:.9g}, antennas={c}"
        for lod, m, c in zip(series.lods, series.objectives, series.antenna_counts)
    ])
    return EXIT_OK


def cmd_compare(cfg: dict, as_json: bool) -> int:
    rooms = {name: ENVIRONMENTS[name] for name in cfg["environments"]}
    rows, environments = run_scheme_comparison(
        rooms, lod=cfg["lod"], params=_params(cfg), tol=cfg["tol"],
        dimensionality=cfg["dimensionality"], schemes=cfg["schemes"],
    )
    out_dir = _out_dir(cfg, "compare")
    write_csv(
        os.path.join(out_dir, "report.csv"),
        ["environment", "scheme", "min_power_watts", "loss_vs_opt",
         "antenna_count", "certificate_passed"],
        [(r.environment, r.scheme_id, r.min_power_watts, r.loss_vs_opt,
          r.antenna_count, r.certificate_passed) for r in rows],
    )
    for name, env in environments.items():
        write_csv(os.path.join(out_dir, f"certificate_{name}.csv"), ["field", "value"],
                  _certificate_rows(env.certificate))
        emit_heatmap(
            extract_support(env.solution.allocation, cfg["support_threshold"]),
            env.tx_grid, os.path.join(out_dir, f"heatmap_{name}.csv"),
            meta={"environment": name, "lod": cfg["lod"], "scheme": "m_opt",
                  "objective_m": env.solution.objective_m},
        )
    _echo_config(cfg, out_dir)
    summary = {
        "command": "compare", "environments": cfg["environments"],
        "rows": [
            {"environment": r.environment, "scheme": r.scheme_id,
             "min_power_watts": r.min_power_watts, "loss_vs_opt": r.loss_vs_opt,
             "antenna_count": r.antenna_count} for r in rows
        ],
        "output_dir": out_dir,
    }
    _emit_summary(summary, as_json, [
        f"{r.environment} {r.scheme_id}: {r.min_power_watts:.4g} W "
        f"(loss {r.loss_vs_opt:.4f}, antennas {r.antenna_count})" for r in rows
    ])
    return EXIT_OK


def cmd_fading(cfg: dict, as_json: bool) -> int:
    room = _room(cfg)
    layout = full_ceiling_layout(room, cfg["fading_lod"], cfg["dimensionality"])
    report = run_fading_ensemble(
        room, layout, _params(cfg),
        n_realizations=cfg["realizations"], seed_base=cfg["seed"],
        mode=cfg["nlos_mode"], tol=cfg["tol"], n_jobs=cfg["n_jobs"],
    )
    out_dir = _out_dir(cfg, "fading")
    write_csv(
        os.path.join(out_dir, "report.csv"),
        ["environment", "lod", "realizations", "mode", "seed_base",
         "mean_support_fraction_percent", "support_cov_percent",
         "mean_relative_performance_percent", "performance_cov_percent",
         "los_support_fraction_percent", "los_objective"],
        [(cfg["environment"], report.lod, report.realizations, report.mode,
          report.seed_base, report.mean_support_fraction, report.support_cov,
          report.mean_relative_performance, report.performance_cov,
          report.los_support_fraction, report.los_objective)],
    )
    _echo_config(cfg, out_dir)
    summary = {
        "command": "fading", "environment": cfg["environment"], "lod": report.lod,
        "realizations": report.realizations, "mode": report.mode,
        "mean_relative_performance_percent": report.mean_relative_performance,
        "performance_cov_percent": report.performance_cov,
        "mean_support_fraction_percent": report.mean_support_fraction,
        "support_cov_percent": report.support_cov,
        "los_support_fraction_percent": report.los_support_fraction,
        "output_dir": out_dir,
    }
    _emit_summary(summary, as_json, [
        f"relative performance: {report.mean_relative_performance:.2f}% "
        f"(CoV {report.performance_cov:.2f}%), "
        f"support: {report.mean_support_fraction:.3f}% of cells "
        f"(LoS {report.los_support_fraction:.3f}%)"
    ])
    return EXIT_OK


_COMMANDS = {
    "solve": cmd_solve,
    "sweep": cmd_sweep,
    "compare": cmd_compare,
    "fading": cmd_fading,
    "heatmap": cmd_heatmap,
    "certify": cmd_certify,
}

_FLAG_KEYS = {
    "env": "environment",
    "envs": "environments",
    "dim": "dimensionality",
    "lod": "lod",
    "lods": "lods",
    "power": "power_watts",
    "wavelength": "wavelength",
    "calibration": "gain_calibration",
    "kappa": "kappa",
    "fading_lod": "fading_lod",
    "realizations": "realizations",
    "seed": "seed",
    "mode": "nlos_mode",
    "jobs": "n_jobs",
    "tol": "tol",
    "threshold": "support_threshold",
    "schemes": "schemes",
    "output": "output_dir",
}


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="wptopt",
        description="Max-min optimal transmit deployment and power allocation "
                    "for indoor wireless power transfer.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name in _COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", help="YAML config file")
        p.add_argument("--json-summary", action="store_true",
                       help="emit the run summary as a single JSON object")
        p.add_argument("--env", help="environment preset (1-1, 1-3, 1-4, 1-5)")
        p.add_argument("--envs", help="comma-separated environment presets")
        p.add_argument("--dim", choices=["one_d", "two_d"])
        p.add_argument("--lod", type=int)
        p.add_argument("--lods", help="comma-separated increasing lod list")
        p.add_argument("--power", type=float, help="total transmit power [W]")
        p.add_argument("--wavelength", type=float)
        p.add_argument("--calibration", type=float, help="gain calibration c*S_RX [m^2]")
        p.add_argument("--kappa", type=float, help="Rician K-factor")
        p.add_argument("--fading-lod", dest="fading_lod", type=int)
        p.add_argument("--realizations", type=int)
        p.add_argument("--seed", type=int)
        p.add_argument("--mode", choices=["shared", "independent"], help="NLoS draw mode")
        p.add_argument("--jobs", type=int, help="parallel workers for ensembles")
        p.add_argument("--tol", type=float)
        p.add_argument("--threshold", type=float, help="support threshold")
        p.add_argument("--schemes", help="comma-separated scheme ids")
        p.add_argument("--output", help="output root directory")
    return parser


def _apply_overrides(cfg: dict, args: argparse.Namespace) -> dict:
    for flag, key in _FLAG_KEYS.items():
        value = getattr(args, flag, None)
        if value is None:
            continue
        if key in ("lods",):
            value = [int(v) for v in str(value).split(",") if v]
        elif key in ("environments", "schemes"):
            value = [v for v in str(value).split(",") if v]
        cfg[key] = value
    return cfg


def run(args: argparse.Namespace) -> int:
    try:
        cfg = load_config(args.config)
        cfg = _apply_overrides(cfg, args)
        cfg = _validated(cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        return _COMMANDS[args.command](cfg, args.json_summary)
    except SolverError as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    return run(args)


if __name__ == "__main__":
    sys.exit(main())
