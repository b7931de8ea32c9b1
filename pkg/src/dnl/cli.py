"""Command line entry point: ``dnl run`` and ``dnl sweep``."""

from __future__ import annotations

import argparse
import configparser
import sys
from pathlib import Path

from .config import ConfigError, ExperimentConfig, load_config
from .experiments import EXIT_CONFIG, run_experiment, run_sweep


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dnl",
        description="Experiment runner for the doubly nonlinear evolution lab",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in (
        ("run", "run a single experiment from a config file"),
        ("sweep", "run a family of experiments and aggregate the reports"),
    ):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", required=True, help="path to the INI config")
        p.add_argument("--out", default=None, help="output directory override")
    return parser


def _sweep_configs(
    path: Path,
) -> list[tuple[str, ExperimentConfig | ConfigError]]:
    """Child configs of a sweep; a child that fails to parse is carried as
    its error so the remaining children still run."""
    parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    if not parser.read(path):
        raise ConfigError(f"cannot read sweep file {path}")
    if not parser.has_section("sweep"):
        raise ConfigError("sweep file needs a [sweep] section")
    children: list[tuple[str, ExperimentConfig | ConfigError]] = []
    if parser.has_option("sweep", "configs"):
        names = parser.get("sweep", "configs").replace(",", " ").split()
        for i, name in enumerate(names):
            child_path = (path.parent / name).resolve()
            try:
                children.append((f"child_{i:03d}", load_config(child_path)))
            except ConfigError as exc:
                children.append((f"child_{i:03d}", exc))
        return children
    if parser.has_option("sweep", "vary"):
        key = parser.get("sweep", "vary").strip()
        values = parser.get("sweep", "values").replace(",", " ").split()
        for i, val in enumerate(values):
            try:
                cfg = load_config(path)
                _apply_override(cfg, key, val)
                cfg.validate()
                children.append((f"child_{i:03d}", cfg))
            except ConfigError as exc:
                children.append((f"child_{i:03d}", exc))
        return children
    raise ConfigError("sweep section needs either 'configs' or 'vary'/'values'")


def _apply_override(cfg: ExperimentConfig, key: str, value: str) -> None:
    mapping = {
        "init.seed": ("init_seed", int),
        "init.amp": ("init_amp", float),
        "time.dt": ("dt", float),
        "time.t_end": ("t_end", float),
        "experiment.seeds": ("seeds", int),
        "regularization.level": ("regularization_level", int),
        "alpha.sigma": ("sigma", float),
        "potential.theta": ("theta", float),
    }
    if key not in mapping:
        raise ConfigError(f"sweep cannot vary {key!r}")
    attr, typ = mapping[key]
    try:
        setattr(cfg, attr, typ(value))
    except ValueError as exc:
        raise ConfigError(f"bad sweep value {value!r} for {key}") from exc


def main(argv: list[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        if args.command == "run":
            cfg = load_config(args.config)
            out = Path(args.out) if args.out else Path(cfg.out_dir)
            result = run_experiment(cfg, out)
            return result.status
        cfg_path = Path(args.config)
        children = _sweep_configs(cfg_path)
        base_out = args.out
        if base_out is None:
            first = children[0][1] if children else None
            base_out = str(Path(first.out_dir).parent / "sweep") if first else "runs/sweep"
        result = run_sweep(children, Path(base_out))
        return result.status
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
