"""Experiment runner CLI: run, sweep, attack, dump-fisher."""

import argparse
import dataclasses
import sys
from pathlib import Path

from .config import ExperimentConfig, load_config, serialize_config
from .errors import ConfigError
from .protocol import init_system, run_experiment
from .reporting import (
    write_attack_csv,
    write_privacy_csv,
    write_round_csv,
    write_sweep_csv,
)
from .sensitivity import dump_scores_csv


def _prepare(args) -> tuple:
    config = load_config(args.config) if args.config else ExperimentConfig()
    if args.seed is not None:
        config = dataclasses.replace(config, seed=args.seed)
    outdir = Path(args.out)
    outdir.mkdir(parents=True, exist_ok=True)
    (outdir / "config.used").write_text(serialize_config(config))
    return config, outdir


def _write_message_log(system, outdir):
    import struct

    with open(outdir / "messages.bin", "wb") as fh:
        for round_no, client_id, mask_wire, ct_wire in system.message_log:
            fh.write(struct.pack("<IIII", round_no, client_id, len(mask_wire), len(ct_wire)))
            fh.write(mask_wire)
            fh.write(ct_wire)


def cmd_run(args) -> int:
    config, outdir = _prepare(args)
    reports, system = run_experiment(config)
    write_round_csv(reports, outdir / "rounds.csv")
    write_privacy_csv(reports, outdir / "privacy.csv")
    if config.attack:
        write_attack_csv(reports, outdir / "attack.csv")
    if config.message_log:
        _write_message_log(system, outdir)
    if config.dump_fisher:
        _dump_fisher(config, outdir)
    if config.figures and reports:
        from . import figures

        figures.save_round_figures(reports, outdir)
        if config.attack:
            figures.save_attack_figures(reports, outdir)
    print(f"wrote {outdir / 'rounds.csv'} ({len(reports)} rounds)")
    return 0


def _parse_values(text):
    return [float(v) for v in text.split(",") if v.strip()]


def cmd_sweep(args) -> int:
    config, outdir = _prepare(args)
    taus = _parse_values(args.taus) if args.taus else []
    rhos = _parse_values(args.rhos) if args.rhos else []
    if not taus and not rhos:
        return cmd_run(args)
    taus = taus or [config.tau]
    rhos = rhos or [config.rho]
    cells = []
    for tau in taus:
        for rho in rhos:
            cell_config = dataclasses.replace(config, tau=tau, rho=rho)
            reports, _ = run_experiment(cell_config)
            if not reports:
                raise ConfigError("rounds: sweep needs at least one round")
            cells.append((tau, rho, reports[-1]))
    write_sweep_csv(cells, outdir / "sweep.csv")
    if config.figures:
        from . import figures

        figures.save_sweep_figures(cells, outdir)
    print(f"wrote {outdir / 'sweep.csv'} ({len(cells)} cells)")
    return 0


def cmd_attack(args) -> int:
    config, outdir = _prepare(args)
    overrides = {"attack": True}
    if not args.keep_sigma:
        overrides["sigma"] = 0.0  # no-noise ablation isolates the mask defense
    config = dataclasses.replace(config, **overrides)
    reports, _ = run_experiment(config)
    write_attack_csv(reports, outdir / "attack.csv")
    if config.figures and reports:
        from . import figures

        figures.save_attack_figures(reports, outdir)
    print(f"wrote {outdir / 'attack.csv'}")
    return 0


def _dump_fisher(config, outdir):
    from .protocol import client_update

    system = init_system(config)
    client = system.clients[0]
    _, _, scores, _, _ = client_update(client, config, round_no=1)
    dump_scores_csv(scores, outdir / "fisher_scores.csv")
    if config.figures:
        from . import figures

        figures.save_fisher_figures(scores, config.tau, outdir)
    return scores


def cmd_dump_fisher(args) -> int:
    config, outdir = _prepare(args)
    _dump_fisher(config, outdir)
    print(f"wrote {outdir / 'fisher_scores.csv'}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fedshield",
        description=(
            "Simulate federated rounds where Fisher-selected parameters are "
            "homomorphically encrypted, client-specific ones stay local, and "
            "the rest are protected with calibrated Gaussian noise."
        ),
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="path to a key = value config file")
        p.add_argument("--out", default="out", help="output directory (default: ./out)")
        p.add_argument("--seed", type=int, default=None, help="override the config seed")

    p_run = sub.add_parser("run", help="run the protocol and write round reports")
    common(p_run)
    p_run.set_defaults(func=cmd_run)

    p_sweep = sub.add_parser("sweep", help="grid over tau and/or rho, one row per cell")
    common(p_sweep)
    p_sweep.add_argument("--taus", help="comma-separated sensitivity thresholds")
    p_sweep.add_argument("--rhos", help="comma-separated consensus thresholds")
    p_sweep.set_defaults(func=cmd_sweep)

    p_attack = sub.add_parser("attack", help="no-noise ablation with the attack harness on")
    common(p_attack)
    p_attack.add_argument(
        "--keep-sigma", action="store_true", help="keep the configured sigma instead of the ablation override"
    )
    p_attack.set_defaults(func=cmd_attack)

    p_fisher = sub.add_parser("dump-fisher", help="score one client and dump histogram data")
    common(p_fisher)
    p_fisher.set_defaults(func=cmd_dump_fisher)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"io error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
