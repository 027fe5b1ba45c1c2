"""Command-line entry points.

Subcommands:

    link-budget   itemized dB breakdown and total transmittance
    rate-sweep    rate vs free-space distance, one CSV row per grid point
    simulate      Monte Carlo pulse batch vs the closed-form model
    session       full two-endpoint protocol run (loopback)

Exit codes: 0 success, 2 configuration error, 3 regime violation,
4 session abort, 1 anything else. Outputs are UTF-8 CSV or JSON; CSV
bytes are deterministic for fixed seeds. With --out, a sidecar
<out>.record.json stores the scenario id, config hash, timestamp, and
the emitted tables.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
from dataclasses import replace
from datetime import datetime, timezone
from pathlib import Path

from .config import ScenarioConfig, SweepGrid, config_hash, load_config
from .errors import (
    Abort,
    ConfigError,
    EstimatorCollapse,
    InsufficientStatistics,
    RegimeViolation,
)
from .montecarlo import PulsePlan, simulate_batch, stats_to_observables
from .optics import transmittance
from .protocol.session import Seeds, run_session_detailed
from .rates import decoy_estimate, rate_sweep
from .rng import split_seed

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_REGIME = 3
EXIT_ABORT = 4

LINK_BUDGET_HEADER = "item,value"
RATE_SWEEP_HEADER = "d_fs_m,key_gen_rate_bps,cs_raw,q_mu,e_mu,q1,e1,collapsed"
SIMULATE_HEADER = "class,sent,clicked,errored,gain,qber,se_gain,se_qber"
SESSION_HEADER = (
    "qber,comm_rate,key_gen_rate,key_cons_rate,p_rec_empirical,"
    "frames_ok,frames_failed,aborted,q_mu_hat,q_nu_hat,total_pulses,elapsed_s"
)


def _apply_seed_override(cfg: ScenarioConfig, seed: int | None) -> ScenarioConfig:
    if seed is None:
        return cfg
    seeds = Seeds(
        alice=split_seed(seed, 1), bob=split_seed(seed, 2), channel=split_seed(seed, 3)
    )
    return replace(cfg, seeds=seeds)


def _parse_grid(text: str) -> SweepGrid:
    parts = text.split(":")
    if len(parts) != 3:
        raise ConfigError("--grid expects start:stop:step")
    try:
        start, stop, step = (float(p) for p in parts)
    except ValueError as exc:
        raise ConfigError(f"bad --grid value: {exc}") from exc
    return SweepGrid(d_fs_start=start, d_fs_stop=stop, d_fs_step=step)


def _fmt(x: float) -> str:
    return repr(float(x))


def cmd_link_budget(cfg: ScenarioConfig, fmt: str) -> str:
    budget = transmittance(
        cfg.geometry, cfg.atmosphere, cfg.beam, cfg.detector.eta_b, cfg.detector.eta_d
    )
    if fmt == "json":
        return json.dumps(
            {
                "breakdown_db": budget.breakdown,
                "channel_db": budget.channel_db,
                "total_db": budget.total_db,
                "eta_total": budget.eta_total,
                "w_eff_m": budget.w_eff,
                "rytov_variance": budget.rytov,
            },
            indent=2,
            sort_keys=True,
        )
    lines = [LINK_BUDGET_HEADER]
    for item, db in budget.breakdown.items():
        lines.append(f"{item}_db,{_fmt(db)}")
    lines.append(f"channel_db,{_fmt(budget.channel_db)}")
    lines.append(f"total_db,{_fmt(budget.total_db)}")
    lines.append(f"eta_total,{_fmt(budget.eta_total)}")
    lines.append(f"w_eff_m,{_fmt(budget.w_eff)}")
    lines.append(f"rytov_variance,{_fmt(budget.rytov)}")
    return "\n".join(lines) + "\n"


def cmd_rate_sweep(cfg: ScenarioConfig, fmt: str) -> str:
    if cfg.sweep is None:
        raise ConfigError("rate-sweep needs a sweep section or --grid")
    points = rate_sweep(
        cfg.geometry,
        cfg.atmosphere,
        cfg.beam,
        cfg.source,
        cfg.detector,
        cfg.sweep.points(),
        cfg.geometry.d_fiber,
        duty_cycle=cfg.protocol.duty_cycle,
    )
    rows = []
    for pt in points:
        rows.append(
            {
                "d_fs_m": pt.d_fs,
                "key_gen_rate_bps": pt.report.key_gen_rate,
                "cs_raw": pt.report.cs_raw,
                "q_mu": pt.observables.q_mu,
                "e_mu": pt.observables.e_mu,
                "q1": pt.estimate.q1 if pt.estimate else 0.0,
                "e1": pt.estimate.e1 if pt.estimate else 0.0,
                "collapsed": int(pt.collapsed),
            }
        )
    if fmt == "json":
        return json.dumps(rows, indent=2, sort_keys=True)
    lines = [RATE_SWEEP_HEADER]
    for r in rows:
        lines.append(
            ",".join(
                [
                    _fmt(r["d_fs_m"]),
                    _fmt(r["key_gen_rate_bps"]),
                    _fmt(r["cs_raw"]),
                    _fmt(r["q_mu"]),
                    _fmt(r["e_mu"]),
                    _fmt(r["q1"]),
                    _fmt(r["e1"]),
                    str(r["collapsed"]),
                ]
            )
        )
    return "\n".join(lines) + "\n"


def cmd_simulate(cfg: ScenarioConfig, fmt: str) -> str:
    if cfg.montecarlo is None:
        raise ConfigError("simulate needs a montecarlo section (n_pulses)")
    budget = transmittance(
        cfg.geometry, cfg.atmosphere, cfg.beam, cfg.detector.eta_b, cfg.detector.eta_d
    )
    plan = PulsePlan.make(cfg.montecarlo.n_pulses, cfg.source.mix_ratio, cfg.seeds.channel)
    stats = simulate_batch(plan, budget.eta_total, cfg.source, cfg.detector)
    estimate = None
    try:
        obs = stats_to_observables(stats)
        est = decoy_estimate(obs, cfg.source)
        estimate = {"q1": est.q1, "e1": est.e1}
    except (InsufficientStatistics, EstimatorCollapse, ValueError):
        pass
    if fmt == "json":
        payload = {
            "eta_total": budget.eta_total,
            "classes": {
                name: {
                    "sent": c.sent,
                    "clicked": c.clicked,
                    "errored": c.errored,
                    "gain": c.gain,
                    "qber": c.qber,
                    "se_gain": c.se_gain,
                    "se_qber": c.se_qber,
                }
                for name, c in (
                    ("signal", stats.signal),
                    ("decoy", stats.decoy),
                    ("vacuum", stats.vacuum),
                )
            },
            "estimate": estimate,
        }
        return json.dumps(payload, indent=2, sort_keys=True)
    lines = [SIMULATE_HEADER]
    for name, c in (("signal", stats.signal), ("decoy", stats.decoy), ("vacuum", stats.vacuum)):
        lines.append(
            f"{name},{int(c.sent)},{int(c.clicked)},{int(c.errored)},"
            f"{_fmt(c.gain)},{_fmt(c.qber)},{_fmt(c.se_gain)},{_fmt(c.se_qber)}"
        )
    return "\n".join(lines) + "\n"


def cmd_session(cfg: ScenarioConfig, fmt: str) -> tuple:
    report, _, _ = run_session_detailed(cfg.session_spec())
    d = report.as_dict()
    if fmt == "json":
        return json.dumps(d, indent=2, sort_keys=True), report
    row = ",".join(
        [
            _fmt(d["qber"]),
            _fmt(d["comm_rate"]),
            _fmt(d["key_gen_rate"]),
            _fmt(d["key_cons_rate"]),
            _fmt(d["p_rec_empirical"]),
            str(d["frames_ok"]),
            str(d["frames_failed"]),
            str(int(d["aborted"])),
            _fmt(d["q_mu_hat"]),
            _fmt(d["q_nu_hat"]),
            str(d["total_pulses"]),
            _fmt(d["elapsed_s"]),
        ]
    )
    return SESSION_HEADER + "\n" + row + "\n", report


def _write_output(out_path: str | None, text: str, cfg: ScenarioConfig, command: str, scenario_id: str) -> None:
    if out_path is None:
        sys.stdout.write(text)
        return
    path = Path(out_path)
    path.write_text(text, encoding="utf-8", newline="")
    record = {
        "scenario_id": scenario_id,
        "config_hash": config_hash(cfg),
        "created_utc": datetime.now(timezone.utc).isoformat(),
        "command": command,
        "tables": {"output": text, "sha256": hashlib.sha256(text.encode("utf-8")).hexdigest()},
    }
    Path(str(path) + ".record.json").write_text(
        json.dumps(record, indent=2, sort_keys=True), encoding="utf-8"
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="phaselink",
        description="Cascaded free-space + fiber quantum link simulator.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in (
        ("link-budget", "itemized link budget for the configured geometry"),
        ("rate-sweep", "key rate versus free-space distance"),
        ("simulate", "Monte Carlo pulse batch statistics"),
        ("session", "full protocol session over a loopback transport"),
    ):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", required=True, help="scenario config file")
        p.add_argument("--out", default=None, help="output file (default: stdout)")
        p.add_argument("--seed", type=int, default=None, help="override all seeds")
        p.add_argument("--format", choices=("csv", "json"), default="csv")
        if name == "rate-sweep":
            p.add_argument("--grid", default=None, help="start:stop:step in meters")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
        cfg = _apply_seed_override(cfg, args.seed)
        if args.command == "rate-sweep" and args.grid is not None:
            cfg = replace(cfg, sweep=_parse_grid(args.grid))
        scenario_id = Path(args.config).stem
        if args.command == "link-budget":
            text = cmd_link_budget(cfg, args.format)
        elif args.command == "rate-sweep":
            text = cmd_rate_sweep(cfg, args.format)
        elif args.command == "simulate":
            text = cmd_simulate(cfg, args.format)
        else:
            text, report = cmd_session(cfg, args.format)
            if report.aborted:
                _write_output(args.out, text, cfg, args.command, scenario_id)
                print(f"session aborted: {report.abort_reason}", file=sys.stderr)
                return EXIT_ABORT
        _write_output(args.out, text, cfg, args.command, scenario_id)
        return EXIT_OK
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except RegimeViolation as exc:
        print(f"regime violation: {exc}", file=sys.stderr)
        return EXIT_REGIME
    except Abort as exc:
        print(f"session aborted: {exc}", file=sys.stderr)
        return EXIT_ABORT


if __name__ == "__main__":
    sys.exit(main())
