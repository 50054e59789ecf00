"""
Command-line entry point: enumerate, verify, phase, transfer and mc.

Structured output goes to files (or stdout where noted); short human-readable summaries go to
stderr. Exit codes: 0 pass, 1 check failure, 2 usage or configuration error, 3 resource skip.
"""

import argparse
import json
import sys
from typing import List, Optional

from src.bounds import PhaseTable, PhaseTableConfig, asymptote, beta_grid, lower_curve, small_beta_constant, \
    upper_curve
from src.ct_core import count_triangulations, dump_triangulations, enumerate_strip_sequences
from src.exception import ConfigError, CustomException, DivergenceError, DomainError, ResourceError
from src.logger import logging
from src.mc import JointChainConfig, McRun, estimate_free_energy
from src.run_config import build_run_config
from src.transfer import TransferScan, TransferScanConfig, divergence_diagnostic
from src.verification import EXIT_FAIL, EXIT_OK, EXIT_SKIP, EXIT_USAGE, Verification

# large-beta and small-beta points for --check-asymptote
ASYMPTOTE_BETA, ASYMPTOTE_TOL = 20.0, 1e-2
SMALL_BETA, SMALL_BETA_TOL = 1e-3, 1e-6


def _say(message: str) -> None:
    print(message, file=sys.stderr)


def _flags(args: argparse.Namespace) -> dict:
    return {k: v for k, v in vars(args).items() if k not in ("command", "config", "handler")}


def cmd_enumerate(args) -> int:
    cfg = build_run_config("enumerate", _flags(args), args.config)
    if cfg.count_only:
        print(count_triangulations(cfg.N, cfg.K))
        return EXIT_OK
    text = dump_triangulations(enumerate_strip_sequences(cfg.N, cfg.K), cfg.N, cfg.K)
    if cfg.output == "-":
        sys.stdout.write(text)
    else:
        with open(cfg.output, "w", encoding="utf-8") as fh:
            fh.write(text)
        _say(f"wrote {count_triangulations(cfg.N, cfg.K)} triangulations to {cfg.output}")
    return EXIT_OK


def cmd_verify(args) -> int:
    cfg = build_run_config("verify", _flags(args), args.config)
    report, code = Verification(cfg).initiate_verification()
    summary = report.summary()
    _say(f"verify [{cfg.suite}]: {summary['passed']} passed, {summary['failed']} failed, "
         f"{summary['skipped']} skipped, {summary['informational']} informational -> {cfg.output}")
    for record in report.records:
        if record["check"] == "euler_formula":
            mode = "exhaustive" if record["exhaustive"] else "sampled"
            _say(f"  {record['status'].upper()} euler_formula on {record['instance']}: "
                 f"{record['configurations']} configurations ({mode})")
        elif record["status"] == "info" and record.get("known_failure"):
            _say(f"  INFO {record['check']} on {record['instance']}: beta={record['beta']} "
                 f"upper slack {record['upper_slack']:.4g}")
    for record in report.failures():
        _say(f"  FAIL {record['suite']}/{record['check']} on {record['instance']}")
    return code


def cmd_phase(args) -> int:
    cfg = build_run_config("phase", _flags(args), args.config)
    component = PhaseTable(PhaseTableConfig(curve_path=cfg.curve_output, verdict_path=cfg.verdict_output))
    table, verdicts = component.initiate_phase_table(cfg.q, cfg.side, beta_grid(cfg.beta_grid), cfg.points)
    _say(f"phase q={cfg.q} side={cfg.side}: {len(table.rows)} grid rows -> {cfg.curve_output}")
    for verdict in verdicts:
        print(json.dumps(verdict.to_dict(), sort_keys=True))
    if not cfg.check_asymptote:
        return EXIT_OK
    large = max(abs(lower_curve(ASYMPTOTE_BETA, cfg.q, cfg.side) - asymptote(ASYMPTOTE_BETA)),
                abs(upper_curve(ASYMPTOTE_BETA, cfg.q, cfg.side) - asymptote(ASYMPTOTE_BETA)))
    small = abs(lower_curve(SMALL_BETA, cfg.q, cfg.side) - small_beta_constant(cfg.q, cfg.side))
    ok = large <= ASYMPTOTE_TOL and small <= SMALL_BETA_TOL
    _say(f"asymptote check: |curve - (3/2 beta + ln 2)| = {large:.3g} at beta={ASYMPTOTE_BETA}, "
         f"|lower - const| = {small:.3g} at beta={SMALL_BETA}: {'ok' if ok else 'FAILED'}")
    return EXIT_OK if ok else EXIT_FAIL


def cmd_transfer(args) -> int:
    cfg = build_run_config("transfer", _flags(args), args.config)
    frame = TransferScan(TransferScanConfig(table_path=cfg.output)).initiate_transfer_scan(cfg.mu, cfg.K, cfg.N)
    _say(f"transfer: {len(frame)} rows -> {cfg.output}")
    if cfg.divergence:
        for mu in cfg.mu:
            for N in cfg.N:
                report = divergence_diagnostic(N, mu, cfg.K_max)
                print(json.dumps(report.to_dict(), sort_keys=True))
                _say(f"  N={N} mu={mu}: {report.verdict} (ratio {report.ratio:.4g})")
    return EXIT_OK


def cmd_mc(args) -> int:
    cfg = build_run_config("mc", _flags(args), args.config)
    if cfg.free_energy:
        try:
            estimate = estimate_free_energy(cfg.N, cfg.beta, cfg.mu, cfg.q, cfg.sweeps, cfg.seed, K_max=cfg.Kmax)
        except DivergenceError as e:
            _say(f"free energy: {e.reason}")
            return EXIT_FAIL
        print(json.dumps(estimate.to_dict(), sort_keys=True))
        _say(f"free energy (1/N) ln Xi = {estimate.value:.6g} +- {estimate.error:.2g}")
        return EXIT_OK
    component = McRun(JointChainConfig(trace_path=cfg.trace_output, checkpoint_path=cfg.checkpoint))
    report = component.initiate_mc_run(cfg.N, cfg.Kmax, cfg.beta, cfg.mu, cfg.q, cfg.sweeps, cfg.seed,
                                       histogram=cfg.histogram)
    print(json.dumps(report, sort_keys=True))
    _say(f"mc: {cfg.sweeps} steps, accept rate {report['accept_rate']:.3f}, trace -> {cfg.trace_output}")
    return EXIT_OK if report["ok"] else EXIT_FAIL


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="causal-potts",
                                     description="Potts model on two-dimensional causal triangulations")
    parser.add_argument("--config", default=None, help="flat key = value file; flags override it")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("enumerate", help="dump or count rooted causal triangulations")
    p.add_argument("--N", type=int)
    p.add_argument("--K", type=int)
    p.add_argument("--count-only", action="store_true", default=None)
    p.add_argument("--output")
    p.set_defaults(handler=cmd_enumerate)

    p = sub.add_parser("verify", help="run the exact identity and inequality suites")
    p.add_argument("--suite", choices=["all", "es", "euler", "duality", "bounds"])
    p.add_argument("--N-max", dest="N_max", type=int)
    p.add_argument("--K-max", dest="K_max", type=int)
    p.add_argument("--q", dest="qs", help="comma-separated, e.g. 2,3")
    p.add_argument("--es-betas")
    p.add_argument("--potts-betas")
    p.add_argument("--bound-betas")
    p.add_argument("--ps")
    p.add_argument("--exhaustive", action="store_true", default=None)
    p.add_argument("--sample-configs", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--allow-skip", action="store_true", default=None)
    p.add_argument("--inject-fault", choices=["backmap"])
    p.add_argument("--spin-budget", type=lambda s: int(float(s)))
    p.add_argument("--bond-budget", type=int)
    p.add_argument("--output")
    p.set_defaults(handler=cmd_verify)

    p = sub.add_parser("phase", help="emit the phase-diagram curves and classify points")
    p.add_argument("--q", type=float)
    p.add_argument("--side", choices=["primal", "dual"])
    p.add_argument("--beta-grid")
    p.add_argument("--point", dest="points", action="append", help="beta,mu; repeatable")
    p.add_argument("--check-asymptote", action="store_true", default=None)
    p.add_argument("--output", dest="curve_output")
    p.add_argument("--verdict-output")
    p.set_defaults(handler=cmd_phase)

    p = sub.add_parser("transfer", help="transfer-matrix free-energy scans and divergence diagnostics")
    p.add_argument("--mu", help="comma-separated")
    p.add_argument("--K", type=int)
    p.add_argument("--N", help="comma-separated, e.g. 4,8,16")
    p.add_argument("--divergence", action="store_true", default=None)
    p.add_argument("--K-max", dest="K_max", type=int)
    p.add_argument("--output")
    p.set_defaults(handler=cmd_transfer)

    p = sub.add_parser("mc", help="Monte Carlo on the annealed joint measure")
    p.add_argument("--N", type=int)
    p.add_argument("--Kmax", type=int)
    p.add_argument("--q", type=int)
    p.add_argument("--beta", type=float)
    p.add_argument("--mu", type=float)
    p.add_argument("--sweeps", help="accepts 1e6 style counts")
    p.add_argument("--seed", type=int)
    p.add_argument("--histogram", action="store_true", default=None)
    p.add_argument("--free-energy", action="store_true", default=None)
    p.add_argument("--trace-output")
    p.add_argument("--checkpoint")
    p.set_defaults(handler=cmd_mc)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_USAGE if e.code else EXIT_OK
    logging.info(f"cli command={args.command} flags={_flags(args)}")
    try:
        return args.handler(args)
    except (ConfigError, DomainError) as e:
        _say(f"error: {e.reason}")
        return EXIT_USAGE
    except ResourceError as e:
        _say(f"skipped: {e.reason}")
        return EXIT_SKIP
    except CustomException as e:
        logging.error(str(e))
        _say(f"error: {e.reason}")
        return EXIT_FAIL
    except OSError as e:
        _say(f"error: {e}")
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
