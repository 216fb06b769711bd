import argparse
import logging
import math
import os
import sys
from typing import List, Optional, Tuple

project_root = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
if project_root not in sys.path:
    sys.path.insert(0, project_root)

from core import config
from core.analytics import (
    CSV_HEADER,
    eta_prime_analytic,
    gain_analytic,
    p1_analytic,
    p2_analytic,
    p_total_analytic,
    sweep,
)
from core.errors import ConfigError, InvariantViolation
from core.heralding import simulate_point
from core.parsing import parse_complex, parse_float_list, parse_int_list
from core.protocol import FAULTS, ProtocolConfig, TimeBinQubit
from core.report_io import format_number, to_csv, to_json, write_output
from core.verification import CHECKS, VerificationSuite, VerifyContext

logger = logging.getLogger("wamp")

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_INVARIANT = 3
EXIT_IO = 4

TRACE_MAX_N = 3
COMPARED = ("p1", "p2", "p_total", "eta_prime", "gain")


# ============================================================================
# COMMANDS
# ============================================================================

def _qubit(args) -> TimeBinQubit:
    return TimeBinQubit(parse_complex(args.alpha), parse_complex(args.beta))


def _trace_callback(step, element, tag, state):
    logger.info(f"[TRACE] {tag} #{step} {element}: {len(state)} terms")
    for line in state.describe(limit=8):
        logger.info(f"[TRACE]     {line}")


def cmd_simulate(args) -> Tuple[int, str]:
    cfg = ProtocolConfig(args.n, args.t, args.eta, _qubit(args))
    if args.trace and cfg.n_parties > TRACE_MAX_N:
        raise ConfigError(f"--trace is limited to n <= {TRACE_MAX_N}")
    report = simulate_point(
        cfg,
        on_element=_trace_callback if args.trace else None,
        tolerance=args.strict_tolerance,
    )

    analytic = {
        "p1": p1_analytic(cfg.t, cfg.n_parties),
        "p2": p2_analytic(cfg.t, cfg.n_parties),
        "p_total": p_total_analytic(cfg.eta, cfg.t, cfg.n_parties),
        "eta_prime": eta_prime_analytic(cfg.eta, cfg.t),
        "gain": gain_analytic(cfg.eta, cfg.t) if cfg.eta > 0 else None,
    }
    simulated = report.to_dict()
    diffs = {
        name: None if analytic[name] is None else abs(simulated[name] - analytic[name])
        for name in COMPARED
    }
    ok = (
        all(d is None or d <= args.tolerance for d in diffs.values())
        and max(report.uniformity_signal, report.uniformity_vacuum) <= args.strict_tolerance
        and 1.0 - report.min_fidelity <= args.strict_tolerance
        and report.completeness <= args.strict_tolerance
    )
    document = {
        "config": {
            "n": cfg.n_parties,
            "t": cfg.t,
            "eta": cfg.eta,
            "alpha": [cfg.qubit.alpha.real, cfg.qubit.alpha.imag],
            "beta": [cfg.qubit.beta.real, cfg.qubit.beta.imag],
        },
        "simulated": simulated,
        "analytic": analytic,
        "abs_diff": diffs,
        "ok": ok,
    }
    if not ok:
        logger.error("[SIMULATE] residuals above tolerance")

    if args.format == "csv":
        rows = [("config." + k, _csv_value(v)) for k, v in document["config"].items()]
        for section in ("simulated", "analytic", "abs_diff"):
            rows.extend((f"{section}.{k}", _csv_value(v)) for k, v in document[section].items())
        rows.append(("ok", format_number(ok)))
        text = to_csv(("field", "value"), rows)
    else:
        text = to_json(document)
    return (EXIT_OK if ok else EXIT_INVARIANT), text


def _csv_value(value) -> str:
    if isinstance(value, list):
        return " ".join(format_number(v) for v in value)
    return format_number(value)


def cmd_sweep(args) -> Tuple[int, str]:
    rows = sweep(
        parse_int_list(args.n),
        parse_float_list(args.t_grid),
        parse_float_list(args.eta),
        include_simulation=args.simulate,
        workers=args.workers,
        qubit=_qubit(args),
        tolerance=args.tolerance,
    )
    if args.format == "json":
        return EXIT_OK, to_json({"columns": list(CSV_HEADER), "rows": [r.as_dict() for r in rows]})
    return EXIT_OK, to_csv(CSV_HEADER, (r.as_csv_row() for r in rows))


def cmd_verify(args) -> Tuple[int, str]:
    if args.max_n < 2:
        raise ConfigError(f"--max-n must be at least 2, got {args.max_n}")
    faults = frozenset(f for f in (args.inject_fault or []))
    unknown = faults - FAULTS
    if unknown:
        raise ConfigError(f"unknown fault(s) {sorted(unknown)}; available: {sorted(FAULTS)}")
    checks = [c.strip() for c in args.checks.split(",") if c.strip()] if args.checks else config.ENABLED_CHECKS
    context = VerifyContext(
        max_n=args.max_n,
        tolerance=args.tolerance,
        strict_tolerance=args.strict_tolerance,
        faults=faults,
    )
    suite = VerificationSuite(enabled_checks=checks, context=context)
    if not suite.loaded_check_names:
        raise ConfigError("no verification checks selected")
    results = suite.run_all()
    passed = all(r.passed for r in results)
    residuals = [r.max_residual for r in results if not math.isnan(r.max_residual)]

    if args.format == "json":
        text = to_json({
            "checks": [
                {"name": r.name, "passed": r.passed, "max_residual": r.max_residual, "detail": r.detail}
                for r in results
            ],
            "max_residual": max(residuals, default=0.0),
            "passed": passed,
        })
    else:
        lines = [str(r) for r in results]
        lines.append(
            f"{sum(r.passed for r in results)}/{len(results)} checks passed, "
            f"max residual {max(residuals, default=0.0):.3e}"
        )
        text = "\n".join(lines) + "\n"
    return (EXIT_OK if passed else EXIT_INVARIANT), text


# ============================================================================
# ENTRY POINT
# ============================================================================

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="wamp",
        description="Heralded amplifier simulator for single-photon N-mode W states of time-bin qubits.",
    )
    parser.add_argument("--log-level", default=None, help="DEBUG, INFO, WARNING, ... (env WAMP_LOG_LEVEL)")
    parser.add_argument("--quiet", action="store_true", help="only warnings and errors on stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, formats, default_format):
        p.add_argument("--format", choices=formats, default=default_format)
        p.add_argument("--out", default=None, help="output path (default: stdout)")
        p.add_argument("--tolerance", type=float, default=config.TOLERANCE,
                       help="analytic vs simulated tolerance")
        p.add_argument("--strict-tolerance", type=float, default=config.STRICT_TOLERANCE,
                       help="uniformity / fidelity / completeness tolerance")

    def amplitudes(p):
        p.add_argument("--alpha", default="sqrt(1/2),0", help="S_H amplitude as re,im (e.g. 0.6,0 or sqrt(1/2),0)")
        p.add_argument("--beta", default="sqrt(1/2),0", help="L_V amplitude as re,im")

    p = sub.add_parser("simulate", help="simulate one (n, t, eta) point")
    p.add_argument("--n", type=int, required=True, help="number of parties (>= 2)")
    p.add_argument("--t", type=float, required=True, help="VBS transmission in (0, 1)")
    p.add_argument("--eta", type=float, required=True, help="input fidelity in [0, 1]")
    amplitudes(p)
    p.add_argument("--trace", action="store_true", help=f"log the state after every element (n <= {TRACE_MAX_N})")
    common(p, ("json", "csv"), "json")
    p.set_defaults(handler=cmd_simulate)

    p = sub.add_parser("sweep", help="closed-form (and optionally simulated) sweep table")
    p.add_argument("--n", required=True, help="party counts, e.g. 3,4")
    p.add_argument("--t-grid", required=True, help="t values or start:stop:step, e.g. 0.01:0.99:0.01")
    p.add_argument("--eta", required=True, help="eta values, e.g. 0.2,0.6,0.8")
    p.add_argument("--simulate", action="store_true", help="add simulated rows and check them")
    p.add_argument("--workers", type=int, default=None, help="parallel workers (env WAMP_WORKERS)")
    amplitudes(p)
    common(p, ("csv", "json"), "csv")
    p.set_defaults(handler=cmd_sweep)

    p = sub.add_parser("verify", help="run the acceptance checks")
    p.add_argument("--max-n", type=int, default=config.VERIFY_MAX_N)
    p.add_argument("--checks", default=None,
                   help=f"comma list out of: {', '.join(c.name for c in CHECKS)} (env WAMP_ENABLED_CHECKS)")
    p.add_argument("--inject-fault", action="append", choices=sorted(FAULTS),
                   help="negative control: deliberately break the circuit")
    common(p, ("text", "json"), "text")
    p.set_defaults(handler=cmd_verify)
    return parser


def setup_logging(level: Optional[str] = None, quiet: bool = False):
    level = "WARNING" if quiet else (level or config.LOG_LEVEL).upper()
    logging.basicConfig(
        level=getattr(logging, level, logging.INFO),
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    setup_logging(args.log_level, args.quiet)
    try:
        code, text = args.handler(args)
        write_output(text, args.out)
        return code
    except InvariantViolation as e:
        logger.error(f"invariant violation: {e}")
        return EXIT_INVARIANT
    except (ConfigError, ValueError) as e:
        logger.error(f"usage error: {e}")
        return EXIT_USAGE
    except OSError as e:
        logger.error(f"I/O error: {e}")
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
