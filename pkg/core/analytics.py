"""
core/analytics.py
Closed forms for the amplifier, their one-sided limits, iterated
amplification, and the sweep harness that pairs them with simulation.

    P1      = t^(2N-1) (1 - t)          signal branch success probability
    P2      = t^(2N)                    vacuum branch success probability
    P_total = t^(2N-1) (η - 2ηt + t)
    η'      = η(1 - t) / (η - 2ηt + t)  independent of N
    g       = η'/η = (1 - t) / (η(1 - t) + (1 - η)t)
"""

import logging
import math
from dataclasses import astuple, dataclass
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

from joblib import Parallel, delayed

from core.config import STRICT_TOLERANCE, T_CLAMP, TOLERANCE, WORKERS
from core.errors import ConfigError, InvariantViolation
from core.heralding import aggregate, simulate_point
from core.protocol import DEFAULT_QUBIT, ProtocolConfig, TimeBinQubit
from core.report_io import format_number

logger = logging.getLogger(__name__)

CSV_HEADER = ("n", "t", "eta", "p1", "p2", "p_total", "eta_prime", "gain", "source")
COMPARED_FIELDS = ("p1", "p2", "p_total", "eta_prime", "gain")


def _check_eta(eta: float):
    if not 0.0 <= eta <= 1.0:
        raise ConfigError(f"eta must lie in [0, 1], got {eta}")


def _check_t(t: float):
    if not 0.0 <= t <= 1.0:
        raise ConfigError(f"t must lie in [0, 1], got {t}")


def _check_n(n: int):
    if n < 2:
        raise ConfigError(f"the amplifier needs at least 2 parties, got {n}")


# ============================================================================
# CLOSED FORMS
# ============================================================================

def p1_analytic(t: float, n: int) -> float:
    _check_t(t)
    _check_n(n)
    return t ** (2 * n - 1) * (1.0 - t)


def p2_analytic(t: float, n: int) -> float:
    _check_t(t)
    _check_n(n)
    return t ** (2 * n)


def p_total_analytic(eta: float, t: float, n: int) -> float:
    _check_eta(eta)
    _check_t(t)
    _check_n(n)
    return t ** (2 * n - 1) * (eta - 2.0 * eta * t + t)


def eta_prime_analytic(eta: float, t: float) -> float:
    _check_eta(eta)
    _check_t(t)
    denominator = eta - 2.0 * eta * t + t
    if denominator == 0.0:
        raise ConfigError(f"eta'({eta}, {t}) is undefined: zero denominator")
    return eta * (1.0 - t) / denominator


def gain_analytic(eta: float, t: float) -> float:
    _check_eta(eta)
    _check_t(t)
    if eta == 0.0:
        raise ConfigError("gain is undefined at eta = 0")
    denominator = eta * (1.0 - t) + (1.0 - eta) * t
    if denominator == 0.0:
        raise ConfigError(f"gain({eta}, {t}) is undefined: zero denominator")
    return (1.0 - t) / denominator


def gain_limits(eta: float) -> Dict[str, float]:
    """One-sided limits of g at the excluded endpoints of t."""
    _check_eta(eta)
    if eta == 0.0:
        raise ConfigError("gain is undefined at eta = 0")
    return {"t->0": 1.0 / eta, "t->1": 1.0 if eta == 1.0 else 0.0}


def eta_prime_limits(eta: float) -> Dict[str, float]:
    _check_eta(eta)
    return {"t->0": 1.0 if eta > 0.0 else 0.0, "t->1": 1.0 if eta == 1.0 else 0.0}


def iterate_amplification(eta: float, t: float, rounds: int) -> List[float]:
    """
    Fidelity after 0..rounds passes through the amplifier.  The output keeps
    the form of the input, so each round feeds η' back in as η.
    """
    if rounds < 0:
        raise ConfigError(f"rounds must be non-negative, got {rounds}")
    history = [eta]
    for _ in range(rounds):
        history.append(eta_prime_analytic(history[-1], t))
    return history


def transmission_for_fidelity(eta: float, target: float) -> float:
    """The t at which one pass turns fidelity eta into `target`."""
    if not 0.0 < eta < 1.0:
        raise ConfigError(f"eta must lie strictly between 0 and 1, got {eta}")
    if not 0.0 < target < 1.0:
        raise ConfigError(f"target fidelity must lie strictly between 0 and 1, got {target}")
    return eta * (1.0 - target) / (eta + target * (1.0 - 2.0 * eta))


# ============================================================================
# SWEEPS
# ============================================================================

@dataclass(frozen=True)
class SweepRow:
    n: int
    t: float
    eta: float
    p1: float
    p2: float
    p_total: float
    eta_prime: float
    gain: float
    source: str

    def as_csv_row(self) -> Tuple[str, ...]:
        return tuple(
            value if isinstance(value, str) else format_number(value) for value in astuple(self)
        )

    def as_dict(self) -> Dict[str, object]:
        return dict(zip(CSV_HEADER, astuple(self)))


def analytic_row(n: int, t: float, eta: float) -> SweepRow:
    return SweepRow(
        n=n,
        t=t,
        eta=eta,
        p1=p1_analytic(t, n),
        p2=p2_analytic(t, n),
        p_total=p_total_analytic(eta, t, n),
        eta_prime=eta_prime_analytic(eta, t),
        gain=gain_analytic(eta, t),
        source="analytic",
    )


def simulated_branches(n: int, t: float, qubit: TimeBinQubit = DEFAULT_QUBIT) -> Tuple[float, float]:
    """(P1, P2) from one full simulation; both are independent of eta."""
    report = simulate_point(ProtocolConfig(n, t, 1.0, qubit), tolerance=STRICT_TOLERANCE)
    return report.p1, report.p2


def simulated_row(n: int, t: float, eta: float, p1: float, p2: float) -> SweepRow:
    p_total, eta_prime, gain = aggregate(p1, p2, eta)
    return SweepRow(n, t, eta, p1, p2, p_total, eta_prime, gain, "simulated")


def clamp_grid(t_grid: Iterable[float]) -> List[float]:
    """Clamp into [T_CLAMP, 1 - T_CLAMP], then sort and de-duplicate."""
    clamped = set()
    for t in t_grid:
        if math.isnan(t):
            raise ConfigError("t grid contains NaN")
        c = min(max(t, T_CLAMP), 1.0 - T_CLAMP)
        if c != t:
            logger.warning(f"[SWEEP] t={t:g} clamped to {c:g}")
        clamped.add(c)
    return sorted(clamped)


def sweep(
    n_list: Sequence[int],
    t_grid: Sequence[float],
    eta_list: Sequence[float],
    include_simulation: bool = False,
    workers: Optional[int] = None,
    qubit: TimeBinQubit = DEFAULT_QUBIT,
    tolerance: float = TOLERANCE,
) -> List[SweepRow]:
    """
    Rows ordered by (n, eta, t), analytic before simulated.

    Each (n, t) point is simulated once, on `workers` joblib workers, and
    reused for every eta.  Analytic/simulated disagreement beyond `tolerance`
    raises InvariantViolation.
    """
    if not n_list or not t_grid or not eta_list:
        raise ConfigError("sweep needs non-empty n, t and eta lists")
    ns = sorted(set(int(n) for n in n_list))
    for n in ns:
        _check_n(n)
    etas = sorted(set(float(e) for e in eta_list))
    for eta in etas:
        if not 0.0 < eta <= 1.0:
            raise ConfigError(f"sweep eta values must lie in (0, 1], got {eta}")
    ts = clamp_grid(float(t) for t in t_grid)
    workers = WORKERS if workers is None else workers
    if workers < 1:
        raise ConfigError(f"workers must be at least 1, got {workers}")

    branches: Dict[Tuple[int, float], Tuple[float, float]] = {}
    if include_simulation:
        points = [(n, t) for n in ns for t in ts]
        logger.info(f"[SWEEP] simulating {len(points)} (n, t) points on {workers} worker(s)")
        results = Parallel(n_jobs=workers)(delayed(simulated_branches)(n, t, qubit) for n, t in points)
        branches = dict(zip(points, results))

    rows: List[SweepRow] = []
    for n in ns:
        for eta in etas:
            for t in ts:
                expected = analytic_row(n, t, eta)
                rows.append(expected)
                if not include_simulation:
                    continue
                simulated = simulated_row(n, t, eta, *branches[(n, t)])
                for name in COMPARED_FIELDS:
                    diff = abs(getattr(simulated, name) - getattr(expected, name))
                    if diff > tolerance:
                        raise InvariantViolation(
                            f"n={n} t={t:g} eta={eta:g}: simulated {name} differs from closed form by {diff:.3e}"
                        )
                rows.append(simulated)
    logger.info(f"[SWEEP] {len(rows)} rows")
    return rows
