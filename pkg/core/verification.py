"""
core/verification.py
Acceptance checks behind `wamp verify`.

Every check is a small class with a `name` and a `run()` returning a
CheckResult.  VerificationSuite instantiates the enabled ones and turns an
exception inside a check into a failed result instead of aborting the run.
Simulations are shared between checks through a per-suite cache.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Dict, FrozenSet, Iterable, List, Optional, Tuple

import numpy as np

from core.analytics import (
    eta_prime_analytic,
    gain_analytic,
    p1_analytic,
    p2_analytic,
    p_total_analytic,
)
from core.config import STRICT_TOLERANCE, TOLERANCE, UNITARY_TOLERANCE, VERIFY_MAX_N
from core.elements import BS_MATRIX
from core.heralding import HeraldReport, aggregate, simulate_point
from core.fock import FockState, ModeRegistry, ModeLabel, apply_two_mode_unitary, squared_norm
from core.protocol import (
    DEFAULT_QUBIT,
    ProtocolConfig,
    TimeBinQubit,
    build_amplifier,
    prepare_input_ensemble,
    run_circuit,
)

logger = logging.getLogger(__name__)

GRID_T = tuple(round(0.1 * k, 1) for k in range(1, 10))
CURVE_ETAS = (0.2, 0.6, 0.8)
FINE_T = tuple(round(0.01 * k, 2) for k in range(1, 100))
_S = 1 / math.sqrt(2)
INVARIANCE_QUBITS = (
    TimeBinQubit(1, 0),
    TimeBinQubit(0, 1),
    TimeBinQubit(_S, _S),
    TimeBinQubit(0.6, 0.8j),
)
CORRECTION_QUBITS = (
    TimeBinQubit(0.6, 0.8j),
    TimeBinQubit(_S, _S),
    TimeBinQubit(0.8, -0.6),
)


@dataclass
class CheckResult:
    name: str
    passed: bool
    max_residual: float = 0.0
    detail: str = ""

    def __str__(self):
        status = "PASS" if self.passed else "FAIL"
        residual = "" if math.isnan(self.max_residual) else f" max residual {self.max_residual:.3e}"
        detail = f" ({self.detail})" if self.detail else ""
        return f"[{status}] {self.name}:{residual}{detail}"


@dataclass
class VerifyContext:
    max_n: int = VERIFY_MAX_N
    tolerance: float = TOLERANCE
    strict_tolerance: float = STRICT_TOLERANCE
    faults: FrozenSet[str] = frozenset()
    _reports: Dict[Tuple, HeraldReport] = field(default_factory=dict, repr=False)

    @property
    def grid_ns(self) -> List[int]:
        return [n for n in (2, 3, 4) if n <= self.max_n]

    def report(self, n: int, t: float, qubit: Optional[TimeBinQubit] = None, eta: float = 1.0) -> HeraldReport:
        """Simulate (or reuse) one point.  Heralding is strict only about uniformity."""
        qubit = qubit or DEFAULT_QUBIT
        key = (n, t, qubit, eta, self.faults)
        if key not in self._reports:
            cfg = ProtocolConfig(n, t, eta, qubit)
            self._reports[key] = simulate_point(cfg, faults=self.faults, tolerance=self.strict_tolerance)
        return self._reports[key]

    @property
    def reports(self) -> Dict[Tuple, HeraldReport]:
        return dict(self._reports)


def _residual(values: Iterable[float]) -> float:
    return max(values, default=0.0)


# ============================================================================
# CHECKS
# ============================================================================

class BranchProbabilityCheck:
    name = "branch-probabilities"

    def __init__(self, ctx: VerifyContext):
        self.ctx = ctx

    def run(self) -> CheckResult:
        worst = 0.0
        for n in self.ctx.grid_ns:
            for t in GRID_T:
                r = self.ctx.report(n, t)
                worst = max(worst, abs(r.p1 - p1_analytic(t, n)), abs(r.p2 - p2_analytic(t, n)))
        return CheckResult(self.name, worst < self.ctx.strict_tolerance, worst, f"n in {self.ctx.grid_ns}")


class FidelityFormulaCheck:
    name = "fidelity-formula"

    def __init__(self, ctx: VerifyContext):
        self.ctx = ctx

    def run(self) -> CheckResult:
        worst = 0.0
        for n in self.ctx.grid_ns:
            for t in GRID_T:
                r = self.ctx.report(n, t)
                for eta in CURVE_ETAS:
                    _, eta_prime, _ = aggregate(r.p1, r.p2, eta)
                    worst = max(worst, abs(eta_prime - eta_prime_analytic(eta, t)))
        return CheckResult(self.name, worst < self.ctx.tolerance, worst)


class GainCurveCheck:
    name = "gain-curves"

    def __init__(self, ctx: VerifyContext):
        self.ctx = ctx

    def run(self) -> CheckResult:
        problems = []
        worst = 0.0
        r = self.ctx.report(3, 0.5) if self.ctx.max_n >= 3 else None
        for eta in CURVE_ETAS:
            curve = [gain_analytic(eta, t) for t in FINE_T]
            if not all(a > b for a, b in zip(curve, curve[1:])):
                problems.append(f"gain not strictly decreasing for eta={eta}")
            worst = max(worst, abs(gain_analytic(eta, 0.5) - 1.0))
            if r is not None:
                _, _, g = aggregate(r.p1, r.p2, eta)
                worst = max(worst, abs(g - 1.0))
            if not (gain_analytic(eta, 0.49) > 1.0 > gain_analytic(eta, 0.51)):
                problems.append(f"gain does not cross 1 at t=0.5 for eta={eta}")
        limit_error = abs(gain_analytic(0.2, 1e-3) - 5.0) / 5.0
        if limit_error > 0.01:
            problems.append(f"gain at t=1e-3 is {limit_error:.2%} away from 1/eta")
        passed = not problems and worst < self.ctx.tolerance
        return CheckResult(self.name, passed, worst, "; ".join(problems))


class SuccessProbabilityCheck:
    name = "success-probability"

    def __init__(self, ctx: VerifyContext):
        self.ctx = ctx

    def run(self) -> CheckResult:
        problems = []
        worst = 0.0
        rising = [t for t in FINE_T if t <= 0.5]
        for eta in CURVE_ETAS:
            for n in (3, 4):
                curve = [p_total_analytic(eta, t, n) for t in rising]
                peak_t = rising[int(np.argmax(curve))]
                if peak_t != 0.5:
                    problems.append(f"n={n} eta={eta}: P_total peaks at t={peak_t} on t <= 0.5")
                worst = max(worst, abs(max(curve) - 0.25 ** n))
            below = all(p_total_analytic(eta, t, 4) < p_total_analytic(eta, t, 3) for t in FINE_T)
            if not below:
                problems.append(f"eta={eta}: n=4 curve not below n=3")
        for n in (3, 4):
            if n <= self.ctx.max_n:
                r = self.ctx.report(n, 0.5)
                for eta in CURVE_ETAS:
                    p_total, _, _ = aggregate(r.p1, r.p2, eta)
                    worst = max(worst, abs(p_total - 0.25 ** n))
        passed = not problems and worst < self.ctx.strict_tolerance
        return CheckResult(self.name, passed, worst, "; ".join(problems))


class PatternUniformityCheck:
    name = "pattern-uniformity"

    def __init__(self, ctx: VerifyContext):
        self.ctx = ctx

    def run(self) -> CheckResult:
        worst = 0.0
        for n in self.ctx.grid_ns:
            for t in GRID_T:
                r = self.ctx.report(n, t)
                expected_signal = p1_analytic(t, n) / 4 ** n
                expected_vacuum = p2_analytic(t, n) / 4 ** n
                if len(r.records) != 4 ** n:
                    return CheckResult(self.name, False, float("nan"), f"n={n}: {len(r.records)} patterns")
                worst = max(
                    worst,
                    _residual(abs(rec.p_signal - expected_signal) for rec in r.records),
                    _residual(abs(rec.p_vacuum - expected_vacuum) for rec in r.records),
                )
        return CheckResult(self.name, worst < self.ctx.strict_tolerance, worst)


class CorrectionCompletenessCheck:
    name = "correction-completeness"

    def __init__(self, ctx: VerifyContext):
        self.ctx = ctx

    def run(self) -> CheckResult:
        worst = 0.0
        for q in CORRECTION_QUBITS:
            r = self.ctx.report(3, 0.25, q)
            worst = max(worst, 1.0 - r.min_fidelity)
        return CheckResult(self.name, worst <= self.ctx.strict_tolerance, worst, "n=3, 64 patterns")


class AlphaBetaInvarianceCheck:
    name = "alpha-beta-invariance"

    def __init__(self, ctx: VerifyContext):
        self.ctx = ctx

    def run(self) -> CheckResult:
        eta, t = 0.6, 0.25
        n = min(3, self.ctx.max_n)
        values = []
        for q in INVARIANCE_QUBITS:
            r = self.ctx.report(n, t, q, eta)
            values.append((r.eta_prime, r.gain, r.p_total))
        worst = max(
            max(v[i] for v in values) - min(v[i] for v in values) for i in range(3)
        )
        return CheckResult(self.name, worst < self.ctx.strict_tolerance, worst, f"n={n} t={t} eta={eta}")


class PhysicsPropertyCheck:
    name = "physics-properties"

    def __init__(self, ctx: VerifyContext):
        self.ctx = ctx

    def run(self) -> CheckResult:
        problems = []
        worst = 0.0

        # random small states through random unitaries, then back
        rng = np.random.default_rng(20240501)
        registry = ModeRegistry(ModeLabel(0, f"m{i}", "S", "H") for i in range(3))
        for _ in range(200):
            counts = rng.integers(0, 3, size=(4, 3))
            amps = rng.normal(size=4) + 1j * rng.normal(size=4)
            state = FockState(registry, {bytes(int(c) for c in row): a for row, a in zip(counts, amps)})
            state = state.normalized()
            z = (rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2))) / math.sqrt(2)
            u, _ = np.linalg.qr(z)
            m1, m2 = rng.choice(3, size=2, replace=False)
            out = apply_two_mode_unitary(state, int(m1), int(m2), u)
            worst = max(worst, abs(squared_norm(out) - squared_norm(state)))
            back = apply_two_mode_unitary(out, int(m1), int(m2), u.conj().T)
            worst = max(worst, back.distance(state))
        if worst > UNITARY_TOLERANCE:
            problems.append("unitarity")

        # Hong-Ou-Mandel on the 50:50 splitter
        hom = apply_two_mode_unitary(FockState(registry, {b"\x01\x01\x00": 1}), 0, 1, BS_MATRIX)
        hom_error = max(
            abs(hom.amplitude({0: 1, 1: 1})),
            abs(abs(hom.amplitude({0: 2})) - _S),
            abs(abs(hom.amplitude({1: 2})) - _S),
        )
        worst = max(worst, hom_error)
        if hom_error > UNITARY_TOLERANCE:
            problems.append("HOM")

        # photon-number conservation and measurement completeness
        n = min(3, self.ctx.max_n)
        cfg = ProtocolConfig(n, 0.3, 0.5)
        circuit = build_amplifier(cfg, faults=self.ctx.faults)
        evolved = run_circuit(prepare_input_ensemble(cfg, circuit), circuit)
        expected = {"signal": {2 * n + 1}, "vacuum": {2 * n}}
        for b in evolved:
            if b.state.photon_numbers() != expected[b.tag]:
                problems.append(f"{b.tag} photon numbers {sorted(b.state.photon_numbers())}")
        self.ctx.report(n, 0.3)
        for key, r in self.ctx.reports.items():
            worst = max(worst, r.completeness)
            if r.completeness > self.ctx.strict_tolerance:
                problems.append(f"completeness at n={key[0]} t={key[1]}")
                break

        return CheckResult(self.name, not problems, worst, "; ".join(problems))


class LargestNCheck:
    name = "largest-n"

    def __init__(self, ctx: VerifyContext):
        self.ctx = ctx

    def run(self) -> CheckResult:
        n = self.ctx.max_n
        if n <= 4:
            return CheckResult(self.name, True, 0.0, f"covered by the grid (max n = {n})")
        t = 0.3
        r = self.ctx.report(n, t)
        worst = max(
            abs(r.p1 - p1_analytic(t, n)),
            abs(r.p2 - p2_analytic(t, n)),
            r.uniformity_signal,
            r.uniformity_vacuum,
            1.0 - r.min_fidelity,
            r.completeness,
        )
        return CheckResult(self.name, worst < self.ctx.strict_tolerance, worst, f"n={n} t={t}")


CHECKS = (
    BranchProbabilityCheck,
    FidelityFormulaCheck,
    GainCurveCheck,
    SuccessProbabilityCheck,
    PatternUniformityCheck,
    CorrectionCompletenessCheck,
    AlphaBetaInvarianceCheck,
    PhysicsPropertyCheck,
    LargestNCheck,
)


class VerificationSuite:
    def __init__(self, enabled_checks=None, context: Optional[VerifyContext] = None):
        self._context = context or VerifyContext()
        enabled = set(enabled_checks or [])
        known = {check.name for check in CHECKS}
        unknown = enabled - known
        if unknown:
            logger.warning(f"[VERIFY] ignoring unknown checks: {', '.join(sorted(unknown))}")
        self._checks = [check(self._context) for check in CHECKS if not enabled or check.name in enabled]

    def run_all(self) -> List[CheckResult]:
        results = []
        for check in self._checks:
            try:
                result = check.run()
            except Exception as e:
                result = CheckResult(check.name, False, float("nan"), f"{type(e).__name__}: {e}")
            log = logger.info if result.passed else logger.warning
            log(f"[VERIFY] {result}")
            results.append(result)
        return results

    @property
    def loaded_check_names(self):
        return [c.name for c in self._checks]
