"""
core/heralding.py
Detection patterns, post-selection, phase-flip correction and the heralding
report.

Detector D1..D4 of a party watch channels a5..a8:
  D1 = H out of a3, D2 = V out of a3, D3 = H out of a4, D4 = V out of a4.
A party succeeds when exactly one H-side detector (D1/D3) and one V-side
detector (D2/D4) each register one photon.
"""

import itertools
import logging
import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from core.config import (
    REFERENCE_ALPHA,
    REFERENCE_BETA,
    REFERENCE_T,
    STRICT_TOLERANCE,
)
from core.elements import Ensemble
from core.errors import ConfigError, InvariantViolation
from core.fock import FockState, Polarization, TimeBin, apply_phase, fidelity, grouped_rows, row_groups
from core.protocol import (
    Circuit,
    ElementCallback,
    ProtocolConfig,
    TimeBinQubit,
    build_amplifier,
    prepare_input_ensemble,
    prepare_w_state,
    run_circuit,
)

logger = logging.getLogger(__name__)

DETECTORS = ("D1", "D2", "D3", "D4")
H_SIDE = frozenset({"D1", "D3"})
V_SIDE = frozenset({"D2", "D4"})
SUCCESS_PAIRS = (("D1", "D2"), ("D1", "D4"), ("D2", "D3"), ("D3", "D4"))

# per-party click quadruple (D1, D2, D3, D4) -> detector pair
_SUCCESS_CLICKS = {
    tuple(1 if d in pair else 0 for d in DETECTORS): pair for pair in SUCCESS_PAIRS
}
_SUCCESS_ROWS = np.array([[1 if d in pair else 0 for d in DETECTORS] for pair in SUCCESS_PAIRS], dtype=np.int64)

Clicks = Tuple[int, ...]


@dataclass(frozen=True)
class DetectionPattern:
    """One detector pair per party, e.g. D1D2/D1D4/D3D4."""

    pairs: Tuple[Tuple[str, str], ...]

    def __post_init__(self):
        pairs = tuple(tuple(sorted(p)) for p in self.pairs)
        for pair in pairs:
            if len(pair) != 2 or not set(pair) <= set(DETECTORS) or pair[0] == pair[1]:
                raise ConfigError(f"invalid detector pair {pair}")
        object.__setattr__(self, "pairs", pairs)

    @classmethod
    def parse(cls, text: str) -> "DetectionPattern":
        """'D1D2/D3D4' -> DetectionPattern."""
        pairs = []
        for chunk in text.strip().split("/"):
            chunk = chunk.strip().upper()
            if len(chunk) != 4:
                raise ConfigError(f"cannot read detector pair '{chunk}'")
            pairs.append((chunk[:2], chunk[2:]))
        return cls(tuple(pairs))

    @classmethod
    def from_clicks(cls, clicks: Clicks) -> Optional["DetectionPattern"]:
        """Success pattern for a click vector, None when any party fails."""
        pairs = []
        for p in range(0, len(clicks), len(DETECTORS)):
            pair = _SUCCESS_CLICKS.get(tuple(clicks[p:p + len(DETECTORS)]))
            if pair is None:
                return None
            pairs.append(pair)
        return cls(tuple(pairs))

    @property
    def n(self) -> int:
        return len(self.pairs)

    @property
    def is_success(self) -> bool:
        return all(pair in SUCCESS_PAIRS for pair in self.pairs)

    def clicks(self) -> Clicks:
        return tuple(1 if d in pair else 0 for pair in self.pairs for d in DETECTORS)

    def __str__(self):
        return "/".join(a + b for a, b in self.pairs)


@dataclass(frozen=True)
class PhaseFlip:
    """Negate the S_H and/or L_V amplitude on one party's out modes."""

    flip_short: bool = False
    flip_long: bool = False

    def __str__(self):
        return {(False, False): "I", (True, False): "Z_S", (False, True): "Z_L", (True, True): "-I"}[
            (self.flip_short, self.flip_long)
        ]


@dataclass
class PatternRecord:
    pattern: DetectionPattern
    p_signal: float
    p_vacuum: float
    conditional: Optional[Ensemble]
    fidelity: float


@dataclass
class DetectionTable:
    """Click-vector probabilities of one branch plus its success conditionals."""

    probabilities: Dict[Clicks, float]
    conditionals: Dict[DetectionPattern, FockState]

    def probability(self, pattern: DetectionPattern) -> float:
        return self.probabilities.get(pattern.clicks(), 0.0)

    @property
    def total(self) -> float:
        return math.fsum(self.probabilities.values())


@dataclass
class HeraldReport:
    n: int
    t: float
    eta: float
    records: List[PatternRecord]
    p1: float
    p2: float
    p_total: float
    eta_prime: float
    gain: Optional[float]
    uniformity_signal: float
    uniformity_vacuum: float
    min_fidelity: float
    completeness: float
    output: Optional[Ensemble] = field(default=None, repr=False)

    def to_dict(self) -> Dict[str, object]:
        return {
            "n": self.n,
            "t": self.t,
            "eta": self.eta,
            "patterns": len(self.records),
            "p1": self.p1,
            "p2": self.p2,
            "p_total": self.p_total,
            "eta_prime": self.eta_prime,
            "gain": self.gain,
            "uniformity_residual_signal": self.uniformity_signal,
            "uniformity_residual_vacuum": self.uniformity_vacuum,
            "min_fidelity": self.min_fidelity,
            "completeness_residual": self.completeness,
        }


# ============================================================================
# PATTERNS AND DETECTION
# ============================================================================

def success_patterns(n: int) -> List[DetectionPattern]:
    if n < 1:
        raise ConfigError(f"need at least one party, got {n}")
    return [DetectionPattern(pairs) for pairs in itertools.product(SUCCESS_PAIRS, repeat=n)]


def _detector_layout(circuit: Circuit) -> List[Tuple[int, int, bool]]:
    """For each measured mode: (mode index, click slot, whether its time bin matches the detector side)."""
    layout = []
    for p in range(circuit.n_parties):
        for d_idx, (d, channel) in enumerate(zip(DETECTORS, circuit.detectors)):
            expected = TimeBin.S if d in H_SIDE else TimeBin.L
            for idx in circuit.detector_modes(p):
                label = circuit.registry.label(idx)
                if label.channel == channel:
                    layout.append((idx, p * len(DETECTORS) + d_idx, label.timebin is expected))
    return layout


def detection_table(state: FockState, circuit: Circuit) -> DetectionTable:
    """
    Probabilities of every click vector that occurs in `state` and the
    unnormalised conditional out-mode state of every success pattern.

    Detectors resolve photon number per channel.  H-side detectors must only
    ever see S-bin photons and V-side detectors L-bin photons; anything else
    raises InvariantViolation.  Each term's click vector is computed once.
    """
    n = circuit.n_parties
    layout = _detector_layout(circuit)
    modes = [idx for idx, _, _ in layout]
    slots = np.array([slot for _, slot, _ in layout], dtype=np.intp)
    locked = np.array([ok for _, _, ok in layout], dtype=bool)

    occ, amp = state.occupations()
    if not len(amp):
        return DetectionTable({}, {})
    counts = occ[:, modes].astype(np.int64)
    wrong_bin = (counts[:, ~locked] > 0).any(axis=0)
    if wrong_bin.any():
        raise InvariantViolation(
            f"time-bin lock broken: detector slots {sorted(set(slots[~locked][wrong_bin].tolist()))} "
            f"saw a photon in the wrong time bin"
        )

    to_slots = np.zeros((len(layout), n * len(DETECTORS)), dtype=np.int64)
    to_slots[np.arange(len(layout)), slots] = 1
    clicks = counts @ to_slots
    first, inverse = row_groups(clicks)
    weights = amp.real ** 2 + amp.imag ** 2
    totals = np.bincount(inverse, weights=weights, minlength=len(first))
    probabilities: Dict[Clicks, float] = dict(zip(map(tuple, clicks[first].tolist()), totals.tolist()))

    # per party: index into SUCCESS_PAIRS of the pair that fired, -1 if none
    per_party = clicks.reshape(len(amp), n, len(DETECTORS))
    hits = (per_party[:, :, None, :] == _SUCCESS_ROWS[None, None, :, :]).all(axis=-1)
    fired = np.where(hits.any(axis=-1), hits.argmax(axis=-1), -1)
    success = np.flatnonzero((fired >= 0).all(axis=1))

    conditionals: Dict[DetectionPattern, FockState] = {}
    if success.size:
        first, inverse = row_groups(fired[success])
        for rows in grouped_rows(inverse, len(first)):
            rows = success[rows]
            pattern = DetectionPattern(tuple(SUCCESS_PAIRS[i] for i in fired[rows[0]].tolist()))
            block = occ[rows]
            block[:, modes] = 0
            conditionals[pattern] = FockState.from_arrays(state.registry, block, amp[rows])
    return DetectionTable(probabilities, conditionals)


def postselect(
    e: Ensemble, pattern: DetectionPattern, c: Circuit
) -> Tuple[float, float, Optional[Ensemble]]:
    """
    Project each branch of an evolved ensemble on `pattern`.

    Returns the signal and vacuum branch probabilities of the pattern and the
    weight-combined conditional ensemble on the out modes (None when the
    pattern cannot occur).
    """
    probs = {"signal": 0.0, "vacuum": 0.0}
    weighted = []
    for b in e:
        table = detection_table(b.state, c)
        prob = table.probability(pattern)
        probs[b.tag] = prob
        sub = table.conditionals.get(pattern)
        if sub is not None:
            weighted.append((b.weight * prob, sub, b.tag))
    return probs["signal"], probs["vacuum"], Ensemble.from_weights(weighted)


# ============================================================================
# CORRECTION
# ============================================================================

def _classify(sub: FockState, circuit: Circuit, qubit: TimeBinQubit) -> Tuple[PhaseFlip, ...]:
    """Read per-party signs off a conditional state Σ_k (s_k α|S_H⟩_k + r_k β|L_V⟩_k)."""
    n = circuit.n_parties
    scale = 1.0 / math.sqrt(n)
    ratios = []
    for k in range(n):
        a = sub.amplitude({circuit.out_mode(k, TimeBin.S, Polarization.H): 1}) / (qubit.alpha * scale)
        b = sub.amplitude({circuit.out_mode(k, TimeBin.L, Polarization.V): 1}) / (qubit.beta * scale)
        ratios.append((a, b))
    reference = ratios[0][1]
    if abs(reference) == 0.0:
        raise InvariantViolation("reference conditional state has no L_V amplitude on party 0")

    flips = []
    for k, (a, b) in enumerate(ratios):
        signs = []
        for value in (a / reference, b / reference):
            if abs(value - 1.0) < 1e-6:
                signs.append(False)
            elif abs(value + 1.0) < 1e-6:
                signs.append(True)
            else:
                raise InvariantViolation(
                    f"party {k}: relative amplitude {value:.6g} is not a sign; cannot classify the correction"
                )
        flips.append(PhaseFlip(*signs))
    return tuple(flips)


@lru_cache(maxsize=None)
def correction_table(n: int) -> Dict[DetectionPattern, Tuple[PhaseFlip, ...]]:
    """
    Per-party phase flips for every success pattern of an n-party amplifier.

    Simulated once per n at a reference configuration and cached.  Flips are
    normalised so that party 0's L_V arm is never flipped.
    """
    qubit = TimeBinQubit(REFERENCE_ALPHA, REFERENCE_BETA)
    if qubit.alpha == 0 or qubit.beta == 0:
        raise ConfigError("the reference qubit needs both alpha and beta nonzero")
    cfg = ProtocolConfig(n, REFERENCE_T, 1.0, qubit)
    circuit = build_amplifier(cfg)
    # eta = 1: the vacuum branch carries no weight and is not evolved
    signal = prepare_input_ensemble(cfg, circuit).branch("signal")
    evolved = run_circuit(Ensemble([signal]), circuit)
    table = detection_table(evolved.branch("signal").state, circuit)

    flips = {}
    for pattern in success_patterns(n):
        sub = table.conditionals.get(pattern)
        if sub is None:
            raise InvariantViolation(f"success pattern {pattern} never occurs at the reference point")
        flips[pattern] = _classify(sub, circuit, qubit)
    identity = sum(1 for f in flips.values() if not any(x.flip_short or x.flip_long for x in f))
    logger.info(f"[HERALD] correction table for n={n}: {len(flips)} patterns, {identity} need no flip")
    return flips


def correction_for(pattern: DetectionPattern) -> Tuple[PhaseFlip, ...]:
    if not pattern.is_success:
        raise ConfigError(f"{pattern} is not a success pattern; no correction exists")
    if pattern.n < 2:
        raise ConfigError("corrections are tabulated for at least 2 parties")
    return correction_table(pattern.n)[pattern]


def apply_correction(state: FockState, circuit: Circuit, flips: Sequence[PhaseFlip]) -> FockState:
    if len(flips) != circuit.n_parties:
        raise ConfigError(f"expected {circuit.n_parties} phase flips, got {len(flips)}")
    for k, flip in enumerate(flips):
        if flip.flip_short:
            state = apply_phase(state, circuit.out_mode(k, TimeBin.S, Polarization.H), -1)
        if flip.flip_long:
            state = apply_phase(state, circuit.out_mode(k, TimeBin.L, Polarization.V), -1)
    return state


# ============================================================================
# REPORT
# ============================================================================

def aggregate(p1: float, p2: float, eta: float) -> Tuple[float, float, Optional[float]]:
    """(P_total, eta', gain) from the two branch success probabilities."""
    p_total = eta * p1 + (1.0 - eta) * p2
    if p_total == 0.0:
        raise InvariantViolation("no success pattern can occur; P_total is zero")
    eta_prime = eta * p1 / p_total
    gain = eta_prime / eta if eta > 0.0 else None
    return p_total, eta_prime, gain


def _spread(values: Iterable[float]) -> float:
    values = list(values)
    if not values:
        return 0.0
    mean = math.fsum(values) / len(values)
    return max(abs(v - mean) for v in values)


def herald(
    e: Ensemble,
    c: Circuit,
    cfg: ProtocolConfig,
    *,
    tolerance: float = STRICT_TOLERANCE,
    corrections: Optional[Dict[DetectionPattern, Tuple[PhaseFlip, ...]]] = None,
) -> HeraldReport:
    """
    Post-select an evolved ensemble on every success pattern.

    `e` must carry both a "signal" and a "vacuum" branch, zero-weight ones
    included, as prepare_input_ensemble builds it (apply_loss_channel with
    drop_empty=False).  A missing branch raises InvariantViolation.

    Raises InvariantViolation when the success patterns of a branch are not
    equally likely within `tolerance`.  Fidelity and completeness residuals
    are reported, not enforced.
    """
    n = cfg.n_parties
    patterns = success_patterns(n)
    if corrections is None:
        corrections = correction_table(n)

    missing = [tag for tag in ("signal", "vacuum") if e.branch(tag) is None]
    if missing:
        raise InvariantViolation(
            f"ensemble has no {' or '.join(missing)} branch; build it with drop_empty=False so both are evolved"
        )
    tables = {b.tag: detection_table(b.state, c) for b in e}
    weights = {b.tag: b.weight for b in e}
    signal = tables["signal"]
    vacuum = tables["vacuum"]
    completeness = max(abs(tbl.total - 1.0) for tbl in tables.values())

    target = prepare_w_state(n, cfg.qubit, c.registry, channel=c.out_channel)
    empty = FockState.vacuum(c.registry)

    records = []
    output_items = []
    for pattern in patterns:
        p_signal = signal.probability(pattern)
        p_vacuum = vacuum.probability(pattern)

        items = []
        pattern_fidelity = float("nan")
        if pattern in signal.conditionals:
            corrected = apply_correction(signal.conditionals[pattern], c, corrections[pattern]).normalized()
            pattern_fidelity = fidelity(corrected, target)
            items.append((weights["signal"] * p_signal, corrected, "signal"))
        if pattern in vacuum.conditionals:
            leftover = vacuum.conditionals[pattern]
            if fidelity(leftover, empty) < 1.0 - tolerance:
                raise InvariantViolation(f"vacuum branch left photons on the out modes for {pattern}")
            items.append((weights["vacuum"] * p_vacuum, leftover, "vacuum"))
        output_items.extend((w, s, f"{tag}:{pattern}") for w, s, tag in items)
        records.append(PatternRecord(pattern, p_signal, p_vacuum, Ensemble.from_weights(items), pattern_fidelity))

    uniformity_signal = _spread(r.p_signal for r in records)
    uniformity_vacuum = _spread(r.p_vacuum for r in records)
    worst = max(uniformity_signal, uniformity_vacuum)
    if worst > tolerance:
        raise InvariantViolation(
            f"success patterns are not equally likely: spread {worst:.3e} exceeds {tolerance:g} "
            f"(amplitudes under WAMP_PRUNE are dropped, which bites at very small t and large n)"
        )

    fidelities = [r.fidelity for r in records if not math.isnan(r.fidelity)]
    min_fidelity = min(fidelities) if fidelities else float("nan")

    p1 = math.fsum(r.p_signal for r in records)
    p2 = math.fsum(r.p_vacuum for r in records)
    p_total, eta_prime, gain = aggregate(p1, p2, cfg.eta)

    logger.info(
        f"[HERALD] n={n} t={cfg.t:g} eta={cfg.eta:g}: P1={p1:.6g} P2={p2:.6g} "
        f"eta'={eta_prime:.6g} min F={min_fidelity:.12g}"
    )
    return HeraldReport(
        n=n,
        t=cfg.t,
        eta=cfg.eta,
        records=records,
        p1=p1,
        p2=p2,
        p_total=p_total,
        eta_prime=eta_prime,
        gain=gain,
        uniformity_signal=uniformity_signal,
        uniformity_vacuum=uniformity_vacuum,
        min_fidelity=min_fidelity,
        completeness=completeness,
        output=Ensemble.from_weights(output_items),
    )


def simulate_point(
    cfg: ProtocolConfig,
    *,
    faults: Iterable[str] = (),
    on_element: Optional[ElementCallback] = None,
    tolerance: float = STRICT_TOLERANCE,
) -> HeraldReport:
    """Build, prepare, run and herald one configuration."""
    circuit = build_amplifier(cfg, faults=faults)
    evolved = run_circuit(prepare_input_ensemble(cfg, circuit), circuit, on_element=on_element)
    return herald(evolved, circuit, cfg, tolerance=tolerance)
