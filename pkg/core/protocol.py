"""
core/protocol.py
Builds the N-party amplifier, prepares its input states and runs ensembles
through it.

Per party i the circuit is
    VBS(a2 -> a2, out; t)  ->  BS(a1, a2 -> a3, a4)  ->  PBS(a3 -> a5, a6)  ->  PBS(a4 -> a7, a8)
with the W-state photon on a1 and the auxiliary pair |S_H⟩|L_V⟩ on a2.
Detectors D1..D4 sit on a5..a8; the amplified qubit leaves on `out`.
"""

import logging
import math
from dataclasses import dataclass, field, replace
from functools import reduce
from typing import Callable, FrozenSet, Iterable, List, Optional, Tuple

import numpy as np

from core.config import QUBIT_NORM_TOLERANCE, UNITARY_TOLERANCE
from core.elements import Branch, Element, ElementKind, Ensemble, apply_loss_channel
from core.errors import ConfigError, InvariantViolation, UnregisteredModeError
from core.fock import FockState, ModeLabel, ModeRegistry, Polarization, TimeBin, tensor

logger = logging.getLogger(__name__)

CHANNELS = ("a1", "a2", "a3", "a4", "a5", "a6", "a7", "a8", "out")
DETECTOR_CHANNELS = ("a5", "a6", "a7", "a8")
OUT_CHANNEL = "out"

# Signal and auxiliary photons are S<->H and L<->V locked
LOCKED_SUBLABELS = ((TimeBin.S, Polarization.H), (TimeBin.L, Polarization.V))

# bs-sign: a2 -> (a3 + a4)/√2 instead of (a3 - a4)/√2.  Not unitary.
FAULTY_BS_MATRIX = np.array([[1, 1], [1, 1]], dtype=complex) / math.sqrt(2)
FAULTS = frozenset({"bs-sign"})

ElementCallback = Callable[[int, Element, str, FockState], None]


def party_name(i: int) -> str:
    """0 -> 'a', 1 -> 'b', ... ; past 'z' falls back to 'p26', 'p27', ..."""
    if 0 <= i < 26:
        return chr(ord("a") + i)
    return f"p{i}"


# ============================================================================
# CONFIGURATION TYPES
# ============================================================================

@dataclass(frozen=True)
class TimeBinQubit:
    """α|S_H⟩ + β|L_V⟩.  Mis-normalised amplitudes are rejected, never fixed."""

    alpha: complex
    beta: complex

    def __post_init__(self):
        object.__setattr__(self, "alpha", complex(self.alpha))
        object.__setattr__(self, "beta", complex(self.beta))
        norm = abs(self.alpha) ** 2 + abs(self.beta) ** 2
        if abs(norm - 1.0) > QUBIT_NORM_TOLERANCE:
            raise ConfigError(
                f"|alpha|^2 + |beta|^2 = {norm:.12g}, expected 1 within {QUBIT_NORM_TOLERANCE:g}"
            )

    def __str__(self):
        return f"({self.alpha:.6g})|S_H> + ({self.beta:.6g})|L_V>"


DEFAULT_QUBIT = TimeBinQubit(1 / math.sqrt(2), 1 / math.sqrt(2))


@dataclass(frozen=True)
class ProtocolConfig:
    n_parties: int
    t: float
    eta: float
    qubit: TimeBinQubit = DEFAULT_QUBIT

    def __post_init__(self):
        if isinstance(self.n_parties, bool) or int(self.n_parties) != self.n_parties:
            raise ConfigError(f"n_parties must be an integer, got {self.n_parties!r}")
        object.__setattr__(self, "n_parties", int(self.n_parties))
        if self.n_parties < 2:
            raise ConfigError(f"the amplifier needs at least 2 parties, got {self.n_parties}")
        if not 0.0 < self.t < 1.0:
            raise ConfigError(f"t must lie strictly between 0 and 1, got {self.t}")
        if not 0.0 <= self.eta <= 1.0:
            raise ConfigError(f"eta must lie in [0, 1], got {self.eta}")

    def with_eta(self, eta: float) -> "ProtocolConfig":
        return replace(self, eta=eta)


# ============================================================================
# CIRCUIT
# ============================================================================

@dataclass
class Circuit:
    registry: ModeRegistry
    elements: Tuple[Element, ...]
    n_parties: int
    detectors: Tuple[str, ...] = DETECTOR_CHANNELS
    out_channel: str = OUT_CHANNEL
    faults: FrozenSet[str] = field(default_factory=frozenset)

    def __post_init__(self):
        self.elements = tuple(self.elements)
        if self.out_channel in self.detectors:
            raise ConfigError(f"out channel '{self.out_channel}' doubles as a detector channel")
        for el in self.elements:
            for channel in el.channels:
                if not any(
                    ModeLabel(el.party, channel, tb, pol) in self.registry for tb, pol in LOCKED_SUBLABELS
                ):
                    raise UnregisteredModeError(f"element {el} references unregistered channel {channel}")
        if set(self.detector_modes()) & set(self.out_modes()):
            raise ConfigError("detector modes and out modes overlap")

    def detector_modes(self, party: Optional[int] = None) -> List[int]:
        """Registered detector mode indices, ordered by party, detector, then sublabel."""
        parties = range(self.n_parties) if party is None else (party,)
        modes = []
        for p in parties:
            for channel in self.detectors:
                for tb, pol in LOCKED_SUBLABELS:
                    idx = self.registry.find(ModeLabel(p, channel, tb, pol))
                    if idx is not None:
                        modes.append(idx)
        return modes

    def out_mode(self, party: int, timebin: TimeBin, polarization: Polarization) -> int:
        return self.registry.index(ModeLabel(party, self.out_channel, timebin, polarization))

    def out_modes(self) -> List[int]:
        return [
            idx
            for p in range(self.n_parties)
            for tb, pol in LOCKED_SUBLABELS
            if (idx := self.registry.find(ModeLabel(p, self.out_channel, tb, pol))) is not None
        ]

    def __len__(self):
        return len(self.elements)


def register_protocol_modes(registry: ModeRegistry, n: int) -> ModeRegistry:
    """Register the locked sublabels of every protocol channel for parties 0..n-1."""
    for party in range(n):
        for channel in CHANNELS:
            for tb, pol in LOCKED_SUBLABELS:
                registry.register_mode(ModeLabel(party, channel, tb, pol))
    return registry


def build_amplifier(
    cfg: ProtocolConfig,
    registry: Optional[ModeRegistry] = None,
    faults: Iterable[str] = (),
) -> Circuit:
    faults = frozenset(f.strip().lower() for f in faults)
    unknown = faults - FAULTS
    if unknown:
        raise ConfigError(f"unknown fault(s) {sorted(unknown)}; available: {sorted(FAULTS)}")

    registry = register_protocol_modes(registry if registry is not None else ModeRegistry(), cfg.n_parties)
    bs_options = {}
    if "bs-sign" in faults:
        logger.warning("[FAULT] building the 50:50 BS with a sign error")
        bs_options = {"matrix": FAULTY_BS_MATRIX, "strict": False}

    elements = []
    for p in range(cfg.n_parties):
        elements.extend([
            Element(ElementKind.VBS, p, ("a2",), ("a2", OUT_CHANNEL), t=cfg.t),
            Element(ElementKind.BS5050, p, ("a1", "a2"), ("a3", "a4"), **bs_options),
            Element(ElementKind.PBS, p, ("a3",), ("a5", "a6")),
            Element(ElementKind.PBS, p, ("a4",), ("a7", "a8")),
        ])
    logger.debug(f"[BUILD] {cfg.n_parties} parties, {len(elements)} elements, {len(registry)} modes")
    return Circuit(registry, tuple(elements), cfg.n_parties, faults=faults)


# ============================================================================
# STATES
# ============================================================================

def prepare_w_state(n: int, q: TimeBinQubit, registry: ModeRegistry, channel: str = "a1") -> FockState:
    """(1/√n) Σ_k (α|S_H⟩ + β|L_V⟩) on party k's `channel`."""
    if n < 1:
        raise ConfigError(f"a W state needs at least one party, got {n}")
    amp = 1.0 / math.sqrt(n)
    state = FockState.zero(registry)
    for k in range(n):
        for (tb, pol), coeff in zip(LOCKED_SUBLABELS, (q.alpha, q.beta)):
            idx = registry.register_mode(ModeLabel(k, channel, tb, pol))
            state = state + FockState.basis(registry, {idx: 1}, coeff * amp)
    return state


def prepare_auxiliary_pair(party: int, registry: ModeRegistry, channel: str = "a2") -> FockState:
    """|S_H⟩ ⊗ |L_V⟩ on the party's auxiliary channel."""
    s_h = registry.index(ModeLabel(party, channel, TimeBin.S, Polarization.H))
    l_v = registry.index(ModeLabel(party, channel, TimeBin.L, Polarization.V))
    return FockState.basis(registry, {s_h: 1, l_v: 1})


def prepare_input_ensemble(cfg: ProtocolConfig, circuit: Circuit) -> Ensemble:
    """
    Loss-mixed W state tensored with every auxiliary pair.

    Both tagged branches are always present, zero-weight ones included, so a
    single run yields P1 and P2 for every eta.
    """
    registry = circuit.registry
    w = prepare_w_state(cfg.n_parties, cfg.qubit, registry)
    aux = reduce(tensor, (prepare_auxiliary_pair(p, registry) for p in range(cfg.n_parties)))
    return apply_loss_channel(w, cfg.eta, drop_empty=False).map(lambda s: tensor(s, aux))


def run_circuit(e: Ensemble, c: Circuit, on_element: Optional[ElementCallback] = None) -> Ensemble:
    """Evolve every branch through every element; weights are untouched."""
    evolved = []
    for b in e:
        state = b.state
        reference = state.squared_norm()
        for step, el in enumerate(c.elements):
            state = el.apply(state)
            drift = abs(state.squared_norm() - reference)
            if drift > UNITARY_TOLERANCE:
                raise InvariantViolation(
                    f"branch '{b.tag}' norm drifted by {drift:.3e} at element {step} ({el})"
                )
            if on_element is not None:
                on_element(step, el, b.tag, state)
        logger.debug(f"[RUN] branch '{b.tag}' -> {len(state)} terms")
        evolved.append(Branch(b.weight, state, b.tag))
    return Ensemble(evolved)
