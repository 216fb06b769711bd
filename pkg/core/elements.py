"""
core/elements.py
Named optical elements over ModeLabels and classical mixtures of pure states.

Elements act per (time bin, polarization) sublabel.  Sign conventions:
  50:50 BS   a†_in1 -> (a†_out1 + a†_out2)/√2,  a†_in2 -> (a†_out1 - a†_out2)/√2
  VBS        a†_in  -> √t a†_kept + √(1-t) a†_out   (both arms real positive)
  PBS        H photons relabeled to out_h, V photons to out_v, no sign
The BS carries the only minus sign in the amplifier network.
"""

import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Iterable, Iterator, List, Optional, Tuple

import numpy as np

from core.config import UNITARY_TOLERANCE
from core.errors import ConfigError, EnsembleError, UnregisteredModeError
from core.fock import (
    FockState,
    ModeLabel,
    ModeRegistry,
    Polarization,
    TimeBin,
    apply_two_mode_unitary,
    fidelity,
    swap_modes,
)

logger = logging.getLogger(__name__)

SUBLABELS = tuple((tb, pol) for tb in TimeBin for pol in Polarization)

BS_MATRIX = np.array([[1, 1], [1, -1]], dtype=complex) / math.sqrt(2)


def _check_transmission(t: float):
    if not 0.0 < t < 1.0:
        raise ConfigError(f"VBS transmission must lie strictly between 0 and 1, got {t}")


def vbs_matrix(t: float) -> np.ndarray:
    """Column 0 is the image of the input photon: (√t kept, √(1-t) out)."""
    _check_transmission(t)
    keep, leak = math.sqrt(t), math.sqrt(1.0 - t)
    return np.array([[keep, -leak], [leak, keep]], dtype=complex)


def _find(registry: ModeRegistry, party: int, channel: str, sublabel) -> Optional[int]:
    return registry.find(ModeLabel(party, channel, *sublabel))


def _require(registry: ModeRegistry, party: int, channel: str, sublabel) -> int:
    idx = _find(registry, party, channel, sublabel)
    if idx is None:
        tb, pol = sublabel
        raise UnregisteredModeError(
            f"output mode {ModeLabel(party, channel, tb, pol)} is not registered"
        )
    return idx


# ============================================================================
# ELEMENT ACTIONS
# ============================================================================

def apply_bs5050(
    s: FockState,
    party: int,
    in1: str,
    in2: str,
    out1: str,
    out2: str,
    *,
    matrix: np.ndarray = BS_MATRIX,
    strict: bool = True,
) -> FockState:
    """50:50 beam splitter on channels in1, in2 of `party` into out1, out2."""
    registry = s.registry
    occupied = s.support()
    for sub in SUBLABELS:
        i1 = _find(registry, party, in1, sub)
        i2 = _find(registry, party, in2, sub)
        if i1 not in occupied and i2 not in occupied:
            continue
        o1 = _require(registry, party, out1, sub)
        o2 = _require(registry, party, out2, sub)
        if i1 is not None:
            s = swap_modes(s, i1, o1)
        if i2 is not None:
            s = swap_modes(s, i2, o2)
        s = apply_two_mode_unitary(s, o1, o2, matrix, strict=strict)
    return s


def apply_vbs(s: FockState, party: int, in_channel: str, kept: str, out: str, t: float) -> FockState:
    """Variable beam splitter: each photon on `in_channel` -> √t kept + √(1-t) out."""
    u = vbs_matrix(t)
    registry = s.registry
    occupied = s.support()
    for sub in SUBLABELS:
        i = _find(registry, party, in_channel, sub)
        if i not in occupied:
            continue
        k = _require(registry, party, kept, sub)
        o = _require(registry, party, out, sub)
        if i != k:
            s = swap_modes(s, i, k)
        s = apply_two_mode_unitary(s, k, o, u)
    return s


def apply_pbs(s: FockState, party: int, in_channel: str, out_h: str, out_v: str) -> FockState:
    """Polarizing BS: transmit H to out_h, reflect V to out_v."""
    registry = s.registry
    occupied = s.support()
    for sub in SUBLABELS:
        i = _find(registry, party, in_channel, sub)
        if i not in occupied:
            continue
        target = out_h if sub[1] is Polarization.H else out_v
        s = swap_modes(s, i, _require(registry, party, target, sub))
    return s


class ElementKind(str, Enum):
    BS5050 = "BS5050"
    VBS = "VBS"
    PBS = "PBS"


@dataclass(frozen=True)
class Element:
    """
    One element application inside a circuit.

    inputs/outputs are channel names of `party`:
      VBS     (in,)        -> (kept, out)
      BS5050  (in1, in2)   -> (out1, out2)
      PBS     (in,)        -> (out_h, out_v)
    `matrix` and `strict` override the BS for fault injection only.
    """

    kind: ElementKind
    party: int
    inputs: Tuple[str, ...]
    outputs: Tuple[str, ...]
    t: Optional[float] = None
    matrix: Optional[np.ndarray] = field(default=None, compare=False, hash=False, repr=False)
    strict: bool = True

    def __post_init__(self):
        object.__setattr__(self, "kind", ElementKind(self.kind))
        arity = {ElementKind.VBS: 1, ElementKind.BS5050: 2, ElementKind.PBS: 1}[self.kind]
        if len(self.inputs) != arity or len(self.outputs) != 2:
            raise ConfigError(
                f"{self.kind.value} takes {arity} input and 2 output channels, "
                f"got {self.inputs} -> {self.outputs}"
            )
        if self.kind is ElementKind.VBS:
            if self.t is None:
                raise ConfigError("VBS needs a transmission t")
            _check_transmission(self.t)

    @property
    def channels(self) -> Tuple[str, ...]:
        return self.inputs + self.outputs

    def apply(self, s: FockState) -> FockState:
        if self.kind is ElementKind.VBS:
            return apply_vbs(s, self.party, self.inputs[0], self.outputs[0], self.outputs[1], self.t)
        if self.kind is ElementKind.BS5050:
            matrix = BS_MATRIX if self.matrix is None else self.matrix
            return apply_bs5050(s, self.party, *self.inputs, *self.outputs, matrix=matrix, strict=self.strict)
        return apply_pbs(s, self.party, self.inputs[0], *self.outputs)

    def __str__(self):
        extra = f" t={self.t:g}" if self.t is not None else ""
        return f"{self.kind.value}[{self.party}] {','.join(self.inputs)} -> {','.join(self.outputs)}{extra}"


# ============================================================================
# ENSEMBLES
# ============================================================================

@dataclass(frozen=True)
class Branch:
    weight: float
    state: FockState
    tag: str = ""


class Ensemble:
    """
    Classical mixture Σ w_i |ψ_i⟩⟨ψ_i| of normalised pure states.

    Houses the loss-mixed input and the heralded output.
    """

    def __init__(self, branches: Iterable[Branch], tol: float = UNITARY_TOLERANCE):
        self.branches: Tuple[Branch, ...] = tuple(branches)
        if not self.branches:
            raise EnsembleError("an ensemble needs at least one branch")
        total = 0.0
        for b in self.branches:
            if not -tol <= b.weight <= 1.0 + tol:
                raise EnsembleError(f"branch weight {b.weight} outside [0, 1]")
            norm = b.state.squared_norm()
            if abs(norm - 1.0) > tol:
                raise EnsembleError(f"branch '{b.tag}' has squared norm {norm!r}, expected 1")
            total += b.weight
        if abs(total - 1.0) > tol:
            raise EnsembleError(f"branch weights sum to {total!r}, expected 1")

    @classmethod
    def from_weights(cls, items: Iterable[Tuple[float, FockState, str]]) -> Optional["Ensemble"]:
        """Normalise raw (weight, unnormalised state, tag) triples; None if all vanish."""
        kept = [(w, s, tag) for w, s, tag in items if w > 0.0 and s.squared_norm() > 0.0]
        total = math.fsum(w for w, _, _ in kept)
        if total == 0.0:
            return None
        return cls(Branch(w / total, s.normalized(), tag) for w, s, tag in kept)

    def __iter__(self) -> Iterator[Branch]:
        return iter(self.branches)

    def __len__(self):
        return len(self.branches)

    @property
    def weights(self) -> List[float]:
        return [b.weight for b in self.branches]

    def branch(self, tag: str) -> Optional[Branch]:
        for b in self.branches:
            if b.tag == tag:
                return b
        return None

    def map(self, fn: Callable[[FockState], FockState]) -> "Ensemble":
        return Ensemble(Branch(b.weight, fn(b.state), b.tag) for b in self.branches)

    def fidelity_with(self, target: FockState) -> float:
        """⟨target|ρ|target⟩ for a normalised pure target."""
        return math.fsum(b.weight * fidelity(b.state, target) for b in self.branches)

    def __repr__(self):
        parts = ", ".join(f"{b.tag or '?'}:{b.weight:.6g}" for b in self.branches)
        return f"Ensemble({parts})"


def apply_loss_channel(signal: FockState, eta: float, *, drop_empty: bool = True) -> Ensemble:
    """
    All-or-nothing loss: the whole signal survives with probability eta,
    otherwise every photon is gone.  drop_empty=False keeps zero-weight
    branches so both branches can still be evolved at eta in {0, 1}.
    """
    if not 0.0 <= eta <= 1.0:
        raise ConfigError(f"eta must lie in [0, 1], got {eta}")
    branches = [
        Branch(eta, signal, "signal"),
        Branch(1.0 - eta, FockState.vacuum(signal.registry), "vacuum"),
    ]
    if drop_empty:
        branches = [b for b in branches if b.weight > 0.0]
    return Ensemble(branches)
