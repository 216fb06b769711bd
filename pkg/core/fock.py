"""
core/fock.py
Sparse multi-mode bosonic Fock states and the primitive mode transformations.

A FockState holds occupation vectors (one photon count per registered mode,
one uint8 row per term) with their complex amplitudes.  States never change after
construction; every operation returns a new one.  Mixtures live one level up
in core.elements.Ensemble.
"""

import logging
import math
import threading
from dataclasses import dataclass
from enum import Enum
from typing import Callable, Dict, Iterable, Iterator, List, Mapping, Optional, Set, Tuple

import numpy as np

from core.config import MAX_OCCUPANCY, PRUNE_THRESHOLD, UNITARY_TOLERANCE
from core.errors import (
    FockError,
    NonUnitaryError,
    OccupancyOverflowError,
    OverlappingSupportError,
    UnregisteredModeError,
)

logger = logging.getLogger(__name__)

# Party tag for modes that belong to nobody in particular
SHARED_PARTY = -1

Outcome = Tuple[int, ...]


class TimeBin(str, Enum):
    S = "S"  # short / early arrival
    L = "L"  # long / late arrival


class Polarization(str, Enum):
    H = "H"
    V = "V"


@dataclass(frozen=True)
class ModeLabel:
    """A distinguishable optical mode: (party, channel, time bin, polarization)."""

    party: int
    channel: str
    timebin: TimeBin
    polarization: Polarization

    def __post_init__(self):
        object.__setattr__(self, "timebin", TimeBin(self.timebin))
        object.__setattr__(self, "polarization", Polarization(self.polarization))

    @property
    def sublabel(self) -> Tuple[TimeBin, Polarization]:
        return self.timebin, self.polarization

    def __str__(self):
        party = "shared" if self.party == SHARED_PARTY else str(self.party)
        return f"{self.timebin.value}_{self.polarization.value}@{self.channel}[{party}]"


class ModeRegistry:
    """
    Append-only ModeLabel -> dense index map.

    Registration is idempotent and injective.  States built before a new mode
    was registered read as having zero photons in it.
    """

    def __init__(self, labels: Iterable[ModeLabel] = ()):
        self._labels: List[ModeLabel] = []
        self._index: Dict[ModeLabel, int] = {}
        self._lock = threading.Lock()
        for label in labels:
            self.register_mode(label)

    def register_mode(self, label: ModeLabel) -> int:
        """Return the index of `label`, assigning the next free one if new."""
        with self._lock:
            idx = self._index.get(label)
            if idx is None:
                idx = len(self._labels)
                self._labels.append(label)
                self._index[label] = idx
            return idx

    def index(self, label: ModeLabel) -> int:
        try:
            return self._index[label]
        except KeyError:
            raise UnregisteredModeError(f"mode {label} is not registered") from None

    def find(self, label: ModeLabel) -> Optional[int]:
        return self._index.get(label)

    def label(self, idx: int) -> ModeLabel:
        return self._labels[idx]

    def indices(self, party: Optional[int] = None, channel: Optional[str] = None) -> List[int]:
        return [
            i for i, lab in enumerate(self._labels)
            if (party is None or lab.party == party) and (channel is None or lab.channel == channel)
        ]

    def __len__(self):
        return len(self._labels)

    def __contains__(self, label):
        return label in self._index

    def __iter__(self) -> Iterator[ModeLabel]:
        return iter(list(self._labels))


# ============================================================================
# FOCK STATE
# ============================================================================

class FockState:
    """
    Sparse pure state over a ModeRegistry.

    Terms are stored as an occupation matrix (one uint8 row per term, one
    column per mode) next to a complex amplitude vector.  Rows are distinct.
    Both arrays are read-only.
    """

    __slots__ = ("registry", "_occ", "_amp", "_lookup")

    def __init__(self, registry: ModeRegistry, terms: Optional[Mapping] = None):
        width = len(registry)
        items = list((terms or {}).items())
        occ = np.array([list(_as_key(k, width)) for k, _ in items], dtype=np.uint8).reshape(len(items), width)
        amp = np.array([complex(a) for _, a in items], dtype=complex)
        self._set(registry, *_merged(occ, amp))

    def _set(self, registry: ModeRegistry, occ: np.ndarray, amp: np.ndarray):
        occ, amp = _pruned(occ, amp)
        occ = np.ascontiguousarray(occ, dtype=np.uint8)
        amp = np.ascontiguousarray(amp, dtype=complex)
        occ.flags.writeable = False
        amp.flags.writeable = False
        self.registry = registry
        self._occ = occ
        self._amp = amp
        self._lookup = None

    @classmethod
    def _build(cls, registry: ModeRegistry, occ: np.ndarray, amp: np.ndarray) -> "FockState":
        # trusted path: rows are already distinct
        state = cls.__new__(cls)
        state._set(registry, occ, amp)
        return state

    # ------------------------------------------------------------------
    # constructors
    # ------------------------------------------------------------------

    @classmethod
    def vacuum(cls, registry: ModeRegistry) -> "FockState":
        return cls._build(registry, np.zeros((1, len(registry)), dtype=np.uint8), np.ones(1, dtype=complex))

    @classmethod
    def zero(cls, registry: ModeRegistry) -> "FockState":
        return cls._build(registry, np.zeros((0, len(registry)), dtype=np.uint8), np.zeros(0, dtype=complex))

    @classmethod
    def basis(cls, registry: ModeRegistry, counts: Mapping[int, int], amplitude: complex = 1.0) -> "FockState":
        """|counts⟩ scaled by `amplitude`; counts maps mode index -> photons."""
        row = np.zeros((1, len(registry)), dtype=np.uint8)
        for mode, n in counts.items():
            if mode >= row.shape[1] or mode < 0:
                raise UnregisteredModeError(f"mode index {mode} is not registered")
            if n < 0:
                raise FockError(f"negative occupation {n} on mode {mode}")
            row[0, mode] = n
        return cls._build(registry, row, np.array([complex(amplitude)]))

    @classmethod
    def from_arrays(cls, registry: ModeRegistry, occupations, amplitudes) -> "FockState":
        """
        State from an occupation matrix (terms x modes) and its amplitudes.
        Repeated rows are summed; narrower matrices are zero-padded.
        """
        occ = np.array(occupations, dtype=np.uint8, ndmin=2)
        amp = np.array(amplitudes, dtype=complex).reshape(-1)
        width = len(registry)
        if occ.shape[0] != amp.shape[0]:
            raise FockError(f"{occ.shape[0]} occupation rows for {amp.shape[0]} amplitudes")
        if occ.shape[1] > width:
            raise FockError(f"occupation vector of length {occ.shape[1]} exceeds registry size {width}")
        if occ.shape[1] < width:
            occ = np.hstack([occ, np.zeros((occ.shape[0], width - occ.shape[1]), dtype=np.uint8)])
        return cls._build(registry, *_merged(occ, amp))

    # ------------------------------------------------------------------
    # inspection
    # ------------------------------------------------------------------

    def __len__(self):
        return len(self._amp)

    def occupations(self) -> Tuple[np.ndarray, np.ndarray]:
        """Read-only (occupation matrix, amplitude vector), padded to the registry size."""
        s = self.widened()
        return s._occ, s._amp

    def items(self) -> Iterator[Tuple[bytes, complex]]:
        s = self.widened()
        return zip(map(bytes, s._occ), s._amp.tolist())

    def amplitude(self, counts: Mapping[int, int]) -> complex:
        buf = bytearray(len(self.registry))
        for mode, n in counts.items():
            buf[mode] = n
        s = self.widened()
        if s._lookup is None:
            s._lookup = {key: i for i, key in enumerate(map(bytes, s._occ))}
        i = s._lookup.get(bytes(buf))
        return 0j if i is None else complex(s._amp[i])

    def squared_norm(self) -> float:
        return float(np.sum(self._amp.real ** 2 + self._amp.imag ** 2))

    def photon_numbers(self) -> Set[int]:
        return set(self._occ.sum(axis=1, dtype=np.int64).tolist())

    def support(self) -> Set[int]:
        """Mode indices occupied in at least one term."""
        return set(np.flatnonzero(self._occ.any(axis=0)).tolist())

    def widened(self) -> "FockState":
        """The same state with rows padded to the current registry size."""
        width = len(self.registry)
        have = self._occ.shape[1]
        if width == have:
            return self
        pad = np.zeros((len(self._amp), width - have), dtype=np.uint8)
        return FockState._build(self.registry, np.hstack([self._occ, pad]), self._amp)

    def distance(self, other: "FockState") -> float:
        """Largest term-wise amplitude difference."""
        a, b = self.widened(), other.widened()
        amp = np.concatenate([a._amp, -b._amp])
        if not len(amp):
            return 0.0
        _, diff = _merged(np.vstack([a._occ, b._occ]), amp)
        return float(np.abs(diff).max())

    def describe(self, limit: Optional[int] = None) -> List[str]:
        """Human-readable kets, largest amplitudes first."""
        rows = sorted(self.items(), key=lambda kv: (-abs(kv[1]), kv[0]))
        lines = []
        for key, amp in rows[:limit]:
            parts = []
            for i, n in enumerate(key):
                if n:
                    label = str(self.registry.label(i))
                    parts.append(label if n == 1 else f"{label}^{n}")
            ket = ", ".join(parts) if parts else "vac"
            lines.append(f"({amp.real:+.6g}{amp.imag:+.6g}j) |{ket}>")
        return lines

    # ------------------------------------------------------------------
    # arithmetic
    # ------------------------------------------------------------------

    def scaled(self, factor: complex) -> "FockState":
        return FockState._build(self.registry, self._occ, self._amp * complex(factor))

    def normalized(self) -> "FockState":
        norm = self.squared_norm()
        if norm == 0.0:
            return self
        return self.scaled(1.0 / math.sqrt(norm))

    def __add__(self, other: "FockState") -> "FockState":
        if other.registry is not self.registry:
            raise FockError("cannot superpose states over different registries")
        a, b = self.widened(), other.widened()
        occ, amp = _merged(np.vstack([a._occ, b._occ]), np.concatenate([a._amp, b._amp]))
        return FockState._build(a.registry, occ, amp)

    def __repr__(self):
        return f"FockState(terms={len(self)}, modes={len(self.registry)}, norm2={self.squared_norm():.12g})"


def _as_key(key, width: int) -> bytes:
    key = bytes(key)
    if len(key) > width:
        raise FockError(f"occupation vector of length {len(key)} exceeds registry size {width}")
    if len(key) < width:
        key += bytes(width - len(key))
    return key


def row_groups(rows: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """
    Group identical rows of a 2-D integer array.

    Returns the index of the first row of every group and, per row, the
    index of its group.  Group order is fixed for a given input.
    """
    rows = np.ascontiguousarray(rows)
    if len(rows) == 0:
        return np.zeros(0, dtype=np.intp), np.zeros(0, dtype=np.intp)
    if rows.shape[1] == 0:
        return np.zeros(1, dtype=np.intp), np.zeros(len(rows), dtype=np.intp)
    keys = rows.view(np.dtype((np.void, rows.dtype.itemsize * rows.shape[1]))).reshape(-1)
    _, first, inverse = np.unique(keys, return_index=True, return_inverse=True)
    return first, inverse.reshape(-1)


def grouped_rows(inverse: np.ndarray, n_groups: int) -> List[np.ndarray]:
    """Row indices of every group produced by row_groups, in group order."""
    order = np.argsort(inverse, kind="stable")
    bounds = np.cumsum(np.bincount(inverse, minlength=n_groups))[:-1]
    return np.split(order, bounds)


def _merged(occ: np.ndarray, amp: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Sum the amplitudes of repeated occupation rows."""
    if len(amp) < 2:
        return occ, amp
    # all-zero columns never tell rows apart
    active = np.flatnonzero(occ.any(axis=0))
    first, inverse = row_groups(occ[:, active])
    n = len(first)
    if n == len(amp):
        return occ, amp
    summed = (np.bincount(inverse, weights=amp.real, minlength=n)
              + 1j * np.bincount(inverse, weights=amp.imag, minlength=n))
    return occ[first], summed


def _pruned(occ: np.ndarray, amp: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    keep = np.abs(amp) >= PRUNE_THRESHOLD
    if not keep.all():
        occ, amp = occ[keep], amp[keep]
    if occ.size:
        peak = int(occ.max())
        if peak > MAX_OCCUPANCY:
            raise OccupancyOverflowError(
                f"occupation {peak} exceeds cap {MAX_OCCUPANCY}; check the circuit wiring"
            )
    return occ, amp


def _check_mode(state: FockState, *modes: int):
    for m in modes:
        if not 0 <= m < len(state.registry):
            raise UnregisteredModeError(f"mode index {m} is not registered")


# ============================================================================
# OPERATIONS
# ============================================================================

def squared_norm(s: FockState) -> float:
    return s.squared_norm()


def tensor(s1: FockState, s2: FockState) -> FockState:
    """Product state of two states living on disjoint modes of one registry."""
    if s1.registry is not s2.registry:
        raise FockError("tensor needs both states over the same registry")
    a, b = s1.widened(), s2.widened()
    shared = a.support() & b.support()
    if shared:
        names = ", ".join(str(a.registry.label(i)) for i in sorted(shared))
        raise OverlappingSupportError(f"states overlap on {names}")
    width = a._occ.shape[1]
    occ = (a._occ[:, None, :] + b._occ[None, :, :]).reshape(-1, width)
    amp = np.outer(a._amp, b._amp).reshape(-1)
    return FockState._build(a.registry, occ, amp)


def is_unitary(u: np.ndarray, tol: float = UNITARY_TOLERANCE) -> bool:
    u = np.asarray(u, dtype=complex)
    return u.shape == (2, 2) and np.allclose(u @ u.conj().T, np.eye(2), rtol=0.0, atol=tol)


def _transfer(u: Tuple[complex, complex, complex, complex], n1: int, n2: int) -> List[Tuple[int, complex]]:
    """
    Output amplitudes of |n1, n2⟩ under the creation-operator map
    a1† -> u00 a1† + u10 a2†,  a2† -> u01 a1† + u11 a2†.

    Returns (photons left in mode 1, amplitude) pairs; mode 2 holds the rest.
    """
    u00, u01, u10, u11 = u
    total = n1 + n2
    coeffs = [0j] * (total + 1)
    for i in range(n1 + 1):
        ci = math.comb(n1, i) * u00 ** i * u10 ** (n1 - i)
        if ci == 0:
            continue
        for j in range(n2 + 1):
            coeffs[i + j] += ci * math.comb(n2, j) * u01 ** j * u11 ** (n2 - j)
    norm = math.sqrt(math.factorial(n1) * math.factorial(n2))
    return [
        (k, c * math.sqrt(math.factorial(k) * math.factorial(total - k)) / norm)
        for k, c in enumerate(coeffs)
        if c != 0
    ]


def apply_two_mode_unitary(s: FockState, m1: int, m2: int, u, *, strict: bool = True) -> FockState:
    """
    Apply a 2x2 mode transformation to modes m1, m2.

    Terms are grouped by their (n1, n2) occupation of the two modes and each
    group is expanded at once.  `strict=False` skips the unitarity check; it
    exists only so the verification suite can inject a deliberately broken
    element.
    """
    u = np.asarray(u, dtype=complex)
    if u.shape != (2, 2):
        raise FockError(f"expected a 2x2 matrix, got shape {u.shape}")
    if m1 == m2:
        raise FockError("a two-mode transformation needs two distinct modes")
    if strict and not is_unitary(u):
        raise NonUnitaryError(f"matrix is not unitary to {UNITARY_TOLERANCE}: {u.tolist()}")
    s = s.widened()
    _check_mode(s, m1, m2)
    entries = (complex(u[0, 0]), complex(u[0, 1]), complex(u[1, 0]), complex(u[1, 1]))

    occ, amp = s._occ, s._amp
    n1 = occ[:, m1].astype(np.int64)
    n2 = occ[:, m2].astype(np.int64)
    busy = np.flatnonzero((n1 > 0) | (n2 > 0))
    if busy.size == 0:
        return s
    codes = n1[busy] * 256 + n2[busy]

    blocks, amps = [], []
    for code in np.unique(codes).tolist():
        rows = busy[codes == code]
        k_in, l_in = divmod(code, 256)
        base_occ, base_amp = occ[rows], amp[rows]
        for k1, coeff in _transfer(entries, k_in, l_in):
            block = base_occ.copy()
            block[:, m1] = k1
            block[:, m2] = k_in + l_in - k1
            blocks.append(block)
            amps.append(base_amp * coeff)
    if not blocks:
        blocks, amps = [occ[:0]], [amp[:0]]
    out_occ, out_amp = np.concatenate(blocks), np.concatenate(amps)
    # terms with one of the two modes empty everywhere cannot interfere
    if (n1[busy] > 0).any() and (n2[busy] > 0).any():
        out_occ, out_amp = _merged(out_occ, out_amp)

    idle = np.ones(len(amp), dtype=bool)
    idle[busy] = False
    return FockState._build(
        s.registry,
        np.concatenate([occ[idle], out_occ]),
        np.concatenate([amp[idle], out_amp]),
    )


def swap_modes(s: FockState, m1: int, m2: int) -> FockState:
    """Exchange the occupations of two modes (an exact relabeling)."""
    s = s.widened()
    _check_mode(s, m1, m2)
    if m1 == m2:
        return s
    occ = s._occ.copy()
    occ[:, [m1, m2]] = occ[:, [m2, m1]]
    return FockState._build(s.registry, occ, s._amp)


def apply_phase(s: FockState, mode: int, phase: complex) -> FockState:
    """Multiply every amplitude by phase ** (photons in `mode`)."""
    s = s.widened()
    _check_mode(s, mode)
    if not len(s):
        return s
    counts = s._occ[:, mode]
    phase = complex(phase)
    powers = np.array([phase ** k for k in range(int(counts.max()) + 1)], dtype=complex)
    return FockState._build(s.registry, s._occ, s._amp * powers[counts])


def split_by_counts(
    s: FockState,
    measured: Iterable[int],
    want: Optional[Callable[[Outcome], bool]] = None,
) -> Tuple[Dict[Outcome, float], Dict[Outcome, FockState]]:
    """
    Group `s` by the photon counts on `measured`.

    Returns the probability of every outcome that occurs, and, for outcomes
    accepted by `want` (all when None), the unnormalised conditional state with
    the measured modes emptied.  `want` is called once per distinct outcome.
    """
    s = s.widened()
    measured = list(measured)
    _check_mode(s, *measured)
    if not measured:
        return {(): s.squared_norm()}, ({(): s} if want is None or want(()) else {})
    if not len(s):
        return {}, {}

    occ, amp = s._occ, s._amp
    cols = occ[:, measured]
    first, inverse = row_groups(cols)
    weights = amp.real ** 2 + amp.imag ** 2
    totals = np.bincount(inverse, weights=weights, minlength=len(first))
    outcomes = [tuple(row) for row in cols[first].tolist()]
    probs = dict(zip(outcomes, totals.tolist()))

    subs: Dict[Outcome, FockState] = {}
    for outcome, rows in zip(outcomes, grouped_rows(inverse, len(first))):
        if want is not None and not want(outcome):
            continue
        block = occ[rows]
        block[:, measured] = 0
        subs[outcome] = FockState._build(s.registry, block, amp[rows])
    return probs, subs


def project_counts(
    s: FockState,
    pattern: Mapping[int, int],
    measured: Iterable[int],
) -> Tuple[float, FockState]:
    """
    Born-rule projection: probability that every measured mode shows the count
    in `pattern` (0 when absent) and the renormalised post-measurement state,
    measured modes emptied.
    """
    measured = tuple(sorted(set(measured)))
    missing = set(pattern) - set(measured)
    if missing:
        raise FockError(f"pattern names unmeasured modes {sorted(missing)}")
    required = tuple(pattern.get(m, 0) for m in measured)
    probs, subs = split_by_counts(s, measured, want=lambda outcome: outcome == required)
    sub = subs.get(required)
    if sub is None or len(sub) == 0:
        return 0.0, FockState.zero(s.registry)
    probability = probs[required]
    return probability, sub.scaled(1.0 / math.sqrt(probability))


def overlap(a: FockState, b: FockState) -> complex:
    """⟨a|b⟩"""
    if a.registry is not b.registry:
        raise FockError("overlap needs states over the same registry")
    a, b = a.widened(), b.widened()
    if not len(a) or not len(b):
        return 0j
    first, inverse = row_groups(np.vstack([a._occ, b._occ]))
    slot = np.full(len(first), -1, dtype=np.intp)
    slot[inverse[:len(a)]] = np.arange(len(a))
    hit = slot[inverse[len(a):]]
    shared = hit >= 0
    return complex(np.sum(a._amp[hit[shared]].conj() * b._amp[shared]))


def fidelity(a: FockState, b: FockState) -> float:
    """|⟨a|b⟩|² for the normalised versions of a and b (0 if either is zero)."""
    na, nb = a.squared_norm(), b.squared_norm()
    if na == 0.0 or nb == 0.0:
        return 0.0
    return abs(overlap(a, b)) ** 2 / (na * nb)
