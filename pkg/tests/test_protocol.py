"""Tests for state preparation, the amplifier circuit and run_circuit."""

import math
from collections import Counter

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from core.elements import ElementKind, Ensemble
from core.errors import ConfigError, InvariantViolation
from core.fock import FockState, ModeLabel, ModeRegistry, Polarization, TimeBin, squared_norm
from core.heralding import DetectionPattern, detection_table
from core.protocol import (
    Circuit,
    ProtocolConfig,
    TimeBinQubit,
    build_amplifier,
    party_name,
    prepare_auxiliary_pair,
    prepare_input_ensemble,
    prepare_w_state,
    register_protocol_modes,
    run_circuit,
)


class TestConfig:
    def test_qubit_must_be_normalised(self):
        with pytest.raises(ConfigError):
            TimeBinQubit(0.7071, 0.7071)

    def test_qubit_accepts_complex(self):
        q = TimeBinQubit(0.6, 0.8j)
        assert q.beta == 0.8j

    @pytest.mark.parametrize("kwargs", [
        {"n_parties": 1, "t": 0.3, "eta": 0.5},
        {"n_parties": 3, "t": 0.0, "eta": 0.5},
        {"n_parties": 3, "t": 1.0, "eta": 0.5},
        {"n_parties": 3, "t": 0.3, "eta": 1.2},
        {"n_parties": 2.5, "t": 0.3, "eta": 0.5},
    ])
    def test_invalid_config(self, kwargs):
        with pytest.raises(ConfigError):
            ProtocolConfig(**kwargs)

    def test_with_eta(self):
        cfg = ProtocolConfig(3, 0.3, 0.5)
        assert cfg.with_eta(0.9).eta == 0.9
        assert cfg.eta == 0.5

    def test_party_names(self):
        assert [party_name(i) for i in range(3)] == ["a", "b", "c"]
        assert party_name(26) == "p26"


class TestStates:
    def test_three_party_w_state(self, complex_qubit):
        registry = register_protocol_modes(ModeRegistry(), 3)
        w = prepare_w_state(3, complex_qubit, registry)
        assert len(w) == 6
        for k in range(3):
            s_h = registry.index(ModeLabel(k, "a1", TimeBin.S, Polarization.H))
            l_v = registry.index(ModeLabel(k, "a1", TimeBin.L, Polarization.V))
            assert w.amplitude({s_h: 1}) == pytest.approx(0.6 / math.sqrt(3))
            assert w.amplitude({l_v: 1}) == pytest.approx(0.8j / math.sqrt(3))

    def test_single_party_is_the_qubit(self, complex_qubit):
        registry = ModeRegistry()
        w = prepare_w_state(1, complex_qubit, registry)
        assert w.amplitude({0: 1}) == pytest.approx(0.6)
        assert w.amplitude({1: 1}) == pytest.approx(0.8j)

    def test_zero_parties_rejected(self, complex_qubit):
        with pytest.raises(ConfigError):
            prepare_w_state(0, complex_qubit, ModeRegistry())

    @given(st.integers(min_value=1, max_value=8))
    @settings(max_examples=20, deadline=None)
    def test_w_state_is_normalised(self, n):
        registry = ModeRegistry()
        w = prepare_w_state(n, TimeBinQubit(0.6, 0.8j), registry)
        assert squared_norm(w) == pytest.approx(1.0, abs=1e-12)
        assert len(w) == 2 * n

    def test_w_state_is_permutation_covariant(self, complex_qubit):
        registry = register_protocol_modes(ModeRegistry(), 4)
        w = prepare_w_state(4, complex_qubit, registry)
        by_party = Counter()
        for key, amp in w.items():
            (idx,) = [i for i, n in enumerate(key) if n]
            by_party[registry.label(idx).party] += 1
            assert abs(amp) in (pytest.approx(0.6 / 2), pytest.approx(0.8 / 2))
        assert set(by_party.values()) == {2}

    def test_auxiliary_pair(self):
        registry = register_protocol_modes(ModeRegistry(), 2)
        pair = prepare_auxiliary_pair(1, registry)
        s_h = registry.index(ModeLabel(1, "a2", TimeBin.S, Polarization.H))
        l_v = registry.index(ModeLabel(1, "a2", TimeBin.L, Polarization.V))
        assert pair.amplitude({s_h: 1, l_v: 1}) == 1
        assert pair.photon_numbers() == {2}


class TestAmplifier:
    def test_three_party_layout(self):
        circuit = build_amplifier(ProtocolConfig(3, 0.3, 0.5))
        kinds = Counter(el.kind for el in circuit.elements)
        assert kinds == {ElementKind.VBS: 3, ElementKind.BS5050: 3, ElementKind.PBS: 6}
        channels = {(circuit.registry.label(i).party, circuit.registry.label(i).channel)
                    for i in circuit.detector_modes()}
        assert len(channels) == 12

    @pytest.mark.parametrize("n", [2, 4, 5])
    def test_detector_channels_scale_with_n(self, n):
        circuit = build_amplifier(ProtocolConfig(n, 0.3, 0.5))
        channels = {(circuit.registry.label(i).party, circuit.registry.label(i).channel)
                    for i in circuit.detector_modes()}
        assert len(channels) == 4 * n
        assert len(circuit.out_modes()) == 2 * n

    def test_element_order_per_party(self):
        circuit = build_amplifier(ProtocolConfig(2, 0.3, 0.5))
        assert [(el.party, el.kind) for el in circuit.elements] == [
            (p, kind)
            for p in range(2)
            for kind in (ElementKind.VBS, ElementKind.BS5050, ElementKind.PBS, ElementKind.PBS)
        ]

    def test_detectors_and_out_are_disjoint(self):
        circuit = build_amplifier(ProtocolConfig(3, 0.3, 0.5))
        assert not set(circuit.detector_modes()) & set(circuit.out_modes())

    def test_unknown_fault_rejected(self):
        with pytest.raises(ConfigError):
            build_amplifier(ProtocolConfig(2, 0.3, 0.5), faults=["mirror"])


class TestRunCircuit:
    def test_photon_number_is_conserved(self, cfg3):
        circuit = build_amplifier(cfg3)
        evolved = run_circuit(prepare_input_ensemble(cfg3, circuit), circuit)
        assert evolved.branch("signal").state.photon_numbers() == {7}
        assert evolved.branch("vacuum").state.photon_numbers() == {6}

    def test_weights_unchanged_and_norms_kept(self, cfg3):
        circuit = build_amplifier(cfg3)
        before = prepare_input_ensemble(cfg3, circuit)
        after = run_circuit(before, circuit)
        assert after.weights == before.weights
        for b in after:
            assert squared_norm(b.state) == pytest.approx(1.0, abs=1e-12)

    def test_input_always_has_both_branches(self):
        cfg = ProtocolConfig(2, 0.3, 1.0)
        e = prepare_input_ensemble(cfg, build_amplifier(cfg))
        assert [b.tag for b in e] == ["signal", "vacuum"]
        assert e.weights == [1.0, 0.0]

    def test_empty_circuit_is_identity(self, cfg3):
        circuit = build_amplifier(cfg3)
        empty = Circuit(circuit.registry, (), cfg3.n_parties)
        e = prepare_input_ensemble(cfg3, circuit)
        out = run_circuit(e, empty)
        for before, after in zip(e, out):
            assert after.state.distance(before.state) == 0.0

    def test_vacuum_branch_only_moves_auxiliary_photons(self):
        cfg = ProtocolConfig(2, 0.4, 0.0)
        circuit = build_amplifier(cfg)
        vac = run_circuit(prepare_input_ensemble(cfg, circuit), circuit).branch("vacuum").state
        # both auxiliary photons of each party lost to `out`
        lost = {circuit.out_mode(p, TimeBin.S, Polarization.H): 1 for p in range(2)}
        lost.update({circuit.out_mode(p, TimeBin.L, Polarization.V): 1 for p in range(2)})
        assert vac.amplitude(lost) == pytest.approx((1 - 0.4) ** 2)

    def test_trace_callback_sees_every_element(self, cfg3):
        circuit = build_amplifier(cfg3)
        seen = []
        run_circuit(prepare_input_ensemble(cfg3, circuit), circuit,
                    on_element=lambda step, el, tag, state: seen.append((tag, step)))
        assert len(seen) == 2 * len(circuit)

    def test_sign_fault_breaks_norm(self):
        cfg = ProtocolConfig(2, 0.3, 0.5)
        circuit = build_amplifier(cfg, faults=["bs-sign"])
        with pytest.raises(InvariantViolation):
            run_circuit(prepare_input_ensemble(cfg, circuit), circuit)

    def test_three_party_d1d2_conditional_terms(self):
        t = 0.3
        qubit = TimeBinQubit(0.6, 0.8j)
        cfg = ProtocolConfig(3, t, 0.5, qubit)
        circuit = build_amplifier(cfg)
        evolved = run_circuit(prepare_input_ensemble(cfg, circuit), circuit)
        pattern = DetectionPattern.parse("D1D2/D1D2/D1D2")
        signal = detection_table(evolved.branch("signal").state, circuit).conditionals[pattern]
        vacuum = detection_table(evolved.branch("vacuum").state, circuit).conditionals[pattern]

        scale = t ** 2 * math.sqrt(t * (1 - t)) / (8 * math.sqrt(3))
        assert len(signal) == 6
        reference = signal.amplitude({circuit.out_mode(0, TimeBin.L, Polarization.V): 1})
        for k in range(3):
            short = signal.amplitude({circuit.out_mode(k, TimeBin.S, Polarization.H): 1})
            long = signal.amplitude({circuit.out_mode(k, TimeBin.L, Polarization.V): 1})
            assert abs(short) == pytest.approx(abs(qubit.alpha) * scale, rel=1e-12)
            assert abs(long) == pytest.approx(abs(qubit.beta) * scale, rel=1e-12)
            # +alpha on every party: this pattern needs no flip
            assert short / reference == pytest.approx(qubit.alpha / qubit.beta, abs=1e-12)
            assert long / reference == pytest.approx(1.0, abs=1e-12)

        # vacuum branch: out modes left empty
        assert len(vacuum) == 1
        assert abs(vacuum.amplitude({})) == pytest.approx(t ** 3 / 8, rel=1e-12)
