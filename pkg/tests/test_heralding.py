"""Tests for post-selection, phase-flip correction and the heralding report."""

import math
import time
from functools import reduce

import pytest

from core.elements import Element, ElementKind, apply_loss_channel
from core.errors import ConfigError, InvariantViolation
from core.heralding import (
    SUCCESS_PAIRS,
    DetectionPattern,
    PhaseFlip,
    apply_correction,
    correction_for,
    correction_table,
    detection_table,
    herald,
    postselect,
    simulate_point,
    success_patterns,
)
from core.fock import fidelity, tensor
from core.protocol import (
    Circuit,
    ProtocolConfig,
    TimeBinQubit,
    build_amplifier,
    prepare_auxiliary_pair,
    prepare_input_ensemble,
    prepare_w_state,
    run_circuit,
)

S = 1 / math.sqrt(2)


@pytest.fixture(scope="module")
def evolved3():
    cfg = ProtocolConfig(3, 0.25, 0.6, TimeBinQubit(0.6, 0.8j))
    circuit = build_amplifier(cfg)
    return cfg, circuit, run_circuit(prepare_input_ensemble(cfg, circuit), circuit)


@pytest.fixture(scope="module")
def report3(evolved3):
    cfg, circuit, evolved = evolved3
    return herald(evolved, circuit, cfg)


class TestPatterns:
    @pytest.mark.parametrize("n,count", [(1, 4), (3, 64), (4, 256)])
    def test_pattern_count(self, n, count):
        patterns = success_patterns(n)
        assert len(patterns) == count
        assert len(set(patterns)) == count

    def test_every_pair_is_one_h_and_one_v(self):
        for a, b in SUCCESS_PAIRS:
            assert {a, b} & {"D1", "D3"} and {a, b} & {"D2", "D4"}

    def test_parse_and_print(self):
        pattern = DetectionPattern.parse("d1d2/D3D2")
        assert pattern.pairs == (("D1", "D2"), ("D2", "D3"))
        assert str(pattern) == "D1D2/D2D3"
        assert pattern.is_success

    def test_same_side_pair_is_not_success(self):
        assert not DetectionPattern.parse("D1D3/D1D2").is_success

    def test_invalid_pair(self):
        with pytest.raises(ConfigError):
            DetectionPattern((("D1", "D1"),))

    def test_clicks_round_trip(self):
        pattern = DetectionPattern.parse("D1D4/D2D3")
        assert pattern.clicks() == (1, 0, 0, 1, 0, 1, 1, 0)
        assert DetectionPattern.from_clicks(pattern.clicks()) == pattern
        assert DetectionPattern.from_clicks((2, 0, 0, 0, 0, 1, 1, 0)) is None


class TestPostselect:
    def test_signal_and_vacuum_probabilities(self, evolved3):
        cfg, circuit, evolved = evolved3
        t = cfg.t
        p_signal, p_vacuum, conditional = postselect(evolved, DetectionPattern.parse("D1D2/D1D2/D1D2"), circuit)
        assert p_signal == pytest.approx(t ** 5 * (1 - t) / 64, abs=1e-14)
        assert p_vacuum == pytest.approx(t ** 6 / 64, abs=1e-14)
        expected = cfg.eta * p_signal / (cfg.eta * p_signal + (1 - cfg.eta) * p_vacuum)
        assert conditional.branch("signal").weight == pytest.approx(expected)

    def test_impossible_pattern_has_no_conditional(self, evolved3):
        _, circuit, evolved = evolved3
        # two S_H photons meeting at a BS bunch, so D1 and D3 never fire together
        p_signal, p_vacuum, conditional = postselect(evolved, DetectionPattern.parse("D1D3/D1D2/D1D2"), circuit)
        assert p_signal < 1e-20 and p_vacuum < 1e-20
        assert conditional is None

    def test_detection_is_complete(self, evolved3):
        _, circuit, evolved = evolved3
        for b in evolved:
            table = detection_table(b.state, circuit)
            assert abs(table.total - 1.0) < 1e-10
            assert len(table.probabilities) > 64

    def test_time_bin_lock_is_enforced(self):
        cfg = ProtocolConfig(2, 0.3, 0.5)
        good = build_amplifier(cfg)
        crossed = tuple(
            Element(ElementKind.PBS, el.party, el.inputs, el.outputs[::-1])
            if el.kind is ElementKind.PBS and el.inputs == ("a3",) else el
            for el in good.elements
        )
        bad = Circuit(good.registry, crossed, 2)
        evolved = run_circuit(prepare_input_ensemble(cfg, bad), bad)
        with pytest.raises(InvariantViolation):
            detection_table(evolved.branch("signal").state, bad)


class TestCorrection:
    @pytest.mark.parametrize("text", ["D1D2/D1D2/D1D2", "D3D4/D3D4/D3D4"])
    def test_patterns_needing_no_flip(self, text):
        assert correction_for(DetectionPattern.parse(text)) == (PhaseFlip(),) * 3

    def test_mixed_sides_flip_the_short_arm(self):
        flips = correction_for(DetectionPattern.parse("D1D4/D1D4/D1D4"))
        assert flips == (PhaseFlip(flip_short=True),) * 3

    def test_v_side_change_needs_long_flip(self):
        flips = correction_for(DetectionPattern.parse("D1D2/D1D4/D1D2"))
        assert flips == (PhaseFlip(), PhaseFlip(flip_long=True), PhaseFlip())

    def test_party_zero_long_arm_never_flipped(self):
        for pattern in success_patterns(3):
            assert not correction_for(pattern)[0].flip_long

    def test_non_success_pattern_rejected(self):
        with pytest.raises(ConfigError):
            correction_for(DetectionPattern.parse("D1D3/D1D2/D1D2"))

    def test_wrong_flip_count_rejected(self, evolved3):
        _, circuit, evolved = evolved3
        with pytest.raises(ConfigError):
            apply_correction(evolved.branch("signal").state, circuit, [PhaseFlip()])

    @pytest.mark.parametrize("qubit", [
        TimeBinQubit(0.6, 0.8j),
        TimeBinQubit(S, S),
        TimeBinQubit(0.8, -0.6),
    ])
    def test_every_pattern_is_corrected(self, qubit):
        report = simulate_point(ProtocolConfig(3, 0.25, 0.5, qubit))
        assert len(report.records) == 64
        assert all(r.fidelity >= 1 - 1e-10 for r in report.records)

    def test_uncorrected_state_is_not_the_target(self, evolved3):
        cfg, circuit, evolved = evolved3
        table = detection_table(evolved.branch("signal").state, circuit)
        target = prepare_w_state(3, cfg.qubit, circuit.registry, channel="out")
        raw = table.conditionals[DetectionPattern.parse("D1D4/D1D2/D1D2")]
        assert fidelity(raw, target) < 0.9


class TestHerald:
    def test_uniformity_and_completeness(self, report3):
        assert report3.uniformity_signal < 1e-10
        assert report3.uniformity_vacuum < 1e-10
        assert report3.completeness < 1e-10
        t = 0.25
        for r in report3.records:
            assert r.p_signal == pytest.approx(t ** 5 * (1 - t) / 64, abs=1e-14)

    def test_branch_totals(self, report3):
        t = 0.25
        assert report3.p1 == pytest.approx(t ** 5 * (1 - t), abs=1e-12)
        assert report3.p2 == pytest.approx(t ** 6, abs=1e-12)

    def test_total_probability_at_reference_point(self, report3):
        assert report3.p_total == pytest.approx(0.000537109375, abs=1e-12)

    def test_fidelity_at_reference_point(self):
        report = simulate_point(ProtocolConfig(3, 0.25, 0.2))
        assert report.eta_prime == pytest.approx(3 / 7, abs=1e-9)

    @pytest.mark.parametrize("eta", [0.2, 0.6, 0.8])
    def test_unit_gain_at_half(self, eta):
        report = simulate_point(ProtocolConfig(3, 0.5, eta))
        assert report.gain == pytest.approx(1.0, abs=1e-9)

    def test_output_keeps_the_input_form(self, report3, evolved3):
        cfg, circuit, _ = evolved3
        target = prepare_w_state(3, cfg.qubit, circuit.registry, channel="out")
        assert report3.output.fidelity_with(target) == pytest.approx(report3.eta_prime, abs=1e-10)

    def test_alpha_beta_do_not_matter(self):
        values = []
        for q in (TimeBinQubit(1, 0), TimeBinQubit(0, 1), TimeBinQubit(S, S), TimeBinQubit(0.6, 0.8j)):
            r = simulate_point(ProtocolConfig(3, 0.3, 0.6, q))
            values.append((r.eta_prime, r.gain, r.p_total))
        for column in zip(*values):
            assert max(column) - min(column) < 1e-10

    def test_zero_eta_has_no_gain(self):
        report = simulate_point(ProtocolConfig(2, 0.3, 0.0))
        assert report.gain is None
        assert report.eta_prime == 0.0
        assert report.p_total == pytest.approx(0.3 ** 4)

    def test_report_dict(self, report3):
        doc = report3.to_dict()
        assert doc["patterns"] == 64
        assert set(doc) >= {"p1", "p2", "p_total", "eta_prime", "gain", "min_fidelity"}

    def test_four_parties(self):
        t = 0.3
        report = simulate_point(ProtocolConfig(4, t, 0.6))
        assert len(report.records) == 256
        assert report.uniformity_signal < 1e-10
        assert report.p1 == pytest.approx(t ** 7 * (1 - t), abs=1e-12)
        assert report.min_fidelity >= 1 - 1e-10

    def test_four_party_point_runs_quickly(self):
        correction_table(4)
        start = time.perf_counter()
        simulate_point(ProtocolConfig(4, 0.3, 0.6))
        assert time.perf_counter() - start < 5.0

    @pytest.mark.parametrize("drop", ["vacuum", "signal"])
    def test_missing_branch_rejected(self, drop):
        cfg = ProtocolConfig(2, 0.3, 1.0 if drop == "vacuum" else 0.0)
        circuit = build_amplifier(cfg)
        registry = circuit.registry
        w = prepare_w_state(2, cfg.qubit, registry)
        aux = reduce(tensor, (prepare_auxiliary_pair(p, registry) for p in range(2)))
        # default drop_empty=True leaves out the zero-weight branch
        e = apply_loss_channel(w, cfg.eta).map(lambda s: tensor(s, aux))
        assert e.branch(drop) is None
        evolved = run_circuit(e, circuit)
        with pytest.raises(InvariantViolation, match=drop):
            herald(evolved, circuit, cfg)
