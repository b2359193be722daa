"""Tests for the coupler-mediated nuclear CNOT protocol."""

from __future__ import annotations

import json
import unittest

import numpy as np
import pytest

from donorcnot.grape import (
    GrapeConfig,
    PulseSequence,
    carriers_for,
    optimize,
    propagate_pulse,
    target_cnot,
    trace_fidelity,
)
from donorcnot.hamiltonian import DeviceParams, Spin, electron_drift, post_swap_nuclear_config
from donorcnot.linalg import PureState, Unitary, embed_pauli, propagator
from donorcnot.placement import default_model, exchange_distribution, exchange_grid
from donorcnot.protocol import (
    LOADED_LAYOUT,
    TRUTH_TABLE_INPUTS,
    UNLOADED_LAYOUT,
    ProtocolRunner,
    ProtocolState,
    apply_electron_cnot,
    en_swap,
    factor_out,
    frozen_nuclear_config,
    ideal_cnot_output,
    init_state,
    load_coupler,
    run_protocol,
    unload_coupler,
)

BASIS_LABELS = ("|0>|0>", "|0>|1>", "|1>|0>", "|1>|1>")


class TestIdealTruthTable(unittest.TestCase):
    """The protocol with the ideal electron CNOT."""

    def setUp(self):
        """Run the truth table once."""
        self.rows = {r.label: r for r in ProtocolRunner().verify_truth_table()}

    def test_all_inputs_pass(self):
        """Test every input reaches the ideal output."""
        assert len(self.rows) == len(TRUTH_TABLE_INPUTS)
        for row in self.rows.values():
            assert row.passed, row.label
            assert row.overlap == pytest.approx(1.0, abs=1e-9)

    def test_control_one_flips_target(self):
        """Test |1>_T |1>_C goes to |0>_T |1>_C."""
        observed = self.rows["|1>|1>"].observed
        assert observed.overlap(PureState.basis(0b01, 4)) == pytest.approx(1.0)

    def test_control_zero_keeps_target(self):
        """Test |1>_T |0>_C is unchanged."""
        observed = self.rows["|1>|0>"].observed
        assert observed.overlap(PureState.basis(0b10, 4)) == pytest.approx(1.0)

    def test_bell_state(self):
        """Test a superposed control produces a Bell state."""
        probs = self.rows["|0>|+>"].observed.probabilities()
        np.testing.assert_allclose(probs, [0.5, 0.0, 0.0, 0.5], atol=1e-12)

    def test_coupler_nucleus_down(self):
        """Test the spectator coupler nucleus does not matter."""
        rows = ProtocolRunner(coupler_nucleus="down").verify_truth_table()
        assert all(r.passed for r in rows)


class TestSteps:
    """Individual protocol steps."""

    def test_init_layout(self):
        """Test the unloaded register."""
        state = init_state("u", "d")
        assert state.layout == UNLOADED_LAYOUT
        assert state.register.dim == 32
        assert not state.coupler_loaded
        assert state.spin_z("T") == pytest.approx(-1.0)
        assert state.spin_z("nT") == pytest.approx(1.0)
        assert state.spin_z("nC") == pytest.approx(-1.0)

    def test_invalid_qubit(self):
        """Test that data states must be qubits."""
        with pytest.raises(ValueError, match="two-dimensional"):
            init_state(PureState.basis(0, 4), "u")

    def test_layout_mismatch(self):
        """Test that the register must fit the layout."""
        with pytest.raises(ValueError, match="does not match"):
            ProtocolState(PureState.basis(0, 8), UNLOADED_LAYOUT)

    def test_load_inserts_down_coupler(self):
        """Test loading adds a down electron at position 1."""
        state = load_coupler(init_state("u", "u"))
        assert state.layout == LOADED_LAYOUT
        assert state.spin_z("c") == pytest.approx(-1.0)
        assert state.probabilities() == {"111000": pytest.approx(1.0)}

    def test_load_twice(self):
        """Test that loading a loaded register raises RuntimeError."""
        state = load_coupler(init_state("u", "u"))
        with pytest.raises(RuntimeError, match="already loaded"):
            load_coupler(state)

    def test_load_then_unload(self):
        """Test that unloading undoes loading."""
        state = init_state(np.array([0.6, 0.8j]), "d")
        back = unload_coupler(load_coupler(state))
        assert back.layout == UNLOADED_LAYOUT
        np.testing.assert_allclose(back.register.amplitudes, state.register.amplitudes, atol=1e-12)

    def test_unload_not_loaded(self):
        """Test that unloading an empty coupler raises RuntimeError."""
        with pytest.raises(RuntimeError, match="not loaded"):
            unload_coupler(init_state("u", "u"))

    def test_unload_entangled(self):
        """Test that an entangled coupler cannot be unloaded."""
        amps = np.zeros(64, dtype=complex)
        amps[0] = amps[0b110000] = 1 / np.sqrt(2)
        state = ProtocolState(PureState(amps), LOADED_LAYOUT)
        with pytest.raises(RuntimeError, match="entangled"):
            unload_coupler(state)

    def test_factor_out_product(self):
        """Test factoring a product state gives zero residual."""
        site = np.array([0.6, 0.8])
        rest = np.array([1, 1j]) / np.sqrt(2)
        state = PureState(np.kron(rest, site))
        got_rest, got_site, residual = factor_out(state, 2, 1)
        assert residual == pytest.approx(0.0, abs=1e-12)
        np.testing.assert_allclose(got_site.amplitudes, site, atol=1e-12)
        assert got_rest.overlap(PureState(rest)) == pytest.approx(1.0)

    def test_swaps_commute(self):
        """Test that swaps on different donors commute."""
        t, c = en_swap("T").matrix, en_swap("C").matrix
        np.testing.assert_allclose(t @ c, c @ t)
        np.testing.assert_allclose(t @ t, np.eye(64))

    def test_swap_needs_active_sites(self):
        """Test that the coupler swap needs the coupler electron."""
        with pytest.raises(ValueError, match="active"):
            en_swap("c", UNLOADED_LAYOUT)

    def test_swap_moves_data(self):
        """Test that the target swap moves the nuclear state to the electron."""
        state = load_coupler(init_state("u", "d"))
        swapped = Unitary(en_swap("T").matrix).apply(state.register)
        moved = ProtocolState(swapped, LOADED_LAYOUT)
        assert moved.spin_z("T") == pytest.approx(1.0)
        assert moved.spin_z("nT") == pytest.approx(-1.0)

    def test_frozen_config_after_swap(self):
        """Test the frozen nuclei after swapping the data out."""
        state = load_coupler(init_state("u", "u"))
        swaps = en_swap("C").matrix @ en_swap("T").matrix
        swapped = ProtocolState(Unitary(swaps).apply(state.register), LOADED_LAYOUT)
        assert frozen_nuclear_config(swapped) == post_swap_nuclear_config()

    def test_frozen_config_superposition(self):
        """Test that superposed nuclei have no frozen configuration."""
        state = load_coupler(init_state(np.array([1, 1]) / np.sqrt(2), "u"))
        with pytest.raises(ValueError, match="definite"):
            frozen_nuclear_config(state)

    def test_cnot_needs_coupler(self):
        """Test that the electron CNOT needs a loaded coupler."""
        with pytest.raises(RuntimeError, match="coupler"):
            apply_electron_cnot(init_state("u", "u"))

    def test_cnot_arguments(self):
        """Test gate argument validation."""
        state = load_coupler(init_state("u", "u"))
        pulse = PulseSequence.zeros([0.0], 2, 0.01)
        with pytest.raises(ValueError, match="either"):
            apply_electron_cnot(state, gate=target_cnot(), pulse=pulse)
        with pytest.raises(ValueError, match="8-dim"):
            apply_electron_cnot(state, gate=Unitary.identity(4))

    def test_trace_steps(self):
        """Test the recorded steps and layouts."""
        _, traces = run_protocol("d", "d")
        assert [t.label for t in traces] == ["init", "load", "swap_in", "cnot", "swap_out", "unload"]
        assert traces[0].layout == UNLOADED_LAYOUT
        assert traces[1].layout == LOADED_LAYOUT
        assert traces[-1].layout == UNLOADED_LAYOUT
        # data moved into the electrons: T and C carry the nuclear inputs
        assert dict(traces[2].probabilities) == {"111101": pytest.approx(1.0)}
        assert dict(traces[3].probabilities) == {"011101": pytest.approx(1.0)}

    def test_random_inputs(self):
        """Test seeded random product inputs against the reference CNOT."""
        rng = np.random.default_rng(11)
        for _ in range(50):
            kets = []
            for _ in range(2):
                v = rng.normal(size=2) + 1j * rng.normal(size=2)
                kets.append(v / np.linalg.norm(v))
            out, traces = run_protocol(*kets)
            assert out.overlap(ideal_cnot_output(*kets)) == pytest.approx(1.0, abs=1e-9)
            # coupler nucleus stays up
            assert all(key[3] == "0" for key, _ in traces[-1].probabilities)

    def test_ideal_output(self):
        """Test the reference CNOT on a basis input."""
        out = ideal_cnot_output("d", "d")
        assert out.overlap(PureState.basis(0b01, 4)) == pytest.approx(1.0)


class TestSuppliedGates:
    """The protocol with non-ideal electron gates."""

    def test_perturbed_gate_bound(self):
        """Test basis overlaps against the bound implied by the gate fidelity."""
        kick = embed_pauli("Y", 0, 3) + embed_pauli("X", 2, 3)
        gate = target_cnot() @ propagator(kick, 0.002)
        fidelity = trace_fidelity(gate, target_cnot())
        assert fidelity < 1.0
        bound = (1 - 8 * (1 - fidelity)) ** 2
        rows = {r.label: r for r in ProtocolRunner(gate).verify_truth_table(min_overlap=0.99)}
        assert all(r.passed for r in rows.values())
        for label in BASIS_LABELS:
            assert rows[label].overlap >= bound - 1e-12
            assert rows[label].overlap >= 2 * fidelity - 1

    def test_pulse_matches_its_propagator(self):
        """Test that pulse mode uses the post-swap drift."""
        device = DeviceParams(j_tc_mhz=0.0, j_cc_mhz=0.0)
        pulse = PulseSequence.zeros([0.0], 5, 0.01)
        gate = propagate_pulse(pulse, electron_drift(device, post_swap_nuclear_config()))
        by_pulse = ProtocolRunner(pulse, device=device).verify_truth_table()
        by_gate = ProtocolRunner(gate, device=device).verify_truth_table()
        for a, b in zip(by_pulse, by_gate):
            assert a.observed.overlap(b.observed) == pytest.approx(1.0, abs=1e-9)

    def test_default_tolerances(self):
        """Test tolerances for ideal and supplied gates."""
        assert ProtocolRunner().tolerance == pytest.approx(1e-9)
        assert ProtocolRunner(target_cnot()).tolerance == pytest.approx(1e-2)
        with pytest.raises(ValueError, match="positive"):
            ProtocolRunner(tolerance=0.0)


class TestReport:
    """JSON report."""

    def test_report(self):
        """Test the report counts and traces."""
        doc = json.loads(ProtocolRunner().report())
        assert doc["gate"] == "ideal"
        assert doc["passed"] == doc["total"] == len(TRUTH_TABLE_INPUTS)
        assert set(doc["traces"]) == {label for label, _, _ in TRUTH_TABLE_INPUTS}
        assert len(doc["traces"]["|1>|1>"]) == 6

    def test_report_is_deterministic(self):
        """Test byte-identical reports."""
        assert ProtocolRunner().report() == ProtocolRunner().report()

    def test_spin_inputs(self):
        """Test that Spin members are accepted as inputs."""
        out, _ = run_protocol(Spin.DOWN, Spin.UP)
        assert out.overlap(PureState.basis(0b10, 4)) == pytest.approx(1.0)


@pytest.mark.slow
class TestOptimizedPulse:
    """The protocol driven by a GRAPE pulse."""

    def test_truth_table_with_optimized_pulse(self):
        """Test that an optimized electron pulse yields the nuclear CNOT."""
        model = default_model("strained")
        grid = exchange_grid(exchange_distribution(14.0, model), exchange_distribution(18.0, model))
        pair = grid[7 * 15 + 7]
        device = DeviceParams().with_exchange(pair.j_tc, pair.j_cc)
        drift = electron_drift(device, post_swap_nuclear_config())
        # per-input overlap >= (1 - 8 (1 - F))^2 >= 0.998 once F >= 0.9999
        config = GrapeConfig(fidelity_target=0.9999, max_iterations=6000)
        pulse, report = optimize(config, drift, carriers_for(drift), device=device)
        assert report.converged
        rows = ProtocolRunner(pulse, device=device).verify_truth_table()
        assert all(r.passed for r in rows)
        for label in BASIS_LABELS:
            assert next(r for r in rows if r.label == label).overlap >= 0.998
