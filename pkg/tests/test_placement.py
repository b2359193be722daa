"""Tests for donor placement statistics and the exchange model."""

from __future__ import annotations

import unittest

import numpy as np
import pytest
from pydantic import ValidationError

from donorcnot.placement import (
    A0_NM,
    N_CLASSES,
    N_PAIRS,
    CalibrationConstraints,
    DisplacementClass,
    ExchangeModelParams,
    PlacementOffset,
    calibrate,
    default_model,
    displacement_vector,
    enumerate_pair_offsets,
    exchange_distribution,
    exchange_envelope,
    exchange_grid,
    exchange_profile,
    exchange_time,
    exchange_value,
    j_from_splitting,
    relative_displacement,
    symmetry_classes,
    unstrained_model,
)

try:
    import matplotlib as mpl
    import matplotlib.pyplot as plt

    MATPLOTLIB_AVAILABLE = True
except ImportError:
    MATPLOTLIB_AVAILABLE = False


class TestSymmetryClasses(unittest.TestCase):
    """Enumeration and folding of the 81 placement pairs."""

    def setUp(self):
        """Enumerate the pairs and classes once."""
        self.pairs = enumerate_pair_offsets()
        self.classes = symmetry_classes(self.pairs)

    def test_counts(self):
        """Test 81 pairs reduce to 15 classes."""
        assert len(self.pairs) == N_PAIRS
        assert len(self.classes) == N_CLASSES
        assert sum(c.multiplicity for c in self.classes) == N_PAIRS

    def test_known_multiplicities(self):
        """Test a few multiplicities of the canonical classes."""
        counts = {(c.rel_dx, c.rel_dy): c.multiplicity for c in self.classes}
        assert counts[0, 0] == 9
        assert counts[0, 2] == 6
        assert counts[2, 2] == 2
        assert counts[-2, 0] == 3

    def test_canonical_order(self):
        """Test classes are sorted and have non-negative rel_dy."""
        keys = [(c.rel_dx, c.rel_dy) for c in self.classes]
        assert keys == sorted(keys)
        assert all(c.rel_dy >= 0 for c in self.classes)

    def test_incomplete_enumeration(self):
        """Test that a partial enumeration raises ValueError."""
        with pytest.raises(ValueError, match="81"):
            symmetry_classes(self.pairs[:-1])

    def test_duplicates(self):
        """Test that duplicated pairs raise ValueError."""
        with pytest.raises(ValueError, match="distinct"):
            symmetry_classes([*self.pairs[:-1], self.pairs[0]])

    def test_wrong_entry_type(self):
        """Test that entries must be PlacementOffset pairs."""
        bad = [((p.dx, p.dy), q) for p, q in self.pairs]
        with pytest.raises(TypeError, match="PlacementOffset"):
            symmetry_classes(bad)  # type: ignore[arg-type]

    def test_offset_validation(self):
        """Test that offsets outside the 3x3 window are rejected."""
        with pytest.raises(ValueError, match="-1, 0 or 1"):
            PlacementOffset(2, 0)
        with pytest.raises(TypeError):
            PlacementOffset(0.5, 0)  # type: ignore[arg-type]

    def test_class_validation(self):
        """Test that non-canonical displacement classes are rejected."""
        with pytest.raises(ValueError, match="canonical"):
            DisplacementClass(0, -1, 2)


class TestExchangeModel:
    """Envelope, valley factor and validity floor."""

    def test_displacement_along_100(self):
        """Test the displacement of an on-axis pair."""
        np.testing.assert_allclose(displacement_vector(14.0, 1, 2), [14.0 + A0_NM, 2 * A0_NM, 0])

    def test_displacement_along_110(self):
        """Test that [110] separations have the nominal length."""
        vec = displacement_vector(14.0, 0, 0, "[110]")
        assert np.linalg.norm(vec) == pytest.approx(14.0)
        assert vec[0] == pytest.approx(vec[1])

    def test_invalid_axis(self):
        """Test that an unknown axis raises ValueError."""
        with pytest.raises(ValueError, match="axis"):
            displacement_vector(14.0, 0, 0, "[111]")  # type: ignore[arg-type]

    def test_validity_floor(self):
        """Test that displacements below 5 nm raise ValueError."""
        model = unstrained_model()
        with pytest.raises(ValueError, match="validity floor"):
            exchange_value([4.0, 0.0, 0.0], model)
        with pytest.raises(ValueError, match="at least"):
            exchange_distribution(4.0, model)

    @pytest.mark.parametrize("mode", ["strained", "unstrained"])
    @pytest.mark.parametrize("axis", ["[100]", "[110]"])
    def test_reflection_invariance(self, mode, axis):
        """Test that every raw pair matches its dy-reflected partner."""
        model = default_model(mode, axis)
        for pair in enumerate_pair_offsets():
            dx, dy = relative_displacement(pair)
            direct = exchange_value(displacement_vector(14.0, dx, dy, axis), model)
            mirrored = exchange_value(displacement_vector(14.0, dx, -dy, axis), model)
            assert direct == pytest.approx(mirrored, rel=1e-12)

    def test_strained_envelope_decays(self):
        """Test that strained exchange is weaker at 18 nm than at 14 nm."""
        model = default_model("strained")
        assert exchange_envelope(14.0, model) > exchange_envelope(18.0, model)

    def test_unstrained_envelope_reference(self):
        """Test the reference envelope is 5 MHz at 13 nm."""
        assert exchange_envelope(13.0, unstrained_model()) == pytest.approx(5.0)

    def test_strained_has_no_in_plane_oscillation(self):
        """Test that strained exchange in-plane is the bare envelope."""
        model = default_model("strained")
        vec = displacement_vector(15.0, 1, 1)
        assert exchange_value(vec, model) == pytest.approx(
            exchange_envelope(float(np.linalg.norm(vec)), model)
        )

    def test_axis_brackets_added(self):
        """Test that axis names without brackets are accepted."""
        model = ExchangeModelParams(prefactor_mhz=1.0, bohr_radius_nm=2.0, axis="110")  # type: ignore[arg-type]
        assert model.axis == "[110]"

    def test_invalid_params(self):
        """Test that non-positive parameters are rejected."""
        with pytest.raises(ValidationError):
            ExchangeModelParams(prefactor_mhz=-1.0, bohr_radius_nm=2.0)

    def test_profile_decays(self):
        """Test that the strained profile decays monotonically."""
        profile = exchange_profile([10.0, 15.0, 20.0, 25.0], default_model("strained"))
        values = [j for _, j in profile]
        assert all(a > b for a, b in zip(values, values[1:]))
        assert [s for s, _ in profile] == [10.0, 15.0, 20.0, 25.0]

    def test_exchange_time(self):
        """Test the bare exchange time 1/(4J)."""
        assert exchange_time(0.25) == pytest.approx(1.0)
        with pytest.raises(ValueError, match="positive"):
            exchange_time(0.0)

    def test_j_from_splitting(self):
        """Test the energy-to-frequency conversion."""
        assert j_from_splitting(1.0) == pytest.approx(241.799 / 4)


class TestDistribution(unittest.TestCase):
    """Exchange distributions over the 15 classes."""

    def setUp(self):
        """Build the default models."""
        self.strained = default_model("strained")
        self.unstrained = default_model("unstrained")

    def test_strained_spread_is_small(self):
        """Test the strained spread at 14 and 18 nm."""
        for separation in (14.0, 18.0):
            dist = exchange_distribution(separation, self.strained)
            assert len(dist) == N_CLASSES
            assert dist.spread() <= 5.0

    def test_unstrained_spread_is_large(self):
        """Test the unstrained spread at 14 nm."""
        assert exchange_distribution(14.0, self.unstrained).spread() >= 100.0

    def test_unstrained_neighbors_differ_strongly(self):
        """Test that one-site moves change unstrained exchange by large factors."""
        dist = exchange_distribution(14.0, self.unstrained)
        j = {(c.rel_dx, c.rel_dy): value for c, value in dist}
        ratios = [
            max(j[a], j[b]) / min(j[a], j[b])
            for a in j
            for b in j
            if abs(a[0] - b[0]) + abs(a[1] - b[1]) == 1
        ]
        assert max(ratios) > 10.0

    def test_weights_and_mean(self):
        """Test that class weights sum to one and the mean lies in range."""
        dist = exchange_distribution(14.0, self.strained)
        assert dist.weights().sum() == pytest.approx(1.0)
        assert dist.j_values().min() <= dist.mean() <= dist.j_values().max()

    def test_sequence_behaviour(self):
        """Test indexing, slicing and iteration."""
        dist = exchange_distribution(18.0, self.strained)
        cls, value = dist[0]
        assert isinstance(cls, DisplacementClass)
        assert value == pytest.approx(float(dist.j_values()[0]))
        assert len(dist[2:5]) == 3
        assert len(list(dist)) == N_CLASSES

    def test_values_read_only(self):
        """Test that the exchange values cannot be modified."""
        dist = exchange_distribution(14.0, self.strained)
        with pytest.raises(ValueError, match="read-only"):
            dist.j_values()[0] = 1.0

    def test_csv(self):
        """Test the CSV header and row count."""
        lines = exchange_distribution(14.0, self.strained).to_csv().splitlines()
        assert lines[0] == "class_id,rel_dx,rel_dy,multiplicity,j_mhz"
        assert len(lines) == 1 + N_CLASSES

    def test_csv_is_deterministic(self):
        """Test byte-identical output for repeated evaluation."""
        a = exchange_distribution(14.0, self.unstrained).to_csv()
        b = exchange_distribution(14.0, self.unstrained).to_csv()
        assert a == b

    def test_json(self):
        """Test the JSON document lists all classes."""
        import json

        doc = json.loads(exchange_distribution(14.0, self.strained).to_json())
        assert doc["separation_nm"] == 14.0
        assert len(doc["classes"]) == N_CLASSES
        assert doc["model"]["mode"] == "strained"


class TestCalibration:
    """Closed-form calibration of the strained envelope."""

    def test_default_targets(self):
        """Test equivalence at 20 nm and the 25 nm anchor."""
        model = calibrate()
        reference = unstrained_model()
        j20 = exchange_envelope(20.0, model)
        assert j20 == pytest.approx(exchange_envelope(13.0, reference))
        assert exchange_envelope(25.0, model) == pytest.approx(0.5)
        assert 0.5 <= j20 / exchange_envelope(13.0, reference) <= 2.0

    def test_bohr_radius(self):
        """Test the calibrated Bohr radius."""
        assert calibrate().bohr_radius_nm == pytest.approx(3.496, abs=1e-3)

    def test_microsecond_exchange_time(self):
        """Test that the bare exchange time at 25 nm is at most 1 us."""
        j25 = exchange_profile([25.0], calibrate())[0][1]
        assert exchange_time(j25) <= 1.0

    def test_unstrained_family_rejected(self):
        """Test that only the strained family is calibrated."""
        with pytest.raises(ValueError, match="strained"):
            calibrate("unstrained")

    def test_low_anchor_infeasible(self):
        """Test that an anchor below 0.25 MHz is infeasible."""
        with pytest.raises(ValueError, match="below"):
            calibrate(constraints=CalibrationConstraints(anchor_j_mhz=0.1))

    def test_anchor_above_reference_infeasible(self):
        """Test that a non-decaying envelope is infeasible."""
        with pytest.raises(ValueError, match="infeasible"):
            calibrate(constraints=CalibrationConstraints(anchor_j_mhz=100.0))

    def test_spread_limit(self):
        """Test that a tight spread limit makes calibration infeasible."""
        with pytest.raises(ValueError, match="spread"):
            calibrate(constraints=CalibrationConstraints(max_spread=1.5))

    def test_empty_band(self):
        """Test that an inverted unstrained band is rejected."""
        with pytest.raises(ValidationError, match="empty"):
            CalibrationConstraints(
                unstrained_separation_min_nm=14.0, unstrained_separation_max_nm=12.0
            )

    def test_json_roundtrip(self):
        """Test model serialization."""
        model = calibrate()
        assert ExchangeModelParams.from_json(model.to_json()) == model


class TestExchangeGrid:
    """The 225-pair target-coupler / coupler-control grid."""

    def test_grid(self):
        """Test size, ordering and weights of the grid."""
        model = default_model("strained")
        dist_tc = exchange_distribution(14.0, model)
        dist_cc = exchange_distribution(18.0, model)
        grid = exchange_grid(dist_tc, dist_cc)
        assert len(grid) == N_CLASSES**2
        assert [p.index for p in grid] == list(range(N_CLASSES**2))
        assert sum(p.weight for p in grid) == pytest.approx(1.0)
        assert grid[16].class_tc == 1
        assert grid[16].class_cc == 1
        assert grid[0].j_tc == pytest.approx(float(dist_tc.j_values()[0]))


@pytest.mark.skipif(not MATPLOTLIB_AVAILABLE, reason="matplotlib not installed")
class TestDistributionShow:
    """Bar plots of distributions."""

    def test_show_returns_figure(self):
        """Test that show() returns a matplotlib Figure."""
        fig = exchange_distribution(14.0, default_model("unstrained")).show()
        assert isinstance(fig, mpl.figure.Figure)
        plt.close(fig)
