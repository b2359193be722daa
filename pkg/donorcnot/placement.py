"""Donor placement uncertainty and the exchange it produces.

Each donor of a pair sits on one of nine in-plane lattice sites within
``±a0`` of its intended position. The 81 placement pairs collapse to 15
relative displacements once the mirror across the inter-donor axis is used,
and each displacement maps to an exchange strength through an envelope
times valley-interference model.
"""

from __future__ import annotations

import itertools
import logging
from collections import Counter
from dataclasses import dataclass
from functools import cache
from typing import TYPE_CHECKING, Literal, overload

import numpy as np
from pydantic import Field, field_validator, model_validator

from donorcnot.utils import MHZ_PER_MICRO_EV, JsonModel, csv_text, dumps

if TYPE_CHECKING:
    from collections.abc import Iterable, Iterator, Sequence

    from numpy.typing import ArrayLike, NDArray
    from typing_extensions import Self

logger = logging.getLogger(__name__)

A0_NM = 0.543
MIN_SEPARATION_NM = 5.0
N_OFFSETS = 9
N_PAIRS = 81
N_CLASSES = 15

# Unstrained reference: Bohr radius and envelope value at 13 nm.
UNSTRAINED_BOHR_RADIUS_NM = 2.5
UNSTRAINED_ENVELOPE_AT_13NM_MHZ = 5.0

Axis = Literal["[100]", "[110]"]
Mode = Literal["strained", "unstrained"]

_AXIS_FRAMES: dict[str, tuple[NDArray[np.float64], NDArray[np.float64]]] = {
    "[100]": (np.array([1.0, 0.0, 0.0]), np.array([0.0, 1.0, 0.0])),
    "[110]": (
        np.array([1.0, 1.0, 0.0]) / np.sqrt(2.0),
        np.array([-1.0, 1.0, 0.0]) / np.sqrt(2.0),
    ),
}


@dataclass(frozen=True, order=True)
class PlacementOffset:
    """Lattice-site offset of one donor, in units of ``a0``."""

    dx: int
    dy: int

    def __post_init__(self) -> None:
        """Check both components lie in ``{-1, 0, 1}``."""
        for value in (self.dx, self.dy):
            if isinstance(value, bool) or not isinstance(value, (int, np.integer)):
                msg = "offset components must be integers"
                raise TypeError(msg)
            if value not in (-1, 0, 1):
                msg = f"offset components must be -1, 0 or 1, got {value}"
                raise ValueError(msg)


@dataclass(frozen=True, order=True)
class DisplacementClass:
    """A symmetry-distinct relative displacement and how many pairs produce it."""

    rel_dx: int
    rel_dy: int
    multiplicity: int

    def __post_init__(self) -> None:
        """Validate the canonical representative."""
        if not -2 <= self.rel_dx <= 2 or not 0 <= self.rel_dy <= 2:
            msg = f"({self.rel_dx}, {self.rel_dy}) is not a canonical displacement"
            raise ValueError(msg)
        if self.multiplicity < 1:
            msg = "multiplicity must be positive"
            raise ValueError(msg)


class ExchangeModelParams(JsonModel):
    """Envelope and valley parameters of the exchange model.

    ``J = prefactor (d/a_B)^(5/2) exp(-2d/a_B) V(d)``, with ``V`` the six-valley
    interference factor in unstrained silicon and the two-valley factor
    (valleys normal to the donor plane) under strain.
    """

    mode: Mode = "unstrained"
    prefactor_mhz: float = Field(gt=0)
    bohr_radius_nm: float = Field(gt=0)
    valley_k0: float = Field(default=0.85, gt=0, lt=1)
    axis: Axis = "[100]"

    @field_validator("axis", mode="before")
    @classmethod
    def _bracket_axis(cls, value: object) -> object:
        if isinstance(value, str) and not value.startswith("["):
            return f"[{value}]"
        return value

    @property
    def wavevector(self) -> float:
        """Valley wavevector ``k0 · 2π/a0`` in 1/nm."""
        return self.valley_k0 * 2 * np.pi / A0_NM


class CalibrationConstraints(JsonModel):
    """Targets the strained envelope is solved against."""

    strained_separation_nm: float = Field(default=20.0, gt=0)
    unstrained_separation_min_nm: float = Field(default=12.0, gt=0)
    unstrained_separation_max_nm: float = Field(default=14.0, gt=0)
    anchor_separation_nm: float = Field(default=25.0, gt=0)
    anchor_j_mhz: float = Field(default=0.5, gt=0)
    min_anchor_j_mhz: float = Field(default=0.25, gt=0)
    spread_separations_nm: tuple[float, ...] = (14.0, 18.0)
    max_spread: float = Field(default=5.0, gt=1)

    @model_validator(mode="after")
    def _ordered_band(self) -> Self:
        if self.unstrained_separation_min_nm > self.unstrained_separation_max_nm:
            msg = "unstrained separation band is empty"
            raise ValueError(msg)
        return self

    @property
    def unstrained_separation_nm(self) -> float:
        """Midpoint of the unstrained separation band."""
        return 0.5 * (self.unstrained_separation_min_nm + self.unstrained_separation_max_nm)


def enumerate_pair_offsets() -> list[tuple[PlacementOffset, PlacementOffset]]:
    """All 81 placement pairs in lexicographic order.

    Examples
    --------
    >>> pairs = enumerate_pair_offsets()
    >>> len(pairs)
    81
    >>> pairs[0]
    (PlacementOffset(dx=-1, dy=-1), PlacementOffset(dx=-1, dy=-1))
    """
    sites = [PlacementOffset(dx, dy) for dx, dy in itertools.product((-1, 0, 1), repeat=2)]
    return list(itertools.product(sites, sites))


def relative_displacement(
    pair: tuple[PlacementOffset, PlacementOffset],
) -> tuple[int, int]:
    """Offset of the second donor relative to the first, ``(dx, dy)``."""
    a, b = pair
    return b.dx - a.dx, b.dy - a.dy


def symmetry_classes(
    pairs: Sequence[tuple[PlacementOffset, PlacementOffset]],
) -> list[DisplacementClass]:
    """Fold the 81 placement pairs into symmetry-distinct displacements.

    Parameters
    ----------
    pairs : Sequence[tuple[PlacementOffset, PlacementOffset]]
        Output of `enumerate_pair_offsets`.

    Returns
    -------
    list[DisplacementClass]
        Classes keyed by ``(rel_dx, |rel_dy|)``, sorted by ``(rel_dx, rel_dy)``.

    Raises
    ------
    ValueError
        If `pairs` is not the full, duplicate-free 81-pair enumeration.
    TypeError
        If an entry is not a pair of `PlacementOffset`.
    """
    if len(pairs) != N_PAIRS or len(set(pairs)) != N_PAIRS:
        msg = f"expected the {N_PAIRS} distinct placement pairs, got {len(pairs)}"
        raise ValueError(msg)
    counts: Counter[tuple[int, int]] = Counter()
    for pair in pairs:
        if len(pair) != 2 or not all(isinstance(p, PlacementOffset) for p in pair):
            msg = "each entry must be a pair of PlacementOffset"
            raise TypeError(msg)
        rel_dx, rel_dy = relative_displacement(pair)
        counts[rel_dx, abs(rel_dy)] += 1
    return [DisplacementClass(dx, dy, n) for (dx, dy), n in sorted(counts.items())]


def displacement_vector(
    separation: float, rel_dx: int, rel_dy: int, axis: Axis = "[100]"
) -> NDArray[np.float64]:
    """Crystal-frame displacement in nm for a nominal separation along `axis`.

    `rel_dx` runs along the inter-donor axis and `rel_dy` along the in-plane
    perpendicular, both in units of ``a0``.
    """
    try:
        along, across = _AXIS_FRAMES[axis]
    except KeyError as e:
        msg = f"axis must be '[100]' or '[110]', got '{axis}'"
        raise ValueError(msg) from e
    return (separation + rel_dx * A0_NM) * along + rel_dy * A0_NM * across


def exchange_envelope(distance: float, model: ExchangeModelParams) -> float:
    """Smooth part ``prefactor (d/a_B)^(5/2) exp(-2d/a_B)`` in MHz."""
    ratio = distance / model.bohr_radius_nm
    return float(model.prefactor_mhz * ratio**2.5 * np.exp(-2.0 * ratio))


def valley_factor(displacement: ArrayLike, model: ExchangeModelParams) -> float:
    """Valley-interference factor ``V`` in ``[0, 1]``."""
    k = model.wavevector * np.asarray(displacement, dtype=float)
    if model.mode == "strained":
        return float(np.cos(k[2]) ** 2)
    return float(np.sum(np.cos(k)) ** 2 / 9.0)


def exchange_value(displacement: ArrayLike, model: ExchangeModelParams) -> float:
    """Exchange strength for a donor displacement.

    Parameters
    ----------
    displacement : ArrayLike
        Crystal-frame vector in nm (length 2 for in-plane, or 3).
    model : ExchangeModelParams
        Model parameters.

    Returns
    -------
    float
        ``J`` in MHz (Pauli convention).

    Raises
    ------
    ValueError
        If ``|displacement|`` is below the 5 nm validity floor.
    """
    vec = np.zeros(3)
    arr = np.asarray(displacement, dtype=float).ravel()
    if arr.size not in (2, 3):
        msg = f"displacement must have 2 or 3 components, got {arr.size}"
        raise ValueError(msg)
    vec[: arr.size] = arr
    distance = float(np.linalg.norm(vec))
    if distance < MIN_SEPARATION_NM:
        msg = (
            f"displacement {distance:.4g} nm is below the {MIN_SEPARATION_NM:g} nm "
            "validity floor of the exchange model"
        )
        raise ValueError(msg)
    return exchange_envelope(distance, model) * valley_factor(vec, model)


class ExchangeDistribution:
    """Exchange values of the 15 displacement classes at one separation.

    ExchangeDistribution objects are immutable and behave like a read-only
    sequence of ``(DisplacementClass, j_mhz)`` pairs.
    """

    def __init__(
        self,
        separation: float,
        classes: Sequence[DisplacementClass],
        j_values: Sequence[float],
        model: ExchangeModelParams | None = None,
    ) -> None:
        """Create a distribution.

        Raises
        ------
        ValueError
            If the lengths differ, a value is not positive or the
            multiplicities do not sum to 81.
        """
        if len(classes) != len(j_values):
            msg = "classes and j_values must have the same length"
            raise ValueError(msg)
        if any(not j > 0 for j in j_values):
            msg = "exchange values must be positive"
            raise ValueError(msg)
        if sum(c.multiplicity for c in classes) != N_PAIRS:
            msg = f"multiplicities must sum to {N_PAIRS}"
            raise ValueError(msg)
        self._separation = float(separation)
        self._classes = tuple(classes)
        self._j = np.array(j_values, dtype=float)
        self._j.setflags(write=False)
        self._model = model

    @property
    def separation(self) -> float:
        """Nominal separation in nm."""
        return self._separation

    @property
    def model(self) -> ExchangeModelParams | None:
        """Model the values were computed with, if known."""
        return self._model

    @property
    def classes(self) -> tuple[DisplacementClass, ...]:
        """Displacement classes in canonical order."""
        return self._classes

    def __len__(self) -> int:
        """Return the number of classes."""
        return len(self._classes)

    @overload
    def __getitem__(self, index: int) -> tuple[DisplacementClass, float]: ...

    @overload
    def __getitem__(self, index: slice) -> list[tuple[DisplacementClass, float]]: ...

    def __getitem__(
        self, index: int | slice
    ) -> tuple[DisplacementClass, float] | list[tuple[DisplacementClass, float]]:
        """Get ``(class, J)`` entries by index or slice."""
        if isinstance(index, slice):
            return list(zip(self._classes[index], self._j[index].tolist()))
        return self._classes[index], float(self._j[index])

    def __iter__(self) -> Iterator[tuple[DisplacementClass, float]]:
        """Iterate over ``(class, J)`` entries."""
        return zip(self._classes, self._j.tolist())

    def j_values(self) -> NDArray[np.float64]:
        """Exchange values in MHz, read-only."""
        return self._j

    def multiplicities(self) -> NDArray[np.int_]:
        """Pair counts per class."""
        return np.array([c.multiplicity for c in self._classes])

    def weights(self) -> NDArray[np.float64]:
        """Probability of each class under uniform placement (multiplicity / 81)."""
        return self.multiplicities() / N_PAIRS

    def spread(self) -> float:
        """Ratio of the largest to the smallest exchange value."""
        return float(self._j.max() / self._j.min())

    def mean(self) -> float:
        """Placement-weighted mean exchange in MHz."""
        return float(np.dot(self.weights(), self._j))

    def to_csv(self) -> str:
        """CSV text with columns ``class_id, rel_dx, rel_dy, multiplicity, j_mhz``."""
        rows = [
            (i, c.rel_dx, c.rel_dy, c.multiplicity, float(j))
            for i, (c, j) in enumerate(zip(self._classes, self._j))
        ]
        return csv_text(("class_id", "rel_dx", "rel_dy", "multiplicity", "j_mhz"), rows)

    def to_json(self) -> str:
        """JSON document with the separation, model and class entries."""
        return dumps(
            {
                "separation_nm": self._separation,
                "model": None if self._model is None else self._model.model_dump(),
                "classes": [
                    {
                        "rel_dx": c.rel_dx,
                        "rel_dy": c.rel_dy,
                        "multiplicity": c.multiplicity,
                        "j_mhz": float(j),
                    }
                    for c, j in zip(self._classes, self._j)
                ],
            }
        )

    def show(self, log_scale: bool = True) -> object:
        """Bar plot of J per class (requires matplotlib).

        Parameters
        ----------
        log_scale : bool
            Use a logarithmic J axis (default True).

        Returns
        -------
        matplotlib.figure.Figure
            The figure, for saving or further customization.

        Raises
        ------
        ImportError
            If matplotlib is not installed.
        """
        try:
            import matplotlib.pyplot as plt  # noqa: PLC0415
        except ImportError as e:
            msg = (
                "matplotlib is required for distribution plots. "
                "Install it with: pip install matplotlib"
            )
            raise ImportError(msg) from e

        fig, ax = plt.subplots(figsize=(8, 3))
        labels = [f"({c.rel_dx},{c.rel_dy})" for c in self._classes]
        ax.bar(range(len(self)), self._j, color="tab:blue", edgecolor="black")
        for i, c in enumerate(self._classes):
            ax.text(i, self._j[i], str(c.multiplicity), ha="center", va="bottom", fontsize=7)
        ax.set_xticks(range(len(self)), labels, rotation=60, fontsize=7)
        ax.set_ylabel("J (MHz)")
        if log_scale:
            ax.set_yscale("log")
        mode = "" if self._model is None else f" {self._model.mode} {self._model.axis}"
        ax.set_title(f"{self._separation:g} nm{mode}")
        fig.tight_layout()
        return fig

    def __repr__(self) -> str:
        """Developer representation."""
        return (
            f"ExchangeDistribution(separation={self._separation:g}, "
            f"classes={len(self)}, spread={self.spread():.4g})"
        )


def exchange_distribution(separation: float, model: ExchangeModelParams) -> ExchangeDistribution:
    """Exchange values of the 15 displacement classes at `separation`.

    Parameters
    ----------
    separation : float
        Nominal donor separation in nm along ``model.axis``.
    model : ExchangeModelParams
        Model parameters.

    Returns
    -------
    ExchangeDistribution
        One entry per class, in canonical order.

    Raises
    ------
    ValueError
        If `separation` or a class displacement is below the validity floor.
    """
    if separation < MIN_SEPARATION_NM:
        msg = f"separation must be at least {MIN_SEPARATION_NM:g} nm, got {separation}"
        raise ValueError(msg)
    classes = symmetry_classes(enumerate_pair_offsets())
    values = [
        exchange_value(displacement_vector(separation, c.rel_dx, c.rel_dy, model.axis), model)
        for c in classes
    ]
    return ExchangeDistribution(separation, classes, values, model)


def unstrained_prefactor() -> float:
    """Prefactor giving the default unstrained envelope 5 MHz at 13 nm."""
    ratio = 13.0 / UNSTRAINED_BOHR_RADIUS_NM
    return UNSTRAINED_ENVELOPE_AT_13NM_MHZ / (ratio**2.5 * np.exp(-2.0 * ratio))


def unstrained_model(axis: Axis = "[100]") -> ExchangeModelParams:
    """Default unstrained-silicon model."""
    return ExchangeModelParams(
        mode="unstrained",
        prefactor_mhz=unstrained_prefactor(),
        bohr_radius_nm=UNSTRAINED_BOHR_RADIUS_NM,
        axis=axis,
    )


def calibrate(
    model_family: Mode = "strained",
    constraints: CalibrationConstraints | None = None,
    reference: ExchangeModelParams | None = None,
) -> ExchangeModelParams:
    """Solve the strained envelope from the equivalence and anchor constraints.

    The strained envelope is fixed by two conditions: at
    ``strained_separation_nm`` it equals the unstrained envelope at the
    midpoint of the unstrained band, and at ``anchor_separation_nm`` it
    equals ``anchor_j_mhz``. Both have a closed-form solution.

    Parameters
    ----------
    model_family : {"strained"}
        Family to calibrate. The unstrained model is the reference and is
        not calibrated.
    constraints : CalibrationConstraints | None
        Targets; defaults are used when omitted.
    reference : ExchangeModelParams | None
        Unstrained reference model; `unstrained_model` when omitted.

    Returns
    -------
    ExchangeModelParams
        Strained model on the reference's axis.

    Raises
    ------
    ValueError
        If the constraint set is infeasible: no positive Bohr radius, an
        anchor below ``min_anchor_j_mhz``, or a distribution spread above
        ``max_spread``.
    """
    if model_family != "strained":
        msg = f"only the strained envelope is calibrated, got '{model_family}'"
        raise ValueError(msg)
    cons = constraints or CalibrationConstraints()
    ref = reference or unstrained_model()
    if cons.anchor_j_mhz < cons.min_anchor_j_mhz:
        msg = (
            f"anchor {cons.anchor_j_mhz} MHz is below the {cons.min_anchor_j_mhz} MHz "
            "needed for microsecond exchange times"
        )
        raise ValueError(msg)

    s1, s2 = cons.strained_separation_nm, cons.anchor_separation_nm
    j1 = exchange_envelope(cons.unstrained_separation_nm, ref)
    growth = j1 / cons.anchor_j_mhz * (s2 / s1) ** 2.5
    if s2 <= s1 or growth <= 1.0:
        msg = "calibration is infeasible: no positive Bohr radius satisfies the constraints"
        raise ValueError(msg)
    bohr = 2.0 * (s2 - s1) / np.log(growth)
    ratio = s1 / bohr
    prefactor = j1 / (ratio**2.5 * np.exp(-2.0 * ratio))
    model = ExchangeModelParams(
        mode="strained",
        prefactor_mhz=float(prefactor),
        bohr_radius_nm=float(bohr),
        valley_k0=ref.valley_k0,
        axis=ref.axis,
    )

    for separation in cons.spread_separations_nm:
        spread = exchange_distribution(separation, model).spread()
        if spread > cons.max_spread:
            msg = (
                f"calibration is infeasible: strained spread {spread:.3g} at "
                f"{separation:g} nm exceeds {cons.max_spread:g}"
            )
            raise ValueError(msg)
    logger.debug(
        "calibrated strained envelope: prefactor=%.6g MHz, bohr_radius=%.6g nm",
        model.prefactor_mhz,
        model.bohr_radius_nm,
    )
    return model


@cache
def default_model(mode: Mode = "strained", axis: Axis = "[100]") -> ExchangeModelParams:
    """Default model for `mode`: the calibrated strained or the reference unstrained."""
    reference = unstrained_model(axis)
    if mode == "unstrained":
        return reference
    return calibrate("strained", reference=reference)


def exchange_profile(
    separations: Iterable[float], model: ExchangeModelParams, axis: Axis | None = None
) -> list[tuple[float, float]]:
    """J versus nominal separation for donors placed exactly on `axis`.

    Returns
    -------
    list[tuple[float, float]]
        ``(separation_nm, j_mhz)`` pairs in input order.
    """
    direction = axis or model.axis
    return [
        (float(s), exchange_value(displacement_vector(float(s), 0, 0, direction), model))
        for s in separations
    ]


def exchange_time(j_mhz: float) -> float:
    """Bare exchange interaction time ``1/(4J)`` in microseconds."""
    if not j_mhz > 0:
        msg = f"exchange must be positive, got {j_mhz}"
        raise ValueError(msg)
    return 1.0 / (4.0 * j_mhz)


def j_from_splitting(splitting_micro_ev: float) -> float:
    """Pauli-convention J in MHz from a singlet-triplet splitting in μeV."""
    return splitting_micro_ev * MHZ_PER_MICRO_EV / 4.0


@dataclass(frozen=True)
class ExchangePair:
    """One point of the target-coupler / coupler-control exchange grid."""

    index: int
    class_tc: int
    class_cc: int
    j_tc: float
    j_cc: float
    weight: float


def exchange_grid(
    dist_tc: ExchangeDistribution, dist_cc: ExchangeDistribution
) -> list[ExchangePair]:
    """All class combinations of two distributions, in row-major order.

    The weight of a pair is the product of the two class probabilities.
    """
    w_tc, w_cc = dist_tc.weights(), dist_cc.weights()
    j_tc, j_cc = dist_tc.j_values(), dist_cc.j_values()
    return [
        ExchangePair(
            index=i * len(dist_cc) + k,
            class_tc=i,
            class_cc=k,
            j_tc=float(j_tc[i]),
            j_cc=float(j_cc[k]),
            weight=float(w_tc[i] * w_cc[k]),
        )
        for i in range(len(dist_tc))
        for k in range(len(dist_cc))
    ]
