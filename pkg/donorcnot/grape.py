"""Gradient ascent pulse engineering for the electron CNOT.

Pulses are piecewise constant in amplitude and phase per carrier. Inside a
segment the carrier keeps rotating at its offset frequency, so every segment
is split into micro-steps evaluated at their midpoints.
"""

from __future__ import annotations

import logging
import multiprocessing
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Literal, NamedTuple

import numpy as np
from pydantic import Field

from donorcnot.hamiltonian import (
    N_ELECTRONS,
    ControlCarrier,
    DeviceParams,
    NuclearConfig,
    control_generator,
    drive_operators,
    electron_drift,
    post_swap_nuclear_config,
)
from donorcnot.linalg import HermitianOperator, Unitary, spectral_propagators
from donorcnot.spectra import allowed_frequencies, transition_table
from donorcnot.utils import JsonModel, csv_text, dumps

if TYPE_CHECKING:
    from collections.abc import Sequence
    from pathlib import Path

    from numpy.typing import ArrayLike, NDArray

    from donorcnot.placement import ExchangePair

logger = logging.getLogger(__name__)

DIM = 1 << N_ELECTRONS
FD_STEP = 1e-6
MIN_LEARNING_RATE = 1e-12
LR_GROWTH = 1.2
LR_SHRINK = 0.5
AMPLITUDE_SLACK = 1e-12

GradientMode = Literal["analytic", "finite_difference"]


def target_cnot() -> Unitary:
    """CNOT on the electron register, control C (site 2), target T (site 0).

    Returns
    -------
    Unitary
        Permutation flipping the target bit when the control is ``|1>``,
        identity on the coupler.

    Examples
    --------
    >>> import numpy as np
    >>> float(np.trace(target_cnot().matrix).real)
    4.0
    """
    perm = np.zeros((DIM, DIM), dtype=complex)
    for index in range(DIM):
        flipped = index ^ 0b100 if index & 0b001 else index
        perm[flipped, index] = 1.0
    return Unitary(perm)


class GrapeConfig(JsonModel):
    """Optimizer settings."""

    n_segments: int = Field(default=100, gt=0)
    total_time: float = Field(default=2.0, gt=0)
    max_amplitude: float = Field(default=5.0, gt=0)
    learning_rate: float = Field(default=1.0, gt=0)
    max_iterations: int = Field(default=2000, ge=0)
    fidelity_target: float = Field(default=0.999, ge=0, le=1)
    micro_steps_per_segment: int = Field(default=20, gt=0)
    gradient_mode: GradientMode = "analytic"
    seed: int = Field(default=0, ge=0)
    initial_amplitude_fraction: float = Field(default=0.05, gt=0, le=1)
    element_threshold: float = Field(default=1e-3, gt=0)
    merge_tolerance: float = Field(default=1.0, ge=0)

    @property
    def segment_duration(self) -> float:
        """Segment length in microseconds."""
        return self.total_time / self.n_segments


class _PulseDocument(JsonModel):
    carriers_mhz: list[float]
    segment_duration_us: float = Field(gt=0)
    amplitudes: list[list[float]]
    phases: list[list[float]]
    max_amplitude_mhz: list[float] | None = None


class PulseSequence:
    """Piecewise-constant multi-carrier control.

    PulseSequence objects are immutable. Amplitudes and phases have shape
    ``(n_carriers, n_segments)``.
    """

    def __init__(
        self,
        carriers: Sequence[float],
        segment_duration: float,
        amplitudes: ArrayLike,
        phases: ArrayLike,
        max_amplitude: float | Sequence[float] | None = None,
    ) -> None:
        """Create a pulse.

        Parameters
        ----------
        carriers : Sequence[float]
            Carrier offsets from ``γ_e B`` in MHz.
        segment_duration : float
            Segment length in microseconds.
        amplitudes, phases : ArrayLike
            Per carrier and segment, MHz and radians.
        max_amplitude : float | Sequence[float] | None
            Amplitude bound, shared or per carrier.

        Raises
        ------
        ValueError
            On shape mismatch, non-finite values, negative amplitudes or
            amplitudes above their bound.
        """
        offsets = np.array(carriers, dtype=float).ravel()
        amps = np.array(amplitudes, dtype=float, ndmin=2)
        phis = np.array(phases, dtype=float, ndmin=2)
        if offsets.size == 0:
            msg = "a pulse needs at least one carrier"
            raise ValueError(msg)
        if amps.shape != phis.shape or amps.shape[0] != offsets.size or amps.shape[1] == 0:
            msg = (
                f"amplitudes {amps.shape} and phases {phis.shape} must both be "
                f"({offsets.size}, n_segments)"
            )
            raise ValueError(msg)
        if not segment_duration > 0:
            msg = "segment_duration must be positive"
            raise ValueError(msg)
        if not (np.all(np.isfinite(amps)) and np.all(np.isfinite(phis))):
            msg = "amplitudes and phases must be finite"
            raise ValueError(msg)
        if np.any(amps < 0):
            msg = "amplitudes must be non-negative"
            raise ValueError(msg)
        bound = None
        if max_amplitude is not None:
            bound = np.broadcast_to(np.array(max_amplitude, dtype=float), offsets.shape).copy()
            if np.any(bound <= 0):
                msg = "max_amplitude must be positive"
                raise ValueError(msg)
            if np.any(amps > bound[:, None] + AMPLITUDE_SLACK):
                msg = "amplitude exceeds its carrier bound"
                raise ValueError(msg)
            bound.setflags(write=False)
        for arr in (offsets, amps, phis):
            arr.setflags(write=False)
        self._carriers = offsets
        self._segment_duration = float(segment_duration)
        self._amplitudes = amps
        self._phases = phis
        self._max_amplitude = bound

    @classmethod
    def zeros(
        cls,
        carriers: Sequence[float],
        n_segments: int,
        segment_duration: float,
        max_amplitude: float | Sequence[float] | None = None,
    ) -> PulseSequence:
        """Pulse with every amplitude and phase zero."""
        shape = (len(carriers), n_segments)
        return cls(carriers, segment_duration, np.zeros(shape), np.zeros(shape), max_amplitude)

    @classmethod
    def random(
        cls,
        carriers: Sequence[float],
        n_segments: int,
        segment_duration: float,
        max_amplitude: float | Sequence[float],
        seed: int | np.random.Generator | None = None,
        fraction: float = 0.05,
    ) -> PulseSequence:
        """Small random amplitudes (up to `fraction` of the bound) and uniform phases."""
        rng = np.random.default_rng(seed)
        shape = (len(carriers), n_segments)
        bound = np.broadcast_to(np.array(max_amplitude, dtype=float), (len(carriers),))
        amps = rng.uniform(0.0, 1.0, shape) * fraction * bound[:, None]
        phases = rng.uniform(0.0, 2 * np.pi, shape)
        return cls(carriers, segment_duration, amps, phases, max_amplitude)

    @property
    def carriers(self) -> NDArray[np.float64]:
        """Carrier offsets in MHz."""
        return self._carriers

    @property
    def n_carriers(self) -> int:
        """Number of carriers."""
        return self._carriers.size

    @property
    def n_segments(self) -> int:
        """Number of segments."""
        return self._amplitudes.shape[1]

    @property
    def segment_duration(self) -> float:
        """Segment length in microseconds."""
        return self._segment_duration

    @property
    def total_time(self) -> float:
        """Pulse length ``n_segments * segment_duration``."""
        return self.n_segments * self._segment_duration

    @property
    def amplitudes(self) -> NDArray[np.float64]:
        """Amplitudes, shape ``(n_carriers, n_segments)``."""
        return self._amplitudes

    @property
    def phases(self) -> NDArray[np.float64]:
        """Phases, shape ``(n_carriers, n_segments)``."""
        return self._phases

    @property
    def max_amplitude(self) -> NDArray[np.float64] | None:
        """Per-carrier amplitude bound, if any."""
        return self._max_amplitude

    def with_controls(self, amplitudes: ArrayLike, phases: ArrayLike) -> PulseSequence:
        """Copy with new controls; amplitudes are clipped into ``[0, max]``."""
        amps = np.array(amplitudes, dtype=float)
        upper = np.inf if self._max_amplitude is None else self._max_amplitude[:, None]
        return PulseSequence(
            self._carriers,
            self._segment_duration,
            np.clip(amps, 0.0, upper),
            phases,
            self._max_amplitude,
        )

    def control_hamiltonian(self, t: float) -> HermitianOperator:
        """Sum of the carriers' control generators at time `t`.

        Raises
        ------
        ValueError
            If `t` lies outside ``[0, total_time]``.
        """
        if not 0 <= t <= self.total_time:
            msg = f"time {t} outside the pulse [0, {self.total_time}]"
            raise ValueError(msg)
        segment = min(int(t // self._segment_duration), self.n_segments - 1)
        total = HermitianOperator.zeros(DIM)
        for c, offset in enumerate(self._carriers):
            total = total + control_generator(
                float(self._amplitudes[c, segment]),
                float(self._phases[c, segment]),
                float(offset),
                t,
            )
        return total

    def to_json(self) -> str:
        """JSON with ``carriers_mhz``, ``segment_duration_us``, ``amplitudes``, ``phases``."""
        return dumps(
            {
                "carriers_mhz": self._carriers,
                "segment_duration_us": self._segment_duration,
                "amplitudes": self._amplitudes,
                "phases": self._phases,
                "max_amplitude_mhz": self._max_amplitude,
            }
        )

    @classmethod
    def from_json(cls, source: str | Path) -> PulseSequence:
        """Load a pulse written by `to_json` (file path or JSON text)."""
        doc = _PulseDocument.from_json(source)
        return cls(
            doc.carriers_mhz,
            doc.segment_duration_us,
            doc.amplitudes,
            doc.phases,
            doc.max_amplitude_mhz,
        )

    def __eq__(self, other: object) -> bool:
        """Equal if every field matches exactly."""
        if not isinstance(other, PulseSequence):
            return NotImplemented
        same_bound = (self._max_amplitude is None) == (other.max_amplitude is None) and (
            self._max_amplitude is None
            or np.array_equal(self._max_amplitude, other.max_amplitude)
        )
        return (
            same_bound
            and self._segment_duration == other.segment_duration
            and np.array_equal(self._carriers, other.carriers)
            and np.array_equal(self._amplitudes, other.amplitudes)
            and np.array_equal(self._phases, other.phases)
        )

    __hash__ = None  # type: ignore[assignment]

    def __repr__(self) -> str:
        """Developer representation."""
        return (
            f"PulseSequence(carriers={self.n_carriers}, segments={self.n_segments}, "
            f"total_time={self.total_time:g})"
        )


class Gradient(NamedTuple):
    """Fidelity and its derivatives per carrier and segment."""

    fidelity: float
    amplitudes: NDArray[np.float64]
    phases: NDArray[np.float64]


@dataclass(frozen=True)
class FidelityReport:
    """Outcome of one optimization.

    `history` holds the best fidelity reached after each iteration,
    starting with the initial pulse.
    """

    final_fidelity: float
    iterations: int
    converged: bool
    j_tc: float
    j_cc: float
    wall_time: float = field(compare=False)
    history: tuple[float, ...] = ()

    def __post_init__(self) -> None:
        """Validate the fidelity range."""
        if not 0.0 <= self.final_fidelity <= 1.0:
            msg = f"fidelity must lie in [0, 1], got {self.final_fidelity}"
            raise ValueError(msg)

    def to_row(self) -> tuple[float, float, float, int, int]:
        """``(j_tc_mhz, j_cc_mhz, fidelity, iterations, converged)``."""
        return (self.j_tc, self.j_cc, self.final_fidelity, self.iterations, int(self.converged))


def _as_matrix(op: HermitianOperator | Unitary | ArrayLike) -> NDArray[np.complex128]:
    if isinstance(op, (HermitianOperator, Unitary)):
        return op.matrix
    return np.asarray(op, dtype=complex)


def _check_drift(drift: HermitianOperator | ArrayLike) -> NDArray[np.complex128]:
    op = drift if isinstance(drift, HermitianOperator) else HermitianOperator(drift)
    matrix = op.matrix
    if matrix.shape != (DIM, DIM):
        msg = f"drift must be {DIM}x{DIM}, got {matrix.shape}"
        raise ValueError(msg)
    return matrix


@dataclass(frozen=True)
class _Controls:
    theta: NDArray[np.float64]
    amp: NDArray[np.float64]
    cx: NDArray[np.float64]
    cy: NDArray[np.float64]
    dt: float


def _controls(
    carriers: NDArray[np.float64],
    segment_duration: float,
    amplitudes: NDArray[np.float64],
    phases: NDArray[np.float64],
    micro_steps: int,
) -> _Controls:
    dt = segment_duration / micro_steps
    k = np.arange(amplitudes.shape[1] * micro_steps)
    segment = k // micro_steps
    t = (k + 0.5) * dt
    theta = 2 * np.pi * carriers[:, None] * t[None, :] + phases[:, segment]
    amp = amplitudes[:, segment]
    return _Controls(
        theta=theta,
        amp=amp,
        cx=np.sum(amp * np.cos(theta), axis=0),
        cy=np.sum(amp * np.sin(theta), axis=0),
        dt=dt,
    )


def _step_propagators(
    drift: NDArray[np.complex128], ctl: _Controls
) -> tuple[NDArray[np.complex128], NDArray[np.float64], NDArray[np.complex128]]:
    sx, sy = drive_operators()
    h = drift[None, :, :] + ctl.cx[:, None, None] * sx + ctl.cy[:, None, None] * sy
    return spectral_propagators(h, ctl.dt)


def _ordered_product(props: NDArray[np.complex128]) -> NDArray[np.complex128]:
    u = np.eye(props.shape[1], dtype=complex)
    for step in props:
        u = step @ u
    return u


def _fidelity(
    carriers: NDArray[np.float64],
    segment_duration: float,
    amplitudes: NDArray[np.float64],
    phases: NDArray[np.float64],
    drift: NDArray[np.complex128],
    target: NDArray[np.complex128],
    micro_steps: int,
) -> float:
    ctl = _controls(carriers, segment_duration, amplitudes, phases, micro_steps)
    props, _, _ = _step_propagators(drift, ctl)
    u = _ordered_product(props)
    return min(1.0, float(abs(np.trace(target.conj().T @ u)) / DIM))


def _analytic_gradient(
    carriers: NDArray[np.float64],
    segment_duration: float,
    amplitudes: NDArray[np.float64],
    phases: NDArray[np.float64],
    drift: NDArray[np.complex128],
    target: NDArray[np.complex128],
    micro_steps: int,
) -> Gradient:
    ctl = _controls(carriers, segment_duration, amplitudes, phases, micro_steps)
    props, evals, vecs = _step_propagators(drift, ctl)
    n_steps = props.shape[0]
    eye = np.eye(DIM, dtype=complex)

    # before[k] = U_{k-1}...U_0, after[k] = U_{K-1}...U_{k+1}
    before = np.empty((n_steps + 1, DIM, DIM), dtype=complex)
    before[0] = eye
    for k in range(n_steps):
        before[k + 1] = props[k] @ before[k]
    after = np.empty((n_steps, DIM, DIM), dtype=complex)
    after[-1] = eye
    for k in range(n_steps - 1, 0, -1):
        after[k - 1] = after[k] @ props[k]

    overlap = np.trace(target.conj().T @ before[-1])
    magnitude = abs(overlap)
    fidelity = min(1.0, float(magnitude / DIM))
    shape = amplitudes.shape
    if magnitude < np.finfo(float).tiny:
        return Gradient(fidelity, np.zeros(shape), np.zeros(shape))

    # dg/dH_k = V^dag (before_k Uc^dag after_k) V contracted with the
    # divided-difference kernel of exp(-i tau H)
    vdag = np.conj(np.swapaxes(vecs, 1, 2))
    w = vdag @ before[:-1] @ target.conj().T @ after @ vecs
    tau = 2 * np.pi * ctl.dt
    mean = 0.5 * (evals[:, :, None] + evals[:, None, :])
    gap = evals[:, :, None] - evals[:, None, :]
    kernel = -1j * tau * np.exp(-1j * tau * mean) * np.sinc(tau * gap / (2 * np.pi))
    sx, sy = drive_operators()
    weighted = np.swapaxes(w, 1, 2) * kernel
    px = np.sum(weighted * (vdag @ sx @ vecs), axis=(1, 2))
    py = np.sum(weighted * (vdag @ sy @ vecs), axis=(1, 2))

    cos, sin = np.cos(ctl.theta), np.sin(ctl.theta)
    d_amp = cos * px + sin * py
    d_phase = ctl.amp * (-sin * px + cos * py)
    n_carriers, n_segments = shape
    d_amp = d_amp.reshape(n_carriers, n_segments, micro_steps).sum(axis=2)
    d_phase = d_phase.reshape(n_carriers, n_segments, micro_steps).sum(axis=2)
    scale = np.conj(overlap) / (magnitude * DIM)
    return Gradient(fidelity, np.real(scale * d_amp), np.real(scale * d_phase))


def _finite_difference_gradient(
    carriers: NDArray[np.float64],
    segment_duration: float,
    amplitudes: NDArray[np.float64],
    phases: NDArray[np.float64],
    drift: NDArray[np.complex128],
    target: NDArray[np.complex128],
    micro_steps: int,
    step: float = FD_STEP,
) -> Gradient:
    def shifted(which: int, index: tuple[int, ...], delta: float) -> float:
        controls = [amplitudes.copy(), phases.copy()]
        controls[which][index] += delta
        return _fidelity(
            carriers, segment_duration, controls[0], controls[1], drift, target, micro_steps
        )

    derivatives = (np.zeros(amplitudes.shape), np.zeros(phases.shape))
    for index in np.ndindex(amplitudes.shape):
        for which, out in enumerate(derivatives):
            out[index] = (shifted(which, index, step) - shifted(which, index, -step)) / (2 * step)
    fidelity = _fidelity(
        carriers, segment_duration, amplitudes, phases, drift, target, micro_steps
    )
    return Gradient(fidelity, *derivatives)


def _resolve_target(target: Unitary | ArrayLike | None) -> NDArray[np.complex128]:
    matrix = target_cnot().matrix if target is None else _as_matrix(target)
    if matrix.shape != (DIM, DIM):
        msg = f"target must be {DIM}x{DIM}, got {matrix.shape}"
        raise ValueError(msg)
    return matrix


def propagate_pulse(
    pulse: PulseSequence, drift: HermitianOperator | ArrayLike, micro_steps: int = 20
) -> Unitary:
    """Time-ordered evolution under drift plus pulse.

    Parameters
    ----------
    pulse : PulseSequence
        Controls.
    drift : HermitianOperator | ArrayLike
        8-dim rotating-frame drift in MHz.
    micro_steps : int
        Midpoint micro-steps per segment.

    Returns
    -------
    Unitary
        ``U_G``, latest micro-step leftmost.

    Raises
    ------
    ValueError
        If the drift is not 8x8 or `micro_steps` is not positive.
    """
    if micro_steps < 1:
        msg = "micro_steps must be positive"
        raise ValueError(msg)
    matrix = _check_drift(drift)
    ctl = _controls(
        pulse.carriers, pulse.segment_duration, pulse.amplitudes, pulse.phases, micro_steps
    )
    props, _, _ = _step_propagators(matrix, ctl)
    return Unitary(_ordered_product(props), atol=1e-9)


def trace_fidelity(u_g: Unitary | ArrayLike, u_c: Unitary | ArrayLike) -> float:
    """Phase-insensitive gate fidelity ``|Tr(U_C^dag U_G)| / d``.

    The unnormalized ``Tr[U_C U_G]`` is neither bounded nor invariant under a
    global phase, so the normalized overlap with the adjoint is used.

    Raises
    ------
    ValueError
        If the dimensions differ.
    """
    a, b = _as_matrix(u_g), _as_matrix(u_c)
    if a.shape != b.shape:
        msg = f"dimension mismatch: {a.shape} vs {b.shape}"
        raise ValueError(msg)
    return min(1.0, float(abs(np.trace(b.conj().T @ a)) / a.shape[0]))


def gradient(
    pulse: PulseSequence,
    drift: HermitianOperator | ArrayLike,
    target: Unitary | ArrayLike | None = None,
    mode: GradientMode = "analytic",
    micro_steps: int = 20,
) -> Gradient:
    """Derivatives of the trace fidelity w.r.t. every amplitude and phase.

    Parameters
    ----------
    pulse : PulseSequence
        Point of evaluation.
    drift : HermitianOperator | ArrayLike
        8-dim drift.
    target : Unitary | ArrayLike | None
        Target gate, `target_cnot` by default.
    mode : {"analytic", "finite_difference"}
        Exact propagator derivatives, or central differences with step 1e-6.
    micro_steps : int
        Micro-steps per segment.

    Returns
    -------
    Gradient
        Fidelity and ``(n_carriers, n_segments)`` derivative arrays.
    """
    args = (
        pulse.carriers,
        pulse.segment_duration,
        pulse.amplitudes,
        pulse.phases,
        _check_drift(drift),
        _resolve_target(target),
        micro_steps,
    )
    if mode == "analytic":
        return _analytic_gradient(*args)
    if mode == "finite_difference":
        return _finite_difference_gradient(*args)
    msg = f"mode must be 'analytic' or 'finite_difference', got '{mode}'"
    raise ValueError(msg)


def _carrier_arrays(
    carriers: Sequence[float | ControlCarrier], default_bound: float
) -> tuple[list[float], list[float]]:
    offsets, bounds = [], []
    for carrier in carriers:
        if isinstance(carrier, ControlCarrier):
            offsets.append(carrier.frequency)
            bounds.append(carrier.max_amplitude)
        else:
            offsets.append(float(carrier))
            bounds.append(default_bound)
    return offsets, bounds


def optimize(
    config: GrapeConfig,
    drift: HermitianOperator | ArrayLike,
    carriers: Sequence[float | ControlCarrier],
    target: Unitary | ArrayLike | None = None,
    device: DeviceParams | None = None,
) -> tuple[PulseSequence, FidelityReport]:
    """Gradient ascent on the trace fidelity from a seeded random pulse.

    A step is accepted when the fidelity does not drop; the learning rate
    then grows by 1.2, otherwise the step is discarded and the rate halved.
    Amplitudes are clipped to ``[0, max_amplitude]`` after each step.

    Parameters
    ----------
    config : GrapeConfig
        Optimizer settings.
    drift : HermitianOperator | ArrayLike
        8-dim rotating-frame drift.
    carriers : Sequence[float | ControlCarrier]
        Carrier offsets (bounded by ``config.max_amplitude``) or carriers
        with their own bounds.
    target : Unitary | ArrayLike | None
        Target gate, `target_cnot` by default.
    device : DeviceParams | None
        Source of the exchange values recorded in the report.

    Returns
    -------
    tuple[PulseSequence, FidelityReport]
        Best pulse found and its report.

    Raises
    ------
    ValueError
        If `carriers` is empty.
    """
    if len(carriers) == 0:
        msg = "no allowed carriers: cannot drive this exchange configuration"
        raise ValueError(msg)
    start = time.perf_counter()
    matrix = _check_drift(drift)
    goal = _resolve_target(target)
    offsets, bounds = _carrier_arrays(carriers, config.max_amplitude)
    pulse = PulseSequence.random(
        offsets,
        config.n_segments,
        config.segment_duration,
        bounds,
        seed=config.seed,
        fraction=config.initial_amplitude_fraction,
    )

    def evaluate(p: PulseSequence) -> Gradient:
        return gradient(p, matrix, goal, config.gradient_mode, config.micro_steps_per_segment)

    current = evaluate(pulse)
    history = [current.fidelity]
    rate = config.learning_rate
    iterations = 0
    while (
        current.fidelity < config.fidelity_target
        and iterations < config.max_iterations
        and rate >= MIN_LEARNING_RATE
    ):
        iterations += 1
        candidate = pulse.with_controls(
            pulse.amplitudes + rate * current.amplitudes,
            pulse.phases + rate * current.phases,
        )
        trial = evaluate(candidate)
        if trial.fidelity >= current.fidelity:
            pulse, current = candidate, trial
            rate *= LR_GROWTH
            logger.debug("iteration %d accepted: F=%.12f lr=%.3g", iterations, trial.fidelity, rate)
        else:
            rate *= LR_SHRINK
            logger.debug("iteration %d rejected: F=%.12f lr=%.3g", iterations, trial.fidelity, rate)
        history.append(current.fidelity)

    report = FidelityReport(
        final_fidelity=current.fidelity,
        iterations=iterations,
        converged=current.fidelity >= config.fidelity_target,
        j_tc=0.0 if device is None else device.j_tc_mhz,
        j_cc=0.0 if device is None else device.j_cc_mhz,
        wall_time=time.perf_counter() - start,
        history=tuple(history),
    )
    logger.info(
        "GRAPE finished: F=%.6f after %d iterations (converged=%s)",
        report.final_fidelity,
        report.iterations,
        report.converged,
    )
    return pulse, report


def carriers_for(
    drift: HermitianOperator | ArrayLike,
    element_threshold: float = 1e-3,
    merge_tolerance: float = 1.0,
) -> list[float]:
    """Allowed, merged carrier offsets of a drift."""
    return allowed_frequencies(transition_table(drift, element_threshold), merge_tolerance)


@dataclass(frozen=True)
class SweepSummary:
    """Aggregate of a sweep.

    `weighted_success` weighs each converged pair by its placement
    probability.
    """

    n_pairs: int
    n_converged: int
    weighted_success: float

    @property
    def n_below_target(self) -> int:
        """Pairs that missed the fidelity target."""
        return self.n_pairs - self.n_converged


def _optimize_pair(
    args: tuple[ExchangePair, GrapeConfig, DeviceParams, NuclearConfig],
) -> FidelityReport:
    pair, config, device, nuclear = args
    params = device.with_exchange(pair.j_tc, pair.j_cc)
    drift = electron_drift(params, nuclear)
    carriers = carriers_for(drift, config.element_threshold, config.merge_tolerance)
    _, report = optimize(config, drift, carriers, device=params)
    return report


def sweep(
    grid: Sequence[ExchangePair],
    config: GrapeConfig,
    device: DeviceParams | None = None,
    nuclear: NuclearConfig | None = None,
    jobs: int = 1,
) -> list[FidelityReport]:
    """Optimize every exchange pair of `grid`.

    Parameters
    ----------
    grid : Sequence[ExchangePair]
        Exchange pairs, e.g. from `donorcnot.placement.exchange_grid`.
    config : GrapeConfig
        Optimizer settings shared by all pairs.
    device : DeviceParams | None
        Base device; its exchange values are replaced per pair.
    nuclear : NuclearConfig | None
        Frozen nuclei during the CNOT; the post-swap configuration by default.
    jobs : int
        Worker processes; 1 runs in-process.

    Returns
    -------
    list[FidelityReport]
        One report per pair, in grid order.
    """
    if jobs < 1:
        msg = "jobs must be at least 1"
        raise ValueError(msg)
    base = device or DeviceParams()
    frozen = nuclear or post_swap_nuclear_config()
    tasks = [(pair, config, base, frozen) for pair in grid]
    logger.info("sweeping %d exchange pairs with %d worker(s)", len(tasks), jobs)
    if jobs == 1:
        reports = []
        for i, task in enumerate(tasks, 1):
            reports.append(_optimize_pair(task))
            logger.info("pair %d/%d done", i, len(tasks))
        return reports
    context = multiprocessing.get_context("spawn")
    with ProcessPoolExecutor(max_workers=jobs, mp_context=context) as pool:
        return list(pool.map(_optimize_pair, tasks))


def summarize(
    reports: Sequence[FidelityReport], grid: Sequence[ExchangePair] | None = None
) -> SweepSummary:
    """Count converged pairs, weighting by placement probability when `grid` is given."""
    converged = [r.converged for r in reports]
    if grid is None:
        weighted = sum(converged) / len(reports) if reports else 0.0
    else:
        weighted = sum(p.weight for p, ok in zip(grid, converged) if ok)
    return SweepSummary(len(reports), sum(converged), float(weighted))


def sweep_csv(reports: Sequence[FidelityReport], grid: Sequence[ExchangePair]) -> str:
    """One row per pair: index, classes, exchange values, fidelity, iterations, converged."""
    header = (
        "index",
        "class_tc",
        "class_cc",
        "j_tc_mhz",
        "j_cc_mhz",
        "fidelity",
        "iterations",
        "converged",
    )
    rows = [
        (pair.index, pair.class_tc, pair.class_cc, *report.to_row())
        for pair, report in zip(grid, reports)
    ]
    return csv_text(header, rows)
