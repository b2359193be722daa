"""Coupler-mediated CNOT between two nuclear-spin qubits.

Sequence: initialize data in the target and control nuclei with both
electrons down, load a down electron onto the coupler, swap electron and
nuclear spins on target and control, run the electron CNOT, swap back and
unload the coupler.

Sites are labelled ``"T"``, ``"c"``, ``"C"`` for electrons and ``"nT"``,
``"nc"``, ``"nC"`` for nuclei; the loaded layout matches the register of
`donorcnot.hamiltonian.build_full`.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import TYPE_CHECKING, Literal

import numpy as np

from donorcnot.grape import propagate_pulse, target_cnot
from donorcnot.hamiltonian import (
    DeviceParams,
    NuclearConfig,
    Spin,
    electron_drift,
    post_swap_nuclear_config,
)
from donorcnot.linalg import PureState, Unitary
from donorcnot.utils import dumps

if TYPE_CHECKING:
    from numpy.typing import ArrayLike, NDArray

    from donorcnot.grape import PulseSequence

logger = logging.getLogger(__name__)

StepLabel = Literal["init", "load", "swap_in", "cnot", "swap_out", "unload"]
Donor = Literal["T", "c", "C"]

UNLOADED_LAYOUT = ("T", "C", "nT", "nc", "nC")
LOADED_LAYOUT = ("T", "c", "C", "nT", "nc", "nC")
PROBABILITY_FLOOR = 1e-6
NORM_TOLERANCE = 1e-9
DEFAULT_UNLOAD_TOLERANCE = 1e-9


def _ket(value: PureState | Spin | str | ArrayLike) -> NDArray[np.complex128]:
    if isinstance(value, (Spin, str)):
        return Spin.parse(value).ket
    state = value if isinstance(value, PureState) else PureState(value)
    if state.dim != 2:
        msg = f"qubit states must be two-dimensional, got dim {state.dim}"
        raise ValueError(msg)
    return state.amplitudes


@dataclass(frozen=True)
class ProtocolState:
    """Register over the active spins and their site labels."""

    register: PureState
    layout: tuple[str, ...]

    def __post_init__(self) -> None:
        """Check the register matches the layout."""
        if self.register.dim != 1 << len(self.layout):
            msg = f"register dimension {self.register.dim} does not match layout {self.layout}"
            raise ValueError(msg)

    @property
    def coupler_loaded(self) -> bool:
        """Whether the coupler electron is present."""
        return "c" in self.layout

    def position(self, site: str) -> int:
        """Register position of `site`."""
        try:
            return self.layout.index(site)
        except ValueError as e:
            msg = f"site '{site}' is not active in layout {self.layout}"
            raise ValueError(msg) from e

    def probabilities(self, floor: float = PROBABILITY_FLOOR) -> dict[str, float]:
        """Basis-state probabilities above `floor`, keyed by bitstring in layout order."""
        probs = self.register.probabilities()
        width = len(self.layout)
        return {
            format(i, f"0{width}b"): float(p) for i, p in enumerate(probs) if p > floor
        }

    def spin_z(self, site: str) -> float:
        """Expectation of Pauli Z on `site`."""
        pos = self.position(site)
        tensor = self.register.probabilities().reshape((2,) * len(self.layout))
        marginal = tensor.sum(axis=tuple(k for k in range(len(self.layout)) if k != pos))
        return float(marginal[0] - marginal[1])


@dataclass(frozen=True)
class StepTrace:
    """Summary of the register after one protocol step."""

    label: StepLabel
    layout: tuple[str, ...]
    probabilities: tuple[tuple[str, float], ...]

    def __post_init__(self) -> None:
        """Check the retained probabilities are (nearly) complete."""
        total = sum(p for _, p in self.probabilities)
        if total > 1 + NORM_TOLERANCE:
            msg = f"probabilities sum to {total}"
            raise ValueError(msg)

    @classmethod
    def of(cls, label: StepLabel, state: ProtocolState) -> StepTrace:
        """Trace entry for `state`."""
        return cls(label, state.layout, tuple(sorted(state.probabilities().items())))

    def to_dict(self) -> dict[str, object]:
        """JSON-ready mapping."""
        return {
            "step": self.label,
            "layout": list(self.layout),
            "probabilities": dict(self.probabilities),
        }


def init_state(
    nuclear_t: PureState | Spin | str | ArrayLike,
    nuclear_c: PureState | Spin | str | ArrayLike,
    coupler_nucleus: Spin | str = Spin.UP,
) -> ProtocolState:
    """Data in the nuclei, both electrons down, coupler electron absent.

    Parameters
    ----------
    nuclear_t, nuclear_c : PureState | Spin | str | ArrayLike
        Target and control nuclear qubit states (``|0>`` is up).
    coupler_nucleus : Spin | str
        Spectator state of the coupler nucleus.

    Returns
    -------
    ProtocolState
        32-dim register over ``(T, C, nT, nc, nC)``.

    Raises
    ------
    ValueError
        If an input state is not a normalized qubit.
    """
    down = Spin.DOWN.ket
    factors = [down, down, _ket(nuclear_t), Spin.parse(coupler_nucleus).ket, _ket(nuclear_c)]
    return ProtocolState(PureState.product(factors), UNLOADED_LAYOUT)


def _insert_site(
    amplitudes: NDArray[np.complex128], n_sites: int, position: int, ket: NDArray[np.complex128]
) -> NDArray[np.complex128]:
    tensor = np.multiply.outer(amplitudes.reshape((2,) * n_sites), ket)
    return np.moveaxis(tensor, -1, position).reshape(-1)


def load_coupler(state: ProtocolState) -> ProtocolState:
    """Add a down electron on the coupler.

    Raises
    ------
    RuntimeError
        If the coupler is already loaded.
    """
    if state.coupler_loaded:
        msg = "coupler electron already loaded"
        raise RuntimeError(msg)
    amps = _insert_site(state.register.amplitudes, len(state.layout), 1, Spin.DOWN.ket)
    return ProtocolState(PureState(amps), LOADED_LAYOUT)


def factor_out(
    state: PureState, n_sites: int, position: int
) -> tuple[PureState, PureState, float]:
    """Split one site off a register that is (nearly) a product across it.

    Returns
    -------
    tuple[PureState, PureState, float]
        ``(rest, site_state, residual)`` where the residual is one minus the
        largest Schmidt coefficient across the cut.
    """
    tensor = np.moveaxis(state.amplitudes.reshape((2,) * n_sites), position, 0).reshape(2, -1)
    u, s, _ = np.linalg.svd(tensor, full_matrices=False)
    site = u[:, 0]
    lead = int(np.argmax(np.abs(site)))
    site = site * (abs(site[lead]) / site[lead])
    rest = site.conj() @ tensor
    rest = rest / np.linalg.norm(rest)
    return PureState(rest), PureState(site), float(1.0 - s[0])


def unload_coupler(
    state: ProtocolState, tolerance: float = DEFAULT_UNLOAD_TOLERANCE
) -> ProtocolState:
    """Remove the coupler electron after checking it is disentangled.

    Raises
    ------
    RuntimeError
        If the coupler is not loaded, or if its residual entanglement with
        the rest of the register exceeds `tolerance`.
    """
    if not state.coupler_loaded:
        msg = "coupler electron is not loaded"
        raise RuntimeError(msg)
    pos = state.position("c")
    rest, _, residual = factor_out(state.register, len(state.layout), pos)
    if residual > tolerance:
        msg = f"coupler electron is entangled with the data (residual {residual:.3g})"
        raise RuntimeError(msg)
    layout = tuple(s for s in state.layout if s != "c")
    return ProtocolState(rest, layout)


def _swap_matrix(n_sites: int, i: int, j: int) -> NDArray[np.complex128]:
    dim = 1 << n_sites
    bit_i, bit_j = 1 << (n_sites - 1 - i), 1 << (n_sites - 1 - j)
    perm = np.zeros((dim, dim), dtype=complex)
    for index in range(dim):
        swapped = index
        if bool(index & bit_i) != bool(index & bit_j):
            swapped = index ^ bit_i ^ bit_j
        perm[swapped, index] = 1.0
    return perm


def en_swap(site: Donor, layout: tuple[str, ...] = LOADED_LAYOUT) -> Unitary:
    """SWAP of a donor's electron and nuclear spin, identity elsewhere.

    Parameters
    ----------
    site : {"T", "c", "C"}
        Donor whose spins are exchanged.
    layout : tuple[str, ...]
        Active sites of the register the unitary acts on.

    Raises
    ------
    ValueError
        If the donor's electron or nucleus is not active in `layout`.
    """
    if site not in layout or f"n{site}" not in layout:
        msg = f"donor '{site}' needs both electron and nucleus active"
        raise ValueError(msg)
    return Unitary(_swap_matrix(len(layout), layout.index(site), layout.index(f"n{site}")))


def _apply(state: ProtocolState, unitary: Unitary) -> ProtocolState:
    amps = unitary.matrix @ state.register.amplitudes
    # absorb rounding from long pulse products
    return ProtocolState(PureState(amps / np.linalg.norm(amps)), state.layout)


def frozen_nuclear_config(state: ProtocolState, atol: float = 1e-9) -> NuclearConfig:
    """Nuclear configuration of a register whose nuclei are in basis states.

    Raises
    ------
    ValueError
        If a nucleus is not in a definite up or down state.
    """
    spins = []
    for site in ("nT", "nc", "nC"):
        z = state.spin_z(site)
        if abs(abs(z) - 1.0) > atol:
            msg = f"nucleus {site} is not in a definite state (<Z> = {z:.6g})"
            raise ValueError(msg)
        spins.append(Spin.UP if z > 0 else Spin.DOWN)
    return NuclearConfig(tuple(spins))  # type: ignore[arg-type]


def apply_electron_cnot(
    state: ProtocolState,
    gate: Unitary | None = None,
    pulse: PulseSequence | None = None,
    device: DeviceParams | None = None,
    micro_steps: int = 20,
) -> ProtocolState:
    """Apply an 8-dim electron gate, identity on the nuclei.

    With neither `gate` nor `pulse`, the ideal CNOT is used. With `pulse`,
    the gate is the pulse's propagator under the drift of the current frozen
    nuclear configuration.

    Raises
    ------
    RuntimeError
        If the coupler is not loaded.
    ValueError
        If both `gate` and `pulse` are given, or the gate is not 8-dim.
    """
    if not state.coupler_loaded:
        msg = "the electron CNOT needs the coupler electron loaded"
        raise RuntimeError(msg)
    if gate is not None and pulse is not None:
        msg = "give either gate or pulse, not both"
        raise ValueError(msg)
    if pulse is not None:
        drift = electron_drift(device or DeviceParams(), frozen_nuclear_config(state))
        gate = propagate_pulse(pulse, drift, micro_steps)
    electron_gate = target_cnot() if gate is None else gate
    if electron_gate.dim != 8:
        msg = f"electron gate must be 8-dim, got {electron_gate.dim}"
        raise ValueError(msg)
    full = np.kron(electron_gate.matrix, np.eye(8, dtype=complex))
    return _apply(state, Unitary(full, atol=1e-9))


def data_state(state: ProtocolState, tolerance: float = DEFAULT_UNLOAD_TOLERANCE) -> PureState:
    """Two-nucleus data state ``(nT, nC)`` of an unloaded register.

    Raises
    ------
    RuntimeError
        If an electron or the coupler nucleus is entangled with the data.
    """
    register, layout = state.register, list(state.layout)
    for site in ("T", "C", "nc"):
        register, _, residual = factor_out(register, len(layout), layout.index(site))
        if residual > tolerance:
            msg = f"{site} is entangled with the nuclear data (residual {residual:.3g})"
            raise RuntimeError(msg)
        layout.remove(site)
    return register


def run_protocol(
    nuclear_t: PureState | Spin | str | ArrayLike,
    nuclear_c: PureState | Spin | str | ArrayLike,
    gate_impl: Unitary | PulseSequence | None = None,
    device: DeviceParams | None = None,
    coupler_nucleus: Spin | str = Spin.UP,
    tolerance: float = DEFAULT_UNLOAD_TOLERANCE,
    micro_steps: int = 20,
) -> tuple[PureState, list[StepTrace]]:
    """Run all six steps and return the final nuclear data state.

    Parameters
    ----------
    nuclear_t, nuclear_c : PureState | Spin | str | ArrayLike
        Input data of the target and control nuclei.
    gate_impl : Unitary | PulseSequence | None
        Electron gate: ideal CNOT (None), an explicit unitary or a pulse.
    device : DeviceParams | None
        Device for pulse propagation.
    coupler_nucleus : Spin | str
        Spectator coupler nucleus.
    tolerance : float
        Allowed residual entanglement when unloading.
    micro_steps : int
        Micro-steps per pulse segment.

    Returns
    -------
    tuple[PureState, list[StepTrace]]
        4-dim state over ``(nT, nC)`` and the per-step trace.
    """
    gate = gate_impl if isinstance(gate_impl, Unitary) else None
    pulse = None if gate_impl is None or isinstance(gate_impl, Unitary) else gate_impl
    traces: list[StepTrace] = []

    def record(label: StepLabel, current: ProtocolState) -> ProtocolState:
        traces.append(StepTrace.of(label, current))
        logger.debug("protocol step %s: %s", label, traces[-1].probabilities)
        return current

    state = record("init", init_state(nuclear_t, nuclear_c, coupler_nucleus))
    state = record("load", load_coupler(state))
    swaps = en_swap("C", state.layout).matrix @ en_swap("T", state.layout).matrix
    state = record("swap_in", _apply(state, Unitary(swaps)))
    state = record(
        "cnot", apply_electron_cnot(state, gate, pulse, device, micro_steps=micro_steps)
    )
    state = record("swap_out", _apply(state, Unitary(swaps)))
    state = record("unload", unload_coupler(state, tolerance))
    return data_state(state, tolerance), traces


def ideal_cnot_output(
    nuclear_t: PureState | Spin | str | ArrayLike,
    nuclear_c: PureState | Spin | str | ArrayLike,
) -> PureState:
    """CNOT (control C, target T) applied to the product ``nT ⊗ nC``."""
    cnot = np.array(
        [[1, 0, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0], [0, 1, 0, 0]], dtype=complex
    )
    return PureState(cnot @ np.kron(_ket(nuclear_t), _ket(nuclear_c)))


@dataclass(frozen=True)
class TruthTableRow:
    """Expected against observed output for one input."""

    label: str
    expected: PureState
    observed: PureState
    overlap: float
    passed: bool

    def to_dict(self) -> dict[str, object]:
        """JSON-ready mapping."""
        return {
            "input": self.label,
            "expected": [[z.real, z.imag] for z in self.expected.amplitudes],
            "observed": [[z.real, z.imag] for z in self.observed.amplitudes],
            "overlap": self.overlap,
            "passed": self.passed,
        }


_PLUS = np.array([1, 1], dtype=complex) / np.sqrt(2)
TRUTH_TABLE_INPUTS: tuple[tuple[str, NDArray[np.complex128], NDArray[np.complex128]], ...] = (
    ("|0>|0>", Spin.UP.ket, Spin.UP.ket),
    ("|0>|1>", Spin.UP.ket, Spin.DOWN.ket),
    ("|1>|0>", Spin.DOWN.ket, Spin.UP.ket),
    ("|1>|1>", Spin.DOWN.ket, Spin.DOWN.ket),
    ("|0>|+>", Spin.UP.ket, _PLUS),
    ("|+>|1>", _PLUS, Spin.DOWN.ket),
)


class ProtocolRunner:
    """Runs and verifies the protocol for one electron-gate implementation.

    Examples
    --------
    >>> rows = ProtocolRunner().verify_truth_table()
    >>> all(r.passed for r in rows)
    True
    """

    def __init__(
        self,
        gate_impl: Unitary | PulseSequence | None = None,
        device: DeviceParams | None = None,
        coupler_nucleus: Spin | str = Spin.UP,
        tolerance: float | None = None,
        micro_steps: int = 20,
    ) -> None:
        """Create a runner.

        Parameters
        ----------
        gate_impl : Unitary | PulseSequence | None
            Electron gate; ideal CNOT when None.
        device : DeviceParams | None
            Device for pulse propagation.
        coupler_nucleus : Spin | str
            Spectator coupler nucleus.
        tolerance : float | None
            Allowed residual entanglement when unloading; 1e-9 for the ideal
            gate and 1e-2 otherwise.
        micro_steps : int
            Micro-steps per pulse segment.
        """
        self.gate_impl = gate_impl
        self.device = device or DeviceParams()
        self.coupler_nucleus = Spin.parse(coupler_nucleus)
        if tolerance is None:
            tolerance = DEFAULT_UNLOAD_TOLERANCE if gate_impl is None else 1e-2
        if not tolerance > 0:
            msg = "tolerance must be positive"
            raise ValueError(msg)
        self.tolerance = tolerance
        self.micro_steps = micro_steps

    @property
    def is_ideal(self) -> bool:
        """Whether the ideal CNOT is used."""
        return self.gate_impl is None

    @property
    def cnot_nuclear_config(self) -> NuclearConfig:
        """Frozen nuclei during the electron CNOT."""
        return post_swap_nuclear_config(self.coupler_nucleus)

    def run(
        self,
        nuclear_t: PureState | Spin | str | ArrayLike,
        nuclear_c: PureState | Spin | str | ArrayLike,
    ) -> tuple[PureState, list[StepTrace]]:
        """Run the protocol on one input."""
        return run_protocol(
            nuclear_t,
            nuclear_c,
            self.gate_impl,
            self.device,
            self.coupler_nucleus,
            self.tolerance,
            self.micro_steps,
        )

    def verify_truth_table(self, min_overlap: float | None = None) -> list[TruthTableRow]:
        """Compare against the ideal CNOT on basis and superposition inputs.

        Parameters
        ----------
        min_overlap : float | None
            Pass threshold on ``|<expected|observed>|^2``; ``1 - 1e-9`` for
            the ideal gate and 0.998 otherwise.
        """
        if min_overlap is None:
            min_overlap = 1 - 1e-9 if self.is_ideal else 0.998
        rows = []
        for label, t, c in TRUTH_TABLE_INPUTS:
            observed, _ = self.run(t, c)
            expected = ideal_cnot_output(t, c)
            overlap = expected.overlap(observed)
            rows.append(TruthTableRow(label, expected, observed, overlap, overlap >= min_overlap))
        logger.info(
            "truth table: %d/%d inputs passed", sum(r.passed for r in rows), len(rows)
        )
        return rows

    def report(self) -> str:
        """JSON report with the truth table and the traces of every input."""
        rows = self.verify_truth_table()
        traces = {
            label: [step.to_dict() for step in self.run(t, c)[1]]
            for label, t, c in TRUTH_TABLE_INPUTS
        }
        return dumps(
            {
                "gate": "ideal" if self.is_ideal else "supplied",
                "passed": sum(r.passed for r in rows),
                "total": len(rows),
                "truth_table": [r.to_dict() for r in rows],
                "traces": traces,
            }
        )
