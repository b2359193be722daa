"""Spin Hamiltonians of the target-coupler-control donor triple.

The full register is ordered ``(T, c, C, nT, nc, nC)``: the three donor
electrons (target, coupler, control) followed by their nuclei. The reduced
electron register is ``(T, c, C)``.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from functools import cache
from typing import TYPE_CHECKING

import numpy as np
from pydantic import Field, model_validator

from donorcnot.linalg import (
    HermitianOperator,
    embed_pauli,
    exchange_coupling,
    pauli_sum,
)
from donorcnot.utils import JsonModel

if TYPE_CHECKING:
    from collections.abc import Sequence

    from numpy.typing import NDArray
    from typing_extensions import Self

TARGET, COUPLER, CONTROL = 0, 1, 2
ELECTRON_SITES = (TARGET, COUPLER, CONTROL)
NUCLEAR_SITES = (3, 4, 5)
N_ELECTRONS = 3
N_FULL = 6

# Zeeman energy must exceed every coupling by this factor.
STRONG_FIELD_RATIO = 100.0


class DeviceParams(JsonModel):
    """Magnetic field, gyromagnetic ratios, hyperfine and exchange constants.

    All couplings use the Pauli ``σ·σ`` convention in MHz. Defaults are the
    standard Si:P values at 1 T; the hyperfine constant is the 117.5 MHz
    ``S·I`` constant divided by four.
    """

    b_field_tesla: float = Field(default=1.0, gt=0)
    gamma_e_mhz_per_t: float = Field(default=27970.0, gt=0)
    gamma_n_mhz_per_t: float = 17.23
    a_t_mhz: float = Field(default=29.4, gt=0)
    a_c_coupler_mhz: float = Field(default=29.4, gt=0)
    a_c_control_mhz: float = Field(default=29.4, gt=0)
    j_tc_mhz: float = Field(default=60.0, ge=0)
    j_cc_mhz: float = Field(default=12.0, ge=0)

    @model_validator(mode="after")
    def _strong_field(self) -> Self:
        largest = max(
            self.a_t_mhz,
            self.a_c_coupler_mhz,
            self.a_c_control_mhz,
            self.j_tc_mhz,
            self.j_cc_mhz,
        )
        if self.zeeman <= STRONG_FIELD_RATIO * largest:
            msg = (
                f"electron Zeeman energy {self.zeeman:.6g} MHz must exceed "
                f"{STRONG_FIELD_RATIO:g} times the largest coupling ({largest:.6g} MHz)"
            )
            raise ValueError(msg)
        return self

    @property
    def zeeman(self) -> float:
        """Electron Zeeman frequency ``γ_e·B`` in MHz (rotating-frame reference)."""
        return self.gamma_e_mhz_per_t * self.b_field_tesla

    @property
    def nuclear_zeeman(self) -> float:
        """Nuclear Zeeman frequency ``γ_n·B`` in MHz."""
        return self.gamma_n_mhz_per_t * self.b_field_tesla

    @property
    def hyperfine(self) -> tuple[float, float, float]:
        """Hyperfine constants in register order ``(T, c, C)``."""
        return (self.a_t_mhz, self.a_c_coupler_mhz, self.a_c_control_mhz)

    def with_exchange(self, j_tc: float, j_cc: float) -> DeviceParams:
        """Copy with new exchange strengths (validated)."""
        data = self.model_dump()
        data.update(j_tc_mhz=float(j_tc), j_cc_mhz=float(j_cc))
        return DeviceParams.model_validate(data)


class Spin(str, Enum):
    """Spin projection. ``UP`` is ``|0>`` (Z = +1), ``DOWN`` is ``|1>``."""

    UP = "up"
    DOWN = "down"

    @property
    def z(self) -> int:
        """Eigenvalue of Pauli Z."""
        return 1 if self is Spin.UP else -1

    @property
    def ket(self) -> NDArray[np.complex128]:
        """Single-spin state vector."""
        return np.array([1, 0], dtype=complex) if self is Spin.UP else np.array(
            [0, 1], dtype=complex
        )

    @classmethod
    def parse(cls, value: Spin | str) -> Spin:
        """Accept a Spin, ``"up"``/``"down"`` or ``"u"``/``"d"``."""
        if isinstance(value, Spin):
            return value
        key = str(value).strip().lower()
        aliases = {"u": "up", "d": "down", "0": "up", "1": "down"}
        try:
            return cls(aliases.get(key, key))
        except ValueError as e:
            msg = f"invalid spin '{value}', expected 'up' or 'down'"
            raise ValueError(msg) from e


@dataclass(frozen=True)
class NuclearConfig:
    """Frozen nuclear spins ``(nT, nc, nC)`` during electron evolution."""

    spins: tuple[Spin, Spin, Spin]

    def __post_init__(self) -> None:
        """Validate and normalize the three spins."""
        if len(self.spins) != N_ELECTRONS:
            msg = f"NuclearConfig needs exactly three spins, got {len(self.spins)}"
            raise ValueError(msg)
        object.__setattr__(self, "spins", tuple(Spin.parse(s) for s in self.spins))

    @classmethod
    def parse(cls, text: str | Sequence[Spin | str]) -> NuclearConfig:
        """Build from ``"udd"``-style text or a sequence of spins."""
        items = list(text) if isinstance(text, str) else list(text)
        return cls(tuple(Spin.parse(s) for s in items))  # type: ignore[arg-type]

    def hyperfine_signs(self) -> tuple[int, int, int]:
        """Secular hyperfine sign per donor: ``<Z_n>`` of the frozen nucleus."""
        return tuple(s.z for s in self.spins)  # type: ignore[return-value]

    def label(self) -> str:
        """Compact label such as ``"udd"``."""
        return "".join(s.value[0] for s in self.spins)


def post_swap_nuclear_config(coupler_nucleus: Spin | str = Spin.UP) -> NuclearConfig:
    """Frozen nuclei while the electrons carry the data.

    After the electron-nuclear swaps the target and control nuclei hold the
    electrons' initial ``down`` states; the coupler nucleus is a spectator.
    """
    return NuclearConfig((Spin.DOWN, Spin.parse(coupler_nucleus), Spin.DOWN))


@dataclass(frozen=True)
class ControlCarrier:
    """One microwave tone: frequency offset from ``γ_e·B`` and amplitude bound."""

    frequency: float
    max_amplitude: float

    def __post_init__(self) -> None:
        """Validate the amplitude bound."""
        if not self.max_amplitude > 0:
            msg = "max_amplitude must be positive"
            raise ValueError(msg)

    def generator(self, amplitude: float, phase: float, time: float) -> HermitianOperator:
        """Rotating-frame control Hamiltonian of this carrier at `time`."""
        return control_generator(
            amplitude, phase, self.frequency, time, max_amplitude=self.max_amplitude
        )


def build_full(params: DeviceParams) -> HermitianOperator:
    """Electron-nuclear Hamiltonian on the 64-dim register ``(T, c, C, nT, nc, nC)``.

    Parameters
    ----------
    params : DeviceParams
        Device constants.

    Returns
    -------
    HermitianOperator
        ``γ_e B ΣZ_e + γ_n B ΣZ_n + Σ A_i σ_i·σ_ni + J_Tc σ_T·σ_c + J_cC σ_c·σ_C``.
    """
    h = params.zeeman * pauli_sum("Z", ELECTRON_SITES, N_FULL)
    h = h + params.nuclear_zeeman * pauli_sum("Z", NUCLEAR_SITES, N_FULL)
    for electron, nucleus, a in zip(ELECTRON_SITES, NUCLEAR_SITES, params.hyperfine):
        h = h + a * exchange_coupling(electron, nucleus, N_FULL)
    h = h + params.j_tc_mhz * exchange_coupling(TARGET, COUPLER, N_FULL)
    return h + params.j_cc_mhz * exchange_coupling(COUPLER, CONTROL, N_FULL)


def _exchange_part(params: DeviceParams) -> HermitianOperator:
    return params.j_tc_mhz * exchange_coupling(
        TARGET, COUPLER, N_ELECTRONS
    ) + params.j_cc_mhz * exchange_coupling(COUPLER, CONTROL, N_ELECTRONS)


def reduce_to_electron(params: DeviceParams, nuc: NuclearConfig) -> HermitianOperator:
    """Electron-only Hamiltonian with frozen nuclei (secular hyperfine).

    Each ``A σ_e·σ_n`` becomes ``A <Z_n> Z_e``; flip-flop terms are dropped.

    Parameters
    ----------
    params : DeviceParams
        Device constants.
    nuc : NuclearConfig
        Frozen nuclear spins ``(nT, nc, nC)``.

    Returns
    -------
    HermitianOperator
        8x8 operator on ``(T, c, C)``. With ``nuc = (up, up, down)`` this is
        ``(γB + A_T) Z_T + (γB - A_C) Z_C + (γB + A_c) Z_c + J_Tc σ_T·σ_c +
        J_cC σ_c·σ_C``.
    """
    h = HermitianOperator.zeros(1 << N_ELECTRONS)
    for site, a, sign in zip(ELECTRON_SITES, params.hyperfine, nuc.hyperfine_signs()):
        h = h + (params.zeeman + sign * a) * embed_pauli("Z", site, N_ELECTRONS)
    return h + _exchange_part(params)


def nuclear_zeeman_shift(params: DeviceParams, nuc: NuclearConfig) -> float:
    """Constant nuclear Zeeman energy of a frozen configuration (MHz)."""
    return params.nuclear_zeeman * sum(nuc.hyperfine_signs())


def rotating_frame_drift(
    h_e: HermitianOperator, params: DeviceParams | None = None
) -> HermitianOperator:
    """Remove the uniform electron Zeeman term ``γ_e B (Z_T + Z_c + Z_C)``.

    Exact: total Z commutes with every exchange term.

    Parameters
    ----------
    h_e : HermitianOperator
        8-dim electron Hamiltonian from `reduce_to_electron`.
    params : DeviceParams | None
        Source of the frame frequency ``γ_e B``; the default device when
        omitted.

    Returns
    -------
    HermitianOperator
        Drift in the frame rotating at ``γ_e B``.
    """
    if h_e.dim != 1 << N_ELECTRONS:
        msg = f"expected an 8-dim electron Hamiltonian, got dim {h_e.dim}"
        raise ValueError(msg)
    zeeman = (DeviceParams() if params is None else params).zeeman
    return h_e - zeeman * pauli_sum("Z", ELECTRON_SITES, N_ELECTRONS)


def electron_drift(params: DeviceParams, nuc: NuclearConfig) -> HermitianOperator:
    """Rotating-frame drift for a frozen nuclear configuration."""
    return rotating_frame_drift(reduce_to_electron(params, nuc), params)


@cache
def drive_operators() -> tuple[NDArray[np.complex128], NDArray[np.complex128]]:
    """Uniform transverse drive ``(X_T+X_c+X_C, Y_T+Y_c+Y_C)`` as arrays."""
    sx = pauli_sum("X", ELECTRON_SITES, N_ELECTRONS).matrix
    sy = pauli_sum("Y", ELECTRON_SITES, N_ELECTRONS).matrix
    return sx, sy


def control_generator(
    amplitude: float,
    phase: float,
    detuning: float,
    time: float,
    max_amplitude: float | None = None,
) -> HermitianOperator:
    """Rotating-frame image of the circularly polarized AC drive.

    Parameters
    ----------
    amplitude : float
        Drive strength ``g μ_B B_AC / h`` in MHz.
    phase : float
        Microwave phase in radians.
    detuning : float
        Carrier frequency offset from ``γ_e B`` in MHz.
    time : float
        Time in microseconds.
    max_amplitude : float | None
        Carrier bound; ``|amplitude|`` may not exceed it.

    Returns
    -------
    HermitianOperator
        ``amplitude [cos θ (X_T+X_c+X_C) + sin θ (Y_T+Y_c+Y_C)]`` with
        ``θ = 2π·detuning·t + phase``.

    Raises
    ------
    ValueError
        If `amplitude` exceeds `max_amplitude`.
    """
    if max_amplitude is not None and abs(amplitude) > max_amplitude:
        msg = f"amplitude {amplitude} exceeds carrier bound {max_amplitude}"
        raise ValueError(msg)
    theta = 2 * np.pi * detuning * time + phase
    sx, sy = drive_operators()
    return HermitianOperator(amplitude * (np.cos(theta) * sx + np.sin(theta) * sy))


def lab_frequency(offset: float, params: DeviceParams) -> float:
    """Lab-frame frequency of a rotating-frame offset (MHz)."""
    return offset + params.zeeman
