"""Transition spectra of the electron drift and frequency-band collisions.

The uniform circular drive couples eigenstates whose total magnetization
differs by one. It is resonant with a carrier offset equal to the energy of
the higher-magnetization state minus that of the lower one, so carrier
offsets are signed even though transition frequencies are reported as
non-negative gaps.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from functools import cache
from typing import TYPE_CHECKING

import numpy as np

from donorcnot.hamiltonian import ELECTRON_SITES, N_ELECTRONS, drive_operators, lab_frequency
from donorcnot.linalg import HermitianOperator, pauli_sum
from donorcnot.utils import csv_text

if TYPE_CHECKING:
    from collections.abc import Iterator, Sequence

    from numpy.typing import ArrayLike, NDArray

    from donorcnot.hamiltonian import DeviceParams

DEFAULT_ELEMENT_THRESHOLD = 1e-3
DEFAULT_MERGE_TOLERANCE = 1.0
CSV_HEADER = ("state_a", "state_b", "freq_offset_mhz", "freq_lab_mhz", "element", "allowed")


@dataclass(frozen=True)
class Transition:
    """A pair of drift eigenstates and the drive's coupling between them.

    Attributes
    ----------
    state_a, state_b : int
        Eigenstate indices (ascending energy), ``state_a < state_b``.
    frequency : float
        ``E_b - E_a`` in MHz, rotating frame.
    element : float
        ``sqrt(|<a|Sx|b>|^2 + |<a|Sy|b>|^2)`` per unit amplitude.
    allowed : bool
        Whether `element` clears the table's threshold.
    offset : float | None
        Signed carrier offset from ``γ_e B`` that drives this transition;
        equals `frequency` when omitted.
    """

    state_a: int
    state_b: int
    frequency: float
    element: float
    allowed: bool
    offset: float | None = None

    def __post_init__(self) -> None:
        """Validate signs and fill in the offset."""
        if self.frequency < 0 or self.element < 0:
            msg = "frequency and element must be non-negative"
            raise ValueError(msg)
        if self.offset is None:
            object.__setattr__(self, "offset", self.frequency)

    @property
    def carrier(self) -> float:
        """Signed carrier offset in MHz."""
        return self.frequency if self.offset is None else self.offset


def merge_groups(values: Sequence[float], tolerance: float) -> list[list[int]]:
    """Group indices of sorted `values` whose neighbours are closer than `tolerance`."""
    groups: list[list[int]] = []
    for i, value in enumerate(values):
        if groups and value - values[groups[-1][-1]] < tolerance:
            groups[-1].append(i)
        else:
            groups.append([i])
    return groups


class TransitionTable:
    """All eigenstate pairs of a drift, sorted by frequency.

    TransitionTable objects are immutable and iterate over their
    `Transition` entries.
    """

    def __init__(
        self,
        transitions: Sequence[Transition],
        device: DeviceParams | None = None,
        threshold: float = DEFAULT_ELEMENT_THRESHOLD,
    ) -> None:
        """Create a table; entries are re-sorted by frequency."""
        self._transitions = tuple(
            sorted(transitions, key=lambda t: (t.frequency, t.carrier, t.state_a, t.state_b))
        )
        self._device = device
        self._threshold = threshold

    @property
    def device(self) -> DeviceParams | None:
        """Device the drift was built from, if known."""
        return self._device

    @property
    def threshold(self) -> float:
        """Relative element threshold used to classify transitions."""
        return self._threshold

    def __len__(self) -> int:
        """Return the number of transitions."""
        return len(self._transitions)

    def __getitem__(self, index: int) -> Transition:
        """Get a transition by index."""
        return self._transitions[index]

    def __iter__(self) -> Iterator[Transition]:
        """Iterate over transitions in frequency order."""
        return iter(self._transitions)

    def allowed(self) -> list[Transition]:
        """Transitions that clear the threshold."""
        return [t for t in self._transitions if t.allowed]

    def max_element(self) -> float:
        """Largest drive element in the table."""
        return max((t.element for t in self._transitions), default=0.0)

    def lines(
        self, merge_tolerance: float = DEFAULT_MERGE_TOLERANCE
    ) -> list[tuple[float, float]]:
        """Allowed carrier lines, merged when closer than `merge_tolerance`.

        Returns
        -------
        list[tuple[float, float]]
            ``(offset, strength)`` per merged line in ascending offset: the
            mean carrier offset and the root-sum-square of the merged
            elements. The strength does not depend on how degenerate
            eigenvectors were chosen.
        """
        allowed = sorted(self.allowed(), key=lambda t: t.carrier)
        offsets = [t.carrier for t in allowed]
        return [
            (
                float(np.mean([offsets[i] for i in group])),
                float(np.sqrt(sum(allowed[i].element ** 2 for i in group))),
            )
            for group in merge_groups(offsets, merge_tolerance)
        ]

    def records(self, params: DeviceParams | None = None) -> list[tuple[object, ...]]:
        """Rows of `to_csv`, one per transition, in `CSV_HEADER` order.

        Raises
        ------
        ValueError
            If no device parameters are available for the lab-frame column.
        """
        device = params or self._device
        if device is None:
            msg = "device parameters are needed for lab-frame frequencies"
            raise ValueError(msg)
        return [
            (
                t.state_a,
                t.state_b,
                t.carrier,
                lab_frequency(t.carrier, device),
                t.element,
                int(t.allowed),
            )
            for t in self._transitions
        ]

    def to_csv(self, params: DeviceParams | None = None) -> str:
        """CSV with columns ``state_a, state_b, freq_offset_mhz, freq_lab_mhz, element, allowed``.

        The offset columns carry the signed carrier offset and its lab-frame
        frequency.
        """
        return csv_text(CSV_HEADER, self.records(params))

    def __repr__(self) -> str:
        """Developer representation."""
        return f"TransitionTable(transitions={len(self)}, allowed={len(self.allowed())})"


@cache
def _total_z() -> NDArray[np.complex128]:
    return pauli_sum("Z", ELECTRON_SITES, N_ELECTRONS).matrix


def sector_eigensystem(
    drift: HermitianOperator,
) -> tuple[NDArray[np.float64], NDArray[np.complex128]]:
    """Eigenpairs with definite total magnetization, energies ascending.

    The drift is diagonalized block by block in the eigenspaces of total Z,
    so degenerate levels from different sectors never mix.

    Raises
    ------
    ValueError
        If the drift does not conserve total electron Z.
    """
    total_z = _total_z()
    if not drift.commutes_with(HermitianOperator(total_z)):
        msg = "drift must conserve total electron Z"
        raise ValueError(msg)
    m = np.real(np.diag(total_z))
    evals = np.empty(drift.dim)
    vecs = np.zeros((drift.dim, drift.dim), dtype=complex)
    col = 0
    for sector in np.unique(m):
        idx = np.flatnonzero(m == sector)
        e, v = np.linalg.eigh(drift.matrix[np.ix_(idx, idx)])
        evals[col : col + idx.size] = e
        vecs[idx, col : col + idx.size] = v
        col += idx.size
    order = np.argsort(evals, kind="stable")
    return evals[order], vecs[:, order]


def table_from_eigensystem(
    evals: ArrayLike,
    vecs: ArrayLike,
    element_threshold: float = DEFAULT_ELEMENT_THRESHOLD,
    device: DeviceParams | None = None,
) -> TransitionTable:
    """Transition table for a given eigenbasis of the drift.

    `vecs` holds eigenvectors in its columns, ordered like `evals`.
    """
    energies = np.asarray(evals, dtype=float)
    basis = np.asarray(vecs, dtype=complex)
    sx, sy = drive_operators()
    mx = basis.conj().T @ sx @ basis
    my = basis.conj().T @ sy @ basis
    elements = np.sqrt(np.abs(mx) ** 2 + np.abs(my) ** 2)
    magnetization = np.real(np.einsum("ia,ij,ja->a", basis.conj(), _total_z(), basis))
    pairs = list(itertools.combinations(range(energies.size), 2))
    largest = max((float(elements[a, b]) for a, b in pairs), default=0.0)
    cut = element_threshold * largest
    transitions = []
    for a, b in pairs:
        gap = max(0.0, float(energies[b] - energies[a]))
        # raising part of the drive resonates at E(higher M) - E(lower M)
        sign = -1.0 if magnetization[a] > magnetization[b] + 0.5 else 1.0
        transitions.append(
            Transition(
                state_a=a,
                state_b=b,
                frequency=gap,
                element=float(elements[a, b]),
                allowed=largest > 0 and bool(elements[a, b] >= cut),
                offset=sign * gap,
            )
        )
    return TransitionTable(transitions, device, element_threshold)


def transition_table(
    drift: HermitianOperator | ArrayLike,
    element_threshold: float = DEFAULT_ELEMENT_THRESHOLD,
    device: DeviceParams | None = None,
) -> TransitionTable:
    """Enumerate drive-induced transitions of the rotating-frame drift.

    Parameters
    ----------
    drift : HermitianOperator | ArrayLike
        8-dim drift from `donorcnot.hamiltonian.electron_drift`.
    element_threshold : float
        Allowed iff the element is at least this fraction of the largest
        element in the table (default 1e-3).
    device : DeviceParams | None
        Kept on the table for lab-frame output.

    Returns
    -------
    TransitionTable
        All ``dim (dim - 1) / 2`` eigenstate pairs.

    Raises
    ------
    ValueError
        If the drift is not Hermitian, not 8-dimensional or does not conserve
        total Z, or if the threshold is not positive.
    """
    if not element_threshold > 0:
        msg = "element_threshold must be positive"
        raise ValueError(msg)
    op = drift if isinstance(drift, HermitianOperator) else HermitianOperator(drift)
    if op.dim != 1 << N_ELECTRONS:
        msg = f"expected an 8-dim drift, got dim {op.dim}"
        raise ValueError(msg)
    evals, vecs = sector_eigensystem(op)
    return table_from_eigensystem(evals, vecs, element_threshold, device)


def allowed_frequencies(
    table: TransitionTable, merge_tolerance: float = DEFAULT_MERGE_TOLERANCE
) -> list[float]:
    """Allowed carrier offsets, near-coincident lines merged to their mean.

    Examples
    --------
    >>> t = TransitionTable([Transition(0, 1, 10.0, 1.0, True),
    ...                      Transition(0, 2, 10.4, 1.0, True)])
    >>> allowed_frequencies(t, 0.5)
    [10.2]
    """
    if merge_tolerance < 0:
        msg = "merge_tolerance must be non-negative"
        raise ValueError(msg)
    return [round(f, 12) for f, _ in table.lines(merge_tolerance)]


def colliding_pairs(
    freqs_a: Sequence[float], freqs_b: Sequence[float], tolerance: float
) -> list[tuple[float, float]]:
    """Cross-list frequency pairs closer than `tolerance`."""
    a = np.asarray(freqs_a, dtype=float)
    b = np.asarray(freqs_b, dtype=float)
    if a.size == 0 or b.size == 0:
        return []
    ia, ib = np.nonzero(np.abs(np.subtract.outer(a, b)) < tolerance)
    return [(float(a[i]), float(b[k])) for i, k in zip(ia, ib)]


def band_overlap(freqs_a: Sequence[float], freqs_b: Sequence[float], tolerance: float) -> bool:
    """Whether any frequency of `freqs_a` lies within `tolerance` of one in `freqs_b`.

    Examples
    --------
    >>> band_overlap([10.0], [20.0], 1.0)
    False
    >>> band_overlap([10.0], [10.5], 1.0)
    True
    """
    return bool(colliding_pairs(freqs_a, freqs_b, tolerance))


def overlap_fraction(frequency_sets: Sequence[Sequence[float]], tolerance: float) -> float:
    """Fraction of unordered set pairs whose bands overlap."""
    n = len(frequency_sets)
    if n < 2:
        return 0.0
    hits = sum(
        band_overlap(frequency_sets[i], frequency_sets[k], tolerance)
        for i, k in itertools.combinations(range(n), 2)
    )
    return hits / (n * (n - 1) / 2)
