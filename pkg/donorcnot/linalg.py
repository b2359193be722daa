"""Dense complex linear algebra over spin registers.

All Hamiltonians are linear frequencies in MHz with h = 1 and all durations
are in microseconds, so time evolution is ``exp(-2j * pi * H * t)``. Register
site 0 is the most significant tensor factor.
"""

from __future__ import annotations

from functools import reduce
from typing import TYPE_CHECKING

import numpy as np

if TYPE_CHECKING:
    from collections.abc import Iterable, Sequence

    from numpy.typing import ArrayLike, NDArray

HERMITIAN_RTOL = 1e-12
UNITARY_ATOL = 1e-10
NORM_ATOL = 1e-12

_PAULI = {
    "I": np.array([[1, 0], [0, 1]], dtype=complex),
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "Z": np.array([[1, 0], [0, -1]], dtype=complex),
}


def _frozen(matrix: ArrayLike) -> NDArray[np.complex128]:
    arr = np.array(matrix, dtype=complex)
    arr.setflags(write=False)
    return arr


def _square(arr: NDArray[np.complex128], name: str) -> None:
    if arr.ndim != 2 or arr.shape[0] != arr.shape[1] or arr.shape[0] == 0:
        msg = f"{name} must be a non-empty square matrix, got shape {arr.shape}"
        raise ValueError(msg)


def hermitian_deviation(matrix: ArrayLike) -> float:
    """Largest entry of ``|H - H^dagger|``."""
    arr = np.asarray(matrix)
    return float(np.max(np.abs(arr - arr.conj().T)))


def unitary_deviation(matrix: ArrayLike) -> float:
    """Largest entry of ``|U^dagger U - I|``."""
    arr = np.asarray(matrix)
    return float(np.max(np.abs(arr.conj().T @ arr - np.eye(arr.shape[0]))))


def n_sites_of(dim: int) -> int | None:
    """Number of spins for a register of dimension `dim`, or None."""
    n = int(dim).bit_length() - 1
    return n if dim > 0 and 1 << n == dim else None


class HermitianOperator:
    """A Hermitian matrix over a spin register, in MHz.

    HermitianOperator objects are immutable. Arithmetic with other operators
    and real scalars returns new operators.
    """

    # numpy scalars defer to __rmul__ instead of broadcasting
    __array_ufunc__ = None

    def __init__(self, matrix: ArrayLike) -> None:
        """Create an operator from a square matrix.

        Parameters
        ----------
        matrix : ArrayLike
            Square complex matrix.

        Raises
        ------
        ValueError
            If the matrix is not square or not Hermitian within
            ``1e-12`` relative to its largest entry.
        """
        arr = _frozen(matrix)
        _square(arr, "HermitianOperator")
        scale = max(1.0, float(np.max(np.abs(arr))))
        if hermitian_deviation(arr) > HERMITIAN_RTOL * scale:
            msg = "matrix is not Hermitian"
            raise ValueError(msg)
        self._matrix = arr

    @classmethod
    def zeros(cls, dim: int) -> HermitianOperator:
        """Zero operator of dimension `dim`."""
        return cls(np.zeros((dim, dim), dtype=complex))

    @property
    def matrix(self) -> NDArray[np.complex128]:
        """Read-only matrix."""
        return self._matrix

    @property
    def dim(self) -> int:
        """Matrix dimension."""
        return self._matrix.shape[0]

    @property
    def n_sites(self) -> int | None:
        """Number of spins if the dimension is a power of two."""
        return n_sites_of(self.dim)

    def trace(self) -> float:
        """Real trace."""
        return float(np.trace(self._matrix).real)

    def norm(self) -> float:
        """Largest absolute entry."""
        return float(np.max(np.abs(self._matrix)))

    def commutator(self, other: HermitianOperator) -> NDArray[np.complex128]:
        """Return ``[self, other]`` as a plain array."""
        a, b = self._matrix, other.matrix
        return a @ b - b @ a

    def commutes_with(self, other: HermitianOperator, atol: float = 1e-9) -> bool:
        """Check that the commutator vanishes within `atol` (max entry)."""
        return bool(np.max(np.abs(self.commutator(other))) <= atol)

    def _coerce(self, other: object) -> NDArray[np.complex128] | None:
        if isinstance(other, HermitianOperator):
            if other.dim != self.dim:
                msg = f"dimension mismatch: {self.dim} vs {other.dim}"
                raise ValueError(msg)
            return other.matrix
        return None

    def __add__(self, other: object) -> HermitianOperator:
        """Sum of two operators."""
        arr = self._coerce(other)
        if arr is None:
            return NotImplemented
        return HermitianOperator(self._matrix + arr)

    def __sub__(self, other: object) -> HermitianOperator:
        """Difference of two operators."""
        arr = self._coerce(other)
        if arr is None:
            return NotImplemented
        return HermitianOperator(self._matrix - arr)

    def __mul__(self, scalar: object) -> HermitianOperator:
        """Scale by a real number."""
        if isinstance(scalar, (int, float, np.floating, np.integer)) and not isinstance(
            scalar, bool
        ):
            return HermitianOperator(self._matrix * float(scalar))
        return NotImplemented

    __rmul__ = __mul__

    def __neg__(self) -> HermitianOperator:
        """Negated operator."""
        return HermitianOperator(-self._matrix)

    def __repr__(self) -> str:
        """Developer representation."""
        return f"HermitianOperator(dim={self.dim}, norm={self.norm():.6g})"


class Unitary:
    """A unitary matrix. Unitary objects are immutable."""

    def __init__(self, matrix: ArrayLike, atol: float = UNITARY_ATOL) -> None:
        """Create a unitary from a square matrix.

        Raises
        ------
        ValueError
            If ``U^dagger U`` deviates from the identity by more than `atol`.
        """
        arr = _frozen(matrix)
        _square(arr, "Unitary")
        if unitary_deviation(arr) > atol:
            msg = "matrix is not unitary"
            raise ValueError(msg)
        self._matrix = arr

    @classmethod
    def identity(cls, dim: int) -> Unitary:
        """Identity of dimension `dim`."""
        return cls(np.eye(dim, dtype=complex))

    @property
    def matrix(self) -> NDArray[np.complex128]:
        """Read-only matrix."""
        return self._matrix

    @property
    def dim(self) -> int:
        """Matrix dimension."""
        return self._matrix.shape[0]

    def dagger(self) -> Unitary:
        """Conjugate transpose."""
        return Unitary(self._matrix.conj().T)

    def deviation(self) -> float:
        """Largest entry of ``|U^dagger U - I|``."""
        return unitary_deviation(self._matrix)

    def apply(self, state: PureState) -> PureState:
        """Apply this unitary to a state of the same dimension."""
        if state.dim != self.dim:
            msg = f"dimension mismatch: unitary {self.dim} vs state {state.dim}"
            raise ValueError(msg)
        return PureState(self._matrix @ state.amplitudes)

    def __matmul__(self, other: object) -> Unitary:
        """Compose two unitaries (``self`` applied after ``other``)."""
        if not isinstance(other, Unitary):
            return NotImplemented
        if other.dim != self.dim:
            msg = f"dimension mismatch: {self.dim} vs {other.dim}"
            raise ValueError(msg)
        return Unitary(self._matrix @ other.matrix)

    def __repr__(self) -> str:
        """Developer representation."""
        return f"Unitary(dim={self.dim})"


class PureState:
    """A normalized state vector over a spin register. Immutable."""

    def __init__(self, amplitudes: ArrayLike, atol: float = NORM_ATOL) -> None:
        """Create a state from its amplitudes.

        Raises
        ------
        ValueError
            If the vector is empty, not one-dimensional or not normalized
            within `atol`.
        """
        arr = np.array(amplitudes, dtype=complex)
        if arr.ndim != 1 or arr.size == 0:
            msg = "amplitudes must be a non-empty vector"
            raise ValueError(msg)
        if abs(float(np.vdot(arr, arr).real) - 1.0) > atol:
            msg = "state is not normalized"
            raise ValueError(msg)
        arr.setflags(write=False)
        self._amplitudes = arr

    @classmethod
    def basis(cls, index: int, dim: int) -> PureState:
        """Computational basis state ``|index>``."""
        if not 0 <= index < dim:
            msg = f"basis index {index} out of range for dimension {dim}"
            raise IndexError(msg)
        amps = np.zeros(dim, dtype=complex)
        amps[index] = 1.0
        return cls(amps)

    @classmethod
    def product(cls, factors: Sequence[ArrayLike]) -> PureState:
        """Tensor product of normalized single-site vectors (site 0 first)."""
        return cls(reduce(np.kron, [np.asarray(f, dtype=complex) for f in factors]))

    @property
    def amplitudes(self) -> NDArray[np.complex128]:
        """Read-only amplitude vector."""
        return self._amplitudes

    @property
    def dim(self) -> int:
        """Vector length."""
        return self._amplitudes.shape[0]

    @property
    def n_sites(self) -> int | None:
        """Number of spins if the length is a power of two."""
        return n_sites_of(self.dim)

    def probabilities(self) -> NDArray[np.float64]:
        """Computational-basis probabilities."""
        return np.abs(self._amplitudes) ** 2

    def overlap(self, other: PureState) -> float:
        """Return ``|<self|other>|^2``."""
        if other.dim != self.dim:
            msg = f"dimension mismatch: {self.dim} vs {other.dim}"
            raise ValueError(msg)
        return float(abs(np.vdot(self._amplitudes, other.amplitudes)) ** 2)

    def __repr__(self) -> str:
        """Developer representation."""
        return f"PureState(dim={self.dim})"


def pauli(axis: str) -> NDArray[np.complex128]:
    """Return the 2x2 Pauli matrix for ``"I"``, ``"X"``, ``"Y"`` or ``"Z"``."""
    key = axis.upper()
    if key not in _PAULI:
        msg = f"axis must be one of X, Y, Z (or I), got '{axis}'"
        raise ValueError(msg)
    return _PAULI[key]


def _check_site(site: int, n_sites: int) -> None:
    if not isinstance(site, (int, np.integer)) or isinstance(site, bool):
        msg = "site must be an integer"
        raise TypeError(msg)
    if not 0 <= site < n_sites:
        msg = f"site {site} out of range for a {n_sites}-site register"
        raise IndexError(msg)


def embed(ops: dict[int, ArrayLike], n_sites: int) -> NDArray[np.complex128]:
    """Tensor single-site 2x2 operators into an `n_sites` register.

    Sites missing from `ops` receive the identity.
    """
    if n_sites < 1:
        msg = "n_sites must be positive"
        raise ValueError(msg)
    for site in ops:
        _check_site(site, n_sites)
    factors = [np.asarray(ops.get(k, _PAULI["I"]), dtype=complex) for k in range(n_sites)]
    return reduce(np.kron, factors)


def embed_pauli(axis: str, site: int, n_sites: int) -> HermitianOperator:
    """Pauli operator on `site` of an `n_sites` register.

    Parameters
    ----------
    axis : str
        ``"X"``, ``"Y"`` or ``"Z"``.
    site : int
        Register position, 0 is the most significant tensor factor.
    n_sites : int
        Register size.

    Returns
    -------
    HermitianOperator
        ``I ⊗ ... ⊗ σ_axis ⊗ ... ⊗ I``.

    Raises
    ------
    IndexError
        If `site` is out of range.

    Examples
    --------
    >>> embed_pauli("Z", 0, 1).matrix.real
    array([[ 1.,  0.],
           [ 0., -1.]])
    """
    if axis.upper() == "I":
        msg = "axis must be one of X, Y, Z"
        raise ValueError(msg)
    return HermitianOperator(embed({site: pauli(axis)}, n_sites))


def exchange_coupling(site_i: int, site_j: int, n_sites: int) -> HermitianOperator:
    """Heisenberg coupling ``X_i X_j + Y_i Y_j + Z_i Z_j``.

    Raises
    ------
    ValueError
        If the two sites are equal.
    IndexError
        If a site is out of range.
    """
    _check_site(site_i, n_sites)
    _check_site(site_j, n_sites)
    if site_i == site_j:
        msg = "exchange_coupling needs two distinct sites"
        raise ValueError(msg)
    total = sum(
        embed({site_i: pauli(a), site_j: pauli(a)}, n_sites) for a in ("X", "Y", "Z")
    )
    return HermitianOperator(total)


def pauli_sum(axis: str, sites: Iterable[int], n_sites: int) -> HermitianOperator:
    """Sum of one Pauli over several sites, e.g. total Z."""
    dim = 1 << n_sites
    total = np.zeros((dim, dim), dtype=complex)
    for site in sites:
        total = total + embed_pauli(axis, site, n_sites).matrix
    return HermitianOperator(total)


def _as_matrix(operator: HermitianOperator | ArrayLike) -> NDArray[np.complex128]:
    if isinstance(operator, HermitianOperator):
        return operator.matrix
    return HermitianOperator(operator).matrix


def hermitian_eigensystem(
    operator: HermitianOperator | ArrayLike,
) -> tuple[NDArray[np.float64], Unitary]:
    """Eigenvalues (ascending) and orthonormal eigenvectors of `operator`.

    Parameters
    ----------
    operator : HermitianOperator | ArrayLike
        Hermitian matrix. Plain arrays are validated first.

    Returns
    -------
    tuple[numpy.ndarray, Unitary]
        ``(eigenvalues, V)`` with ``H = V diag(eigenvalues) V^dagger`` and
        eigenvectors in the columns of ``V``.

    Raises
    ------
    ValueError
        If the input is not Hermitian.

    Notes
    -----
    Degenerate eigenvectors are an arbitrary orthonormal basis of their
    eigenspace; consumers aggregate by eigenvalue.
    """
    matrix = _as_matrix(operator)
    evals, evecs = np.linalg.eigh(matrix)
    return evals, Unitary(evecs)


def propagator(operator: HermitianOperator | ArrayLike, duration: float) -> Unitary:
    """Time evolution ``exp(-2j*pi*H*t)`` through the eigendecomposition.

    Parameters
    ----------
    operator : HermitianOperator | ArrayLike
        Hamiltonian in MHz.
    duration : float
        Evolution time in microseconds, non-negative.

    Raises
    ------
    ValueError
        If `duration` is negative.
    """
    if duration < 0:
        msg = f"duration must be non-negative, got {duration}"
        raise ValueError(msg)
    evals, vecs = np.linalg.eigh(_as_matrix(operator))
    phases = np.exp(-2j * np.pi * evals * duration)
    return Unitary((vecs * phases) @ vecs.conj().T)


def spectral_propagators(
    h_stack: NDArray[np.complex128], duration: float
) -> tuple[NDArray[np.complex128], NDArray[np.float64], NDArray[np.complex128]]:
    """Batched propagators for a stack of Hamiltonians of shape ``(n, d, d)``.

    Returns the propagators together with the eigenvalues and eigenvectors
    they were built from, which the gradient computation reuses. No
    validation is done on this path.
    """
    evals, vecs = np.linalg.eigh(h_stack)
    phases = np.exp(-2j * np.pi * evals * duration)
    props = np.einsum("nij,nj,nkj->nik", vecs, phases, vecs.conj())
    return props, evals, vecs
