"""Exact finite-dimensional quantum mechanics for small qubit/qutrit systems.

States are stored as dense complex arrays together with a list of factor
dimensions, so mixed qubit/qutrit composites are addressed factor by factor.
Everything here is deterministic except :func:`measure`, which draws from the
generator it is handed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import reduce
from typing import Sequence

import numpy as np

ATOL = 1e-9


class DimensionError(ValueError):
    """Raised when operands disagree on subsystem dimensions."""


def _as_dims(dims: Sequence[int]) -> tuple[int, ...]:
    dims = tuple(int(d) for d in dims)
    if not dims or any(d < 1 for d in dims):
        raise DimensionError(f"invalid factor dimensions {dims}")
    return dims


@dataclass(frozen=True, eq=False)
class StateVector:
    """A normalised pure state over factors of the given dimensions."""

    dims: tuple[int, ...]
    amplitudes: np.ndarray

    def __post_init__(self) -> None:
        dims = _as_dims(self.dims)
        amps = np.asarray(self.amplitudes, dtype=complex).reshape(-1)
        if amps.size != int(np.prod(dims)):
            raise DimensionError(
                f"{amps.size} amplitudes do not match dims {dims}")
        norm = float(np.vdot(amps, amps).real)
        if abs(norm - 1.0) > ATOL:
            raise ValueError(f"state is not normalised (norm^2 = {norm})")
        object.__setattr__(self, "dims", dims)
        object.__setattr__(self, "amplitudes", amps)

    @classmethod
    def from_unnormalized(cls, dims: Sequence[int], amplitudes) -> "StateVector":
        amps = np.asarray(amplitudes, dtype=complex).reshape(-1)
        return cls(tuple(dims), amps / np.linalg.norm(amps))

    @property
    def dim(self) -> int:
        return self.amplitudes.size

    def density(self) -> "DensityMatrix":
        return DensityMatrix(self.dims, np.outer(self.amplitudes, self.amplitudes.conj()))


@dataclass(frozen=True, eq=False)
class DensityMatrix:
    """A unit-trace positive semidefinite operator over the given factors."""

    dims: tuple[int, ...]
    matrix: np.ndarray

    def __post_init__(self) -> None:
        dims = _as_dims(self.dims)
        m = np.asarray(self.matrix, dtype=complex)
        n = int(np.prod(dims))
        if m.shape != (n, n):
            raise DimensionError(f"matrix shape {m.shape} does not match dims {dims}")
        if not np.allclose(m, m.conj().T, atol=ATOL, rtol=0):
            raise ValueError("density matrix is not Hermitian")
        if abs(np.trace(m).real - 1.0) > ATOL:
            raise ValueError(f"density matrix trace is {np.trace(m).real}")
        if np.linalg.eigvalsh(m).min() < -ATOL:
            raise ValueError("density matrix has a negative eigenvalue")
        object.__setattr__(self, "dims", dims)
        object.__setattr__(self, "matrix", m)

    @classmethod
    def mixture(cls, weights: Sequence[float], states: Sequence[StateVector]) -> "DensityMatrix":
        """Convex combination of pure states."""
        dims = states[0].dims
        m = sum(w * np.outer(s.amplitudes, s.amplitudes.conj())
                for w, s in zip(weights, states))
        return cls(dims, m)


@dataclass(frozen=True, eq=False)
class UnitaryOp:
    matrix: np.ndarray

    def __post_init__(self) -> None:
        m = np.asarray(self.matrix, dtype=complex)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise DimensionError(f"unitary must be square, got {m.shape}")
        if not np.allclose(m.conj().T @ m, np.eye(m.shape[0]), atol=ATOL, rtol=0):
            raise ValueError("matrix is not unitary")
        object.__setattr__(self, "matrix", m)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def __matmul__(self, other: "UnitaryOp") -> "UnitaryOp":
        return UnitaryOp(self.matrix @ other.matrix)


@dataclass(frozen=True, eq=False)
class Povm:
    """A measurement given by positive elements summing to the identity.

    Kraus operators (the element square roots) are computed once and used
    for Lüders post-measurement states; for projective measurements they are
    the projectors themselves.
    """

    elements: tuple[np.ndarray, ...]
    kraus: tuple[np.ndarray, ...] = field(init=False, repr=False)

    def __post_init__(self) -> None:
        elems = tuple(np.asarray(e, dtype=complex) for e in self.elements)
        if not elems:
            raise ValueError("a POVM needs at least one element")
        n = elems[0].shape[0]
        for e in elems:
            if e.shape != (n, n):
                raise DimensionError("POVM elements have inconsistent shapes")
            if not np.allclose(e, e.conj().T, atol=ATOL, rtol=0):
                raise ValueError("POVM element is not Hermitian")
            if np.linalg.eigvalsh(e).min() < -ATOL:
                raise ValueError("POVM element is not positive semidefinite")
        if not np.allclose(sum(elems), np.eye(n), atol=ATOL, rtol=0):
            raise ValueError("POVM elements do not sum to the identity")
        object.__setattr__(self, "elements", elems)
        object.__setattr__(self, "kraus", tuple(_psd_sqrt(e) for e in elems))

    @classmethod
    def projective(cls, basis: Sequence[StateVector]) -> "Povm":
        """Rank-one projectors onto the given states, completed to the identity
        by one extra element when the states do not span the space."""
        projs = [np.outer(s.amplitudes, s.amplitudes.conj()) for s in basis]
        n = projs[0].shape[0]
        rest = np.eye(n) - sum(projs)
        if np.linalg.norm(rest) > ATOL:
            projs.append(rest)
        return cls(tuple(projs))

    @property
    def dim(self) -> int:
        return self.elements[0].shape[0]

    def __len__(self) -> int:
        return len(self.elements)


def _psd_sqrt(e: np.ndarray) -> np.ndarray:
    if np.allclose(e @ e, e, atol=ATOL, rtol=0):
        return e
    w, v = np.linalg.eigh(e)
    return (v * np.sqrt(np.clip(w, 0, None))) @ v.conj().T


# -- array-level kernels (no validation; used on the engine's hot path) ------

def apply_matrix(psi: np.ndarray, dims: Sequence[int], matrix: np.ndarray,
                 targets: Sequence[int]) -> np.ndarray:
    """Apply ``matrix`` to the ``targets`` factors of the flat vector ``psi``."""
    targets = list(targets)
    nf = len(dims)
    if targets == list(range(targets[0], targets[0] + len(targets))):
        pre = math.prod(dims[:targets[0]])
        mid = matrix.shape[0]
        return (matrix @ psi.reshape(pre, mid, -1)).reshape(-1)
    rest = [i for i in range(nf) if i not in targets]
    order = targets + rest
    t = psi.reshape(dims).transpose(order).reshape(matrix.shape[0], -1)
    t = (matrix @ t).reshape([dims[i] for i in order])
    return t.transpose(np.argsort(order)).reshape(-1)


def outcome_probabilities(psi: np.ndarray, dims: Sequence[int], kraus: Sequence[np.ndarray],
                          targets: Sequence[int]) -> tuple[list[float], list[np.ndarray]]:
    branches = [apply_matrix(psi, dims, k, targets) for k in kraus]
    probs = [float(np.vdot(b, b).real) for b in branches]
    return probs, branches


def sample_index(probs: Sequence[float], u: float) -> int:
    """Inverse-CDF sampling restricted to strictly positive probabilities."""
    total = sum(p for p in probs if p > 0)
    acc = 0.0
    last = None
    for i, p in enumerate(probs):
        if p <= ATOL * ATOL:
            continue
        last = i
        acc += p / total
        if u < acc:
            return i
    return last


# -- public operations -------------------------------------------------------

def ket(dims: Sequence[int], *digits: int) -> StateVector:
    """Computational basis state |digits> over factors ``dims``."""
    dims = _as_dims(dims)
    if len(digits) != len(dims):
        raise DimensionError("one digit per factor is required")
    amps = np.zeros(int(np.prod(dims)), dtype=complex)
    amps[np.ravel_multi_index(digits, dims)] = 1.0
    return StateVector(dims, amps)


def superpose(terms: Sequence[tuple[complex, StateVector]]) -> StateVector:
    """Normalised linear combination of states with equal dims."""
    dims = terms[0][1].dims
    amps = sum(c * s.amplitudes for c, s in terms)
    return StateVector.from_unnormalized(dims, amps)


def tensor(a: StateVector, b: StateVector) -> StateVector:
    return StateVector(a.dims + b.dims, np.kron(a.amplitudes, b.amplitudes))


def _check_targets(dims: tuple[int, ...], targets: Sequence[int]) -> list[int]:
    targets = [int(t) for t in targets]
    if not targets or len(set(targets)) != len(targets):
        raise DimensionError(f"invalid subsystem indices {targets}")
    if any(t < 0 or t >= len(dims) for t in targets):
        raise DimensionError(f"subsystem index out of range for dims {dims}")
    return targets


def apply_unitary(state: StateVector, u: UnitaryOp, targets: Sequence[int]) -> StateVector:
    """Apply ``u`` on the ``targets`` factors and the identity elsewhere."""
    targets = _check_targets(state.dims, targets)
    if u.dim != int(np.prod([state.dims[t] for t in targets])):
        raise DimensionError(
            f"unitary of dim {u.dim} cannot act on factors {targets} of {state.dims}")
    return StateVector(state.dims, apply_matrix(state.amplitudes, state.dims, u.matrix, targets))


def partial_trace(state: StateVector | DensityMatrix, keep: Sequence[int]) -> DensityMatrix:
    """Reduced density matrix on the ``keep`` factors, in the order given."""
    dims = state.dims
    keep = _check_targets(dims, keep)
    rest = [i for i in range(len(dims)) if i not in keep]
    dk = int(np.prod([dims[i] for i in keep]))
    if isinstance(state, StateVector):
        t = state.amplitudes.reshape(dims).transpose(keep + rest).reshape(dk, -1)
        rho = t @ t.conj().T
    else:
        n = len(dims)
        t = state.matrix.reshape(dims + dims)
        t = t.transpose(keep + rest + [n + i for i in keep] + [n + i for i in rest])
        dr = int(np.prod([dims[i] for i in rest])) if rest else 1
        rho = np.einsum("arbr->ab", t.reshape(dk, dr, dk, dr))
    return DensityMatrix(tuple(dims[i] for i in keep), rho)


def born_probabilities(state: StateVector, povm: Povm,
                       targets: Sequence[int] | None = None) -> list[float]:
    targets = list(range(len(state.dims))) if targets is None else _check_targets(state.dims, targets)
    probs, _ = outcome_probabilities(state.amplitudes, state.dims, povm.kraus, targets)
    return probs


def measure(state: StateVector, povm: Povm, rng,
            targets: Sequence[int] | None = None) -> tuple[int, StateVector]:
    """Sample a measurement outcome and return it with the post-measurement state.

    Args:
        state: The state to measure.
        povm: Measurement acting on ``targets`` (all factors by default).
        rng: Anything with a ``random()`` method returning a float in [0, 1),
            e.g. :class:`random.Random` or :class:`numpy.random.Generator`.
        targets: Factors the POVM acts on.

    Returns:
        The outcome index and the renormalised Lüders post-state. Outcomes of
        zero probability are never returned.
    """
    targets = list(range(len(state.dims))) if targets is None else _check_targets(state.dims, targets)
    if povm.dim != int(np.prod([state.dims[t] for t in targets])):
        raise DimensionError("POVM dimension does not match the measured factors")
    probs, branches = outcome_probabilities(state.amplitudes, state.dims, povm.kraus, targets)
    k = sample_index(probs, rng.random())
    return k, StateVector(state.dims, branches[k] / np.sqrt(probs[k]))


def _as_matrix(r: DensityMatrix | StateVector) -> tuple[tuple[int, ...], np.ndarray]:
    if isinstance(r, StateVector):
        r = r.density()
    return r.dims, r.matrix


def trace_distance(r0: DensityMatrix | StateVector, r1: DensityMatrix | StateVector) -> float:
    d0, m0 = _as_matrix(r0)
    d1, m1 = _as_matrix(r1)
    if d0 != d1:
        raise DimensionError(f"dims differ: {d0} vs {d1}")
    return float(0.5 * np.abs(np.linalg.eigvalsh(m0 - m1)).sum())


def helstrom(r0: DensityMatrix | StateVector, r1: DensityMatrix | StateVector) -> float:
    """Optimal success probability for telling ``r0`` from ``r1`` under a uniform prior."""
    return 0.5 + 0.5 * trace_distance(r0, r1)


def overlap(a: StateVector, b: StateVector) -> complex:
    if a.dims != b.dims:
        raise DimensionError(f"dims differ: {a.dims} vs {b.dims}")
    return complex(np.vdot(a.amplitudes, b.amplitudes))


def equal_up_to_phase(a: StateVector, b: StateVector, atol: float = ATOL) -> bool:
    return abs(abs(overlap(a, b)) - 1.0) <= atol


def gram_matrix(states: Sequence[StateVector]) -> np.ndarray:
    vecs = np.array([s.amplitudes for s in states])
    return vecs.conj() @ vecs.T


def kron(*ops: UnitaryOp) -> UnitaryOp:
    return UnitaryOp(reduce(np.kron, [o.matrix for o in ops]))


# -- gates and states used by the protocols ----------------------------------

I2 = UnitaryOp(np.eye(2))
X = UnitaryOp(np.array([[0, 1], [1, 0]]))
Z = UnitaryOp(np.array([[1, 0], [0, -1]]))
H = UnitaryOp(np.array([[1, 1], [1, -1]]) / np.sqrt(2))


def power(u: UnitaryOp, k: int) -> UnitaryOp:
    return reduce(lambda acc, _: acc @ u, range(k), UnitaryOp(np.eye(u.dim)))


def qutrit_phase(x0: int, x1: int) -> UnitaryOp:
    """|0> -> (-1)^x0 |0>, |1> -> (-1)^x1 |1>, |2> -> |2>."""
    return UnitaryOp(np.diag([(-1) ** x0, (-1) ** x1, 1]))


def pauli_mask(x0: int, x1: int) -> UnitaryOp:
    """X^x0 Z^x1 on a qubit."""
    return power(X, x0) @ power(Z, x1)


def hadamard_basis_state(b: int, d: int) -> StateVector:
    """H^b |d>."""
    return StateVector((2,), power(H, b).matrix @ ket((2,), d).amplitudes)


def phi_state(b: int) -> StateVector:
    """(|bb> + |22>)/sqrt(2) over two qutrits."""
    return superpose([(1, ket((3, 3), b, b)), (1, ket((3, 3), 2, 2))])


def bell_state(x0: int, x1: int) -> StateVector:
    """(I (x) X^x0 Z^x1) |Phi+>: the four Bell states indexed by two bits."""
    phi_plus = superpose([(1, ket((2, 2), 0, 0)), (1, ket((2, 2), 1, 1))])
    return apply_unitary(phi_plus, pauli_mask(x0, x1), [1])


def computational_povm(dim: int) -> Povm:
    return Povm.projective([ket((dim,), k) for k in range(dim)])
