"""Finite classical probability: propositions, observables, states and kernels.

Every object is an immutable value holding dense float vectors. Atoms of a
:class:`SampleSpace` are the elementary propositions; a probability state is
a nonnegative vector indexed by atoms and summing to one; an observable is a
real value per atom. Transition kernels carry the disturbance of a system
between two spaces.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .errors import DimensionError, ValidationError, ZeroProbabilityError

NORM_TOL = 1e-12


def _frozen(values, dtype=float) -> np.ndarray:
    arr = np.array(values, dtype=dtype)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class SampleSpace:
    """An ordered, finite set of uniquely labelled atoms."""

    atoms: tuple[str, ...]

    def __init__(self, atoms: Iterable[str]):
        labels = tuple(str(a) for a in atoms)
        if not labels:
            raise ValidationError("a sample space needs at least one atom")
        if len(set(labels)) != len(labels):
            raise ValidationError(f"atom labels must be unique: {labels}")
        object.__setattr__(self, "atoms", labels)

    @property
    def dimension(self) -> int:
        return len(self.atoms)

    def index(self, label) -> int:
        """Position of an atom given its label or its integer index."""
        if isinstance(label, (int, np.integer)):
            if not 0 <= int(label) < self.dimension:
                raise ValidationError(f"atom index {label} out of range")
            return int(label)
        try:
            return self.atoms.index(str(label))
        except ValueError:
            raise ValidationError(f"unknown atom {label!r}; atoms are {self.atoms}") from None

    def product(self, other: "SampleSpace") -> "SampleSpace":
        """Joint space with atoms ordered x-major, y-minor (index x*|Y| + y)."""
        return SampleSpace(f"{x},{y}" for x in self.atoms for y in other.atoms)

    def __len__(self):
        return self.dimension


def _check_space(a: SampleSpace, b: SampleSpace):
    if a != b:
        raise DimensionError(f"space mismatch: {a.atoms} vs {b.atoms}")


@dataclass(frozen=True)
class Proposition:
    """A subset of atoms, i.e. a 0/1-valued observable."""

    space: SampleSpace
    members: frozenset

    def __init__(self, space: SampleSpace, members: Iterable = ()):
        idx = frozenset(space.index(m) for m in members)
        object.__setattr__(self, "space", space)
        object.__setattr__(self, "members", idx)

    @classmethod
    def atom(cls, space: SampleSpace, label) -> "Proposition":
        return cls(space, [label])

    @classmethod
    def true(cls, space: SampleSpace) -> "Proposition":
        return cls(space, range(space.dimension))

    def as_observable(self) -> "Observable":
        vals = np.zeros(self.space.dimension)
        vals[list(self.members)] = 1.0
        return Observable(self.space, vals)


@dataclass(frozen=True, eq=False)
class Observable:
    """A real value f(x) attached to every atom x."""

    space: SampleSpace
    values: np.ndarray

    def __init__(self, space: SampleSpace, values: Sequence[float]):
        arr = _frozen(values)
        if arr.shape != (space.dimension,):
            raise DimensionError(f"observable needs {space.dimension} values, got shape {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise ValidationError("observable values must be finite")
        object.__setattr__(self, "space", space)
        object.__setattr__(self, "values", arr)

    @classmethod
    def identity(cls, space: SampleSpace) -> "Observable":
        return cls(space, np.ones(space.dimension))

    def power(self, n: int) -> "Observable":
        return Observable(self.space, self.values ** n)

    def __mul__(self, other: "Observable") -> "Observable":
        _check_space(self.space, other.space)
        return Observable(self.space, self.values * other.values)

    def __eq__(self, other):
        return (
            isinstance(other, Observable)
            and self.space == other.space
            and np.array_equal(self.values, other.values)
        )

    __hash__ = None


def _as_values(obs) -> tuple[SampleSpace, np.ndarray]:
    if isinstance(obs, Proposition):
        obs = obs.as_observable()
    return obs.space, obs.values


def _normalize(probs: np.ndarray, what: str) -> np.ndarray:
    if not np.all(np.isfinite(probs)):
        raise ValidationError(f"{what} contains non-finite entries")
    if np.any(probs < -NORM_TOL) or np.any(probs > 1 + NORM_TOL):
        raise ValidationError(f"{what} has entries outside [0, 1]: {probs}")
    total = probs.sum()
    if abs(total - 1.0) > NORM_TOL:
        raise ValidationError(f"{what} sums to {total!r}, not 1 within {NORM_TOL}")
    probs = np.clip(probs, 0.0, None)
    return probs / probs.sum()


@dataclass(frozen=True, eq=False)
class ProbState:
    """A probability vector on a sample space.

    Inputs within 1e-12 of normalization are renormalized; anything further
    off is rejected.
    """

    space: SampleSpace
    probs: np.ndarray

    def __init__(self, space: SampleSpace, probs: Sequence[float]):
        arr = np.array(probs, dtype=float)
        if arr.shape != (space.dimension,):
            raise DimensionError(f"state needs {space.dimension} probabilities, got shape {arr.shape}")
        object.__setattr__(self, "space", space)
        object.__setattr__(self, "probs", _frozen(_normalize(arr, "state")))

    @classmethod
    def uniform(cls, space: SampleSpace) -> "ProbState":
        return cls(space, np.full(space.dimension, 1.0 / space.dimension))

    @classmethod
    def point(cls, space: SampleSpace, label) -> "ProbState":
        p = np.zeros(space.dimension)
        p[space.index(label)] = 1.0
        return cls(space, p)

    def __eq__(self, other):
        return (
            isinstance(other, ProbState)
            and self.space == other.space
            and np.array_equal(self.probs, other.probs)
        )

    __hash__ = None


@dataclass(frozen=True, eq=False)
class ReferenceMeasure:
    """Strictly positive weights μ(x) used to express states as densities."""

    space: SampleSpace
    weights: np.ndarray

    def __init__(self, space: SampleSpace, weights: Sequence[float]):
        arr = _frozen(weights)
        if arr.shape != (space.dimension,):
            raise DimensionError("reference measure has wrong length")
        if not np.all(arr > 0):
            raise ValidationError("reference measure weights must be positive")
        object.__setattr__(self, "space", space)
        object.__setattr__(self, "weights", arr)

    def density(self, state: ProbState) -> Observable:
        """The density P_μ(x) = P(x)/μ(x) of ``state`` with respect to μ."""
        _check_space(self.space, state.space)
        return Observable(self.space, state.probs / self.weights)

    def integrate(self, obs: Observable) -> float:
        """⟨F⟩_μ = Σ_x μ(x) f(x)."""
        _check_space(self.space, obs.space)
        return float(self.weights @ obs.values)


@dataclass(frozen=True, eq=False)
class TransitionKernel:
    """Row-stochastic matrix D[x, x'] = D_x(x') from ``source`` to ``target``."""

    source: SampleSpace
    target: SampleSpace
    matrix: np.ndarray = field(repr=False)

    def __init__(self, source: SampleSpace, target: SampleSpace, matrix):
        arr = np.array(matrix, dtype=float)
        if arr.shape != (source.dimension, target.dimension):
            raise DimensionError(
                f"kernel needs shape {(source.dimension, target.dimension)}, got {arr.shape}"
            )
        if not np.all(np.isfinite(arr)) or np.any(arr < 0):
            raise ValidationError("kernel entries must be finite and nonnegative")
        sums = arr.sum(axis=1)
        if np.any(np.abs(sums - 1.0) > NORM_TOL):
            raise ValidationError(f"kernel rows must sum to 1, got {sums}")
        arr = arr / sums[:, None]
        object.__setattr__(self, "source", source)
        object.__setattr__(self, "target", target)
        object.__setattr__(self, "matrix", _frozen(arr))

    @classmethod
    def identity(cls, space: SampleSpace) -> "TransitionKernel":
        return cls(space, space, np.eye(space.dimension))

    def compose(self, after: "TransitionKernel") -> "TransitionKernel":
        """Kernel for ``self`` followed by ``after``."""
        _check_space(self.target, after.source)
        return TransitionKernel(self.source, after.target, self.matrix @ after.matrix)


def expectation(state: ProbState, obs) -> float:
    """⟨F⟩ = Σ_x f(x) P(x); a Proposition gives its probability."""
    space, vals = _as_values(obs)
    _check_space(state.space, space)
    return float(state.probs @ vals)


def moment(state: ProbState, obs: Observable, n: int) -> float:
    """⟨F^n⟩. ``n = 0`` returns exactly 1."""
    if n < 0 or int(n) != n:
        raise ValidationError(f"moment order must be a nonnegative integer, got {n}")
    if n == 0:
        return 1.0
    _check_space(state.space, obs.space)
    return float(state.probs @ obs.values ** int(n))


def condition(state: ProbState, y: Proposition) -> ProbState:
    """Bayesian collapse P(x|y) = P(x)[x ∈ y] / P(y)."""
    _check_space(state.space, y.space)
    mask = y.as_observable().values
    p_y = float(state.probs @ mask)
    if p_y <= 0.0:
        raise ZeroProbabilityError(f"cannot condition on a proposition of probability {p_y}")
    return ProbState(state.space, state.probs * mask / p_y)


def conditional_probability(state: ProbState, z: Proposition, y: Proposition) -> float:
    """P(z|y) = P(zy)/P(y)."""
    _check_space(state.space, z.space)
    _check_space(state.space, y.space)
    zy = z.as_observable().values * y.as_observable().values
    p_y = expectation(state, y)
    if p_y <= 0.0:
        raise ZeroProbabilityError("conditioning proposition has zero probability")
    return float(state.probs @ zy) / p_y


def apply_kernel(kernel: TransitionKernel, state: ProbState) -> ProbState:
    """Schrödinger picture: P'(x') = Σ_x P(x) D_x(x')."""
    _check_space(kernel.source, state.space)
    return ProbState(kernel.target, state.probs @ kernel.matrix)


def apply_kernel_obs(kernel: TransitionKernel, obs: Observable) -> Observable:
    """Heisenberg picture: 𝒟(F)(x) = Σ_{x'} D_x(x') f(x')."""
    _check_space(kernel.target, obs.space)
    return Observable(kernel.source, kernel.matrix @ obs.values)


def invasive_condition(state: ProbState, kernel: TransitionKernel, y: Proposition) -> ProbState:
    """Propagate through ``kernel`` and then condition on ``y``.

    The resulting state reproduces ⟨𝒟(yF)⟩/⟨𝒟(y)⟩ for every observable F.
    """
    _check_space(kernel.target, y.space)
    moved = apply_kernel(kernel, state)
    if expectation(moved, y) <= 0.0:
        raise ZeroProbabilityError("disturbed probability of the condition is zero")
    return condition(moved, y)


def correlation(state: ProbState, f: Observable, kernel: TransitionKernel, g: Observable) -> float:
    """⟨F 𝒟(G)⟩ = Σ_x P(x) f(x) Σ_{x'} D_x(x') g(x')."""
    _check_space(state.space, f.space)
    _check_space(kernel.source, f.space)
    _check_space(kernel.target, g.space)
    return float(state.probs @ (f.values * (kernel.matrix @ g.values)))
