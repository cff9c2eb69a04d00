"""Generalized classical detectors on a joint system-detector space.

A detector is characterised by its response P(y|x). The response generates
probability observables E_y(x) = P(y|x). When coupling the detector disturbs
the system, each outcome instead carries an operation ℰ_y, stored here as a
nonnegative matrix A_y[x', x] with ℰ_y(F)(x') = Σ_x A_y[x', x] f(x).

Joint atoms are ordered x-major, y-minor: atom (x, y) has index x*|Y| + y.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import DimensionError, ValidationError, ZeroProbabilityError
from .prob_core import (
    NORM_TOL,
    Observable,
    ProbState,
    SampleSpace,
    TransitionKernel,
    _check_space,
    _frozen,
    expectation,
)


def _outcome_index(space: SampleSpace, y) -> int:
    try:
        return space.index(y)
    except ValidationError as exc:
        raise ValidationError(f"detector outcome out of range: {exc}") from None


@dataclass(frozen=True, eq=False)
class DetectorResponse:
    """Likelihood matrix P(y|x): rows are system atoms, columns are outcomes."""

    system: SampleSpace
    detector: SampleSpace
    likelihood: np.ndarray

    def __init__(self, system: SampleSpace, detector: SampleSpace, likelihood):
        arr = np.array(likelihood, dtype=float)
        if arr.shape != (system.dimension, detector.dimension):
            raise DimensionError(
                f"likelihood needs shape {(system.dimension, detector.dimension)}, got {arr.shape}"
            )
        if not np.all(np.isfinite(arr)) or np.any(arr < 0) or np.any(arr > 1):
            raise ValidationError("likelihood entries must lie in [0, 1]")
        sums = arr.sum(axis=1)
        if np.any(np.abs(sums - 1.0) > NORM_TOL):
            raise ValidationError(f"likelihood rows must sum to 1, got {sums}")
        object.__setattr__(self, "system", system)
        object.__setattr__(self, "detector", detector)
        object.__setattr__(self, "likelihood", _frozen(arr / sums[:, None]))


@dataclass(frozen=True, eq=False)
class EffectSet:
    """Probability observables E_y, one per detector outcome, summing to 1_X."""

    system: SampleSpace
    outcomes: SampleSpace
    effects: tuple

    def __init__(self, system: SampleSpace, outcomes: SampleSpace, effects: Sequence):
        effs = tuple(e if isinstance(e, Observable) else Observable(system, e) for e in effects)
        if len(effs) != outcomes.dimension:
            raise DimensionError(f"{outcomes.dimension} outcomes but {len(effs)} effects")
        for e in effs:
            _check_space(system, e.space)
            if np.any(e.values < -NORM_TOL) or np.any(e.values > 1 + NORM_TOL):
                raise ValidationError("effect values must lie in [0, 1]")
        total = np.sum([e.values for e in effs], axis=0)
        if np.any(np.abs(total - 1.0) > NORM_TOL):
            raise ValidationError(f"effects must sum to 1_X, got {total}")
        object.__setattr__(self, "system", system)
        object.__setattr__(self, "outcomes", outcomes)
        object.__setattr__(self, "effects", effs)

    @property
    def matrix(self) -> np.ndarray:
        """Response-map layout S[x, y] = E_y(x)."""
        return np.column_stack([e.values for e in self.effects])

    def __getitem__(self, y) -> Observable:
        return self.effects[_outcome_index(self.outcomes, y)]

    def __len__(self):
        return len(self.effects)


@dataclass(frozen=True, eq=False)
class OutcomeChannel:
    """Per-outcome operations A_y[x', x] >= 0 acting on system observables."""

    system: SampleSpace
    outcomes: SampleSpace
    matrices: np.ndarray  # shape (|Y|, |X|, |X|)

    def __init__(self, system: SampleSpace, outcomes: SampleSpace, matrices):
        arr = np.array(matrices, dtype=float)
        shape = (outcomes.dimension, system.dimension, system.dimension)
        if arr.shape != shape:
            raise DimensionError(f"channel matrices need shape {shape}, got {arr.shape}")
        if not np.all(np.isfinite(arr)) or np.any(arr < 0):
            raise ValidationError("channel entries must be finite and nonnegative")
        total = arr.sum(axis=(0, 2))
        if np.any(np.abs(total - 1.0) > NORM_TOL):
            raise ValidationError(f"channel must preserve 1_X, row totals {total}")
        object.__setattr__(self, "system", system)
        object.__setattr__(self, "outcomes", outcomes)
        object.__setattr__(self, "matrices", _frozen(arr))

    @classmethod
    def noninvasive(cls, effects: EffectSet) -> "OutcomeChannel":
        """Channel that only conditions: A_y = diag(E_y)."""
        mats = [np.diag(e.values) for e in effects.effects]
        return cls(effects.system, effects.outcomes, mats)

    def effective_effects(self) -> EffectSet:
        """Ẽ_y = ℰ_y(1_X)."""
        return EffectSet(self.system, self.outcomes, list(self.matrices.sum(axis=2)))

    def effective_response(self) -> DetectorResponse:
        """P̃(y|x') = Σ_x A_y[x', x], as a likelihood matrix."""
        return DetectorResponse(self.system, self.outcomes, self.matrices.sum(axis=2).T)

    def total(self) -> np.ndarray:
        """Matrix of the nonselective operation ℰ = Σ_y ℰ_y."""
        return self.matrices.sum(axis=0)


@dataclass(frozen=True, eq=False)
class CouplingSpec:
    """Detector prior P_Y and joint transition kernel on X×Y (x-major)."""

    system: SampleSpace
    detector_prior: ProbState
    joint_kernel: TransitionKernel

    def __init__(self, system: SampleSpace, detector_prior: ProbState, joint_kernel: TransitionKernel):
        joint = system.product(detector_prior.space)
        if joint_kernel.source.dimension != joint.dimension or joint_kernel.target.dimension != joint.dimension:
            raise DimensionError(
                f"joint kernel must act on {joint.dimension} joint atoms, got "
                f"{joint_kernel.source.dimension}->{joint_kernel.target.dimension}"
            )
        object.__setattr__(self, "system", system)
        object.__setattr__(self, "detector_prior", detector_prior)
        object.__setattr__(self, "joint_kernel", joint_kernel)

    @property
    def detector(self) -> SampleSpace:
        return self.detector_prior.space


def povm_from_response(resp: DetectorResponse) -> EffectSet:
    """E_y(x) = P(y|x)."""
    return EffectSet(resp.system, resp.detector, list(resp.likelihood.T))


def response_from_effects(effects: EffectSet) -> DetectorResponse:
    """Inverse of :func:`povm_from_response`."""
    return DetectorResponse(effects.system, effects.outcomes, effects.matrix)


def generalized_condition(state: ProbState, effect: Observable) -> ProbState:
    """P'(x) = P(x) E_y(x) / ⟨E_y⟩."""
    _check_space(state.space, effect.space)
    if np.any(effect.values < -NORM_TOL) or np.any(effect.values > 1 + NORM_TOL):
        raise ValidationError("effect values must lie in [0, 1]")
    p = expectation(state, effect)
    if p <= 0.0:
        raise ZeroProbabilityError("effect has zero detection probability")
    return ProbState(state.space, state.probs * effect.values / p)


def sequence_prob(state: ProbState, effects: Sequence[Observable]) -> float:
    """Probability ⟨E_1 E_2 … E_n⟩ of a noninvasive measurement sequence."""
    prod = np.ones(state.space.dimension)
    for e in effects:
        _check_space(state.space, e.space)
        prod = prod * e.values
    return float(state.probs @ prod)


def channel_from_coupling(spec: CouplingSpec) -> OutcomeChannel:
    """A_y[x', x] = Σ_{y'} P_Y(y') D_{x', y'}(x y)."""
    nx = spec.system.dimension
    ny = spec.detector.dimension
    # d[x', y', x, y]
    d = spec.joint_kernel.matrix.reshape(nx, ny, nx, ny)
    a = np.einsum("j,ijkl->lik", spec.detector_prior.probs, d)
    return OutcomeChannel(spec.system, spec.detector, a)


def apply_channel(channel: OutcomeChannel, y, obs: Observable) -> Observable:
    """ℰ_y(F)(x') = Σ_x A_y[x', x] f(x)."""
    _check_space(channel.system, obs.space)
    k = _outcome_index(channel.outcomes, y)
    return Observable(channel.system, channel.matrices[k] @ obs.values)


def channel_update_state(state: ProbState, channel: OutcomeChannel, y) -> ProbState:
    """Schrödinger-picture state after outcome y: P_y(x) ∝ Σ_{x'} P(x') A_y[x', x]."""
    _check_space(channel.system, state.space)
    k = _outcome_index(channel.outcomes, y)
    unnorm = state.probs @ channel.matrices[k]
    total = unnorm.sum()
    if total <= 0.0:
        raise ZeroProbabilityError("outcome has zero probability under this state")
    return ProbState(state.space, unnorm / total)


def _postselection_weights(state: ProbState, channel: OutcomeChannel, z_effect: Observable) -> np.ndarray:
    _check_space(channel.system, state.space)
    _check_space(channel.system, z_effect.space)
    weights = np.einsum("i,yik,k->y", state.probs, channel.matrices, z_effect.values)
    total = weights.sum()
    if total <= 0.0:
        raise ZeroProbabilityError("postselection has zero probability")
    return weights / total


def postselected_distribution(state: ProbState, channel: OutcomeChannel, z_effect: Observable) -> np.ndarray:
    """ₗ⟨y⟩ for every outcome y at once."""
    return _postselection_weights(state, channel, z_effect)


def postselected_cond_prob(state: ProbState, channel: OutcomeChannel, y, z_effect: Observable) -> float:
    """ₗ⟨y⟩ = ⟨ℰ_y(E'_z)⟩ / Σ_{y'} ⟨ℰ_{y'}(E'_z)⟩."""
    k = _outcome_index(channel.outcomes, y)
    return float(_postselection_weights(state, channel, z_effect)[k])


def invasive_bayes_check(state: ProbState, channel: OutcomeChannel, y, z_effect: Observable) -> tuple[float, float]:
    """Both sides of ₗ⟨y⟩ = ⟨z⟩̃_y ⟨Ẽ_y⟩ / ⟨ℰ(E'_z)⟩.

    The left side is evaluated in the observable picture. The right side is
    assembled in the state picture, from the updated state after y and the
    state after the nonselective operation.
    """
    lhs = postselected_cond_prob(state, channel, y, z_effect)
    k = _outcome_index(channel.outcomes, y)
    p_y = float((state.probs @ channel.matrices[k]).sum())
    if p_y <= 0.0:
        raise ZeroProbabilityError("outcome has zero probability; Bayes quotient undefined")
    z_given_y = float(channel_update_state(state, channel, k).probs @ z_effect.values)
    p_z = float((state.probs @ channel.total()) @ z_effect.values)
    if p_z <= 0.0:
        raise ZeroProbabilityError("postselection has zero probability")
    return lhs, z_given_y * p_y / p_z


def weak_family(resp: DetectorResponse, prior: ProbState, eps: float) -> DetectorResponse:
    """Response (1−ε)·P_Y(y) + ε·P(y|x).

    As ε → 0 every effect tends to P_Y(y)·1_X with error exactly linear in ε.
    """
    _check_space(resp.detector, prior.space)
    if not 0.0 <= eps <= 1.0:
        raise ValidationError(f"eps must lie in [0, 1], got {eps}")
    mixed = (1.0 - eps) * prior.probs[None, :] + eps * resp.likelihood
    return DetectorResponse(resp.system, resp.detector, mixed)
