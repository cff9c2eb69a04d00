"""Monte Carlo sampling of detector outcomes and checks of the MSE bound.

Randomness comes from numpy's Philox4x32-10, a counter-based generator.
Stream ``b`` of a run with seed ``s`` is keyed by ``SeedSequence([s, b])``,
so batches are independent and can be drawn in any order with identical
results. Outcomes are drawn by inverse-CDF lookup of ``Generator.random``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .cv_solver import CVSolution
from .detector import EffectSet
from .errors import DimensionError, ValidationError
from .prob_core import ProbState, _check_space

SLACK = 1.2
MIN_BATCHES = 30


def stream(seed: int, index: int = 0) -> np.random.Generator:
    """Generator for stream ``index`` under a 64-bit ``seed``."""
    if not 0 <= int(seed) < 2**64:
        raise ValidationError("seed must be a 64-bit unsigned integer")
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([int(seed), int(index)])))


@dataclass(frozen=True, eq=False)
class OutcomeSample:
    outcomes: np.ndarray
    seed: int
    n: int
    n_outcomes: int

    def __post_init__(self):
        arr = np.asarray(self.outcomes)
        if arr.shape != (self.n,):
            raise DimensionError("outcome array length must equal n")
        if self.n and (arr.min() < 0 or arr.max() >= self.n_outcomes):
            raise ValidationError("outcome index out of range")


@dataclass(frozen=True)
class EstimatorReport:
    mean: float
    empirical_mse: float | None
    bound: float
    within_bound: bool | None
    n: int
    batches: int
    batch_size: int
    mse_checked: bool
    slack: float = SLACK

    def as_dict(self) -> dict:
        return {
            "mean": self.mean,
            "empirical_mse": self.empirical_mse,
            "bound": self.bound,
            "within_bound": self.within_bound,
            "n": self.n,
            "batches": self.batches,
            "batch_size": self.batch_size,
            "mse_checked": self.mse_checked,
            "slack": self.slack,
        }


def outcome_probabilities(state: ProbState, effects: EffectSet) -> np.ndarray:
    _check_space(state.space, effects.system)
    p = effects.matrix.T @ state.probs
    p = np.clip(p, 0.0, None)
    return p / p.sum()


def _draw(probs: np.ndarray, n: int, rng: np.random.Generator) -> np.ndarray:
    cdf = np.cumsum(probs)
    cdf[-1] = 1.0
    return np.searchsorted(cdf, rng.random(n), side="right").astype(np.int64)


def sample_outcomes(state: ProbState, effects: EffectSet, n: int, seed: int = 0, batch: int = 0) -> OutcomeSample:
    """``n`` i.i.d. outcomes with P(y) = ⟨E_y⟩, drawn from stream (seed, batch)."""
    if n < 1:
        raise ValidationError("n must be at least 1")
    probs = outcome_probabilities(state, effects)
    out = _draw(probs, int(n), stream(seed, batch))
    return OutcomeSample(out, int(seed), int(n), len(probs))


def sample_batches(state: ProbState, effects: EffectSet, n: int, batches: int, seed: int = 0) -> OutcomeSample:
    """``batches`` consecutive blocks of ``n`` outcomes, block b from stream (seed, b)."""
    if batches < 1:
        raise ValidationError("batches must be at least 1")
    probs = outcome_probabilities(state, effects)
    parts = [_draw(probs, int(n), stream(seed, b)) for b in range(int(batches))]
    return OutcomeSample(np.concatenate(parts), int(seed), int(n) * int(batches), len(probs))


def estimate_and_check(sample: OutcomeSample, cvs: CVSolution, truth: float, batches: int = 1) -> EstimatorReport:
    """CV-weighted mean and the empirical MSE of per-batch means.

    The sample is split into ``batches`` equal blocks. The MSE of the block
    means about ``truth`` is compared with ‖F_Y‖²/(block size) times
    ``SLACK``. With fewer than 30 blocks, or blocks of a single outcome, the
    check is skipped and ``mse_checked`` is false.
    """
    f = np.asarray(cvs.values, dtype=float)
    if f.shape != (sample.n_outcomes,):
        raise DimensionError("one contextual value per detector outcome is required")
    if batches < 1 or batches > sample.n:
        raise ValidationError("batches must lie between 1 and the sample size")
    size = sample.n // batches
    used = np.asarray(sample.outcomes[: size * batches])
    vals = f[used]
    mean = float(vals.mean())
    bound = cvs.norm_sq / size
    checked = batches >= MIN_BATCHES and size > 1
    if checked:
        block_means = vals.reshape(batches, size).mean(axis=1)
        mse = float(np.mean((block_means - truth) ** 2))
        within = mse <= bound * SLACK
    else:
        mse, within = None, None
    return EstimatorReport(mean, mse, bound, within, size * batches, batches, size, checked)
