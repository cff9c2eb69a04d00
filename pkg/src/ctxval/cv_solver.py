"""Contextual-value inversion.

Given effects E_y and a target observable F_X, contextual values are real
numbers f_Y(y) with Σ_y f_Y(y) E_y = F_X. Writing S[x, y] = E_y(x), the
least-norm solution is f_Y = S⁺ f_X; every other solution adds a null-space
component (I − S⁺S) g. The squared norm Σ f_Y² bounds the variance of the
single-shot estimator.

Continuous detectors whose two responses are shifted copies of one profile
p_Y are handled in closed form, with a trapezoid-grid pseudoinverse as an
independent route.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Mapping, NamedTuple, Sequence

import numpy as np

from . import linalg
from .detector import EffectSet, OutcomeChannel, postselected_distribution
from .errors import (
    DegenerateDetectorError,
    DimensionError,
    NoSolutionError,
    NumericalFailure,
    ValidationError,
)
from .prob_core import NORM_TOL, Observable, ProbState, SampleSpace, _check_space, _frozen

EXACT_TOL = 1e-9


@dataclass(frozen=True, eq=False)
class ResponseMap:
    """S[x, y] = P̃(y|x); maps detector observables to system observables."""

    matrix: np.ndarray
    system: SampleSpace | None = None
    outcomes: SampleSpace | None = None

    def __post_init__(self):
        arr = np.array(self.matrix, dtype=float)
        if arr.ndim != 2:
            raise DimensionError("response map must be a matrix")
        if self.system is not None and arr.shape[0] != self.system.dimension:
            raise DimensionError("response map rows must match the system atoms")
        if self.outcomes is not None and arr.shape[1] != self.outcomes.dimension:
            raise DimensionError("response map columns must match the detector outcomes")
        if not np.all(np.isfinite(arr)) or np.any(arr < 0):
            raise ValidationError("response map entries must be finite and nonnegative")
        sums = arr.sum(axis=1)
        if np.any(np.abs(sums - 1.0) > NORM_TOL):
            raise ValidationError(f"response map rows must sum to 1, got {sums}")
        object.__setattr__(self, "matrix", _frozen(arr))

    @property
    def shape(self):
        return self.matrix.shape

    def apply(self, detector_values) -> np.ndarray:
        """𝒮(F_Y)(x) = Σ_y S[x, y] f_Y(y)."""
        return self.matrix @ np.asarray(detector_values, dtype=float)


@dataclass(frozen=True, eq=False)
class CVSolution:
    values: np.ndarray
    singular_values: np.ndarray
    rank: int
    residual: float
    norm_sq: float
    exact: bool
    null_dim: int
    pinned: Mapping[int, float] = field(default_factory=dict)

    def as_dict(self) -> dict:
        return {
            "contextual_values": [float(v) for v in self.values],
            "singular_values": [float(s) for s in self.singular_values],
            "rank": int(self.rank),
            "residual": float(self.residual),
            "norm_sq": float(self.norm_sq),
            "exact": bool(self.exact),
        }


def build_response_map(effects: EffectSet) -> ResponseMap:
    """S[x, y] = E_y(x)."""
    return ResponseMap(effects.matrix, effects.system, effects.outcomes)


def _matrix_of(s) -> np.ndarray:
    return s.matrix if isinstance(s, ResponseMap) else np.asarray(s, dtype=float)


def _target_values(target, nx: int) -> np.ndarray:
    vals = target.values if isinstance(target, Observable) else np.asarray(target, dtype=float)
    if vals.shape != (nx,):
        raise DimensionError(f"target needs {nx} values, got shape {vals.shape}")
    return np.asarray(vals, dtype=float)


def pseudoinverse(s, rel_tol: float | None = None) -> np.ndarray:
    """Moore-Penrose pseudoinverse S⁺ from the in-house Jacobi SVD."""
    return linalg.pinv(_matrix_of(s), rel_tol)[0]


def _finish(matrix, fx, values, sig, rank, pinned=None) -> CVSolution:
    values = np.asarray(values, dtype=float)
    values.setflags(write=False)
    residual = float(np.linalg.norm(matrix @ values - fx))
    return CVSolution(
        values=values,
        singular_values=_frozen(sig),
        rank=rank,
        residual=residual,
        norm_sq=float(values @ values),
        exact=residual <= EXACT_TOL * (1.0 + float(np.linalg.norm(fx))),
        null_dim=matrix.shape[1] - rank,
        pinned=dict(pinned or {}),
    )


def solve_linear(matrix, fx, rel_tol: float | None = None, homogeneous=None) -> CVSolution:
    """Solve ``matrix @ f = fx`` as f = M⁺fx + (I − M⁺M)g for any real matrix."""
    matrix = np.asarray(matrix, dtype=float)
    fx = np.asarray(fx, dtype=float)
    plus, sig, rank = linalg.pinv(matrix, rel_tol)
    values = plus @ fx
    if homogeneous is not None:
        g = homogeneous.values if isinstance(homogeneous, Observable) else np.asarray(homogeneous, float)
        if g.shape != (matrix.shape[1],):
            raise DimensionError("homogeneous term must have one value per detector outcome")
        values = values + g - plus @ (matrix @ g)
    return _finish(matrix, fx, values, sig, rank)


def solve_contextual_values(s, target, homogeneous=None, rel_tol: float | None = None) -> CVSolution:
    """Contextual values for ``target``; least-norm unless ``homogeneous`` is given.

    Inconsistent targets are not rejected: the least-squares solution is
    returned with ``exact=False``.
    """
    m = _matrix_of(s)
    return solve_linear(m, _target_values(target, m.shape[0]), rel_tol, homogeneous)


def solution_family(s, target, pinned: Mapping, rel_tol: float | None = None) -> CVSolution:
    """Fix some CVs, then take the least-norm solution for the rest.

    ``pinned`` maps outcome index (or label, if ``s`` carries outcome labels)
    to value. An inconsistent set of pins raises :class:`NoSolutionError`.
    """
    m = _matrix_of(s)
    fx = _target_values(target, m.shape[0])
    outcomes = s.outcomes if isinstance(s, ResponseMap) else None
    pins: dict[int, float] = {}
    for key, val in pinned.items():
        if outcomes is not None:
            k = outcomes.index(key)
        else:
            k = int(key)
            if not 0 <= k < m.shape[1]:
                raise ValidationError(f"pinned outcome {key} out of range")
        pins[k] = float(val)
    free = [k for k in range(m.shape[1]) if k not in pins]
    values = np.zeros(m.shape[1])
    for k, v in pins.items():
        values[k] = v
    reduced = fx - m @ values
    if free:
        plus, sig, rank = linalg.pinv(m[:, free], rel_tol)
        values[free] = plus @ reduced
    else:
        sig, rank = np.zeros(0), 0
    sol = _finish(m, fx, values, sig, rank, pins)
    if not sol.exact:
        raise NoSolutionError(f"pinned values {pins} leave no exact solution (residual {sol.residual:.3g})")
    return sol


def variance_bound(cv: CVSolution, n: int | None = None) -> float:
    """‖F_Y‖², or ‖F_Y‖²/n for the mean of n trials."""
    if n is None:
        return cv.norm_sq
    if n < 1:
        raise ValidationError("trial count must be at least 1")
    return cv.norm_sq / n


def moment_contextual_values(s, target, n: int, rel_tol: float | None = None) -> CVSolution:
    """CVs for the n-th power of the target observable."""
    if n < 1 or int(n) != n:
        raise ValidationError("moment order must be a positive integer")
    m = _matrix_of(s)
    fx = _target_values(target, m.shape[0]) ** int(n)
    return solve_linear(m, fx, rel_tol)


def conditioned_average(state: ProbState, channel: OutcomeChannel, cvs: CVSolution, z_effect: Observable) -> float:
    """ₗ⟨F_X⟩ = Σ_y f_Y(y) ₗ⟨y⟩ with postselection on ``z_effect``."""
    if cvs.values.shape != (channel.outcomes.dimension,):
        raise DimensionError("one contextual value per detector outcome is required")
    weights = postselected_distribution(state, channel, z_effect)
    return float(weights @ cvs.values)


# ---------------------------------------------------------------------------
# continuous detectors


@dataclass(frozen=True)
class Grid:
    """Explicit quadrature nodes with trapezoid weights."""

    nodes: np.ndarray
    weights: np.ndarray

    def __init__(self, nodes, weights=None):
        x = np.array(nodes, dtype=float)
        if x.ndim != 1 or x.size < 2:
            raise ValidationError("a grid needs at least two nodes")
        if not np.all(np.diff(x) > 0):
            raise ValidationError("grid nodes must be strictly increasing")
        if weights is None:
            w = np.zeros_like(x)
            dx = np.diff(x)
            w[:-1] += dx / 2
            w[1:] += dx / 2
        else:
            w = np.array(weights, dtype=float)
            if w.shape != x.shape:
                raise DimensionError("one weight per node is required")
        if not np.all(w > 0):
            raise ValidationError("grid weights must be positive")
        object.__setattr__(self, "nodes", _frozen(x))
        object.__setattr__(self, "weights", _frozen(w))

    @classmethod
    def uniform(cls, lo: float, hi: float, n: int) -> "Grid":
        return cls(np.linspace(lo, hi, int(n)))

    def integrate(self, values) -> float:
        return float(self.weights @ np.asarray(values, dtype=float))


def trapezoid(values, nodes) -> float:
    """Trapezoid rule for samples ``values`` at (possibly repeated) ``nodes``."""
    v = np.asarray(values, dtype=float)
    x = np.asarray(nodes, dtype=float)
    return float(np.sum(0.5 * (v[1:] + v[:-1]) * np.diff(x)))


PROFILE_KINDS = ("gaussian", "laplace", "tophat", "custom")


@dataclass(frozen=True, eq=False)
class ContinuousProfile:
    """A detector pointer density p_Y, centred at zero.

    ``width`` is σ for gaussian, the scale for laplace and the half-width for
    tophat. A ``custom`` profile takes a density callable and a quadrature
    grid used for its autocorrelations.
    """

    kind: str
    width: float
    density_fn: Callable | None = None
    quad_grid: Grid | None = None

    def __post_init__(self):
        if self.kind not in PROFILE_KINDS:
            raise ValidationError(f"unknown profile kind {self.kind!r}; expected one of {PROFILE_KINDS}")
        if not (self.width > 0 and math.isfinite(self.width)):
            raise ValidationError(f"profile width must be positive, got {self.width}")
        if self.kind == "custom" and (self.density_fn is None or self.quad_grid is None):
            raise ValidationError("custom profiles need density_fn and quad_grid")

    @classmethod
    def with_std(cls, kind: str, sigma: float) -> "ContinuousProfile":
        """Profile of the given kind whose variance is σ²."""
        scale = {"gaussian": 1.0, "laplace": 1.0 / math.sqrt(2.0), "tophat": math.sqrt(3.0)}
        if kind not in scale:
            raise ValidationError(f"unknown profile kind {kind!r}")
        return cls(kind, sigma * scale[kind])

    @property
    def std(self) -> float:
        if self.kind == "gaussian":
            return self.width
        if self.kind == "laplace":
            return self.width * math.sqrt(2.0)
        if self.kind == "tophat":
            return self.width / math.sqrt(3.0)
        x, w = self.quad_grid.nodes, self.quad_grid.weights
        p = self.density(x)
        mean = w @ (x * p)
        return float(math.sqrt(w @ ((x - mean) ** 2 * p)))

    def density(self, y) -> np.ndarray:
        y = np.asarray(y, dtype=float)
        w = self.width
        if self.kind == "gaussian":
            return np.exp(-0.5 * (y / w) ** 2) / (w * math.sqrt(2 * math.pi))
        if self.kind == "laplace":
            return np.exp(-np.abs(y) / w) / (2 * w)
        if self.kind == "tophat":
            return np.where(np.abs(y) <= w, 1.0 / (2 * w), 0.0)
        return np.asarray(self.density_fn(y), dtype=float)

    def amplitude(self, y) -> np.ndarray:
        """ψ(y) = √p_Y(y), the real pointer wavefunction."""
        return np.sqrt(self.density(y))

    def autocorrelation(self, lag: float) -> float:
        """R(d) = ∫ p(u) p(u + d) du; a = R(0) and b = R(ε_h + ε_v)."""
        d = abs(float(lag))
        w = self.width
        if self.kind == "gaussian":
            return math.exp(-d * d / (4 * w * w)) / (2 * w * math.sqrt(math.pi))
        if self.kind == "laplace":
            return (1 + d / w) * math.exp(-d / w) / (4 * w)
        if self.kind == "tophat":
            return max(0.0, 2 * w - d) / (4 * w * w)
        x = self.quad_grid.nodes
        return self.quad_grid.integrate(self.density(x) * self.density(x + lag))

    def amplitude_overlap(self, lag: float) -> float:
        """∫ ψ(u) ψ(u + d) du for ψ = √p."""
        d = abs(float(lag))
        w = self.width
        if self.kind == "gaussian":
            return math.exp(-d * d / (8 * w * w))
        if self.kind == "laplace":
            return (1 + d / (2 * w)) * math.exp(-d / (2 * w))
        if self.kind == "tophat":
            return max(0.0, 2 * w - d) / (2 * w)
        x = self.quad_grid.nodes
        return self.quad_grid.integrate(self.amplitude(x) * self.amplitude(x + lag))

    def breakpoints(self) -> tuple[float, ...]:
        """Abscissae where the density is not smooth."""
        if self.kind == "laplace":
            return (0.0,)
        if self.kind == "tophat":
            return (-self.width, self.width)
        return ()


class ContinuousCV(NamedTuple):
    """Closed-form CV function f_Y(y) with its autocorrelation constants."""

    function: Callable
    a: float
    b: float
    norm_bound: float
    norm_sq: float


def _check_shifts(eps_h: float, eps_v: float):
    if eps_h + eps_v == 0:
        raise DegenerateDetectorError("shifts with ε_v = −ε_h make both responses identical")


def continuous_cv(profile: ContinuousProfile, shift_plus: float, shift_minus: float, target) -> ContinuousCV:
    """CVs for the detector dP(y|h) = p(y − ε_h) dy, dP(y|v) = p(y + ε_v) dy.

    f_Y = f(h)(v₊ + v₋)/2 + f(v)(v₊ − v₋)/2, with
    v± = [p(y − ε_h) ± p(y + ε_v)] / (a ± b).
    ``norm_bound`` is ∫v₋² = 2/(a − b), the bound for the target (+1, −1);
    ``norm_sq`` is ∫f_Y² for the requested target.
    """
    eps_h, eps_v = float(shift_plus), float(shift_minus)
    _check_shifts(eps_h, eps_v)
    fx = _target_values(target, 2)
    a = profile.autocorrelation(0.0)
    b = profile.autocorrelation(eps_h + eps_v)
    if not a - b > 0:
        raise DegenerateDetectorError(f"a − b = {a - b} leaves no distinguishing signal")
    fh, fv = fx
    plus_c = 0.5 * (fh + fv) / (a + b)
    minus_c = 0.5 * (fh - fv) / (a - b)

    def function(y):
        ph = profile.density(np.asarray(y, dtype=float) - eps_h)
        pv = profile.density(np.asarray(y, dtype=float) + eps_v)
        return plus_c * (ph + pv) + minus_c * (ph - pv)

    norm_sq = 0.5 * (fh + fv) ** 2 / (a + b) + 0.5 * (fh - fv) ** 2 / (a - b)
    return ContinuousCV(function, a, b, 2.0 / (a - b), norm_sq)


def generic_linear_cv(z: float) -> Callable:
    """The comparison curve f_Y(y) = y/z, valid for symmetric profiles only."""
    if z == 0:
        raise DegenerateDetectorError("z = 0 gives no signal")
    return lambda y: np.asarray(y, dtype=float) / z


def grid_cv(profile: ContinuousProfile, shifts, grid: Grid, target, rel_tol: float | None = None) -> CVSolution:
    """Grid pseudoinverse for the shifted-profile detector.

    Column j of the 2×N map holds p_x(y_j)·√w_j, so the least-norm solution
    minimises the trapezoid L² norm. Returned values are the CVs f_Y(y_j) at
    the nodes, directly comparable with :func:`continuous_cv`.
    """
    eps_h, eps_v = (float(s) for s in shifts)
    _check_shifts(eps_h, eps_v)
    fx = _target_values(target, 2)
    spread = 6.0 * profile.std
    lo = min(eps_h, -eps_v) - spread
    hi = max(eps_h, -eps_v) + spread
    x = grid.nodes
    if x[0] > lo + 1e-12 or x[-1] < hi - 1e-12:
        raise ValidationError(f"grid [{x[0]}, {x[-1]}] must cover [{lo}, {hi}] (six standard deviations)")
    root_w = np.sqrt(grid.weights)
    m = np.vstack([profile.density(x - eps_h), profile.density(x + eps_v)]) * root_w
    plus, sig, rank = linalg.pinv(m, rel_tol)
    if rank == 0 or sig[0] < 1e-300:
        raise NumericalFailure("grid response map has no singular value above tolerance")
    g = plus @ fx
    values = g / root_w
    values.setflags(write=False)
    residual = float(np.linalg.norm(m @ g - fx))
    return CVSolution(
        values=values,
        singular_values=_frozen(sig),
        rank=rank,
        residual=residual,
        norm_sq=float(g @ g),  # trapezoid estimate of ∫f_Y²
        exact=residual <= EXACT_TOL * (1.0 + float(np.linalg.norm(fx))),
        null_dim=x.size - rank,
    )
