"""Quantum measurement operations, conditioned averages and weak values.

Operators are dense complex matrices wrapped in small immutable types. A
measurement is a :class:`KrausSet`: for each detector outcome y a list of
Kraus operators M_{y,k}. The Heisenberg action is ℰ_y(F) = Σ_k M†FM and the
effect is E_y = ℰ_y(1). Postselected (generalized ABL) probabilities use
⟨ℰ_y(E'_z)⟩ normalised by the nonselective operation.

Complex numbers never leave this module: every public scalar is real.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, NamedTuple, Sequence

import numpy as np

from . import linalg
from .cv_solver import CVSolution, solve_linear
from .errors import DimensionError, NumericalFailure, ValidationError, ZeroProbabilityError
from .prob_core import ProbState

HERM_FIX_TOL = 1e-10
DIVERGENCE_TOL = 1e-14


def _complex(a) -> np.ndarray:
    arr = np.array(a, dtype=np.complex128)
    if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
        raise DimensionError(f"operators must be square matrices, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValidationError("operator entries must be finite")
    return arr


def _freeze(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=np.complex128)
    a.setflags(write=False)
    return a


def _hermitize(a: np.ndarray, what: str) -> np.ndarray:
    gap = float(np.max(np.abs(a - a.conj().T))) if a.size else 0.0
    if gap > HERM_FIX_TOL:
        raise ValidationError(f"{what} is not Hermitian (deviation {gap:.3g})")
    return 0.5 * (a + a.conj().T)


def _real_trace(a) -> float:
    return float(np.real(np.trace(a)))


def _same_dim(*ops):
    dims = {op.dim for op in ops}
    if len(dims) != 1:
        raise DimensionError(f"operator dimensions differ: {sorted(dims)}")


@dataclass(frozen=True, eq=False)
class HermitianOperator:
    """Hermitian matrix; deviations up to 1e-10 are symmetrised away."""

    matrix: np.ndarray

    def __init__(self, matrix):
        object.__setattr__(self, "matrix", _freeze(_hermitize(_complex(matrix), "operator")))

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    @classmethod
    def identity(cls, dim: int) -> "HermitianOperator":
        return cls(np.eye(dim))

    @classmethod
    def projector(cls, ket) -> "HermitianOperator":
        """|ψ⟩⟨ψ| for the normalised ``ket``."""
        v = np.asarray(ket, dtype=np.complex128)
        nrm = np.linalg.norm(v)
        if nrm == 0:
            raise ValidationError("cannot build a projector from the zero vector")
        v = v / nrm
        return cls(np.outer(v, v.conj()))

    @classmethod
    def diagonal(cls, values) -> "HermitianOperator":
        return cls(np.diag(np.asarray(values, dtype=float)))

    def eig(self):
        """Ascending eigenvalues and eigenvectors (in-house Jacobi)."""
        return linalg.eigh(self.matrix)

    def is_projector(self, tol: float = HERM_FIX_TOL) -> bool:
        return bool(np.max(np.abs(self.matrix @ self.matrix - self.matrix)) <= tol)

    def __add__(self, other):
        _same_dim(self, other)
        return HermitianOperator(self.matrix + other.matrix)

    def __sub__(self, other):
        _same_dim(self, other)
        return HermitianOperator(self.matrix - other.matrix)

    def scale(self, c: float) -> "HermitianOperator":
        return HermitianOperator(float(c) * self.matrix)

    def power(self, n: int) -> "HermitianOperator":
        return HermitianOperator(np.linalg.matrix_power(self.matrix, int(n)))


@dataclass(frozen=True, eq=False)
class UnitaryRotor:
    """Unitary U; rotations act on operators as 𝒰(A) = U†AU."""

    matrix: np.ndarray

    def __init__(self, matrix):
        u = _complex(matrix)
        gap = float(np.max(np.abs(u.conj().T @ u - np.eye(u.shape[0]))))
        if gap > HERM_FIX_TOL:
            raise ValidationError(f"matrix is not unitary (deviation {gap:.3g})")
        object.__setattr__(self, "matrix", _freeze(u))

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    @classmethod
    def qubit(cls, alpha: float, beta: float, gamma: float) -> "UnitaryRotor":
        """U = Rz(α) Ry(β) Rz(γ) with Rz(t) = diag(e^{it/2}, e^{-it/2}).

        Its first row is e^{iα/2}(e^{iγ/2}cos(β/2), e^{-iγ/2}sin(β/2)), so
        U†|h⟩⟨h|U is the projector with Bloch angles (β, γ).
        """
        def rz(t):
            return np.diag([np.exp(0.5j * t), np.exp(-0.5j * t)])

        c, s = math.cos(beta / 2), math.sin(beta / 2)
        ry = np.array([[c, s], [-s, c]], dtype=np.complex128)
        return cls(rz(alpha) @ ry @ rz(gamma))

    def rotate(self, op: HermitianOperator) -> HermitianOperator:
        _same_dim(self, op)
        u = self.matrix
        return HermitianOperator(u.conj().T @ op.matrix @ u)

    def rotate_state(self, rho: "DensityOperator") -> "DensityOperator":
        _same_dim(self, rho)
        u = self.matrix
        return DensityOperator(u.conj().T @ rho.matrix @ u)

    @staticmethod
    def direct_sum(blocks: Sequence["UnitaryRotor"]) -> "UnitaryRotor":
        """Block-diagonal U_1 ⊕ U_2 ⊕ …"""
        n = sum(b.dim for b in blocks)
        out = np.zeros((n, n), dtype=np.complex128)
        i = 0
        for b in blocks:
            out[i : i + b.dim, i : i + b.dim] = b.matrix
            i += b.dim
        return UnitaryRotor(out)


@dataclass(frozen=True, eq=False)
class DensityOperator:
    """Positive semidefinite, unit-trace Hermitian matrix."""

    matrix: np.ndarray

    def __init__(self, matrix):
        rho = _hermitize(_complex(matrix), "density operator")
        tr = _real_trace(rho)
        if abs(tr - 1.0) > HERM_FIX_TOL:
            raise ValidationError(f"density operator has trace {tr}, not 1")
        vals, vecs = linalg.eigh(rho)
        if vals[0] < -HERM_FIX_TOL:
            raise ValidationError(f"density operator is not positive (min eigenvalue {vals[0]:.3g})")
        if vals[0] < 0:
            vals = np.clip(vals, 0.0, None)
            rho = (vecs * vals) @ vecs.conj().T
        rho = rho / _real_trace(rho)
        object.__setattr__(self, "matrix", _freeze(0.5 * (rho + rho.conj().T)))

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    @classmethod
    def pure(cls, ket) -> "DensityOperator":
        return cls(HermitianOperator.projector(ket).matrix)

    @classmethod
    def maximally_mixed(cls, dim: int) -> "DensityOperator":
        return cls(np.eye(dim) / dim)

    @classmethod
    def qubit(cls, theta: float, beta: float, gamma: float) -> "DensityOperator":
        """½[[1 + cosβ cosθ, e^{-iγ} sinβ cosθ], [c.c., 1 − cosβ cosθ]].

        θ sets the purity (θ = 0 is pure); (β, γ) orient the polarization.
        """
        ct = math.cos(theta)
        off = np.exp(-1j * gamma) * math.sin(beta) * ct
        return cls(0.5 * np.array([[1 + math.cos(beta) * ct, off], [np.conj(off), 1 - math.cos(beta) * ct]]))

    def as_operator(self) -> HermitianOperator:
        return HermitianOperator(self.matrix)


@dataclass(frozen=True)
class QubitObservableParams:
    """Qubit observable with eigenvalues a, b in the framework (β, γ)."""

    a: float
    b: float
    beta: float
    gamma: float

    def operator(self) -> HermitianOperator:
        m = 0.5 * (self.a + self.b)
        d = 0.5 * (self.a - self.b)
        off = d * np.exp(-1j * self.gamma) * math.sin(self.beta)
        return HermitianOperator(
            [[m + d * math.cos(self.beta), off], [np.conj(off), m - d * math.cos(self.beta)]]
        )


@dataclass(frozen=True, eq=False)
class KrausSet:
    """Kraus operators M_{y,k} for each detector outcome y.

    ``phases`` (same nesting as ``operators``) multiply each operator by
    e^{iφ}; they change no effect but do change the state disturbance.
    """

    operators: tuple
    labels: tuple = field(default=())
    phases: tuple = field(default=())

    def __init__(self, operators, labels: Sequence[str] | None = None, phases=None):
        ops = []
        for y, group in enumerate(operators):
            mats = [_complex(m) for m in group]
            if not mats:
                raise ValidationError(f"outcome {y} has no Kraus operators")
            ops.append(mats)
        if not ops:
            raise ValidationError("a Kraus set needs at least one outcome")
        dim = ops[0][0].shape[0]
        if any(m.shape != (dim, dim) for g in ops for m in g):
            raise DimensionError("all Kraus operators must share one dimension")
        if phases is None:
            phase_tuple = tuple(tuple(0.0 for _ in g) for g in ops)
        else:
            phase_tuple = tuple(tuple(float(p) for p in g) for g in phases)
            if [len(g) for g in phase_tuple] != [len(g) for g in ops]:
                raise DimensionError("phases must match the Kraus operator layout")
            ops = [[np.exp(1j * p) * m for p, m in zip(pg, g)] for pg, g in zip(phase_tuple, ops)]
        total = sum(m.conj().T @ m for g in ops for m in g)
        gap = float(np.max(np.abs(total - np.eye(dim))))
        if gap > HERM_FIX_TOL:
            raise ValidationError(f"Kraus operators are not complete (Σ M†M deviates by {gap:.3g})")
        if labels is None:
            labels = tuple(str(i) for i in range(len(ops)))
        labels = tuple(str(s) for s in labels)
        if len(labels) != len(ops) or len(set(labels)) != len(labels):
            raise ValidationError("outcome labels must be unique, one per outcome")
        object.__setattr__(self, "operators", tuple(tuple(_freeze(m) for m in g) for g in ops))
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "phases", phase_tuple)

    @property
    def dim(self) -> int:
        return self.operators[0][0].shape[0]

    @property
    def n_outcomes(self) -> int:
        return len(self.operators)

    def index(self, y) -> int:
        if isinstance(y, (int, np.integer)):
            if not 0 <= int(y) < self.n_outcomes:
                raise ValidationError(f"outcome index {y} out of range")
            return int(y)
        try:
            return self.labels.index(str(y))
        except ValueError:
            raise ValidationError(f"unknown outcome {y!r}") from None

    def effect(self, y) -> HermitianOperator:
        return HermitianOperator(sum(m.conj().T @ m for m in self.operators[self.index(y)]))

    def effects(self) -> list[HermitianOperator]:
        return [self.effect(y) for y in range(self.n_outcomes)]

    def merge(self, groups: Sequence[Sequence]) -> "KrausSet":
        """Coarse-grain outcomes: each group becomes one outcome."""
        seen = [self.index(y) for g in groups for y in g]
        if sorted(seen) != list(range(self.n_outcomes)):
            raise ValidationError("merge groups must partition the outcomes")
        ops = [[m for y in g for m in self.operators[self.index(y)]] for g in groups]
        labels = ["+".join(self.labels[self.index(y)] for y in g) for g in groups]
        return KrausSet(ops, labels)


# ---------------------------------------------------------------------------
# operations


def born_probability(rho: DensityOperator, effect: HermitianOperator) -> float:
    """Tr(ρE), clamped into [0, 1] when within tolerance of it."""
    _same_dim(rho, effect)
    p = complex(np.trace(rho.matrix @ effect.matrix))
    if abs(p.imag) > 1e-12 * max(1.0, abs(p.real)):
        raise NumericalFailure(f"Born probability has imaginary part {p.imag:.3g}")
    val = p.real
    if -HERM_FIX_TOL <= val < 0.0:
        val = 0.0
    elif 1.0 < val <= 1.0 + HERM_FIX_TOL:
        val = 1.0
    return val


def expectation_q(rho: DensityOperator, op: HermitianOperator) -> float:
    """⟨F⟩ = Tr(ρF) for an arbitrary Hermitian F."""
    _same_dim(rho, op)
    return _real_trace(rho.matrix @ op.matrix)


def luders_update(rho: DensityOperator, y: HermitianOperator) -> DensityOperator:
    """ρ → yρy / Tr(ρy) for a projector y."""
    _same_dim(rho, y)
    if not y.is_projector():
        raise ValidationError("Lüders update requires a projector")
    p = _real_trace(rho.matrix @ y.matrix)
    if p <= 0.0:
        raise ZeroProbabilityError("projector has zero probability in this state")
    return DensityOperator(y.matrix @ rho.matrix @ y.matrix / p)


def apply_operation(kraus: KrausSet, y, target):
    """ℰ_y applied to an observable (Heisenberg) or a density (Schrödinger).

    Observables map to ``Σ M†FM``. Densities map to the normalised state
    ``Σ MρM† / Tr(·)``; use :func:`apply_operation_unnormalized` for the raw
    positive operator.
    """
    if isinstance(target, DensityOperator):
        out = apply_operation_unnormalized(kraus, y, target)
        p = _real_trace(out)
        if p <= 0.0:
            raise ZeroProbabilityError("outcome has zero probability in this state")
        return DensityOperator(out / p)
    if isinstance(target, HermitianOperator):
        _same_dim(kraus, target)
        f = target.matrix
        return HermitianOperator(sum(m.conj().T @ f @ m for m in kraus.operators[kraus.index(y)]))
    raise ValidationError("apply_operation expects a HermitianOperator or DensityOperator")


def apply_operation_unnormalized(kraus: KrausSet, y, rho: DensityOperator) -> np.ndarray:
    _same_dim(kraus, rho)
    return sum(m @ rho.matrix @ m.conj().T for m in kraus.operators[kraus.index(y)])


def kraus_from_coupling(
    u: UnitaryRotor,
    detector_prior: ProbState,
    outcome_projectors: Sequence,
    labels: Sequence[str] | None = None,
    phases=None,
) -> KrausSet:
    """Kraus operators M_{y,(k,y')} = √P'(y') ⟨k|U|y'⟩ from a joint unitary.

    The joint space is ordered system-major, detector-minor. Each outcome
    projector P_y on the detector is expanded in an orthonormal basis {|k⟩}
    of its range, so rank-1 projectors give exactly one operator per y'.
    Preparations with P'(y') = 0 contribute nothing and are skipped.
    """
    dy = detector_prior.space.dimension
    if u.dim % dy:
        raise DimensionError(f"joint dimension {u.dim} is not a multiple of detector dimension {dy}")
    dx = u.dim // dy
    projs = [p if isinstance(p, HermitianOperator) else HermitianOperator(p) for p in outcome_projectors]
    for p in projs:
        if p.dim != dy:
            raise DimensionError("outcome projectors must act on the detector space")
        if not p.is_projector():
            raise ValidationError("outcome operators must be projectors")
    total = sum(p.matrix for p in projs)
    if np.max(np.abs(total - np.eye(dy))) > HERM_FIX_TOL:
        raise ValidationError("outcome projectors must sum to the identity")
    u4 = u.matrix.reshape(dx, dy, dx, dy)
    ops = []
    for p in projs:
        vals, vecs = linalg.eigh(p.matrix)
        basis = [vecs[:, i] for i in range(dy) if vals[i] > 0.5]
        group = []
        for k in basis:
            for yp in range(dy):
                w = detector_prior.probs[yp]
                if w == 0.0:
                    continue
                group.append(math.sqrt(w) * np.einsum("a,iaj->ij", k.conj(), u4[:, :, :, yp]))
        ops.append(group)
    return KrausSet(ops, labels, phases)


def _postselection_weights(rho: DensityOperator, kraus: KrausSet, z_effect: HermitianOperator) -> np.ndarray:
    _same_dim(rho, kraus, z_effect)
    z = z_effect.matrix
    w = np.array(
        [_real_trace(apply_operation_unnormalized(kraus, y, rho) @ z) for y in range(kraus.n_outcomes)]
    )
    w = np.where((w < 0) & (w > -1e-15), 0.0, w)
    total = w.sum()
    if total <= 0.0:
        raise ZeroProbabilityError("postselection has zero probability")
    return w / total


def postselected_distribution_q(rho, kraus, z_effect) -> np.ndarray:
    """Generalized ABL probabilities ₗ⟨y⟩ for every outcome."""
    return _postselection_weights(rho, kraus, z_effect)


def postselected_probability(rho: DensityOperator, kraus: KrausSet, y, z_effect: HermitianOperator) -> float:
    """ₗ⟨y⟩ = Tr(ρ ℰ_y(E'_z)) / Σ_{y''} Tr(ρ ℰ_{y''}(E'_z))."""
    return float(_postselection_weights(rho, kraus, z_effect)[kraus.index(y)])


def quantum_bayes_check(rho, kraus, y, z_effect) -> tuple[float, float]:
    """Both sides of ₗ⟨y⟩ = ⟨E'_z⟩_{ρ_y} ⟨E_y⟩ / ⟨ℰ(E'_z)⟩.

    The left side uses the Heisenberg picture, the right side the normalised
    post-measurement state ρ_y and the nonselective state.
    """
    lhs = postselected_probability(rho, kraus, y, z_effect)
    p_y = born_probability(rho, kraus.effect(y))
    rho_y = apply_operation(kraus, y, rho)
    z_given_y = expectation_q(rho_y, z_effect)
    nonsel = sum(apply_operation_unnormalized(kraus, k, rho) for k in range(kraus.n_outcomes))
    p_z = _real_trace(nonsel @ z_effect.matrix)
    if p_z <= 0.0:
        raise ZeroProbabilityError("postselection has zero probability")
    return lhs, z_given_y * p_y / p_z


def _vectorize(op: np.ndarray) -> np.ndarray:
    return np.concatenate([op.real.ravel(), op.imag.ravel()])


def solve_quantum_cvs(kraus: KrausSet, target: HermitianOperator, rel_tol: float | None = None) -> CVSolution:
    """Least-norm CVs with Σ_y f_Y(y) E_y = F, solved over real matrix entries."""
    _same_dim(kraus, target)
    m = np.column_stack([_vectorize(e.matrix) for e in kraus.effects()])
    return solve_linear(m, _vectorize(target.matrix), rel_tol)


def conditioned_average_q(rho, kraus: KrausSet, cvs: CVSolution, z_effect) -> float:
    """Σ_y f_Y(y) ₗ⟨y⟩; always inside [min f_Y, max f_Y]."""
    if cvs.values.shape != (kraus.n_outcomes,):
        raise DimensionError("one contextual value per outcome is required")
    return float(_postselection_weights(rho, kraus, z_effect) @ cvs.values)


class WeakValue(NamedTuple):
    value: float
    divergent: bool


def weak_value(rho: DensityOperator, f: HermitianOperator, z_effect: HermitianOperator) -> WeakValue:
    """⟨E'_z F + F E'_z⟩ / 2⟨E'_z⟩.

    ``divergent`` is set when ⟨E'_z⟩ < 1e-14; the quotient is still returned.
    An exactly zero postselection probability raises.
    """
    _same_dim(rho, f, z_effect)
    z, fm, r = z_effect.matrix, f.matrix, rho.matrix
    den = _real_trace(r @ z)
    if den <= 0.0:
        raise ZeroProbabilityError("postselection probability is zero; weak value undefined")
    num = 0.5 * _real_trace(r @ (z @ fm + fm @ z))
    return WeakValue(num / den, den < DIVERGENCE_TOL)


def pure_weak_value(x_ket, f: HermitianOperator, z_ket) -> WeakValue:
    """Re ⟨z|F|x⟩/⟨z|x⟩ for normalised kets."""
    x = np.asarray(x_ket, dtype=np.complex128)
    z = np.asarray(z_ket, dtype=np.complex128)
    x = x / np.linalg.norm(x)
    z = z / np.linalg.norm(z)
    amp = complex(np.vdot(z, x))
    if amp == 0:
        raise ZeroProbabilityError("pre- and postselection are orthogonal")
    return WeakValue((complex(np.vdot(z, f.matrix @ x)) / amp).real, abs(amp) ** 2 < DIVERGENCE_TOL)


def eigenprojectors(op: HermitianOperator, tol: float = 1e-10):
    """Distinct eigenvalues of ``op`` and the projectors onto their eigenspaces."""
    vals, vecs = op.eig()
    scale = max(1.0, float(np.max(np.abs(vals))))
    groups: list[list[int]] = []
    for i, v in enumerate(vals):
        if groups and abs(v - vals[groups[-1][0]]) <= tol * scale:
            groups[-1].append(i)
        else:
            groups.append([i])
    out = []
    for g in groups:
        vg = vecs[:, g]
        out.append((float(np.mean(vals[g])), vg @ vg.conj().T))
    return out


def strong_conditioned_average(rho: DensityOperator, f: HermitianOperator, z: HermitianOperator) -> float:
    """Projective measurement of F between preparation ρ and postselection z.

    Σ_k f_k Tr(z Π_k ρ Π_k) / Σ_k Tr(z Π_k ρ Π_k) over eigenspaces Π_k of F.
    For nondegenerate F this is Σ_x f(x)⟨x|ρ|x⟩⟨x|z|x⟩ / Σ_x ⟨x|ρ|x⟩⟨x|z|x⟩.
    """
    _same_dim(rho, f, z)
    num = den = 0.0
    for val, proj in eigenprojectors(f):
        w = _real_trace(z.matrix @ proj @ rho.matrix @ proj)
        num += val * w
        den += w
    if den <= 0.0:
        raise ZeroProbabilityError("postselection has zero probability after the strong measurement")
    return num / den


def sequence_probability(rho: DensityOperator, kraus: KrausSet, outcomes: Sequence) -> float:
    """Probability of obtaining ``outcomes`` in repeated use of one detector."""
    state = rho.matrix
    for y in outcomes:
        state = sum(m @ state @ m.conj().T for m in kraus.operators[kraus.index(y)])
    return _real_trace(state)


def sequence_moment(rho: DensityOperator, kraus: KrausSet, cvs: CVSolution, n: int) -> float:
    """Σ_{y1..yn} f(y1)⋯f(yn) P(y1, …, yn) by exhaustive enumeration."""
    if n < 1:
        raise ValidationError("sequence length must be at least 1")
    f = cvs.values
    states = [(1.0, rho.matrix)]
    for _ in range(int(n)):
        nxt = []
        for weight, st in states:
            for y in range(kraus.n_outcomes):
                new = sum(m @ st @ m.conj().T for m in kraus.operators[y])
                nxt.append((weight * f[y], new))
        states = nxt
    return float(sum(w * _real_trace(st) for w, st in states))


# ---------------------------------------------------------------------------
# weak-limit sweep


@dataclass
class SweepPoint:
    eps: float
    conditioned_average: float | None
    error: float | None
    message: str = ""


@dataclass
class SweepReport:
    weak_value: float
    divergent_weak_value: bool
    points: list
    fitted_order: float | None
    fit_intercept: float | None
    identity_deviation: float
    commutator_state: float
    commutator_postselection: float
    divergence_detected: bool
    notes: list = field(default_factory=list)

    def as_dict(self) -> dict:
        return {
            "weak_value": self.weak_value,
            "divergent_weak_value": self.divergent_weak_value,
            "fitted_order": self.fitted_order,
            "fit_intercept": self.fit_intercept,
            "identity_deviation": self.identity_deviation,
            "commutator_state": self.commutator_state,
            "commutator_postselection": self.commutator_postselection,
            "divergence_detected": self.divergence_detected,
            "points": [
                {"eps": p.eps, "conditioned_average": p.conditioned_average, "error": p.error, "message": p.message}
                for p in self.points
            ],
            "notes": list(self.notes),
        }


def fit_loglog_order(eps, err) -> tuple[float | None, float | None]:
    """Least-squares slope and intercept of log(err) against log(eps)."""
    e = np.asarray(eps, dtype=float)
    r = np.asarray(err, dtype=float)
    ok = (e > 0) & (r > 0) & np.isfinite(r)
    if np.count_nonzero(ok) < 2:
        return None, None
    slope, intercept = np.polyfit(np.log(e[ok]), np.log(r[ok]), 1)
    return float(slope), float(intercept)


def _identity_deviation(kraus: KrausSet) -> float:
    worst = 0.0
    d = kraus.dim
    for g in kraus.operators:
        for m in g:
            nrm = np.linalg.norm(m)
            if nrm == 0:
                continue
            worst = max(worst, float(np.linalg.norm(m - np.trace(m) / d * np.eye(d)) / nrm))
    return worst


def weak_limit_sweep(
    family: Callable[[float], KrausSet],
    rho: DensityOperator,
    z_effect: HermitianOperator,
    target: HermitianOperator,
    eps_grid: Sequence[float],
    rel_tol: float | None = None,
) -> SweepReport:
    """Conditioned averages along a weakening family and their approach to the weak value.

    For each ε the CVs are solved against the family's effects and the
    postselected conditioned average is formed. Failures at individual points
    are recorded on the point and the sweep continues. At the smallest ε the
    report records how far the Kraus operators are from multiples of the
    identity and their largest commutators with ρ and with E'_z.
    """
    grid = [float(e) for e in eps_grid]
    if not grid:
        raise ValidationError("eps_grid must not be empty")
    if any(b >= a for a, b in zip(grid, grid[1:])):
        raise ValidationError("eps_grid must be strictly descending")
    wv = weak_value(rho, target, z_effect)
    points = []
    last_kraus = None
    for e in grid:
        try:
            kraus = family(e)
            cvs = solve_quantum_cvs(kraus, target, rel_tol)
            if not cvs.exact:
                raise NumericalFailure(f"no exact CVs at eps={e} (residual {cvs.residual:.3g})")
            ca = conditioned_average_q(rho, kraus, cvs, z_effect)
            points.append(SweepPoint(e, ca, abs(ca - wv.value)))
            last_kraus = kraus
        except (NumericalFailure, ZeroProbabilityError, ValidationError) as exc:
            points.append(SweepPoint(e, None, None, str(exc)))
    good = [p for p in points if p.error is not None]
    order, icpt = fit_loglog_order([p.eps for p in good], [p.error for p in good])
    # growth of the error over the last half of the sweep signals divergence
    tail = [p.error for p in good[len(good) // 2 :]]
    divergence = len(tail) >= 2 and tail[-1] > 2 * tail[0] and tail[-1] > 1e-9
    dev = cs = cz = float("nan")
    if last_kraus is not None:
        dev = _identity_deviation(last_kraus)
        ms = [m for g in last_kraus.operators for m in g]
        cs = max(float(np.linalg.norm(m @ rho.matrix - rho.matrix @ m)) for m in ms)
        cz = max(float(np.linalg.norm(m @ z_effect.matrix - z_effect.matrix @ m)) for m in ms)
    notes = []
    if len(good) < len(points):
        notes.append(f"{len(points) - len(good)} sweep point(s) failed")
    return SweepReport(wv.value, wv.divergent, points, order, icpt, dev, cs, cz, divergence, notes)
