"""Command-line front end.

Exit codes: 0 success, 2 invalid input, 3 numerical failure, 4 a check
reported by the command failed.

Detector files are JSON documents::

    {"system_atoms": ["g", "r"],
     "detector_outcomes": ["b", "y"],
     "likelihood": [[0.6, 0.4], [0.2, 0.8]],
     "coupling": {"prior": [...], "joint_kernel": [[...], ...]}}

``likelihood`` has one row per system atom and rows summing to 1 within
1e-9. The optional ``coupling`` gives a detector prior and a row-stochastic
kernel on the joint space (atom (x, y) at index x*|Y| + y); its effective
response must agree with ``likelihood``. Target files are ``{"values": [...]}``
with one value per system atom.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import cv_solver as cvs
from . import detector as det
from . import estimator as est
from . import quantum as q
from . import scenarios as sc
from .errors import NumericalFailure, ValidationError, ZeroProbabilityError
from .prob_core import NORM_TOL, ProbState, SampleSpace, TransitionKernel

EXIT_OK = 0
EXIT_INVALID = 2
EXIT_NUMERICAL = 3
EXIT_CHECK = 4

FILE_ROW_TOL = 1e-9


# ---------------------------------------------------------------------------
# file formats


def _read_json(path) -> dict:
    try:
        doc = json.loads(Path(path).read_text())
    except OSError as exc:
        raise ValidationError(f"cannot read {path}: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise ValidationError(f"{path} is not valid JSON: {exc}") from None
    if not isinstance(doc, dict):
        raise ValidationError(f"{path} must hold a JSON object")
    return doc


def _labels(doc, key) -> list[str]:
    raw = doc.get(key)
    if not isinstance(raw, list) or not all(isinstance(s, str) for s in raw):
        raise ValidationError(f"{key!r} must be a list of strings")
    return raw


def _real_matrix(raw, shape, what) -> np.ndarray:
    try:
        arr = np.array(raw, dtype=float)
    except (TypeError, ValueError):
        raise ValidationError(f"{what} must be a numeric array") from None
    if arr.shape != shape:
        raise ValidationError(f"{what} needs shape {shape}, got {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValidationError(f"{what} has non-finite entries")
    return arr


def _stochastic_rows(arr, what) -> np.ndarray:
    if np.any(arr < 0):
        raise ValidationError(f"{what} has negative entries")
    sums = arr.sum(axis=-1)
    if np.any(np.abs(sums - 1.0) > FILE_ROW_TOL):
        raise ValidationError(f"{what} rows must sum to 1 within {FILE_ROW_TOL:g}, got {sums.tolist()}")
    # leave exact input untouched so written files read back bit-for-bit
    if np.any(np.abs(sums - 1.0) > NORM_TOL):
        arr = arr / sums[..., None]
    return arr


class DetectorFile:
    """Parsed detector document: effects, and a channel when a coupling is given."""

    def __init__(self, effects: det.EffectSet, coupling: det.CouplingSpec | None = None):
        self.effects = effects
        self.coupling = coupling

    @property
    def channel(self) -> det.OutcomeChannel:
        if self.coupling is None:
            return det.OutcomeChannel.noninvasive(self.effects)
        return det.channel_from_coupling(self.coupling)

    @classmethod
    def from_document(cls, doc: dict) -> "DetectorFile":
        xs = SampleSpace(_labels(doc, "system_atoms"))
        ys = SampleSpace(_labels(doc, "detector_outcomes"))
        like = _real_matrix(doc.get("likelihood"), (xs.dimension, ys.dimension), "likelihood")
        like = _stochastic_rows(like, "likelihood")
        effects = det.EffectSet(xs, ys, list(like.T))
        coupling = None
        if doc.get("coupling") is not None:
            raw = doc["coupling"]
            if not isinstance(raw, dict):
                raise ValidationError("coupling must be an object with prior and joint_kernel")
            prior = _stochastic_rows(_real_matrix(raw.get("prior"), (ys.dimension,), "coupling prior"), "coupling prior")
            nj = xs.dimension * ys.dimension
            kern = _real_matrix(raw.get("joint_kernel"), (nj, nj), "joint_kernel")
            kern = _stochastic_rows(kern, "joint_kernel")
            joint = xs.product(ys)
            coupling = det.CouplingSpec(xs, ProbState(ys, prior), TransitionKernel(joint, joint, kern))
            eff = det.channel_from_coupling(coupling).effective_effects().matrix
            if np.max(np.abs(eff - like)) > FILE_ROW_TOL:
                raise ValidationError("coupling's effective response disagrees with likelihood")
        return cls(effects, coupling)

    @classmethod
    def load(cls, path) -> "DetectorFile":
        return cls.from_document(_read_json(path))

    def to_document(self) -> dict:
        doc = {
            "system_atoms": list(self.effects.system.atoms),
            "detector_outcomes": list(self.effects.outcomes.atoms),
            "likelihood": self.effects.matrix.tolist(),
        }
        if self.coupling is not None:
            doc["coupling"] = {
                "prior": self.coupling.detector_prior.probs.tolist(),
                "joint_kernel": self.coupling.joint_kernel.matrix.tolist(),
            }
        return doc

    def save(self, path):
        Path(path).write_text(json.dumps(self.to_document(), indent=2) + "\n")


def write_detector_file(path, effects: det.EffectSet, coupling: det.CouplingSpec | None = None):
    """Write ``effects`` (and optionally a coupling) in the detector file format."""
    DetectorFile(effects, coupling).save(path)


def load_target(path, n_atoms: int) -> np.ndarray:
    doc = _read_json(path)
    return _real_matrix(doc.get("values"), (n_atoms,), "target values")


# ---------------------------------------------------------------------------
# helpers


def _pairs(items, flag) -> dict[str, str]:
    out = {}
    for item in items or ():
        key, sep, val = item.partition("=")
        if not sep or not key:
            raise ValidationError(f"{flag} expects name=value, got {item!r}")
        out[key.strip()] = val.strip()
    return out


def _clean(obj):
    """Replace non-finite floats so the output is strict JSON."""
    if isinstance(obj, float):
        return obj if math.isfinite(obj) else None
    if isinstance(obj, dict):
        return {k: _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    return obj


def _emit(doc, stream=None):
    stream = stream or sys.stdout
    stream.write(json.dumps(_clean(doc), indent=2, allow_nan=False) + "\n")


# ---------------------------------------------------------------------------
# commands


def cmd_solve(args) -> int:
    dfile = DetectorFile.load(args.detector)
    fx = load_target(args.target, dfile.effects.system.dimension)
    s = cvs.build_response_map(dfile.channel.effective_effects())
    pins = {k: _parse_float(v, f"--pin {k}") for k, v in _pairs(args.pin, "--pin").items()}
    if pins:
        for k in pins:
            s.outcomes.index(k)
        sol = cvs.solution_family(s, fx, pins, args.tol)
    else:
        sol = cvs.solve_contextual_values(s, fx, rel_tol=args.tol)
    _emit(sol.as_dict())
    return EXIT_OK


def _parse_float(raw, what) -> float:
    try:
        val = float(raw)
    except ValueError:
        raise ValidationError(f"{what} must be numeric, got {raw!r}") from None
    if not math.isfinite(val):
        raise ValidationError(f"{what} must be finite")
    return val


def cmd_scenario(args) -> int:
    params = _pairs(args.param, "--param")
    rep = sc.run_scenario(sc.ScenarioSpec(args.name, params))
    if args.out:
        rep.write(args.out)
    width = max((len(k) for k in rep.scalars), default=4)
    for key, (val, tag) in rep.scalars.items():
        print(f"{key:<{width}}  {val: .12g}  [{tag}]")
    for key, ok in rep.checks.items():
        print(f"check {key}: {'ok' if ok else 'FAILED'}")
    return EXIT_OK if all(rep.checks.values()) else EXIT_CHECK


def cmd_estimate(args) -> int:
    if args.n < 1:
        raise ValidationError("--n must be at least 1")
    if args.batches < 1:
        raise ValidationError("--batches must be at least 1")
    dfile = DetectorFile.load(args.detector)
    fx = load_target(args.target, dfile.effects.system.dimension)
    eff = dfile.channel.effective_effects()
    sol = cvs.solve_contextual_values(cvs.build_response_map(eff), fx, rel_tol=args.tol)
    if not sol.exact:
        raise NumericalFailure(f"target is outside the detector's range (residual {sol.residual:.3g})")
    state = ProbState.uniform(eff.system)
    sample = est.sample_batches(state, eff, args.n, args.batches, seed=args.seed)
    rep = est.estimate_and_check(sample, sol, float(state.probs @ fx), args.batches)
    doc = rep.as_dict()
    doc["truth"] = float(state.probs @ fx)
    doc["seed"] = args.seed
    if not rep.mse_checked:
        doc["note"] = f"MSE check skipped: needs at least {est.MIN_BATCHES} batches of more than one outcome"
    _emit(doc)
    return EXIT_CHECK if rep.within_bound is False else EXIT_OK


SWEEP_SCHEMAS = {
    "three_box": {
        "box": ("c", sc._choice("box", ("a", "b", "c"))),
        "eps_max": (0.1, sc._num("eps_max", 0, 1, open_lo=True)),
        "eps_min": (1e-3, sc._num("eps_min", 0, 1, open_lo=True)),
        "points": (9, sc._num("points", 2, 200, integer=True)),
    },
    "calcite": {
        "sigma": (1.0, sc._num("sigma", 0, open_lo=True)),
        "profile": ("gaussian", sc._choice("profile", sc.PROFILES)),
        "eps_max": (0.5, sc._num("eps_max", 0, open_lo=True)),
        "eps_min": (0.02, sc._num("eps_min", 0, open_lo=True)),
        "points": (7, sc._num("points", 2, 200, integer=True)),
        "n": (801, sc._num("n", 3, 20001, integer=True)),
    },
}


def _sweep_setup(name, p):
    if name == "three_box":
        xk, zk = sc.three_box_states()
        proj = q.HermitianOperator.diagonal(np.eye(3)["abc".index(p["box"])])
        return sc.three_box_kraus, q.DensityOperator.pure(xk), q.HermitianOperator.projector(zk), proj, None
    profile = cvs.ContinuousProfile.with_std(p["profile"], p["sigma"])
    x = sc.qubit_ket(*sc.CALCITE_PRE)
    z = sc.qubit_ket(*sc.CALCITE_POST)

    def family(eps):
        return sc.calcite_kraus(profile, eps, sc.calcite_grid(profile, eps, p["n"]))

    def reference(eps):
        return sc.calcite_overlap_form(profile, eps, x, z)

    f = q.HermitianOperator.diagonal([1.0, -1.0])
    return family, q.DensityOperator.pure(x), q.HermitianOperator.projector(z), f, reference


def cmd_sweep(args) -> int:
    if args.name not in SWEEP_SCHEMAS:
        raise ValidationError(f"unknown sweep {args.name!r}; choose from {sorted(SWEEP_SCHEMAS)}")
    p = sc._resolve(_pairs(args.param, "--param"), SWEEP_SCHEMAS[args.name])
    if p["eps_min"] >= p["eps_max"]:
        raise ValidationError("parameter 'eps_min' must be below 'eps_max'")
    grid = np.geomspace(p["eps_max"], p["eps_min"], p["points"])
    family, rho, zp, target, reference = _sweep_setup(args.name, p)
    rep = q.weak_limit_sweep(family, rho, zp, target, grid, args.tol)
    doc = rep.as_dict()
    doc["sweep"] = args.name
    doc["params"] = p
    if reference is not None:
        for pt in doc["points"]:
            ref = reference(pt["eps"])
            pt["reference"] = ref
            pt["reference_deviation"] = None if pt["conditioned_average"] is None else abs(pt["conditioned_average"] - ref)
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        with (out / "convergence.csv").open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["eps", "conditioned_average", "error"])
            for pt in rep.points:
                w.writerow([repr(pt.eps), "" if pt.conditioned_average is None else repr(pt.conditioned_average),
                            "" if pt.error is None else repr(pt.error)])
        (out / "summary.json").write_text(json.dumps(_clean(doc), indent=2) + "\n")
    _emit(doc)
    if all(pt.error is None for pt in rep.points):
        return EXIT_NUMERICAL
    return EXIT_OK


# ---------------------------------------------------------------------------
# entry point


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ctxval", description="Contextual values for generalized measurements.")
    sub = parser.add_subparsers(dest="command", required=True)

    def tol(p):
        p.add_argument("--tol", type=float, default=None, help="relative singular-value cutoff for the pseudoinverse")

    p = sub.add_parser("solve", help="solve contextual values for a detector and target")
    p.add_argument("detector")
    p.add_argument("target")
    p.add_argument("--pin", action="append", metavar="NAME=VALUE", help="fix the CV of an outcome (repeatable)")
    tol(p)
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("scenario", help="run a canned scenario")
    p.add_argument("name")
    p.add_argument("--param", action="append", metavar="K=V", help="scenario parameter (repeatable)")
    p.add_argument("--out", help="directory for report.json and curve CSVs")
    p.set_defaults(func=cmd_scenario)

    p = sub.add_parser("estimate", help="sample outcomes and check the MSE bound")
    p.add_argument("detector")
    p.add_argument("target")
    p.add_argument("--n", type=int, default=100_000, help="outcomes per batch")
    p.add_argument("--batches", type=int, default=est.MIN_BATCHES)
    p.add_argument("--seed", type=int, default=0)
    tol(p)
    p.set_defaults(func=cmd_estimate)

    p = sub.add_parser("sweep", help="weak-limit sweep over a descending eps grid")
    p.add_argument("name", help="three_box or calcite")
    p.add_argument("--param", action="append", metavar="K=V")
    p.add_argument("--out", help="directory for convergence.csv and summary.json")
    tol(p)
    p.set_defaults(func=cmd_sweep)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ZeroProbabilityError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except NumericalFailure as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
