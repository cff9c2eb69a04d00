import math

import numpy as np
import pytest
import scipy.integrate
import scipy.linalg

from ctxval import cv_solver as cvs
from ctxval import detector as det
from ctxval.errors import DegenerateDetectorError, DimensionError, NoSolutionError, ValidationError
from ctxval.prob_core import Observable, ProbState, SampleSpace
from ctxval.scenarios import invasive_marble_coupling, marble_effects

X = SampleSpace(["g", "r"])
REDUNDANT = [[0.5, 0.3, 0.2], [0.1, 0.7, 0.2]]


def redundant_map():
    resp = det.DetectorResponse(X, SampleSpace(["b", "y", "p"]), REDUNDANT)
    return cvs.build_response_map(det.povm_from_response(resp))


def test_marble_cvs_and_norm():
    sol = cvs.solve_contextual_values(cvs.build_response_map(marble_effects()), [1.0, -1.0])
    np.testing.assert_allclose(sol.values, [3.0, -2.0], atol=1e-12)
    assert sol.norm_sq == 13.0
    assert sol.exact and sol.rank == 2 and sol.null_dim == 0
    assert cvs.variance_bound(sol, 100) == pytest.approx(0.13)
    np.testing.assert_allclose(sol.singular_values, np.linalg.svd([[0.6, 0.4], [0.2, 0.8]], compute_uv=False))


def test_as_dict_keys():
    sol = cvs.solve_linear(np.eye(2), [1, 2])
    assert set(sol.as_dict()) == {"contextual_values", "singular_values", "rank", "residual", "norm_sq", "exact"}


def test_redundant_pseudoinverse_and_least_norm():
    s = redundant_map()
    np.testing.assert_allclose(cvs.pseudoinverse(s), scipy.linalg.pinv(np.array(REDUNDANT)), atol=1e-13)
    sol = cvs.solve_contextual_values(s, [1.0, -1.0])
    np.testing.assert_allclose(sol.values, [55 / 18, -35 / 18, 5 / 18], atol=1e-12)
    assert sol.null_dim == 1


def test_homogeneous_term_leaves_target():
    s = redundant_map()
    sol = cvs.solve_contextual_values(s, [1.0, -1.0], homogeneous=[1.0, 2.0, 3.0])
    assert sol.exact
    base = cvs.solve_contextual_values(s, [1.0, -1.0])
    assert sol.norm_sq > base.norm_sq
    with pytest.raises(DimensionError):
        cvs.solve_contextual_values(s, [1.0, -1.0], homogeneous=[1.0])


def test_solution_family_pins():
    s = redundant_map()
    for b in (0.0, 55 / 18, 10.0):
        fam = cvs.solution_family(s, [1.0, -1.0], {"b": b})
        np.testing.assert_allclose(fam.values, [b, b - 5, 12.5 - 4 * b], atol=1e-12)
        assert fam.norm_sq == pytest.approx(18 * b * b - 110 * b + 181.25)
    by_index = cvs.solution_family(s.matrix, [1.0, -1.0], {0: 3.125})
    np.testing.assert_allclose(by_index.values, [3.125, -1.875, 0.0], atol=1e-12)


def test_solution_family_inconsistent_pins():
    s = redundant_map()
    with pytest.raises(NoSolutionError):
        cvs.solution_family(s, [1.0, -1.0], {"b": 1.0, "y": 1.0})
    with pytest.raises(ValidationError):
        cvs.solution_family(s, [1.0, -1.0], {"q": 1.0})
    with pytest.raises(ValidationError):
        cvs.solution_family(s.matrix, [1.0, -1.0], {7: 1.0})


def test_inconsistent_target_is_flagged():
    # two outcomes with identical response: only constant targets are reachable
    resp = det.DetectorResponse(X, SampleSpace(["u", "d"]), [[0.5, 0.5], [0.5, 0.5]])
    sol = cvs.solve_contextual_values(cvs.build_response_map(det.povm_from_response(resp)), [1.0, -1.0])
    assert not sol.exact and sol.rank == 1


def test_response_map_validation():
    with pytest.raises(ValidationError):
        cvs.ResponseMap(np.array([[0.5, 0.4], [0.2, 0.8]]), X, SampleSpace(["b", "y"]))
    with pytest.raises(DimensionError):
        cvs.solve_contextual_values(redundant_map(), [1.0, 2.0, 3.0])


def test_moment_cvs():
    s = cvs.build_response_map(marble_effects())
    m2 = cvs.moment_contextual_values(s, [1.0, -1.0], 2)
    np.testing.assert_allclose(s.apply(m2.values), [1.0, 1.0], atol=1e-12)
    m3 = cvs.moment_contextual_values(s, [2.0, -1.0], 3)
    np.testing.assert_allclose(s.apply(m3.values), [8.0, -1.0], atol=1e-12)
    with pytest.raises(ValidationError):
        cvs.moment_contextual_values(s, [1.0, -1.0], 0)


def test_conditioned_average_invasive_marble():
    ch = det.channel_from_coupling(invasive_marble_coupling())
    sol = cvs.solve_contextual_values(cvs.build_response_map(ch.effective_effects()), [1.0, -1.0])
    g = Observable(X, [1.0, 0.0])
    assert cvs.conditioned_average(ProbState.point(X, "g"), ch, sol, g) == pytest.approx(1.125, abs=1e-12)


# ---------------------------------------------------------------------------
# continuous profiles


@pytest.mark.parametrize("kind", ["gaussian", "laplace", "tophat"])
def test_profiles_normalized_with_unit_variance(kind):
    prof = cvs.ContinuousProfile.with_std(kind, 1.0)
    assert prof.std == pytest.approx(1.0)
    pts = list(prof.breakpoints()) or None
    total = scipy.integrate.quad(prof.density, -40, 40, points=pts, limit=200)[0]
    var = scipy.integrate.quad(lambda y: y * y * prof.density(y), -40, 40, points=pts, limit=200)[0]
    assert total == pytest.approx(1.0, abs=1e-9)
    assert var == pytest.approx(1.0, abs=1e-8)


@pytest.mark.parametrize("kind", ["gaussian", "laplace", "tophat"])
@pytest.mark.parametrize("lag", [0.0, 0.3, 1.7, 4.0])
def test_autocorrelation_and_overlap_against_quadrature(kind, lag):
    prof = cvs.ContinuousProfile.with_std(kind, 0.8)
    pts = sorted({*prof.breakpoints(), *(b - lag for b in prof.breakpoints())}) or None
    r = scipy.integrate.quad(lambda u: prof.density(u) * prof.density(u + lag), -30, 30, points=pts, limit=400)[0]
    o = scipy.integrate.quad(lambda u: prof.amplitude(u) * prof.amplitude(u + lag), -30, 30, points=pts, limit=400)[0]
    assert prof.autocorrelation(lag) == pytest.approx(r, abs=1e-9)
    assert prof.amplitude_overlap(lag) == pytest.approx(o, abs=1e-9)


def test_custom_profile_uses_quadrature():
    grid = cvs.Grid.uniform(-12, 12, 4001)
    gauss = cvs.ContinuousProfile("gaussian", 1.0)
    custom = cvs.ContinuousProfile("custom", 1.0, gauss.density, grid)
    assert custom.autocorrelation(0.5) == pytest.approx(gauss.autocorrelation(0.5), abs=1e-10)
    assert custom.std == pytest.approx(1.0, abs=1e-8)
    with pytest.raises(ValidationError):
        cvs.ContinuousProfile("custom", 1.0)
    with pytest.raises(ValidationError):
        cvs.ContinuousProfile("cauchy", 1.0)


def test_continuous_cv_expands_target():
    prof = cvs.ContinuousProfile("gaussian", 1.0)
    cv = cvs.continuous_cv(prof, 0.7, 0.7, [2.0, -0.5])
    for shift, want in ((0.7, 2.0), (-0.7, -0.5)):
        got = scipy.integrate.quad(lambda y: cv.function(y) * prof.density(y - shift), -20, 20)[0]
        assert got == pytest.approx(want, abs=1e-9)
    norm = scipy.integrate.quad(lambda y: cv.function(y) ** 2, -20, 20)[0]
    assert cv.norm_sq == pytest.approx(norm, rel=1e-9)


def test_continuous_cv_degenerate():
    prof = cvs.ContinuousProfile("gaussian", 1.0)
    with pytest.raises(DegenerateDetectorError):
        cvs.continuous_cv(prof, 0.5, -0.5, [1.0, -1.0])
    with pytest.raises(DegenerateDetectorError):
        cvs.generic_linear_cv(0.0)


def test_grid_cv_matches_closed_form():
    prof = cvs.ContinuousProfile("gaussian", 1.0)
    grid = cvs.Grid.uniform(-8, 8, 801)
    sol = cvs.grid_cv(prof, (1.0, 1.0), grid, [1.0, -1.0])
    closed = cvs.continuous_cv(prof, 1.0, 1.0, [1.0, -1.0])
    np.testing.assert_allclose(sol.values, closed.function(grid.nodes), atol=1e-9)
    assert sol.norm_sq == pytest.approx(closed.norm_sq, rel=1e-6)


def test_grid_cv_requires_coverage():
    prof = cvs.ContinuousProfile("gaussian", 1.0)
    with pytest.raises(ValidationError):
        cvs.grid_cv(prof, (1.0, 1.0), cvs.Grid.uniform(-3, 3, 101), [1.0, -1.0])


def test_grid_and_trapezoid():
    g = cvs.Grid.uniform(0.0, 1.0, 11)
    assert g.integrate(g.nodes**2) == pytest.approx(1 / 3 + 1 / 600)
    assert cvs.trapezoid([1.0, 1.0, 3.0, 3.0], [0.0, 1.0, 1.0, 2.0]) == pytest.approx(4.0)
    with pytest.raises(ValidationError):
        cvs.Grid([0.0, 0.0, 1.0])


def test_linear_cv_is_a_comparison_only():
    f = cvs.generic_linear_cv(2.0)
    np.testing.assert_allclose(f([-2.0, 0.0, 4.0]), [-1.0, 0.0, 2.0])


def test_tophat_strong_separation():
    prof = cvs.ContinuousProfile("tophat", 0.5)
    cv = cvs.continuous_cv(prof, 1.0, 1.0, [1.0, -1.0])
    assert cv.b == 0.0
    np.testing.assert_allclose(cv.function(np.linspace(0.5, 1.5, 11)), 1.0, atol=1e-12)
    np.testing.assert_allclose(cv.function(np.linspace(-1.5, -0.5, 11)), -1.0, atol=1e-12)
    assert cv.a == 1.0 and cv.norm_bound == 2.0  # a = 1/(2w)
    assert math.isclose(cv.norm_sq, 2.0)
