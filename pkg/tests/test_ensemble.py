import numpy as np
import pytest

from mra.ensemble import (
    CHUNK,
    FamilySpec,
    RadiusProfile,
    UniverseError,
    family_mean_square,
    family_norm,
    in_universe,
    require_universe,
    run_ensemble,
    sample_initial,
    sample_initial_batch,
    thread_count,
)
from mra.model import ModelParams
from mra.presets import Noise, NonlocalCoefficient, Reaction
from mra.spectral import ConfigurationError, build_basis

B = build_basis(N=4)
NOISY = ModelParams("stochastic", NonlocalCoefficient.saturating(1, 2), Reaction.tanh(0.3), Noise.affine(0.3, 0.1))


def test_results_do_not_depend_on_thread_count():
    spec = FamilySpec.ball(RadiusProfile("constant", 4.0))
    runs = [run_ensemble(NOISY, spec, 0.0, 0.2, 0.01, 2 * CHUNK + 17, 123, B, threads=t) for t in (1, 3, 8)]
    for r in runs[1:]:
        assert r.mean_h_sq.tobytes() == runs[0].mean_h_sq.tobytes()
        assert r.ci_half_width.tobytes() == runs[0].ci_half_width.tobytes()


def test_sample_initial_matches_batch():
    spec = FamilySpec.gaussian([1.0, 0.5])
    batch = sample_initial_batch(spec, 0.0, np.arange(10), 4, B)
    np.testing.assert_array_equal(sample_initial(spec, 0.0, 7, 4, B).gamma, batch[7])
    assert np.all(batch[:, 2:] == 0)


def test_ball_samples_are_inside_and_fill_the_ball():
    rho2 = 9.0
    spec = FamilySpec.ball(RadiusProfile("constant", rho2))
    g = sample_initial_batch(spec, 0.0, np.arange(20000), 1, B)
    r2 = np.sum(g * g, axis=1)
    assert r2.max() <= rho2
    expected = family_mean_square(spec, 0.0, B)
    assert expected == pytest.approx(rho2 * 4 / 6)
    assert r2.mean() == pytest.approx(expected, rel=0.02)
    # uniform in the ball: ||u||^N / rho^N is U(0, 1)
    u = (r2 / rho2) ** 2
    assert abs(u.mean() - 0.5) < 0.01


def test_gaussian_moments():
    spec = FamilySpec.gaussian([2.0, 1.0, 0.5])
    g = sample_initial_batch(spec, 0.0, np.arange(50000), 8, B)
    np.testing.assert_allclose(g.var(axis=0)[:3], [4.0, 1.0, 0.25], rtol=0.03)
    assert family_norm(spec, 0.0) == pytest.approx(5.25)


def test_mean_square_of_heat_flow_with_random_data():
    p = ModelParams("deterministic-random", NonlocalCoefficient.constant(1.0), Reaction.zero())
    std = [1.0, 1.0, 1.0, 1.0]
    res = run_ensemble(p, FamilySpec.gaussian(std), 0.0, 0.5, 1e-3, 4000, 2, B, record_every=100)
    steps = np.round(res.times / 1e-3)
    # the implicit step multiplies mode j by 1 / (1 + dt lambda_j) exactly
    discrete = ((1 + 1e-3 * B.lam[None, :]) ** (-2 * steps[:, None])).sum(axis=1)
    assert np.all(np.abs(res.mean_h_sq - discrete) <= res.ci_half_width)


def test_profiles_and_universe():
    aff = RadiusProfile("affine_abs", 10, 10)
    assert float(aff.radius_sq(-2.0)) == 30.0
    grow = RadiusProfile("exponential", 1.0, 2.0)
    assert in_universe(FamilySpec.ball(grow), 3.0)
    assert not in_universe(FamilySpec.ball(grow), 1.0)
    with pytest.raises(UniverseError):
        require_universe(FamilySpec.gaussian([1.0]), 1.0)
    with pytest.raises(UniverseError):
        require_universe(FamilySpec.ball(grow), 1.0)
    with pytest.raises(ConfigurationError):
        RadiusProfile("affine_abs", 1.0, -1.0)


def test_residual_statistics_are_available():
    spec = FamilySpec.point([1.0])
    res = run_ensemble(NOISY, spec, 0.0, 0.1, 0.01, 64, 5, B, residuals=True)
    assert res.residual_mean.shape == (10,)
    assert np.all(res.residual_ci > 0)


def test_bad_inputs(monkeypatch):
    with pytest.raises(ConfigurationError):
        run_ensemble(NOISY, FamilySpec.point([1.0]), 0.0, 1.0, 0.1, 1, 0, B)
    monkeypatch.setenv("MRA_THREADS", "many")
    with pytest.raises(ConfigurationError):
        thread_count()
    monkeypatch.setenv("MRA_THREADS", "0")
    assert thread_count() >= 1
    with pytest.raises(ConfigurationError):
        sample_initial(FamilySpec.point([1.0] * 5), 0.0, 0, 0, B)
