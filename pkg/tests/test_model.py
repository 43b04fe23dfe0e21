import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mra import spectral as sp
from mra.model import (
    ModeError,
    ModelParams,
    coercivity_and_boundedness_probe,
    diffusion,
    drift,
    hemicontinuity_probe,
    nemytskii,
    nonlocal_coefficient,
    nonlocal_monotone_gap,
    validate_params,
    weak_monotone_excess,
)
from mra.presets import ForcingSpec, Noise, NonlocalCoefficient, Reaction
from mra.spectral import ConfigurationError, GridFunction, SpectralState, build_basis

B = build_basis()


def stoch(a=None, f=None, sigma=None, forcing=None, rate=0.1, claimed=None):
    return ModelParams(
        "stochastic",
        a or NonlocalCoefficient.constant(1.0),
        f or Reaction.zero(),
        sigma or Noise.zero(),
        forcing or ForcingSpec.zero(),
        rate,
        claimed or {},
    )


def det(a=None, f=None, forcing=None, rate=0.5, claimed=None):
    return ModelParams(
        "deterministic-random", a or NonlocalCoefficient.constant(1.0), f or Reaction.cubic(1.0, 1.0),
        Noise.zero(), forcing or ForcingSpec.zero(), rate, claimed or {},
    )


def test_dissipation_margin_passes_with_slack():
    p = stoch(f=Reaction.linear(0.2), sigma=Noise.affine(0.3))
    check = validate_params(p, B)["dissipation_margin"]
    assert check.passed
    assert check.margin == pytest.approx(0.21, abs=1e-12)


def test_dissipation_margin_boundary_failure():
    p = stoch(f=Reaction.linear(0.5), sigma=Noise.affine(0.1))
    check = validate_params(p, B)["dissipation_margin"]
    assert not check.passed
    assert check.margin == pytest.approx(-0.01, abs=1e-12)


def test_saturating_coefficient_passes_bounds_and_monotone_flux():
    rep = validate_params(stoch(a=NonlocalCoefficient.saturating(1, 3)), B)
    assert rep["coefficient_bounds"].passed and rep["monotone_flux"].passed


def test_strongly_decaying_coefficient_breaks_monotone_flux():
    rep = validate_params(stoch(a=NonlocalCoefficient.decaying(1, 5, 1)), B)
    assert rep.failures() == ["monotone_flux"]


@pytest.mark.parametrize(
    "f",
    [Reaction.linear(-0.5), Reaction.cubic(0.7, 2.0), Reaction.cubic(-0.3, 1.0), Reaction.tanh(0.4), Reaction.tanh(-1.0), Reaction.zero()],
)
def test_certified_deterministic_constants_are_sound(f):
    rep = validate_params(det(f=f), B)
    for name in ("dissipativity", "growth", "one_sided_derivative", "exponent"):
        if name == "dissipativity" and f.kind in ("tanh", "zero"):
            continue  # alpha = 0 cannot satisfy the strict alpha > 0 requirement
        assert rep[name].passed, (name, rep[name])


@pytest.mark.parametrize("f", [Reaction.linear(0.3), Reaction.linear(-2.0), Reaction.tanh(0.4), Reaction.tanh(-1.0), Reaction.zero()])
def test_certified_stochastic_constants_are_sound(f):
    rep = validate_params(stoch(f=f), B)
    for name in ("derivative_bound", "linear_growth", "quadratic_dissipativity"):
        assert rep[name].passed, (name, rep[name])


def test_expansive_linear_reaction_fails_dissipativity_only():
    rep = validate_params(det(f=Reaction.linear(0.5)), B)
    assert rep.failures() == ["dissipativity"]
    assert rep["dissipativity"].margin == -0.5


def test_claimed_constants_are_sampled_and_can_fail():
    p = stoch(f=Reaction.linear(0.3), claimed={"gamma3": 0.0, "gamma4": 0.1})
    rep = validate_params(p, B)
    assert rep.failures() == ["quadratic_dissipativity"]
    assert rep["quadratic_dissipativity"].method == "claimed, sampled"
    assert rep["quadratic_dissipativity"].margin == pytest.approx(-0.2 * 1e6, rel=1e-12)


def test_custom_reaction_is_marked_uncertified():
    f = Reaction.custom(lambda r: -r, lambda r: -np.ones_like(r))
    p = stoch(f=f, claimed={"gamma1": 0.0, "gamma2": 1.0, "gamma3": 0.0, "gamma4": 0.0})
    assert validate_params(p, B)["linear_growth"].method == "sampled, not certified"


def test_rate_beyond_stated_range_is_flagged():
    p = stoch(rate=1.5)
    check = validate_params(p, B)["rate_range"]
    assert check.passed and "beyond" in check.note
    assert not validate_params(stoch(rate=2.0), B)["rate_range"].passed


def test_nonintegrable_forcing_fails_gate():
    p = stoch(forcing=ForcingSpec.exponential(-0.5, [1.0]), rate=0.5)
    assert not validate_params(p, B)["forcing_integrability"].passed


def test_noise_in_deterministic_mode_is_rejected():
    with pytest.raises(ConfigurationError):
        ModelParams("deterministic", NonlocalCoefficient.constant(1), Reaction.zero(), Noise.affine(0.1))


@pytest.mark.parametrize("s,expected", [(0.0, 1.0), (1.0, 2.0)])
def test_saturating_values(s, expected):
    assert nonlocal_coefficient(stoch(a=NonlocalCoefficient.saturating(1, 3)), s) == pytest.approx(expected)


def test_constant_coefficient_value():
    assert nonlocal_coefficient(stoch(), 17.3) == 1.0


@given(st.floats(0, 1e9))
def test_coefficient_sandwich(s):
    a = NonlocalCoefficient.saturating(0.5, 4.0)
    assert 0.5 <= float(a(s)) <= 4.0


def test_nemytskii_examples():
    b = build_basis(N=2)
    g = GridFunction(np.full(b.Q, 2.0), b)
    assert np.all(nemytskii(Reaction.linear(0.5), g).values == 1.0)
    assert np.all(nemytskii(Reaction.cubic(1.0, 1.0), g).values == -6.0)
    assert np.all(nemytskii(Noise.affine(0.0, 0.1), g).values == 0.1)


def test_drift_examples():
    b = build_basis(N=2)
    u = SpectralState([1.0, 0.0], b)
    np.testing.assert_allclose(drift(stoch(), u, 0.0), [-1.0, 0.0], atol=1e-15)
    np.testing.assert_allclose(drift(stoch(forcing=ForcingSpec.constant([1.0])), u, 0.0), [0.0, 0.0], atol=1e-15)
    g = 0.7
    out = drift(stoch(f=Reaction.linear(0.2)), SpectralState([g, 0.0], b), 0.0)
    np.testing.assert_allclose(out, [(-1 + 0.2) * g, 0.0], atol=1e-14)


@given(st.lists(st.floats(-10, 10), min_size=6, max_size=6), st.integers(0, 5), st.floats(-5, 5))
def test_linear_drift_is_diagonal(gamma, j, bump):
    b = build_basis(N=6)
    p = stoch(a=NonlocalCoefficient.constant(1.3), f=Reaction.linear(-0.4))
    base = drift(p, SpectralState(gamma, b), 0.0)
    moved = np.array(gamma)
    moved[j] += bump
    other = drift(p, SpectralState(moved, b), 0.0)
    mask = np.arange(6) != j
    np.testing.assert_allclose(other[mask], base[mask], atol=1e-11)


def test_diffusion_examples():
    b = build_basis(N=2)
    u = SpectralState([1.0, 0.0], b)
    np.testing.assert_array_equal(diffusion(stoch(), u), [0.0, 0.0])
    np.testing.assert_allclose(diffusion(stoch(sigma=Noise.affine(0.3)), u), [0.3, 0.0], atol=1e-14)
    fine = build_basis(N=2, Q=512)
    val = diffusion(stoch(sigma=Noise.affine(0.0, 0.1)), sp.zero_state(fine))[0]
    assert val == pytest.approx(0.1 * math.sqrt(2 / math.pi) * 2, abs=1e-5)
    with pytest.raises(ModeError):
        diffusion(det(), u)


def test_monotone_gap_examples():
    b = build_basis(N=3)
    u = SpectralState([0.3, -1.0, 2.0], b)
    p = stoch(a=NonlocalCoefficient.saturating(1, 3))
    assert nonlocal_monotone_gap(p, u, u) == 0.0
    assert nonlocal_monotone_gap(stoch(), u, u - sp.unit_mode(b, 1)) == pytest.approx(1.0)


def test_weak_monotone_examples():
    b = build_basis(N=3)
    u = SpectralState([0.3, -1.0, 2.0], b)
    assert weak_monotone_excess(stoch(), u, u) == 0.0
    assert weak_monotone_excess(stoch(), u, u - sp.unit_mode(b, 1)) == pytest.approx(-2.0)


def test_probe_at_origin():
    c, d = coercivity_and_boundedness_probe(stoch(), sp.zero_state(B))
    assert c <= 0 and d <= 0


PRESETS = [
    stoch(a=NonlocalCoefficient.saturating(1, 3), f=Reaction.tanh(0.3), sigma=Noise.sine(0.4), forcing=ForcingSpec.constant([0.5])),
    stoch(a=NonlocalCoefficient.constant(2.0), f=Reaction.linear(-0.7), sigma=Noise.affine(0.3, 0.2)),
    stoch(a=NonlocalCoefficient.saturating(0.5, 1.0), f=Reaction.linear(0.1), sigma=Noise.affine(-0.2, -0.4)),
]


@settings(max_examples=60, deadline=None)
@given(st.integers(0, len(PRESETS) - 1), st.integers(0, 2**32 - 1), st.floats(0.01, 30.0))
def test_operator_inequalities_on_random_states(k, seed, scale):
    rng = np.random.default_rng(seed)
    p = PRESETS[k]
    u = SpectralState(scale * rng.standard_normal(B.N) / np.arange(1, B.N + 1), B)
    v = SpectralState(scale * rng.standard_normal(B.N), B)
    assert nonlocal_monotone_gap(p, u, v) >= -1e-10
    assert weak_monotone_excess(p, u, v) <= 1e-10
    c, d = coercivity_and_boundedness_probe(p, u, 0.3)
    assert c <= 1e-10 and d <= 1e-10


def test_hemicontinuity_jumps_shrink_with_sampling():
    b = build_basis(N=4)
    rng = np.random.default_rng(5)
    u, z, v = (SpectralState(rng.standard_normal(4), b) for _ in range(3))
    p = PRESETS[0]
    coarse = hemicontinuity_probe(p, u, z, v, samples=201)
    fine = hemicontinuity_probe(p, u, z, v, samples=2001)
    assert fine < coarse / 5
