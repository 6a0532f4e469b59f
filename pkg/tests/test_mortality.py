import math
import struct
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from conftest import flat_params, scenario_set
from longswap.errors import CorruptFileError, HorizonError, ValidationError
from longswap.mortality import (
    FIXTURE_SEED,
    MortalityScenarioSet,
    deterministic_curve,
    estimate_curve,
    fixture_path,
    load_parameters,
    load_scenarios,
    parameters_from_dict,
    parameters_to_dict,
    save_parameters,
    save_scenarios,
    simulate_scenarios,
)


# ---------------------------------------------------------------- simulation

def test_no_randomness_gives_closed_form():
    beta1 = np.linspace(-5.0, -3.0, 11)
    params = flat_params(beta1=beta1, kappa_last=0.3, theta={2020 + 1 - 62: -0.1})
    scen = simulate_scenarios(params, 62, 5, 4, seed=7)
    expected = np.exp(-np.exp(beta1[2:7] + 0.3 - 0.1))
    assert np.all(scen.paths == scen.paths[0])
    np.testing.assert_allclose(scen.paths[0], expected, rtol=0, atol=1e-15)


def test_zero_hazard_gives_unit_survival():
    params = flat_params(level=-800.0)
    scen = simulate_scenarios(params, 60, 3, 2, seed=1)
    assert np.all(scen.paths == 1.0)


def test_period_trend_and_cohort_effect_enter_linearly():
    params = flat_params(beta2=np.full(11, -0.02), h_bar=2010.0, theta={1956: 0.05})
    scen = simulate_scenarios(params, 65, 4, 1, seed=0)
    years = 2021 + np.arange(4)
    m = np.exp(-4.0 - 0.02 * (years - 2010.0) + 0.05)
    np.testing.assert_allclose(scen.paths[0], np.exp(-m), rtol=1e-15)


def test_simulation_matches_explicit_loop():
    params = flat_params(sigma_kappa=0.05, sigma_omega=np.full(11, 0.03), kappa_last=-0.2)
    seed, K, T, x = 99, 6, 5, 63
    scen = simulate_scenarios(params, x, T, K, seed)
    for k in range(K):
        rng = np.random.Generator(np.random.Philox(np.random.SeedSequence(seed, spawn_key=(k,))))
        eps, omega = rng.standard_normal(T), rng.standard_normal(T)
        kappa = -0.2
        for t in range(T):
            kappa += 0.05 * eps[t]
            m = math.exp(-4.0 + kappa + 0.03 * omega[t])
            assert scen.paths[k, t] == pytest.approx(math.exp(-m), rel=1e-14)


def test_determinism_and_seed_sensitivity(fixture_params):
    a = simulate_scenarios(fixture_params, 65, 10, 50, seed=3)
    b = simulate_scenarios(fixture_params, 65, 10, 50, seed=3)
    c = simulate_scenarios(fixture_params, 65, 10, 50, seed=4)
    assert np.array_equal(a.paths, b.paths)
    assert not np.array_equal(a.paths, c.paths)


def test_paths_do_not_depend_on_path_count(fixture_params):
    small = simulate_scenarios(fixture_params, 65, 8, 5, seed=11)
    large = simulate_scenarios(fixture_params, 65, 8, 40, seed=11)
    assert np.array_equal(small.paths, large.paths[:5])


def test_raising_beta1_lowers_survival(fixture_params):
    base = simulate_scenarios(fixture_params, 65, 10, 20, seed=5)
    beta1 = fixture_params.beta1.copy()
    beta1[fixture_params.age_index(70)] += 0.1
    bumped = simulate_scenarios(replace(fixture_params, beta1=beta1), 65, 10, 20, seed=5)
    assert np.all(bumped.paths[:, 5] < base.paths[:, 5])
    others = np.delete(np.arange(10), 5)
    assert np.array_equal(bumped.paths[:, others], base.paths[:, others])


def test_simulation_errors(fixture_params):
    with pytest.raises(HorizonError):
        simulate_scenarios(fixture_params, 90, 12, 5, seed=0)
    with pytest.raises(ValidationError):
        simulate_scenarios(fixture_params, 65, 10, 0, seed=0)
    with pytest.raises(ValidationError):
        simulate_scenarios(fixture_params, 65, 0, 5, seed=0)
    with pytest.raises(ValidationError):
        simulate_scenarios(fixture_params, 65, 10, 5, seed=-1)


def test_non_finite_parameters_rejected():
    with pytest.raises(ValidationError):
        flat_params(beta1=np.array([np.nan] * 11))
    with pytest.raises(ValidationError):
        flat_params(sigma_kappa=-0.1)
    with pytest.raises(ValidationError):
        flat_params(beta1=np.zeros(3))
    with pytest.raises(ValidationError):
        flat_params(fitted_years=(1960, 1990))


def test_scenario_set_invariants():
    with pytest.raises(ValidationError):
        scenario_set([[0.5, 0.0]])
    with pytest.raises(ValidationError):
        scenario_set([[0.5, 1.2]])
    with pytest.raises(ValidationError):
        MortalityScenarioSet(65, np.empty((0, 3)))


# -------------------------------------------------------------------- curves

def test_single_path_curve():
    curve = estimate_curve(scenario_set([[0.9, 0.9, 0.9]]))
    np.testing.assert_allclose(curve.multi_year, [0.9, 0.81, 0.729], rtol=1e-15)
    np.testing.assert_allclose(curve.one_year, [0.9, 0.9, 0.9])


def test_two_path_average():
    curve = estimate_curve(scenario_set([[1.0], [0.5]]))
    assert curve.multi_year[0] == 0.75


def test_averaging_order_differs_from_product():
    curve = estimate_curve(scenario_set([[0.9, 0.5], [0.5, 0.9]]))
    assert curve.multi_year[1] == pytest.approx(0.45)
    assert np.prod(curve.one_year) == pytest.approx(0.49)


def test_fixture_curve_matches_streaming_mean(fixture_scenarios, fixture_curve):
    K, T = fixture_scenarios.paths.shape
    multi = [0.0] * T
    one = [0.0] * T
    for k, row in enumerate(fixture_scenarios.paths):
        surv = 1.0
        for t in range(T):
            surv *= float(row[t])
            # running mean update
            multi[t] += (surv - multi[t]) / (k + 1)
            one[t] += (float(row[t]) - one[t]) / (k + 1)
    np.testing.assert_allclose(fixture_curve.multi_year, multi, rtol=0, atol=1e-12)
    np.testing.assert_allclose(fixture_curve.one_year, one, rtol=0, atol=1e-12)


def test_fixture_expectancy_bracket(fixture_curve):
    assert 18.0 <= fixture_curve.life_expectancy() <= 26.0


def test_curve_bounds_and_monotonicity(fixture_curve):
    assert np.all(np.diff(fixture_curve.multi_year) <= 0)
    assert np.all((fixture_curve.one_year > 0) & (fixture_curve.one_year <= 1))


@settings(max_examples=50, deadline=None)
@given(
    a=arrays(np.float64, st.tuples(st.integers(1, 5), st.just(4)), elements=st.floats(0.05, 1.0)),
    b=arrays(np.float64, st.tuples(st.integers(1, 5), st.just(4)), elements=st.floats(0.05, 1.0)),
)
def test_concatenation_gives_weighted_average(a, b):
    sa, sb = scenario_set(a), scenario_set(b)
    joint = estimate_curve(sa.concat(sb))
    ca, cb = estimate_curve(sa), estimate_curve(sb)
    Ka, Kb = len(a), len(b)
    np.testing.assert_allclose(joint.multi_year, (Ka * ca.multi_year + Kb * cb.multi_year) / (Ka + Kb),
                               rtol=0, atol=1e-12)
    np.testing.assert_allclose(joint.one_year, (Ka * ca.one_year + Kb * cb.one_year) / (Ka + Kb),
                               rtol=0, atol=1e-12)


def test_deterministic_curve_products():
    curve = deterministic_curve(70, [0.9, 0.8])
    np.testing.assert_allclose(curve.multi_year, [0.9, 0.72])


# ----------------------------------------------------------------------- I/O

@settings(max_examples=30, deadline=None)
@given(arrays(np.float64, st.tuples(st.integers(1, 6), st.integers(1, 6)),
              elements=st.floats(1e-300, 1.0)), st.integers(0, 2**64 - 1))
def test_scenario_round_trip(tmp_path_factory, paths, seed):
    scen = MortalityScenarioSet(70, paths, seed=seed)
    path = tmp_path_factory.mktemp("rt") / "s.lswp"
    save_scenarios(scen, path)
    back = load_scenarios(path)
    assert back.paths.tobytes() == scen.paths.tobytes()
    assert (back.initial_age, back.seed) == (70, seed)


def test_file_layout(tmp_path):
    scen = scenario_set([[0.5, 0.25]])
    save_scenarios(scen, tmp_path / "s.lswp")
    raw = (tmp_path / "s.lswp").read_bytes()
    assert raw[:4] == b"LSWP"
    assert struct.unpack_from("<HHIIQ", raw, 4) == (1, 65, 2, 1, 0)
    assert struct.unpack_from("<2d", raw, 24) == (0.5, 0.25)


def test_corrupt_files(tmp_path):
    scen = scenario_set([[0.5, 0.25], [0.4, 0.2]])
    good = tmp_path / "good.lswp"
    save_scenarios(scen, good)
    raw = good.read_bytes()
    cases = {
        "short_header.lswp": raw[:10],
        "truncated.lswp": raw[:-3],
        "magic.lswp": b"XXXX" + raw[4:],
        "version.lswp": raw[:4] + struct.pack("<H", 9) + raw[6:],
        "bad_prob.lswp": raw[:24] + struct.pack("<d", 1.5) + raw[32:],
    }
    for name, blob in cases.items():
        (tmp_path / name).write_bytes(blob)
        with pytest.raises(CorruptFileError):
            load_scenarios(tmp_path / name)
    with pytest.raises(CorruptFileError):
        load_scenarios(tmp_path / "missing.lswp")


def test_fixture_file_shape(fixture_scenarios):
    assert fixture_scenarios.paths.shape == (2000, 35)
    assert fixture_scenarios.initial_age == 65
    assert fixture_scenarios.seed == FIXTURE_SEED
    assert fixture_scenarios.provenance == "loaded-fixture"


def test_fixture_file_regenerates_from_parameters(fixture_params, fixture_scenarios):
    again = simulate_scenarios(fixture_params, 65, 35, 2000, FIXTURE_SEED)
    assert again.paths.tobytes() == fixture_scenarios.paths.tobytes()


def test_parameter_round_trip(tmp_path, fixture_params):
    save_parameters(fixture_params, tmp_path / "p.json")
    back = load_parameters(tmp_path / "p.json")
    assert parameters_to_dict(back) == parameters_to_dict(fixture_params)


def test_parameters_accept_age_keyed_maps_and_default_theta():
    data = parameters_to_dict(flat_params(ages=(60, 61)))
    data["beta1"] = {"60": -4.0, "61": -3.9}
    data["theta"] = {}
    params = parameters_from_dict(data)
    assert params.beta1.tolist() == [-4.0, -3.9]
    assert params.cohort_effect(1950) == 0.0
    del data["beta1"]["61"]
    with pytest.raises(ValidationError):
        parameters_from_dict(data)


def test_malformed_parameter_files(tmp_path):
    (tmp_path / "bad.json").write_text("{not json")
    with pytest.raises(CorruptFileError):
        load_parameters(tmp_path / "bad.json")
    (tmp_path / "partial.json").write_text('{"age_range": [60, 61]}')
    with pytest.raises(ValidationError):
        load_parameters(tmp_path / "partial.json")


def test_fixture_paths_exist():
    assert fixture_path("fixture_params.json").is_file()
    assert fixture_path("fixture_scenarios.lswp").is_file()
