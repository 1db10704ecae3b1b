import itertools
import math

import numpy as np
import pytest

from lmbfusion.core import BernoulliComponent, Label, LmbDensity, ParticleSet, empty_density
from lmbfusion.dynamics import CtModelParams, Measurement, SensorModel
from lmbfusion.filtering import (
    BirthModel,
    FilterConfig,
    bernoulli_miss_posterior,
    enumerate_associations,
    partial_injection_count,
    predict,
    update,
)

from conftest import component, density, point_mass


def all_partial_injections(n, m):
    """Brute-force oracle: every map comp -> {0, meas}, injective off zero."""
    out = []
    for hits in itertools.product(range(m + 1), repeat=n):
        taken = [h for h in hits if h > 0]
        if len(taken) == len(set(taken)):
            out.append(hits)
    return out


SENSOR = SensorModel(node=1, range=50.0, detection_prob=0.95, clutter_rate=10.0, meas_noise_std=1.0, mount=(0, 0))


def spread_component(label, existence, px, py, n=1000, spread=0.0, seed=0):
    rng = np.random.default_rng(seed)
    states = np.zeros((n, 5))
    states[:, 0] = px + (rng.standard_normal(n) * spread if spread else 0.0)
    states[:, 2] = py + (rng.standard_normal(n) * spread if spread else 0.0)
    return BernoulliComponent(Label(*label), existence, ParticleSet.uniform(states))


class TestPredict:
    def test_empty_prior_births_only(self, rng):
        birth = BirthModel(fov_radius=50.0, count=4, existence=0.05, particles=64)
        prior = empty_density(4, owner=1)
        out = predict(prior, CtModelParams(), birth, 5, 1, rng, fov_center=(0, 0))
        assert out.labels() == tuple(Label(5, 1, m) for m in (1, 2, 3, 4))
        assert all(c.existence == 0.05 for c in out.components)

    def test_survival_scaling(self, rng):
        prior = density([component((1, 1, 1), 0.8, 0, 0, n=8)], time=3)
        motion = CtModelParams(survival_prob=0.9)
        birth = BirthModel(fov_radius=50.0, count=1, particles=4)
        out = predict(prior, motion, birth, 4, 1, rng, fov_center=(0, 0))
        assert out.get(Label(1, 1, 1)).existence == pytest.approx(0.72)

    def test_zero_noise_matches_deterministic_transition(self, rng):
        from lmbfusion.dynamics import KinematicState, ct_transition

        motion = CtModelParams(sigma_accel=0.0, sigma_turn=0.0, survival_prob=1.0)
        states = np.array([[1.0, 2.0, 3.0, -1.0, 0.4]])
        prior = density([BernoulliComponent(Label(0, 1, 1), 0.5, ParticleSet.uniform(states))], time=0)
        birth = BirthModel(fov_radius=50.0, count=1, particles=4)
        out = predict(prior, motion, birth, 1, 1, rng, fov_center=(0, 0))
        got = out.get(Label(0, 1, 1)).density.states[0]
        want = ct_transition(KinematicState.from_array(states[0]), motion).as_array()
        assert np.allclose(got, want, atol=1e-14)

    def test_birth_particles_inside_closed_disc(self, rng):
        birth = BirthModel(fov_radius=50.0, count=8, particles=500)
        out = predict(empty_density(0, 1), CtModelParams(), birth, 1, 1, rng, fov_center=(10, -5))
        for c in out.components:
            d = np.hypot(c.density.states[:, 0] - 10, c.density.states[:, 2] + 5)
            assert np.all(d <= 50.0 + 1e-9)

    def test_time_mismatch_rejected(self, rng):
        birth = BirthModel(fov_radius=50.0, count=1, particles=4)
        with pytest.raises(ValueError):
            predict(empty_density(3, 1), CtModelParams(), birth, 5, 1, rng, fov_center=(0, 0))


class TestUpdateOracles:
    def test_missed_detection_closed_form(self, rng):
        # fully inside the FoV, empty scan: r(1 - pd) / (1 - r pd); the
        # detection profile is constant so the SMC value is exact
        comp = spread_component((1, 1, 1), 0.5, 10.0, 5.0)
        d = LmbDensity((comp,), time=3, owner=1)
        post = update(d, [], SENSOR, (0, 0), FilterConfig(), rng)
        want = bernoulli_miss_posterior(0.5, 0.95)
        assert want == pytest.approx(0.5 * 0.05 / (1 - 0.5 * 0.95), abs=1e-15)
        assert post.components[0].existence == pytest.approx(want, abs=1e-12)

    def test_hit_at_eap_negligible_clutter(self, rng):
        # oracle: brute-force the two association events by hand
        comp = spread_component((1, 1, 1), 0.5, 10.0, 5.0)
        sensor = SensorModel(node=1, range=50.0, detection_prob=0.95, clutter_rate=1e-6, meas_noise_std=1.0, mount=(0, 0))
        z = Measurement(10.0, 5.0, 3, 1)
        g = 1.0 / (2 * math.pi)
        kappa = 1e-6 / (math.pi * 50.0**2)
        w_miss = 1 - 0.5 + 0.5 * 0.05
        w_hit = 0.5 * 0.95 * g / kappa
        r_miss_cond = 0.5 * 0.05 / w_miss
        want = (w_miss * r_miss_cond + w_hit * 1.0) / (w_miss + w_hit)
        d = LmbDensity((comp,), time=3, owner=1)
        post = update(d, [z], sensor, (0, 0), FilterConfig(), rng)
        got = post.components[0].existence
        assert got > 0.99
        assert got == pytest.approx(want, rel=1e-9)

    def test_no_information_identity(self, rng):
        # empty scan and pd = 0 everywhere: posterior equals predicted
        sensor = SensorModel(node=1, range=50.0, detection_prob=0.0, clutter_rate=0.0, meas_noise_std=1.0, mount=(0, 0))
        comps = [spread_component((1, 1, 1), 0.5, 10, 5, spread=2.0), spread_component((1, 1, 2), 0.3, -7, 2, spread=1.0, seed=3)]
        d = LmbDensity(tuple(comps), time=3, owner=1)
        post = update(d, [], sensor, (0, 0), FilterConfig(), rng)
        for before, after in zip(d.components, post.components):
            assert after.existence == pytest.approx(before.existence, abs=1e-12)
            assert np.array_equal(after.density.weights, before.density.weights)
            assert np.array_equal(after.density.states, before.density.states)

    def test_smc_converges_to_gaussian_oracle(self, rng):
        # particles from N(mu, P I): the exact predictive likelihood of z is
        # a Gaussian with variance (sigma^2 + P) per axis
        r, pd, lam, sig, p_var = 0.6, 0.95, 2.0, 1.0, 4.0
        sensor = SensorModel(node=1, range=200.0, detection_prob=pd, clutter_rate=lam, meas_noise_std=sig, mount=(0, 0))
        n = 100_000
        comp = spread_component((1, 1, 1), r, 0.0, 0.0, n=n, spread=math.sqrt(p_var), seed=11)
        z = Measurement(1.5, -0.5, 0, 1)
        d = LmbDensity((comp,), time=0, owner=1)
        post = update(d, [z], sensor, (0, 0), FilterConfig(particles_per_component=n), rng)
        var = sig**2 + p_var
        g = math.exp(-(1.5**2 + 0.5**2) / (2 * var)) / (2 * math.pi * var)
        kappa = lam / (math.pi * 200.0**2)
        w_miss = 1 - r + r * (1 - pd)
        w_hit = r * pd * g / kappa
        want = (w_miss * (r * (1 - pd) / w_miss) + w_hit) / (w_miss + w_hit)
        assert post.components[0].existence == pytest.approx(want, rel=0.01)

    def test_outside_fov_passthrough(self, rng):
        inside = spread_component((1, 1, 1), 0.5, 10, 0)
        outside = spread_component((1, 1, 2), 0.4, 500, 0)
        d = LmbDensity((inside, outside), time=3, owner=1)
        post = update(d, [Measurement(10, 0, 3, 1)], SENSOR, (0, 0), FilterConfig(), rng)
        assert post.get(Label(1, 1, 2)) is outside

    def test_empty_scan_decreases_existence_inside_fov(self, rng):
        comp = spread_component((1, 1, 1), 0.7, 5, 5)
        d = LmbDensity((comp,), time=0, owner=1)
        post = update(d, [], SENSOR, (0, 0), FilterConfig(), rng)
        assert post.components[0].existence < 0.7

    def test_label_set_preserved_without_bookkeeping(self, rng):
        comps = [spread_component((1, 1, m), 0.4, 10 * m, 0, spread=1.0, seed=m) for m in range(1, 5)]
        d = LmbDensity(tuple(comps), time=0, owner=1)
        scan = [Measurement(10.0, 0.5, 0, 1), Measurement(20.0, -0.5, 0, 1)]
        cfg = FilterConfig(prune_threshold=0.0, max_components=1000)
        post = update(d, scan, SENSOR, (0, 0), cfg, rng)
        assert post.labels() == d.labels()

    def test_wrong_sensor_or_time_rejected(self, rng):
        d = LmbDensity((spread_component((1, 1, 1), 0.5, 0, 0),), time=3, owner=1)
        with pytest.raises(ValueError):
            update(d, [Measurement(0, 0, 3, 2)], SENSOR, (0, 0), FilterConfig(), rng)
        with pytest.raises(ValueError):
            update(d, [Measurement(0, 0, 4, 1)], SENSOR, (0, 0), FilterConfig(), rng)

    def test_prune_and_cap_applied(self, rng):
        comps = [spread_component((1, 1, m), 0.4 if m <= 3 else 0.3, 8 * m, 0) for m in range(1, 8)]
        d = LmbDensity(tuple(comps), time=0, owner=1)
        cfg = FilterConfig(prune_threshold=1e-3, max_components=3)
        post = update(d, [], SENSOR, (0, 0), cfg, rng)
        assert len(post) == 3
        assert all(c.existence >= 1e-3 for c in post.components)


class TestEnumerateAssociations:
    @pytest.mark.parametrize(
        "n,m,count", [(1, 1, 2), (2, 1, 3), (2, 2, 7), (3, 2, 13), (3, 3, 34)]
    )
    def test_counts_match_combinatorics(self, n, m, count):
        assert partial_injection_count(n, m) == count
        events, weights = enumerate_associations(np.zeros(n), np.zeros((n, m)), budget=1000)
        assert len(events) == count
        assert weights.sum() == pytest.approx(1.0, abs=1e-9)

    @pytest.mark.parametrize("n,m", [(1, 1), (2, 1), (1, 2), (2, 2), (3, 2), (2, 3), (3, 3)])
    def test_event_sets_match_brute_force(self, n, m):
        events, _ = enumerate_associations(np.zeros(n), np.zeros((n, m)), budget=10000)
        got = {tuple(e) for e in events.tolist()}
        want = {tuple(h) for h in all_partial_injections(n, m)}
        assert got == want

    def test_uniform_factors_give_uniform_weights(self):
        _, weights = enumerate_associations(np.zeros(2), np.zeros((2, 2)), budget=100)
        assert np.allclose(weights, 1.0 / 7)

    def test_weights_proportional_to_factor_products(self):
        log_miss = np.log(np.array([0.5, 1.0]))
        log_assign = np.log(np.array([[2.0], [4.0]]))
        events, weights = enumerate_associations(log_miss, log_assign, budget=100)
        table = {tuple(e): w for e, w in zip(events.tolist(), weights)}
        # products: (0,0) -> 0.5, (1,0) -> 2.0, (0,1) -> 2.0
        total = 0.5 + 2.0 + 2.0
        assert table[(0, 0)] == pytest.approx(0.5 / total)
        assert table[(1, 0)] == pytest.approx(2.0 / total)
        assert table[(0, 1)] == pytest.approx(2.0 / total)

    def test_sampled_mode_weights_sum_to_one(self, rng):
        log_miss = np.zeros(6)
        log_assign = np.random.default_rng(0).standard_normal((6, 6))
        events, weights = enumerate_associations(
            log_miss, log_assign, budget=10, rng=rng, sweeps=50, mode="exhaustive"
        )
        # count 13327 > budget 10 forces the sampled path
        assert partial_injection_count(6, 6) > 10
        assert len(events) <= 51
        assert weights.sum() == pytest.approx(1.0, abs=1e-9)
        flat = events.reshape(-1)
        assert flat.min() >= 0 and flat.max() <= 6

    def test_sampled_mode_finds_dominant_event(self, rng):
        # one overwhelming assignment; Gibbs must concentrate on it
        log_miss = np.zeros(3)
        log_assign = np.full((3, 3), -20.0)
        log_assign[0, 1] = 10.0
        events, weights = enumerate_associations(
            log_miss, log_assign, budget=1, rng=rng, sweeps=40, mode="sampled"
        )
        best = events[np.argmax(weights)]
        assert best[0] == 2  # measurement index 2 is 1-based column 1
        assert weights.max() > 0.99
