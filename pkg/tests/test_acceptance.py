"""Acceptance gate: one test per criterion, each printing a PASS line.

Run with ``pytest tests/test_acceptance.py -v -s`` to watch the per-criterion
lines; the full-scenario criterion (6) simulates ten seeded Monte Carlo runs
per mode at 1000 particles per component and takes tens of minutes on one
core.  Set LMBFUSION_ACCEPTANCE_RUNS to lower the run count during
development only; the shipped default is the required ten.
"""

import inspect
import itertools
import json
import math
import os
import time

import numpy as np
import pytest

import conftest
from lmbfusion.cli import RunConfig, simulate, simulate_run
from lmbfusion.core import BernoulliComponent, Label, LmbDensity, ParticleSet
from lmbfusion.dynamics import CtModelParams, Measurement, SensorModel
from lmbfusion.filtering import (
    FilterConfig,
    bernoulli_miss_posterior,
    enumerate_associations,
    partial_injection_count,
    update,
)
from lmbfusion.fusion import (
    FusionConfig,
    complementary_fuse,
    fuse_existence,
    merge_pair,
    run_consensus,
)
from lmbfusion.metrics import MetricsConfig, cardinality_report, ospa, ospa2, optimal_assignment, ospa2_series
from lmbfusion.network import NetworkGraph, deserialize, serialize
from lmbfusion.scenario import ScenarioConfig, VehicleSpec, generate_truth, load_scenario

from conftest import component, density, point_mass
from test_filtering import all_partial_injections
from test_metrics import brute_force_assignment
from test_network import messages_equal, random_message

MC_RUNS = int(os.environ.get("LMBFUSION_ACCEPTANCE_RUNS", "10"))


def report(n, text):
    print(f"\nACCEPTANCE {n}: PASS — {text}", flush=True)
    caller = inspect.stack()[1].function
    conftest.ACCEPTANCE_NOTES[caller] = text


def test_criterion_1_fusion_algebra():
    start = time.perf_counter()
    # single-input identity
    rng = np.random.default_rng(1)
    for r in rng.random(100):
        assert abs(fuse_existence([r]) - r) < 1e-12
    # monotone inclusion over 1e3 random vectors
    for _ in range(1000):
        rs = rng.random(rng.integers(1, 7)).tolist()
        assert fuse_existence(rs) >= max(rs) - 1e-12
    # Remark-3 limit: a near-certain input dominates
    for _ in range(100):
        rs = rng.random(rng.integers(0, 5)).tolist() + [0.999]
        assert fuse_existence(rs) >= 0.999
    elapsed = time.perf_counter() - start
    assert elapsed < 1.0
    report(1, f"fusion algebra suite in {elapsed:.2f}s")


def test_criterion_2_merging_suite(rng):
    start = time.perf_counter()
    a = component((1, 1, 1), 0.5, 0, 0, n=16)
    b = component((2, 1, 1), 0.5, 0.5, 0, n=16)
    assert merge_pair(a, b, 64, rng).existence == pytest.approx(0.75, abs=1e-12)

    assert merge_pair(
        component((3, 1, 2), 0.5, 0, 0, n=4), component((5, 2, 1), 0.5, 0, 0, n=4), 8, rng
    ).label == Label(3, 1, 2)
    # equal-birth-time tie resolves by (origin, index)
    assert merge_pair(
        component((5, 1, 2), 0.5, 0, 0, n=4), component((5, 0, 7), 0.5, 0, 0, n=4), 8, rng
    ).label == Label(5, 0, 7)

    # triple merge: union rule gives 1 - 0.5^3 = 0.875 for every fold order
    comps = [component((k, 1, 1), 0.5, 0.2 * k, 0, n=4) for k in (1, 2, 3)]
    for order in itertools.permutations(comps):
        acc = order[0]
        for c in order[1:]:
            acc = merge_pair(acc, c, 8, rng)
        assert acc.existence == pytest.approx(0.875, abs=1e-12)

    # merged particle mean within 3 sigma of the alpha mixture over 100 seeds
    r1, r2 = 0.6, 0.4
    pa = component((1, 1, 1), r1, 0.0, 0.0, n=200)
    pb = component((2, 1, 1), r2, 10.0, 0.0, n=200)
    alpha2 = r2 / (r1 + r2)
    target = alpha2 * 10.0
    var_mix = (1 - alpha2) * target**2 + alpha2 * (10.0 - target) ** 2
    j_bar = 1000
    means = [
        merge_pair(pa, pb, j_bar, np.random.default_rng(seed)).eap()[0] for seed in range(100)
    ]
    tol = 3.0 * math.sqrt(var_mix) / math.sqrt(100 * j_bar)
    assert abs(np.mean(means) - target) < tol
    elapsed = time.perf_counter() - start
    assert elapsed < 10.0
    report(2, f"merging suite in {elapsed:.2f}s (mean err {abs(np.mean(means) - target):.4f} < {tol:.4f})")


def _label_fixture_config():
    return ScenarioConfig(
        name="labelfix",
        area=(-10, -60, 310, 60),
        dt=0.1,
        scans=8,
        comm_range=250.0,
        vehicles=(
            VehicleSpec(11, 1, 8, ((44.0, 0.0), (46.0, 0.0)), (1.0,)),
            VehicleSpec(12, 1, 8, ((244.0, 0.0), (246.0, 0.0)), (1.0,)),
        ),
        sensors=(
            SensorModel(node=1, range=50.0, detection_prob=0.95, clutter_rate=1e-6, mount=(0.0, 0.0)),
            SensorModel(node=2, range=50.0, detection_prob=0.95, clutter_rate=1e-6, mount=(200.0, 0.0)),
        ),
        motion=CtModelParams(),
    )


def test_criterion_3_label_consistency():
    # two nodes birth two different objects at the same scan; with plain
    # two-part labels the births collide and fuse into one object
    cfg = _label_fixture_config()
    truth = generate_truth(cfg)
    results = {}
    for mode in ("ours", "baseline"):
        rc = RunConfig(scenario="inline", mode=mode, consensus_iterations=3, particles=500, seed=0)
        h = simulate_run(cfg, truth, rc, 0)
        results[mode] = {node: h.estimates[(node, 8)] for node in (1, 2)}

    for node in (1, 2):
        ours = results["ours"][node]
        assert len(ours) == 2
        assert {lab for lab, _ in ours} == {Label(1, 1, 1), Label(1, 2, 1)}
        base = results["baseline"][node]
        assert len(base) == 1
        assert base[0][0] == Label(1, -1, 1)
    report(3, "ours: two distinct labels, cardinality 2 at both nodes; baseline: label collision, cardinality 1")


def _crossing_fixture_config():
    return ScenarioConfig(
        name="crossfix",
        area=(0, 0, 250, 200),
        dt=0.1,
        scans=150,
        comm_range=150.0,
        vehicles=(VehicleSpec(9, 1, 150, ((199.0, 100.0), (50.0, 100.0)), (10.0,)),),
        sensors=(
            SensorModel(node=1, range=50.0, detection_prob=1.0, clutter_rate=1e-6, mount=(40.0, 100.0)),
            SensorModel(node=2, range=50.0, detection_prob=1.0, clutter_rate=1e-6, mount=(100.0, 100.0)),
        ),
        motion=CtModelParams(),
    )


def test_criterion_4_double_counting():
    start = time.perf_counter()
    cfg = _crossing_fixture_config()
    truth = generate_truth(cfg)
    window = range(121, 149)  # object in both FoVs, second track confirmed
    means = {}
    for mode in ("ours", "baseline"):
        rc = RunConfig(scenario="inline", mode=mode, consensus_iterations=3, particles=500, seed=1)
        h = simulate_run(cfg, truth, rc, 0)
        means[mode] = float(
            np.mean([np.mean([len(h.estimates[(n, k)]) for n in (1, 2)]) for k in window])
        )
    truth_card = 1.0
    assert means["baseline"] >= truth_card + 1.0
    assert abs(means["ours"] - truth_card) <= 0.2
    elapsed = time.perf_counter() - start
    assert elapsed < 60.0
    report(
        4,
        f"baseline steady cardinality {means['baseline']:.2f} >= 2, "
        f"ours {means['ours']:.2f} within 0.2 of truth, {elapsed:.0f}s",
    )


def test_criterion_5_consensus_propagation(rng):
    start = time.perf_counter()
    n = 6
    graph = NetworkGraph(tuple(range(1, n + 1)), frozenset((i, i + 1) for i in range(1, n)))
    posts = {
        i: LmbDensity(
            (component((1, 1, 1), 0.95, 0, 0, n=32),) if i == 1 else (), time=1, owner=i
        )
        for i in range(1, n + 1)
    }
    cfg = FusionConfig(consensus_iterations=3, merged_particles=256)
    out = run_consensus(posts, graph, cfg, rng)
    for node in (1, 2, 3, 4):
        c = out[node].get(Label(1, 1, 1))
        assert c is not None and c.existence > 0.9
    for node in (5, 6):
        assert Label(1, 1, 1) not in out[node]
    elapsed = time.perf_counter() - start
    assert elapsed < 60.0
    report(5, f"object extractable at nodes 1-4 and absent at 5-6 after N=3 rounds, {elapsed:.1f}s")


@pytest.fixture(scope="module")
def paper10_runs():
    cfg = load_scenario("paper10")
    truth = generate_truth(cfg)
    histories = {"ours": [], "baseline": []}
    for mode in ("ours", "baseline"):
        for run_index in range(MC_RUNS):
            rc = RunConfig(
                scenario="paper10", mode=mode, consensus_iterations=3, particles=1000, seed=2026
            )
            t0 = time.perf_counter()
            h = simulate_run(cfg, truth, rc, run_index)
            histories[mode].append(h)
            print(
                f"\n  paper10 {mode} run {run_index + 1}/{MC_RUNS}: {time.perf_counter() - t0:.0f}s",
                flush=True,
            )
    return histories


def test_criterion_6_paper10_scenario(paper10_runs):
    metrics = MetricsConfig(cutoff=50.0, order=1.0, window=10)

    # (a) cardinality error of "ours" under 1 averaged over scans 30..200
    errors = []
    for h in paper10_runs["ours"]:
        rows = [(k, est, total) for k, est, total, _ in cardinality_report(h) if 30 <= k <= 200]
        errors.append(float(np.mean([abs(est - total) for _, est, total in rows])))
    card_err = float(np.mean(errors))
    assert card_err < 1.0

    # (b) mean OSPA(2) of "ours" strictly below "baseline"
    means = {}
    spikes = {}
    for mode, hs in paper10_runs.items():
        vals = []
        spike_vals = []
        for h in hs:
            for k, v in ospa2_series(h, metrics):
                vals.append(v)
                if 200 <= k <= 250 or k >= 290:
                    spike_vals.append(v)
        means[mode] = float(np.mean(vals))
        spikes[mode] = float(np.mean(spike_vals))
    assert means["ours"] < means["baseline"]

    # (c) spikes near departures are permitted; report them for inspection
    report(
        6,
        f"runs={MC_RUNS}/mode: ours cardinality error {card_err:.2f} < 1; "
        f"mean OSPA2 ours {means['ours']:.2f} < baseline {means['baseline']:.2f}; "
        f"departure-window OSPA2 ours {spikes['ours']:.2f} (spikes permitted)",
    )


def test_criterion_7_filter_oracles(rng):
    # missed-detection update against the closed-form Bernoulli posterior
    n = 100_000
    r, pd = 0.5, 0.95
    states = np.zeros((n, 5))
    states[:, 0] = 10.0 + np.random.default_rng(0).standard_normal(n) * 2.0
    states[:, 2] = 5.0
    d = LmbDensity((BernoulliComponent(Label(1, 1, 1), r, ParticleSet.uniform(states)),), time=0, owner=1)
    sensor = SensorModel(node=1, range=500.0, detection_prob=pd, clutter_rate=10.0, mount=(0.0, 0.0))
    post = update(d, [], sensor, (0, 0), FilterConfig(particles_per_component=n), rng)
    want = bernoulli_miss_posterior(r, pd)
    assert post.components[0].existence == pytest.approx(want, rel=0.01)

    # association enumeration equals brute-force partial injections
    checked = 0
    for n_c in (1, 2, 3):
        for m in (0, 1, 2, 3):
            events, weights = enumerate_associations(np.zeros(n_c), np.zeros((n_c, m)), budget=10_000)
            got = {tuple(e) for e in events.tolist()}
            want_set = {tuple(h) for h in all_partial_injections(n_c, m)}
            assert got == want_set
            assert len(events) == partial_injection_count(n_c, m)
            assert weights.sum() == pytest.approx(1.0, abs=1e-9)
            checked += 1
    report(7, f"closed-form miss update within 1% at 1e5 particles; {checked} count cases match brute force")


def test_criterion_8_metric_axioms():
    rng = np.random.default_rng(88)
    for _ in range(1000):
        sets = [rng.random((int(rng.integers(0, 4)), 2)) * 100 for _ in range(3)]
        a, b, c = sets
        assert ospa(a, b, 50, 1) == pytest.approx(ospa(b, a, 50, 1), abs=1e-9)
        assert ospa(a, a, 50, 1) == 0.0
        assert ospa(a, b, 50, 1) <= ospa(a, c, 50, 1) + ospa(c, b, 50, 1) + 1e-9

    for size in range(1, 7):
        for _ in range(10):
            m = rng.integers(0, 60, (size, size)).astype(float)
            _, cost = optimal_assignment(m)
            assert cost == pytest.approx(brute_force_assignment(m))

    cfg = MetricsConfig(cutoff=50.0, order=1.0, window=10)
    tracks = {Label(1, 1, 1): {k: (float(k), 0.0) for k in range(1, 21)}}
    truth = {7: {k: (float(k), 0.0) for k in range(1, 21)}}
    assert ospa2(tracks, truth, 20, cfg) == 0.0
    assert ospa2({}, truth, 20, cfg) == 50.0
    offset = {Label(1, 1, 1): {k: (float(k), 5.0) for k in range(1, 21)}}
    assert ospa2(offset, truth, 20, cfg) == pytest.approx(5.0)
    report(8, "OSPA axioms on 1e3 triples, assignment oracle to 6x6, OSPA2 examples exact")


def test_criterion_9_determinism(tmp_path, rng):
    scenario = {
        "version": "v1",
        "name": "det",
        "area": [0, 0, 200, 200],
        "dt": 0.1,
        "scans": 25,
        "comm_range": 150.0,
        "vehicles": [
            {"id": 1, "birth": 1, "death": 25, "speed": 10.0, "waypoints": [[175, 100], [80, 100]]}
        ],
        "sensors": [
            {"id": 1, "fixed": [120, 100], "range": 50.0, "clutter_rate": 3.0},
            {"id": 2, "fixed": [40, 100], "range": 50.0, "clutter_rate": 3.0},
        ],
    }
    p = tmp_path / "det.scenario"
    p.write_text(json.dumps(scenario))
    blobs = []
    for tag in ("a", "b"):
        rc = RunConfig(
            scenario=str(p), mode="ours", consensus_iterations=2, particles=200,
            seed=99, runs=1, out=str(tmp_path / tag),
        )
        d = simulate(rc)[0]
        blobs.append(tuple((d / f).read_bytes() for f in ("tracks.csv", "truth.csv", "cardinality.csv")))
    assert blobs[0] == blobs[1]

    gen = np.random.default_rng(7)
    for _ in range(1000):
        msg = random_message(gen, n_comps=int(gen.integers(0, 4)), n_particles=int(gen.integers(1, 6)))
        assert messages_equal(deserialize(serialize(msg)), msg)
    report(9, "byte-identical CSVs for identical config+seed; 1e3 serialization round-trips exact")
