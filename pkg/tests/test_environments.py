import json
import math

import numpy as np
import pytest

from nsbandit.environments import (
    NssbpSpec,
    RegretCurve,
    adversarial_two_segment,
    env_log_likelihood,
    env_step,
    gen_geometric_adversarial,
    gen_geometric_uniform,
    gen_stationary,
    load_spec,
    pseudo_regret_step,
    save_spec,
    spec_from_dict,
    spec_to_dict,
)
from nsbandit.errors import InvalidArm, OutOfHorizon
from nsbandit.ptw import Segment


def check_partition(spec):
    expect = 1
    for seg, theta in zip(spec.partition, spec.params):
        assert seg.c == expect and seg.d >= seg.c
        assert len(theta) == spec.num_arms
        assert all(0.0 <= th <= 1.0 for th in theta)
        expect = seg.d + 1
    assert expect == spec.horizon + 1


def test_geometric_uniform_coverage():
    rng = np.random.default_rng(0)
    for _ in range(2000):
        spec = gen_geometric_uniform(0.1, 3, 100, rng)
        check_partition(spec)


def test_geometric_uniform_p_one_gives_unit_segments():
    rng = np.random.default_rng(1)
    spec = gen_geometric_uniform(1.0, 2, 20, rng)
    assert all(seg.length == 1 for seg in spec.partition)
    # Parameters are resampled for every unit segment.
    assert len({tuple(th) for th in spec.params}) > 1


def test_geometric_mean_length():
    # Non-truncated segment lengths average 1/p.
    rng = np.random.default_rng(2)
    spec = gen_geometric_uniform(0.001, 1, 10_000_000, rng)
    lengths = [seg.length for seg in spec.partition[:-1]]
    assert len(lengths) > 5000
    assert abs(np.mean(lengths) - 1000.0) / 1000.0 < 0.05


def test_gen_stationary():
    rng = np.random.default_rng(3)
    spec = gen_stationary(4, 500, rng)
    assert spec.partition == (Segment(1, 500),)
    other = gen_stationary(4, 500, np.random.default_rng(4))
    assert spec.params != other.params
    means = [gen_stationary(1, 10, np.random.default_rng(k)).params[0][0] for k in range(2000)]
    assert abs(np.mean(means) - 0.5) < 3 * 0.5 / math.sqrt(12 * len(means)) * 2


def test_adversarial_generator_keeps_best_arm():
    rng = np.random.default_rng(5)
    for _ in range(200):
        spec = gen_geometric_adversarial(0.05, 4, 400, rng)
        check_partition(spec)
        for prev, cur in zip(spec.params, spec.params[1:]):
            best = max(prev)
            for a in range(4):
                if prev[a] == best:
                    assert cur[a] == prev[a]
            changed = [a for a in range(4) if prev[a] != best]
            if changed:
                assert any(cur[a] != prev[a] for a in changed)


def test_adversarial_generator_degenerates_to_stationary():
    spec = gen_geometric_adversarial(1e-12, 3, 1000, np.random.default_rng(6))
    assert len(spec.partition) == 1


def test_fixed_adversarial_instance():
    spec = adversarial_two_segment()
    assert spec.num_arms == 10
    assert spec.horizon == 10_000
    assert spec.partition == (Segment(1, 5000), Segment(5001, 10_000))
    # Arm 1 keeps its mean across the change.
    assert spec.params[0][0] == spec.params[1][0] == 0.2
    assert spec.params[1][1] == 0.8
    assert max(spec.params[1]) - sorted(spec.params[1])[-2] == pytest.approx(0.6)
    check_partition(spec)


def test_env_step_extremes():
    spec = NssbpSpec(2, 10, (Segment(1, 10),), ((1.0, 0.0),))
    rng = np.random.default_rng(7)
    assert all(env_step(spec, t, 1, rng) == 1 for t in range(1, 11))
    assert all(env_step(spec, t, 2, rng) == 0 for t in range(1, 11))


def test_env_step_frequency():
    spec = NssbpSpec(1, 10**5, (Segment(1, 10**5),), ((0.3,),))
    rng = np.random.default_rng(8)
    hits = sum(env_step(spec, t, 1, rng) for t in range(1, 10**5 + 1))
    sd = math.sqrt(0.3 * 0.7 * 10**5)
    assert abs(hits - 0.3 * 10**5) < 3 * sd


def test_env_step_validation():
    spec = adversarial_two_segment()
    rng = np.random.default_rng(9)
    with pytest.raises(OutOfHorizon):
        env_step(spec, 0, 1, rng)
    with pytest.raises(OutOfHorizon):
        env_step(spec, 10_001, 1, rng)
    with pytest.raises(InvalidArm):
        env_step(spec, 1, 11, rng)


def test_pseudo_regret_values():
    spec = adversarial_two_segment()
    assert pseudo_regret_step(spec, 100, 1) == 0.0
    assert pseudo_regret_step(spec, 100, 2) == pytest.approx(0.1)
    assert pseudo_regret_step(spec, 7000, 1) == pytest.approx(0.6)
    assert pseudo_regret_step(spec, 7000, 2) == 0.0


def test_pseudo_regret_nonnegative_iff_argmax():
    rng = np.random.default_rng(10)
    spec = gen_geometric_uniform(0.05, 3, 200, rng)
    for t in (1, 50, 137, 200):
        theta = spec.params[spec.segment_index(t)]
        for arm in (1, 2, 3):
            r = pseudo_regret_step(spec, t, arm)
            assert r >= 0.0
            assert (r == 0.0) == (theta[arm - 1] == max(theta))


def test_log_likelihood_half():
    spec = NssbpSpec(2, 64, (Segment(1, 64),), ((0.5, 0.5),))
    actions = [1, 2] * 32
    percepts = [0, 1] * 32
    assert env_log_likelihood(spec, actions, percepts) == pytest.approx(-64.0)


def test_log_likelihood_certain():
    spec = NssbpSpec(1, 16, (Segment(1, 16),), ((1.0,),))
    assert env_log_likelihood(spec, [1] * 16, [1] * 16) == 0.0
    assert env_log_likelihood(spec, [1] * 16, [1] * 15 + [0]) == -math.inf


def test_log_likelihood_chain_rule():
    rng = np.random.default_rng(11)
    spec = gen_geometric_uniform(0.02, 3, 256, rng)
    actions, percepts = [], []
    acc = 0.0
    for t in range(1, 257):
        a = int(rng.integers(1, 4))
        x = env_step(spec, t, a, rng)
        th = spec.theta(t, a)
        acc += math.log2(th if x else 1 - th)
        actions.append(a)
        percepts.append(x)
    assert abs(env_log_likelihood(spec, actions, percepts) - acc) < 1e-12


def test_log_likelihood_length_mismatch():
    spec = adversarial_two_segment()
    with pytest.raises(ValueError):
        env_log_likelihood(spec, [1, 2], [1])


def test_spec_invariant_validation():
    with pytest.raises(ValueError):
        NssbpSpec(2, 10, (Segment(1, 4), Segment(6, 10)), ((0.5, 0.5), (0.5, 0.5)))
    with pytest.raises(ValueError):
        NssbpSpec(2, 10, (Segment(1, 10),), ((0.5, 1.5),))


def test_serialization_round_trip(tmp_path):
    rng = np.random.default_rng(12)
    spec = gen_geometric_adversarial(0.1, 3, 64, rng)
    data = spec_to_dict(spec)
    assert set(data) == {"num_arms", "horizon", "segments"}
    again = spec_from_dict(json.loads(json.dumps(data)))
    assert again == spec

    path = tmp_path / "spec.json"
    save_spec(spec, path)
    assert load_spec(path) == spec


def test_regret_curve_properties():
    curve = RegretCurve(np.array([0.0, 0.1, 0.1, 0.5]))
    assert curve.final == pytest.approx(0.5)
    assert len(curve) == 4
    assert (np.diff(curve.values) >= 0).all()
