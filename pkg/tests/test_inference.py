import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from arinfo import ar_model, inference as inf
from arinfo.errors import NumericOverflowError
from arinfo.seeding import SeedSpec


def test_grid_class_examples():
    g = inf.grid_class([[0.0]], 0.9, 3)
    np.testing.assert_allclose(g.members[:, 0, 0], [-0.9, 0.0, 0.9])
    single = inf.grid_class([[0.2, 0.1], [0.0, 0.3]], 0.5, 1)
    assert single.size == 1
    np.testing.assert_array_equal(single[0], [[0.2, 0.1], [0.0, 0.3]])
    center = np.array([[0.2, 0.1], [0.0, 0.3]])
    g2 = inf.grid_class(center, 0.25, 2)
    assert g2.size == 16
    np.testing.assert_allclose(np.abs(g2.members - center), 0.25)


def test_grid_class_cap():
    with pytest.raises(ValueError, match="cap"):
        inf.grid_class(np.zeros((2, 2)), 1.0, 40)
    with pytest.raises(ValueError):
        inf.grid_class([[0.0]], 0.0, 3)


def test_class_rejects_duplicates_and_mixed_dims():
    with pytest.raises(ValueError, match="coincide"):
        inf.HypothesisClass.from_members([0.1, 0.2, 0.1 + 1e-13])
    with pytest.raises(ValueError):
        inf.HypothesisClass.from_members([0.1, np.eye(2)])


def test_with_truth_injects_or_finds():
    g = inf.grid_class([[0.0]], 0.9, 3)
    found = g.with_truth(0.9)
    assert found.size == 3 and found.truth_index == 2
    added = g.with_truth(0.5)
    assert added.size == 4 and added.truth_index == 3
    assert added.index_of(0.5 + 1e-13) == 3
    assert added.index_of(0.55) is None


def test_mle_singleton():
    z = ar_model.simulate(0.5, 30, SeedSpec(0))
    idx, ll = inf.mle_select(z, inf.HypothesisClass.from_members([0.5]))
    assert idx == 0 and ll.shape == (1,)


def test_mle_ties_go_to_smaller_index():
    idx, ll = inf.mle_select(np.zeros((5, 1)), inf.HypothesisClass.from_members([0.4, -0.4]))
    assert ll[0] == ll[1] and idx == 0


def test_mle_log_likelihoods_match_log_density():
    rng = np.random.default_rng(0)
    members = rng.uniform(-1, 1, (7, 2, 2))
    hclass = inf.HypothesisClass(members)
    z = ar_model.simulate(members[3], 25, SeedSpec(1))
    idx, ll = inf.mle_select(z, hclass)
    expected = np.array([ar_model.log_density(z, A) for A in members])
    np.testing.assert_allclose(ll, expected, rtol=1e-13)
    assert idx == int(np.argmax(expected))
    assert np.all(ll[idx] >= ll)


def test_mle_picks_truth_against_distant_alternative():
    hclass = inf.HypothesisClass.from_members([0.5, 0.9])
    hits = sum(
        inf.mle_select(ar_model.simulate(0.5, 200, SeedSpec(42, t)), hclass)[0] == 0
        for t in range(1000)
    )
    assert hits >= 990


def test_mle_all_overflow():
    z = np.full((3, 1), 1e200)
    with pytest.raises(NumericOverflowError):
        inf.mle_select(z, inf.HypothesisClass.from_members([-1.0, -2.0]))


def test_ols_noiseless_recovery():
    rng = np.random.default_rng(2)
    A = rng.uniform(-0.8, 0.8, (3, 3))
    z = np.empty((10, 3))
    z[0] = rng.standard_normal(3)
    for k in range(1, 10):
        z[k] = A @ z[k - 1]
    np.testing.assert_allclose(inf.ols_fit(z), A, atol=1e-10)


def test_ols_two_points():
    np.testing.assert_allclose(inf.ols_fit([1.0, 0.5]), [[0.5]], rtol=1e-15)
    with pytest.raises(ValueError):
        inf.ols_fit([1.0])


def test_ols_rank_deficient_uses_pseudo_inverse():
    z = np.zeros((4, 2))
    z[:, 0] = [1.0, 0.5, 0.25, 0.125]
    Ahat = inf.ols_fit(z)
    assert np.all(np.isfinite(Ahat))
    assert Ahat[0, 0] == pytest.approx(0.5)


def test_ols_consistency():
    close = sum(
        abs(inf.ols_fit(ar_model.simulate(0.5, 10_000, SeedSpec(3, t)))[0, 0] - 0.5) <= 0.05
        for t in range(100)
    )
    assert close >= 95


def test_selection_entropy_examples():
    assert inf.selection_entropy([1000, 0, 0, 0]) == 0.0
    assert inf.selection_entropy([250] * 4) == pytest.approx(math.log(4), abs=1e-15)
    assert inf.selection_entropy([750, 250]) == pytest.approx(0.562335, abs=1e-6)
    with pytest.raises(ValueError):
        inf.selection_entropy([0, 0])
    with pytest.raises(ValueError):
        inf.selection_entropy([3, -1])


@given(st.lists(st.integers(0, 10_000), min_size=1, max_size=40).filter(lambda c: sum(c) > 0))
@settings(max_examples=300, deadline=None)
def test_selection_entropy_bounded_by_log_card(counts):
    h = inf.selection_entropy(counts)
    assert 0.0 <= h <= math.log(len(counts)) + 1e-12


def small_class():
    return inf.grid_class([[0.0]], 0.9, 3).with_truth(0.5)


def test_run_trials_singleton():
    hclass = inf.HypothesisClass.from_members([0.5])
    s = inf.run_trials(0.5, hclass, 30, 50, SeedSpec(0))
    assert s.selection_counts == (50,)
    assert s.mean_weighted_error == 0.0 and s.mean_hellinger_sq == 0.0
    assert s.mean_misselection == 0.0


def test_run_trials_requires_truth_in_class():
    with pytest.raises(ValueError, match="not a member"):
        inf.run_trials(0.5, inf.grid_class([[0.0]], 0.9, 3), 10, 5, SeedSpec(0))


def test_run_trials_misselection_small_at_n100():
    s = inf.run_trials(0.5, small_class(), 100, 500, SeedSpec(1))
    assert sum(s.selection_counts) == 500
    assert s.mean_misselection <= 0.05
    assert 0.0 <= s.mean_hellinger_sq <= 1.0


def test_run_trials_deterministic_across_workers():
    a = inf.run_trials(0.5, small_class(), 40, 300, SeedSpec(2, 1))
    b = inf.run_trials(0.5, small_class(), 40, 300, SeedSpec(2, 1))
    c = inf.run_trials(0.5, small_class(), 40, 300, SeedSpec(2, 1), workers=3)
    assert a == b == c


def test_run_trials_matches_manual_loop():
    hclass = small_class()
    seed = SeedSpec(3, 0)
    s = inf.run_trials(0.5, hclass, 15, 40, seed)
    chosen = []
    for t in range(40):
        z = ar_model.color(seed.generator(t).standard_normal((15, 1)), [[0.5]])
        idx, ll = inf.mle_select(z, hclass)
        assert np.all(ll[idx] >= ll)
        chosen.append(idx)
    assert s.selection_counts == tuple(np.bincount(chosen, minlength=4))


def test_run_trials_mc_hellinger_fallback():
    hclass = inf.HypothesisClass.from_members([0.5, 0.49])
    s = inf.run_trials(0.5, hclass, 2100, 3, SeedSpec(4), hellinger_samples=200)
    assert s.hellinger_method == "mc"
    assert 0.0 <= s.mean_hellinger_sq <= 1.0


def test_run_trials_overflow_carries_trial():
    hclass = inf.HypothesisClass.from_members([2.0, 1.0])
    with pytest.raises(NumericOverflowError) as info:
        inf.run_trials(2.0, hclass, 1100, 2, SeedSpec(0))
    assert info.value.trial == 0


def test_theorem1_singleton_is_trivial():
    hclass = inf.HypothesisClass.from_members([0.5])
    r = inf.theorem1_certificate(inf.run_trials(0.5, hclass, 20, 10, SeedSpec(0)), hclass)
    assert r.lhs == 0.0 and r.mi_estimate == 0.0
    assert r.holds_mi and r.holds_log_card and r.slack_ratio == math.inf


def test_theorem1_log_card_bound():
    hclass = small_class()
    r = inf.theorem1_certificate(inf.run_trials(0.5, hclass, 50, 1000, SeedSpec(5)), hclass)
    assert r.rhs_log_card == pytest.approx(2e4 * math.log(4) / 50, rel=1e-15)
    assert r.rhs_log_card == pytest.approx(554.5, abs=0.05)
    # lhs can never exceed the largest per-member weighted error
    from arinfo.gram import weighted_error
    assert r.lhs <= max(weighted_error(0.5, A, 50) for A in hclass.members)
    assert r.holds_log_card and r.holds_mi
    assert r.rhs_mi <= r.rhs_log_card + 1e-12


def test_theorem2_singleton_and_value():
    hclass = inf.HypothesisClass.from_members([0.5])
    r = inf.theorem2_certificate(inf.run_trials(0.5, hclass, 20, 10, SeedSpec(0)))
    assert (r.e_h2, r.middle_term, r.rhs) == (0.0, 0.0, 0.0) and r.holds
    assert inf.hellinger_log_transform(0.5) == pytest.approx(-2 * math.log(0.75), rel=1e-15)
    assert inf.hellinger_log_transform(0.5) == pytest.approx(0.575364, abs=1e-6)


@given(st.floats(0.0, 1.0, allow_subnormal=False))
def test_log_transform_dominates(e):
    assert e <= inf.hellinger_log_transform(e)
