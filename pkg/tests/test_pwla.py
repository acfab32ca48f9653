import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from pwla_mas.dataset import AttributeSpec, Dataset
from pwla_mas.errors import AllWeightsZero, BadIndex, BadPolicy, DimensionMismatch
from pwla_mas.pwla import (
    NormalizedMatrix,
    PotentialWeights,
    ReductionPolicy,
    analyze,
    apply_normalization,
    normalize,
    parse_weights_snapshot,
    potential_weights,
    project,
    rank,
    ratio_weights,
    reduce,
    weights_snapshot,
)

from oracles import oracle_weights


def ds_of(values):
    values = np.asarray(values, dtype=float)
    n, d = values.shape
    return Dataset(tuple(AttributeSpec(f"a{j}") for j in range(d)), tuple(f"r{i:03d}" for i in range(n)), values)


def nm_of(values):
    values = np.asarray(values, dtype=float)
    d = values.shape[1]
    return NormalizedMatrix(values, np.zeros(d), np.ones(d), frozenset(), float(values.mean()))


# normalize ------------------------------------------------------------------

def test_normalize_linear_column():
    assert normalize(ds_of([[2], [4], [6]])).values[:, 0].tolist() == [0.0, 0.5, 1.0]


def test_normalize_constant_column():
    nm = normalize(ds_of([[5, 1], [5, 2], [5, 3]]))
    assert nm.values[:, 0].tolist() == [0.0, 0.0, 0.0]
    assert nm.constant_cols == {0}


def test_normalize_two_by_two():
    nm = normalize(ds_of([[0, 10], [10, 0]]))
    assert nm.values.tolist() == [[0.0, 1.0], [1.0, 0.0]]
    assert nm.global_mean == 0.5


def test_normalize_keeps_training_stats():
    nm = normalize(ds_of([[2, -1], [6, 3]]))
    assert nm.col_min.tolist() == [2.0, -1.0]
    assert nm.col_max.tolist() == [6.0, 3.0]
    assert nm.attribute_names == ("a0", "a1")


# apply_normalization -------------------------------------------------------

def test_apply_normalization_midpoint_and_clamp():
    nm = normalize(ds_of([[2], [6]]))
    assert apply_normalization(nm, [4]).tolist() == [0.5]
    assert apply_normalization(nm, [8]).tolist() == [1.0]
    assert apply_normalization(nm, [-3]).tolist() == [0.0]


def test_apply_normalization_constant_and_mismatch():
    nm = normalize(ds_of([[5, 0], [5, 1]]))
    assert apply_normalization(nm, [99, 1]).tolist() == [0.0, 1.0]
    with pytest.raises(DimensionMismatch):
        apply_normalization(nm, [1, 2, 3])


# potential_weights ---------------------------------------------------------

def test_weights_symmetric_columns():
    pw = potential_weights(nm_of([[0, 1], [0.5, 0.5], [1, 0]]))
    assert pw.w.tolist() == [1.0, 1.0]


def test_weights_hand_checked():
    # g = 0.25; col 0: |0-.25| + |1-.25| = 1.0, col 1: 2 * .25 = 0.5
    pw = potential_weights(nm_of([[0, 0], [1, 0]]))
    assert pw.w.tolist() == [1.0, 0.5]


def test_weights_constant_single_column():
    pw = potential_weights(normalize(ds_of([[3], [3], [3]])))
    assert pw.w.tolist() == [0.0]


# reduce ------------------------------------------------------------------

def pw_of(w, constant=()):
    return PotentialWeights(np.asarray(w, dtype=float), frozenset(constant))


def test_reduce_mean_threshold():
    pw = reduce(pw_of([1.0, 0.5]), ReductionPolicy.mean_threshold())
    assert (pw.strong, pw.weak) == ((0,), (1,))


def test_reduce_mean_ignores_constant_columns():
    # mean over non-constant columns is 0.75, not 0.5
    pw = reduce(pw_of([1.0, 0.0, 0.5], constant=[1]))
    assert pw.strong == (0,)


def test_reduce_top_k_identity():
    pw = reduce(pw_of([1, 1, 1]), ReductionPolicy.top_k(3))
    assert (pw.strong, pw.weak) == ((0, 1, 2), ())


def test_reduce_top_k_ties_to_lower_index():
    pw = reduce(pw_of([0.5, 2.0, 0.5, 0.5]), ReductionPolicy.top_k(2))
    assert pw.strong == (0, 1)


def test_reduce_fraction_of_max():
    pw = reduce(pw_of([1.0, 0.8, 0.2]), ReductionPolicy.fraction_of_max(0.8))
    assert pw.strong == (0, 1)


@pytest.mark.parametrize("policy", [ReductionPolicy(), ReductionPolicy.top_k(1), ReductionPolicy.fraction_of_max(0.5)])
def test_reduce_all_zero(policy):
    with pytest.raises(AllWeightsZero):
        reduce(pw_of([0, 0]), policy)


def test_reduce_mean_keeps_max_of_equal_weights():
    w = [0.1] * 7  # mean of equal floats can round above them
    assert reduce(pw_of(w)).strong == tuple(range(7))


def test_policy_parse():
    assert ReductionPolicy.parse("mean") == ReductionPolicy()
    assert ReductionPolicy.parse("topk:3") == ReductionPolicy.top_k(3)
    assert ReductionPolicy.parse("frac:0.5") == ReductionPolicy.fraction_of_max(0.5)
    for bad in ("topk:0", "frac:2", "median", "topk:x"):
        with pytest.raises(BadPolicy):
            ReductionPolicy.parse(bad)
    with pytest.raises(BadPolicy):
        reduce(pw_of([1, 2]), ReductionPolicy.top_k(3))


# project -----------------------------------------------------------------

def test_project_identity():
    nm = normalize(ds_of([[1, 5, 2], [3, 0, 9], [2, 2, 2]]))
    p = project(nm, [0, 1, 2])
    assert np.array_equal(p.values, nm.values)
    assert p.global_mean == nm.global_mean


def test_project_subset():
    nm = normalize(ds_of([[1, 5, 2], [3, 0, 9], [2, 2, 2]]))
    p = project(nm, [0, 2])
    assert np.array_equal(p.values, nm.values[:, [0, 2]])
    assert p.attribute_names == ("a0", "a2")
    assert p.col_min.tolist() == [1.0, 2.0]
    assert p.global_mean == pytest.approx(nm.values[:, [0, 2]].mean(), abs=0)


def test_project_bad_index():
    nm = normalize(ds_of([[1, 5, 2], [3, 0, 9]]))
    with pytest.raises(BadIndex):
        project(nm, [5])
    with pytest.raises(BadIndex):
        project(nm, [])


# properties --------------------------------------------------------------

matrices = st.tuples(st.integers(1, 30), st.integers(1, 10)).flatmap(
    lambda s: arrays(np.float64, s, elements=st.floats(-100, 100, allow_nan=False, allow_infinity=False))
)


@settings(max_examples=200, deadline=None)
@given(matrices)
def test_weights_match_oracle(raw):
    pw = potential_weights(normalize(ds_of(raw)))
    assert np.allclose(pw.w, oracle_weights(raw.tolist()), rtol=0, atol=1e-12)


@settings(max_examples=100, deadline=None)
@given(matrices, st.floats(0.01, 100), st.floats(-1e3, 1e3), st.data())
def test_affine_column_map_leaves_normalization_unchanged(raw, a, b, data):
    j = data.draw(st.integers(0, raw.shape[1] - 1))
    moved = raw.copy()
    moved[:, j] = a * raw[:, j] + b
    spread = np.ptp(raw[:, j])
    if 0 < spread < 1e-6:
        return  # spread below the resolution of the shifted column
    before, after = normalize(ds_of(raw)).values[:, j], normalize(ds_of(moved)).values[:, j]
    if spread == 0:
        assert np.array_equal(before, after)
    else:
        assert np.allclose(before, after, atol=1e-9)


@settings(max_examples=100, deadline=None)
@given(matrices, st.floats(1.0, 3.0), st.data())
def test_pushing_a_column_away_from_mean_never_lowers_its_weight(raw, factor, data):
    nm = normalize(ds_of(raw))
    j = data.draw(st.integers(0, nm.d - 1))
    g = nm.global_mean
    values = nm.values.copy()
    values[:, j] = g + factor * (values[:, j] - g)
    moved = NormalizedMatrix(values, nm.col_min, nm.col_max, nm.constant_cols, g, nm.attribute_names)
    assert potential_weights(moved).w[j] >= potential_weights(nm).w[j] - 1e-12


@settings(max_examples=100, deadline=None)
@given(matrices)
def test_ratio_form_ranks_like_deviation_form(raw):
    nm = normalize(ds_of(raw))
    if nm.global_mean <= 0:
        return
    w, r = potential_weights(nm).w, ratio_weights(nm)
    assert np.allclose(r, w / nm.global_mean, rtol=1e-9, atol=1e-9)
    assert rank(w).tolist() == rank(r).tolist()


def test_rank_treats_rounding_noise_as_ties():
    assert rank([1.0, 1.0 + 1e-15, 0.5]).tolist() == [0, 1, 2]
    assert rank([0.5, 2.0, 0.5, 0.7]).tolist() == [1, 3, 0, 2]


def test_deterministic():
    rng = np.random.default_rng(0)
    raw = rng.uniform(-100, 100, size=(25, 6))
    a, b = analyze(ds_of(raw)), analyze(ds_of(raw.copy()))
    assert a.normalized == b.normalized and a.weights == b.weights and a.projected == b.projected


def test_weights_snapshot_round_trip():
    res = analyze(ds_of([[1, 5, 2], [3, 0, 9], [2, 2, 2]]), ReductionPolicy.top_k(2))
    rows = parse_weights_snapshot(weights_snapshot(res.normalized, res.weights))
    assert [r["name"] for r in rows] == ["a0", "a1", "a2"]
    assert [r["weight"] for r in rows] == res.weights.w.tolist()
    assert [r["strong"] for r in rows] == [j in res.weights.strong for j in range(3)]
    assert [r["min"] for r in rows] == [1.0, 0.0, 2.0]
