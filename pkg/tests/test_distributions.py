import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from oracles import law_cdf_mass, point_probability, random_bayes_net
from probverify.distributions import (
    BayesNet,
    BayesNode,
    Categorical,
    Distribution,
    DistributionError,
    IntegerPMF,
    Point,
    TruncNormal,
    Uniform,
    Variable,
    VariableLayout,
    box_probability,
    compile_bayes_net,
    distribution_from_dict,
    distribution_to_dict,
    law_from_dict,
    layout_from_dict,
    layout_to_dict,
    sample,
    support_box,
)


def _layout_cat(k=3):
    return VariableLayout((Variable("c", "continuous", (0,)), Variable("g", "categorical", tuple(range(1, 1 + k)))))


def test_layout_validation():
    with pytest.raises(DistributionError):
        VariableLayout((Variable("a", "continuous", (0,)), Variable("b", "continuous", (2,))))
    with pytest.raises(DistributionError):
        Variable("g", "categorical", (0,))
    with pytest.raises(DistributionError):
        Variable("a", "ordinal", (0,))
    lay = _layout_cat()
    assert lay.n_dims == 4 and lay.dim_kinds() == ["continuous"] + ["categorical"] * 3
    assert layout_from_dict(layout_to_dict(lay)) == lay


def test_uniform_mass():
    u = Uniform(0.0, 4.0)
    np.testing.assert_allclose(u.mass(np.array([1.0, -1.0, 3.0]), np.array([2.0, 1.0, 9.0])), [0.25, 0.25, 0.25])


@given(st.floats(-3, 3), st.floats(0.1, 3), st.floats(-5, 5), st.floats(0, 5))
@settings(max_examples=100)
def test_trunc_normal_mass_matches_scipy(mean, std, a, width):
    law = TruncNormal(mean, std, mean - 2 * std, mean + 3 * std)
    got = law.mass(np.array([a]), np.array([a + width]))[0]
    ref = law_cdf_mass(law, a, a + width)
    assert got == pytest.approx(float(ref), abs=1e-12)


def test_normal_far_tail_keeps_relative_accuracy():
    law = TruncNormal(0.0, 1.0)
    got = law.mass(np.array([9.0]), np.array([10.0]))[0]
    ref = stats.norm.sf(9.0) - stats.norm.sf(10.0)
    assert got == pytest.approx(ref, rel=1e-10)
    assert got > 0


def test_normal_support_is_quantile_clipped():
    lo, hi = TruncNormal(1.0, 2.0).support()
    assert stats.norm.cdf(lo, 1.0, 2.0) == pytest.approx(1e-12, rel=1e-6)
    assert stats.norm.sf(hi, 1.0, 2.0) == pytest.approx(1e-12, rel=1e-6)


def test_integer_pmf_mass_and_split_additivity():
    law = IntegerPMF.uniform_range(17, 95)
    assert law.mass(np.array([17.0]), np.array([95.0]))[0] == pytest.approx(1.0)
    left = law.mass(np.array([17.0]), np.array([56.0]))[0]
    right = law.mass(np.array([57.0]), np.array([95.0]))[0]
    assert left == pytest.approx(40 / 79) and left + right == pytest.approx(1.0, abs=1e-15)
    assert law.mass(np.array([17.2]), np.array([17.9]))[0] == 0.0


def test_integer_pmf_validation():
    with pytest.raises(DistributionError):
        IntegerPMF((0.5, 1.0), (0.5, 0.5))
    with pytest.raises(DistributionError):
        IntegerPMF((0, 1), (0.5, 0.6))


dim_states = st.sampled_from([(0.0, 0.0), (0.0, 1.0), (1.0, 1.0)])


@given(st.lists(dim_states, min_size=3, max_size=3))
def test_categorical_mass_matches_one_hot_enumeration(states):
    w = (0.2, 0.5, 0.3)
    law = Categorical(w)
    lo = np.array([s[0] for s in states])
    hi = np.array([s[1] for s in states])
    expect = sum(w[c] for c in range(3) if np.all((lo <= np.eye(3)[c]) & (np.eye(3)[c] <= hi)))
    assert law.mass(lo[None], hi[None])[0] == pytest.approx(expect)


def test_categorical_one_hot_split_partitions_mass():
    dist = Distribution.product(_layout_cat(), {"c": Uniform(0, 1), "g": Categorical((0.2, 0.5, 0.3))})
    root = support_box(dist)
    a_lo, a_hi = root.lo.copy(), root.hi.copy()
    a_lo[1:], a_hi[1:] = [0, 1, 0], [0, 1, 0]
    b_lo, b_hi = root.lo.copy(), root.hi.copy()
    b_lo[2] = b_hi[2] = 0
    pa = box_probability(dist, a_lo, a_hi)
    pb = box_probability(dist, b_lo, b_hi)
    assert pa == pytest.approx(0.5) and pa + pb == pytest.approx(1.0)


def test_mixture_validation():
    lay = VariableLayout.continuous(1)
    with pytest.raises(DistributionError):
        Distribution(lay, ((0.5, {"x1": Uniform(0, 1)}), (0.4, {"x1": Uniform(1, 2)})))
    with pytest.raises(DistributionError):
        Distribution(lay, ((1.0, {}),))
    with pytest.raises(DistributionError):
        Distribution(lay, ((1.0, {"x1": IntegerPMF.uniform_range(0, 2)}),))
    with pytest.raises(DistributionError):
        Distribution(_layout_cat(), ((1.0, {"c": Uniform(0, 1), "g": Categorical((0.5, 0.5))}),))


def test_mixture_box_probability_hand_value():
    lay = VariableLayout.continuous(2)
    dist = Distribution(lay, (
        (0.25, {"x1": Uniform(0, 1), "x2": Uniform(0, 2)}),
        (0.75, {"x1": Point(0.5), "x2": Uniform(0, 1)}),
    ))
    # 0.25 * 0.5 * 0.25 + 0.75 * 1 * 0.5
    assert box_probability(dist, np.array([0.0, 0.0]), np.array([0.5, 0.5])) == pytest.approx(0.25 * 0.5 * 0.25 + 0.75 * 0.5)
    batch = box_probability(dist, np.zeros((3, 2)), np.tile([1.0, 2.0], (3, 1)))
    np.testing.assert_allclose(batch, 1.0)


def test_support_box_unions_components():
    lay = VariableLayout.continuous(1)
    dist = Distribution(lay, ((0.5, {"x1": Uniform(0, 1)}), (0.5, {"x1": Uniform(3, 4)})))
    b = support_box(dist)
    assert b.lo.tolist() == [0.0] and b.hi.tolist() == [4.0]
    dist2 = Distribution.product(_layout_cat(), {"c": Point(2.0), "g": Categorical((0.0, 1.0, 0.0))})
    b2 = support_box(dist2)
    assert b2.lo.tolist() == [2.0, 0.0, 1.0, 0.0] and b2.hi.tolist() == [2.0, 0.0, 1.0, 0.0]


def test_sample_respects_layout():
    dist = Distribution.product(_layout_cat(), {"c": TruncNormal(0, 1, -1, 1), "g": Categorical((0.2, 0.5, 0.3))})
    x = sample(dist, np.random.default_rng(0), 20000)
    assert np.all(x[:, 1:].sum(axis=1) == 1) and np.all(np.abs(x[:, 0]) <= 1)
    assert np.mean(x[:, 2]) == pytest.approx(0.5, abs=0.02)


def test_json_round_trip():
    lay = _layout_cat()
    d = {
        "type": "mixture",
        "components": [
            {"weight": 0.4, "factors": {"c": {"type": "normal", "mean": 0, "std": 1}, "g": {"type": "categorical", "weights": [0.1, 0.2, 0.7]}}},
            {"weight": 0.6, "factors": {"c": {"type": "trunc_normal", "mean": 0, "std": 1, "low": -1, "high": 2}, "g": {"type": "categorical", "weights": [1, 0, 0]}}},
        ],
    }
    dist = distribution_from_dict(d, lay)
    again = distribution_from_dict(distribution_to_dict(dist), lay)
    lo, hi = np.array([-0.5, 0, 0, 0]), np.array([0.7, 1, 1, 1])
    assert box_probability(dist, lo, hi) == box_probability(again, lo, hi)
    with pytest.raises(DistributionError):
        law_from_dict({"type": "beta"})
    with pytest.raises(DistributionError):
        law_from_dict({"type": "uniform", "low": 0})


# --- Bayesian networks ------------------------------------------------------


def _joint_brute_force(bn: BayesNet):
    """Marginal probability of each observed assignment by summing the full joint."""
    discrete = [n for n in bn.nodes if n.cpt is not None]
    by_name = {n.name: n for n in bn.nodes}
    out = {}
    for states in itertools.product(*(range(n.cpt.shape[1]) for n in discrete)):
        s = dict(zip((n.name for n in discrete), states))
        p = 1.0
        for n in discrete:
            row = 0
            for par in n.parents:
                row = row * by_name[par].cpt.shape[1] + s[par]
            p *= n.cpt[row, s[n.name]]
        key = tuple((n.variable, s[n.name]) for n in discrete if n.variable is not None)
        out[key] = out.get(key, 0.0) + p
    return out


def test_bayes_compile_matches_brute_force_joint():
    for seed in range(5):
        bn = random_bayes_net(np.random.default_rng(seed))
        # drop the continuous leaf: compare the discrete marginals exactly
        disc_layout = VariableLayout((Variable("cat", "categorical", (0, 1)), Variable("n0", "integer", (2,))))
        nodes = [n for n in bn.nodes if n.laws is None]
        bn2 = BayesNet(nodes, disc_layout)
        dist = compile_bayes_net(bn2)
        for key, p in _joint_brute_force(bn2).items():
            s = dict(key)
            x = np.zeros(3)
            x[s["cat"]] = 1.0
            x[2] = bn2.nodes[2].values[s["n0"]]
            assert point_probability(dist, x) == pytest.approx(p, rel=1e-12, abs=1e-15)


def test_bayes_compile_cap_and_validation():
    lay = VariableLayout((Variable("a", "integer", (0,)),))
    with pytest.raises(DistributionError):
        compile_bayes_net(BayesNet([BayesNode("a", variable="a", cpt=[[0.5, 0.5]])], lay), cap=1)
    with pytest.raises(DistributionError):
        BayesNet([BayesNode("a", parents=("b",), variable="a", cpt=[[1.0]])], lay)
    with pytest.raises(DistributionError):
        BayesNode("a", cpt=[[0.5, 0.6]])
    cyc = [BayesNode("a", parents=("b",), variable="a", cpt=[[1.0], [1.0]]), BayesNode("b", parents=("a",), cpt=[[0.5, 0.5]])]
    with pytest.raises(DistributionError):
        BayesNet(cyc, lay)


def test_bayes_continuous_leaf_per_parent_configuration():
    lay = VariableLayout((Variable("s", "categorical", (0, 1)), Variable("h", "continuous", (2,))))
    bn = BayesNet([
        BayesNode("s", variable="s", cpt=[[0.3, 0.7]]),
        BayesNode("h", parents=("s",), variable="h", laws=(Uniform(0, 1), Uniform(1, 3))),
    ], lay)
    dist = compile_bayes_net(bn)
    # P(s=1, h in [1, 2]) = 0.7 * 0.5
    assert box_probability(dist, np.array([0, 1, 1.0]), np.array([0, 1, 2.0])) == pytest.approx(0.35)


def test_bayes_sampling_agrees_with_compiled_mixture():
    bn = random_bayes_net(np.random.default_rng(3))
    dist = compile_bayes_net(bn)
    x = bn.sample(np.random.default_rng(4), 200_000)
    lo, hi = np.array([0.0, 0.0, 0.0, -0.5]), np.array([1.0, 1.0, 1.0, 1.0])
    p = box_probability(dist, lo, hi)
    emp = np.mean(np.all((x >= lo) & (x <= hi), axis=1))
    assert abs(emp - p) <= 4 * math.sqrt(p * (1 - p) / len(x)) + 1e-12
