import json

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from eptsum.balanced import build_balanced_fast, build_balanced_naive
from eptsum.ept import (
    Ept,
    aug_from_json,
    aug_sum,
    aug_to_json,
    augment,
    check_aug,
    correctly_placed,
    correctly_placed_all,
    ept_cost,
    ept_from_json,
    ept_sum_edges,
    ept_sum_leaves,
    ept_to_json,
    leaf,
    node,
    split,
    validate_ept,
)
from eptsum.oracle import enumerate_epts, optimal_ept_sum
from eptsum.tree import InputTree, WeightOverflowError, U64_MAX
from strategies import trees

P3 = InputTree(3, [(0, 1), (1, 2)])
P4 = InputTree(4, [(0, 1), (1, 2), (2, 3)])
STAR4 = InputTree(4, [(0, 1), (0, 2), (0, 3)])
P3_BALANCED = Ept.from_obj(node(0, 1, leaf(0), node(1, 2, leaf(1), leaf(2))))
P4_CATERPILLAR = Ept.from_obj(node(0, 1, leaf(0), node(1, 2, leaf(1), node(2, 3, leaf(2), leaf(3)))))
STAR4_CATERPILLAR = Ept.from_obj(node(0, 1, node(0, 2, node(0, 3, leaf(0), leaf(3)), leaf(2)), leaf(1)))


# -- validation --------------------------------------------------------------

def test_valid_examples():
    assert validate_ept(P3, P3_BALANCED)
    assert validate_ept(InputTree(1, []), Ept.single(0))
    assert validate_ept(P4, P4_CATERPILLAR)
    assert validate_ept(STAR4, STAR4_CATERPILLAR)


def test_partition_violation_at_root():
    bad = Ept.from_obj(node(0, 1, leaf(1), node(1, 2, leaf(0), leaf(2))))
    report = validate_ept(P3, bad)
    assert not report
    assert report.violation == "partition"
    assert report.node == bad.root
    assert "{0}" in report.message and "{1, 2}" in report.message


def test_child_order_violation():
    swapped = Ept.from_obj(node(0, 1, node(1, 2, leaf(1), leaf(2)), leaf(0)))
    assert validate_ept(P3, swapped).violation == "child-order"


def test_bijection_violations():
    missing_vertex = Ept.from_obj(node(0, 1, leaf(0), node(1, 2, leaf(1), leaf(1))))
    assert validate_ept(P3, missing_vertex).violation == "bijection"
    repeated_edge = Ept.from_obj(node(0, 1, leaf(0), node(0, 1, leaf(1), leaf(2))))
    assert validate_ept(P3, repeated_edge).violation == "bijection"
    foreign_edge = Ept.from_obj(node(0, 1, leaf(0), node(0, 2, leaf(1), leaf(2))))
    assert validate_ept(P3, foreign_edge).violation == "bijection"


def test_full_binary_violation():
    t = Ept([-1, 0], [(0, 1), None], [1, -1], [-1, -1], 0)
    assert validate_ept(InputTree(2, [(0, 1)]), t).violation == "full-binary"


def test_restricted_validation():
    t = Ept.from_obj(node(2, 3, leaf(2), leaf(3)))
    assert validate_ept(P4, t, {2, 3})
    assert not validate_ept(P4, t)


# -- evaluation --------------------------------------------------------------

def test_cost_examples():
    assert ept_sum_edges(P3, P3_BALANCED).total == 5
    assert ept_sum_edges(P3, P3_BALANCED).per_internal_node == {(0, 1): 3, (1, 2): 2}
    assert ept_sum_leaves(P3, P3_BALANCED) == 5
    assert ept_sum_leaves(STAR4, STAR4_CATERPILLAR) == 9
    assert ept_sum_edges(InputTree(1, []), Ept.single(0)).total == 0
    weighted = P3.with_weights([5, 1, 1])
    assert ept_sum_leaves(weighted, P3_BALANCED) == 9
    assert ept_sum_edges(weighted, P3_BALANCED).total == 9


def test_edge_weighted_cost():
    g = InputTree(3, [(0, 1), (1, 2)], edge_weights={(0, 1): 2, (1, 2): 3})
    assert ept_sum_edges(g, P3_BALANCED).total == 12
    assert ept_cost(g, P3_BALANCED) == 12
    assert ept_sum_leaves(g, P3_BALANCED) == 12


def test_cost_overflow_is_reported():
    g = InputTree(2, [(0, 1)], [U64_MAX - 1, 1], {(0, 1): 2})
    t = Ept.from_obj(node(0, 1, leaf(0), leaf(1)))
    for f in (lambda: ept_sum_edges(g, t), lambda: ept_sum_leaves(g, t), lambda: ept_cost(g, t)):
        with pytest.raises(WeightOverflowError):
            f()


@settings(max_examples=300, deadline=None)
@given(trees(max_n=16, weights="zero"), st.sampled_from(["fast", "naive"]))
def test_definitions_agree(g, which):
    t = build_balanced_fast(g) if which == "fast" else build_balanced_naive(g)
    assert ept_sum_edges(g, t).total == ept_sum_leaves(g, t) == ept_cost(g, t)


# -- serialization -----------------------------------------------------------

def test_json_shape():
    text = ept_to_json(P3_BALANCED)
    assert text == '{"edge":[0,1],"left":{"vertex":0},"right":{"edge":[1,2],"left":{"vertex":1},"right":{"vertex":2}}}'
    assert json.loads(text) == P3_BALANCED.to_obj()
    assert ept_from_json(text) == P3_BALANCED
    assert ept_from_json(json.dumps(json.loads(text), indent=2)) == P3_BALANCED


@pytest.mark.parametrize(
    "text",
    ['{"subdiv":{"vertex":0}}', "[1]", '{"vertex":0', '{"vertex":"a"}', '{"edge":[0],"left":{"vertex":0}}'],
)
def test_json_rejects_malformed(text):
    with pytest.raises(ValueError):
        ept_from_json(text)


def test_json_structural_problems_reach_the_validator():
    # loading is syntactic only; shape and labels are judged by validate_ept
    pair = InputTree(2, [(0, 1)])
    assert validate_ept(pair, ept_from_json('{"edge":[0,1],"left":{"vertex":0}}')).violation == "full-binary"
    assert validate_ept(pair, ept_from_json('{"edge":[0,1],"left":{"vertex":0},"right":{"vertex":-1}}')).violation == "bijection"


def test_deep_json_round_trip():
    # a star caterpillar nests as deep as the star is large
    n = 5000
    g = InputTree(n, [(0, i) for i in range(1, n)])
    t = build_balanced_fast(g)
    text = ept_to_json(t)
    back = ept_from_json(text)
    assert ept_to_json(back) == text
    assert validate_ept(g, back)


# -- augmented trees ---------------------------------------------------------

def test_augment_examples():
    a = augment(P3, P3_BALANCED)
    assert aug_to_json(a) == (
        '{"edge":[0,1],"left":{"subdiv":{"vertex":0}},'
        '"right":{"edge":[1,2],"left":{"vertex":1},"right":{"subdiv":{"vertex":2}}}}'
    )
    assert aug_sum(P3, a) == 7
    assert check_aug(P3, a) == []
    assert aug_sum(InputTree(1, []), augment(InputTree(1, []), Ept.single(0))) == 0
    pair = InputTree(2, [(0, 1)])
    a2 = augment(pair, build_balanced_fast(pair))
    assert aug_to_json(a2) == '{"edge":[0,1],"left":{"vertex":0},"right":{"subdiv":{"vertex":1}}}'
    assert aug_sum(pair, a2) == 3


def test_aug_json_round_trip():
    a = augment(P4, P4_CATERPILLAR)
    back = aug_from_json(aug_to_json(a))
    assert back.subdiv == a.subdiv and back.ept == a.ept


def test_check_aug_catches_bad_marks():
    a = augment(P3, P3_BALANCED)
    flipped = list(a.subdiv)
    root = a.ept.root
    l, r = a.ept.left[root], a.ept.right[root]
    flipped[l], flipped[r] = flipped[r], flipped[l]
    problems = check_aug(P3, type(a)(a.ept, flipped))
    assert any("heavier" in p for p in problems)


@settings(max_examples=300, deadline=None)
@given(trees(max_n=10, weights="zero"))
def test_aug_lemma_and_round_trip(g):
    _, opt = optimal_ept_sum(g)
    for t in (build_balanced_fast(g), opt):
        a = augment(g, t)
        assert check_aug(g, a) == []
        assert 2 * aug_sum(g, a) <= 3 * ept_cost(g, t)
        assert ept_cost(g, a.erase()) == ept_cost(g, t)


# -- splitting ---------------------------------------------------------------

def test_split_examples():
    tu, tv = split(P4, P4_CATERPILLAR, (1, 2))
    assert ept_to_json(tu) == '{"edge":[0,1],"left":{"vertex":0},"right":{"vertex":1}}'
    assert ept_to_json(tv) == '{"edge":[2,3],"left":{"vertex":2},"right":{"vertex":3}}'
    assert ept_cost(P4, tu) + ept_cost(P4, tv) == 4 < 9

    tu, tv = split(P3, P3_BALANCED, (1, 2))
    assert ept_to_json(tv) == '{"vertex":2}'
    assert ept_cost(P3, tu) == 2 and ept_cost(P3, tv) == 0


def test_split_on_root_edge_returns_children():
    t = build_balanced_fast(STAR4)
    tu, tv = split(STAR4, t, t.edge[t.root])
    left = Ept(t.vertex, t.edge, t.left, t.right, t.left[t.root])
    right = Ept(t.vertex, t.edge, t.left, t.right, t.right[t.root])
    assert {ept_to_json(tu), ept_to_json(tv)} == {ept_to_json(left), ept_to_json(right)}


def test_split_rejects_non_edges():
    with pytest.raises(ValueError):
        split(P3, P3_BALANCED, (0, 2))


@settings(max_examples=150, deadline=None)
@given(trees(min_n=2, max_n=9, weights="zero"), st.data())
def test_split_lemma(g, data):
    epts = list(enumerate_epts(g, limit=9))
    t = epts[data.draw(st.integers(0, len(epts) - 1)) if len(epts) > 1 else 0]
    cost = ept_cost(g, t)
    for x in t.internal_nodes():
        e = t.edge[x]
        below = sum(g.weights[v] for v in t.leaves(x))
        tu, tv = split(g, t, e)
        assert validate_ept(g, tu, tu.leaves())
        assert validate_ept(g, tv, tv.leaves())
        assert e[0] in tu.leaves() and e[1] in tv.leaves()
        parts = ept_cost(g, tu) + ept_cost(g, tv)
        assert parts < cost if below > 0 else parts <= cost


# -- balancedness ------------------------------------------------------------

def test_correctly_placed_examples():
    assert not correctly_placed_all(P4, P4_CATERPILLAR)
    assert not correctly_placed(P4, P4_CATERPILLAR, P4_CATERPILLAR.root)
    assert correctly_placed_all(STAR4, STAR4_CATERPILLAR)
    assert correctly_placed_all(InputTree(1, []), Ept.single(0))
    assert correctly_placed_all(P4, build_balanced_naive(P4))


def test_correctly_placed_ignores_tie_breaks():
    # rooting P3 at (1, 2) ties with (0, 1)
    t = Ept.from_obj(node(1, 2, node(0, 1, leaf(0), leaf(1)), leaf(2)))
    assert validate_ept(P3, t)
    assert correctly_placed_all(P3, t)
