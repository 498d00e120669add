import math
from fractions import Fraction

import numpy as np
import pytest

from coarselab import (
    AFamily,
    LpWitness,
    ball_witness,
    convert_witness,
    cycle_space,
    glue_witness,
    lipschitz_partition,
    lp_product,
    measure_witness,
    path_space,
    product_witness,
    separated_union,
    subspace_witness,
    tree_space,
    tree_witness,
    union_witness,
    validate_witness,
)
from coarselab.witnesses import (
    afamily_to_lp,
    lp_change_exponent,
    lp_to_afamily,
    lp_to_partition,
    partition_to_lp,
)


def ball_afamily(space, S, R):
    sets = tuple(
        frozenset((int(y), 1) for y in np.nonzero(space.dist[x] <= S + 1e-9)[0])
        for x in range(space.n)
    )
    return AFamily(sets=sets, point_ids=tuple(space.points), R=R)


def test_measure_witness_examples():
    two = path_space(2)
    delta = LpWitness(p=1, table=np.eye(2), point_ids=(0, 1), R=1)
    assert measure_witness(delta, two, 1).eps_measured == pytest.approx(2.0)
    same = AFamily(sets=(frozenset({(0, 1)}),) * 2, point_ids=(0, 1), R=1)
    assert measure_witness(same, two, 1).eps_measured == 0.0
    four = path_space(4)
    uni = ball_witness(four, 3, 1)
    rep = measure_witness(uni, four, 1)
    assert rep.eps_measured == 0.0
    assert rep.S_measured == four.diameter()


def test_measure_witness_space_mismatch():
    w = ball_witness(path_space(3), 1, 1)
    with pytest.raises(ValueError, match="do not match"):
        measure_witness(w, path_space(4), 1)


def test_afamily_to_lp_example():
    two = path_space(2)
    af = AFamily(
        sets=(frozenset({(0, 1)}), frozenset({(0, 1), (1, 1)})),
        point_ids=(0, 1),
        R=1,
    )
    lp = afamily_to_lp(af, two)
    assert np.allclose(lp.table[0], [1, 0])
    assert np.allclose(lp.table[1], [0.5, 0.5])
    assert abs(lp.table[0] - lp.table[1]).sum() == pytest.approx(1.0)
    assert measure_witness(af, two, 1).eps_measured == pytest.approx(1.0)


def test_quantization_example():
    two = path_space(2)
    w = LpWitness(p=1, table=np.array([[0.3, 0.7], [0.3, 0.7]]), point_ids=(0, 1), R=1)
    af = lp_to_afamily(w, two, M=10)
    counts = {}
    for (y, _j) in af.sets[0]:
        counts[y] = counts.get(y, 0) + 1
    assert counts == {0: 3, 1: 7}


def test_constant_vectors_give_unit_kernel():
    sp = path_space(3)
    from coarselab.witnesses import VectorWitness, vector_to_kernel

    v = VectorWitness(coords=np.tile([1.0, 0.0], (3, 1)), point_ids=(0, 1, 2), R=1)
    k = vector_to_kernel(v, sp)
    assert np.allclose(k.matrix, 1.0)


def test_tree_witness_segment_example():
    seg = path_space(21)
    w = tree_witness(seg, 20, 2, 1)
    assert len(w.sets[0]) == 7
    a0, a2 = w.sets[0], w.sets[2]
    assert len(a0 ^ a2) == 4
    assert len(a0 & a2) == 5
    # v = w pairs have ratio zero trivially
    assert measure_witness(w, seg, 0).eps_measured == 0.0


def test_tree_witness_rejects_cycles():
    with pytest.raises(ValueError, match="cycle"):
        tree_witness(cycle_space(6), 0, 1, 0.5)


def test_tree_witness_binary_tree_bound():
    tr = tree_space(2, 5)  # 63 vertices
    for R, eps in [(1, 0.5), (2, 0.25)]:
        w = tree_witness(tr, 0, R, eps)
        truncated = w.meta["truncated"]
        bound = Fraction(2) * Fraction(eps) / (3 - Fraction(eps))
        for i in range(tr.n):
            for j in range(i + 1, tr.n):
                if tr.dist[i, j] <= R and i not in truncated and j not in truncated:
                    ratio = Fraction(len(w.sets[i] ^ w.sets[j]), len(w.sets[i] & w.sets[j]))
                    assert ratio <= bound


def test_lipschitz_partition_interval_cover():
    seg = path_space(11)
    w = lipschitz_partition(seg, [range(0, 8), range(3, 11)], 1, 10.0)
    assert w.meta["multiplicity"] == 2
    assert w.meta["lebesgue"] == 2.0
    assert w.meta["lipschitz_bound"] == pytest.approx(21.0)
    assert np.abs(w.functions.sum(axis=0) - 1.0).max() < 1e-9
    for i in range(11):
        for j in range(11):
            if i != j:
                tv = abs(w.functions[:, i] - w.functions[:, j]).sum()
                assert tv <= 21.0 * seg.dist[i, j] + 1e-9


def test_lipschitz_partition_trivial_and_disjoint():
    seg = path_space(11)
    triv = lipschitz_partition(seg, [range(11)], 2, 1.0)
    assert np.allclose(triv.functions, 1.0)
    assert measure_witness(triv, seg, 2).eps_measured == 0.0
    un = separated_union([path_space(3), path_space(3)])
    disj = lipschitz_partition(un, [[0, 1, 2], [3, 4, 5]], 1, 1.0)
    assert set(map(tuple, disj.functions)) == {(1, 1, 1, 0, 0, 0), (0, 0, 0, 1, 1, 1)}


def test_lipschitz_partition_errors():
    seg = path_space(5)
    with pytest.raises(ValueError, match="misses point"):
        lipschitz_partition(seg, [[0, 1]], 1, 1.0)
    with pytest.raises(ValueError, match="Lebesgue"):
        lipschitz_partition(seg, [[i] for i in range(5)], 1, 1.0)


def test_glue_trivial_outer_returns_local():
    seg = path_space(11)
    outer = lipschitz_partition(seg, [range(11)], 1, 1.0)
    local = lipschitz_partition(seg, [range(0, 8), range(3, 11)], 1, 10.0)
    glued = glue_witness(outer, [local], seg)
    assert np.allclose(np.sort(glued.functions, axis=0), np.sort(local.functions, axis=0))


def test_glue_variation_bound_on_grid_of_R():
    seg = path_space(13)
    for R in (1, 2, 3):
        outer = lipschitz_partition(seg, [range(0, 9), range(4, 13)], R, 10.0)
        loc1 = lipschitz_partition(seg, [range(0, 7), range(4, 13)], R, 10.0)
        loc2 = lipschitz_partition(seg, [range(0, 9), range(6, 13)], R, 10.0)
        glued = glue_witness(outer, [loc1, loc2], seg)
        assert not validate_witness(glued, seg)
        measured = measure_witness(glued, seg, R).eps_measured
        bound = measure_witness(outer, seg, R).eps_measured + max(
            measure_witness(loc1, seg, R).eps_measured,
            measure_witness(loc2, seg, R).eps_measured,
        )
        assert measured <= bound + 1e-9


def test_glue_missing_local():
    seg = path_space(5)
    outer = lipschitz_partition(seg, [range(5)], 1, 1.0)
    with pytest.raises(ValueError, match="missing"):
        glue_witness(outer, [None], seg)


def test_product_witness():
    x, y = path_space(4), path_space(4)
    wx = lipschitz_partition(x, [range(0, 3), range(1, 4)], 1, 10.0)
    wy = lipschitz_partition(y, [range(0, 3), range(1, 4)], 1, 10.0)
    prod = lp_product(x, y, 1)
    wp = product_witness(wx, wy, prod)
    assert not validate_witness(wp, prod)
    eps = measure_witness(wp, prod, 1).eps_measured
    bound = measure_witness(wx, x, 1).eps_measured + measure_witness(wy, y, 1).eps_measured
    assert eps <= bound + 1e-9
    # product of trivial partitions stays trivial
    tx = lipschitz_partition(x, [range(4)], 1, 1.0)
    ty = lipschitz_partition(y, [range(4)], 1, 1.0)
    tp = product_witness(tx, ty, prod)
    assert np.allclose(tp.functions, 1.0)


def test_union_witness():
    un = separated_union([path_space(4), path_space(4)])
    blocks = [lipschitz_partition(path_space(4), [range(4)], 1, 1.0) for _ in range(2)]
    w = union_witness(un, blocks, L=2.0, R=1.0, eps=math.inf)
    assert not validate_witness(w, un)
    assert math.isfinite(measure_witness(w, un, 1).eps_measured)
    with pytest.raises(ValueError, match="positive"):
        union_witness(un, blocks, L=0.0, R=1.0, eps=1.0)


def test_union_witness_overlapping_segments():
    # two segments overlapping in one point, expanded by L=2
    seg = path_space(11)
    pieces = [list(range(0, 6)), list(range(5, 11))]
    locals_ = [
        lipschitz_partition(seg.subspace(p), [range(len(p))], 1, 1.0) for p in pieces
    ]
    w = union_witness(seg, locals_, L=2.0, R=1.0, eps=math.inf, blocks=pieces)
    assert not validate_witness(w, seg)
    measured = measure_witness(w, seg, 1).eps_measured
    assert math.isfinite(measured)
    # covers-formula bound for the expanded cover, plus the (zero) local eps
    from coarselab.witnesses import cover_multiplicity, lebesgue_number, expand_set

    cover = [expand_set(seg, p, 2.0) for p in pieces]
    k = cover_multiplicity(seg, cover)
    L = lebesgue_number(seg, cover)
    assert measured <= (2 * k + 2) * (2 * k + 3) / L * 1.0 + 1e-9


def test_subspace_witness():
    seg = path_space(11)
    w = lipschitz_partition(seg, [range(0, 8), range(3, 11)], 1, 10.0)
    sub = seg.subspace(range(0, 6))
    ws = subspace_witness(w, seg, sub, list(range(0, 6)))
    assert not validate_witness(ws, sub)
    assert measure_witness(ws, sub, 1).eps_measured <= measure_witness(w, seg, 1).eps_measured + 1e-12
    # uniform witness restricts to the uniform witness
    uni = lipschitz_partition(seg, [range(11)], 1, 1.0)
    wu = subspace_witness(uni, seg, sub, list(range(0, 6)))
    assert np.allclose(wu.functions, 1.0)
    # non-isometric inclusions are rejected
    skewed = seg.subspace(range(0, 6))
    bad = type(skewed)(skewed.points, skewed.dist * 2)
    with pytest.raises(ValueError, match="distance-preserving"):
        subspace_witness(w, seg, bad, list(range(0, 6)))


def test_partition_roundtrip_preserves_eps_exactly(corpus):
    for _name, sp in corpus[:8]:
        w = ball_witness(sp, 1, 1)
        part = lp_to_partition(w, sp)
        back = partition_to_lp(part, sp)
        assert np.allclose(back.table, w.table, atol=1e-12)
        e_in = measure_witness(w, sp, 1).eps_measured
        e_out = measure_witness(back, sp, 1).eps_measured
        assert e_out == pytest.approx(e_in, abs=1e-12)


def test_unsupported_conversion_pair():
    sp = path_space(3)
    w = ball_witness(sp, 1, 1)
    with pytest.raises(ValueError, match="unsupported conversion"):
        convert_witness(w, "a-family-x", sp)


def test_conversion_requires_exponent_preconditions():
    sp = path_space(4)
    w2 = lp_change_exponent(ball_witness(sp, 1, 1), sp, 2)
    with pytest.raises(ValueError, match="l\\^1"):
        lp_to_partition(w2, sp)
    with pytest.raises(ValueError, match="l\\^2"):
        convert_witness(ball_witness(sp, 1, 1), "vector", sp)


def test_kernel_to_lp_rejects_non_psd():
    sp = path_space(3)
    from coarselab.witnesses import KernelWitness, kernel_to_lp

    bad = KernelWitness(
        matrix=np.array([[1.0, 0.99, 0], [0.99, 1.0, 0.99], [0, 0.99, 1.0]]) - 1.2 * np.eye(3),
        point_ids=(0, 1, 2),
        R=1,
    )
    with pytest.raises(ValueError, match="not positive type"):
        kernel_to_lp(bad, sp)
