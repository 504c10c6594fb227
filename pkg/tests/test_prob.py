import random

import pytest

from pvcdb.algebra import INF, MonoidKind, SemiringKind, scale
from pvcdb.errors import LengthMismatch, UnorderedCarrier, WeightSumOutOfTolerance
from pvcdb.prob import (
    Distribution,
    compare_convolve,
    convolve,
    format_distribution,
    mix,
    parse_distribution,
)

B = SemiringKind.BOOLEAN


def coin(p=0.5):
    return Distribution([(0, 1 - p), (1, p)])


def rand_dist(rng, size, hi=30):
    values = rng.sample(range(hi), size)
    weights = [rng.random() + 1e-3 for _ in values]
    total = sum(weights)
    return Distribution((v, w / total) for v, w in zip(values, weights))


class TestDistribution:
    def test_sorted_unique_positive(self):
        d = Distribution([(3, 0.2), (1, 0.8)])
        assert d.support == (1, 3)
        with pytest.raises(ValueError):
            Distribution([(1, 0.5), (1, 0.5)])
        with pytest.raises(ValueError):
            Distribution([(1, 0.0)])

    def test_from_pairs_accumulates(self):
        d = Distribution.from_pairs([(1, 0.25), (1, 0.25), (2, 0.5)])
        assert d[1] == pytest.approx(0.5)

    def test_normalization_check(self):
        coin().check_normalized()
        with pytest.raises(WeightSumOutOfTolerance):
            Distribution([(0, 0.5), (1, 0.4)]).check_normalized()


class TestConvolve:
    def test_boolean_or(self):
        # 1 - (1-p)(1-q) by direct enumeration of the four value pairs
        out = convolve(coin(), coin(), B.add)
        assert out[1] == pytest.approx(0.75)
        assert out[0] == pytest.approx(0.25)

    def test_scaling_convolution(self):
        p_x = Distribution([(0, 0.3), (1, 0.3), (2, 0.4)])
        p_a = Distribution([(5, 0.4), (10, 0.4), (15, 0.2)])
        out = convolve(p_x, p_a, lambda s, m: scale(s, m, MonoidKind.SUM))
        assert out[10] == pytest.approx(0.28)
        assert out.support == (0, 5, 10, 15, 20, 30)
        assert out.total_mass() == pytest.approx(1.0)

    def test_multiplicative_identity(self):
        p = rand_dist(random.Random(3), 5)
        out = convolve(p, Distribution.point(1), SemiringKind.NATURAL.mul)
        assert out.close_to(p, 1e-12)

    def test_mass_conservation_randomized(self):
        rng = random.Random(17)
        for _ in range(50):
            p = rand_dist(rng, rng.randint(1, 8))
            q = rand_dist(rng, rng.randint(1, 8))
            out = convolve(p, q, SemiringKind.NATURAL.add)
            assert out.total_mass() == pytest.approx(p.total_mass() * q.total_mass(), abs=1e-9)

    def test_support_bounds(self):
        rng = random.Random(19)
        for _ in range(50):
            p = rand_dist(rng, rng.randint(1, 6))
            q = rand_dist(rng, rng.randint(1, 6))
            assert len(convolve(p, q, SemiringKind.NATURAL.add)) <= len(p) * len(q)
            merged = set(p.support) | set(q.support)
            out = convolve(p, q, MonoidKind.MIN.plus)
            assert len(out) <= len(merged)
            assert set(out.support) <= merged

    def test_matches_exhaustive_enumeration(self):
        rng = random.Random(23)
        for _ in range(30):
            p = rand_dist(rng, rng.randint(1, 6))
            q = rand_dist(rng, rng.randint(1, 6))
            table = {}
            for a, pa in p:
                for b, qb in q:
                    table[a + b] = table.get(a + b, 0.0) + pa * qb
            out = convolve(p, q, SemiringKind.NATURAL.add)
            assert all(abs(out[v] - m) <= 1e-12 for v, m in table.items())


class TestCompareConvolve:
    def test_deterministic_comparison(self):
        out = compare_convolve(Distribution.point(10), Distribution.point(50), "<=")
        assert out.entries == ((1, 1.0),)

    def test_mixed_comparison(self):
        p = Distribution([(5, 0.4), (10, 0.6)])
        out = compare_convolve(p, Distribution.point(7), "<=")
        assert out[1] == pytest.approx(0.4)
        assert out[0] == pytest.approx(0.6)

    def test_equal_points_not_equal(self):
        out = compare_convolve(Distribution.point(3), Distribution.point(3), "!=")
        assert out.entries == ((0, 1.0),)

    def test_outcomes_sum_to_one(self):
        rng = random.Random(29)
        for theta in ("<=", ">=", "=", "!=", "<", ">"):
            p = rand_dist(rng, 5)
            q = rand_dist(rng, 4)
            out = compare_convolve(p, q, theta)
            assert out.total_mass() == pytest.approx(1.0)

    def test_unordered_carrier(self):
        p = Distribution.point((1, 2))
        with pytest.raises(UnorderedCarrier):
            compare_convolve(p, p, "<=")


class TestMix:
    def test_single_child(self):
        p = rand_dist(random.Random(5), 4)
        assert mix([1.0], [p]).close_to(p, 1e-12)

    def test_mixture_of_equal_children(self):
        p = rand_dist(random.Random(7), 5)
        out = mix([0.3, 0.7], [p, p])
        assert out.close_to(p, 1e-12)

    def test_two_branch_case_split(self):
        # combining the value-1 and value-2 branches of a case split on
        # one variable: the shared outcome 80 pools mass from both sides
        pa, pb, pc = 0.6, 0.3, 0.8
        left = Distribution(
            [(40, pa * pb), (50, pa * (1 - pb)), (60, (1 - pa) * pb), (80, (1 - pa) * (1 - pb))]
        )
        right = Distribution(
            [(70, pa * pb), (80, pa * (1 - pb)), (100, (1 - pa) * pb), (120, (1 - pa) * (1 - pb))]
        )
        out = mix([pc, 1 - pc], [left, right])
        assert out[80] == pytest.approx((1 - pa) * (1 - pb) * pc + pa * (1 - pb) * (1 - pc))
        assert out.total_mass() == pytest.approx(1.0)

    def test_length_mismatch(self):
        with pytest.raises(LengthMismatch):
            mix([1.0], [coin(), coin()])

    def test_weights_must_sum_to_one(self):
        with pytest.raises(WeightSumOutOfTolerance):
            mix([0.5, 0.4], [coin(), coin()])

    def test_mass_conservation_randomized(self):
        rng = random.Random(31)
        for _ in range(30):
            k = rng.randint(1, 5)
            raw = [rng.random() + 1e-3 for _ in range(k)]
            weights = [w / sum(raw) for w in raw]
            children = [rand_dist(rng, rng.randint(1, 6)) for _ in range(k)]
            assert mix(weights, children).total_mass() == pytest.approx(1.0)


class TestSerialization:
    def test_round_trip(self):
        d = Distribution([(INF, 0.25), (3, 0.5), (0, 0.25)])
        text = format_distribution(d)
        assert "+inf" in text
        assert parse_distribution(text).close_to(d, 1e-12)

    def test_sorted_lines(self):
        d = Distribution([(10, 0.5), (2, 0.5)])
        lines = format_distribution(d).splitlines()
        assert lines[0].startswith("2\t")
        assert lines[1].startswith("10\t")

    def test_tuple_values(self):
        d = Distribution([((1, 5), 0.5), ((0, 0), 0.5)])
        text = format_distribution(d)
        assert parse_distribution(text).close_to(d, 1e-12)
