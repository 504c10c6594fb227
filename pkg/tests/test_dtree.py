import itertools
import random

import pytest

from pvcdb import algebra as alg
from pvcdb import dtree
from pvcdb.algebra import Cmp, Const, INF, MConst, MonoidKind, SemiringKind, Var
from pvcdb.dtree import (
    ConstLeaf,
    MonoidLeaf,
    MutexNode,
    SumNode,
    VarLeaf,
    choose_branch_variable,
    compile_joint,
    distribution,
    eval_dtree,
    mutex_count,
    node_count,
    partition_independent,
    prune,
    reduce_to_boolean,
)
from pvcdb.errors import BudgetExceeded, NoVariables, WrongMonoid
from pvcdb.exprtext import parse_expr
from pvcdb.oracle import brute_distribution
from pvcdb.prob import Distribution

B = SemiringKind.BOOLEAN
N = SemiringKind.NATURAL


def coin(p=0.5):
    return Distribution([(0, 1 - p), (1, p)])


def one_two(p):
    return Distribution([(1, p), (2, 1 - p)])


def all_valuations(var_dists):
    names = sorted(var_dists)
    for combo in itertools.product(*(var_dists[v].support for v in names)):
        yield dict(zip(names, combo))


FIG_DISTS = {"a": one_two(0.6), "b": one_two(0.3), "c": one_two(0.8)}


class TestSplits:
    def test_sum_rule_splits_independent_summands(self):
        expr = parse_expr("sum{a*(b + 1)(x)10 + 1(x)20}")
        pair = partition_independent(expr, "sum")
        assert pair is not None
        first, second = pair
        assert alg.variables(first) == {"a", "b"}
        assert alg.variables(second) == set()

    def test_shared_variables_block_all_rules(self):
        expr = parse_expr(
            "max{x4*y41*(z1 + z5)(x)15 + x4*y43*z3(x)60 + x5*y51*(z1 + z5)(x)10}"
        )
        for rule in ("sum", "product", "scalar", "compare"):
            assert partition_independent(expr, rule) is None

    def test_single_variable(self):
        assert partition_independent(Var("x"), "sum") is None
        assert partition_independent(Var("x"), "product") is None

    def test_product_rule_factors_common_variable(self):
        expr = parse_expr("x1*y11 + x1*y12")
        psi, rest = partition_independent(expr, "product")
        assert alg.variables(psi) == {"x1"}
        assert alg.equivalent(rest, parse_expr("y11 + y12"))

    def test_scalar_rule(self):
        expr = parse_expr("sum{a*b(x)10 + a(x)20}")
        psi, rest = partition_independent(expr, "scalar")
        assert alg.variables(psi) == {"a"}
        assert alg.variables(rest) == {"b"}

    def test_compare_rule(self):
        expr = parse_expr("[x + y <= z]")
        pair = partition_independent(expr, "compare")
        assert pair is not None
        expr = parse_expr("[x + y <= x]")
        assert partition_independent(expr, "compare") is None


class TestChooseBranchVariable:
    def test_most_occurrences(self):
        expr = parse_expr("sum{a*(b + c)(x)10 + c(x)20}")
        assert choose_branch_variable(expr) == "c"

    def test_tie_breaks_lexicographically(self):
        expr = parse_expr(
            "max{x4*y41*(z1 + z5)(x)15 + x4*y43*z3(x)60 + x5*y51*(z1 + z5)(x)10}"
        )
        assert choose_branch_variable(expr) == "x4"

    def test_single_variable(self):
        assert choose_branch_variable(parse_expr("min{q(x)3}")) == "q"

    def test_no_variables(self):
        with pytest.raises(NoVariables):
            choose_branch_variable(Const(1))


class TestCompileShapes:
    def test_worked_case_split(self):
        expr = parse_expr("sum{a*(b + c)(x)10 + c(x)20}")
        tree = dtree.compile(expr, FIG_DISTS, N)
        assert isinstance(tree, MutexNode) and tree.var == "c"
        assert len(tree.branches) == 2
        left = tree.branches[0][2]
        assert isinstance(left, SumNode)
        sides = {frozenset(child.vars()) for child in left.children()}
        assert frozenset({"a", "b"}) in sides
        assert frozenset() in sides
        dtree.validate(tree, FIG_DISTS)

    def test_worked_max_split_root(self):
        expr = parse_expr(
            "max{x4*y41*(z1 + z5)(x)15 + x4*y43*z3(x)60 + x5*y51*(z1 + z5)(x)10}"
        )
        dists = {v: coin() for v in alg.variables(expr)}
        tree = dtree.compile(expr, dists, B)
        assert isinstance(tree, MutexNode) and tree.var == "x4"
        dtree.validate(tree, dists)

    def test_independent_summands_need_no_case_split(self):
        expr = parse_expr("sum{a*b(x)10 + x*y(x)20}")
        dists = {v: coin() for v in alg.variables(expr)}
        tree = dtree.compile(expr, dists, B)
        assert isinstance(tree, SumNode)
        assert mutex_count(tree) == 0

    def test_constant_collapses_to_leaf(self):
        tree = dtree.compile(Const(1), {}, B)
        assert isinstance(tree, ConstLeaf) and tree.value == 1
        tree = dtree.compile(MConst(MonoidKind.SUM, 7), {}, N)
        assert isinstance(tree, MonoidLeaf) and tree.value == 7

    def test_variable_leaf(self):
        tree = dtree.compile(Var("x"), {"x": coin(0.3)}, B)
        assert isinstance(tree, VarLeaf)
        assert distribution(tree, B)[1] == pytest.approx(0.3)

    def test_budget(self):
        expr = parse_expr("min{a*b(x)1 + b*c(x)2 + c*a(x)3}")
        dists = {v: coin() for v in "abc"}
        with pytest.raises(BudgetExceeded):
            dtree.compile(expr, dists, B, node_budget=3)


class TestDistribution:
    def test_weighted_sum_table(self):
        expr = parse_expr("sum{a*(b + c)(x)10 + c(x)20}")
        out = distribution(dtree.compile(expr, FIG_DISTS, N), N)
        pa, pb, pc = 0.6, 0.3, 0.8
        qa, qb, qc = 1 - pa, 1 - pb, 1 - pc
        expected = {
            40: pa * pb * pc,
            50: pa * qb * pc,
            60: qa * pb * pc,
            70: pa * pb * qc,
            80: qa * qb * pc + pa * qb * qc,
            100: qa * pb * qc,
            120: qa * qb * qc,
        }
        assert len(out) == 7
        for value, mass in expected.items():
            assert out[value] == pytest.approx(mass, abs=1e-12)

    def test_min_is_always_ten(self):
        expr = parse_expr("min{a*(b + c)(x)10 + c(x)20}")
        out = distribution(dtree.compile(expr, FIG_DISTS, N), N)
        assert out.entries == ((10, pytest.approx(1.0)),)

    def test_boolean_min_three_entries(self):
        expr = parse_expr("min{a*(b + c)(x)10 + c(x)20}")
        qa, qb, qc = 0.6, 0.3, 0.8
        dists = {"a": coin(qa), "b": coin(qb), "c": coin(qc)}
        out = distribution(dtree.compile(expr, dists, B), B)
        assert out[10] == pytest.approx(qc * qa + (1 - qc) * qa * qb, abs=1e-12)
        assert out[20] == pytest.approx(qc * (1 - qa), abs=1e-12)
        assert out[INF] == pytest.approx((1 - qc) * (1 - qa * qb), abs=1e-12)

    def test_single_variable_leaf(self):
        d = Distribution([(0, 0.2), (3, 0.8)])
        tree = dtree.compile(Var("x"), {"x": d}, N)
        assert distribution(tree, N) == d


def rand_semimodule(rng, names, kind, terms=3, clause_vars=2):
    parts = []
    for _ in range(terms):
        clause = alg.make_product(
            [Var(rng.choice(names)) for _ in range(rng.randint(1, clause_vars))]
        )
        if rng.random() < 0.3:
            clause = alg.make_sum([clause, Var(rng.choice(names))])
        parts.append(alg.make_scaled(kind, clause, rng.randint(0, 12)))
    return alg.make_msum(kind, parts)


class TestSoundness:
    @pytest.mark.parametrize("kind", [MonoidKind.MIN, MonoidKind.MAX, MonoidKind.SUM])
    def test_matches_brute_force(self, kind):
        rng = random.Random(hash(kind.value) % 1000)
        for _ in range(25):
            names = ["v%d" % i for i in range(rng.randint(2, 6))]
            expr = rand_semimodule(rng, names, kind)
            dists = {n: coin(rng.uniform(0.2, 0.8)) for n in names}
            got = distribution(dtree.compile(expr, dists, B), B)
            want = brute_distribution(expr, dists, B)
            assert got.close_to(want, 1e-9)

    def test_conditionals_match_brute_force(self):
        rng = random.Random(99)
        for _ in range(25):
            names = ["v%d" % i for i in range(rng.randint(2, 5))]
            kind = rng.choice([MonoidKind.MIN, MonoidKind.MAX, MonoidKind.SUM])
            left = rand_semimodule(rng, names, kind)
            expr = Cmp(left, rng.choice(("<=", ">=", "=")), MConst(kind, rng.randint(0, 15)))
            dists = {n: coin(rng.uniform(0.2, 0.8)) for n in names}
            got = distribution(dtree.compile(expr, dists, B), B)
            want = brute_distribution(expr, dists, B)
            assert got.close_to(want, 1e-9)

    def test_natural_variables(self):
        rng = random.Random(101)
        for _ in range(15):
            names = ["v%d" % i for i in range(rng.randint(2, 4))]
            expr = rand_semimodule(rng, names, MonoidKind.SUM)
            dists = {
                n: Distribution([(0, 0.3), (1, 0.4), (2, 0.3)]) for n in names
            }
            got = distribution(dtree.compile(expr, dists, N), N)
            want = brute_distribution(expr, dists, N)
            assert got.close_to(want, 1e-9)

    def test_read_back_equivalence(self):
        rng = random.Random(103)
        for _ in range(20):
            names = ["v%d" % i for i in range(rng.randint(2, 4))]
            kind = rng.choice(list(MonoidKind))
            expr = rand_semimodule(rng, names, kind)
            dists = {n: coin() for n in names}
            tree = dtree.compile(expr, dists, B)
            dtree.validate(tree, dists)
            for nu in all_valuations(dists):
                assert eval_dtree(tree, nu, B) == expr.eval(nu, B)


class TestAdversarialFuzz:
    """Nested conditional atoms inside products and sums, multi-valued
    natural variables, both semirings, with and without pruning."""

    def _rand_msum(self, rng, names, kind, depth):
        terms = [
            alg.make_scaled(
                kind, self._rand_sr(rng, names, depth - 1, False), rng.randint(0, 8)
            )
            for _ in range(rng.randint(1, 3))
        ]
        return alg.make_msum(kind, terms)

    def _rand_sr(self, rng, names, depth, allow_cmp=True):
        roll = rng.random()
        if depth <= 0 or roll < 0.3:
            if rng.random() < 0.8:
                return Var(rng.choice(names))
            return Const(rng.randint(0, 1))
        if roll < 0.55:
            return alg.make_sum(
                [self._rand_sr(rng, names, depth - 1, allow_cmp) for _ in range(2)]
            )
        if roll < 0.8:
            return alg.make_product(
                [self._rand_sr(rng, names, depth - 1, allow_cmp) for _ in range(2)]
            )
        if allow_cmp:
            kind = rng.choice([MonoidKind.MIN, MonoidKind.MAX, MonoidKind.SUM])
            if rng.random() < 0.5:
                return Cmp(
                    self._rand_msum(rng, names, kind, depth),
                    rng.choice(alg.THETAS),
                    MConst(kind, rng.randint(0, 12)),
                )
            return Cmp(
                self._rand_sr(rng, names, depth - 1, False),
                rng.choice(alg.THETAS),
                self._rand_sr(rng, names, depth - 1, False),
            )
        return alg.make_sum(
            [self._rand_sr(rng, names, depth - 1, False) for _ in range(2)]
        )

    def test_compile_and_prune_match_brute_force(self):
        rng = random.Random(424242)
        checked = 0
        while checked < 120:
            sk = B if checked % 2 == 0 else N
            names = ["v%d" % i for i in range(rng.randint(2, 5))]
            if sk is B:
                dists = {n: coin(rng.uniform(0.2, 0.8)) for n in names}
            else:
                dists = {}
                for n in names:
                    w = [rng.random() + 0.05 for _ in range(rng.randint(2, 3))]
                    t = sum(w)
                    dists[n] = Distribution([(i, x / t) for i, x in enumerate(w)])
            expr = self._rand_sr(rng, names, 3)
            if not alg.variables(expr):
                continue
            want = brute_distribution(expr, dists, sk)
            tree = dtree.compile(expr, dists, sk)
            dtree.validate(tree, dists)
            got = distribution(tree, sk)
            assert got.close_to(want, 1e-9), expr
            pruned = dtree.prune_all(expr, sk, dists)
            got2 = distribution(dtree.compile(pruned, dists, sk), sk)
            assert got2.close_to(want, 1e-9), expr
            checked += 1


class TestReduceToBoolean:
    def test_distribution_mapping(self):
        dists = {"x": Distribution([(0, 0.3), (1, 0.3), (2, 0.4)])}
        expr = parse_expr("min{x(x)5}")
        _, reduced = reduce_to_boolean(expr, dists)
        assert reduced["x"].close_to(Distribution([(0, 0.3), (1, 0.7)]), 1e-12)

    def test_boolean_input_unchanged(self):
        dists = {"x": coin(0.7)}
        expr = parse_expr("max{x(x)5}")
        out, reduced = reduce_to_boolean(expr, dists)
        assert reduced["x"] is dists["x"]
        assert out == expr

    def test_pipeline_equivalence(self):
        rng = random.Random(107)
        for _ in range(10):
            names = ["v%d" % i for i in range(rng.randint(2, 4))]
            kind = rng.choice([MonoidKind.MIN, MonoidKind.MAX])
            expr = rand_semimodule(rng, names, kind)
            dists = {
                n: Distribution([(0, 0.25), (1, 0.25), (3, 0.5)]) for n in names
            }
            direct = distribution(dtree.compile(expr, dists, N), N)
            bexpr, bdists = reduce_to_boolean(expr, dists)
            reduced = distribution(dtree.compile(bexpr, bdists, B), B)
            assert direct.close_to(reduced, 1e-9)

    def test_wrong_monoid(self):
        with pytest.raises(WrongMonoid):
            reduce_to_boolean(parse_expr("sum{x(x)5}"), {"x": coin()})


class TestPrune:
    def test_min_drops_terms_above_bound(self):
        cond = parse_expr("[min{x(x)10 + y(x)20} <= 15]")
        out = prune(cond)
        assert alg.equivalent(out, parse_expr("[min{x(x)10} <= 15]"))

    def test_sum_collapses_when_total_fits(self):
        cond = parse_expr("[sum{x(x)5 + y(x)7} <= 15]")
        out = prune(cond, B)
        assert out == Const(1)

    def test_nothing_prunable_left_unchanged(self):
        cond = parse_expr("[min{x(x)10} <= 15]")
        assert prune(cond) is cond

    def test_empty_keep_set_folds_to_constant(self):
        # min of the remaining (empty) sum is +inf, which decides the
        # comparison outright
        assert prune(parse_expr("[min{x(x)10} <= 5]")) == Const(0)
        assert prune(parse_expr("[min{x(x)10} >= 5]")) == Const(1)

    def test_non_conditional_unchanged(self):
        expr = parse_expr("x + y")
        assert prune(expr) is expr

    @pytest.mark.parametrize("kind", ["min", "max", "sum"])
    def test_soundness_randomized(self, kind):
        rng = random.Random(hash(kind) % 500)
        mk = MonoidKind(kind)
        for _ in range(30):
            names = ["v%d" % i for i in range(rng.randint(2, 5))]
            left = rand_semimodule(rng, names, mk)
            theta = rng.choice(("<=", ">=", "<", ">", "=", "!="))
            cond = Cmp(left, theta, MConst(mk, rng.randint(0, 20)))
            dists = {n: coin(rng.uniform(0.2, 0.8)) for n in names}
            pruned = prune(cond, B, dists)
            got = distribution(dtree.compile(pruned, dists, B), B)
            want = distribution(dtree.compile(cond, dists, B), B)
            assert got.close_to(want, 1e-9)


class TestCompileJoint:
    def test_shared_variable_pair(self):
        exprs = [parse_expr("a + b"), parse_expr("a*c")]
        dists = {n: one_two(p) for n, p in (("a", 0.5), ("b", 0.4), ("c", 0.7))}
        tree = compile_joint(exprs, dists, N)
        out = distribution(tree, N)
        pa, pb, pc = dists["a"], dists["b"], dists["c"]
        expected = pa[2] * pb[1] * pc[1] + pa[1] * pb[2] * pc[2]
        assert out[(3, 2)] == pytest.approx(expected, abs=1e-12)
        assert out.total_mass() == pytest.approx(1.0)

    def test_disjoint_expressions_factorize(self):
        exprs = [parse_expr("a + b"), parse_expr("c")]
        dists = {n: one_two(0.5) for n in "abc"}
        out = distribution(compile_joint(exprs, dists, N), N)
        pa = brute_distribution(exprs[0], dists, N)
        pc = brute_distribution(exprs[1], dists, N)
        for (va, ma) in pa:
            for (vc, mc) in pc:
                assert out[(va, vc)] == pytest.approx(ma * mc, abs=1e-12)

    def test_single_expression_matches_scalar_path(self):
        expr = parse_expr("min{a(x)3 + b(x)9}")
        dists = {"a": coin(), "b": coin()}
        joint = distribution(compile_joint([expr], dists, B), B)
        scalar = distribution(dtree.compile(expr, dists, B), B)
        for value, p in scalar:
            assert joint[(value,)] == pytest.approx(p, abs=1e-12)

    def test_matches_brute_force(self):
        rng = random.Random(113)
        for _ in range(10):
            names = ["v%d" % i for i in range(rng.randint(2, 4))]
            e1 = rand_semimodule(rng, names, MonoidKind.SUM, terms=2)
            e2 = alg.make_sum([Var(rng.choice(names)), Var(rng.choice(names))])
            dists = {n: coin(rng.uniform(0.3, 0.7)) for n in names}
            out = distribution(compile_joint([e1, e2], dists, B), B)
            acc = {}
            for nu in all_valuations(dists):
                key = (e1.eval(nu, B), e2.eval(nu, B))
                weight = 1.0
                for n, value in nu.items():
                    weight *= dists[n][value]
                acc[key] = acc.get(key, 0.0) + weight
            for key, mass in acc.items():
                assert out[key] == pytest.approx(mass, abs=1e-9)

    def test_groups_that_decouple_mid_expansion(self):
        # substitution can drop a component to a constant while others
        # still share variables, nesting a mutex inside the product
        rng = random.Random(900)
        for case in range(60):
            names = ["v%d" % i for i in range(rng.randint(2, 5))]
            dists = {n: coin(rng.uniform(0.2, 0.8)) for n in names}
            exprs = []
            for _ in range(rng.randint(2, 4)):
                kind = rng.choice([MonoidKind.MIN, MonoidKind.MAX])
                terms = [
                    alg.make_scaled(kind, Var(rng.choice(names)), rng.randint(0, 9))
                    for _ in range(rng.randint(1, 3))
                ]
                body = alg.make_msum(kind, terms)
                if rng.random() < 0.5:
                    body = Cmp(
                        body, rng.choice(alg.THETAS), MConst(kind, rng.randint(0, 9))
                    )
                exprs.append(body)
            got = distribution(compile_joint(exprs, dists, B), B)
            acc = {}
            for nu in all_valuations(dists):
                weight = 1.0
                for n, value in nu.items():
                    weight *= dists[n][value]
                key = tuple(e.eval(nu, B) for e in exprs)
                acc[key] = acc.get(key, 0.0) + weight
            for key, mass in acc.items():
                assert got[key] == pytest.approx(mass, abs=1e-9), case


class TestValidator:
    def test_rejects_shared_variables_in_binary_node(self):
        x = VarLeaf("x", coin())
        bad = SumNode(x, VarLeaf("x", coin()))
        with pytest.raises(ValueError, match="share"):
            dtree.validate(bad)

    def test_rejects_variable_below_its_mutex(self):
        bad = MutexNode("x", [(0, 0.5, VarLeaf("x", coin())), (1, 0.5, ConstLeaf(1))])
        with pytest.raises(ValueError, match="below"):
            dtree.validate(bad)

    def test_rejects_incomplete_mutex_fanout(self):
        three = Distribution([(0, 0.2), (1, 0.3), (2, 0.5)])
        partial = MutexNode("x", [(0, 0.2, ConstLeaf(0)), (1, 0.3, ConstLeaf(1))])
        with pytest.raises(ValueError, match="support"):
            dtree.validate(partial, {"x": three})

    def test_compiled_trees_always_validate(self):
        rng = random.Random(131)
        for _ in range(20):
            names = ["v%d" % i for i in range(rng.randint(2, 5))]
            kind = rng.choice(list(MonoidKind))
            expr = rand_semimodule(rng, names, kind)
            dists = {n: coin(rng.uniform(0.2, 0.8)) for n in names}
            dtree.validate(dtree.compile(expr, dists, B), dists)


class TestDumps:
    def test_text_and_dot(self):
        expr = parse_expr("sum{a*(b + c)(x)10 + c(x)20}")
        tree = dtree.compile(expr, FIG_DISTS, N)
        text = dtree.dump_tree(tree)
        assert "|_|c" in text
        dot = dtree.dump_dot(tree)
        assert dot.startswith("digraph") and "->" in dot
        assert node_count(tree) >= 5
