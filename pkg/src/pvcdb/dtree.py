"""Compilation of expressions into decomposition trees.

A decomposition tree is a normal form in which every binary node
combines two sub-expressions with *disjoint* variable sets (hence
independent as random variables) and every mutex node splits on the
possible values of one variable (hence mutually exclusive cases).  Once
an expression is in this form, its exact probability distribution
follows bottom-up: convolution at independent nodes, weighted mixture at
mutex nodes.

The compiler applies rules in a fixed order: constant folding, then an
independent-sum split, an independent-product split, an independent
scaling split, an independent comparison split, and finally a mutex
expansion on the variable with most occurrences.  The independence
splits work on the flattened source form: summands are grouped by
connected components of their variable-overlap graph, products by
components of their factors, and a sum of products is factored by the
common factors of all its summands.  This recognises read-once
expressions, such as the annotations of hierarchical queries, without
any mutex node; everything else falls back to mutex expansion, which is
always applicable but can be exponential.
"""

from __future__ import annotations

import itertools

from . import algebra as alg
from .algebra import (
    Add,
    Cmp,
    Const,
    Expr,
    MConst,
    MExpr,
    MonoidKind,
    MSum,
    Mul,
    Scaled,
    SemiringKind,
    Var,
)
from .errors import (
    BudgetExceeded,
    CarrierMismatch,
    MissingDistribution,
    NoVariables,
    WrongMonoid,
)
from .prob import Distribution, compare_convolve, convolve, mix

# ---------------------------------------------------------------------------
# Nodes
# ---------------------------------------------------------------------------


class DNode:
    __slots__ = ("_vars",)

    def __init__(self):
        self._vars = None

    def children(self):
        return ()

    def vars(self):
        if self._vars is None:
            acc = set()
            for c in self.children():
                acc |= c.vars()
            if isinstance(self, VarLeaf):
                acc.add(self.name)
            if isinstance(self, MutexNode):
                acc.add(self.var)
            self._vars = frozenset(acc)
        return self._vars

    def label(self):
        raise NotImplementedError


class VarLeaf(DNode):
    __slots__ = ("name", "dist")

    def __init__(self, name, dist):
        super().__init__()
        self.name = name
        self.dist = dist

    def label(self):
        return self.name


class ConstLeaf(DNode):
    """A semiring constant."""

    __slots__ = ("value",)

    def __init__(self, value):
        super().__init__()
        self.value = value

    def label(self):
        return str(self.value)


class MonoidLeaf(DNode):
    """A monoid constant (a fully scaled term folds to one)."""

    __slots__ = ("value",)

    def __init__(self, value):
        super().__init__()
        self.value = value

    def label(self):
        return "m:" + ("%s" % self.value)


class SumNode(DNode):
    """Independent sum; semiring when kind is None, monoid otherwise."""

    __slots__ = ("left", "right", "kind")

    def __init__(self, left, right, kind=None):
        super().__init__()
        self.left = left
        self.right = right
        self.kind = kind

    def children(self):
        return (self.left, self.right)

    def label(self):
        return "(+)" if self.kind is None else "(+)%s" % self.kind.value


class ProdNode(DNode):
    """Independent semiring product."""

    __slots__ = ("left", "right")

    def __init__(self, left, right):
        super().__init__()
        self.left = left
        self.right = right

    def children(self):
        return (self.left, self.right)

    def label(self):
        return "(.)"


class ScaleNode(DNode):
    """Independent scaling of a semimodule part by a semiring part."""

    __slots__ = ("left", "right", "kind")

    def __init__(self, left, right, kind):
        super().__init__()
        self.left = left
        self.right = right
        self.kind = kind

    def children(self):
        return (self.left, self.right)

    def label(self):
        return "(x)%s" % self.kind.value


class CmpNode(DNode):
    """Independent comparison, yielding a semiring 0/1."""

    __slots__ = ("theta", "left", "right")

    def __init__(self, left, theta, right):
        super().__init__()
        self.left = left
        self.theta = theta
        self.right = right

    def children(self):
        return (self.left, self.right)

    def label(self):
        return "[%s]" % self.theta


class MutexNode(DNode):
    """Case split on the values of one variable.

    One child per support value of the variable, holding the
    sub-expression with that value substituted; the child weight is the
    value's probability.  Joint-compiled mutex nodes carry the indices
    of the expressions they cover.
    """

    __slots__ = ("var", "branches", "indices")

    def __init__(self, var, branches, indices=None):
        super().__init__()
        self.var = var
        self.branches = tuple(branches)  # (value, prob, child)
        self.indices = indices

    def children(self):
        return tuple(c for _, _, c in self.branches)

    def label(self):
        return "|_|%s" % self.var


class JointScalar(DNode):
    """Wraps a scalar tree as a one-component joint tree."""

    __slots__ = ("indices", "inner")

    def __init__(self, index, inner):
        super().__init__()
        self.indices = (index,)
        self.inner = inner

    def children(self):
        return (self.inner,)

    def label(self):
        return "joint[%d]" % self.indices[0]


class JointProduct(DNode):
    """Combines variable-disjoint joint trees; the joint distribution of
    independent parts is the product of their distributions."""

    __slots__ = ("indices", "parts")

    def __init__(self, parts):
        super().__init__()
        self.parts = tuple(parts)
        merged = []
        for p in self.parts:
            merged.extend(p.indices)
        self.indices = tuple(sorted(merged))

    def children(self):
        return self.parts

    def label(self):
        return "joint(x)"


def _unique_nodes(d):
    seen = {}
    stack = [d]
    while stack:
        node = stack.pop()
        if id(node) in seen:
            continue
        seen[id(node)] = node
        stack.extend(node.children())
    return list(seen.values())


def node_count(d):
    """Number of distinct nodes (shared subtrees count once)."""
    return len(_unique_nodes(d))


def mutex_count(d):
    return sum(1 for n in _unique_nodes(d) if isinstance(n, MutexNode))


# ---------------------------------------------------------------------------
# Independence splits
# ---------------------------------------------------------------------------


def _components(items):
    """Group items by overlap of their variable sets.

    Items without variables are pooled into one group.  Returns groups
    in first-occurrence order as lists of items.
    """
    tagged = [(item, alg.variables(item)) for item in items]
    parent = list(range(len(tagged)))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    by_var = {}
    constant = []
    for i, (_, vs) in enumerate(tagged):
        if not vs:
            constant.append(i)
            continue
        for v in vs:
            if v in by_var:
                ra, rb = find(by_var[v]), find(i)
                if ra != rb:
                    parent[rb] = ra
            else:
                by_var[v] = i
    groups = {}
    order = []
    for i, (item, vs) in enumerate(tagged):
        if not vs:
            continue
        root = find(i)
        if root not in groups:
            groups[root] = []
            order.append(root)
        groups[root].append(item)
    out = [groups[r] for r in order]
    if constant:
        out.append([tagged[i][0] for i in constant])
    return out


def split_sum(expr):
    """Split a sum into two variable-disjoint halves, or None."""
    parts = alg.sum_parts(expr)
    if len(parts) < 2:
        return None
    groups = _components(parts)
    if len(groups) < 2:
        return None
    kind = expr.kind if isinstance(expr, MExpr) else None
    first = alg.rebuild_sum(groups[0], kind)
    rest = alg.rebuild_sum([p for g in groups[1:] for p in g], kind)
    return first, rest


def _common_factors(factor_lists):
    """Multiset intersection of factor lists, matched structurally."""
    common = {}
    for f in factor_lists[0]:
        common.setdefault(f.key(), []).append(f)
    for factors in factor_lists[1:]:
        counts = {}
        for f in factors:
            counts[f.key()] = counts.get(f.key(), 0) + 1
        for k in list(common):
            keep = min(len(common[k]), counts.get(k, 0))
            if keep == 0:
                del common[k]
            else:
                common[k] = common[k][:keep]
    out = []
    for fs in common.values():
        out.extend(fs)
    return out


def _remove_factors(factors, removed):
    budget = {}
    for f in removed:
        budget[f.key()] = budget.get(f.key(), 0) + 1
    kept = []
    for f in factors:
        k = f.key()
        if budget.get(k, 0) > 0:
            budget[k] -= 1
        else:
            kept.append(f)
    return kept


def split_product(expr):
    """Split a semiring expression as an independent product, or None.

    A product splits by connected components of its factors; a sum of
    products splits by dividing out the factors common to all summands.
    """
    if isinstance(expr, Mul):
        groups = _components(list(expr.parts))
        if len(groups) < 2:
            return None
        first = alg.make_product(groups[0])
        rest = alg.make_product([p for g in groups[1:] for p in g])
        return first, rest
    if isinstance(expr, Add):
        factor_lists = [alg.product_factors(p) for p in expr.parts]
        common = _common_factors(factor_lists)
        if not common:
            return None
        psi = alg.make_product(common)
        rest = alg.make_sum(
            [alg.make_product(_remove_factors(fl, common)) for fl in factor_lists]
        )
        if alg.variables(psi) & alg.variables(rest):
            return None
        return psi, rest
    return None


def split_scale(expr):
    """Factor a common semiring condition out of a scaled sum, or None."""
    if not isinstance(expr, (Scaled, MSum)):
        return None
    terms = alg.sum_parts(expr)
    if any(not isinstance(t, Scaled) for t in terms):
        return None
    kind = expr.kind
    factor_lists = [alg.product_factors(t.weight) for t in terms]
    common = [f for f in _common_factors(factor_lists) if alg.variables(f)]
    if not common:
        return None
    psi = alg.make_product(common)
    rest = alg.make_msum(
        kind,
        [
            alg.make_scaled(kind, alg.make_product(_remove_factors(fl, common)), t.value)
            for fl, t in zip(factor_lists, terms)
        ],
    )
    if alg.variables(psi) & alg.variables(rest):
        return None
    return psi, rest


def split_compare(expr):
    if not isinstance(expr, Cmp):
        return None
    if alg.variables(expr.left) & alg.variables(expr.right):
        return None
    return expr.left, expr.right


def partition_independent(expr, rule):
    """Try one independence rule; returns a pair of variable-disjoint
    sub-expressions whose recombination equals the input, or None."""
    if rule == "sum":
        return split_sum(expr)
    if rule == "product":
        return split_product(expr)
    if rule == "scalar":
        return split_scale(expr)
    if rule == "compare":
        return split_compare(expr)
    raise ValueError("unknown rule %r" % rule)


def choose_branch_variable(expr):
    """The variable with most occurrences in the expression as written;
    ties break towards the lexicographically smallest name."""
    counts = alg.occurrences(expr)
    if not counts:
        raise NoVariables("expression has no variables")
    return min(counts.items(), key=lambda kv: (-kv[1], kv[0]))[0]


# ---------------------------------------------------------------------------
# Compilation
# ---------------------------------------------------------------------------


class _Compiler:
    def __init__(self, var_dists, sk, node_budget=None):
        self.var_dists = var_dists
        self.sk = sk
        self.remaining = node_budget
        self.memo = {}

    def charge(self):
        if self.remaining is not None:
            self.remaining -= 1
            if self.remaining < 0:
                raise BudgetExceeded("node budget exhausted")

    def dist_of(self, name):
        try:
            return self.var_dists[name]
        except KeyError:
            raise MissingDistribution("no distribution for variable %s" % name) from None

    def compile(self, expr):
        # Equal sub-expressions recur across mutex branches; compiling
        # each once turns the tree into a DAG without changing any
        # distribution.
        key = expr.key()
        hit = self.memo.get(key)
        if hit is not None:
            return hit
        self.charge()
        if isinstance(expr, Expr):
            node = self._compile_semiring(expr)
        elif isinstance(expr, MExpr):
            node = self._compile_semimodule(expr)
        else:
            raise TypeError("not an expression: %r" % (expr,))
        self.memo[key] = node
        return node

    def _compile_semiring(self, expr):
        if not alg.variables(expr):
            return ConstLeaf(alg.eval_semiring(expr, {}, self.sk))
        if isinstance(expr, Var):
            return VarLeaf(expr.name, self.dist_of(expr.name))
        pair = split_sum(expr)
        if pair is not None:
            return SumNode(self.compile(pair[0]), self.compile(pair[1]))
        pair = split_product(expr)
        if pair is not None:
            return ProdNode(self.compile(pair[0]), self.compile(pair[1]))
        if isinstance(expr, Cmp):
            pair = split_compare(expr)
            if pair is not None:
                return CmpNode(self.compile(pair[0]), expr.theta, self.compile(pair[1]))
        return self._mutex(expr)

    def _compile_semimodule(self, expr):
        if not alg.variables(expr):
            return MonoidLeaf(alg.eval_semimodule(expr, {}, self.sk))
        pair = split_sum(expr)
        if pair is not None:
            return SumNode(self.compile(pair[0]), self.compile(pair[1]), expr.kind)
        pair = split_scale(expr)
        if pair is not None:
            return ScaleNode(self.compile(pair[0]), self.compile(pair[1]), expr.kind)
        return self._mutex(expr)

    def _mutex(self, expr):
        x = choose_branch_variable(expr)
        dist = self.dist_of(x)
        branches = []
        for value, p in dist.entries:
            child = self.compile(alg.substitute(expr, x, value))
            branches.append((value, p, child))
        return MutexNode(x, branches)


def compile(expr, var_dists, sk=SemiringKind.BOOLEAN, node_budget=None):
    """Compile an expression into a decomposition tree.

    Every variable of the expression must have a finite distribution in
    ``var_dists``.  The optional node budget guards against exponential
    blowup on adversarial inputs.
    """
    return _Compiler(var_dists, sk, node_budget).compile(expr)


# ---------------------------------------------------------------------------
# Bottom-up distribution computation
# ---------------------------------------------------------------------------


def distribution(d, sk=SemiringKind.BOOLEAN, _memo=None):
    """The exact probability distribution represented by a tree,
    computed bottom-up with one result per distinct node."""
    memo = _memo if _memo is not None else {}
    hit = memo.get(id(d))
    if hit is not None:
        return hit
    out = _distribution(d, sk, memo)
    memo[id(d)] = out
    return out


def _distribution(d, sk, memo):
    if isinstance(d, VarLeaf):
        return d.dist
    if isinstance(d, ConstLeaf):
        return Distribution.point(d.value)
    if isinstance(d, MonoidLeaf):
        return Distribution.point(d.value)
    if isinstance(d, SumNode):
        op = sk.add if d.kind is None else d.kind.plus
        return convolve(
            distribution(d.left, sk, memo), distribution(d.right, sk, memo), op
        )
    if isinstance(d, ProdNode):
        return convolve(
            distribution(d.left, sk, memo), distribution(d.right, sk, memo), sk.mul
        )
    if isinstance(d, ScaleNode):
        return convolve(
            distribution(d.left, sk, memo),
            distribution(d.right, sk, memo),
            lambda s, m: alg.scale(s, m, d.kind),
        )
    if isinstance(d, CmpNode):
        return compare_convolve(
            distribution(d.left, sk, memo), distribution(d.right, sk, memo), d.theta
        )
    if isinstance(d, MutexNode):
        weights = [p for _, p, _ in d.branches]
        children = [distribution(c, sk, memo) for _, _, c in d.branches]
        return mix(weights, children)
    if isinstance(d, JointScalar):
        inner = distribution(d.inner, sk, memo)
        return Distribution(((v,), p) for v, p in inner.entries)
    if isinstance(d, JointProduct):
        return _joint_product_dist(d, sk, memo)
    raise TypeError("not a d-tree node: %r" % (d,))


def _joint_product_dist(d, sk, memo):
    child_dists = [distribution(c, sk, memo) for c in d.parts]
    slot = {idx: i for i, idx in enumerate(d.indices)}
    entries = []
    for combo in itertools.product(*(cd.entries for cd in child_dists)):
        prob = 1.0
        values = [None] * len(d.indices)
        for part, (value, p) in zip(d.parts, combo):
            prob *= p
            for k, idx in enumerate(part.indices):
                values[slot[idx]] = value[k]
        entries.append((tuple(values), prob))
    return Distribution.from_pairs(entries)


def eval_dtree(d, nu, sk=SemiringKind.BOOLEAN):
    """Evaluate the expression a tree represents under a valuation.

    This is the structural read-back: it never touches probabilities,
    so agreement with the source expression on every valuation verifies
    the compilation.
    """
    if isinstance(d, VarLeaf):
        return nu[d.name]
    if isinstance(d, (ConstLeaf, MonoidLeaf)):
        return d.value
    if isinstance(d, SumNode):
        a, b = eval_dtree(d.left, nu, sk), eval_dtree(d.right, nu, sk)
        return sk.add(a, b) if d.kind is None else d.kind.plus(a, b)
    if isinstance(d, ProdNode):
        return sk.mul(eval_dtree(d.left, nu, sk), eval_dtree(d.right, nu, sk))
    if isinstance(d, ScaleNode):
        return alg.scale(eval_dtree(d.left, nu, sk), eval_dtree(d.right, nu, sk), d.kind)
    if isinstance(d, CmpNode):
        return 1 if alg.compare(eval_dtree(d.left, nu, sk), eval_dtree(d.right, nu, sk), d.theta) else 0
    if isinstance(d, MutexNode):
        x = nu[d.var]
        for value, _, child in d.branches:
            if value == x:
                return eval_dtree(child, nu, sk)
        raise ValueError("value %r of %s has probability zero" % (x, d.var))
    if isinstance(d, JointScalar):
        return (eval_dtree(d.inner, nu, sk),)
    if isinstance(d, JointProduct):
        values = [None] * len(d.indices)
        slot = {idx: i for i, idx in enumerate(d.indices)}
        for part in d.parts:
            sub = eval_dtree(part, nu, sk)
            for k, idx in enumerate(part.indices):
                values[slot[idx]] = sub[k]
        return tuple(values)
    raise TypeError("not a d-tree node: %r" % (d,))


def validate(d, var_dists=None):
    """Check the structural discipline of a tree.

    Binary combination nodes must have variable-disjoint children, and
    below a mutex node its variable must not occur; when distributions
    are supplied, mutex branches must enumerate exactly the non-zero
    support.  Raises ValueError on the first violation.
    """
    for node in _unique_nodes(d):
        if isinstance(node, (SumNode, ProdNode, ScaleNode, CmpNode)):
            shared = node.children()[0].vars() & node.children()[1].vars()
            if shared:
                raise ValueError(
                    "children of %s share variables %s" % (node.label(), shared)
                )
        if isinstance(node, JointProduct):
            for a, b in itertools.combinations(node.parts, 2):
                if a.vars() & b.vars():
                    raise ValueError("joint product parts share variables")
        if isinstance(node, MutexNode):
            for value, p, child in node.branches:
                if node.var in child.vars():
                    raise ValueError("%s occurs below its own mutex node" % node.var)
            if var_dists is not None and node.var in var_dists:
                expected = var_dists[node.var].support
                got = tuple(value for value, _, _ in node.branches)
                if tuple(sorted(got)) != tuple(sorted(expected)):
                    raise ValueError(
                        "mutex on %s covers %r, support is %r"
                        % (node.var, got, expected)
                    )
    return True


def dump_tree(d, indent=0):
    """Indented textual rendering."""
    pad = "  " * indent
    if isinstance(d, MutexNode):
        lines = [pad + d.label()]
        for value, p, child in d.branches:
            lines.append("%s  <- %s (p=%.6g)" % (pad, value, p))
            lines.append(dump_tree(child, indent + 2))
        return "\n".join(lines)
    lines = [pad + d.label()]
    for c in d.children():
        lines.append(dump_tree(c, indent + 1))
    return "\n".join(lines)


def dump_dot(d):
    """Graph description (DOT digraph) for external rendering."""
    lines = ["digraph dtree {", "  node [shape=box];"]
    counter = itertools.count()

    def walk(node):
        nid = "n%d" % next(counter)
        lines.append('  %s [label="%s"];' % (nid, node.label().replace('"', "'")))
        if isinstance(node, MutexNode):
            for value, p, child in node.branches:
                cid = walk(child)
                lines.append('  %s -> %s [label="%s: %.4g"];' % (nid, cid, value, p))
        else:
            for child in node.children():
                cid = walk(child)
                lines.append("  %s -> %s;" % (nid, cid))
        return nid

    walk(d)
    lines.append("}")
    return "\n".join(lines)


# ---------------------------------------------------------------------------
# MIN/MAX reduction to Boolean variables
# ---------------------------------------------------------------------------


def reduce_to_boolean(expr, var_dists):
    """Rewrite a MIN or MAX expression over natural-valued variables to
    an equivalent one over Boolean variables.

    MIN and MAX only care whether a condition fires, so each variable
    keeps its probability of being 0 and pools the rest on 1.  The
    returned pair (expression, distributions) yields the same
    distribution under the Boolean semiring as the input under the
    natural semiring.
    """
    if not isinstance(expr, MExpr) or expr.kind not in (MonoidKind.MIN, MonoidKind.MAX):
        raise WrongMonoid("reduction applies to MIN and MAX expressions only")
    _check_plain(expr)
    reduced = dict(var_dists)
    for name in alg.variables(expr):
        dist = var_dists.get(name)
        if dist is None:
            raise MissingDistribution("no distribution for variable %s" % name)
        if all(v in (0, 1) for v in dist.support):
            continue
        p0 = dist[0]
        entries = []
        if p0 > 0:
            entries.append((0, p0))
        if 1.0 - p0 > 0:
            entries.append((1, 1.0 - p0))
        reduced[name] = Distribution(entries)
    return _booleanize(expr), reduced


def _check_plain(expr):
    if isinstance(expr, Cmp):
        raise CarrierMismatch("reduction requires condition-free semiring parts")
    if isinstance(expr, (Add, Mul)):
        for p in expr.parts:
            _check_plain(p)
    elif isinstance(expr, Scaled):
        _check_plain(expr.weight)
    elif isinstance(expr, MSum):
        for t in expr.terms:
            _check_plain(t)


def _booleanize(expr):
    if isinstance(expr, Const):
        return Const(0 if expr.value == 0 else 1)
    if isinstance(expr, Var):
        return expr
    if isinstance(expr, Add):
        return alg.make_sum([_booleanize(p) for p in expr.parts])
    if isinstance(expr, Mul):
        return alg.make_product([_booleanize(p) for p in expr.parts])
    if isinstance(expr, MConst):
        return expr
    if isinstance(expr, Scaled):
        return alg.make_scaled(expr.kind, _booleanize(expr.weight), expr.value)
    if isinstance(expr, MSum):
        return alg.make_msum(expr.kind, [_booleanize(t) for t in expr.terms])
    raise TypeError("not an expression: %r" % (expr,))


# ---------------------------------------------------------------------------
# Pruning of conditional expressions
# ---------------------------------------------------------------------------

_MIRROR = {"<=": ">=", ">=": "<=", "<": ">", ">": "<", "=": "=", "!=": "!="}

# For MIN/MAX against a constant bound, a term whose value fails this
# predicate can neither satisfy nor break the comparison and is dropped.
_MIN_KEEP = {
    "<=": lambda v, m: v <= m,
    "<": lambda v, m: v < m,
    ">=": lambda v, m: v < m,
    ">": lambda v, m: v <= m,
    "=": lambda v, m: v <= m,
    "!=": lambda v, m: v <= m,
}
_MAX_KEEP = {
    ">=": lambda v, m: v >= m,
    ">": lambda v, m: v > m,
    "<=": lambda v, m: v > m,
    "<": lambda v, m: v >= m,
    "=": lambda v, m: v >= m,
    "!=": lambda v, m: v >= m,
}


def prune(cond, sk=SemiringKind.BOOLEAN, var_dists=None):
    """Drop redundant terms from a conditional against a constant bound.

    For MIN and MAX the comparison outcome only depends on terms on the
    deciding side of the bound.  For SUM, value bounds can force the
    comparison outright, in which case the semiring constant 1 or 0 is
    returned.  Unrecognised shapes come back unchanged.
    """
    if not isinstance(cond, Cmp):
        return cond
    left, theta, right = cond.left, cond.theta, cond.right
    if isinstance(right, MExpr) and isinstance(left, MConst) and not isinstance(right, MConst):
        left, right, theta = right, left, _MIRROR[theta]
    if not isinstance(left, (MSum, Scaled)) or not isinstance(right, MConst):
        return cond
    bound = right.value
    kind = left.kind
    terms = alg.sum_parts(left)
    if kind in (MonoidKind.MIN, MonoidKind.MAX):
        keep = (_MIN_KEEP if kind is MonoidKind.MIN else _MAX_KEEP)[theta]
        forced = _minmax_forced(kind, theta, terms, bound)
        if forced is not None:
            return forced
        kept = [t for t in terms if keep(t.value, bound)]
        if len(kept) == len(terms):
            return cond
        if not kept:
            # No remaining term can decide the comparison, so its truth
            # is that of the empty sum against the bound.
            return Const(1 if alg.compare(kind.neutral, bound, theta) else 0)
        return Cmp(alg.make_msum(kind, kept), theta, right)
    if kind in (MonoidKind.SUM, MonoidKind.COUNT):
        kept = [t for t in terms if not (isinstance(t, Scaled) and t.value == 0)]
        forced = _sum_forced(theta, kept, bound, sk, var_dists)
        if forced is not None:
            return forced
        if len(kept) == len(terms):
            return cond
        if not kept:
            return Cmp(MConst(kind, 0), theta, right)
        return Cmp(alg.make_msum(kind, kept), theta, right)
    return cond


def _minmax_forced(kind, theta, terms, bound):
    consts = [t.value for t in terms if isinstance(t, MConst)]
    if not consts:
        return None
    if kind is MonoidKind.MIN:
        ceiling = min(consts)
        if theta in ("<=", "<"):
            return Const(1) if alg.compare(ceiling, bound, theta) else None
        if theta == ">=" and ceiling < bound:
            return Const(0)
        if theta == ">" and ceiling <= bound:
            return Const(0)
        if theta == "=" and ceiling < bound:
            return Const(0)
        if theta == "!=" and ceiling < bound:
            return Const(1)
        return None
    floor = max(consts)
    if theta in (">=", ">"):
        return Const(1) if alg.compare(floor, bound, theta) else None
    if theta == "<=" and floor > bound:
        return Const(0)
    if theta == "<" and floor >= bound:
        return Const(0)
    if theta == "=" and floor > bound:
        return Const(0)
    if theta == "!=" and floor > bound:
        return Const(1)
    return None


def _weight_bounds(expr, sk, var_dists):
    """Smallest and largest semiring value an expression can take, or
    None when the supports needed are unavailable."""
    if isinstance(expr, Const):
        return expr.value, expr.value
    if isinstance(expr, Cmp):
        return 0, 1
    if isinstance(expr, Var):
        if sk is SemiringKind.BOOLEAN:
            return 0, 1
        if var_dists is None or expr.name not in var_dists:
            return None
        support = var_dists[expr.name].support
        return min(support), max(support)
    if isinstance(expr, Add):
        lo, hi = 0, 0
        for p in expr.parts:
            b = _weight_bounds(p, sk, var_dists)
            if b is None:
                return None
            lo, hi = lo + b[0], hi + b[1]
        if sk is SemiringKind.BOOLEAN:
            lo, hi = min(lo, 1), min(hi, 1)
        return lo, hi
    if isinstance(expr, Mul):
        lo, hi = 1, 1
        for p in expr.parts:
            b = _weight_bounds(p, sk, var_dists)
            if b is None:
                return None
            lo, hi = lo * b[0], hi * b[1]
        return lo, hi
    return None


def _sum_forced(theta, terms, bound, sk, var_dists):
    lo, hi = 0, 0
    for t in terms:
        if isinstance(t, MConst):
            lo += t.value
            hi += t.value
            continue
        b = _weight_bounds(t.weight, sk, var_dists)
        if b is None:
            return None
        lo += b[0] * t.value
        hi += b[1] * t.value
    if theta == "<=":
        if hi <= bound:
            return Const(1)
        if lo > bound:
            return Const(0)
    elif theta == "<":
        if hi < bound:
            return Const(1)
        if lo >= bound:
            return Const(0)
    elif theta == ">=":
        if lo >= bound:
            return Const(1)
        if hi < bound:
            return Const(0)
    elif theta == ">":
        if lo > bound:
            return Const(1)
        if hi <= bound:
            return Const(0)
    elif theta == "=":
        if hi < bound or lo > bound:
            return Const(0)
    elif theta == "!=":
        if hi < bound or lo > bound:
            return Const(1)
    return None


def prune_all(expr, sk=SemiringKind.BOOLEAN, var_dists=None):
    """Apply :func:`prune` to every conditional inside an expression."""
    if isinstance(expr, (Var, Const, MConst)):
        return expr
    if isinstance(expr, Add):
        return alg.make_sum([prune_all(p, sk, var_dists) for p in expr.parts])
    if isinstance(expr, Mul):
        return alg.make_product([prune_all(p, sk, var_dists) for p in expr.parts])
    if isinstance(expr, Cmp):
        rebuilt = Cmp(
            prune_all(expr.left, sk, var_dists),
            expr.theta,
            prune_all(expr.right, sk, var_dists),
        )
        return prune(rebuilt, sk, var_dists)
    if isinstance(expr, Scaled):
        return alg.make_scaled(expr.kind, prune_all(expr.weight, sk, var_dists), expr.value)
    if isinstance(expr, MSum):
        return alg.make_msum(expr.kind, [prune_all(t, sk, var_dists) for t in expr.terms])
    raise TypeError("not an expression: %r" % (expr,))


# ---------------------------------------------------------------------------
# Joint compilation
# ---------------------------------------------------------------------------


def compile_joint(exprs, var_dists, sk=SemiringKind.BOOLEAN, node_budget=None):
    """Compile several expressions over one variable universe into a
    single tree whose distribution ranges over value tuples.

    Mutex expansion proceeds until the expressions fall apart into
    variable-disjoint groups, which then combine by product.
    """
    compiler = _Compiler(var_dists, sk, node_budget)
    indexed = list(enumerate(exprs))
    return _compile_joint(compiler, indexed)


def _compile_joint(compiler, indexed):
    compiler.charge()
    if len(indexed) == 1:
        idx, expr = indexed[0]
        return JointScalar(idx, compiler.compile(expr))
    groups = _joint_groups(indexed)
    if len(groups) > 1:
        return JointProduct([_compile_joint(compiler, g) for g in groups])
    counts = alg.occurrences(indexed[0][1])
    for _, expr in indexed[1:]:
        counts.update(alg.occurrences(expr))
    x = min(counts.items(), key=lambda kv: (-kv[1], kv[0]))[0]
    dist = compiler.dist_of(x)
    branches = []
    for value, p in dist.entries:
        substituted = [(i, alg.substitute(e, x, value)) for i, e in indexed]
        branches.append((value, p, _compile_joint(compiler, substituted)))
    return MutexNode(x, branches, indices=tuple(sorted(i for i, _ in indexed)))


def _joint_groups(indexed):
    """Connected components over the indexed expressions; variable-free
    expressions each form their own group."""
    parent = list(range(len(indexed)))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    by_var = {}
    for pos, (_, expr) in enumerate(indexed):
        for v in alg.variables(expr):
            if v in by_var:
                ra, rb = find(by_var[v]), find(pos)
                if ra != rb:
                    parent[rb] = ra
            else:
                by_var[v] = pos
    groups = {}
    order = []
    for pos, item in enumerate(indexed):
        root = find(pos)
        if root not in groups:
            groups[root] = []
            order.append(root)
        groups[root].append(item)
    return [groups[r] for r in order]
