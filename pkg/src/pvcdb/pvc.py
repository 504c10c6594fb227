"""Probabilistic value-conditioned tables and their possible worlds.

A pvc-table is a relation whose annotation column holds semiring
expressions over random variables and whose aggregation columns hold
semimodule expressions; the remaining columns hold constants.  A
database bundles tables over one shared probability space: every
variable has a finite distribution, and a valuation of all variables
defines a deterministic possible world whose probability is the product
of the chosen value probabilities.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

from . import algebra as alg
from .algebra import Expr, MExpr, MonoidKind, SemiringKind
from .errors import (
    CarrierMismatch,
    IllegalAggregate,
    MissingDistribution,
    WorldLimitExceeded,
)
from .prob import Distribution

CONST = "const"
AGG = "agg"

#: Default cap on exhaustive world enumeration.
DEFAULT_WORLD_LIMIT = 2**20


@dataclass
class PvcTable:
    """A named relation of (values, annotation) rows.

    ``roles[i]`` says whether column i holds constants or semimodule
    expressions.
    """

    name: str
    columns: tuple
    roles: tuple
    rows: list = field(default_factory=list)

    def __post_init__(self):
        self.columns = tuple(self.columns)
        self.roles = tuple(self.roles)
        if len(self.columns) != len(self.roles):
            raise ValueError("need one role per column")

    def add_row(self, values, phi):
        values = tuple(values)
        if len(values) != len(self.columns):
            raise ValueError(
                "%s: row width %d, schema width %d"
                % (self.name, len(values), len(self.columns))
            )
        for value, role in zip(values, self.roles):
            if role == AGG and not isinstance(value, MExpr):
                raise CarrierMismatch(
                    "%s: aggregation column holds %r" % (self.name, value)
                )
            if role == CONST and isinstance(value, (Expr, MExpr)):
                raise CarrierMismatch(
                    "%s: constant column holds an expression" % self.name
                )
        if not isinstance(phi, Expr):
            raise CarrierMismatch("%s: annotation must be a semiring expression" % self.name)
        self.rows.append((values, phi))

    def expressions(self):
        for values, phi in self.rows:
            yield phi
            for value, role in zip(values, self.roles):
                if role == AGG:
                    yield value


class PvcDatabase:
    """Named tables over one probability space."""

    def __init__(self, tables, var_dists, sk):
        self.tables = {t.name: t for t in tables}
        self.var_dists = dict(var_dists)
        self.sk = sk
        self.validate()

    def validate(self):
        for name, dist in self.var_dists.items():
            dist.check_normalized(what="distribution of %s" % name)
            for value in dist.support:
                self.sk.check_constant(value)
        for table in self.tables.values():
            for expr in table.expressions():
                for v in alg.variables(expr):
                    if v not in self.var_dists:
                        raise MissingDistribution(
                            "%s uses variable %s without a distribution"
                            % (table.name, v)
                        )
                if isinstance(expr, MExpr):
                    self._check_aggregate_kind(expr.kind, table.name)

    def _check_aggregate_kind(self, kind, where):
        if self.sk is SemiringKind.BOOLEAN and kind in (
            MonoidKind.SUM,
            MonoidKind.COUNT,
            MonoidKind.PROD,
        ):
            raise IllegalAggregate(
                "%s aggregation requires bag semantics (%s)" % (kind.name, where)
            )

    def variables_of(self, table_names=None):
        names = table_names if table_names is not None else self.tables.keys()
        out = set()
        for name in names:
            for expr in self.tables[name].expressions():
                out |= alg.variables(expr)
        return out


def world_count(db, variables=None):
    names = sorted(variables if variables is not None else db.var_dists.keys())
    total = 1
    for v in names:
        total *= len(db.var_dists[v])
    return total


def enumerate_worlds(db, limit=DEFAULT_WORLD_LIMIT, variables=None, tables=None):
    """Yield (valuation, world, probability) triples for every possible
    world, in lexicographic order of the sorted variable supports.

    A world maps each table name to a tuple of (values, weight) rows:
    cell expressions are evaluated to constants, rows whose annotation
    evaluates to the semiring's 0 are dropped, and duplicate value rows
    merge by the semiring sum of their annotations (set collapse under
    the Boolean semiring, multiplicity addition under the naturals).

    ``variables`` and ``tables`` restrict the enumeration to a subset of
    the probability space; variables outside the subset marginalise out.
    """
    names = sorted(variables if variables is not None else db.var_dists.keys())
    total = world_count(db, names)
    if total > limit:
        raise WorldLimitExceeded(
            "%d worlds exceed the limit of %d" % (total, limit)
        )
    supports = [db.var_dists[v].entries for v in names]
    for combo in itertools.product(*supports):
        nu = {}
        prob = 1.0
        for name, (value, p) in zip(names, combo):
            nu[name] = value
            prob *= p
        yield nu, instantiate(db, nu, tables), prob


def instantiate(db, nu, tables=None):
    """The deterministic world defined by one valuation."""
    world = {}
    wanted = db.tables if tables is None else {n: db.tables[n] for n in tables}
    for name, table in wanted.items():
        merged = {}
        order = []
        for values, phi in table.rows:
            weight = phi.eval(nu, db.sk)
            if weight == 0:
                continue
            concrete = tuple(
                value.eval(nu, db.sk) if isinstance(value, MExpr) else value
                for value in values
            )
            if concrete in merged:
                merged[concrete] = db.sk.add(merged[concrete], weight)
            else:
                merged[concrete] = weight
                order.append(concrete)
        world[name] = tuple((values, merged[values]) for values in order)
    return world


def semantics_mode(db):
    """Classify the database per its semiring and distribution shapes."""
    deterministic = all(len(d) == 1 for d in db.var_dists.values())
    base = "deterministic" if deterministic else "probabilistic"
    flavor = "set" if db.sk is SemiringKind.BOOLEAN else "bag"
    return "%s-%s" % (base, flavor)
