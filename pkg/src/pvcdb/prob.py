"""Finite discrete probability distributions and their combination.

A :class:`Distribution` maps finitely many carrier values (semiring
values, monoid values, or tuples of those for joint distributions) to
strictly positive probabilities and is kept sorted by value.  The three
combinators mirror how decomposition-tree nodes combine the
distributions of independent or mutually exclusive children:

* :func:`convolve` gives the distribution of ``op(x, y)`` for
  independent ``x`` and ``y`` by summing probability mass over all value
  pairs that map to each outcome;
* :func:`compare_convolve` specialises convolution to comparisons,
  producing a distribution over the semiring's 0 and 1;
* :func:`mix` combines distributions of mutually exclusive cases,
  weighted by the case probabilities.

Probabilities are 64-bit floats; mass checks use an absolute tolerance
of ``MASS_TOL`` and entries falling below ``PRUNE_EPS`` after a
combination are dropped to keep supports small.  Both are module-level
knobs.
"""

from __future__ import annotations

from .algebra import INF, NEG_INF
from .errors import (
    LengthMismatch,
    UnorderedCarrier,
    WeightSumOutOfTolerance,
)
from .algebra import compare

#: Absolute tolerance for all probability-mass equality checks.
MASS_TOL = 1e-9

#: Entries with probability below this are pruned after combinations.
PRUNE_EPS = 1e-15


class Distribution:
    """An immutable finite map from carrier values to probabilities.

    Entries are (value, probability) pairs sorted by value, with all
    probabilities strictly positive and no duplicate values.
    """

    __slots__ = ("entries",)

    def __init__(self, entries):
        self.entries = tuple(sorted(entries))
        seen = None
        for value, p in self.entries:
            if p <= 0:
                raise ValueError("non-positive probability %r for %r" % (p, value))
            if seen is not None and value == seen:
                raise ValueError("duplicate value %r" % (value,))
            seen = value

    @classmethod
    def from_pairs(cls, pairs, prune=True):
        """Accumulate possibly repeated (value, probability) pairs."""
        acc = {}
        for value, p in pairs:
            acc[value] = acc.get(value, 0.0) + p
        if prune:
            return cls((v, p) for v, p in acc.items() if p > PRUNE_EPS)
        return cls((v, p) for v, p in acc.items() if p > 0)

    @classmethod
    def point(cls, value):
        return cls(((value, 1.0),))

    def __iter__(self):
        return iter(self.entries)

    def __len__(self):
        return len(self.entries)

    def __eq__(self, other):
        return isinstance(other, Distribution) and self.entries == other.entries

    def __hash__(self):
        return hash(self.entries)

    def __repr__(self):
        return "Distribution(%r)" % (list(self.entries),)

    def __getitem__(self, value):
        for v, p in self.entries:
            if v == value:
                return p
        return 0.0

    @property
    def support(self):
        return tuple(v for v, _ in self.entries)

    def total_mass(self):
        return sum(p for _, p in self.entries)

    def is_normalized(self, tol=MASS_TOL):
        return abs(self.total_mass() - 1.0) <= tol

    def check_normalized(self, tol=MASS_TOL, what="distribution"):
        mass = self.total_mass()
        if abs(mass - 1.0) > tol:
            raise WeightSumOutOfTolerance(
                "%s has total mass %.12g, expected 1" % (what, mass)
            )
        return self

    def close_to(self, other, tol=MASS_TOL):
        """True when both distributions assign the same mass to every
        value within the tolerance."""
        values = {v for v, _ in self.entries} | {v for v, _ in other.entries}
        return all(abs(self[v] - other[v]) <= tol for v in values)


def convolve(p, q, op):
    """Distribution of ``op(x, y)`` for independent x ~ p and y ~ q.

    Restricted to pairs of non-zero probability, so the result is finite
    whenever the inputs are.  Total mass is the product of the input
    masses.
    """
    acc = {}
    for a, pa in p.entries:
        for b, qb in q.entries:
            c = op(a, b)
            acc[c] = acc.get(c, 0.0) + pa * qb
    return Distribution((v, m) for v, m in acc.items() if m > PRUNE_EPS)


def compare_convolve(p, q, theta):
    """Distribution over {0, 1} of ``[x theta y]`` for independent x, y."""
    if theta in ("<=", ">=", "<", ">"):
        for v, _ in list(p.entries[:1]) + list(q.entries[:1]):
            if isinstance(v, tuple):
                raise UnorderedCarrier(
                    "order comparison %r on tuple-valued carrier" % theta
                )
    true_mass = 0.0
    for a, pa in p.entries:
        for b, qb in q.entries:
            if compare(a, b, theta):
                true_mass += pa * qb
    total = p.total_mass() * q.total_mass()
    false_mass = total - true_mass
    entries = []
    if false_mass > PRUNE_EPS:
        entries.append((0, false_mass))
    if true_mass > PRUNE_EPS:
        entries.append((1, true_mass))
    return Distribution(entries)


def mix(weights, children):
    """Weighted mixture of distributions of mutually exclusive cases.

    The weights must be positive and sum to 1 within ``MASS_TOL``; all
    children must share one carrier.
    """
    if len(weights) != len(children):
        raise LengthMismatch(
            "%d weights for %d children" % (len(weights), len(children))
        )
    total = sum(weights)
    if abs(total - 1.0) > MASS_TOL:
        raise WeightSumOutOfTolerance("mixture weights sum to %.12g" % total)
    if any(w <= 0 for w in weights):
        raise WeightSumOutOfTolerance("mixture weights must be positive")
    acc = {}
    for w, child in zip(weights, children):
        for v, p in child.entries:
            acc[v] = acc.get(v, 0.0) + w * p
    return Distribution((v, m) for v, m in acc.items() if m > PRUNE_EPS)


# ---------------------------------------------------------------------------
# Serialization: sorted `value<TAB>probability` lines
# ---------------------------------------------------------------------------


def _format_value(value):
    if isinstance(value, tuple):
        return ",".join(_format_value(v) for v in value)
    if value == INF:
        return "+inf"
    if value == NEG_INF:
        return "-inf"
    return str(value)


def format_distribution(d):
    return "".join("%s\t%.12g\n" % (_format_value(v), p) for v, p in d.entries)


def _parse_value(text):
    if "," in text:
        return tuple(_parse_value(part) for part in text.split(","))
    if text == "+inf":
        return INF
    if text == "-inf":
        return NEG_INF
    return int(text)


def parse_distribution(text):
    entries = []
    for line in text.splitlines():
        line = line.strip()
        if not line:
            continue
        value, prob = line.split("\t")
        entries.append((_parse_value(value), float(prob)))
    return Distribution(entries)
