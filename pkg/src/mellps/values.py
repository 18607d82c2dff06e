"""Values of the multiset-based relational model.

A value is an atom (optionally tagged with a trail of copy indices), a
polarized unit, a polarized pair, or a polarized finite multiset (bag).
Everything here is immutable and canonically ordered: value equality is
structural, multisets keep their elements sorted, and printing is
deterministic byte-for-byte.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Dict, Iterable, Iterator, Mapping, Optional, Sequence, Tuple, Union

POS = "+"
NEG = "-"

_POLS = (POS, NEG)


class ValueError_(Exception):
    """Raised for malformed values, bad renamings, or failed decompositions."""


def _flip(pol: str) -> str:
    return NEG if pol == POS else POS


@dataclass(frozen=True)
class Atom:
    """An atom together with its copy-index trail.

    ``loc == ()`` is a plain atom; a non-empty ``loc`` marks one of the
    indexed copies produced when a value crosses exponential layers.
    """

    name: str
    loc: Tuple[int, ...] = ()

    @property
    def plain(self) -> bool:
        return not self.loc


@dataclass(frozen=True)
class Unit:
    pol: str


@dataclass(frozen=True)
class Pair:
    pol: str
    left: "Value"
    right: "Value"


@dataclass(frozen=True)
class Bag:
    pol: str
    items: "Multiset"


Value = Union[Atom, Unit, Pair, Bag]

ResultTuple = Tuple[Value, ...]


def value_key(v: Value):
    """Total order on values; used for canonical sorting everywhere."""
    if isinstance(v, Atom):
        return (0, v.name, v.loc)
    if isinstance(v, Unit):
        return (1, v.pol)
    if isinstance(v, Pair):
        return (2, v.pol, value_key(v.left), value_key(v.right))
    if isinstance(v, Bag):
        return (3, v.pol, tuple((value_key(x), n) for x, n in v.items.pairs()))
    raise ValueError_(f"not a value: {v!r}")


class Multiset:
    """Canonical finite multiset of values.

    Stored as a sorted tuple of (value, count) pairs with counts >= 1, so
    two multisets are equal iff their canonical forms are identical.
    """

    __slots__ = ("_pairs",)

    def __init__(self, values: Iterable[Value] = ()):
        counts: Dict[Value, int] = {}
        for v in values:
            counts[v] = counts.get(v, 0) + 1
        object.__setattr__(self, "_pairs",
                           tuple(sorted(counts.items(), key=lambda it: value_key(it[0]))))

    @classmethod
    def from_pairs(cls, pairs: Iterable[Tuple[Value, int]]) -> "Multiset":
        counts: Dict[Value, int] = {}
        for v, n in pairs:
            if n < 0:
                raise ValueError_("negative multiplicity")
            if n:
                counts[v] = counts.get(v, 0) + n
        ms = cls.__new__(cls)
        object.__setattr__(ms, "_pairs",
                           tuple(sorted(counts.items(), key=lambda it: value_key(it[0]))))
        return ms

    def pairs(self) -> Tuple[Tuple[Value, int], ...]:
        return self._pairs

    def support(self) -> Tuple[Value, ...]:
        return tuple(v for v, _ in self._pairs)

    def count(self, v: Value) -> int:
        for x, n in self._pairs:
            if x == v:
                return n
        return 0

    def card(self) -> int:
        return sum(n for _, n in self._pairs)

    def __iter__(self) -> Iterator[Value]:
        for v, n in self._pairs:
            for _ in range(n):
                yield v

    def __bool__(self) -> bool:
        return bool(self._pairs)

    def __eq__(self, other) -> bool:
        return isinstance(other, Multiset) and self._pairs == other._pairs

    def __hash__(self) -> int:
        return hash(self._pairs)

    def __add__(self, other: "Multiset") -> "Multiset":
        return Multiset.from_pairs(self._pairs + other._pairs)

    def __sub__(self, other: "Multiset") -> "Multiset":
        counts = {v: n for v, n in self._pairs}
        for v, n in other._pairs:
            have = counts.get(v, 0)
            if have < n:
                raise ValueError_(f"multiset subtraction underflow at {format_value(v)}")
            counts[v] = have - n
        return Multiset.from_pairs(counts.items())

    def scale(self, k: int) -> "Multiset":
        return Multiset.from_pairs((v, n * k) for v, n in self._pairs)

    def restrict(self, keep) -> "Multiset":
        """Restriction to the support elements satisfying ``keep``."""
        return Multiset.from_pairs((v, n) for v, n in self._pairs if keep(v))

    def __repr__(self) -> str:
        return f"Multiset({format_multiset(self)})"


MultiValue = Multiset


def empty_multiset() -> Multiset:
    return Multiset(())


def orthogonal(v: Value) -> Value:
    """Linear negation on values: flips every polarity, fixes atoms."""
    if isinstance(v, Atom):
        return v
    if isinstance(v, Unit):
        return Unit(_flip(v.pol))
    if isinstance(v, Pair):
        return Pair(_flip(v.pol), orthogonal(v.left), orthogonal(v.right))
    if isinstance(v, Bag):
        return Bag(_flip(v.pol), Multiset.from_pairs((orthogonal(x), n) for x, n in v.items.pairs()))
    raise ValueError_(f"not a value: {v!r}")


def atoms_of(x) -> frozenset:
    """Set of atoms occurring in a value, multiset, or tuple of either."""
    out = set()
    _collect_atoms(x, out)
    return frozenset(out)


def _collect_atoms(x, out: set) -> None:
    if isinstance(x, Atom):
        out.add(x)
    elif isinstance(x, Unit):
        pass
    elif isinstance(x, Pair):
        _collect_atoms(x.left, out)
        _collect_atoms(x.right, out)
    elif isinstance(x, Bag):
        for v, _ in x.items.pairs():
            _collect_atoms(v, out)
    elif isinstance(x, Multiset):
        for v, _ in x.pairs():
            _collect_atoms(v, out)
    elif isinstance(x, tuple):
        for v in x:
            _collect_atoms(v, out)
    else:
        raise ValueError_(f"cannot collect atoms from {x!r}")


def is_atom_free(v) -> bool:
    return not atoms_of(v)


def star_part(ms: Multiset) -> Multiset:
    """Elements without atoms (the multiset's rigid part)."""
    return ms.restrict(lambda v: not atoms_of(v))


def atom_part(ms: Multiset) -> Multiset:
    """Elements carrying at least one atom."""
    return ms.restrict(lambda v: bool(atoms_of(v)))


# ---------------------------------------------------------------------------
# dig: indexed copies
# ---------------------------------------------------------------------------

def dig_step(s: Sequence[int], v: Value) -> Value:
    """Append the index sequence ``s`` to every atom of ``v``."""
    s = tuple(s)
    if not s:
        return v
    if isinstance(v, Atom):
        return Atom(v.name, v.loc + s)
    if isinstance(v, Unit):
        return v
    if isinstance(v, Pair):
        return Pair(v.pol, dig_step(s, v.left), dig_step(s, v.right))
    if isinstance(v, Bag):
        return Bag(v.pol, Multiset.from_pairs((dig_step(s, x), n) for x, n in v.items.pairs()))
    raise ValueError_(f"not a value: {v!r}")


def dig_multiset(s: Sequence[int], ms: Multiset) -> Multiset:
    return Multiset.from_pairs((dig_step(s, v), n) for v, n in ms.pairs())


def dig_multi(k: int, d: int, ms: Multiset) -> Multiset:
    """The multiset of the k^d indexed copies of ``ms``."""
    if d < 0:
        raise ValueError_("negative dig depth")
    if d == 0:
        return ms
    if k < 1:
        raise ValueError_("dig_multi needs k >= 1 when d >= 1")
    out = ms
    for _ in range(d):
        out = Multiset.from_pairs(
            (dig_step((j,), v), n) for v, n in out.pairs() for j in range(1, k + 1))
    return out


def _strip_last_index(v: Value) -> Value:
    if isinstance(v, Atom):
        if not v.loc:
            raise ValueError_(f"atom {v.name} has no index to strip")
        return Atom(v.name, v.loc[:-1])
    if isinstance(v, Unit):
        return v
    if isinstance(v, Pair):
        return Pair(v.pol, _strip_last_index(v.left), _strip_last_index(v.right))
    if isinstance(v, Bag):
        return Bag(v.pol, Multiset.from_pairs(
            (_strip_last_index(x), n) for x, n in v.items.pairs()))
    raise ValueError_(f"not a value: {v!r}")


def undig(k: int, ms: Multiset) -> Multiset:
    """Inverse of one dig layer: the unique b with ms = sum_{j<=k} dig(j).b.

    Atom-free elements must have multiplicity divisible by k; atom-bearing
    elements must carry a single trailing index shared by all their atoms.
    Raises ValueError_ when no such decomposition exists.
    """
    if k < 1:
        raise ValueError_("undig needs k >= 1")
    star_counts = []
    buckets: Dict[int, list] = {j: [] for j in range(1, k + 1)}
    for v, n in ms.pairs():
        ats = atoms_of(v)
        if not ats:
            if n % k:
                raise ValueError_("atom-free multiplicity not divisible by k")
            star_counts.append((v, n // k))
            continue
        trailing = {a.loc[-1] if a.loc else None for a in ats}
        if None in trailing or len(trailing) != 1:
            raise ValueError_("element mixes trailing copy indices")
        j = trailing.pop()
        if not 1 <= j <= k:
            raise ValueError_(f"trailing index {j} outside 1..{k}")
        buckets[j].append((_strip_last_index(v), n))
    slices = [Multiset.from_pairs(buckets[j]) for j in range(1, k + 1)]
    if any(s != slices[0] for s in slices[1:]):
        raise ValueError_("copy slices disagree; not a layered multiset")
    return slices[0] + Multiset.from_pairs(star_counts)


# ---------------------------------------------------------------------------
# Partial injections on atoms and their action on values
# ---------------------------------------------------------------------------

class PartialInjection:
    """A finite injective partial map on atoms."""

    __slots__ = ("_map",)

    def __init__(self, mapping: Mapping[Atom, Atom] = ()):
        m = dict(mapping)
        for a, b in m.items():
            if not isinstance(a, Atom) or not isinstance(b, Atom):
                raise ValueError_("partial injection must map atoms to atoms")
        if len(set(m.values())) != len(m):
            raise ValueError_("mapping is not injective")
        self._map = m

    def mapping(self) -> Dict[Atom, Atom]:
        return dict(self._map)

    def domain(self) -> frozenset:
        return frozenset(self._map)

    def image(self) -> frozenset:
        return frozenset(self._map.values())

    def __contains__(self, a: Atom) -> bool:
        return a in self._map

    def __getitem__(self, a: Atom) -> Atom:
        try:
            return self._map[a]
        except KeyError:
            raise ValueError_(f"atom {format_value(a)} outside injection domain") from None

    def __len__(self) -> int:
        return len(self._map)

    def __eq__(self, other) -> bool:
        return isinstance(other, PartialInjection) and self._map == other._map

    def __hash__(self) -> int:
        return hash(frozenset(self._map.items()))

    def inverse(self) -> "PartialInjection":
        return PartialInjection({b: a for a, b in self._map.items()})

    def compose(self, first: "PartialInjection") -> "PartialInjection":
        """self after first, on the atoms where the composite is defined."""
        return PartialInjection({a: self._map[b] for a, b in first._map.items()
                                 if b in self._map})

    def extended(self, extra: Mapping[Atom, Atom]) -> "PartialInjection":
        m = dict(self._map)
        for a, b in extra.items():
            if a in m and m[a] != b:
                raise ValueError_("conflicting extension of partial injection")
            m[a] = b
        return PartialInjection(m)

    def __repr__(self) -> str:
        body = ", ".join(f"{format_value(a)}->{format_value(b)}"
                         for a, b in sorted(self._map.items(),
                                            key=lambda it: value_key(it[0])))
        return f"PartialInjection({{{body}}})"


def identity_pinj(atoms: Iterable[Atom]) -> PartialInjection:
    return PartialInjection({a: a for a in atoms})


def apply_pinj(rho: PartialInjection, x):
    """Rename the atoms of a value / multiset / tuple through ``rho``."""
    if isinstance(x, Atom):
        return rho[x]
    if isinstance(x, Unit):
        return x
    if isinstance(x, Pair):
        return Pair(x.pol, apply_pinj(rho, x.left), apply_pinj(rho, x.right))
    if isinstance(x, Bag):
        return Bag(x.pol, Multiset.from_pairs(
            (apply_pinj(rho, v), n) for v, n in x.items.pairs()))
    if isinstance(x, Multiset):
        return Multiset.from_pairs((apply_pinj(rho, v), n) for v, n in x.pairs())
    if isinstance(x, tuple):
        return tuple(apply_pinj(rho, v) for v in x)
    raise ValueError_(f"cannot rename {x!r}")


# ---------------------------------------------------------------------------
# Substitutions (atoms may be replaced by arbitrary values)
# ---------------------------------------------------------------------------

def substitute(sigma: Mapping[str, Value], v: Value) -> Value:
    """Apply a substitution given on plain-atom names; unmapped names are fixed."""
    if isinstance(v, Atom):
        if v.loc:
            raise ValueError_("substitution is defined on plain values only")
        return sigma.get(v.name, v)
    if isinstance(v, Unit):
        return v
    if isinstance(v, Pair):
        return Pair(v.pol, substitute(sigma, v.left), substitute(sigma, v.right))
    if isinstance(v, Bag):
        return Bag(v.pol, Multiset.from_pairs(
            (substitute(sigma, x), n) for x, n in v.items.pairs()))
    raise ValueError_(f"not a value: {v!r}")


# ---------------------------------------------------------------------------
# Occurrence counting, k-points, injective points
# ---------------------------------------------------------------------------

def sub_values(x) -> Multiset:
    """Multiset of all sub-values (the value itself included), with multiplicity."""
    acc: list = []
    _collect_sub(x, acc)
    return Multiset(acc)


def _collect_sub(x, acc: list) -> None:
    if isinstance(x, tuple):
        for v in x:
            _collect_sub(v, acc)
        return
    if isinstance(x, Multiset):
        for v in x:
            _collect_sub(v, acc)
        return
    acc.append(x)
    if isinstance(x, Pair):
        _collect_sub(x.left, acc)
        _collect_sub(x.right, acc)
    elif isinstance(x, Bag):
        for v in x.items:
            _collect_sub(v, acc)


def is_k_point(r: ResultTuple, k: int) -> bool:
    """True iff every positive bag occurring in ``r`` has exactly k elements."""
    for v in sub_values(r).support():
        if isinstance(v, Bag) and v.pol == POS and v.items.card() != k:
            return False
    return True


def is_injective_point(r: ResultTuple) -> bool:
    """True iff every plain atom occurs either never or exactly twice in ``r``."""
    sub = sub_values(r)
    for v, n in sub.pairs():
        if isinstance(v, Atom) and v.plain and n != 2:
            return False
    return True


# ---------------------------------------------------------------------------
# Text syntax: atoms g3 / g3@[1,2], units +*/-*, pairs +(x,y), bags -[x,y,y]
# ---------------------------------------------------------------------------

_NAME_CHARS = set("abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ0123456789_")


def format_value(v: Value) -> str:
    if isinstance(v, Atom):
        if v.plain:
            return v.name
        return f"{v.name}@[{','.join(str(i) for i in v.loc)}]"
    if isinstance(v, Unit):
        return f"{v.pol}*"
    if isinstance(v, Pair):
        return f"{v.pol}({format_value(v.left)},{format_value(v.right)})"
    if isinstance(v, Bag):
        return f"{v.pol}[{format_multiset(v.items)}]"
    raise ValueError_(f"not a value: {v!r}")


def format_multiset(ms: Multiset) -> str:
    return ",".join(format_value(v) for v in ms)


def format_result(r: ResultTuple) -> str:
    return "(" + ", ".join(format_value(v) for v in r) + ")"


class _Parser:
    def __init__(self, text: str):
        self.text = text
        self.pos = 0

    def error(self, msg: str) -> ValueError_:
        return ValueError_(f"value syntax error at {self.pos}: {msg}")

    def peek(self) -> str:
        return self.text[self.pos] if self.pos < len(self.text) else ""

    def take(self, ch: str) -> None:
        if self.peek() != ch:
            raise self.error(f"expected {ch!r}")
        self.pos += 1

    def skip_ws(self) -> None:
        while self.peek() in " \t\n":
            self.pos += 1

    def parse_value(self) -> Value:
        self.skip_ws()
        c = self.peek()
        if c in _POLS:
            self.pos += 1
            nxt = self.peek()
            if nxt == "*":
                self.pos += 1
                return Unit(c)
            if nxt == "(":
                self.pos += 1
                left = self.parse_value()
                self.skip_ws()
                self.take(",")
                right = self.parse_value()
                self.skip_ws()
                self.take(")")
                return Pair(c, left, right)
            if nxt == "[":
                self.pos += 1
                items = []
                self.skip_ws()
                if self.peek() != "]":
                    items.append(self.parse_value())
                    self.skip_ws()
                    while self.peek() == ",":
                        self.pos += 1
                        items.append(self.parse_value())
                        self.skip_ws()
                self.take("]")
                return Bag(c, Multiset(items))
            raise self.error("expected '*', '(' or '[' after polarity")
        if c in _NAME_CHARS:
            start = self.pos
            while self.peek() in _NAME_CHARS:
                self.pos += 1
            name = self.text[start:self.pos]
            if self.peek() == "@":
                self.pos += 1
                self.take("[")
                loc = []
                self.skip_ws()
                if self.peek() != "]":
                    loc.append(self._parse_int())
                    self.skip_ws()
                    while self.peek() == ",":
                        self.pos += 1
                        loc.append(self._parse_int())
                        self.skip_ws()
                self.take("]")
                return Atom(name, tuple(loc))
            return Atom(name)
        raise self.error("expected a value")

    def _parse_int(self) -> int:
        self.skip_ws()
        start = self.pos
        while self.peek().isdigit():
            self.pos += 1
        if start == self.pos:
            raise self.error("expected an integer")
        return int(self.text[start:self.pos])


def parse_value(text: str) -> Value:
    p = _Parser(text)
    v = p.parse_value()
    p.skip_ws()
    if p.pos != len(text):
        raise p.error("trailing input")
    return v


def parse_result(text: str) -> ResultTuple:
    text = text.strip()
    if not (text.startswith("(") and text.endswith(")")):
        raise ValueError_("result tuple must be parenthesized")
    p = _Parser(text)
    p.take("(")
    vals = []
    p.skip_ws()
    if p.peek() != ")":
        vals.append(p.parse_value())
        p.skip_ws()
        while p.peek() == ",":
            p.pos += 1
            vals.append(p.parse_value())
            p.skip_ws()
    p.take(")")
    p.skip_ws()
    if p.pos != len(text):
        raise p.error("trailing input")
    return tuple(vals)
