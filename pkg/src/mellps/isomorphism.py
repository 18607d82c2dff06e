"""Decision procedures for the isomorphism notions used throughout.

Structure isomorphisms are found by backtracking anchored at the indexed
conclusions, with propagation through cells and wires; the only genuine
choice points are the premise matchings of why-cells.  Value-level
isomorphisms (results, multisets, tuples of multisets, and their set
quotients) are found by a unifier that threads a single partial injection on
atoms through all components, backtracking over bag matchings.

Every witness returned here can be re-checked by the independent validators
``check_struct_iso`` and ``check_exp_iso``.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Dict, FrozenSet, Iterable, List, Mapping, Optional, Sequence, Set, Tuple

from .structure import (BANG, MULT_KINDS, WHY, WiredStructure, check_indexing)
from .values import (Atom, Bag, Multiset, Pair, PartialInjection, ResultTuple,
                     Unit, Value, apply_pinj, atoms_of, value_key)


@dataclass(frozen=True)
class StructIso:
    cell_map: Mapping[str, str]
    port_map: Mapping[str, str]


@dataclass(frozen=True)
class ExpIso:
    struct_iso: StructIso
    rho: PartialInjection
    rho_prime: PartialInjection


# ---------------------------------------------------------------------------
# Value matching with one shared renaming
# ---------------------------------------------------------------------------

@lru_cache(maxsize=1 << 17)
def _shape_sig(v: Value):
    """Renaming-invariant signature: shape with anonymous atoms, plus the
    occurrence profile of the atoms inside."""
    def shape(x):
        if isinstance(x, Atom):
            return ("A",)
        if isinstance(x, Unit):
            return ("U", x.pol)
        if isinstance(x, Pair):
            return ("P", x.pol, shape(x.left), shape(x.right))
        return ("B", x.pol, tuple(sorted((shape(y), n) for y, n in x.items.pairs())))

    counts: Dict[Atom, int] = {}
    for a in _atom_occurrences(v):
        counts[a] = counts.get(a, 0) + 1
    return shape(v), tuple(sorted(counts.values()))


def _atom_occurrences(v: Value):
    if isinstance(v, Atom):
        yield v
    elif isinstance(v, Pair):
        yield from _atom_occurrences(v.left)
        yield from _atom_occurrences(v.right)
    elif isinstance(v, Bag):
        for x, n in v.items.pairs():
            for _ in range(n):
                yield from _atom_occurrences(x)


class _Renamer:
    """Mutable injective atom map with an undo trail."""

    def __init__(self, seed: Mapping[Atom, Atom] = ()):
        self.fwd: Dict[Atom, Atom] = dict(seed)
        self.bwd: Dict[Atom, Atom] = {b: a for a, b in self.fwd.items()}
        if len(self.bwd) != len(self.fwd):
            raise ValueError("seed renaming is not injective")
        self.trail: List[Atom] = []

    def mark(self) -> int:
        return len(self.trail)

    def undo(self, mark: int) -> None:
        while len(self.trail) > mark:
            a = self.trail.pop()
            b = self.fwd.pop(a)
            del self.bwd[b]

    def bind(self, a: Atom, b: Atom) -> bool:
        cur = self.fwd.get(a)
        if cur is not None:
            return cur == b
        if b in self.bwd:
            return False
        self.fwd[a] = b
        self.bwd[b] = a
        self.trail.append(a)
        return True

    def match_value(self, x: Value, y: Value) -> bool:
        if isinstance(x, Atom):
            return isinstance(y, Atom) and self.bind(x, y)
        if isinstance(x, Unit):
            return isinstance(y, Unit) and x.pol == y.pol
        if isinstance(x, Pair):
            if not (isinstance(y, Pair) and x.pol == y.pol):
                return False
            mark = self.mark()
            if self.match_value(x.left, y.left) and self.match_value(x.right, y.right):
                return True
            self.undo(mark)
            return False
        if isinstance(x, Bag):
            if not (isinstance(y, Bag) and x.pol == y.pol):
                return False
            return self.match_multiset(x.items, y.items)
        return False

    def match_multiset(self, a: Multiset, b: Multiset) -> bool:
        if a.card() != b.card():
            return False
        ground_a = a.restrict(lambda v: not atoms_of(v))
        ground_b = b.restrict(lambda v: not atoms_of(v))
        if ground_a != ground_b:
            return False
        xs = sorted((v for v in a if atoms_of(v)),
                    key=lambda v: (-len(list(_atom_occurrences(v))), value_key(v)))
        ys = [v for v in b if atoms_of(v)]
        if len(xs) != len(ys):
            return False
        by_sig: Dict[object, List[int]] = {}
        for i, y in enumerate(ys):
            by_sig.setdefault(_shape_sig(y), []).append(i)
        for x in xs:
            if _shape_sig(x) not in by_sig:
                return False
        used = [False] * len(ys)

        def rec(i: int) -> bool:
            if i == len(xs):
                return True
            x = xs[i]
            for j in by_sig[_shape_sig(x)]:
                if used[j]:
                    continue
                mark = self.mark()
                used[j] = True
                if self.match_value(x, ys[j]) and rec(i + 1):
                    return True
                used[j] = False
                self.undo(mark)
            return False

        mark = self.mark()
        if rec(0):
            return True
        self.undo(mark)
        return False

    def match_tuple(self, xs: Sequence, ys: Sequence) -> bool:
        if len(xs) != len(ys):
            return False
        mark = self.mark()
        for x, y in zip(xs, ys):
            if isinstance(x, Multiset):
                ok = isinstance(y, Multiset) and self.match_multiset(x, y)
            else:
                ok = not isinstance(y, Multiset) and self.match_value(x, y)
            if not ok:
                self.undo(mark)
                return False
        return True

    def snapshot(self) -> PartialInjection:
        return PartialInjection(self.fwd)


def result_iso(r: ResultTuple, r2: ResultTuple,
               seed: Mapping[Atom, Atom] = ()) -> Optional[PartialInjection]:
    """A renaming carrying one result tuple onto the other, or None."""
    m = _Renamer(seed)
    if m.match_tuple(tuple(r), tuple(r2)):
        return m.snapshot()
    return None


def multiset_iso(a: Multiset, b: Multiset) -> Optional[PartialInjection]:
    m = _Renamer()
    if m.match_multiset(a, b):
        return m.snapshot()
    return None


def tuple_multiset_iso(rs: Sequence[Multiset],
                       rs2: Sequence[Multiset]) -> Optional[PartialInjection]:
    m = _Renamer()
    if m.match_tuple(tuple(rs), tuple(rs2)):
        return m.snapshot()
    return None


def _match_tuple_sets(m: _Renamer, A: Sequence[Tuple], B: Sequence[Tuple],
                      elem_match: Callable[[_Renamer, object, object], bool]) -> bool:
    if len(A) != len(B):
        return False
    used = [False] * len(B)

    def rec(i: int) -> bool:
        if i == len(A):
            return True
        for j in range(len(B)):
            if used[j]:
                continue
            mark = m.mark()
            used[j] = True
            if elem_match(m, A[i], B[j]) and rec(i + 1):
                return True
            used[j] = False
            m.undo(mark)
        return False

    return rec(0)


def _sorted_tuples(frak: Iterable[Tuple[Multiset, ...]]) -> List[Tuple[Multiset, ...]]:
    return sorted(frak, key=lambda t: tuple(tuple((value_key(v), n) for v, n in ms.pairs())
                                            for ms in t))


def psm_iso(frak: Iterable[Tuple[Multiset, ...]],
            frak2: Iterable[Tuple[Multiset, ...]]) -> Optional[PartialInjection]:
    """Set-of-tuples correspondence under one renaming."""
    A, B = _sorted_tuples(frak), _sorted_tuples(frak2)
    m = _Renamer()
    if _match_tuple_sets(m, A, B, lambda mm, x, y: mm.match_tuple(x, y)):
        return m.snapshot()
    return None


def ppsm_iso(fam: Iterable[Iterable[Tuple[Multiset, ...]]],
             fam2: Iterable[Iterable[Tuple[Multiset, ...]]]) -> Optional[PartialInjection]:
    """One more set layer: families of sets of tuples."""
    A = sorted((_sorted_tuples(x) for x in fam), key=repr)
    B = sorted((_sorted_tuples(x) for x in fam2), key=repr)
    m = _Renamer()

    def set_match(mm: _Renamer, x, y) -> bool:
        return _match_tuple_sets(mm, x, y, lambda m3, t, t2: m3.match_tuple(t, t2))

    if _match_tuple_sets(m, A, B, set_match):
        return m.snapshot()
    return None


# ---------------------------------------------------------------------------
# Structure isomorphism search
# ---------------------------------------------------------------------------

class _IsoSearch:
    def __init__(self, ws: WiredStructure, ind: Mapping[str, int],
                 ws2: WiredStructure, ind2: Mapping[str, int],
                 b: Optional[Mapping[str, FrozenSet[str]]] = None,
                 b2: Optional[Mapping[str, FrozenSet[str]]] = None,
                 labels: Optional[Mapping[str, Value]] = None,
                 labels2: Optional[Mapping[str, Value]] = None,
                 label_mode: Optional[str] = None,
                 accept: Optional[Callable[[StructIso], bool]] = None):
        self.ws, self.ind, self.ws2, self.ind2 = ws, dict(ind), ws2, dict(ind2)
        self.b, self.b2 = b, b2
        self.labels, self.labels2, self.label_mode = labels, labels2, label_mode
        self.accept = accept
        self.pmap: Dict[str, str] = {}
        self.prev: Dict[str, str] = {}
        self.cmap: Dict[str, str] = {}
        self.crev: Dict[str, str] = {}
        self.trail: List[Tuple[str, str]] = []
        self.pending: List[Tuple[str, str]] = []
        self.found: Optional[StructIso] = None

    # -- cheap global invariants -------------------------------------------

    def feasible(self) -> bool:
        pt, pt2 = self.ws.ported, self.ws2.ported
        if len(pt.ports) != len(pt2.ports) or len(self.ws.wires) != len(self.ws2.wires):
            return False
        prof = sorted((ct.kind, ct.arity) for ct in pt.cells.values())
        prof2 = sorted((ct.kind, ct.arity) for ct in pt2.cells.values())
        if prof != prof2:
            return False
        if sorted(self.ind.values()) != sorted(self.ind2.values()):
            return False
        return True

    # -- assignment with undo -----------------------------------------------

    def _mark(self) -> int:
        return len(self.trail)

    def _undo(self, mark: int) -> None:
        while len(self.trail) > mark:
            kind, key = self.trail.pop()
            if kind == "p":
                self.prev.pop(self.pmap.pop(key))
            else:
                self.crev.pop(self.cmap.pop(key))

    def _label_ok(self, p: str, p2: str) -> bool:
        if self.label_mode is None:
            return True
        x, y = self.labels[p], self.labels2[p2]
        if self.label_mode == "exact":
            return x == y
        return _shape_sig(x) == _shape_sig(y)

    def _assign_port(self, p: str, p2: str) -> bool:
        cur = self.pmap.get(p)
        if cur is not None:
            return cur == p2
        if p2 in self.prev:
            return False
        ws, ws2, pt, pt2 = self.ws, self.ws2, self.ws.ported, self.ws2.ported
        if pt.is_principal(p) != pt2.is_principal(p2):
            return False
        l, l2 = pt.cell_of(p), pt2.cell_of(p2)
        if (l is None) != (l2 is None):
            return False
        if pt.door_count.get(p) != pt2.door_count.get(p2):
            return False
        if ws.depth(p) != ws2.depth(p2):
            return False
        in_ind, in_ind2 = p in self.ind, p2 in self.ind2
        if in_ind != in_ind2 or (in_ind and self.ind[p] != self.ind2[p2]):
            return False
        if not self._label_ok(p, p2):
            return False
        self.pmap[p] = p2
        self.prev[p2] = p
        self.trail.append(("p", p))
        mate, mate2 = ws.partner(p), ws2.partner(p2)
        if (mate is None) != (mate2 is None):
            return False
        if mate is not None:
            self.pending.append((mate, mate2))
        if l is not None:
            if not self._assign_cell(l, l2):
                return False
            if pt.kind(l) in MULT_KINDS and \
                    (p == pt.left[l]) != (p2 == pt2.left[l2]):
                return False
        return True

    def _assign_cell(self, l: str, l2: str) -> bool:
        cur = self.cmap.get(l)
        if cur is not None:
            return cur == l2
        if l2 in self.crev:
            return False
        pt, pt2 = self.ws.ported, self.ws2.ported
        if pt.kind(l) != pt2.kind(l2) or pt.arity(l) != pt2.arity(l2):
            return False
        if self.b is not None and pt.kind(l) == BANG and \
                len(self.b[l]) != len(self.b2[l2]):
            return False
        self.cmap[l] = l2
        self.crev[l2] = l
        self.trail.append(("c", l))
        self.pending.append((pt.principal[l], pt2.principal[l2]))
        kind = pt.kind(l)
        if kind in MULT_KINDS:
            self.pending.append((pt.left[l], pt2.left[l2]))
            self.pending.append((pt.right(l), pt2.right(l2)))
        elif kind == BANG:
            (q,), (q2,) = pt.aux_ports(l), pt2.aux_ports(l2)
            self.pending.append((q, q2))
        return True

    def _propagate(self) -> bool:
        while self.pending:
            p, p2 = self.pending.pop()
            if not self._assign_port(p, p2):
                self.pending.clear()
                return False
        return True

    def _open_why(self) -> Optional[Tuple[str, str, List[str], List[str]]]:
        pt, pt2 = self.ws.ported, self.ws2.ported
        for l in sorted(self.cmap):
            if pt.kind(l) != WHY:
                continue
            rest = sorted(p for p in pt.aux_ports(l) if p not in self.pmap)
            if rest:
                l2 = self.cmap[l]
                rest2 = sorted(p for p in pt2.aux_ports(l2) if p not in self.prev)
                return l, l2, rest, rest2
        return None

    def _finish(self) -> bool:
        if len(self.pmap) != len(self.ws.ported.ports) or \
                len(self.cmap) != len(self.ws.ported.cells):
            return False
        iso = StructIso(dict(self.cmap), dict(self.pmap))
        if check_struct_iso(self.ws, self.ind, self.ws2, self.ind2, iso,
                            self.b, self.b2):
            return False
        if self.accept is not None and not self.accept(iso):
            return False
        self.found = iso
        return True

    def _solve(self) -> bool:
        if not self._propagate():
            return False
        spot = self._open_why()
        if spot is None:
            return self._finish()
        _, _, rest, rest2 = spot
        p = rest[0]
        for p2 in rest2:
            mark = self._mark()
            self.pending.append((p, p2))
            if self._solve():
                return True
            self._undo(mark)
        return False

    def run(self) -> Optional[StructIso]:
        if not self.feasible():
            return None
        by_index2 = {i: p for p, i in self.ind2.items()}
        for p, i in sorted(self.ind.items()):
            self.pending.append((p, by_index2[i]))
        self._solve()
        return self.found


def iso_structure(ws: WiredStructure, ind: Mapping[str, int],
                  ws2: WiredStructure, ind2: Mapping[str, int],
                  b: Optional[Mapping[str, FrozenSet[str]]] = None,
                  b2: Optional[Mapping[str, FrozenSet[str]]] = None) -> Optional[StructIso]:
    """Exhaustive indexed-structure isomorphism search; pass the box
    assignments of both sides to decide proof-structure isomorphism."""
    check_indexing(ws, ind)
    check_indexing(ws2, ind2)
    if (b is None) != (b2 is None):
        raise ValueError("provide box assignments for both structures or neither")
    return _IsoSearch(ws, ind, ws2, ind2, b=b, b2=b2).run()


def check_struct_iso(ws: WiredStructure, ind: Mapping[str, int],
                     ws2: WiredStructure, ind2: Mapping[str, int],
                     iso: StructIso,
                     b: Optional[Mapping[str, FrozenSet[str]]] = None,
                     b2: Optional[Mapping[str, FrozenSet[str]]] = None) -> List[str]:
    """Re-check every commuting square of a claimed isomorphism."""
    pt, pt2 = ws.ported, ws2.ported
    cm, pm = dict(iso.cell_map), dict(iso.port_map)
    errs: List[str] = []
    if sorted(cm) != sorted(pt.cells) or sorted(set(cm.values())) != sorted(pt2.cells):
        errs.append("cell map is not a bijection onto the target cells")
        return errs
    if sorted(pm) != sorted(pt.ports) or sorted(set(pm.values())) != sorted(pt2.ports):
        errs.append("port map is not a bijection onto the target ports")
        return errs
    for l, l2 in cm.items():
        if pt.kind(l) != pt2.kind(l2) or pt.arity(l) != pt2.arity(l2):
            errs.append(f"cell {l} changes type or arity")
        if {pm[p] for p in pt.ports_of[l]} != set(pt2.ports_of[l2]):
            errs.append(f"cell {l} port set does not transport")
        if pm[pt.principal[l]] != pt2.principal[l2]:
            errs.append(f"cell {l} principal port does not transport")
        if pt.kind(l) in MULT_KINDS and pm[pt.left[l]] != pt2.left[l2]:
            errs.append(f"cell {l} left port does not transport")
    for p, n in pt.door_count.items():
        if pt2.door_count.get(pm[p]) != n:
            errs.append(f"door count of {p} does not transport")
    wires2 = set(ws2.wires)
    for p, q in ws.wires:
        pp, qq = pm[p], pm[q]
        if (min(pp, qq), max(pp, qq)) not in wires2:
            errs.append(f"wire ({p},{q}) does not transport")
    if len(ws.wires) != len(ws2.wires):
        errs.append("wire counts differ")
    for c, i in ind.items():
        if ind2.get(pm[c]) != i:
            errs.append(f"conclusion {c} index does not transport")
    if b is not None:
        for v, doors in b.items():
            if {pm[p] for p in doors} != set(b2[cm[v]]):
                errs.append(f"box of {v} does not transport")
    return errs


# ---------------------------------------------------------------------------
# Experiment isomorphisms
# ---------------------------------------------------------------------------

def kexp_iso(e, e2) -> Optional[StructIso]:
    """Label-preserving isomorphism between two k-experiments."""
    if e.k != e2.k:
        return None
    return _IsoSearch(e.structure, e.ind, e2.structure, e2.ind,
                      labels=e.labels, labels2=e2.labels,
                      label_mode="exact").run()


def kexp_iso_at(e, e2) -> Optional[ExpIso]:
    """Isomorphism up to atom renamings on both sides."""
    if e.k != e2.k:
        return None
    holder: List[ExpIso] = []
    ports = sorted(e.structure.ported.ports)

    def accept(iso: StructIso) -> bool:
        xs = tuple(e.labels[p] for p in ports)
        ys = tuple(e2.labels[iso.port_map[p]] for p in ports)
        m = _Renamer()
        if not m.match_tuple(xs, ys):
            return False
        rho = m.snapshot()
        rho2 = PartialInjection({a: a for a in atoms_of(ys)})
        holder.append(ExpIso(iso, rho, rho2))
        return True

    _IsoSearch(e.structure, e.ind, e2.structure, e2.ind,
               labels=e.labels, labels2=e2.labels,
               label_mode="shape", accept=accept).run()
    return holder[0] if holder else None


def check_exp_iso(e, e2, iso: ExpIso) -> List[str]:
    """Validate a claimed experiment isomorphism up to renamings."""
    errs = check_struct_iso(e.structure, e.ind, e2.structure, e2.ind, iso.struct_iso)
    if errs:
        return errs
    if e.k != e2.k:
        return ["k differs"]
    for p in sorted(e.structure.ported.ports):
        lhs = apply_pinj(iso.rho, e.labels[p])
        rhs = apply_pinj(iso.rho_prime, e2.labels[iso.struct_iso.port_map[p]])
        if lhs != rhs:
            errs.append(f"labels at {p} disagree after renaming")
    if apply_pinj(iso.rho, e.result) != apply_pinj(iso.rho_prime, e2.result):
        errs.append("results disagree after renaming")
    return errs
