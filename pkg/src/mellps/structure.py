"""Cut-free proof-structure syntax: cells, ports, wires and their refinements.

A ported structure is a set of typed cells, each owning arity+1 ports with a
distinguished principal port (its conclusion); multiplicative cells also
distinguish a left port, and every auxiliary port of a why-cell carries a
door count recording how many box boundaries its branch crosses.  A wired
structure adds a wire set and is graded by a validity ladder:

    raw < omega_pplps < pplps < plps < lps

pplps requires the wiring discipline of cut-free structures, plps forbids
vicious cycles (the below-order is antisymmetric), and lps asks that the two
ports of every axiom sit at the same depth.

All structures are immutable after construction; every operation returns a
new structure.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Dict, FrozenSet, Iterable, List, Mapping, NamedTuple, Optional, Set, Tuple

TENSOR = "tensor"
PAR = "par"
ONE = "one"
BOT = "bot"
BANG = "bang"
WHY = "why"

CELL_KINDS = (TENSOR, PAR, ONE, BOT, BANG, WHY)
MULT_KINDS = (TENSOR, PAR)

FORCED_ARITY = {TENSOR: 2, PAR: 2, ONE: 0, BOT: 0, BANG: 1}

LEVEL_RAW = "raw"
LEVEL_OMEGA = "omega_pplps"
LEVEL_PPLPS = "pplps"
LEVEL_PLPS = "plps"
LEVEL_LPS = "lps"

_LEVEL_ORDER = {LEVEL_RAW: 0, LEVEL_OMEGA: 1, LEVEL_PPLPS: 2, LEVEL_PLPS: 3, LEVEL_LPS: 4}


class StructureError(Exception):
    """Malformed structure: broken port maps, bad arguments, level violations."""


def level_at_least(level: str, wanted: str) -> bool:
    return _LEVEL_ORDER[level] >= _LEVEL_ORDER[wanted]


@dataclass(frozen=True)
class CellType:
    kind: str
    arity: int

    def __post_init__(self):
        if self.kind not in CELL_KINDS:
            raise StructureError(f"unknown cell kind {self.kind!r}")
        forced = FORCED_ARITY.get(self.kind)
        if forced is not None and self.arity != forced:
            raise StructureError(f"{self.kind} cell must have arity {forced}")
        if self.kind == WHY and self.arity < 0:
            raise StructureError("why cell arity must be >= 0")


class PortedStructure:
    """Cells with their ports: attachment, principal/left maps, door counts."""

    __slots__ = ("cells", "ports", "ports_of", "principal", "left", "door_count",
                 "_port_cell", "_aux_of", "_principal_ports")

    def __init__(self,
                 cells: Mapping[str, CellType],
                 ports: Iterable[str],
                 ports_of: Mapping[str, Iterable[str]],
                 principal: Mapping[str, str],
                 left: Mapping[str, str],
                 door_count: Mapping[str, int]):
        self.cells = dict(cells)
        self.ports = tuple(sorted(ports))
        self.ports_of = {l: frozenset(ps) for l, ps in ports_of.items()}
        self.principal = dict(principal)
        self.left = dict(left)
        self.door_count = dict(door_count)
        self._check()
        self._port_cell = {}
        for l in self.cells:
            for p in self.ports_of[l]:
                self._port_cell[p] = l
        self._aux_of = {l: self.ports_of[l] - {self.principal[l]} for l in self.cells}
        self._principal_ports = frozenset(self.principal.values())

    def _check(self) -> None:
        port_set = set(self.ports)
        if len(port_set) != len(self.ports):
            raise StructureError("duplicate port ids")
        if set(self.ports_of) != set(self.cells) or set(self.principal) != set(self.cells):
            raise StructureError("ports_of/principal domain must be the cell set")
        seen: Set[str] = set()
        for l, ct in sorted(self.cells.items()):
            ps = self.ports_of[l]
            if not ps <= port_set:
                raise StructureError(f"cell {l} attaches unknown ports")
            if ps & seen:
                raise StructureError(f"cell {l} shares ports with another cell")
            seen |= ps
            if len(ps) != ct.arity + 1:
                raise StructureError(f"cell {l} must own arity+1 = {ct.arity + 1} ports")
            if self.principal[l] not in ps:
                raise StructureError(f"principal port of {l} is not one of its ports")
            if ct.kind in MULT_KINDS:
                lp = self.left.get(l)
                if lp is None or lp not in ps or lp == self.principal[l]:
                    raise StructureError(f"multiplicative cell {l} needs a left auxiliary port")
            elif l in self.left:
                raise StructureError(f"left port given for non-multiplicative cell {l}")
        why_aux = set()
        for l, ct in self.cells.items():
            if ct.kind == WHY:
                why_aux |= self.ports_of[l] - {self.principal[l]}
        if set(self.door_count) != why_aux:
            raise StructureError("door_count domain must be exactly the why-cell auxiliary ports")
        for p, n in self.door_count.items():
            if n < 0:
                raise StructureError(f"door count of {p} is negative")

    # -- basic views ------------------------------------------------------

    def kind(self, l: str) -> str:
        return self.cells[l].kind

    def arity(self, l: str) -> int:
        return self.cells[l].arity

    def aux_ports(self, l: str) -> FrozenSet[str]:
        return self._aux_of[l]

    def right(self, l: str) -> str:
        (r,) = self._aux_of[l] - {self.left[l]}
        return r

    def cell_of(self, p: str) -> Optional[str]:
        return self._port_cell.get(p)

    def is_principal(self, p: str) -> bool:
        return p in self._principal_ports

    def cells_of_kind(self, kind: str) -> Tuple[str, ...]:
        return tuple(sorted(l for l, ct in self.cells.items() if ct.kind == kind))

    def why_aux_ports(self) -> Tuple[str, ...]:
        return tuple(sorted(self.door_count))

    def aux_doors(self) -> Tuple[str, ...]:
        return tuple(sorted(p for p, n in self.door_count.items() if n > 0))


class Measure(NamedTuple):
    cosize: int
    mes: Tuple[int, int]


class WiredStructure:
    """A ported structure plus wires, with cached order/depth machinery."""

    __slots__ = ("ported", "wires", "_partner", "_level", "_violations",
                 "_down", "_depth", "_conclusion_under")

    def __init__(self, ported: PortedStructure, wires: Iterable[Tuple[str, str]]):
        self.ported = ported
        norm = set()
        for w in wires:
            p, q = w
            if p == q:
                raise StructureError(f"wire with identical endpoints {p}")
            if p not in ported._port_cell and p not in set(ported.ports):
                raise StructureError(f"wire endpoint {p} is not a port")
            norm.add((min(p, q), max(p, q)))
        self.wires = tuple(sorted(norm))
        port_set = set(ported.ports)
        partner: Dict[str, str] = {}
        for p, q in self.wires:
            if p not in port_set or q not in port_set:
                raise StructureError(f"wire ({p},{q}) uses unknown ports")
            if p in partner or q in partner:
                raise StructureError(f"port reused by several wires near ({p},{q})")
            partner[p] = q
            partner[q] = p
        self._partner = partner
        self._level = None
        self._violations = None
        self._down = None
        self._depth = {}
        self._conclusion_under = {}

    # -- wiring views -----------------------------------------------------

    def partner(self, p: str) -> Optional[str]:
        return self._partner.get(p)

    def conclusions(self) -> Tuple[str, ...]:
        pt = self.ported
        out = []
        for p in pt.ports:
            attached = pt.cell_of(p) is not None
            wired = p in self._partner
            if not (attached and wired):
                out.append(p)
        return tuple(out)

    def terminal_cells(self) -> Tuple[str, ...]:
        pt = self.ported
        concl = set(self.conclusions())
        return tuple(sorted(l for l in pt.cells if pt.principal[l] in concl))

    def axioms(self) -> Tuple[Tuple[str, str], ...]:
        pt = self.ported
        return tuple(w for w in self.wires
                     if not pt.is_principal(w[0]) and not pt.is_principal(w[1]))

    def axiom_ports(self) -> FrozenSet[str]:
        return frozenset(p for w in self.axioms() for p in w)

    def terminal_axioms(self) -> Tuple[Tuple[str, str], ...]:
        concl = set(self.conclusions())
        return tuple(w for w in self.axioms() if w[0] in concl or w[1] in concl)

    def isolated_axioms(self) -> Tuple[Tuple[str, str], ...]:
        concl = set(self.conclusions())
        return tuple(w for w in self.axioms() if w[0] in concl and w[1] in concl)

    # -- the below-order ---------------------------------------------------
    #
    # Each port has at most one immediately-below neighbour: the principal
    # port of its own cell for an auxiliary port, the (non-principal) wire
    # partner for a principal port.  The order is therefore a forest and
    # walking down from any port reaches its unique conclusion.

    def down_parent(self, p: str) -> Optional[str]:
        if self._down is None:
            down: Dict[str, Optional[str]] = {}
            pt = self.ported
            for q in pt.ports:
                l = pt.cell_of(q)
                if l is not None and q != pt.principal[l]:
                    down[q] = pt.principal[l]
                elif l is not None:  # principal port: below it sits its wire partner
                    mate = self._partner.get(q)
                    down[q] = mate if mate is not None and not pt.is_principal(mate) else None
                else:
                    down[q] = None
            self._down = down
        return self._down[p]

    def down_chain(self, p: str) -> List[str]:
        """Ports from p down to its conclusion, inclusive. Detects cycles."""
        chain = [p]
        seen = {p}
        cur = p
        while True:
            nxt = self.down_parent(cur)
            if nxt is None:
                return chain
            if nxt in seen:
                raise StructureError(f"vicious cycle through port {p}")
            chain.append(nxt)
            seen.add(nxt)
            cur = nxt

    def leq(self, q: str, p: str) -> bool:
        """q <= p in the below-order."""
        return q in self.down_chain(p)

    def up_neighbours(self, p: str) -> Tuple[str, ...]:
        pt = self.ported
        out = []
        l = pt.cell_of(p)
        if l is not None and p == pt.principal[l]:
            out.extend(sorted(pt.aux_ports(l)))
        if not pt.is_principal(p):
            mate = self._partner.get(p)
            if mate is not None and pt.is_principal(mate):
                out.append(mate)
        return tuple(out)

    def ports_above(self, p: str) -> FrozenSet[str]:
        """All q with q >= p."""
        seen = {p}
        stack = [p]
        while stack:
            for q in self.up_neighbours(stack.pop()):
                if q not in seen:
                    seen.add(q)
                    stack.append(q)
        return frozenset(seen)

    def conclusion_under(self, p: str) -> str:
        if p not in self._conclusion_under:
            self._conclusion_under[p] = self.down_chain(p)[-1]
        return self._conclusion_under[p]

    def depth(self, p: str) -> int:
        """Number of box boundaries below ``p``: bangs strictly below plus the
        door counts of the auxiliary doors at or below ``p``."""
        if p not in self._depth:
            if p not in set(self.ported.ports):
                raise StructureError(f"unknown port {p}")
            pt = self.ported
            chain = self.down_chain(p)
            d = 0
            for q in chain:
                if q != p:
                    l = pt.cell_of(q)
                    if l is not None and pt.kind(l) == BANG and q == pt.principal[l]:
                        d += 1
                d += pt.door_count.get(q, 0)
            self._depth[p] = d
        return self._depth[p]

    def structure_depth(self) -> int:
        return max((self.depth(p) for p in self.ported.ports), default=0)

    def has_axiom_above(self, p: str) -> bool:
        ax = self.axiom_ports()
        return any(q in ax for q in self.ports_above(p))


# ---------------------------------------------------------------------------
# Validation ladder
# ---------------------------------------------------------------------------

def validate(ws: WiredStructure) -> Tuple[str, List[str]]:
    """Strongest refinement whose conditions all hold, plus the violations of
    the next levels. Structural (type-level) errors raise instead."""
    if ws._level is not None:
        return ws._level, list(ws._violations)
    pt = ws.ported
    violations: List[str] = []
    level = LEVEL_RAW

    basic: List[str] = []
    for p in pt.ports:
        if not pt.is_principal(p) and ws.partner(p) is None:
            basic.append(f"non-principal port {p} is not wired")
    for p, q in ws.wires:
        if pt.is_principal(p) and pt.is_principal(q):
            basic.append(f"wire ({p},{q}) joins two principal ports (a cut)")
    unattached_ok = True
    for p in pt.ports:
        if pt.cell_of(p) is None:
            mate = ws.partner(p)
            if mate is not None and pt.is_principal(mate):
                unattached_ok = False
                violations.append(f"free port {p} is wired to a principal port")
    if basic:
        violations = basic + violations
        ws._level, ws._violations = level, tuple(violations)
        return level, violations
    level = LEVEL_OMEGA
    if not unattached_ok:
        ws._level, ws._violations = level, tuple(violations)
        return level, violations
    level = LEVEL_PPLPS

    try:
        for p in pt.ports:
            ws.down_chain(p)
    except StructureError as exc:
        violations.append(str(exc))
        ws._level, ws._violations = level, tuple(violations)
        return level, violations
    level = LEVEL_PLPS

    for p, q in ws.axioms():
        dp, dq = ws.depth(p), ws.depth(q)
        if dp != dq:
            violations.append(f"axiom ({p},{q}) has unequal depths {dp} != {dq}")
    if violations:
        ws._level, ws._violations = level, tuple(violations)
        return level, violations
    level = LEVEL_LPS
    ws._level, ws._violations = level, ()
    return level, []


def require_level(ws: WiredStructure, wanted: str) -> None:
    level, violations = validate(ws)
    if not level_at_least(level, wanted):
        raise StructureError(
            f"structure is {level}, {wanted} required: {'; '.join(violations) or 'n/a'}")


# ---------------------------------------------------------------------------
# Why-cell taxonomy and terminal-shape classification
# ---------------------------------------------------------------------------

def weakenings(ws: WiredStructure) -> Tuple[str, ...]:
    pt = ws.ported
    return tuple(l for l in pt.cells_of_kind(WHY) if pt.arity(l) == 0)


def derelictions(ws: WiredStructure) -> Tuple[str, ...]:
    pt = ws.ported
    return tuple(l for l in pt.cells_of_kind(WHY)
                 if pt.arity(l) == 1
                 and all(pt.door_count[p] == 0 for p in pt.aux_ports(l)))


def contractions(ws: WiredStructure) -> Tuple[str, ...]:
    pt = ws.ported
    return tuple(l for l in pt.cells_of_kind(WHY)
                 if pt.arity(l) > 1
                 and any(pt.door_count[p] == 0 for p in pt.aux_ports(l)))


def door_contractions(ws: WiredStructure) -> Tuple[str, ...]:
    """Why-cells all of whose premises cross at least one box boundary."""
    pt = ws.ported
    return tuple(l for l in pt.cells_of_kind(WHY)
                 if pt.arity(l) >= 1
                 and all(pt.door_count[p] > 0 for p in pt.aux_ports(l)))


CLASS_EMPTY = "empty"
CLASS_AX = "ax"
CLASS_MULT = "mult"
CLASS_UNIT = "unit"
CLASS_WEAK = "weak"
CLASS_DER = "der"
CLASS_CONTR = "contr"
CLASS_CONTRUNIT = "contrunit"
CLASS_BANGUNIT = "bangunit"
CLASS_CBOX = "cbox"

CLASS_ORDER = (CLASS_EMPTY, CLASS_AX, CLASS_MULT, CLASS_UNIT, CLASS_WEAK,
               CLASS_DER, CLASS_CONTR, CLASS_CONTRUNIT, CLASS_BANGUNIT, CLASS_CBOX)


def classify(ws: WiredStructure) -> str:
    """First applicable terminal-shape class under the fixed precedence."""
    require_level(ws, LEVEL_LPS)
    pt = ws.ported
    if not ws.wires:
        return CLASS_EMPTY
    if ws.isolated_axioms():
        return CLASS_AX
    terminal = set(ws.terminal_cells())
    kinds = {pt.kind(l) for l in terminal}
    if kinds & set(MULT_KINDS):
        return CLASS_MULT
    if kinds & {ONE, BOT}:
        return CLASS_UNIT
    if terminal & set(weakenings(ws)):
        return CLASS_WEAK
    if terminal & set(derelictions(ws)):
        return CLASS_DER
    if terminal & set(contractions(ws)):
        return CLASS_CONTR
    for l in sorted(terminal):
        if pt.kind(l) != WHY:
            continue
        for p in sorted(pt.aux_ports(l)):
            if pt.door_count[p] >= 1 and not ws.has_axiom_above(p):
                return CLASS_CONTRUNIT
    for l in sorted(terminal):
        if pt.kind(l) != BANG:
            continue
        (p,) = pt.aux_ports(l)
        if not ws.has_axiom_above(p):
            return CLASS_BANGUNIT
    return CLASS_CBOX


def measure(ws: WiredStructure) -> Measure:
    """(cosize, mes): max why-arity, and the lexicographic induction measure."""
    pt = ws.ported
    whys = pt.cells_of_kind(WHY)
    cosize = max((pt.arity(l) for l in whys), default=0)
    arity_sum = sum(pt.arity(l) for l in whys)
    weight = len(pt.ports) + sum(n for n in pt.door_count.values() if n > 0)
    return Measure(cosize, (arity_sum, weight))


# ---------------------------------------------------------------------------
# Rebuilding and the closure that prunes dangling conclusions
# ---------------------------------------------------------------------------

def _rebuild(cells: Mapping[str, CellType],
             ports: Iterable[str],
             ports_of: Mapping[str, FrozenSet[str]],
             principal: Mapping[str, str],
             left: Mapping[str, str],
             door_count: Mapping[str, int],
             wires: Iterable[Tuple[str, str]]) -> WiredStructure:
    pt = PortedStructure(cells, ports, ports_of, principal, left, door_count)
    return WiredStructure(pt, wires)


def omega_close(ws: WiredStructure) -> Tuple[WiredStructure, FrozenSet[str]]:
    """Drop free ports wired to principal ports; returns (structure, dropped)."""
    pt = ws.ported
    dropped = set()
    for p in pt.ports:
        if pt.cell_of(p) is None:
            mate = ws.partner(p)
            if mate is not None and pt.is_principal(mate):
                dropped.add(p)
    if not dropped:
        return ws, frozenset()
    keep = [p for p in pt.ports if p not in dropped]
    wires = [w for w in ws.wires if w[0] not in dropped and w[1] not in dropped]
    out = _rebuild(pt.cells, keep, pt.ports_of, pt.principal, pt.left,
                   pt.door_count, wires)
    return out, frozenset(dropped)


def remove_terminal(ws: WiredStructure, cell_ids: Iterable[str]) -> WiredStructure:
    """Delete terminal cells and their principal ports, then close.

    Accepts a single multiplicative, dereliction, unit or weakening cell, or
    any set of bang cells.
    """
    require_level(ws, LEVEL_PLPS)
    cs = sorted(set(cell_ids))
    pt = ws.ported
    terminal = set(ws.terminal_cells())
    for l in cs:
        if l not in pt.cells:
            raise StructureError(f"unknown cell {l}")
        if l not in terminal:
            raise StructureError(f"cell {l} is not terminal")
    if not cs:
        return ws
    if not all(pt.kind(l) == BANG for l in cs):
        if len(cs) != 1:
            raise StructureError("only bang cells may be removed as a set")
        (l,) = cs
        removable = (pt.kind(l) in MULT_KINDS or pt.kind(l) in (ONE, BOT)
                     or l in derelictions(ws) or l in weakenings(ws))
        if not removable:
            raise StructureError(f"cell {l} is not a removable terminal cell")
    gone_ports = {pt.principal[l] for l in cs}
    cells = {l: ct for l, ct in pt.cells.items() if l not in cs}
    ports = [p for p in pt.ports if p not in gone_ports]
    ports_of = {l: pt.ports_of[l] for l in cells}
    principal = {l: pt.principal[l] for l in cells}
    left = {l: p for l, p in pt.left.items() if l in cells}
    door_count = {p: n for p, n in pt.door_count.items()
                  if pt.cell_of(p) not in cs}
    wires = [w for w in ws.wires if w[0] not in gone_ports and w[1] not in gone_ports]
    out = _rebuild(cells, ports, ports_of, principal, left, door_count, wires)
    out, _ = omega_close(out)
    return out


def reduce_isolated(ws: WiredStructure, l: str) -> WiredStructure:
    """Shed the axiom-free material hanging over a terminal bang or why cell.

    A bang with no axiom above it is removed outright; a why cell gets the
    door count decremented on every axiom-free branch that crosses a box
    boundary. Structures in which the cell does own axioms are returned
    unchanged, matching the no-damage guarantee used by the separation
    recursion.
    """
    require_level(ws, LEVEL_PLPS)
    pt = ws.ported
    if l not in pt.cells:
        raise StructureError(f"unknown cell {l}")
    if l not in set(ws.terminal_cells()):
        raise StructureError(f"cell {l} is not terminal")
    kind = pt.kind(l)
    if kind == BANG:
        ax = ws.axiom_ports()
        above = ws.ports_above(pt.principal[l])
        if above & ax:
            return ws
        return remove_terminal(ws, [l])
    if kind == WHY:
        doors = {}
        for q in sorted(pt.aux_ports(l)):
            if pt.door_count[q] >= 1 and not ws.has_axiom_above(q):
                doors[q] = pt.door_count[q] - 1
        if not doors:
            return ws
        door_count = dict(pt.door_count)
        door_count.update(doors)
        return _rebuild(pt.cells, pt.ports, pt.ports_of, pt.principal, pt.left,
                        door_count, ws.wires)
    raise StructureError(f"cell {l} is neither bang nor why")


def strip_layer(ws: WiredStructure) -> WiredStructure:
    """Peel one exponential layer off a structure whose terminal cells are all
    bangs and all-door why cells: decrement every terminal why door count and
    remove the terminal bangs."""
    if classify(ws) != CLASS_CBOX:
        raise StructureError("strip_layer needs a cbox-class structure")
    pt = ws.ported
    terminal = set(ws.terminal_cells())
    door_count = dict(pt.door_count)
    for l in sorted(terminal):
        if pt.kind(l) == WHY:
            for q in pt.aux_ports(l):
                if door_count[q] < 1:
                    raise StructureError(f"terminal why {l} has a doorless premise {q}")
                door_count[q] -= 1
    lowered = _rebuild(pt.cells, pt.ports, pt.ports_of, pt.principal, pt.left,
                       door_count, ws.wires)
    bangs = [l for l in sorted(terminal) if pt.kind(l) == BANG]
    return remove_terminal(lowered, bangs) if bangs else lowered


# ---------------------------------------------------------------------------
# Indexed structures: a bijection conclusions -> 1..n
# ---------------------------------------------------------------------------

def check_indexing(ws: WiredStructure, ind: Mapping[str, int]) -> None:
    concl = set(ws.conclusions())
    if set(ind) != concl:
        raise StructureError("index map must cover exactly the conclusions")
    if sorted(ind.values()) != list(range(1, len(concl) + 1)):
        raise StructureError("index map must be a bijection onto 1..n")


def default_indexing(ws: WiredStructure) -> Dict[str, int]:
    return {p: i + 1 for i, p in enumerate(sorted(ws.conclusions()))}


def reindex_after(ws_old: WiredStructure, ind_old: Mapping[str, int],
                  ws_new: WiredStructure) -> Dict[str, int]:
    """Transport an index map along a layer-removing transformation: each new
    conclusion inherits the index of the old conclusion below it."""
    ind_new = {}
    for p in ws_new.conclusions():
        if p in ind_old:
            ind_new[p] = ind_old[p]
        else:
            c = ws_old.conclusion_under(p)
            ind_new[p] = ind_old[c]
    check_indexing(ws_new, ind_new)
    return ind_new


def reduce_isolated_indexed(ws: WiredStructure, ind: Mapping[str, int],
                            l: str) -> Tuple[WiredStructure, Dict[str, int]]:
    out = reduce_isolated(ws, l)
    return out, reindex_after(ws, ind, out)


def strip_layer_indexed(ws: WiredStructure, ind: Mapping[str, int]
                        ) -> Tuple[WiredStructure, Dict[str, int]]:
    out = strip_layer(ws)
    return out, reindex_after(ws, ind, out)


def is_connected(ws: WiredStructure) -> bool:
    """Connectivity of the graph on ports with wires plus principal-to-aux edges."""
    pt = ws.ported
    if not pt.ports:
        return True
    adj: Dict[str, Set[str]] = {p: set() for p in pt.ports}
    for p, q in ws.wires:
        adj[p].add(q)
        adj[q].add(p)
    for l in pt.cells:
        pri = pt.principal[l]
        for a in pt.aux_ports(l):
            adj[pri].add(a)
            adj[a].add(pri)
    start = pt.ports[0]
    seen = {start}
    stack = [start]
    while stack:
        for q in adj[stack.pop()]:
            if q not in seen:
                seen.add(q)
                stack.append(q)
    return len(seen) == len(pt.ports)
