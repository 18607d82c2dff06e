"""Proof structures: a linear proof structure plus the box assignment.

The box assignment sends every bang cell to the set of auxiliary doors of its
box; door counts must tally the number of boxes each door closes, the port
closures of the boxes must be pairwise disjoint or nested, and every box must
recursively extract to a valid proof structure of its own.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, FrozenSet, Iterable, List, Mapping, Optional, Set, Tuple

from .structure import (BANG, LEVEL_LPS, WHY, CellType, StructureError,
                        WiredStructure, _rebuild, is_connected, remove_terminal,
                        require_level, validate)


class InvalidProofStructure(StructureError):
    """The box assignment is inconsistent with the underlying structure."""


@dataclass(frozen=True)
class ProofStructure:
    lps: WiredStructure
    box_of: Mapping[str, FrozenSet[str]]
    boxes: Mapping[str, "ProofStructure"] = field(compare=False)

    def bang_cells(self) -> Tuple[str, ...]:
        return self.lps.ported.cells_of_kind(BANG)

    def depth0_bangs(self) -> Tuple[str, ...]:
        return tuple(v for v in self.bang_cells()
                     if self.lps.depth(self.lps.ported.principal[v]) == 0)


def box_closure(ws: WiredStructure, box_of: Mapping[str, FrozenSet[str]],
                v: str) -> FrozenSet[str]:
    """All ports at or above the bang's premise and its assigned doors."""
    pt = ws.ported
    seeds = set(pt.aux_ports(v)) | set(box_of[v])
    out: Set[str] = set()
    for s in seeds:
        out |= ws.ports_above(s)
    return frozenset(out)


def _fresh_id(base: str, taken: Set[str]) -> str:
    name = base
    while name in taken:
        name += "_"
    taken.add(name)
    return name


def box_extract(ws: WiredStructure, box_of: Mapping[str, FrozenSet[str]],
                v: str) -> Tuple[WiredStructure, Dict[str, FrozenSet[str]]]:
    """Extract the box of ``v``: everything above its premise and doors, with a
    fresh unary why-cell planted under each door and ``v`` itself removed.

    Returns the box structure and the box assignment restricted to its bangs.
    """
    pt = ws.ported
    if v not in pt.cells or pt.kind(v) != BANG:
        raise InvalidProofStructure(f"{v} is not a bang cell")
    closure = box_closure(ws, box_of, v)
    doors = sorted(box_of[v])

    touching = {l for l in pt.cells if pt.ports_of[l] & closure}
    door_cells = {l for l in pt.cells if pt.ports_of[l] & set(doors)}
    kept = sorted((touching - door_cells))
    if v not in kept:
        raise InvalidProofStructure(f"bang {v} lost its own box closure")

    taken_cells = set(pt.cells)
    taken_ports = set(pt.ports)
    cells: Dict[str, CellType] = {l: pt.cells[l] for l in kept}
    ports_of = {l: pt.ports_of[l] for l in kept}
    principal = {l: pt.principal[l] for l in kept}
    left = {l: p for l, p in pt.left.items() if l in kept}
    ports = set(closure) | {pt.principal[v]}

    for d in doors:
        cid = _fresh_id(f"{d}_d", taken_cells)
        pid = _fresh_id(f"{d}_dp", taken_ports)
        cells[cid] = CellType(WHY, 1)
        ports_of[cid] = frozenset({d, pid})
        principal[cid] = pid
        ports.add(pid)

    inner_bangs = [l for l in kept if l != v and pt.kind(l) == BANG]
    door_count: Dict[str, int] = {}
    for l, ct in cells.items():
        if ct.kind != WHY:
            continue
        for p in ports_of[l] - {principal[l]}:
            door_count[p] = sum(1 for w in inner_bangs if p in box_of.get(w, frozenset()))

    wires = [w for w in ws.wires if w[0] in closure and w[1] in closure]
    shell = _rebuild(cells, sorted(ports), ports_of, principal, left, door_count, wires)
    box_ws = remove_terminal(shell, [v])
    box_b = {w: frozenset(box_of[w]) for w in inner_bangs}
    return box_ws, box_b


def make_proof_structure(ws: WiredStructure,
                         box_of: Mapping[str, Iterable[str]]) -> ProofStructure:
    """Validate the box assignment and recursively extract every box."""
    require_level(ws, LEVEL_LPS)
    pt = ws.ported
    bangs = set(pt.cells_of_kind(BANG))
    norm = {v: frozenset(ps) for v, ps in box_of.items()}
    if set(norm) != bangs:
        raise InvalidProofStructure("box assignment must cover exactly the bang cells")
    aux_doors = set(pt.aux_doors())
    for v, ps in sorted(norm.items()):
        if not ps <= aux_doors:
            raise InvalidProofStructure(f"box of {v} lists ports that are not auxiliary doors")
    for p in sorted(aux_doors):
        owners = sum(1 for v in bangs if p in norm[v])
        if owners != pt.door_count[p]:
            raise InvalidProofStructure(
                f"door {p} has count {pt.door_count[p]} but {owners} owning boxes")

    closures = {v: box_closure(ws, norm, v) for v in sorted(bangs)}
    for v in sorted(bangs):
        for w in sorted(bangs):
            if v >= w:
                continue
            a, b = closures[v], closures[w]
            if a & b and not (a <= b or b <= a):
                raise InvalidProofStructure(f"boxes of {v} and {w} overlap without nesting")

    boxes: Dict[str, ProofStructure] = {}
    for v in sorted(bangs):
        box_ws, box_b = box_extract(ws, norm, v)
        level, violations = validate(box_ws)
        if level != LEVEL_LPS:
            raise InvalidProofStructure(
                f"box of {v} is not an lps: {'; '.join(violations)}")
        boxes[v] = make_proof_structure(box_ws, box_b)
    return ProofStructure(ws, norm, boxes)


def main_branch_port(ws: WiredStructure, v: str) -> str:
    """The free port of v's box that sits over the bang's premise: the premise
    itself when it ends an axiom, its wire partner otherwise."""
    pt = ws.ported
    (q,) = pt.aux_ports(v)
    mate = ws.partner(q)
    if mate is None:
        raise StructureError(f"bang premise {q} is not wired")
    if not pt.is_principal(mate):
        return q
    return mate


def recover_boxes(ws: WiredStructure) -> ProofStructure:
    """Reconstruct the unique box assignment of a connected structure.

    A door belongs to a bang's box iff its branch crosses that bang's nesting
    level and the two are joined by a path running strictly above that level.
    """
    require_level(ws, LEVEL_LPS)
    if not is_connected(ws):
        raise InvalidProofStructure("ambiguous boxes: structure is not connected")
    pt = ws.ported
    adj: Dict[str, Set[str]] = {p: set() for p in pt.ports}
    for p, q in ws.wires:
        adj[p].add(q)
        adj[q].add(p)
    for l in pt.cells:
        pri = pt.principal[l]
        for a in pt.aux_ports(l):
            adj[pri].add(a)
            adj[a].add(pri)

    doors = set(pt.aux_doors())
    box_of: Dict[str, FrozenSet[str]] = {}
    for v in pt.cells_of_kind(BANG):
        d = ws.depth(pt.principal[v])
        seen = {pt.principal[v]}
        stack = [pt.principal[v]]
        while stack:
            cur = stack.pop()
            if cur != pt.principal[v] and ws.depth(cur) <= d:
                continue  # endpoints are not crossed
            for q in adj[cur]:
                if q not in seen:
                    seen.add(q)
                    stack.append(q)
        owned = {p for p in seen & doors
                 if ws.depth(p) - pt.door_count[p] <= d < ws.depth(p)}
        box_of[v] = frozenset(owned)
    return make_proof_structure(ws, box_of)
