"""Canonical text formats: structure files, experiment descriptions, verdicts.

Structure files are JSON with sorted keys and id-sorted arrays; serializing a
parsed file reproduces it byte for byte once it is canonical.
"""

from __future__ import annotations

import json
import re
from typing import Dict, FrozenSet, List, Mapping, Optional, Tuple

from .isomorphism import ExpIso, StructIso
from .separation import SeparationVerdict
from .structure import CellType, PortedStructure, StructureError, WiredStructure
from .values import (PartialInjection, Value, ValueError_, format_value,
                     parse_value, value_key)

_ID = re.compile(r"^[A-Za-z0-9_]+$")


class ParseError(Exception):
    pass


def _check_id(name: str, what: str) -> str:
    if not isinstance(name, str) or not _ID.match(name):
        raise ParseError(f"bad {what} id {name!r}: expected [A-Za-z0-9_]+")
    return name


def structure_to_obj(ws: WiredStructure,
                     box_of: Optional[Mapping[str, FrozenSet[str]]] = None,
                     ind: Optional[Mapping[str, int]] = None) -> dict:
    pt = ws.ported
    obj = {
        "cells": [{"id": l, "type": pt.kind(l), "arity": pt.arity(l)}
                  for l in sorted(pt.cells)],
        "ports": list(pt.ports),
        "attach": {l: sorted(pt.ports_of[l]) for l in sorted(pt.cells)},
        "principal": {l: pt.principal[l] for l in sorted(pt.cells)},
        "left": {l: p for l, p in sorted(pt.left.items())},
        "doors": {p: n for p, n in sorted(pt.door_count.items())},
        "wires": [list(w) for w in ws.wires],
    }
    if box_of is not None:
        obj["boxes"] = {v: sorted(ps) for v, ps in sorted(box_of.items())}
    if ind is not None:
        obj["ind"] = {p: i for p, i in sorted(ind.items())}
    return obj


def serialize_structure(ws: WiredStructure,
                        box_of: Optional[Mapping[str, FrozenSet[str]]] = None,
                        ind: Optional[Mapping[str, int]] = None) -> str:
    obj = structure_to_obj(ws, box_of, ind)
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), ensure_ascii=False) + "\n"


def parse_structure_obj(obj) -> Tuple[WiredStructure,
                                      Optional[Dict[str, FrozenSet[str]]],
                                      Optional[Dict[str, int]]]:
    if not isinstance(obj, dict):
        raise ParseError("structure file must hold a JSON object")
    try:
        cells: Dict[str, CellType] = {}
        for entry in obj.get("cells", []):
            cid = _check_id(entry["id"], "cell")
            if cid in cells:
                raise ParseError(f"duplicate cell id {cid}")
            cells[cid] = CellType(entry["type"], int(entry["arity"]))
        ports = [_check_id(p, "port") for p in obj.get("ports", [])]
        attach = {_check_id(l, "cell"): [str(p) for p in ps]
                  for l, ps in obj.get("attach", {}).items()}
        principal = {str(l): str(p) for l, p in obj.get("principal", {}).items()}
        left = {str(l): str(p) for l, p in obj.get("left", {}).items()}
        doors = {str(p): int(n) for p, n in obj.get("doors", {}).items()}
        wires = []
        for w in obj.get("wires", []):
            if not (isinstance(w, list) and len(w) == 2):
                raise ParseError(f"bad wire entry {w!r}")
            wires.append((str(w[0]), str(w[1])))
        pt = PortedStructure(cells, ports, attach, principal, left, doors)
        ws = WiredStructure(pt, wires)
    except (KeyError, TypeError, ValueError) as exc:
        raise ParseError(f"malformed structure file: {exc}") from exc
    except StructureError as exc:
        raise ParseError(f"structure validation error: {exc}") from exc

    box_of = None
    if "boxes" in obj:
        box_of = {}
        for v, ps in obj["boxes"].items():
            box_of[str(v)] = frozenset(str(p) for p in ps)
    ind = None
    if "ind" in obj:
        ind = {str(p): int(i) for p, i in obj["ind"].items()}
    return ws, box_of, ind


def parse_structure(text: str):
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"invalid JSON: {exc}") from exc
    return parse_structure_obj(obj)


# ---------------------------------------------------------------------------
# Experiment descriptions
# ---------------------------------------------------------------------------

def parse_experiment_desc(obj) -> dict:
    """File shape: {"axiom_labels": {port: value-text},
    "boxes": {bang: [[desc, ...]]}} with one copy-multiset per bang."""
    if not isinstance(obj, dict):
        raise ParseError("experiment description must be a JSON object")
    out = {"axiom_labels": {}, "boxes": {}}
    try:
        for p, text in obj.get("axiom_labels", {}).items():
            out["axiom_labels"][str(p)] = parse_value(str(text))
    except ValueError_ as exc:
        raise ParseError(str(exc)) from exc
    for v, outer in obj.get("boxes", {}).items():
        if not isinstance(outer, list) or len(outer) != 1 or \
                not isinstance(outer[0], list):
            raise ParseError(f"box {v} must carry exactly one list of copies")
        out["boxes"][str(v)] = [parse_experiment_desc(d) for d in outer[0]]
    return out


def parse_experiment_text(text: str) -> dict:
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"invalid JSON: {exc}") from exc
    return parse_experiment_desc(obj)


# ---------------------------------------------------------------------------
# Witness and verdict reports
# ---------------------------------------------------------------------------

def pinj_table(rho: PartialInjection) -> List[str]:
    return [f"{format_value(a)} -> {format_value(b)}"
            for a, b in sorted(rho.mapping().items(), key=lambda it: value_key(it[0]))]


def struct_iso_tables(iso: StructIso) -> dict:
    return {
        "cells": {l: iso.cell_map[l] for l in sorted(iso.cell_map)},
        "ports": {p: iso.port_map[p] for p in sorted(iso.port_map)},
    }


def exp_iso_obj(w: ExpIso) -> dict:
    return {
        "structure": struct_iso_tables(w.struct_iso),
        "atoms": pinj_table(w.rho),
        "atoms_prime": pinj_table(w.rho_prime),
    }


def verdict_to_obj(v: SeparationVerdict) -> dict:
    obj = {"outcome": v.outcome, "k": v.k}
    if v.witness is not None:
        obj["witness"] = exp_iso_obj(v.witness)
    if v.trace is not None:
        obj["trace"] = {"case": v.trace.case, "detail": v.trace.detail}
    if v.ps_iso is not None:
        obj["ps_iso"] = struct_iso_tables(v.ps_iso)
    if v.note:
        obj["note"] = v.note
    return obj


def verdict_summary(v: SeparationVerdict) -> str:
    if v.same:
        lines = [f"same_lps (k={v.k}): the linear structures are isomorphic"]
        if v.ps_iso is not None:
            lines.append("boxes recovered: full proof-structure isomorphism")
    else:
        lines = [f"different_lps (k={v.k}): no renaming matches the canonical results"]
        if v.trace is not None:
            lines.append(f"first failing case: {v.trace.case} ({v.trace.detail})")
    if v.note:
        lines.append(v.note)
    return "\n".join(lines)
