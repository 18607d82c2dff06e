"""Built-in structures used by the test suite and handy on the CLI.

``fig1`` is the contracted dereliction/box example (each branch a par cell
closed by its own axiom, the box also holding a one cell); ``psi2`` is the
two-door box over a tensor; ``one`` and ``axpair`` are the minimal units.
"""

from __future__ import annotations

from typing import Dict, Tuple

from .boxes import ProofStructure, make_proof_structure
from .structure import (BANG, BOT, ONE, PAR, TENSOR, WHY, CellType,
                        PortedStructure, WiredStructure)

Fixture = Tuple[ProofStructure, Dict[str, int]]


def _ws(cells, attach, principal, left, doors, wires) -> WiredStructure:
    pt = PortedStructure({l: CellType(k, a) for l, (k, a) in cells.items()},
                         sorted({p for ps in attach.values() for p in ps} |
                                {p for w in wires for p in w}),
                         attach, principal, left, doors)
    return WiredStructure(pt, wires)


def one() -> Fixture:
    ws = _ws(cells={"u": (ONE, 0)}, attach={"u": ["c1"]},
             principal={"u": "c1"}, left={}, doors={}, wires=[])
    return make_proof_structure(ws, {}), {"c1": 1}


def axpair() -> Fixture:
    pt = PortedStructure({}, ["ax1", "ax2"], {}, {}, {}, {})
    ws = WiredStructure(pt, [("ax1", "ax2")])
    return make_proof_structure(ws, {}), {"ax1": 1, "ax2": 2}


def psi2() -> Fixture:
    """Two-door box over a tensor: why(p1,p2 at count 1) and bang conclusions;
    the tensor's left premise meets p2 by an axiom, its right premise p1."""
    ws = _ws(
        cells={"w": (WHY, 2), "v": (BANG, 1), "t": (TENSOR, 2)},
        attach={"w": ["c1", "p1", "p2"], "v": ["c2", "q"], "t": ["tp", "lt", "rt"]},
        principal={"w": "c1", "v": "c2", "t": "tp"},
        left={"t": "lt"},
        doors={"p1": 1, "p2": 1},
        wires=[("tp", "q"), ("lt", "p2"), ("rt", "p1")],
    )
    return make_proof_structure(ws, {"v": frozenset({"p1", "p2"})}), {"c1": 1, "c2": 2}


def fig1() -> Fixture:
    """Contraction of a dereliction branch with a one-door box: both branches
    are par cells closed by their own axioms; the box also holds a one cell."""
    ws = _ws(
        cells={"w": (WHY, 2), "v": (BANG, 1), "u": (ONE, 0),
               "w1": (PAR, 2), "w2": (PAR, 2)},
        attach={"w": ["c1", "p1", "p2"], "v": ["c2", "q"], "u": ["qp"],
                "w1": ["pp1", "y1l", "y1r"], "w2": ["pp2", "y2l", "y2r"]},
        principal={"w": "c1", "v": "c2", "u": "qp", "w1": "pp1", "w2": "pp2"},
        left={"w1": "y1l", "w2": "y2l"},
        doors={"p1": 0, "p2": 1},
        wires=[("p1", "pp1"), ("p2", "pp2"), ("q", "qp"),
               ("y1l", "y1r"), ("y2l", "y2r")],
    )
    return make_proof_structure(ws, {"v": frozenset({"p2"})}), {"c1": 1, "c2": 2}


def box1() -> Fixture:
    """The box of fig1's bang, as extraction produces it: a fresh dereliction
    under the door, the par with its axiom above, and the one cell."""
    ws = _ws(
        cells={"p2_d": (WHY, 1), "u": (ONE, 0), "w2": (PAR, 2)},
        attach={"p2_d": ["p2_dp", "p2"], "u": ["qp"], "w2": ["pp2", "y2l", "y2r"]},
        principal={"p2_d": "p2_dp", "u": "qp", "w2": "pp2"},
        left={"w2": "y2l"},
        doors={"p2": 0},
        wires=[("p2", "pp2"), ("y2l", "y2r")],
    )
    return make_proof_structure(ws, {}), {"p2_dp": 1, "qp": 2}


def two_boxes_pair() -> Tuple[Fixture, Fixture]:
    """Two proof structures with the same linear structure but swapped box
    assignments: two bang/one columns and two why/bot door columns."""
    def build(assign):
        ws = _ws(
            cells={"v1": (BANG, 1), "u1": (ONE, 0), "v2": (BANG, 1), "u2": (ONE, 0),
                   "w1": (WHY, 1), "b1": (BOT, 0), "w2": (WHY, 1), "b2": (BOT, 0)},
            attach={"v1": ["cv1", "q1"], "u1": ["m1"], "v2": ["cv2", "q2"],
                    "u2": ["m2"], "w1": ["cw1", "d1"], "b1": ["e1"],
                    "w2": ["cw2", "d2"], "b2": ["e2"]},
            principal={"v1": "cv1", "u1": "m1", "v2": "cv2", "u2": "m2",
                       "w1": "cw1", "b1": "e1", "w2": "cw2", "b2": "e2"},
            left={},
            doors={"d1": 1, "d2": 1},
            wires=[("q1", "m1"), ("q2", "m2"), ("d1", "e1"), ("d2", "e2")],
        )
        ind = {"cv1": 1, "cv2": 2, "cw1": 3, "cw2": 4}
        return make_proof_structure(ws, assign), ind

    straight = build({"v1": frozenset({"d1"}), "v2": frozenset({"d2"})})
    crossed = build({"v1": frozenset({"d2"}), "v2": frozenset({"d1"})})
    return straight, crossed


FIXTURES = {"one": one, "axpair": axpair, "psi2": psi2, "fig1": fig1, "box1": box1}


def load_fixture(name: str) -> Fixture:
    try:
        return FIXTURES[name]()
    except KeyError:
        raise KeyError(f"unknown fixture {name!r}; have {sorted(FIXTURES)}") from None
