"""Semantic separation: from result isomorphisms to structure isomorphisms.

``separate`` builds the canonical injective atomic k-experiments of two
indexed proof structures (k above both max why-arities) and compares their
results.  No renaming between the results means the underlying linear
structures differ.  When a renaming exists, ``key_match`` reconstructs a full
experiment isomorphism by induction on the measure, peeling terminal
material case by case; its witness is validated independently before being
reported.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Dict, FrozenSet, Iterable, List, Mapping, Optional, Sequence, Set, Tuple, Union

from .boxes import InvalidProofStructure, ProofStructure, recover_boxes
from .experiments import (ExperimentError, KExperiment, canonical_injective_atomic,
                          eval_k_experiment, reduce_exp, strip_layer_exp)
from .isomorphism import ExpIso, StructIso, check_exp_iso, check_struct_iso, result_iso
from .structure import (BANG, BOT, CLASS_AX, CLASS_BANGUNIT, CLASS_CBOX,
                        CLASS_CONTR, CLASS_CONTRUNIT, CLASS_DER, CLASS_EMPTY,
                        CLASS_MULT, CLASS_UNIT, CLASS_WEAK, MULT_KINDS, ONE, WHY,
                        CellType, StructureError, WiredStructure, _rebuild,
                        check_indexing, classify, contractions, derelictions,
                        door_contractions, is_connected, measure, omega_close,
                        remove_terminal, weakenings)
from .values import (Atom, Bag, Multiset, PartialInjection, ResultTuple, Value,
                     apply_pinj, atoms_of, value_key)


class SeparationError(Exception):
    pass


@dataclass(frozen=True)
class FailureTrace:
    case: str
    detail: str


@dataclass(frozen=True)
class SeparationVerdict:
    outcome: str                      # "same_lps" | "different_lps"
    k: int
    witness: Optional[ExpIso] = None
    trace: Optional[FailureTrace] = None
    ps_iso: Optional[StructIso] = None
    note: str = ""

    @property
    def same(self) -> bool:
        return self.outcome == "same_lps"


# ---------------------------------------------------------------------------
# Splitting machinery
# ---------------------------------------------------------------------------

def q_split(r: ResultTuple, a: Multiset) -> Tuple[Multiset, ...]:
    """Partition ``a`` by interchangeability of its elements relative to ``r``:
    two elements fall together when a renaming fixes ``r`` and swaps them."""
    sup = list(a.support())
    n = len(sup)
    parent = list(range(n))

    def find(i: int) -> int:
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for i, j in itertools.combinations(range(n), 2):
        if find(i) == find(j):
            continue
        if result_iso(tuple(r) + (sup[i],), tuple(r) + (sup[j],)) is not None:
            parent[find(i)] = find(j)
    groups: Dict[int, List[Value]] = {}
    for i, v in enumerate(sup):
        groups.setdefault(find(i), []).append(v)
    classes = [a.restrict(lambda v, g=g: v in set(g)) for g in groups.values()]
    return tuple(sorted(classes, key=lambda ms: tuple(
        (value_key(v), c) for v, c in ms.pairs())))


def bridges(values: Iterable[Value]) -> FrozenSet[FrozenSet[Value]]:
    """Connected components of a set of atom-bearing values under shared atoms."""
    vals = sorted(set(values), key=value_key)
    for v in vals:
        if not atoms_of(v):
            raise SeparationError("bridge splitting needs atom-bearing values")
    parent = list(range(len(vals)))

    def find(i: int) -> int:
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    owner: Dict[Atom, int] = {}
    for i, v in enumerate(vals):
        for atom in atoms_of(v):
            if atom in owner:
                parent[find(i)] = find(owner[atom])
            else:
                owner[atom] = i
    groups: Dict[int, Set[Value]] = {}
    for i, v in enumerate(vals):
        groups.setdefault(find(i), set()).add(v)
    return frozenset(frozenset(g) for g in groups.values())


def bridge_split(columns: Sequence[Multiset]) -> FrozenSet[Tuple[Multiset, ...]]:
    """Split a tuple of multisets along the bridge components of their union."""
    union = Multiset(())
    for c in columns:
        union = union + c
    comps = bridges(union.support())
    out = set()
    for comp in comps:
        out.add(tuple(c.restrict(lambda v: v in comp) for c in columns))
    return frozenset(out)


def r_quotient(frak: Iterable[Tuple[Multiset, ...]]
               ) -> FrozenSet[FrozenSet[Tuple[Multiset, ...]]]:
    """Group tuples of multisets by isomorphism under atom renaming."""
    from .isomorphism import tuple_multiset_iso
    items = sorted(set(frak), key=lambda t: tuple(
        tuple((value_key(v), n) for v, n in ms.pairs()) for ms in t))
    classes: List[List[Tuple[Multiset, ...]]] = []
    for t in items:
        for cls in classes:
            if tuple_multiset_iso(cls[0], t) is not None:
                cls.append(t)
                break
        else:
            classes.append([t])
    return frozenset(frozenset(cls) for cls in classes)


# ---------------------------------------------------------------------------
# Structure surgery used by the induction cases
# ---------------------------------------------------------------------------

def _drop_isolated_axiom(ws: WiredStructure, ind: Mapping[str, int],
                         p0: str, q0: str) -> Tuple[WiredStructure, Dict[str, int]]:
    pt = ws.ported
    ports = [p for p in pt.ports if p not in (p0, q0)]
    wires = [w for w in ws.wires if p0 not in w and q0 not in w]
    ws1 = _rebuild(pt.cells, ports, pt.ports_of, pt.principal, pt.left,
                   pt.door_count, wires)
    m0, big = sorted((ind[p0], ind[q0]))
    ind1 = {}
    for c, i in ind.items():
        if c in (p0, q0):
            continue
        ind1[c] = i if i < m0 else (i - 1 if i < big else i - 2)
    check_indexing(ws1, ind1)
    return ws1, ind1


def _branch_conclusion(ws: WiredStructure, ws1: WiredStructure, aux: str) -> str:
    """After detaching ``aux``, the surviving conclusion of its branch."""
    if aux in set(ws1.ported.ports):
        return aux
    mate = ws.partner(aux)
    if mate is None or mate not in set(ws1.ported.ports):
        raise SeparationError(f"branch of {aux} lost its conclusion")
    return mate


def _peel_terminal(ws: WiredStructure, ind: Mapping[str, int], l: str,
                   branches: Sequence[str]) -> Tuple[WiredStructure, Dict[str, int]]:
    pt = ws.ported
    i0 = ind[pt.principal[l]]
    n = len(ind)
    ws1 = remove_terminal(ws, [l])
    ind1: Dict[str, int] = {}
    for c, i in ind.items():
        if c == pt.principal[l]:
            continue
        ind1[c] = i if i < i0 else i - 1
    for j, aux in enumerate(branches):
        ind1[_branch_conclusion(ws, ws1, aux)] = n + j
    check_indexing(ws1, ind1)
    return ws1, ind1


def _detach_contraction(ws: WiredStructure, ind: Mapping[str, int], l: str,
                        p: str) -> Tuple[WiredStructure, Dict[str, int]]:
    pt = ws.ported
    n = len(ind)
    cells = dict(pt.cells)
    cells[l] = CellType(WHY, pt.arity(l) - 1)
    ports_of = dict(pt.ports_of)
    ports_of[l] = pt.ports_of[l] - {p}
    door_count = {q: m for q, m in pt.door_count.items() if q != p}
    ws1 = _rebuild(cells, pt.ports, ports_of, pt.principal, pt.left,
                   door_count, ws.wires)
    ws1, _ = omega_close(ws1)
    ind1 = dict(ind)
    ind1[_branch_conclusion(ws, ws1, p)] = n + 1
    check_indexing(ws1, ind1)
    return ws1, ind1


def _restricted_axiom_labels(parent: KExperiment, ws1: WiredStructure) -> Dict[str, Value]:
    return {w[0]: parent.labels[w[0]] for w in ws1.axioms()}


def _reeval(parent: KExperiment, ws1: WiredStructure,
            ind1: Mapping[str, int]) -> KExperiment:
    return eval_k_experiment(ws1, ind1, _restricted_axiom_labels(parent, ws1), parent.k)


# ---------------------------------------------------------------------------
# The matching recursion
# ---------------------------------------------------------------------------

class _KeyMatcher:
    def __init__(self):
        self._fresh_n = 0
        self._riso_cache: Dict[Tuple[ResultTuple, ResultTuple],
                               Optional[PartialInjection]] = {}

    def fresh_atom(self) -> Atom:
        self._fresh_n += 1
        return Atom(f"w{self._fresh_n}")

    def _riso(self, r: ResultTuple, r2: ResultTuple) -> Optional[PartialInjection]:
        key = (tuple(r), tuple(r2))
        if key not in self._riso_cache:
            self._riso_cache[key] = result_iso(r, r2)
        return self._riso_cache[key]

    # -- case lifts ---------------------------------------------------------

    def match(self, eA: KExperiment, eB: KExperiment) -> Union[ExpIso, FailureTrace]:
        if self._riso(eA.result, eB.result) is None:
            return FailureTrace("result", "no renaming between the result tuples")
        clsA, clsB = classify(eA.structure), classify(eB.structure)
        if clsA != clsB:
            return FailureTrace(clsA, f"terminal shapes differ: {clsA} vs {clsB}")
        handler = {
            CLASS_EMPTY: self._case_empty,
            CLASS_AX: self._case_ax,
            CLASS_MULT: self._case_peel,
            CLASS_UNIT: self._case_peel,
            CLASS_WEAK: self._case_peel,
            CLASS_DER: self._case_peel,
            CLASS_CONTR: self._case_contr,
            CLASS_CONTRUNIT: self._case_contrunit,
            CLASS_BANGUNIT: self._case_bangunit,
            CLASS_CBOX: self._case_cbox,
        }[clsA]
        return handler(clsA, eA, eB)

    def _case_empty(self, cls: str, eA: KExperiment, eB: KExperiment):
        if eA.result != eB.result:
            return FailureTrace(cls, "wireless structures with different results")
        ptA, ptB = eA.structure.ported, eB.structure.ported
        byA = {i: p for p, i in eA.ind.items()}
        byB = {i: p for p, i in eB.ind.items()}
        cmap, pmap = {}, {}
        for i in sorted(byA):
            pa, pb = byA[i], byB[i]
            la, lb = ptA.cell_of(pa), ptB.cell_of(pb)
            if la is None or lb is None or ptA.kind(la) != ptB.kind(lb):
                return FailureTrace(cls, f"conclusion {i} cells disagree")
            cmap[la] = lb
            pmap[pa] = pb
        empty = PartialInjection()
        return ExpIso(StructIso(cmap, pmap), empty, empty)

    def _case_ax(self, cls: str, eA: KExperiment, eB: KExperiment):
        def pick(e: KExperiment) -> Tuple[str, str]:
            best = None
            for p, q in e.structure.isolated_axioms():
                if e.ind[p] > e.ind[q]:
                    p, q = q, p
                key = (e.ind[p], e.ind[q])
                if best is None or key < best[0]:
                    best = (key, (p, q))
            return best[1]

        pA, qA = pick(eA)
        i0, j0 = eA.ind[pA], eA.ind[qA]
        byB = {i: p for p, i in eB.ind.items()}
        pB, qB = byB[i0], byB[j0]
        wire = (min(pB, qB), max(pB, qB))
        if wire not in set(eB.structure.isolated_axioms()):
            return FailureTrace(cls, f"conclusions {i0},{j0} are not an isolated axiom")
        wsA1, indA1 = _drop_isolated_axiom(eA.structure, eA.ind, pA, qA)
        wsB1, indB1 = _drop_isolated_axiom(eB.structure, eB.ind, pB, qB)
        sub = self.match(_reeval(eA, wsA1, indA1), _reeval(eB, wsB1, indB1))
        if isinstance(sub, FailureTrace):
            return sub
        fresh = self.fresh_atom()
        pmap = dict(sub.struct_iso.port_map)
        pmap[pA], pmap[qA] = pB, qB
        rho = sub.rho.extended({eA.labels[pA]: fresh})
        rho2 = sub.rho_prime.extended({eB.labels[pB]: fresh})
        return ExpIso(StructIso(sub.struct_iso.cell_map, pmap), rho, rho2)

    def _case_peel(self, cls: str, eA: KExperiment, eB: KExperiment):
        wsA, wsB = eA.structure, eB.structure
        ptA, ptB = wsA.ported, wsB.ported

        def members(e: KExperiment) -> Set[str]:
            ws = e.structure
            term = set(ws.terminal_cells())
            if cls == CLASS_MULT:
                return {l for l in term if ws.ported.kind(l) in MULT_KINDS}
            if cls == CLASS_UNIT:
                return {l for l in term if ws.ported.kind(l) in (ONE, BOT)}
            if cls == CLASS_WEAK:
                return term & set(weakenings(ws))
            return term & set(derelictions(ws))

        lA = min(members(eA), key=lambda l: eA.ind[ptA.principal[l]])
        i0 = eA.ind[ptA.principal[lA]]
        byB = {i: p for p, i in eB.ind.items()}
        lB = ptB.cell_of(byB[i0])
        if lB is None or lB not in members(eB) or ptA.kind(lA) != ptB.kind(lB):
            return FailureTrace(cls, f"conclusion {i0} cells disagree")

        def branch_ports(pt, ws, l) -> List[str]:
            if pt.kind(l) in MULT_KINDS:
                return [pt.left[l], pt.right(l)]
            if pt.kind(l) == WHY and pt.arity(l) == 1:
                return sorted(pt.aux_ports(l))
            return []

        brA = branch_ports(ptA, wsA, lA)
        brB = branch_ports(ptB, wsB, lB)
        wsA1, indA1 = _peel_terminal(wsA, eA.ind, lA, brA)
        wsB1, indB1 = _peel_terminal(wsB, eB.ind, lB, brB)
        sub = self.match(_reeval(eA, wsA1, indA1), _reeval(eB, wsB1, indB1))
        if isinstance(sub, FailureTrace):
            return sub
        cmap = dict(sub.struct_iso.cell_map)
        pmap = dict(sub.struct_iso.port_map)
        cmap[lA] = lB
        pmap[ptA.principal[lA]] = ptB.principal[lB]
        portsA1 = set(wsA1.ported.ports)
        for a, b in zip(brA, brB):
            if a not in portsA1:
                pmap[a] = b
        return ExpIso(StructIso(cmap, pmap), sub.rho, sub.rho_prime)

    def _case_contr(self, cls: str, eA: KExperiment, eB: KExperiment):
        wsA, wsB = eA.structure, eB.structure
        ptA, ptB = wsA.ported, wsB.ported
        term_contr = set(contractions(wsA)) & set(wsA.terminal_cells())
        lA = min(term_contr, key=lambda l: eA.ind[ptA.principal[l]])
        i0 = eA.ind[ptA.principal[lA]]
        byB = {i: p for p, i in eB.ind.items()}
        lB = ptB.cell_of(byB[i0])
        if lB is None or ptB.kind(lB) != WHY or lB not in set(wsB.terminal_cells()):
            return FailureTrace(cls, f"conclusion {i0} is not a terminal why cell")
        p = min(q for q in ptA.aux_ports(lA) if ptA.door_count[q] == 0)
        beta = eA.labels[p]
        candidates = sorted(q for q in ptB.aux_ports(lB) if ptB.door_count[q] == 0)
        last: Union[ExpIso, FailureTrace, None] = None
        for p2 in candidates:
            beta2 = eB.labels[p2]
            if result_iso(tuple(eA.result) + (beta,),
                          tuple(eB.result) + (beta2,)) is None:
                continue
            wsA1, indA1 = _detach_contraction(wsA, eA.ind, lA, p)
            wsB1, indB1 = _detach_contraction(wsB, eB.ind, lB, p2)
            sub = self.match(_reeval(eA, wsA1, indA1), _reeval(eB, wsB1, indB1))
            if isinstance(sub, FailureTrace):
                last = sub
                continue
            pmap = dict(sub.struct_iso.port_map)
            if p not in set(wsA1.ported.ports):
                pmap[p] = p2
            return ExpIso(StructIso(sub.struct_iso.cell_map, pmap),
                          sub.rho, sub.rho_prime)
        return last if isinstance(last, FailureTrace) else \
            FailureTrace(cls, f"no matching doorless premise under conclusion {i0}")

    def _pick_indexed_cell(self, e: KExperiment, wanted: Iterable[str]) -> Tuple[str, int]:
        pt = e.structure.ported
        l = min(wanted, key=lambda c: e.ind[pt.principal[c]])
        return l, e.ind[pt.principal[l]]

    def _case_contrunit(self, cls: str, eA: KExperiment, eB: KExperiment):
        wsA, wsB = eA.structure, eB.structure
        ptA, ptB = wsA.ported, wsB.ported
        hooks = [l for l in set(door_contractions(wsA)) & set(wsA.terminal_cells())
                 if any(not wsA.has_axiom_above(q) for q in ptA.aux_ports(l))]
        lA, i0 = self._pick_indexed_cell(eA, hooks)
        byB = {i: p for p, i in eB.ind.items()}
        lB = ptB.cell_of(byB[i0])
        if lB is None or lB not in set(door_contractions(wsB)) or \
                lB not in set(wsB.terminal_cells()):
            return FailureTrace(cls, f"conclusion {i0} is not an all-door why cell")
        try:
            subA = reduce_exp(eA, lA)
            subB = reduce_exp(eB, lB)
        except ExperimentError as exc:
            return FailureTrace(cls, str(exc))
        sub = self.match(subA, subB)
        if isinstance(sub, FailureTrace):
            return sub
        return ExpIso(sub.struct_iso, sub.rho, sub.rho_prime)

    def _case_bangunit(self, cls: str, eA: KExperiment, eB: KExperiment):
        wsA, wsB = eA.structure, eB.structure
        ptA, ptB = wsA.ported, wsB.ported
        hooks = [l for l in set(wsA.terminal_cells()) if ptA.kind(l) == BANG
                 and all(not wsA.has_axiom_above(q) for q in ptA.aux_ports(l))]
        lA, i0 = self._pick_indexed_cell(eA, hooks)
        byB = {i: p for p, i in eB.ind.items()}
        lB = ptB.cell_of(byB[i0])
        if lB is None or ptB.kind(lB) != BANG or lB not in set(wsB.terminal_cells()):
            return FailureTrace(cls, f"conclusion {i0} is not a terminal bang")
        try:
            subA = reduce_exp(eA, lA)
            subB = reduce_exp(eB, lB)
        except ExperimentError as exc:
            return FailureTrace(cls, str(exc))
        sub = self.match(subA, subB)
        if isinstance(sub, FailureTrace):
            return sub
        cmap = dict(sub.struct_iso.cell_map)
        pmap = dict(sub.struct_iso.port_map)
        cmap[lA] = lB
        pmap[ptA.principal[lA]] = ptB.principal[lB]
        (qA,), (qB,) = ptA.aux_ports(lA), ptB.aux_ports(lB)
        pmap[qA] = qB
        return ExpIso(StructIso(cmap, pmap), sub.rho, sub.rho_prime)

    def _case_cbox(self, cls: str, eA: KExperiment, eB: KExperiment):
        wsA, wsB = eA.structure, eB.structure
        ptA, ptB = wsA.ported, wsB.ported
        try:
            barA = strip_layer_exp(eA)
            barB = strip_layer_exp(eB)
        except (StructureError, ExperimentError) as exc:
            return FailureTrace(cls, str(exc))
        sub = self.match(barA, barB)
        if isinstance(sub, FailureTrace):
            return sub

        k = eA.k
        cmap = dict(sub.struct_iso.cell_map)
        pmap = dict(sub.struct_iso.port_map)
        byB = {i: p for p, i in eB.ind.items()}
        for lA in sorted(set(wsA.terminal_cells())):
            if ptA.kind(lA) != BANG:
                continue
            i0 = eA.ind[ptA.principal[lA]]
            lB = ptB.cell_of(byB[i0])
            if lB is None or ptB.kind(lB) != BANG:
                return FailureTrace(cls, f"conclusion {i0} is not a bang on both sides")
            cmap[lA] = lB
            pmap[ptA.principal[lA]] = ptB.principal[lB]
            (qA,), (qB,) = ptA.aux_ports(lA), ptB.aux_ports(lB)
            if qA not in pmap:
                pmap[qA] = qB

        # Conclusion atoms gain one more copy index on re-boxing; send the
        # indexed families to fresh plain atoms, consistently on both sides.
        inner_atoms_A = atoms_of(tuple(barA.labels[p] for p in sorted(barA.labels)))
        inner_atoms_B = atoms_of(tuple(barB.labels[p] for p in sorted(barB.labels)))
        seedA = sorted(atoms_of(barA.result), key=value_key)
        inv_rho2 = {b: a for a, b in sub.rho_prime.mapping().items()}
        extA: Dict[Atom, Atom] = {}
        extB: Dict[Atom, Atom] = {}
        for d0 in seedA:
            alpha = inv_rho2.get(sub.rho[d0])
            if alpha is None:
                return FailureTrace(cls, "renamings do not pair the conclusion atoms")
            fresh = self.fresh_atom()
            for j in range(1, k + 1):
                a_j = Atom(d0.name, d0.loc + (j,))
                b_j = Atom(alpha.name, alpha.loc + (j,))
                if a_j in inner_atoms_A or b_j in inner_atoms_B:
                    return FailureTrace(cls, "copy-indexed atom already used inside")
                target = Atom(fresh.name, (j,))
                extA[a_j] = target
                extB[b_j] = target
        rho = sub.rho.extended(extA)
        rho2 = sub.rho_prime.extended(extB)
        return ExpIso(StructIso(cmap, pmap), rho, rho2)


def key_match(eA: KExperiment, eB: KExperiment) -> Union[ExpIso, FailureTrace]:
    """Turn a result renaming into a validated experiment isomorphism, or
    report the first induction case with no viable candidate."""
    if eA.k != eB.k:
        raise SeparationError("experiments use different k")
    k = eA.k
    if k <= measure(eA.structure).cosize or k <= measure(eB.structure).cosize:
        raise SeparationError("k must exceed the max why-arity of both sides")
    for e in (eA, eB):
        if not (e.atomic and e.injective):
            raise SeparationError("key matching needs atomic injective experiments")
    out = _KeyMatcher().match(eA, eB)
    if isinstance(out, ExpIso):
        errs = check_exp_iso(eA, eB, out)
        if errs:
            raise SeparationError(f"internal witness validation failed: {errs}")
    return out


# ---------------------------------------------------------------------------
# Verdicts
# ---------------------------------------------------------------------------

def separate(psA: ProofStructure, indA: Mapping[str, int],
             psB: ProofStructure, indB: Mapping[str, int]) -> SeparationVerdict:
    """Same-linear-structure verdict from canonical injective experiments."""
    check_indexing(psA.lps, indA)
    check_indexing(psB.lps, indB)
    k = max(measure(psA.lps).cosize, measure(psB.lps).cosize, 1) + 1
    eA = canonical_injective_atomic(psA.lps, indA, k)
    eB = canonical_injective_atomic(psB.lps, indB, k)
    out = key_match(eA, eB)
    if isinstance(out, FailureTrace):
        return SeparationVerdict("different_lps", k, trace=out)
    return SeparationVerdict("same_lps", k, witness=out)


def separate_connected(psA: ProofStructure, indA: Mapping[str, int],
                       psB: ProofStructure, indB: Mapping[str, int]) -> SeparationVerdict:
    """Full proof-structure verdict for connected inputs: on a same-linear
    verdict the unique box assignments are recovered and transported."""
    verdict = separate(psA, indA, psB, indB)
    if not verdict.same:
        return verdict
    if not is_connected(psA.lps):
        return SeparationVerdict(verdict.outcome, verdict.k, witness=verdict.witness,
                                 note="disconnected input: verdict covers the "
                                      "linear structure only")
    recA = recover_boxes(psA.lps)
    recB = recover_boxes(psB.lps)
    iso = verdict.witness.struct_iso
    errs = check_struct_iso(psA.lps, indA, psB.lps, indB, iso,
                            recA.box_of, recB.box_of)
    if errs:
        return SeparationVerdict(verdict.outcome, verdict.k, witness=verdict.witness,
                                 note=f"box transport failed: {errs[0]}")
    return SeparationVerdict(verdict.outcome, verdict.k, witness=verdict.witness,
                             ps_iso=iso,
                             note="full proof-structure isomorphism established")
