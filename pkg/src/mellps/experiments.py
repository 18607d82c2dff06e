"""Experiments: relational labelings of structures and their results.

A k-experiment labels every port of a pre-linear structure with one value,
taking k indexed copies at each exponential layer; it is determined by its
axiom labels.  An experiment of a proof structure instead labels ports with
finite multisets and picks, for every depth-0 bang, one multiset of
experiments of its box.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Dict, FrozenSet, Iterable, List, Mapping, Optional, Sequence, Set, Tuple

from .boxes import ProofStructure, main_branch_port
from .structure import (BANG, BOT, LEVEL_PLPS, MULT_KINDS, ONE, PAR, TENSOR, WHY,
                        CLASS_CONTR, StructureError, WiredStructure, check_indexing,
                        contractions, reduce_isolated_indexed, require_level,
                        strip_layer_indexed)
from .values import (Atom, Bag, Multiset, NEG, POS, Pair, PartialInjection,
                     ResultTuple, Unit, Value, ValueError_, apply_pinj, atoms_of,
                     dig_multi, dig_step, format_value, orthogonal)


class ExperimentError(Exception):
    pass


@dataclass(frozen=True)
class KExperiment:
    structure: WiredStructure
    ind: Mapping[str, int]
    k: int
    labels: Mapping[str, Value]
    result: ResultTuple
    atomic: bool
    injective: bool

    def label(self, p: str) -> Value:
        return self.labels[p]


def _axiom_label_table(ws: WiredStructure,
                       axiom_labels: Mapping[str, Value]) -> Dict[str, Value]:
    """Resolve per-port axiom labels from a one-endpoint (or two) assignment."""
    table: Dict[str, Value] = {}
    axiom_ports = {p for w in ws.axioms() for p in w}
    for p in axiom_labels:
        if p not in axiom_ports:
            raise ExperimentError(f"port {p} is not an axiom port")
    for p, q in ws.axioms():
        vp, vq = axiom_labels.get(p), axiom_labels.get(q)
        if vp is None and vq is None:
            raise ExperimentError(f"axiom ({p},{q}) has no label")
        if vp is None:
            vp = orthogonal(vq)
        if vq is None:
            vq = orthogonal(vp)
        if vq != orthogonal(vp):
            raise ExperimentError(f"axiom ({p},{q}) labels are not orthogonal")
        for v in (vp, vq):
            if any(a.loc for a in atoms_of(v)):
                raise ExperimentError("axiom labels must not carry copy indices")
        table[p], table[q] = vp, vq
    return table


def eval_k_experiment(ws: WiredStructure, ind: Mapping[str, int],
                      axiom_labels: Mapping[str, Value], k: int) -> KExperiment:
    """Propagate axiom labels down to every port; unique by construction."""
    require_level(ws, LEVEL_PLPS)
    check_indexing(ws, ind)
    if k < 1:
        raise ExperimentError("k must be >= 1")
    pt = ws.ported
    labels: Dict[str, Value] = dict(_axiom_label_table(ws, axiom_labels))

    def settle_wire(p: str) -> None:
        mate = ws.partner(p)
        if mate is not None and not pt.is_principal(mate):
            labels[mate] = labels[p]

    pending = set(pt.cells)
    while pending:
        progressed = False
        for l in sorted(pending):
            aux = pt.aux_ports(l)
            if not all(p in labels for p in aux):
                continue
            kind = pt.kind(l)
            if kind == TENSOR:
                val: Value = Pair(POS, labels[pt.left[l]], labels[pt.right(l)])
            elif kind == PAR:
                val = Pair(NEG, labels[pt.left[l]], labels[pt.right(l)])
            elif kind == ONE:
                val = Unit(POS)
            elif kind == BOT:
                val = Unit(NEG)
            elif kind == BANG:
                (q,) = aux
                val = Bag(POS, dig_multi(k, 1, Multiset([labels[q]])))
            else:  # why
                total = Multiset(())
                for p in sorted(aux):
                    total = total + dig_multi(k, pt.door_count[p], Multiset([labels[p]]))
                val = Bag(NEG, total)
            labels[pt.principal[l]] = val
            settle_wire(pt.principal[l])
            pending.discard(l)
            progressed = True
        if not progressed:
            raise ExperimentError(f"label propagation stuck at cells {sorted(pending)}")

    missing = [p for p in pt.ports if p not in labels]
    if missing:
        raise ExperimentError(f"ports never labeled: {missing}")
    result = tuple(labels[p] for p, _ in sorted(ind.items(), key=lambda it: it[1]))
    ax_labels = [labels[p] for w in ws.axioms() for p in w]
    atomic = all(isinstance(v, Atom) and v.plain for v in ax_labels)
    ax_atom_sets = [atoms_of(labels[w[0]]) for w in ws.axioms()]
    injective = all(not (a & b) for a, b in itertools.combinations(ax_atom_sets, 2))
    return KExperiment(ws, dict(ind), k, labels, result, atomic, injective)


def canonical_injective_atomic(ws: WiredStructure, ind: Mapping[str, int],
                               k: int) -> KExperiment:
    """The deterministic injective atomic k-experiment: one fresh plain atom
    per axiom, named after the axiom's sorted port pair."""
    axiom_labels = {w[0]: Atom(f"a_{w[0]}_{w[1]}") for w in ws.axioms()}
    ke = eval_k_experiment(ws, ind, axiom_labels, k)
    assert ke.atomic and ke.injective
    return ke


def check_k_experiment(ke: KExperiment) -> List[str]:
    """Re-check every defining equation; empty list means valid."""
    ws, pt, k = ke.structure, ke.structure.ported, ke.k
    errs: List[str] = []
    for l in sorted(pt.cells):
        kind = pt.kind(l)
        pri = ke.labels.get(pt.principal[l])
        if kind in MULT_KINDS:
            want = Pair(POS if kind == TENSOR else NEG,
                        ke.labels[pt.left[l]], ke.labels[pt.right(l)])
        elif kind in (ONE, BOT):
            want = Unit(POS if kind == ONE else NEG)
        elif kind == BANG:
            (q,) = pt.aux_ports(l)
            want = Bag(POS, dig_multi(k, 1, Multiset([ke.labels[q]])))
        else:
            total = Multiset(())
            for p in sorted(pt.aux_ports(l)):
                total = total + dig_multi(k, pt.door_count[p], Multiset([ke.labels[p]]))
            want = Bag(NEG, total)
        if pri != want:
            errs.append(f"cell {l} equation fails")
    for p, q in ws.wires:
        if (p, q) in ws.axioms():
            if ke.labels[p] != orthogonal(ke.labels[q]):
                errs.append(f"axiom ({p},{q}) not orthogonal")
            if any(a.loc for a in atoms_of(ke.labels[p])):
                errs.append(f"axiom ({p},{q}) carries indexed atoms")
        elif ke.labels[p] != ke.labels[q]:
            errs.append(f"wire ({p},{q}) labels differ")
    want_result = tuple(ke.labels[p] for p, _ in sorted(ke.ind.items(), key=lambda it: it[1]))
    if tuple(ke.result) != want_result:
        errs.append("result tuple out of line with the index map")
    return errs


def _axiom_labels_of(ke: KExperiment) -> Dict[str, Value]:
    return {w[0]: ke.labels[w[0]] for w in ke.structure.axioms()}


def strip_layer_exp(ke: KExperiment) -> KExperiment:
    """The unique k-experiment of the layer-stripped structure agreeing with
    ``ke`` on inner ports; conclusion values lose one dig layer."""
    ws2, ind2 = strip_layer_indexed(ke.structure, ke.ind)
    return eval_k_experiment(ws2, ind2, _axiom_labels_of(ke), ke.k)


def reduce_exp(ke: KExperiment, l0: str) -> KExperiment:
    """Shed an axiom-free terminal bang or why branch together with its labels."""
    ws, pt = ke.structure, ke.structure.ported
    if l0 not in pt.cells or l0 not in set(ws.terminal_cells()):
        raise ExperimentError(f"{l0} is not a terminal cell")
    kind = pt.kind(l0)
    if kind == BANG:
        (q,) = pt.aux_ports(l0)
        if atoms_of(ke.labels[q]) or ws.has_axiom_above(q):
            raise ExperimentError(f"bang {l0} has axioms above its premise")
    elif kind == WHY:
        if set(contractions(ws)) & set(ws.terminal_cells()):
            raise ExperimentError("structure has a terminal contraction")
        if any(pt.door_count[p] < 1 for p in pt.aux_ports(l0)):
            raise ExperimentError(f"why {l0} has a doorless premise")
        free = []
        for p in sorted(pt.aux_ports(l0)):
            label_free = not atoms_of(ke.labels[p])
            if label_free != (not ws.has_axiom_above(p)):
                raise ExperimentError(f"premise {p} labels disagree with its axioms")
            if label_free:
                free.append(p)
        if not free:
            raise ExperimentError(f"why {l0} has no axiom-free premise")
    else:
        raise ExperimentError(f"{l0} is neither bang nor why")
    ws2, ind2 = reduce_isolated_indexed(ws, ke.ind, l0)
    if ws2 is ws:
        raise ExperimentError(f"reduction did not fire on {l0}")
    return eval_k_experiment(ws2, ind2, _axiom_labels_of(ke), ke.k)


# ---------------------------------------------------------------------------
# Experiments of proof structures
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PSExperiment:
    """Port multiset labels plus, per depth-0 bang, the chosen box copies."""
    labels: Mapping[str, Multiset]
    box_copies: Mapping[str, Tuple["PSExperiment", ...]]


def _check_plain(v: Value) -> Value:
    if any(a.loc for a in atoms_of(v)):
        raise ExperimentError("proof-structure experiments use index-free values")
    return v


def _eval_ps(ps: ProofStructure, desc: Mapping) -> PSExperiment:
    ws, pt = ps.lps, ps.lps.ported
    ax_desc: Mapping[str, Value] = desc.get("axiom_labels", {})
    box_desc: Mapping[str, Sequence[Mapping]] = desc.get("boxes", {})
    for v in box_desc:
        if v not in set(ps.depth0_bangs()):
            raise ExperimentError(f"box copies given for {v}, not a depth-0 bang here")

    labels: Dict[str, Multiset] = {}
    box_copies: Dict[str, Tuple[PSExperiment, ...]] = {}
    for v in ps.depth0_bangs():
        copies = tuple(_eval_ps(ps.boxes[v], d) for d in box_desc.get(v, ()))
        box_copies[v] = copies
        box_ports = set(ps.boxes[v].lps.ported.ports)
        for p in sorted(box_ports & set(pt.ports)):
            total = Multiset(())
            for c in copies:
                total = total + c.labels[p]
            labels[p] = total
        main = main_branch_port(ws, v)
        (q,) = pt.aux_ports(v)
        if q not in labels:  # premise dropped from the box: transport over the wire
            total = Multiset(())
            for c in copies:
                total = total + c.labels[main]
            labels[q] = total

    depth0_axioms = [w for w in ws.axioms() if ws.depth(w[0]) == 0]
    for p, q in depth0_axioms:
        vp, vq = ax_desc.get(p), ax_desc.get(q)
        if vp is None and vq is None:
            raise ExperimentError(f"axiom ({p},{q}) has no label")
        if vp is None:
            vp = orthogonal(vq)
        if vq is None:
            vq = orthogonal(vp)
        if vq != orthogonal(vp):
            raise ExperimentError(f"axiom ({p},{q}) labels are not orthogonal")
        labels[p] = Multiset([_check_plain(vp)])
        labels[q] = Multiset([vq])
    for p in ax_desc:
        if p not in {x for w in depth0_axioms for x in w}:
            raise ExperimentError(f"label for {p}: not a depth-0 axiom port here")

    def settle_wire(p: str) -> None:
        mate = ws.partner(p)
        if mate is not None and not pt.is_principal(mate):
            labels[mate] = labels[p]

    pending = {l for l in pt.cells if ws.depth(pt.principal[l]) == 0}
    while pending:
        progressed = False
        for l in sorted(pending):
            aux = pt.aux_ports(l)
            if not all(p in labels for p in aux):
                continue
            kind = pt.kind(l)
            if kind in MULT_KINDS:
                lv, rv = labels[pt.left[l]], labels[pt.right(l)]
                if lv.card() != 1 or rv.card() != 1:
                    raise ExperimentError(f"cell {l} premises are not singletons")
                pol = POS if kind == TENSOR else NEG
                val = Multiset([Pair(pol, lv.support()[0], rv.support()[0])])
            elif kind in (ONE, BOT):
                val = Multiset([Unit(POS if kind == ONE else NEG)])
            elif kind == BANG:
                main = main_branch_port(ws, l)
                total = Multiset(())
                for c in box_copies[l]:
                    total = total + c.labels[main]
                val = Multiset([Bag(POS, total)])
            else:
                total = Multiset(())
                for p in sorted(aux):
                    total = total + labels[p]
                val = Multiset([Bag(NEG, total)])
            labels[pt.principal[l]] = val
            settle_wire(pt.principal[l])
            pending.discard(l)
            progressed = True
        if not progressed:
            raise ExperimentError(f"experiment propagation stuck at {sorted(pending)}")

    missing = [p for p in pt.ports if p not in labels]
    if missing:
        raise ExperimentError(f"ports never labeled: {missing}")
    return PSExperiment(labels, box_copies)


def eval_ps_experiment(ps: ProofStructure, ind: Mapping[str, int],
                       desc: Mapping) -> Tuple[PSExperiment, ResultTuple]:
    check_indexing(ps.lps, ind)
    exp = _eval_ps(ps, desc)
    result = []
    for p, _ in sorted(ind.items(), key=lambda it: it[1]):
        ms = exp.labels[p]
        if ms.card() != 1:
            raise ExperimentError(f"conclusion {p} label is not a singleton")
        result.append(ms.support()[0])
    return exp, tuple(result)


def check_ps_experiment(ps: ProofStructure, exp: PSExperiment) -> List[str]:
    """Independent equation checker for proof-structure experiments."""
    ws, pt = ps.lps, ps.lps.ported
    errs: List[str] = []
    depth0 = {p for p in pt.ports if ws.depth(p) == 0}
    doors = set(pt.aux_doors())
    for p in sorted(depth0 - doors):
        if exp.labels[p].card() != 1:
            errs.append(f"port {p} at depth 0 must carry one label")
    for p, q in ws.axioms():
        if ws.depth(p) != 0:
            continue
        lp, lq = exp.labels[p], exp.labels[q]
        if lp.card() != 1 or lq.card() != 1 or \
                lp.support()[0] != orthogonal(lq.support()[0]):
            errs.append(f"axiom ({p},{q}) fails")
    for p, q in ws.wires:
        if (p, q) in ws.axioms() or ws.depth(p) != 0:
            continue
        if exp.labels[p] != exp.labels[q]:
            errs.append(f"wire ({p},{q}) labels differ")
    for l in sorted(pt.cells):
        if ws.depth(pt.principal[l]) != 0:
            continue
        kind = pt.kind(l)
        got = exp.labels[pt.principal[l]]
        if kind in MULT_KINDS:
            pol = POS if kind == TENSOR else NEG
            want = Multiset([Pair(pol, exp.labels[pt.left[l]].support()[0],
                                  exp.labels[pt.right(l)].support()[0])])
        elif kind in (ONE, BOT):
            want = Multiset([Unit(POS if kind == ONE else NEG)])
        elif kind == WHY:
            total = Multiset(())
            for p in sorted(pt.aux_ports(l)):
                total = total + exp.labels[p]
            want = Multiset([Bag(NEG, total)])
        else:
            copies = exp.box_copies.get(l)
            if copies is None:
                errs.append(f"bang {l} has no box choice")
                continue
            main = main_branch_port(ws, l)
            total = Multiset(())
            for c in copies:
                total = total + c.labels[main]
            want = Multiset([Bag(POS, total)])
            box_ports = set(ps.boxes[l].lps.ported.ports)
            for p in sorted(box_ports & set(pt.ports)):
                summed = Multiset(())
                for c in copies:
                    summed = summed + c.labels[p]
                if exp.labels[p] != summed:
                    errs.append(f"port {p} is not the sum over the copies of box {l}")
            for c in copies:
                errs.extend(f"box {l}: {e}" for e in check_ps_experiment(ps.boxes[l], c))
        if got != want:
            errs.append(f"cell {l} equation fails")
    return errs


def project_to_ps(ke: KExperiment, rho: PartialInjection,
                  ps: ProofStructure) -> Tuple[PSExperiment, ResultTuple]:
    """Unfold an injective atomic k-experiment into a k-copies-per-box
    experiment of the proof structure, renaming atoms through ``rho``."""
    if set(ke.structure.ported.ports) != set(ps.lps.ported.ports):
        raise ExperimentError("experiment and proof structure disagree on ports")
    if not (ke.atomic and ke.injective):
        raise ExperimentError("projection needs an injective atomic k-experiment")
    for a in rho.image():
        if not a.plain:
            raise ExperimentError("projection renaming must target plain atoms")
    if not atoms_of(ke.result) <= rho.domain():
        raise ExperimentError("renaming does not cover the atoms of the result")
    exp = _project(ke, rho, ps)
    _, result = _result_of(exp, ps, ke.ind)
    want = apply_pinj(rho, ke.result)
    if result != want:
        raise ExperimentError("projected result disagrees with the renamed result")
    return exp, result


def _result_of(exp: PSExperiment, ps: ProofStructure,
               ind: Mapping[str, int]) -> Tuple[PSExperiment, ResultTuple]:
    result = []
    for p, _ in sorted(ind.items(), key=lambda it: it[1]):
        ms = exp.labels[p]
        if ms.card() != 1:
            raise ExperimentError(f"conclusion {p} label is not a singleton")
        result.append(ms.support()[0])
    return exp, tuple(result)


def _rename_trail(rho: PartialInjection, suffix: Tuple[int, ...], v: Value) -> Value:
    """Rename atoms through ``rho`` after appending the copy-trail suffix."""
    if isinstance(v, Atom):
        return rho[Atom(v.name, v.loc + suffix)]
    if isinstance(v, Unit):
        return v
    if isinstance(v, Pair):
        return Pair(v.pol, _rename_trail(rho, suffix, v.left),
                    _rename_trail(rho, suffix, v.right))
    if isinstance(v, Bag):
        return Bag(v.pol, Multiset.from_pairs(
            (_rename_trail(rho, suffix, x), n) for x, n in v.items.pairs()))
    raise ExperimentError(f"not a value: {v!r}")


def _project(ke: KExperiment, rho: PartialInjection, ps: ProofStructure,
             suffix: Tuple[int, ...] = ()) -> PSExperiment:
    ws, pt = ps.lps, ps.lps.ported
    k = ke.k
    labels: Dict[str, Multiset] = {}
    box_copies: Dict[str, Tuple[PSExperiment, ...]] = {}
    for v in ps.depth0_bangs():
        box = ps.boxes[v]
        box_ws = box.lps
        ax = {w[0]: ke.labels[w[0]] for w in box_ws.axioms()}
        sub = eval_k_experiment(box_ws, {p: i + 1 for i, p in
                                         enumerate(sorted(box_ws.conclusions()))}, ax, k)
        copies = tuple(_project(sub, rho, box, (i,) + suffix)
                       for i in range(1, k + 1))
        box_copies[v] = copies
        box_ports = set(box_ws.ported.ports)
        for p in sorted(box_ports & set(pt.ports)):
            total = Multiset(())
            for c in copies:
                total = total + c.labels[p]
            labels[p] = total
        (q,) = pt.aux_ports(v)
        if q not in labels:
            main = main_branch_port(ws, v)
            total = Multiset(())
            for c in copies:
                total = total + c.labels[main]
            labels[q] = total
    for p in pt.ports:
        if p not in labels and ws.depth(p) == 0:
            labels[p] = Multiset([_rename_trail(rho, suffix, ke.labels[p])])
    missing = [p for p in pt.ports if p not in labels]
    if missing:
        raise ExperimentError(f"projection left ports unlabeled: {missing}")
    return PSExperiment(labels, box_copies)


# ---------------------------------------------------------------------------
# Bounded interpretation
# ---------------------------------------------------------------------------

class EnumerationTruncated(ExperimentError):
    def __init__(self, cap: int):
        super().__init__(f"enumeration exceeded the cap of {cap} descriptions")
        self.cap = cap


def _enumerate_descs(ps: ProofStructure, pool: Sequence[Atom], max_copies: int,
                     budget: List[int], cap: int) -> List[Mapping]:
    ws = ps.lps
    axioms0 = [w for w in ws.axioms() if ws.depth(w[0]) == 0]
    bangs0 = ps.depth0_bangs()
    axiom_choices = [[(w[0], a) for a in pool] for w in axioms0]
    bang_choices = []
    for v in bangs0:
        subs = _enumerate_descs(ps.boxes[v], pool, max_copies, budget, cap)
        options: List[Tuple] = []
        for m in range(max_copies + 1):
            options.extend(itertools.combinations_with_replacement(range(len(subs)), m))
        bang_choices.append((v, subs, options))
    out: List[Mapping] = []
    for ax_pick in itertools.product(*axiom_choices):
        for box_pick in itertools.product(*(opts for _, _, opts in bang_choices)):
            budget[0] += 1
            if budget[0] > cap:
                raise EnumerationTruncated(cap)
            desc = {
                "axiom_labels": dict(ax_pick),
                "boxes": {v: [subs[i] for i in pick]
                          for (v, subs, _), pick in zip(bang_choices, box_pick)},
            }
            out.append(desc)
    return out


def sample_interpretation(ps: ProofStructure, ind: Mapping[str, int],
                          atom_pool: Sequence[str], max_copies: int,
                          cap: int = 500_000) -> FrozenSet[ResultTuple]:
    """All experiment results with box multiplicities at most ``max_copies``
    and axiom labels drawn from the atom pool: exact on that fragment."""
    pool = [Atom(name) for name in sorted(set(atom_pool))]
    budget = [0]
    results: Set[ResultTuple] = set()
    for desc in _enumerate_descs(ps, pool, max_copies, budget, cap):
        _, r = eval_ps_experiment(ps, ind, desc)
        results.add(r)
    return frozenset(results)
