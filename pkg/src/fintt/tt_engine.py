"""The contexted deductive system: derivation trees, the closure-rule
checker, and the admissible operations (substitution, instantiation,
presuppositions, natural types, inversion).

Derivations are explicit trees.  Every node records the contexts it works in
and the side data of its closure rule; ``_infer`` recomputes the node's
conclusion from its children, so the constructors and ``check_derivation``
cannot drift apart.  The admissible operations are derivation-to-derivation
transformations mirroring the constructive proofs, and always return trees
the checker accepts.

Economic node kinds (``*-Eco``) implement the admissible economic variants
of the closure rules; they are sound in finitary theories, which are the
only ones the engine is run against.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence, Union

from .errors import (
    BadNode,
    MissingContextEvidence,
    NoSymbolRule,
    NotObjectJudgement,
    SideConditionFailed,
    UnknownVar,
)
from .instantiation import Instantiation, act
from .judgements import (
    MetaCtx,
    VarCtx,
    abstract_judgement,
    plain,
)
from .syntax import (
    Abstracted,
    AbstractedBoundary,
    AbstractedJudgement,
    DUMMY,
    EqTm,
    EqTy,
    EqTmB,
    EqTyB,
    Expr,
    FreeVar,
    IsTm,
    IsTmB,
    IsTy,
    IsTyB,
    MetaApp,
    MetaName,
    SymbolApp,
    atoms_in_use,
    boundary_arity,
    fresh_name,
    fv,
    rename_atoms,
    subst_bound_many,
    subst_free,
)
from .theory import (
    Theory,
    congruence_premises_tt,
    congruence_premises_tt_eco,
    metavariable_congruence_instance,
    metavariable_rule_instance,
    rule_instance_premises,
)


# ---------------------------------------------------------------------------
# Statements


@dataclass(frozen=True)
class JdgTT:
    """Theta; Gamma |- J"""

    mctx: MetaCtx
    vctx: VarCtx
    jdg: AbstractedJudgement


@dataclass(frozen=True)
class BdryTT:
    """Theta; Gamma |- B"""

    mctx: MetaCtx
    vctx: VarCtx
    bdry: AbstractedBoundary


@dataclass(frozen=True)
class MctxWF:
    """|- mctx Theta"""

    mctx: MetaCtx


@dataclass(frozen=True)
class VctxWF:
    """Theta |- vctx Gamma"""

    mctx: MetaCtx
    vctx: VarCtx


Statement = Union[JdgTT, BdryTT, MctxWF, VctxWF]


@dataclass(frozen=True)
class Derivation:
    rule: str
    data: tuple
    premises: tuple["Derivation", ...]
    conclusion: Statement


def _ctxs(stmt: Statement) -> tuple[MetaCtx, VarCtx]:
    match stmt:
        case JdgTT(mctx=m, vctx=v) | BdryTT(mctx=m, vctx=v) | VctxWF(mctx=m, vctx=v):
            return m, v
        case MctxWF(mctx=m):
            from .judgements import EMPTY_VARS

            return m, EMPTY_VARS
    raise TypeError(stmt)


def _want_jdg(stmt: Statement, what: str) -> AbstractedJudgement:
    if not isinstance(stmt, JdgTT):
        raise BadNode(f"expected a judgement premise for {what}")
    return stmt.jdg


def _want_plain_thesis(stmt: Statement, kind, what: str):
    j = _want_jdg(stmt, what)
    if j.prefix or not isinstance(j.body, kind):
        raise BadNode(f"expected a non-abstracted {kind.__name__} premise for {what}")
    return j.body


def _same_ctx(mctx: MetaCtx, vctx: VarCtx, stmts: Sequence[Statement], what: str) -> None:
    for s in stmts:
        m, v = _ctxs(s)
        if m != mctx or v != vctx:
            raise BadNode(f"premise context mismatch in {what}")


def _infer(theory: Theory, rule: str, data: tuple, kids: Sequence[Statement]) -> Statement:
    """Computes the conclusion a node must have; raises on invalid nodes."""

    match rule:
        case "TT-Var":
            mctx, vctx, v = data
            if kids:
                raise BadNode("TT-Var has no premises")
            if v not in vctx:
                raise SideConditionFailed(f"{v.name} not in the variable context")
            return JdgTT(mctx, vctx, plain(IsTm(v, vctx[v])))

        case "TT-Meta" | "TT-Meta-Eco":
            mctx, vctx, m, terms = data
            if m not in mctx:
                raise SideConditionFailed(f"{m.name} not in the metavariable context")
            prem, bdry, concl = metavariable_rule_instance(m, mctx[m], list(terms))
            want = len(prem) + (1 if rule == "TT-Meta" else 0)
            if len(kids) != want:
                raise BadNode(f"{rule} expects {want} premises, got {len(kids)}")
            _same_ctx(mctx, vctx, kids, rule)
            for got, need in zip(kids, prem):
                if _want_jdg(got, rule) != need:
                    raise BadNode(f"{rule} premise mismatch: wanted {need}")
            if rule == "TT-Meta":
                last = kids[-1]
                if not isinstance(last, BdryTT) or last.bdry != bdry:
                    raise BadNode("TT-Meta boundary premise mismatch")
            return JdgTT(mctx, vctx, concl)

        case "TT-Meta-Congr" | "TT-Meta-Congr-Eco":
            mctx, vctx, m, ss, ts = data
            if m not in mctx:
                raise SideConditionFailed(f"{m.name} not in the metavariable context")
            prem, concl = metavariable_congruence_instance(m, mctx[m], list(ss), list(ts))
            if rule == "TT-Meta-Congr-Eco":
                k = len(mctx[m].prefix)
                prem = prem[2 * k : 3 * k]  # the equation row only
            if len(kids) != len(prem):
                raise BadNode(f"{rule} expects {len(prem)} premises, got {len(kids)}")
            _same_ctx(mctx, vctx, kids, rule)
            for got, need in zip(kids, prem):
                if _want_jdg(got, rule) != need:
                    raise BadNode(f"{rule} premise mismatch: wanted {need}")
            return JdgTT(mctx, vctx, concl)

        case "TT-Abstr":
            mctx, vctx, atom = data
            if len(kids) != 2:
                raise BadNode("TT-Abstr expects 2 premises")
            ty = _want_plain_thesis(kids[0], IsTy, "TT-Abstr").ty
            km, kv = _ctxs(kids[0])
            if km != mctx or kv != vctx:
                raise BadNode("TT-Abstr type premise context mismatch")
            if atom in vctx:
                raise SideConditionFailed(f"{atom.name} already in the variable context")
            bm, bv_ = _ctxs(kids[1])
            if bm != mctx or bv_ != vctx.extend(atom, ty):
                raise BadNode("TT-Abstr body premise must extend the context by the atom")
            body = _want_jdg(kids[1], "TT-Abstr")
            return JdgTT(mctx, vctx, abstract_judgement(body, atom, ty))

        case "TT-EqTy-Refl":
            (mctx, vctx) = data
            _same_ctx(mctx, vctx, kids, rule)
            (k,) = kids
            a = _want_plain_thesis(k, IsTy, rule).ty
            return JdgTT(mctx, vctx, plain(EqTy(a, a, DUMMY)))

        case "TT-EqTy-Sym":
            (mctx, vctx) = data
            _same_ctx(mctx, vctx, kids, rule)
            (k,) = kids
            eq = _want_plain_thesis(k, EqTy, rule)
            return JdgTT(mctx, vctx, plain(EqTy(eq.rhs, eq.lhs, DUMMY)))

        case "TT-EqTy-Trans":
            (mctx, vctx) = data
            _same_ctx(mctx, vctx, kids, rule)
            k1, k2 = kids
            e1 = _want_plain_thesis(k1, EqTy, rule)
            e2 = _want_plain_thesis(k2, EqTy, rule)
            if e1.rhs != e2.lhs:
                raise BadNode("TT-EqTy-Trans middle types differ")
            return JdgTT(mctx, vctx, plain(EqTy(e1.lhs, e2.rhs, DUMMY)))

        case "TT-EqTm-Refl":
            (mctx, vctx) = data
            _same_ctx(mctx, vctx, kids, rule)
            (k,) = kids
            tm = _want_plain_thesis(k, IsTm, rule)
            return JdgTT(mctx, vctx, plain(EqTm(tm.term, tm.term, tm.ty, DUMMY)))

        case "TT-EqTm-Sym":
            (mctx, vctx) = data
            _same_ctx(mctx, vctx, kids, rule)
            (k,) = kids
            eq = _want_plain_thesis(k, EqTm, rule)
            return JdgTT(mctx, vctx, plain(EqTm(eq.rhs, eq.lhs, eq.ty, DUMMY)))

        case "TT-EqTm-Trans":
            (mctx, vctx) = data
            _same_ctx(mctx, vctx, kids, rule)
            k1, k2 = kids
            e1 = _want_plain_thesis(k1, EqTm, rule)
            e2 = _want_plain_thesis(k2, EqTm, rule)
            if e1.rhs != e2.lhs or e1.ty != e2.ty:
                raise BadNode("TT-EqTm-Trans premises do not chain")
            return JdgTT(mctx, vctx, plain(EqTm(e1.lhs, e2.rhs, e1.ty, DUMMY)))

        case "TT-Conv-Tm":
            (mctx, vctx) = data
            _same_ctx(mctx, vctx, kids, rule)
            k1, k2 = kids
            tm = _want_plain_thesis(k1, IsTm, rule)
            eq = _want_plain_thesis(k2, EqTy, rule)
            if tm.ty != eq.lhs:
                raise BadNode("TT-Conv-Tm premise types differ")
            return JdgTT(mctx, vctx, plain(IsTm(tm.term, eq.rhs)))

        case "TT-Conv-EqTm":
            (mctx, vctx) = data
            _same_ctx(mctx, vctx, kids, rule)
            k1, k2 = kids
            tmeq = _want_plain_thesis(k1, EqTm, rule)
            eq = _want_plain_thesis(k2, EqTy, rule)
            if tmeq.ty != eq.lhs:
                raise BadNode("TT-Conv-EqTm premise types differ")
            return JdgTT(mctx, vctx, plain(EqTm(tmeq.lhs, tmeq.rhs, eq.rhs, DUMMY)))

        case "TT-Bdry-Ty":
            mctx, vctx = data
            if kids:
                raise BadNode("TT-Bdry-Ty has no premises")
            return BdryTT(mctx, vctx, plain(IsTyB()))

        case "TT-Bdry-Tm":
            (mctx, vctx) = data
            _same_ctx(mctx, vctx, kids, rule)
            (k,) = kids
            a = _want_plain_thesis(k, IsTy, rule).ty
            return BdryTT(mctx, vctx, plain(IsTmB(a)))

        case "TT-Bdry-EqTy":
            (mctx, vctx) = data
            _same_ctx(mctx, vctx, kids, rule)
            k1, k2 = kids
            a = _want_plain_thesis(k1, IsTy, rule).ty
            b = _want_plain_thesis(k2, IsTy, rule).ty
            return BdryTT(mctx, vctx, plain(EqTyB(a, b)))

        case "TT-Bdry-EqTm":
            (mctx, vctx) = data
            _same_ctx(mctx, vctx, kids, rule)
            k1, k2, k3 = kids
            a = _want_plain_thesis(k1, IsTy, rule).ty
            s = _want_plain_thesis(k2, IsTm, rule)
            t = _want_plain_thesis(k3, IsTm, rule)
            if s.ty != a or t.ty != a:
                raise BadNode("TT-Bdry-EqTm sides must live at the stated type")
            return BdryTT(mctx, vctx, plain(EqTmB(s.term, t.term, a)))

        case "TT-Bdry-Abstr":
            mctx, vctx, atom = data
            if len(kids) != 2:
                raise BadNode("TT-Bdry-Abstr expects 2 premises")
            ty = _want_plain_thesis(kids[0], IsTy, rule).ty
            km, kv = _ctxs(kids[0])
            if km != mctx or kv != vctx:
                raise BadNode("TT-Bdry-Abstr type premise context mismatch")
            if atom in vctx:
                raise SideConditionFailed(f"{atom.name} already in the variable context")
            if not isinstance(kids[1], BdryTT):
                raise BadNode("TT-Bdry-Abstr body premise must be a boundary")
            bm, bv_ = _ctxs(kids[1])
            if bm != mctx or bv_ != vctx.extend(atom, ty):
                raise BadNode("TT-Bdry-Abstr body premise must extend the context")
            body = kids[1].bdry
            return BdryTT(mctx, vctx, abstract_judgement(body, atom, ty))

        case "MCtx-Empty":
            if kids or data:
                raise BadNode("MCtx-Empty is a leaf")
            from .judgements import EMPTY_METAS

            return MctxWF(EMPTY_METAS)

        case "MCtx-Extend":
            (m,) = data
            k1, k2 = kids
            if not isinstance(k1, MctxWF):
                raise BadNode("MCtx-Extend first premise must be |- mctx")
            if not isinstance(k2, BdryTT):
                raise BadNode("MCtx-Extend second premise must be a boundary")
            if k2.mctx != k1.mctx or len(k2.vctx) != 0:
                raise BadNode("MCtx-Extend boundary premise context mismatch")
            if m in k1.mctx:
                raise SideConditionFailed(f"{m.name} already in the metavariable context")
            if fv(k2.bdry):
                raise SideConditionFailed("metavariable boundaries must be closed")
            return MctxWF(k1.mctx.extend(m, k2.bdry))

        case "VCtx-Empty":
            (mctx,) = data
            if kids:
                raise BadNode("VCtx-Empty is a leaf")
            from .judgements import EMPTY_VARS

            return VctxWF(mctx, EMPTY_VARS)

        case "VCtx-Extend":
            (v,) = data
            k1, k2 = kids
            if not isinstance(k1, VctxWF):
                raise BadNode("VCtx-Extend first premise must be |- vctx")
            ty = _want_plain_thesis(k2, IsTy, rule).ty
            m2, v2 = _ctxs(k2)
            if m2 != k1.mctx or v2 != k1.vctx:
                raise BadNode("VCtx-Extend type premise context mismatch")
            if v in k1.vctx:
                raise SideConditionFailed(f"{v.name} already in the variable context")
            return VctxWF(k1.mctx, k1.vctx.extend(v, ty))

        case "TT-Specific" | "TT-Specific-Eco":
            mctx, vctx, rule_name, inst = data
            trule = theory.rule(rule_name)
            prem, bdry, concl = rule_instance_premises(trule.rule, inst)
            want = len(prem) + (1 if rule == "TT-Specific" else 0)
            if len(kids) != want:
                raise BadNode(f"{rule} expects {want} premises, got {len(kids)}")
            _same_ctx(mctx, vctx, kids, rule)
            for got, need in zip(kids, prem):
                if _want_jdg(got, rule) != need:
                    raise BadNode(
                        f"{rule} premise mismatch for rule {rule_name}: wanted {need}"
                    )
            if rule == "TT-Specific":
                last = kids[-1]
                if not isinstance(last, BdryTT) or last.bdry != bdry:
                    raise BadNode("TT-Specific boundary premise mismatch")
            return JdgTT(mctx, vctx, concl)

        case "TT-Congr" | "TT-Congr-Eco":
            mctx, vctx, rule_name, left, right = data
            trule = theory.rule(rule_name)
            if rule == "TT-Congr":
                prem, concl = congruence_premises_tt(trule.rule, left, right)
            else:
                prem, concl = congruence_premises_tt_eco(trule.rule, left, right)
            if len(kids) != len(prem):
                raise BadNode(f"{rule} expects {len(prem)} premises, got {len(kids)}")
            _same_ctx(mctx, vctx, kids, rule)
            for got, need in zip(kids, prem):
                if _want_jdg(got, rule) != need:
                    raise BadNode(f"{rule} premise mismatch: wanted {need}")
            return JdgTT(mctx, vctx, concl)

    raise BadNode(f"unknown closure rule {rule!r}")


def node(theory: Theory, rule: str, data: tuple, premises: Sequence[Derivation]) -> Derivation:
    """Builds a node, computing (and thereby validating) its conclusion."""
    concl = _infer(theory, rule, data, [p.conclusion for p in premises])
    return Derivation(rule, data, tuple(premises), concl)


def check_derivation(theory: Theory, d: Derivation) -> None:
    """Recomputes every node of ``d`` and compares against what is stored."""
    for p in d.premises:
        check_derivation(theory, p)
    concl = _infer(theory, d.rule, d.data, [p.conclusion for p in d.premises])
    if concl != d.conclusion:
        raise BadNode(
            f"node {d.rule} stores conclusion {d.conclusion!r} but infers {concl!r}"
        )


# ---------------------------------------------------------------------------
# Public constructors


def tt_var(theory: Theory, mctx: MetaCtx, vctx: VarCtx, v: FreeVar) -> Derivation:
    return node(theory, "TT-Var", (mctx, vctx, v), [])


def tt_meta(
    theory: Theory,
    mctx: MetaCtx,
    vctx: VarCtx,
    m: MetaName,
    term_derivs: Sequence[Derivation],
    bdry_deriv: Optional[Derivation] = None,
) -> Derivation:
    terms = tuple(_head_term(d) for d in term_derivs)
    kids = list(term_derivs) + ([bdry_deriv] if bdry_deriv is not None else [])
    kind = "TT-Meta" if bdry_deriv is not None else "TT-Meta-Eco"
    return node(theory, kind, (mctx, vctx, m, terms), kids)


def _head_term(d: Derivation) -> Expr:
    j = _want_jdg(d.conclusion, "term premise")
    if j.prefix or not isinstance(j.body, IsTm):
        raise BadNode("expected a term judgement")
    return j.body.term


def tt_abstr(theory: Theory, ty_deriv: Derivation, body_deriv: Derivation, atom: FreeVar) -> Derivation:
    mctx, vctx = _ctxs(ty_deriv.conclusion)
    return node(theory, "TT-Abstr", (mctx, vctx, atom), [ty_deriv, body_deriv])


def _unary(kind: str):
    def ctor(theory: Theory, d: Derivation) -> Derivation:
        mctx, vctx = _ctxs(d.conclusion)
        return node(theory, kind, (mctx, vctx), [d])

    return ctor


def _binary(kind: str):
    def ctor(theory: Theory, d1: Derivation, d2: Derivation) -> Derivation:
        mctx, vctx = _ctxs(d1.conclusion)
        return node(theory, kind, (mctx, vctx), [d1, d2])

    return ctor


eqty_refl = _unary("TT-EqTy-Refl")
eqty_sym = _unary("TT-EqTy-Sym")
eqty_trans = _binary("TT-EqTy-Trans")
eqtm_refl = _unary("TT-EqTm-Refl")
eqtm_sym = _unary("TT-EqTm-Sym")
eqtm_trans = _binary("TT-EqTm-Trans")
conv_tm = _binary("TT-Conv-Tm")
conv_eqtm = _binary("TT-Conv-EqTm")
bdry_tm = _unary("TT-Bdry-Tm")
bdry_eqty = _binary("TT-Bdry-EqTy")


def bdry_ty(theory: Theory, mctx: MetaCtx, vctx: VarCtx) -> Derivation:
    return node(theory, "TT-Bdry-Ty", (mctx, vctx), [])


def bdry_eqtm(theory: Theory, ty: Derivation, lhs: Derivation, rhs: Derivation) -> Derivation:
    mctx, vctx = _ctxs(ty.conclusion)
    return node(theory, "TT-Bdry-EqTm", (mctx, vctx), [ty, lhs, rhs])


def bdry_abstr(theory: Theory, ty_deriv: Derivation, body_deriv: Derivation, atom: FreeVar) -> Derivation:
    mctx, vctx = _ctxs(ty_deriv.conclusion)
    return node(theory, "TT-Bdry-Abstr", (mctx, vctx, atom), [ty_deriv, body_deriv])


def mctx_empty(theory: Theory) -> Derivation:
    return node(theory, "MCtx-Empty", (), [])


def mctx_extend(theory: Theory, prev: Derivation, bdry_deriv: Derivation, m: MetaName) -> Derivation:
    return node(theory, "MCtx-Extend", (m,), [prev, bdry_deriv])


def vctx_empty(theory: Theory, mctx: MetaCtx) -> Derivation:
    return node(theory, "VCtx-Empty", (mctx,), [])


def vctx_extend(theory: Theory, prev: Derivation, ty_deriv: Derivation, v: FreeVar) -> Derivation:
    return node(theory, "VCtx-Extend", (v,), [prev, ty_deriv])


def specific(
    theory: Theory,
    mctx: MetaCtx,
    vctx: VarCtx,
    rule_name: str,
    inst: Instantiation,
    premise_derivs: Sequence[Derivation],
    bdry_deriv: Optional[Derivation] = None,
) -> Derivation:
    kids = list(premise_derivs) + ([bdry_deriv] if bdry_deriv is not None else [])
    kind = "TT-Specific" if bdry_deriv is not None else "TT-Specific-Eco"
    return node(theory, kind, (mctx, vctx, rule_name, inst), kids)


def congruence(
    theory: Theory,
    mctx: MetaCtx,
    vctx: VarCtx,
    rule_name: str,
    left: Instantiation,
    right: Instantiation,
    premise_derivs: Sequence[Derivation],
    economic: bool = False,
) -> Derivation:
    kind = "TT-Congr-Eco" if economic else "TT-Congr"
    return node(theory, kind, (mctx, vctx, rule_name, left, right), premise_derivs)


def meta_congr(
    theory: Theory,
    mctx: MetaCtx,
    vctx: VarCtx,
    m: MetaName,
    left_terms: Sequence[Expr],
    right_terms: Sequence[Expr],
    premise_derivs: Sequence[Derivation],
    economic: bool = False,
) -> Derivation:
    kind = "TT-Meta-Congr-Eco" if economic else "TT-Meta-Congr"
    return node(
        theory, kind, (mctx, vctx, m, tuple(left_terms), tuple(right_terms)), premise_derivs
    )


# ---------------------------------------------------------------------------
# Renaming and weakening


def _binding_atoms(d: Derivation) -> set[FreeVar]:
    out: set[FreeVar] = set()
    if d.rule in ("TT-Abstr", "TT-Bdry-Abstr"):
        out.add(d.data[2])
    if d.rule == "VCtx-Extend":
        out.add(d.data[0])
    for p in d.premises:
        out |= _binding_atoms(p)
    return out


def _all_names(d: Derivation) -> set[str]:
    """Names mentioned anywhere in a derivation (contexts + side data)."""
    out: set[str] = set()

    def stmt_names(s: Statement) -> None:
        m, v = _ctxs(s)
        for mm, b in m:
            out.add(mm.name)
            out.update(atoms_in_use(b))
        for vv, ty in v:
            out.add(vv.name)
            out.update(atoms_in_use(ty))
        match s:
            case JdgTT(jdg=j):
                out.update(atoms_in_use(j))
            case BdryTT(bdry=b):
                out.update(atoms_in_use(b))
            case _:
                pass

    def walk(d: Derivation) -> None:
        stmt_names(d.conclusion)
        for p in d.premises:
            walk(p)

    walk(d)
    return out


def rename_derivation(
    theory: Theory,
    d: Derivation,
    var_map: dict[FreeVar, FreeVar],
    meta_map: Optional[dict[MetaName, MetaName]] = None,
) -> Derivation:
    """Applies an injective renaming of atoms throughout a derivation,
    freshening binding atoms when the renaming would capture them."""
    meta_map = meta_map or {}
    taken = (
        _all_names(d)
        | {v.name for v in var_map.values()}
        | {m.name for m in meta_map.values()}
    )

    def ren_mctx(m: MetaCtx, vm, mm) -> MetaCtx:
        return MetaCtx([(mm.get(k, k), rename_atoms(b, vm, mm)) for k, b in m])

    def ren_vctx(v: VarCtx, vm, mm) -> VarCtx:
        return VarCtx([(vm.get(k, k), rename_atoms(ty, vm, mm)) for k, ty in v])

    def walk(d: Derivation, vm: dict, mm: dict) -> Derivation:
        data = d.data
        rule = d.rule
        if rule in ("TT-Abstr", "TT-Bdry-Abstr"):
            mctx, vctx, atom = data
            new_atom = vm.get(atom, atom)
            target_vctx = ren_vctx(vctx, vm, mm)
            if new_atom in target_vctx:
                fresh = FreeVar(fresh_name(atom.name, frozenset(taken)), atom.annotation)
                taken.add(fresh.name)
                new_atom = fresh
            vm2 = dict(vm)
            vm2[atom] = new_atom
            kids = [walk(d.premises[0], vm, mm), walk(d.premises[1], vm2, mm)]
            return node(theory, rule, (ren_mctx(mctx, vm, mm), target_vctx, new_atom), kids)
        match rule:
            case "TT-Var":
                mctx, vctx, v = data
                new_data = (ren_mctx(mctx, vm, mm), ren_vctx(vctx, vm, mm), vm.get(v, v))
            case "TT-Meta" | "TT-Meta-Eco":
                mctx, vctx, m, terms = data
                new_data = (
                    ren_mctx(mctx, vm, mm),
                    ren_vctx(vctx, vm, mm),
                    mm.get(m, m),
                    tuple(rename_atoms(t, vm, mm) for t in terms),
                )
            case "TT-Meta-Congr" | "TT-Meta-Congr-Eco":
                mctx, vctx, m, ss, ts = data
                new_data = (
                    ren_mctx(mctx, vm, mm),
                    ren_vctx(vctx, vm, mm),
                    mm.get(m, m),
                    tuple(rename_atoms(t, vm, mm) for t in ss),
                    tuple(rename_atoms(t, vm, mm) for t in ts),
                )
            case "TT-Specific" | "TT-Specific-Eco":
                mctx, vctx, rn, inst = data
                new_data = (
                    ren_mctx(mctx, vm, mm),
                    ren_vctx(vctx, vm, mm),
                    rn,
                    Instantiation([(k, rename_atoms(a, vm, mm)) for k, a in inst]),
                )
            case "TT-Congr" | "TT-Congr-Eco":
                mctx, vctx, rn, li, ri = data
                new_data = (
                    ren_mctx(mctx, vm, mm),
                    ren_vctx(vctx, vm, mm),
                    rn,
                    Instantiation([(k, rename_atoms(a, vm, mm)) for k, a in li]),
                    Instantiation([(k, rename_atoms(a, vm, mm)) for k, a in ri]),
                )
            case "MCtx-Empty":
                new_data = ()
            case "MCtx-Extend":
                (m,) = data
                new_data = (mm.get(m, m),)
            case "VCtx-Empty":
                (mctx,) = data
                new_data = (ren_mctx(mctx, vm, mm),)
            case "VCtx-Extend":
                (v,) = data
                new_data = (vm.get(v, v),)
            case _:
                mctx, vctx = data[0], data[1]
                new_data = (ren_mctx(mctx, vm, mm), ren_vctx(vctx, vm, mm)) + data[2:]
        kids = [walk(p, vm, mm) for p in d.premises]
        return node(theory, rule, new_data, kids)

    return walk(d, dict(var_map), dict(meta_map))


def _avoid_binding_clashes(theory: Theory, d: Derivation, names: set[str]) -> Derivation:
    clashes = {a for a in _binding_atoms(d) if a.name in names}
    if not clashes:
        return d
    taken = frozenset(_all_names(d) | names)
    vm: dict[FreeVar, FreeVar] = {}
    for a in sorted(clashes, key=lambda u: u.name):
        avoid = taken | frozenset(v.name for v in vm.values())
        vm[a] = FreeVar(fresh_name(a.name, avoid), a.annotation)
    return rename_derivation(theory, d, vm)


def weaken_var(theory: Theory, d: Derivation, v: FreeVar, ty: Expr) -> Derivation:
    """Inserts ``v : ty`` after the root context of every node (entries added
    by abstractions inside the derivation stay to the right of it)."""
    d = _avoid_binding_clashes(theory, d, {v.name})
    position = len(_ctxs(d.conclusion)[1])

    def insert(vctx: VarCtx) -> VarCtx:
        entries = list(vctx.entries)
        return VarCtx(entries[:position] + [(v, ty)] + entries[position:])

    def walk(d: Derivation) -> Derivation:
        kids = [walk(p) for p in d.premises]
        data = d.data
        match d.rule:
            case "MCtx-Empty" | "MCtx-Extend" | "VCtx-Empty" | "VCtx-Extend":
                raise BadNode("cannot weaken a context derivation by a variable")
            case _:
                mctx, vctx = data[0], data[1]
                data = (mctx, insert(vctx)) + data[2:]
        return node(theory, d.rule, data, kids)

    return walk(d)


def weaken_vars(theory: Theory, d: Derivation, entries: Sequence[tuple[FreeVar, Expr]]) -> Derivation:
    for v, ty in entries:
        d = weaken_var(theory, d, v, ty)
    return d


def weaken_meta(theory: Theory, d: Derivation, m: MetaName, b: AbstractedBoundary) -> Derivation:
    """Appends ``m : b`` to the metavariable context of every node."""

    def walk(d: Derivation) -> Derivation:
        kids = [walk(p) for p in d.premises]
        data = d.data
        match d.rule:
            case "MCtx-Empty" | "MCtx-Extend":
                raise BadNode("cannot weaken a metavariable-context derivation")
            case "VCtx-Empty":
                (mctx,) = data
                data = (mctx.extend(m, b),)
            case "VCtx-Extend":
                pass
            case _:
                mctx, vctx = data[0], data[1]
                data = (mctx.extend(m, b), vctx) + data[2:]
        return node(theory, d.rule, data, kids)

    return walk(d)


# ---------------------------------------------------------------------------
# Context inversion


def mctx_entry_boundary(theory: Theory, mctx_deriv: Derivation, m: MetaName) -> Derivation:
    """From |- mctx Theta, a derivation of  Theta; . |- Theta(m)."""
    target: Optional[Derivation] = None
    later: list[tuple[MetaName, AbstractedBoundary]] = []
    d = mctx_deriv
    while d.rule == "MCtx-Extend":
        if d.data[0] == m:
            target = d
            break
        later.append((d.data[0], d.premises[1].conclusion.bdry))
        d = d.premises[0]
    if target is None:
        raise MissingContextEvidence(f"{m.name} not in the metavariable context")
    out = weaken_meta(theory, target.premises[1], m, target.premises[1].conclusion.bdry)
    for mm, bb in reversed(later):
        out = weaken_meta(theory, out, mm, bb)
    return out


def vctx_entry_type(theory: Theory, vctx_deriv: Derivation, v: FreeVar) -> Derivation:
    """From Theta |- vctx Gamma, a derivation of  Theta; Gamma |- Gamma(v) type."""
    target: Optional[Derivation] = None
    later: list[tuple[FreeVar, Expr]] = []
    d = vctx_deriv
    while d.rule == "VCtx-Extend":
        step_v = d.data[0]
        ty = _want_plain_thesis(d.premises[1].conclusion, IsTy, "VCtx-Extend").ty
        if step_v == v:
            target = d
            break
        later.append((step_v, ty))
        d = d.premises[0]
    if target is None:
        raise MissingContextEvidence(f"{v.name} not in the variable context")
    own_ty = _want_plain_thesis(target.premises[1].conclusion, IsTy, "VCtx-Extend").ty
    out = weaken_var(theory, target.premises[1], v, own_ty)
    for vv, tt in reversed(later):
        out = weaken_var(theory, out, vv, tt)
    return out


# ---------------------------------------------------------------------------
# Admissible substitution


def _split_vctx(vctx: VarCtx, v: FreeVar) -> tuple[list, list]:
    entries = list(vctx.entries)
    for i, (u, _) in enumerate(entries):
        if u == v:
            return entries[:i], entries[i + 1 :]
    raise MissingContextEvidence(f"{v.name} not in the variable context")


def prepare_subst(theory: Theory, d: Derivation, v: FreeVar, t_deriv: Derivation) -> Derivation:
    """Substitutes the head term of ``t_deriv`` (some  t : A  over Gamma) for
    the context entry ``v : A`` throughout ``d`` (over Gamma, v:A, Delta),
    yielding a derivation of the substituted statement over Gamma, Delta[t/v]."""
    t = _head_term(t_deriv)
    base_vctx = _ctxs(t_deriv.conclusion)[1]

    def sub_vctx(vctx: VarCtx) -> VarCtx:
        before, after = _split_vctx(vctx, v)
        return VarCtx(before + [(u, subst_free(ty, v, t)) for u, ty in after])

    def sub(x):
        return subst_free(x, v, t)

    def walk(d: Derivation) -> Derivation:
        data = d.data
        match d.rule:
            case "TT-Var":
                mctx, vctx, u = data
                if u == v:
                    _, after = _split_vctx(vctx, v)
                    out = t_deriv
                    # t_deriv may sit over a prefix of Gamma; first pad to Gamma
                    before, _ = _split_vctx(vctx, v)
                    pad = before[len(base_vctx.entries):]
                    for (w, ty) in pad:
                        out = weaken_var(theory, out, w, ty)
                    for (w, ty) in after:
                        out = weaken_var(theory, out, w, subst_free(ty, v, t))
                    return out
                return node(theory, "TT-Var", (mctx, sub_vctx(vctx), u), [])
            case "TT-Abstr" | "TT-Bdry-Abstr":
                mctx, vctx, atom = data
                kids = [walk(p) for p in d.premises]
                return node(theory, d.rule, (mctx, sub_vctx(vctx), atom), kids)
            case "TT-Meta" | "TT-Meta-Eco":
                mctx, vctx, m, terms = data
                kids = [walk(p) for p in d.premises]
                return node(
                    theory, d.rule, (mctx, sub_vctx(vctx), m, tuple(sub(x) for x in terms)), kids
                )
            case "TT-Meta-Congr" | "TT-Meta-Congr-Eco":
                mctx, vctx, m, ss, ts = data
                kids = [walk(p) for p in d.premises]
                return node(
                    theory,
                    d.rule,
                    (mctx, sub_vctx(vctx), m, tuple(sub(x) for x in ss), tuple(sub(x) for x in ts)),
                    kids,
                )
            case "TT-Specific" | "TT-Specific-Eco":
                mctx, vctx, rn, inst = data
                kids = [walk(p) for p in d.premises]
                new_inst = Instantiation([(k, sub(a)) for k, a in inst])
                return node(theory, d.rule, (mctx, sub_vctx(vctx), rn, new_inst), kids)
            case "TT-Congr" | "TT-Congr-Eco":
                mctx, vctx, rn, li, ri = data
                kids = [walk(p) for p in d.premises]
                return node(
                    theory,
                    d.rule,
                    (
                        mctx,
                        sub_vctx(vctx),
                        rn,
                        Instantiation([(k, sub(a)) for k, a in li]),
                        Instantiation([(k, sub(a)) for k, a in ri]),
                    ),
                    kids,
                )
            case "MCtx-Empty" | "MCtx-Extend" | "VCtx-Empty" | "VCtx-Extend":
                raise BadNode("substitution applies to judgement derivations")
            case _:
                mctx, vctx = data[0], data[1]
                kids = [walk(p) for p in d.premises]
                return node(theory, d.rule, (mctx, sub_vctx(vctx)) + data[2:], kids)

    d = _avoid_binding_clashes(theory, d, set(atoms_in_use(t)))
    return walk(d)


def _invert_abstraction(d: Derivation) -> tuple[Derivation, Derivation, FreeVar]:
    """Splits a derivation ending with (boundary) abstraction into the type
    derivation, the opened derivation, and the abstraction atom."""
    if d.rule not in ("TT-Abstr", "TT-Bdry-Abstr"):
        raise BadNode("expected a derivation ending with abstraction")
    return d.premises[0], d.premises[1], d.data[2]


def admissible_substitute(theory: Theory, d_abs: Derivation, d_t: Derivation) -> Derivation:
    """TT-Subst / TT-Bdry-Subst: from  {x:A} J  and  t : A  derive  J[t/x]."""
    ty_deriv, opened, atom = _invert_abstraction(d_abs)
    want = _want_plain_thesis(d_t.conclusion, IsTm, "TT-Subst")
    have = _want_plain_thesis(ty_deriv.conclusion, IsTy, "TT-Subst")
    if want.ty != have.ty:
        raise BadNode("substituted term does not live at the binder type")
    return prepare_subst(theory, opened, atom, d_t)


def conv_abstr(theory: Theory, d_abs: Derivation, d_b: Derivation, d_eq: Derivation) -> Derivation:
    """TT-Conv-Abstr: replace the outermost binder type along an equality."""
    jb = _want_plain_thesis(d_b.conclusion, IsTy, "TT-Conv-Abstr")
    eq = _want_plain_thesis(d_eq.conclusion, EqTy, "TT-Conv-Abstr")
    j_abs = _want_jdg(d_abs.conclusion, "TT-Conv-Abstr")
    if not j_abs.prefix or j_abs.prefix[0] != eq.lhs or jb.ty != eq.rhs:
        raise BadNode("TT-Conv-Abstr premises do not line up")
    mctx, vctx = _ctxs(d_abs.conclusion)
    taken = frozenset(_all_names(d_abs) | _all_names(d_b) | _all_names(d_eq))
    a = FreeVar(fresh_name("a", taken))
    w_abs = weaken_var(theory, d_abs, a, eq.rhs)
    var_a = tt_var(theory, mctx, vctx.extend(a, eq.rhs), a)
    eq_w = weaken_var(theory, d_eq, a, eq.rhs)
    conv_a = conv_tm(theory, var_a, eqty_sym(theory, eq_w))
    _, opened, atom = _invert_abstraction(w_abs)
    body = prepare_subst(theory, opened, atom, conv_a)
    return tt_abstr(theory, d_b, body, a)


# ---------------------------------------------------------------------------
# Simultaneous substitution along equalities


@dataclass
class EqSubst:
    """One substituted context entry: the atom, its s- and t-derivations and
    the equation  s == t  at the s-substituted type."""

    var: FreeVar
    s_deriv: Derivation
    t_deriv: Derivation
    eq_deriv: Derivation


def prepare_subst_eq(
    theory: Theory,
    d: Derivation,
    subs: Sequence[EqSubst],
    delta_eqs: Optional[dict[FreeVar, Derivation]] = None,
) -> tuple[Derivation, Derivation, Optional[Derivation]]:
    """Simultaneous equal substitution: from a derivation over
    Gamma, a_1:A_1', ..., a_n:A_n', Delta  and, for each i, derivations of
    s_i : A_i[s-prefix], t_i : A_i[t-prefix] and s_i == t_i : A_i[s-prefix],
    produce derivations over  Gamma, Delta[ss/as]  of  J[ss/as],  J[ts/as]
    and, for object judgements, the distributed equation  J[(ss==ts)/as].

    Boundary derivations yield (s-side, t-side, None).  ``delta_eqs`` carries
    the type equations  B[ss] == B[ts]  for the entries of Delta.
    """
    delta_eqs = dict(delta_eqs or {})
    if not subs:
        raise BadNode("prepare_subst_eq needs at least one substituted variable")
    svars = [e.var for e in subs]
    by_var = {e.var: e for e in subs}
    s_terms = {e.var: _head_term(e.s_deriv) for e in subs}
    t_terms = {e.var: _head_term(e.t_deriv) for e in subs}
    base_vctx = _ctxs(subs[0].s_deriv.conclusion)[1]
    base_len = len(base_vctx.entries)

    def sub_s(x):
        for v in svars:
            x = subst_free(x, v, s_terms[v])
        return x

    def sub_t(x):
        for v in svars:
            x = subst_free(x, v, t_terms[v])
        return x

    def sub_vctx(vctx: VarCtx) -> VarCtx:
        return VarCtx([(u, sub_s(ty)) for u, ty in vctx.entries if u not in by_var])

    def pad_entries(vctx: VarCtx) -> list[tuple[FreeVar, Expr]]:
        return list(sub_vctx(vctx).entries)[base_len:]

    def walk(d: Derivation, delta_eqs: dict) -> tuple[Derivation, Derivation, Optional[Derivation]]:
        data = d.data
        match d.rule:
            case "TT-Var":
                mctx, vctx, u = data
                new_vctx = sub_vctx(vctx)
                if u in by_var:
                    e = by_var[u]
                    d_s, d_t, d_eq = e.s_deriv, e.t_deriv, e.eq_deriv
                    for (w, ty) in pad_entries(vctx):
                        d_s = weaken_var(theory, d_s, w, ty)
                        d_t = weaken_var(theory, d_t, w, ty)
                        d_eq = weaken_var(theory, d_eq, w, ty)
                    return d_s, d_t, d_eq
                var_s = node(theory, "TT-Var", (mctx, new_vctx, u), [])
                refl = eqtm_refl(theory, var_s)
                if u in delta_eqs:
                    return var_s, conv_tm(theory, var_s, delta_eqs[u]), refl
                return var_s, var_s, refl
            case "TT-Abstr" | "TT-Bdry-Abstr":
                mctx, vctx, atom = data
                ty_s, ty_t, ty_eq = walk(d.premises[0], delta_eqs)
                new_ty_s = _want_plain_thesis(ty_s.conclusion, IsTy, "abstr").ty
                new_ty_t = _want_plain_thesis(ty_t.conclusion, IsTy, "abstr").ty
                assert ty_eq is not None
                eqs2 = {u: weaken_var(theory, e, atom, new_ty_s) for u, e in delta_eqs.items()}
                eqs2[atom] = weaken_var(theory, ty_eq, atom, new_ty_s)
                body_s, body_t, body_eq = walk(d.premises[1], eqs2)
                if d.rule == "TT-Bdry-Abstr":
                    raise BadNode(
                        "equal substitution across an abstracted boundary is not supported"
                    )
                out_s = tt_abstr(theory, ty_s, body_s, atom)
                abs_t = tt_abstr(theory, ty_s, body_t, atom)
                out_t = (
                    conv_abstr(theory, abs_t, ty_t, ty_eq) if new_ty_t != new_ty_s else abs_t
                )
                out_eq = tt_abstr(theory, ty_s, body_eq, atom) if body_eq is not None else None
                return out_s, out_t, out_eq
            case "TT-Meta" | "TT-Meta-Eco":
                mctx, vctx, m, terms = data
                n_terms = len(terms)
                triples = [walk(p, delta_eqs) for p in d.premises[:n_terms]]
                rest = [walk(p, delta_eqs) for p in d.premises[n_terms:]]
                new_vctx = sub_vctx(vctx)
                d_s = node(
                    theory, d.rule,
                    (mctx, new_vctx, m, tuple(sub_s(x) for x in terms)),
                    [x[0] for x in triples] + [r[0] for r in rest],
                )
                d_t = node(
                    theory, d.rule,
                    (mctx, new_vctx, m, tuple(sub_t(x) for x in terms)),
                    [x[1] for x in triples] + [r[1] for r in rest],
                )
                d_eq = None
                if boundary_arity(mctx[m]).cls.is_object:
                    if isinstance(mctx[m].body, IsTyB):
                        # type metavariables admit the full congruence rule
                        # without extra premises
                        d_eq = meta_congr(
                            theory, mctx, new_vctx, m,
                            [sub_s(x) for x in terms], [sub_t(x) for x in terms],
                            [x[0] for x in triples]
                            + [x[1] for x in triples]
                            + [x[2] for x in triples],
                        )
                    else:
                        d_eq = meta_congr(
                            theory, mctx, new_vctx, m,
                            [sub_s(x) for x in terms], [sub_t(x) for x in terms],
                            [x[2] for x in triples], economic=True,
                        )
                return d_s, d_t, d_eq
            case "TT-Meta-Congr" | "TT-Meta-Congr-Eco":
                mctx, vctx, m, ss, ts = data
                pairs = [walk(p, delta_eqs) for p in d.premises]
                new_vctx = sub_vctx(vctx)
                d_s = node(
                    theory, d.rule,
                    (mctx, new_vctx, m, tuple(sub_s(x) for x in ss), tuple(sub_s(x) for x in ts)),
                    [x[0] for x in pairs],
                )
                d_t = node(
                    theory, d.rule,
                    (mctx, new_vctx, m, tuple(sub_t(x) for x in ss), tuple(sub_t(x) for x in ts)),
                    [x[1] for x in pairs],
                )
                return d_s, d_t, None
            case "TT-Specific" | "TT-Specific-Eco":
                mctx, vctx, rn, inst = data
                triples = [walk(p, delta_eqs) for p in d.premises]
                new_vctx = sub_vctx(vctx)
                inst_s = Instantiation([(k, sub_s(a)) for k, a in inst])
                inst_t = Instantiation([(k, sub_t(a)) for k, a in inst])
                n = len(theory.rule(rn).rule.premises)
                d_s = node(theory, d.rule, (mctx, new_vctx, rn, inst_s), [x[0] for x in triples])
                d_t = node(theory, d.rule, (mctx, new_vctx, rn, inst_t), [x[1] for x in triples])
                trule = theory.rule(rn)
                d_eq = None
                if isinstance(trule.rule.conclusion, IsTy):
                    # type rules admit the full congruence rule without the
                    # extra type-equation premise
                    prem = (
                        [x[0] for x in triples[:n]]
                        + [x[1] for x in triples[:n]]
                        + [
                            triples[i][2]
                            for i, (_, bb) in enumerate(trule.rule.premises)
                            if boundary_arity(bb).cls.is_object
                        ]
                    )
                    d_eq = congruence(theory, mctx, new_vctx, rn, inst_s, inst_t, prem)
                elif trule.rule.is_object:
                    prem = []
                    for i, (mm, bb) in enumerate(trule.rule.premises):
                        if boundary_arity(bb).cls.is_object:
                            prem.append(triples[i][2])
                        else:
                            prem.append(triples[i][0])
                    d_eq = congruence(
                        theory, mctx, new_vctx, rn, inst_s, inst_t, prem, economic=True
                    )
                return d_s, d_t, d_eq
            case "TT-Congr" | "TT-Congr-Eco":
                mctx, vctx, rn, li, ri = data
                pairs = [walk(p, delta_eqs) for p in d.premises]
                new_vctx = sub_vctx(vctx)
                d_s = node(
                    theory, d.rule,
                    (mctx, new_vctx, rn,
                     Instantiation([(k, sub_s(a)) for k, a in li]),
                     Instantiation([(k, sub_s(a)) for k, a in ri])),
                    [x[0] for x in pairs],
                )
                d_t = node(
                    theory, d.rule,
                    (mctx, new_vctx, rn,
                     Instantiation([(k, sub_t(a)) for k, a in li]),
                     Instantiation([(k, sub_t(a)) for k, a in ri])),
                    [x[1] for x in pairs],
                )
                return d_s, d_t, None
            case "TT-Conv-Tm":
                mctx, vctx = data[0], data[1]
                t1 = walk(d.premises[0], delta_eqs)
                t2 = walk(d.premises[1], delta_eqs)
                new_vctx = sub_vctx(vctx)
                d_s = node(theory, d.rule, (mctx, new_vctx), [t1[0], t2[0]])
                d_t = node(theory, d.rule, (mctx, new_vctx), [t1[1], t2[1]])
                assert t1[2] is not None
                d_eq = conv_eqtm(theory, t1[2], t2[0])
                return d_s, d_t, d_eq
            case "TT-EqTy-Refl" | "TT-EqTy-Sym" | "TT-EqTy-Trans" | "TT-EqTm-Refl" \
                | "TT-EqTm-Sym" | "TT-EqTm-Trans" | "TT-Conv-EqTm" \
                | "TT-Bdry-Ty" | "TT-Bdry-Tm" | "TT-Bdry-EqTy" | "TT-Bdry-EqTm":
                mctx, vctx = data[0], data[1]
                pairs = [walk(p, delta_eqs) for p in d.premises]
                new_vctx = sub_vctx(vctx)
                d_s = node(theory, d.rule, (mctx, new_vctx) + data[2:], [x[0] for x in pairs])
                d_t = node(theory, d.rule, (mctx, new_vctx) + data[2:], [x[1] for x in pairs])
                return d_s, d_t, None
            case _:
                raise BadNode(f"prepare_subst_eq does not handle {d.rule}")

    names: set[str] = set()
    for e in subs:
        names |= set(atoms_in_use(_head_term(e.s_deriv))) | set(
            atoms_in_use(_head_term(e.t_deriv))
        )
    d = _avoid_binding_clashes(theory, d, names)
    return walk(d, delta_eqs)


def _open_abstractions(d: Derivation) -> tuple[list[tuple[Derivation, FreeVar]], Derivation]:
    """Peels a chain of abstraction nodes: [(type derivation, atom)...], body."""
    chain = []
    while d.rule in ("TT-Abstr", "TT-Bdry-Abstr"):
        chain.append((d.premises[0], d.data[2]))
        d = d.premises[1]
    return chain, d


def eq_subst_n(
    theory: Theory,
    d_abs: Derivation,
    s_derivs: Sequence[Derivation],
    t_derivs: Sequence[Derivation],
    eq_derivs: Sequence[Derivation],
) -> Derivation:
    """Iterated equal substitution into an abstracted object judgement:
    from  {xs:As} plug(B, e)  and triples  s_i, t_i, s_i == t_i  derive
    plug(B[ss], e[ss] == e[ts])."""
    m = len(s_derivs)
    if m == 0:
        j = _want_jdg(d_abs.conclusion, "eq_subst_n")
        if j.prefix:
            raise BadNode("terms do not exhaust the abstraction")
        if isinstance(j.body, IsTy):
            return eqty_refl(theory, d_abs)
        if isinstance(j.body, IsTm):
            return eqtm_refl(theory, d_abs)
        raise NotObjectJudgement("eq_subst_n needs an object judgement")
    chain, body = _open_abstractions(d_abs)
    if len(chain) < m:
        raise BadNode("more terms than binders")
    # Re-abstract any surplus inner binders back onto the body first.
    for ty_d, atom in reversed(chain[m:]):
        body = tt_abstr(theory, ty_d, body, atom)
    subs = [
        EqSubst(chain[i][1], s_derivs[i], t_derivs[i], eq_derivs[i]) for i in range(m)
    ]
    _, _, d_eq = prepare_subst_eq(theory, body, subs)
    if d_eq is None:
        raise NotObjectJudgement("eq_subst_n needs an object judgement")
    return d_eq


def subst_eqty(
    theory: Theory,
    d_abs: Derivation,
    s_derivs: Sequence[Derivation],
    t_derivs: Sequence[Derivation],
    eq_derivs: Sequence[Derivation],
) -> Derivation:
    """TT-Subst-EqTy / TT-Subst-EqTm: equal substitution of the outermost
    binders, leaving any surplus abstraction in place."""
    m = len(s_derivs)
    chain, body = _open_abstractions(d_abs)
    if len(chain) < m:
        raise BadNode("more terms than binders")
    for ty_d, atom in reversed(chain[m:]):
        body = tt_abstr(theory, ty_d, body, atom)
    subs = [
        EqSubst(chain[i][1], s_derivs[i], t_derivs[i], eq_derivs[i]) for i in range(m)
    ]
    _, _, d_eq = prepare_subst_eq(theory, body, subs)
    if d_eq is None:
        raise NotObjectJudgement("equal substitution needs an object judgement")
    return d_eq


subst_eqtm = subst_eqty


# ---------------------------------------------------------------------------
# Admissible instantiation


def admissible_instantiate(
    theory: Theory,
    inst: Instantiation,
    inst_derivs: dict[MetaName, Derivation],
    d: Derivation,
    target_mctx: MetaCtx,
    target_vctx: VarCtx,
) -> Derivation:
    """From a derivable instantiation of ``d``'s metavariable context over
    ``target_mctx; target_vctx`` and a derivation  Xi; Gamma |- J  (with the
    same Gamma), produce a derivation of  Theta; Gamma |- I*J.

    ``inst_derivs[m]`` must derive  plug(<I>_i B_i, I(m))  over the target
    context.
    """

    src_mctx, src_vctx = _ctxs(d.conclusion)
    if src_vctx != target_vctx:
        raise MissingContextEvidence("source and target variable contexts must agree")

    names: set[str] = set()
    for _, arg in inst:
        names |= set(atoms_in_use(arg))
    d = _avoid_binding_clashes(theory, d, names)

    def walk(d: Derivation, delta: list[tuple[FreeVar, Expr]]) -> Derivation:
        data = d.data
        new_vctx = VarCtx(list(target_vctx.entries) + [(u, act(inst, ty)) for u, ty in delta])
        match d.rule:
            case "TT-Var":
                u = data[2]
                return node(theory, "TT-Var", (target_mctx, new_vctx, u), [])
            case "TT-Abstr" | "TT-Bdry-Abstr":
                atom = data[2]
                ty_k = walk(d.premises[0], delta)
                src_ty = _want_plain_thesis(d.premises[0].conclusion, IsTy, "abstr").ty
                body_k = walk(d.premises[1], delta + [(atom, src_ty)])
                return node(theory, d.rule, (target_mctx, new_vctx, atom), [ty_k, body_k])
            case "TT-Meta" | "TT-Meta-Eco":
                m, terms = data[2], data[3]
                n_terms = len(terms)
                term_kids = [walk(p, delta) for p in d.premises[:n_terms]]
                base = inst_derivs[m]
                for u, ty in delta:
                    base = weaken_var(theory, base, u, act(inst, ty))
                out = base
                for tk in term_kids:
                    out = admissible_substitute(theory, out, tk)
                return out
            case "TT-Meta-Congr":
                m, ss, ts = data[2], data[3], data[4]
                k = len(ss)
                s_kids = [walk(p, delta) for p in d.premises[:k]]
                t_kids = [walk(p, delta) for p in d.premises[k : 2 * k]]
                e_kids = [walk(p, delta) for p in d.premises[2 * k : 3 * k]]
                base = inst_derivs[m]
                for u, ty in delta:
                    base = weaken_var(theory, base, u, act(inst, ty))
                return eq_subst_n(theory, base, s_kids, t_kids, e_kids)
            case "TT-Meta-Congr-Eco":
                raise BadNode(
                    "instantiation across economic metavariable congruence is not supported; "
                    "use the full rule"
                )
            case "TT-Specific" | "TT-Specific-Eco":
                rn, k_inst = data[2], data[3]
                kids = [walk(p, delta) for p in d.premises]
                new_inst = Instantiation([(k2, act(inst, a)) for k2, a in k_inst])
                return node(theory, d.rule, (target_mctx, new_vctx, rn, new_inst), kids)
            case "TT-Congr" | "TT-Congr-Eco":
                rn, li, ri = data[2], data[3], data[4]
                kids = [walk(p, delta) for p in d.premises]
                nli = Instantiation([(k2, act(inst, a)) for k2, a in li])
                nri = Instantiation([(k2, act(inst, a)) for k2, a in ri])
                return node(theory, d.rule, (target_mctx, new_vctx, rn, nli, nri), kids)
            case "MCtx-Empty" | "MCtx-Extend" | "VCtx-Empty" | "VCtx-Extend":
                raise BadNode("instantiation applies to judgement derivations")
            case _:
                kids = [walk(p, delta) for p in d.premises]
                return node(theory, d.rule, (target_mctx, new_vctx) + data[2:], kids)

    return walk(d, [])


# ---------------------------------------------------------------------------
# Presuppositions


def presuppositions(
    theory: Theory,
    d: Derivation,
    mctx_deriv: Derivation,
    vctx_deriv: Derivation,
) -> Derivation:
    """From a derivation of  plug(B, e)  and well-formedness evidence for its
    contexts, a derivation of the boundary  B."""

    have_m = mctx_deriv.conclusion
    if not isinstance(have_m, MctxWF) or have_m.mctx != _ctxs(d.conclusion)[0]:
        raise MissingContextEvidence("metavariable-context evidence does not match")
    have_v = vctx_deriv.conclusion
    if not isinstance(have_v, VctxWF) or have_v.vctx != _ctxs(d.conclusion)[1]:
        raise MissingContextEvidence("variable-context evidence does not match")

    def walk(d: Derivation, vctx_ev: Derivation) -> Derivation:
        mctx, vctx = _ctxs(d.conclusion)
        match d.rule:
            case "TT-Var":
                v = d.data[2]
                return bdry_tm(theory, vctx_entry_type(theory, vctx_ev, v))
            case "TT-Meta":
                return d.premises[len(d.data[3])]
            case "TT-Meta-Eco":
                m = d.data[2]
                b_deriv = mctx_entry_boundary(theory, mctx_deriv, m)
                b_deriv = weaken_vars(theory, b_deriv, list(vctx.entries))
                out = b_deriv
                for tk in d.premises:
                    out = admissible_substitute(theory, out, tk)
                return out
            case "TT-Meta-Congr":
                return _presup_meta_congr(d, vctx_ev)
            case "TT-Abstr":
                ty_k, body_k, atom = d.premises[0], d.premises[1], d.data[2]
                ev2 = vctx_extend(theory, vctx_ev, ty_k, atom)
                inner = walk(body_k, ev2)
                return bdry_abstr(theory, ty_k, inner, atom)
            case "TT-Specific":
                return d.premises[-1]
            case "TT-Specific-Eco":
                return _presup_specific_eco(d)
            case "TT-Congr":
                return _presup_congr(d, vctx_ev)
            case "TT-EqTy-Refl":
                a = d.premises[0]
                return bdry_eqty(theory, a, a)
            case "TT-EqTy-Sym":
                inner = walk(d.premises[0], vctx_ev)
                return bdry_eqty(theory, inner.premises[1], inner.premises[0])
            case "TT-EqTy-Trans":
                b1 = walk(d.premises[0], vctx_ev)
                b2 = walk(d.premises[1], vctx_ev)
                return bdry_eqty(theory, b1.premises[0], b2.premises[1])
            case "TT-EqTm-Refl":
                t = d.premises[0]
                b = walk(t, vctx_ev)
                if b.rule != "TT-Bdry-Tm":
                    raise BadNode("expected a term boundary")
                return bdry_eqtm(theory, b.premises[0], t, t)
            case "TT-EqTm-Sym":
                inner = walk(d.premises[0], vctx_ev)
                return bdry_eqtm(theory, inner.premises[0], inner.premises[2], inner.premises[1])
            case "TT-EqTm-Trans":
                b1 = walk(d.premises[0], vctx_ev)
                b2 = walk(d.premises[1], vctx_ev)
                return bdry_eqtm(theory, b1.premises[0], b1.premises[1], b2.premises[2])
            case "TT-Conv-Tm":
                eq_b = walk(d.premises[1], vctx_ev)
                return bdry_tm(theory, eq_b.premises[1])
            case "TT-Conv-EqTm":
                eq_b = walk(d.premises[0], vctx_ev)
                ty_b = walk(d.premises[1], vctx_ev)
                s_conv = conv_tm(theory, eq_b.premises[1], d.premises[1])
                t_conv = conv_tm(theory, eq_b.premises[2], d.premises[1])
                return bdry_eqtm(theory, ty_b.premises[1], s_conv, t_conv)
            case _:
                raise BadNode(f"presuppositions does not handle {d.rule}")

    def _presup_meta_congr(d: Derivation, vctx_ev: Derivation) -> Derivation:
        mctx, vctx = _ctxs(d.conclusion)
        m = d.data[2]
        bdry = mctx[m]
        k = len(bdry.prefix)
        s_kids = list(d.premises[:k])
        t_kids = list(d.premises[k : 2 * k])
        b_deriv = mctx_entry_boundary(theory, mctx_deriv, m)
        b_deriv = weaken_vars(theory, b_deriv, list(vctx.entries))
        bdry_s = b_deriv
        for sk in s_kids:
            bdry_s = admissible_substitute(theory, bdry_s, sk)
        bdry_t = b_deriv
        for tk in t_kids:
            bdry_t = admissible_substitute(theory, bdry_t, tk)
        left = tt_meta(theory, mctx, vctx, m, s_kids, bdry_s)
        right = tt_meta(theory, mctx, vctx, m, t_kids, bdry_t)
        if isinstance(bdry.body, IsTyB):
            return bdry_eqty(theory, left, right)
        type_eq = d.premises[-1]  # C[ss] == C[ts]
        if bdry_s.rule != "TT-Bdry-Tm":
            raise BadNode("metavariable boundary should be a term boundary")
        right_conv = conv_tm(theory, right, eqty_sym(theory, type_eq))
        return bdry_eqtm(theory, bdry_s.premises[0], left, right_conv)

    def _presup_specific_eco(d: Derivation) -> Derivation:
        mctx, vctx = _ctxs(d.conclusion)
        rn, inst = d.data[2], d.data[3]
        witness = _finitary_boundary_witness(theory, rn)
        witness = weaken_vars(theory, witness, list(vctx.entries))
        inst_derivs = {
            m: p for (m, _), p in zip(theory.rule(rn).rule.premises, d.premises)
        }
        return admissible_instantiate(theory, inst, inst_derivs, witness, mctx, vctx)

    def _presup_congr(d: Derivation, vctx_ev: Derivation) -> Derivation:
        mctx, vctx = _ctxs(d.conclusion)
        rn, li, ri = d.data[2], d.data[3], d.data[4]
        trule = theory.rule(rn)
        n = len(trule.rule.premises)
        left_kids = list(d.premises[:n])
        right_kids = list(d.premises[n : 2 * n])
        left_node = specific(theory, mctx, vctx, rn, li, left_kids)
        right_node = specific(theory, mctx, vctx, rn, ri, right_kids)
        if isinstance(trule.rule.conclusion, IsTy):
            return bdry_eqty(theory, left_node, right_node)
        type_eq = d.premises[-1]
        c_ty_b = walk(type_eq, vctx_ev)
        right_conv = conv_tm(theory, right_node, eqty_sym(theory, type_eq))
        return bdry_eqtm(theory, c_ty_b.premises[0], left_node, right_conv)

    return walk(d, vctx_deriv)


def _finitary_boundary_witness(theory: Theory, rule_name: str) -> Derivation:
    if theory.finitary_witnesses is None:
        raise MissingContextEvidence("theory has not passed the finitary check")
    w = theory.finitary_witnesses.get(rule_name)
    if w is None:
        raise MissingContextEvidence(f"no finitary witness for rule {rule_name}")
    return w["boundary"]


# ---------------------------------------------------------------------------
# Natural types and inversion


def natural_type(theory: Theory, mctx: MetaCtx, vctx: VarCtx, t: Expr) -> Expr:
    """The type syntactically recoverable from a term's head."""
    match t:
        case FreeVar():
            if t not in vctx:
                raise UnknownVar(t.name)
            return vctx[t]
        case MetaApp(meta=m, args=args):
            if m in mctx:
                b = mctx[m]
            elif m.annotation is not None:
                b = m.annotation
            else:
                raise UnknownVar(m.name)
            if not isinstance(b.body, IsTmB):
                raise NotObjectJudgement(f"{m.name} is not a term metavariable")
            return subst_bound_many(b.body.ty, list(args))
        case SymbolApp(symbol=s, args=args):
            trule = theory.symbol_rule_for(s)
            concl = trule.rule.conclusion
            if not isinstance(concl, IsTm):
                raise NoSymbolRule(f"{s} is not a term symbol")
            inst = Instantiation([(m, a) for (m, _), a in zip(trule.rule.premises, args)])
            return act(inst, concl.ty)
    raise NotObjectJudgement(f"no natural type for {t!r}")


def invert(theory: Theory, d: Derivation) -> Derivation:
    """Returns a derivation of the same conclusion ending with TT-Var,
    TT-Meta, a symbol rule, TT-Abstr, or a single trailing conversion to the
    natural type."""
    j = _want_jdg(d.conclusion, "invert")
    if not j.prefix and not isinstance(j.body, (IsTy, IsTm)):
        raise NotObjectJudgement("inversion applies to object judgements")
    if d.rule != "TT-Conv-Tm":
        return d
    inner = invert(theory, d.premises[0])
    eq = d.premises[1]
    target = _want_plain_thesis(d.conclusion, IsTm, "invert").ty
    if inner.rule == "TT-Conv-Tm":
        stump, eq0 = inner.premises[0], inner.premises[1]
        nat = _want_plain_thesis(stump.conclusion, IsTm, "invert").ty
        if nat == target:
            return stump
        return conv_tm(theory, stump, eqty_trans(theory, eq0, eq))
    nat = _want_plain_thesis(inner.conclusion, IsTm, "invert").ty
    if nat == target:
        return inner
    return conv_tm(theory, inner, eq)


def uniqueness_of_typing(
    theory: Theory,
    d1: Derivation,
    d2: Derivation,
    mctx_deriv: Derivation,
    vctx_deriv: Derivation,
) -> Derivation:
    """From two typings  t : A  and  t : B  derive  A == B."""
    i1 = invert(theory, d1)
    i2 = invert(theory, d2)

    def eq_to_nat(inv: Derivation, orig: Derivation) -> Derivation:
        if inv.rule == "TT-Conv-Tm":
            return inv.premises[1]
        b = presuppositions(theory, orig, mctx_deriv, vctx_deriv)
        return eqty_refl(theory, b.premises[0])

    e1 = eq_to_nat(i1, d1)
    e2 = eq_to_nat(i2, d2)
    return eqty_trans(theory, eqty_sym(theory, e1), e2)


# ---------------------------------------------------------------------------
# Equal instantiations (admissibility of instantiation equality)


def open_with_atoms(theory: Theory, d_abs: Derivation) -> tuple[list[tuple[Derivation, FreeVar]], Derivation]:
    """Public view of the abstraction chain of a constructed derivation."""
    return _open_abstractions(d_abs)


def _open_one_with(theory: Theory, d_abs: Derivation, var_d: Derivation) -> Derivation:
    """Opens the outermost binder of an abstracted derivation with a variable
    derivation (a TT-Var over the extended context)."""
    _, opened, atom = _invert_abstraction(d_abs)
    return prepare_subst(theory, opened, atom, var_d)


def trans_under_abstraction(theory: Theory, e1: Derivation, e2: Derivation) -> Derivation:
    """Chains two abstracted equations by transitivity, opening the first
    derivation's binders and aligning the second by substitution."""
    chain1, body1 = _open_abstractions(e1)
    if not chain1:
        lj = _want_jdg(e1.conclusion, "trans")
        if isinstance(lj.body, EqTy):
            return eqty_trans(theory, e1, e2)
        return eqtm_trans(theory, e1, e2)
    aligned = e2
    for ty_d, atom in chain1:
        m2, v2 = _ctxs(aligned.conclusion)
        ty = _want_plain_thesis(ty_d.conclusion, IsTy, "trans").ty
        var_d = tt_var(theory, m2, v2.extend(atom, ty), atom)
        aligned = _open_one_with(theory, aligned, var_d)
    inner = trans_under_abstraction(theory, body1, aligned)
    for ty_d, atom in reversed(chain1):
        inner = tt_abstr(theory, ty_d, inner, atom)
    return inner


def subst_eq_sides(
    theory: Theory,
    d_eq_abs: Derivation,
    d_rhs_abs: Derivation,
    s_deriv: Derivation,
    t_deriv: Derivation,
    eq_deriv: Derivation,
) -> Derivation:
    """From  {x:A}{ys} C == D  (and  {x:A}{ys} D-type judgement) with
    s, t, s == t : A  derive  {ys[s/x]} C[s/x] == D[t/x]."""
    e1 = admissible_substitute(theory, d_eq_abs, s_deriv)
    e2 = subst_eqty(theory, d_rhs_abs, [s_deriv], [t_deriv], [eq_deriv])
    return trans_under_abstraction(theory, e1, e2)


@dataclass
class EqInstEntry:
    """Per-metavariable data for equal instantiation: the two arguments'
    fills and the equation, plus the right argument refitted to the left
    instantiation's boundary."""

    meta: MetaName
    i_deriv: Derivation
    j_deriv: Derivation
    j_at_i_deriv: Derivation
    eq_deriv: Optional[Derivation]


def eq_instantiate(
    theory: Theory,
    entries: Sequence[EqInstEntry],
    d: Derivation,
    target_mctx: MetaCtx,
    target_vctx: VarCtx,
    source_mctx_deriv: Derivation,
) -> tuple[Derivation, Derivation, Optional[Derivation]]:
    """Admissibility of instantiation equality: given judgementally equal
    derivable instantiations I and J of ``d``'s metavariable context, produce
    derivations of  I*J,  J*J  and (object judgements)  (I==J)*J  over the
    target context."""

    by_meta = {e.meta: e for e in entries}
    inst_i = Instantiation([(e.meta, _argument_of(e.i_deriv)) for e in entries])
    inst_j = Instantiation([(e.meta, _argument_of(e.j_deriv)) for e in entries])

    src_mctx = _ctxs(d.conclusion)[0]

    names: set[str] = set()
    for e in entries:
        names |= set(atoms_in_use(_argument_of(e.i_deriv))) | set(
            atoms_in_use(_argument_of(e.j_deriv))
        )
    d = _avoid_binding_clashes(theory, d, names)

    def abstracted_types_of(m: MetaName) -> list[Derivation]:
        """The binder-type derivations {x_<j} A_j-type of m's boundary, from
        the metavariable-context evidence, weakened to the target context."""
        b_deriv = mctx_entry_boundary(theory, source_mctx_deriv, m)
        b_deriv = weaken_vars(theory, b_deriv, list(target_vctx.entries))
        chain, _ = _open_abstractions(b_deriv)
        out = []
        for j in range(len(chain)):
            cur = chain[j][0]
            for k in reversed(range(j)):
                cur = tt_abstr(theory, chain[k][0], cur, chain[k][1])
            out.append(cur)
        return out

    def walk(d: Derivation, delta: list, delta_eqs: dict):
        data = d.data
        new_vctx = VarCtx(
            list(target_vctx.entries) + [(u, act(inst_i, ty)) for u, ty in delta]
        )
        match d.rule:
            case "TT-Var":
                u = data[2]
                var_d = node(theory, "TT-Var", (target_mctx, new_vctx, u), [])
                refl = eqtm_refl(theory, var_d)
                if u in delta_eqs:
                    return var_d, conv_tm(theory, var_d, delta_eqs[u]), refl
                return var_d, var_d, refl
            case "TT-Abstr" | "TT-Bdry-Abstr":
                atom = data[2]
                ty_i, ty_j, ty_eq = walk(d.premises[0], delta, delta_eqs)
                src_ty = _want_plain_thesis(d.premises[0].conclusion, IsTy, "abstr").ty
                new_ty_i = _want_plain_thesis(ty_i.conclusion, IsTy, "abstr").ty
                new_ty_j = _want_plain_thesis(ty_j.conclusion, IsTy, "abstr").ty
                eqs2 = {
                    u: weaken_var(theory, e, atom, new_ty_i) for u, e in delta_eqs.items()
                }
                assert ty_eq is not None
                eqs2[atom] = weaken_var(theory, ty_eq, atom, new_ty_i)
                body_i, body_j, body_eq = walk(
                    d.premises[1], delta + [(atom, src_ty)], eqs2
                )
                if d.rule == "TT-Bdry-Abstr":
                    raise BadNode(
                        "equal instantiation across an abstracted boundary is not supported"
                    )
                d_i = tt_abstr(theory, ty_i, body_i, atom)
                abs_j = tt_abstr(theory, ty_i, body_j, atom)
                d_j = (
                    conv_abstr(theory, abs_j, ty_j, ty_eq)
                    if new_ty_j != new_ty_i
                    else abs_j
                )
                d_eq = tt_abstr(theory, ty_i, body_eq, atom) if body_eq is not None else None
                return d_i, d_j, d_eq
            case "TT-Meta" | "TT-Meta-Eco":
                m, terms = data[2], data[3]
                e = by_meta[m]
                n_terms = len(terms)
                triples = [walk(p, delta, delta_eqs) for p in d.premises[:n_terms]]
                pad = [(u, act(inst_i, ty)) for u, ty in delta]
                base_i = weaken_vars(theory, e.i_deriv, pad)
                base_j = weaken_vars(theory, e.j_deriv, pad)
                base_jat = weaken_vars(theory, e.j_at_i_deriv, pad)
                d_i = base_i
                for tr_ in triples:
                    d_i = admissible_substitute(theory, d_i, tr_[0])
                d_j = base_j
                for tr_ in triples:
                    d_j = admissible_substitute(theory, d_j, tr_[1])
                d_eq = None
                if boundary_arity(src_mctx[m]).cls.is_object:
                    assert e.eq_deriv is not None
                    eq_w = weaken_vars(theory, e.eq_deriv, pad)
                    if n_terms == 0:
                        return d_i, d_j, eq_w
                    # left piece: (e_I == e_J)[I*ts]
                    left = eq_w
                    for tr_ in triples:
                        left = admissible_substitute(theory, left, tr_[0])
                    # right piece: e_J[I*ts] == e_J[J*ts] by equal substitution
                    types = abstracted_types_of(m)
                    conv_js = []
                    for j in range(n_terms):
                        tj = _avoid_binding_clashes(
                            theory, types[j], {u.name for u, _ in delta} | names
                        )
                        _, _, ty_eq_abs = walk_external(tj, delta, delta_eqs)
                        ty_eq = ty_eq_abs
                        for k in range(j):
                            ty_eq = subst_eq_sides_step(
                                theory, ty_eq, triples[k][0], conv_js[k], triples[k][2]
                            )
                        conv_js.append(conv_tm(theory, triples[j][1], eqty_sym(theory, ty_eq)))
                    right = eq_subst_n(
                        theory,
                        base_jat,
                        [tr_[0] for tr_ in triples],
                        conv_js,
                        [tr_[2] for tr_ in triples],
                    )
                    d_eq = _chain_equations(theory, left, right)
                return d_i, d_j, d_eq
            case "TT-Meta-Congr" | "TT-Meta-Congr-Eco":
                raise BadNode(
                    "equal instantiation across metavariable congruence is not supported"
                )
            case "TT-Specific" | "TT-Specific-Eco":
                rn, k_inst = data[2], data[3]
                trule = theory.rule(rn)
                n = len(trule.rule.premises)
                triples = [walk(p, delta, delta_eqs) for p in d.premises]
                ki = Instantiation([(k2, act(inst_i, a)) for k2, a in k_inst])
                kj = Instantiation([(k2, act(inst_j, a)) for k2, a in k_inst])
                d_i = node(theory, d.rule, (target_mctx, new_vctx, rn, ki), [x[0] for x in triples])
                d_j = node(theory, d.rule, (target_mctx, new_vctx, rn, kj), [x[1] for x in triples])
                d_eq = None
                if isinstance(trule.rule.conclusion, IsTy):
                    prem = (
                        [x[0] for x in triples[:n]]
                        + [x[1] for x in triples[:n]]
                        + [
                            triples[i][2]
                            for i, (_, bb) in enumerate(trule.rule.premises)
                            if boundary_arity(bb).cls.is_object
                        ]
                    )
                    d_eq = congruence(theory, target_mctx, new_vctx, rn, ki, kj, prem)
                elif trule.rule.is_object:
                    prem = []
                    for i, (_, bb) in enumerate(trule.rule.premises):
                        if boundary_arity(bb).cls.is_object:
                            prem.append(triples[i][2])
                        else:
                            prem.append(triples[i][0])
                    d_eq = congruence(
                        theory, target_mctx, new_vctx, rn, ki, kj, prem, economic=True
                    )
                return d_i, d_j, d_eq
            case "TT-Congr" | "TT-Congr-Eco":
                rn, li, ri = data[2], data[3], data[4]
                triples = [walk(p, delta, delta_eqs) for p in d.premises]
                nli_i = Instantiation([(k2, act(inst_i, a)) for k2, a in li])
                nri_i = Instantiation([(k2, act(inst_i, a)) for k2, a in ri])
                nli_j = Instantiation([(k2, act(inst_j, a)) for k2, a in li])
                nri_j = Instantiation([(k2, act(inst_j, a)) for k2, a in ri])
                d_i = node(theory, d.rule, (target_mctx, new_vctx, rn, nli_i, nri_i), [x[0] for x in triples])
                d_j = node(theory, d.rule, (target_mctx, new_vctx, rn, nli_j, nri_j), [x[1] for x in triples])
                return d_i, d_j, None
            case "TT-Conv-Tm":
                t1 = walk(d.premises[0], delta, delta_eqs)
                t2 = walk(d.premises[1], delta, delta_eqs)
                d_i = node(theory, d.rule, (target_mctx, new_vctx), [t1[0], t2[0]])
                d_j = node(theory, d.rule, (target_mctx, new_vctx), [t1[1], t2[1]])
                assert t1[2] is not None
                d_eq = conv_eqtm(theory, t1[2], t2[0])
                return d_i, d_j, d_eq
            case "TT-EqTy-Refl" | "TT-EqTy-Sym" | "TT-EqTy-Trans" | "TT-EqTm-Refl" \
                | "TT-EqTm-Sym" | "TT-EqTm-Trans" | "TT-Conv-EqTm" \
                | "TT-Bdry-Ty" | "TT-Bdry-Tm" | "TT-Bdry-EqTy" | "TT-Bdry-EqTm":
                pairs = [walk(p, delta, delta_eqs) for p in d.premises]
                d_i = node(theory, d.rule, (target_mctx, new_vctx) + data[2:], [x[0] for x in pairs])
                d_j = node(theory, d.rule, (target_mctx, new_vctx) + data[2:], [x[1] for x in pairs])
                d_eq = None
                if d.rule == "TT-Bdry-Tm":
                    d_eq = pairs[0][2]
                return d_i, d_j, d_eq
            case _:
                raise BadNode(f"eq_instantiate does not handle {d.rule}")

    def walk_external(dd: Derivation, delta, delta_eqs):
        return walk(dd, delta, delta_eqs)

    def subst_eq_sides_step(theory, ty_eq_abs, s_d, t_d, eq_d):
        raise BadNode("mixed-prefix type equations need subst_eq_sides; not supported")

    def _chain_equations(theory, left, right):
        lj = _want_jdg(left.conclusion, "chain")
        if isinstance(lj.body, EqTy):
            return eqty_trans(theory, left, right)
        return eqtm_trans(theory, left, right)

    return walk(d, [], {})


def _argument_of(d: Derivation) -> "object":
    from .judgements import unfill

    return unfill(_want_jdg(d.conclusion, "instantiation entry"))[1]
