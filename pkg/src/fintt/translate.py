"""Translations between the contexted and context-free presentations.

cf -> tt: erase the judgement, collect its annotated atoms into a suitable
context (closed under annotation dependence), and rebuild a checkable tt
derivation syntax-directedly from the certified payload.

tt -> cf: follow the derivation, labelling context entries with certified
cf annotations, rectifying heads with boundary conversion where erasure
leaves slack.

Equational goals on the cf -> tt side are reconstructed, not replayed:
certificates carry no derivations, so the reconstructor closes equations
under reflexivity and specific equality rules, using the assumption set of
the goal to resolve premise metavariables that the conclusion does not
determine (such as the proof term of an equality-reflection instance).
"""

from __future__ import annotations

from typing import Optional, Sequence

from . import cf_engine as cf
from . import tt_engine as tt
from .derive import DeriveError, match_expr
from .errors import (
    CyclicAnnotation,
    KernelError,
    NonStandardTheory,
    UncheckableDerivation,
    UnsuitableContext,
)
from .instantiation import Instantiation, act
from .judgements import (
    EMPTY_METAS,
    EMPTY_VARS,
    MetaCtx,
    VarCtx,
    fill,
    instantiate_prefix,
    open_judgement,
    plain,
)
from .syntax import (
    Abstr,
    Abstracted,
    AssumptionSet,
    DUMMY,
    EqTm,
    EqTmB,
    EqTy,
    EqTyB,
    Expr,
    ExprArg,
    FreeVar,
    IsTm,
    IsTmB,
    IsTy,
    IsTyB,
    MetaApp,
    MetaName,
    SymbolApp,
    asm,
    atoms_in_use,
    boundary_arity,
    double_erase,
    erase,
    fresh_name,
    fv,
    mv,
    strip_conversions,
    conversion_residue,
)
from .theory import RawRule, Theory, TheoryRule


# ---------------------------------------------------------------------------
# Suitable contexts


def _dependence_order(items, deps):
    """Stable topological order by (dependence depth, name)."""
    depth: dict = {}

    def depth_of(x, seen=()):
        if x in depth:
            return depth[x]
        if x in seen:
            raise CyclicAnnotation(f"annotation cycle through {x!r}")
        ds = deps(x)
        d = 0 if not ds else 1 + max(depth_of(y, seen + (x,)) for y in ds)
        depth[x] = d
        return d

    for x in items:
        depth_of(x)
    return sorted(items, key=lambda x: (depth[x], x.name))


def dependence_closure(
    metas: Sequence[MetaName], variables: Sequence[FreeVar]
) -> tuple[list[MetaName], list[FreeVar]]:
    """Closes the given atom sets under annotation dependence and returns
    them in a deterministic order extending the dependence order."""
    mset: set[MetaName] = set()
    vset: set[FreeVar] = set()
    todo_m = list(metas)
    todo_v = list(variables)
    while todo_m or todo_v:
        while todo_m:
            m = todo_m.pop()
            if m in mset:
                continue
            mset.add(m)
            if m.annotation is not None:
                todo_m.extend(mv(m.annotation))
                todo_v.extend(fv(m.annotation))
        while todo_v:
            v = todo_v.pop()
            if v in vset:
                continue
            vset.add(v)
            if v.annotation is not None:
                todo_m.extend(mv(v.annotation))
                todo_v.extend(fv(v.annotation))
    ms = _dependence_order(
        mset, lambda m: (mv(m.annotation) | set()) if m.annotation else set()
    )
    vs = _dependence_order(
        vset, lambda v: set(fv(v.annotation)) if v.annotation else set()
    )
    return ms, vs


def suitable_context(
    metas: Sequence[MetaName], variables: Sequence[FreeVar]
) -> tuple[MetaCtx, VarCtx]:
    """The suitable tt context for the given cf atoms: domains are the
    dependence closures, entries the erased annotations."""
    ms, vs = dependence_closure(metas, variables)
    for m in ms:
        if m.annotation is None:
            raise UnsuitableContext(f"{m.name} carries no boundary annotation")
    for v in vs:
        if v.annotation is None:
            raise UnsuitableContext(f"{v.name} carries no type annotation")
    mctx = MetaCtx([(m, erase(m.annotation)) for m in ms])
    vctx = VarCtx([(v, erase(v.annotation)) for v in vs])
    return mctx, vctx


def cf_theory_to_tt(theory: Theory) -> Theory:
    """Rule-wise erasure of a cf theory; annotated atoms become tt names."""
    if theory.flavor != "cf":
        raise UnsuitableContext("expected a cf theory")
    rules = []
    for r in theory.rules:
        prem = tuple((m, erase(b)) for m, b in r.rule.premises)
        rules.append(
            TheoryRule(r.name, RawRule(prem, erase(r.rule.conclusion)), r.symbol_for)
        )
    return Theory(theory.signature, rules, "tt")


# ---------------------------------------------------------------------------
# cf -> tt: judgement reconstruction


class CfToTT:
    """Rebuilds tt derivations of erased certified judgements over a
    suitable context.  ``tt_theory`` is the contexted counterpart the
    derivations check against (the canonical contexted elaboration, or the
    rule-wise erasure of the cf theory)."""

    def __init__(self, cf_theory: Theory, tt_theory: Theory):
        self.cf = cf_theory
        self.tt = tt_theory

    # -- entry points ------------------------------------------------------

    def judgement(self, cert: cf.CertifiedJudgement, ctx=None):
        payload = cert.payload
        if ctx is None:
            mctx, vctx = suitable_context(sorted(mv(payload), key=lambda m: m.name),
                                          sorted(fv(payload), key=lambda v: v.name))
        else:
            mctx, vctx = ctx
            need_m, need_v = dependence_closure(list(mv(payload)), list(fv(payload)))
            if any(m not in mctx for m in need_m) or any(v not in vctx for v in need_v):
                raise UnsuitableContext("context does not cover the judgement")
        d = self._jdg(mctx, vctx, payload)
        return mctx, vctx, d

    def context_evidence(self, mctx: MetaCtx, vctx: VarCtx):
        """Well-formedness derivations for a suitable context, built by
        reconstructing each annotation's type/boundary derivation."""
        m_d = tt.mctx_empty(self.tt)
        sofar = EMPTY_METAS
        for m, b in mctx:
            bd = self._bdry(sofar, EMPTY_VARS, m.annotation)
            m_d = tt.mctx_extend(self.tt, m_d, bd, m)
            sofar = sofar.extend(m, b)
        v_d = tt.vctx_empty(self.tt, mctx)
        vfar = EMPTY_VARS
        for v, ty in vctx:
            td = self._ty(mctx, vfar, v.annotation)
            v_d = tt.vctx_extend(self.tt, v_d, td, v)
            vfar = vfar.extend(v, ty)
        return m_d, v_d

    # -- internals ---------------------------------------------------------

    def _fresh(self, vctx, *stuff) -> str:
        avoid = set(atoms_in_use(*stuff))
        for v, ty in vctx:
            avoid.add(v.name)
            avoid.update(atoms_in_use(ty))
        return fresh_name("x", frozenset(avoid))

    def _jdg(self, mctx, vctx, j: Abstracted):
        if j.prefix:
            a_cf = j.prefix[0]
            ty_d = self._ty(mctx, vctx, a_cf)
            v = FreeVar(self._fresh(vctx, j), a_cf)
            opened = open_judgement(j, v)
            body = self._jdg(mctx, vctx.extend(v, erase(a_cf)), opened)
            return tt.tt_abstr(self.tt, ty_d, body, v)
        match j.body:
            case IsTy(ty=a):
                return self._ty(mctx, vctx, a)
            case IsTm(term=t, ty=a):
                return self._tm(mctx, vctx, t, a)
            case EqTy(lhs=a, rhs=b, by=al):
                return self._eqty(mctx, vctx, a, b, al)
            case EqTm(lhs=s, rhs=t, ty=a, by=al):
                return self._eqtm(mctx, vctx, s, t, a, al)
        raise UncheckableDerivation(f"cannot translate {j.body!r}")

    def _bdry(self, mctx, vctx, b: Abstracted):
        if b.prefix:
            a_cf = b.prefix[0]
            ty_d = self._ty(mctx, vctx, a_cf)
            v = FreeVar(self._fresh(vctx, b), a_cf)
            opened = open_judgement(b, v)
            body = self._bdry(mctx, vctx.extend(v, erase(a_cf)), opened)
            return tt.bdry_abstr(self.tt, ty_d, body, v)
        match b.body:
            case IsTyB():
                return tt.bdry_ty(self.tt, mctx, vctx)
            case IsTmB(ty=a):
                return tt.bdry_tm(self.tt, self._ty(mctx, vctx, a))
            case EqTyB(lhs=a, rhs=c):
                return tt.bdry_eqty(
                    self.tt, self._ty(mctx, vctx, a), self._ty(mctx, vctx, c)
                )
            case EqTmB(lhs=s, rhs=t, ty=a):
                return tt.bdry_eqtm(
                    self.tt,
                    self._ty(mctx, vctx, a),
                    self._tm(mctx, vctx, s, a),
                    self._tm(mctx, vctx, t, a),
                )
        raise UncheckableDerivation(f"cannot translate boundary {b.body!r}")

    def _ty(self, mctx, vctx, a: Expr):
        match a:
            case MetaApp(meta=m, args=ts):
                return self._meta(mctx, vctx, m, list(ts))
            case SymbolApp(symbol=s, args=es):
                return self._symbol(mctx, vctx, s, list(es))
        raise UncheckableDerivation(f"cannot reconstruct that {a!r} is a type")

    def _tm(self, mctx, vctx, t: Expr, a: Expr, hints: Optional[AssumptionSet] = None):
        stripped = strip_conversions(t)
        res = conversion_residue(t)
        match stripped:
            case FreeVar():
                if stripped not in vctx:
                    raise UnsuitableContext(f"{stripped.name} not in the suitable context")
                d = tt.tt_var(self.tt, mctx, vctx, stripped)
            case MetaApp(meta=m, args=ts):
                d = self._meta(mctx, vctx, m, list(ts))
            case SymbolApp(symbol=s, args=es):
                d = self._symbol(mctx, vctx, s, list(es))
            case _:
                raise UncheckableDerivation(f"cannot reconstruct a typing for {t!r}")
        got = d.conclusion.jdg.body.ty
        want = erase(a)
        if got == want:
            return d
        eq = self._eqty_erased(mctx, vctx, got, want, res.union(hints or AssumptionSet()))
        return tt.conv_tm(self.tt, d, eq)

    def _meta(self, mctx, vctx, m: MetaName, ts: list[Expr]):
        if m not in mctx:
            raise UnsuitableContext(f"{m.name} not in the suitable context")
        bdry_cf = m.annotation
        premises = []
        for j, ty in enumerate(bdry_cf.prefix):
            opened = instantiate_prefix(Abstracted(bdry_cf.prefix[: j + 1], IsTyB()), ts[:j])
            premises.append(self._tm(mctx, vctx, ts[j], opened.prefix[0]))
        return tt.tt_meta(self.tt, mctx, vctx, m, premises)

    def _symbol(self, mctx, vctx, s: str, es: list):
        trule = self.tt.symbol_rule_for(s)
        rule_cf = self.cf.symbol_rule_for(s).rule
        entries_cf = [(mm, e) for (mm, _), e in zip(rule_cf.premises, es)]
        inst_cf = Instantiation(entries_cf)
        entries_tt = [
            (mm, erase(e)) for (mm, _), e in zip(trule.rule.premises, es)
        ]
        kids = []
        for i, (mm, b_cf) in enumerate(rule_cf.premises, start=1):
            fill_cf = fill(act(inst_cf.restrict(i), b_cf), inst_cf[mm])
            kids.append(self._jdg(mctx, vctx, fill_cf))
        return tt.specific(
            self.tt, mctx, vctx, trule.name, Instantiation(entries_tt), kids
        )

    def _eqty(self, mctx, vctx, a_cf: Expr, b_cf: Expr, al: AssumptionSet):
        return self._eqty_erased(
            mctx, vctx, erase(a_cf), erase(b_cf), asm(a_cf, b_cf, al)
        )

    def _eqtm(self, mctx, vctx, s_cf: Expr, t_cf: Expr, a_cf: Expr, al: AssumptionSet):
        s, t, a = erase(s_cf), erase(t_cf), erase(a_cf)
        hints = asm(s_cf, t_cf, a_cf, al)
        if s == t:
            return tt.eqtm_refl(self.tt, self._tm(mctx, vctx, s_cf, a_cf))
        d = self._eq_by_rule(mctx, vctx, s, t, a, hints)
        if d is None:
            d = self._eq_by_rule(mctx, vctx, t, s, a, hints)
            d = tt.eqtm_sym(self.tt, d) if d is not None else None
        if d is None:
            raise UncheckableDerivation(f"cannot reconstruct {s!r} == {t!r}")
        return d

    def _eqty_erased(self, mctx, vctx, a: Expr, b: Expr, hints: AssumptionSet):
        if a == b:
            return tt.eqty_refl(self.tt, self._ty_erased(mctx, vctx, a, hints))
        d = self._eq_by_rule(mctx, vctx, a, b, None, hints)
        if d is None:
            d = self._eq_by_rule(mctx, vctx, b, a, None, hints)
            d = tt.eqty_sym(self.tt, d) if d is not None else None
        if d is None:
            raise UncheckableDerivation(f"cannot reconstruct {a!r} == {b!r}")
        return d

    def _ty_erased(self, mctx, vctx, a: Expr, hints: AssumptionSet):
        """Type formation for an already-erased type, resolving atoms through
        the context (annotations on atoms are cf syntax, usable directly)."""
        match a:
            case MetaApp(meta=m, args=ts):
                if m.annotation is not None:
                    return self._meta(mctx, vctx, m, list(ts))
            case SymbolApp(symbol=s, args=es):
                return self._symbol_erased(mctx, vctx, s, list(es), hints)
        raise UncheckableDerivation(f"cannot reconstruct that {a!r} is a type")

    def _symbol_erased(self, mctx, vctx, s: str, es: list, hints: AssumptionSet):
        trule = self.tt.symbol_rule_for(s)
        entries = [(mm, e) for (mm, _), e in zip(trule.rule.premises, es)]
        inst = Instantiation(entries)
        kids = []
        for i, (mm, b_tt) in enumerate(trule.rule.premises, start=1):
            fill_tt = fill(act(inst.restrict(i), b_tt), inst[mm])
            kids.append(self._jdg_erased(mctx, vctx, fill_tt, hints))
        return tt.specific(self.tt, mctx, vctx, trule.name, inst, kids)

    def _jdg_erased(self, mctx, vctx, j: Abstracted, hints: AssumptionSet):
        if j.prefix:
            a_tt = j.prefix[0]
            ty_d = self._ty_erased(mctx, vctx, a_tt, hints)
            name = self._fresh(vctx, j)
            v = FreeVar(name, _cf_annotation_of(a_tt))
            opened = open_judgement(j, v)
            body = self._jdg_erased(mctx, vctx.extend(v, a_tt), opened, hints)
            return tt.tt_abstr(self.tt, ty_d, body, v)
        match j.body:
            case IsTy(ty=a):
                return self._ty_erased(mctx, vctx, a, hints)
            case IsTm(term=t, ty=a):
                return self._tm_erased(mctx, vctx, t, a, hints)
            case EqTy(lhs=a, rhs=b):
                return self._eqty_erased(mctx, vctx, a, b, hints)
            case EqTm(lhs=s, rhs=t, ty=a):
                if s == t:
                    return tt.eqtm_refl(self.tt, self._tm_erased(mctx, vctx, s, a, hints))
                d = self._eq_by_rule(mctx, vctx, s, t, a, hints)
                if d is None:
                    d2 = self._eq_by_rule(mctx, vctx, t, s, a, hints)
                    d = tt.eqtm_sym(self.tt, d2) if d2 is not None else None
                if d is None:
                    raise UncheckableDerivation(f"cannot reconstruct {j.body!r}")
                return d
        raise UncheckableDerivation(f"cannot translate {j.body!r}")

    def _tm_erased(self, mctx, vctx, t: Expr, a: Expr, hints: AssumptionSet):
        match t:
            case FreeVar():
                if t not in vctx:
                    raise UnsuitableContext(f"{t.name} not in the suitable context")
                d = tt.tt_var(self.tt, mctx, vctx, t)
            case MetaApp(meta=m, args=ts):
                d = self._meta(mctx, vctx, m, list(ts))
            case SymbolApp(symbol=s, args=es):
                d = self._symbol_erased(mctx, vctx, s, list(es), hints)
            case _:
                raise UncheckableDerivation(f"cannot reconstruct a typing for {t!r}")
        got = d.conclusion.jdg.body.ty
        if got == a:
            return d
        eq = self._eqty_erased(mctx, vctx, got, a, hints)
        return tt.conv_tm(self.tt, d, eq)

    def _eq_by_rule(self, mctx, vctx, lhs, rhs, ty, hints: AssumptionSet):
        """Matches specific equality rules against an erased equation goal;
        premise metavariables not determined by the conclusion are resolved
        from the assumption-set hints."""
        for trule in self.tt.rules:
            rule = trule.rule
            if rule.is_object:
                continue
            unknowns = dict(rule.meta_arities())
            sol: dict = {}
            c = rule.conclusion
            if ty is None:
                if not isinstance(c, EqTy):
                    continue
                ok = match_expr(c.lhs, lhs, unknowns, sol) and match_expr(
                    c.rhs, rhs, unknowns, sol
                )
            else:
                if not isinstance(c, EqTm):
                    continue
                ok = (
                    match_expr(c.lhs, lhs, unknowns, sol)
                    and match_expr(c.rhs, rhs, unknowns, sol)
                    and match_expr(c.ty, ty, unknowns, sol)
                )
            if not ok:
                continue
            d = self._apply_with_hints(mctx, vctx, trule, sol, hints)
            if d is not None:
                return d
        return None

    def _apply_with_hints(self, mctx, vctx, trule, sol: dict, hints: AssumptionSet):
        rule = trule.rule
        entries: list = []
        kids: list = []
        for m, b in rule.premises:
            inst = Instantiation(entries)
            b_inst = act(inst, b)
            if m in sol:
                head = sol[m]
                try:
                    kids.append(self._jdg_erased(mctx, vctx, fill(b_inst, head), hints))
                except KernelError:
                    return None
            elif boundary_arity(b).cls.is_equality:
                head = _dummy_head(len(b.prefix))
                try:
                    kids.append(self._jdg_erased(mctx, vctx, fill(b_inst, head), hints))
                except KernelError:
                    return None
            else:
                # resolve a term/type metavariable from the hint set
                head = None
                if isinstance(b_inst.body, IsTmB) and not b_inst.prefix:
                    want_ty = b_inst.body.ty
                    for cand in sorted(hints.free_vars, key=lambda v: v.name):
                        if cand in vctx and vctx[cand] == want_ty:
                            head = ExprArg(cand)
                            break
                    if head is None:
                        for cand_m in sorted(hints.metas, key=lambda mm: mm.name):
                            if (
                                cand_m in mctx
                                and isinstance(mctx[cand_m].body, IsTmB)
                                and not mctx[cand_m].prefix
                                and mctx[cand_m].body.ty == want_ty
                            ):
                                head = ExprArg(MetaApp(cand_m, ()))
                                break
                if head is None:
                    return None
                try:
                    kids.append(self._jdg_erased(mctx, vctx, fill(b_inst, head), hints))
                except KernelError:
                    return None
            entries.append((m, head))
        try:
            return tt.specific(self.tt, mctx, vctx, trule.name, Instantiation(entries), kids)
        except KernelError:
            return None


def _dummy_head(binders: int):
    head = DUMMY
    for _ in range(binders):
        head = Abstr(head)
    return head


def _cf_annotation_of(a_tt: Expr) -> Expr:
    """Erased types originate from cf annotations, so they are valid cf
    syntax themselves; reuse them as fresh atoms' annotations."""
    return a_tt


def cf_judgement_to_tt(
    cf_theory: Theory,
    tt_theory: Theory,
    cert: cf.CertifiedJudgement,
    ctx: Optional[tuple[MetaCtx, VarCtx]] = None,
):
    """Translates a certificate to a contexted derivation of its erasure in
    a suitable context.  Returns (mctx, vctx, derivation)."""
    tr = CfToTT(cf_theory, tt_theory)
    return tr.judgement(cert, ctx)


# ---------------------------------------------------------------------------
# tt -> cf: derivation-directed elaboration


class TTtoCF:
    """Translates checked tt derivations into certificates, labelling context
    entries with certified cf annotations and rectifying heads through
    boundary conversion wherever erasure leaves slack."""

    def __init__(self, tt_theory: Theory, cf_theory: Theory):
        self.tt = tt_theory
        self.cf = cf_theory
        if cf_theory.finitary_witnesses is None:
            raise NonStandardTheory("cf theory must pass the finitary gate first")
        for r in tt_theory.rules:
            r_cf = cf_theory.rule(r.name)
            if double_erase(plain(r_cf.rule.conclusion)) != double_erase(plain(r.rule.conclusion)):
                raise UncheckableDerivation(
                    f"cf rule {r.name} is not eligible for its tt counterpart"
                )

    # -- labelings (parts 2 and 3 of the theorem) ---------------------------

    def labelings_from_evidence(self, mctx_deriv, vctx_deriv):
        theta: dict = {}
        theta_certs: dict = {}
        chain = []
        d = mctx_deriv
        while d.rule == "MCtx-Extend":
            chain.append((d.data[0], d.premises[1]))
            d = d.premises[0]
        for m, bd in reversed(chain):
            cert = self._translate_bdry(bd, theta, theta_certs, {}, {})
            theta[m] = cert.payload
            theta_certs[m] = cert
        gamma: dict = {}
        gamma_certs: dict = {}
        vchain = []
        d = vctx_deriv
        while d.rule == "VCtx-Extend":
            vchain.append((d.data[0], d.premises[1]))
            d = d.premises[0]
        for v, td in reversed(vchain):
            cert = self._translate(td, theta, theta_certs, gamma, gamma_certs)
            gamma[v] = cert.payload.body.ty
            gamma_certs[v] = cert
        return theta, theta_certs, gamma, gamma_certs

    # -- helpers -----------------------------------------------------------

    def _open(self, cert):
        """Peels one binder off a certified judgement with a fresh variable."""
        j = cert.payload
        bd = cf.presuppositions_cf(self.cf, cert)
        ty_c = cf.binder_type_cert(self.cf, bd, 0)
        name = fresh_name("x", atoms_in_use(j))
        v = FreeVar(name, j.prefix[0])
        var_c = cf.cf_var(self.cf, v, ty_c)
        return ty_c, v, cf.cf_substitute(self.cf, cert, var_c)

    def _components(self, cert):
        return cf.boundary_components(self.cf, cf.presuppositions_cf(self.cf, cert))

    def _retype_eq(self, eq_cert, target_ty_cert):
        """Moves a term equation to an erasure-equal type via CF-Conv-EqTm
        along reflexivity."""
        comps = self._components(eq_cert)
        a_now = comps[0]
        if a_now.payload == target_ty_cert.payload:
            return eq_cert
        refl = cf.cf_eqty_refl(self.cf, a_now, target_ty_cert)
        return cf.cf_conv_eqtm(self.cf, eq_cert, refl)

    def _rectify_eq_lhs(self, eq_cert, lhs_cert):
        """Replaces the left side of an equation by an erasure-equal term."""
        if eq_cert.payload.prefix:
            ty_c, v, eq_open = self._open(eq_cert)
            lhs_open = cf.cf_substitute(self.cf, lhs_cert, cf.cf_var(self.cf, v, ty_c))
            inner = self._rectify_eq_lhs(eq_open, lhs_open)
            return cf.cf_abstract_fwd(self.cf, ty_c, inner, v)
        body = eq_cert.payload.body
        if isinstance(body, EqTy):
            if body.lhs == lhs_cert.payload.body.ty:
                return eq_cert
            comps = self._components(eq_cert)
            r = cf.cf_eqty_refl(self.cf, lhs_cert, comps[0])
            return cf.cf_eqty_trans(self.cf, r, eq_cert)
        if body.lhs == lhs_cert.payload.body.term:
            return eq_cert
        comps = self._components(eq_cert)  # (A type, lhs : A, rhs : A)
        lhs_at = lhs_cert
        if lhs_cert.payload.body.ty != body.ty:
            refl = cf.cf_eqty_refl(
                self.cf, self._components(lhs_cert)[0], comps[0]
            )
            lhs_at = cf.cf_conv_tm(self.cf, lhs_cert, refl)
        r = cf.cf_eqtm_refl(self.cf, lhs_at, comps[1])
        return cf.cf_eqtm_trans(self.cf, r, eq_cert)

    def _equation_boundary_cert(self, fill_l, fill_r):
        """The equation boundary of two object fills of one boundary."""
        if fill_l.payload.prefix:
            ty_c, v, l_open = self._open(fill_l)
            r_open = cf.cf_substitute(self.cf, fill_r, cf.cf_var(self.cf, v, ty_c))
            inner = self._equation_boundary_cert(l_open, r_open)
            return cf.cf_abstract_bdry_fwd(self.cf, ty_c, inner, v)
        if isinstance(fill_l.payload.body, IsTy):
            return cf.cf_bdry_eqty(self.cf, fill_l, fill_r)
        comps = self._components(fill_l)
        r_at = fill_r
        if fill_r.payload.body.ty != fill_l.payload.body.ty:
            refl = cf.cf_eqty_refl(self.cf, self._components(fill_r)[0], comps[0])
            r_at = cf.cf_conv_tm(self.cf, fill_r, refl)
        return cf.cf_bdry_eqtm(self.cf, comps[0], fill_l, r_at)

    def _instantiated_premise_boundary(self, rule_name, idx, entry_certs):
        """Certificate of  <I'>_idx B'_idx  from the finitary witnesses."""
        w = self.cf.finitary_witnesses[rule_name]
        bdry_cert = w["premise_boundaries"][idx]
        rule_cf = self.cf.rule(rule_name).rule
        entries = [(m, c) for (m, _), c in zip(rule_cf.premises, entry_certs[:idx])]
        return cf.cf_instantiate_bdry(self.cf, entries, bdry_cert)

    # -- the main recursion (parts 4 and 5) ---------------------------------

    def translate(self, d, theta, theta_certs, gamma, gamma_certs):
        out = self._translate(d, theta, theta_certs, gamma, gamma_certs)
        return out

    def _translate(self, d, th, thc, ga, gac):
        rule = d.rule
        match rule:
            case "TT-Var":
                v = d.data[2]
                if v not in ga:
                    raise UnsuitableContext(f"no labeling for {v.name}")
                return cf.cf_var(self.cf, FreeVar(v.name, ga[v]), gac[v])
            case "TT-Abstr":
                atom = d.data[2]
                ty_c = self._translate(d.premises[0], th, thc, ga, gac)
                a_cf = ty_c.payload.body.ty
                ga2 = dict(ga)
                gac2 = dict(gac)
                ga2[atom] = a_cf
                gac2[atom] = ty_c
                body_c = self._translate(d.premises[1], th, thc, ga2, gac2)
                return cf.cf_abstract_fwd(
                    self.cf, ty_c, body_c, FreeVar(atom.name, a_cf)
                )
            case "TT-Bdry-Abstr":
                atom = d.data[2]
                ty_c = self._translate(d.premises[0], th, thc, ga, gac)
                a_cf = ty_c.payload.body.ty
                ga2, gac2 = dict(ga), dict(gac)
                ga2[atom] = a_cf
                gac2[atom] = ty_c
                body_c = self._translate_bdry_node(d.premises[1], th, thc, ga2, gac2)
                return cf.cf_abstract_bdry_fwd(
                    self.cf, ty_c, body_c, FreeVar(atom.name, a_cf)
                )
            case "TT-Meta" | "TT-Meta-Eco":
                return self._translate_meta(d, th, thc, ga, gac)
            case "TT-Meta-Congr":
                return self._translate_meta_congr(d, th, thc, ga, gac)
            case "TT-Specific" | "TT-Specific-Eco":
                return self._translate_specific(d, th, thc, ga, gac)
            case "TT-Congr":
                return self._translate_congr(d, th, thc, ga, gac)
            case "TT-EqTy-Refl":
                c = self._translate(d.premises[0], th, thc, ga, gac)
                return cf.cf_eqty_refl(self.cf, c, c)
            case "TT-EqTm-Refl":
                c = self._translate(d.premises[0], th, thc, ga, gac)
                return cf.cf_eqtm_refl(self.cf, c, c)
            case "TT-EqTy-Sym":
                return cf.cf_eqty_sym(self.cf, self._translate(d.premises[0], th, thc, ga, gac))
            case "TT-EqTm-Sym":
                return cf.cf_eqtm_sym(self.cf, self._translate(d.premises[0], th, thc, ga, gac))
            case "TT-EqTy-Trans":
                c1 = self._translate(d.premises[0], th, thc, ga, gac)
                c2 = self._translate(d.premises[1], th, thc, ga, gac)
                return cf.cf_eqty_trans(self.cf, c1, c2)
            case "TT-EqTm-Trans":
                c1 = self._translate(d.premises[0], th, thc, ga, gac)
                c2 = self._translate(d.premises[1], th, thc, ga, gac)
                c2 = self._retype_eq(c2, self._components(c1)[0])
                return cf.cf_eqtm_trans(self.cf, c1, c2)
            case "TT-Conv-Tm":
                c_t = self._translate(d.premises[0], th, thc, ga, gac)
                c_eq = self._translate(d.premises[1], th, thc, ga, gac)
                c_eq = self._rectify_eq_lhs(c_eq, self._components(c_t)[0])
                return cf.cf_conv_tm(self.cf, c_t, c_eq)
            case "TT-Conv-EqTm":
                c_eq = self._translate(d.premises[0], th, thc, ga, gac)
                c_ty = self._translate(d.premises[1], th, thc, ga, gac)
                c_ty = self._rectify_eq_lhs(c_ty, self._components(c_eq)[0])
                return cf.cf_conv_eqtm(self.cf, c_eq, c_ty)
            case "TT-Bdry-Ty" | "TT-Bdry-Tm" | "TT-Bdry-EqTy" | "TT-Bdry-EqTm":
                return self._translate_bdry_node(d, th, thc, ga, gac)
        raise UncheckableDerivation(f"tt->cf does not handle {rule}")

    def _translate_bdry(self, d, th, thc, ga, gac):
        return self._translate_bdry_node(d, th, thc, ga, gac)

    def _translate_bdry_node(self, d, th, thc, ga, gac):
        match d.rule:
            case "TT-Bdry-Ty":
                return cf.cf_bdry_ty(self.cf)
            case "TT-Bdry-Tm":
                return cf.cf_bdry_tm(self.cf, self._translate(d.premises[0], th, thc, ga, gac))
            case "TT-Bdry-EqTy":
                return cf.cf_bdry_eqty(
                    self.cf,
                    self._translate(d.premises[0], th, thc, ga, gac),
                    self._translate(d.premises[1], th, thc, ga, gac),
                )
            case "TT-Bdry-EqTm":
                a_c = self._translate(d.premises[0], th, thc, ga, gac)
                s_c = self._translate(d.premises[1], th, thc, ga, gac)
                t_c = self._translate(d.premises[2], th, thc, ga, gac)
                s_c = self._retype_to(s_c, a_c)
                t_c = self._retype_to(t_c, a_c)
                return cf.cf_bdry_eqtm(self.cf, a_c, s_c, t_c)
            case "TT-Bdry-Abstr":
                return self._translate(d, th, thc, ga, gac)
        raise UncheckableDerivation(f"tt->cf does not handle boundary node {d.rule}")

    def _retype_to(self, t_cert, ty_cert):
        if t_cert.payload.body.ty == ty_cert.payload.body.ty:
            return t_cert
        refl = cf.cf_eqty_refl(self.cf, self._components(t_cert)[0], ty_cert)
        return cf.cf_conv_tm(self.cf, t_cert, refl)

    def _translate_meta(self, d, th, thc, ga, gac):
        m, terms = d.data[2], d.data[3]
        if m not in th:
            raise UnsuitableContext(f"no labeling for {m.name}")
        b_cf = th[m]
        m_cf = MetaName(m.name, b_cf)
        t_certs = []
        for j in range(len(terms)):
            raw = self._translate(d.premises[j], th, thc, ga, gac)
            target_ty = cf.binder_type_cert(self.cf, thc[m], j)
            for tc in t_certs:
                target_ty = cf.cf_substitute(self.cf, target_ty, tc)
            target_bdry = cf.cf_bdry_tm(self.cf, target_ty)
            src_bdry = cf.presuppositions_cf(self.cf, raw)
            t_certs.append(
                cf.boundary_convert(self.cf, src_bdry, target_bdry, raw)
            )
        return cf.cf_meta(self.cf, m_cf, t_certs, annotation_cert=thc[m])

    def _translate_meta_congr(self, d, th, thc, ga, gac):
        m = d.data[2]
        k = len(d.data[3])
        if m not in th:
            raise UnsuitableContext(f"no labeling for {m.name}")
        b_cf = th[m]
        m_cf = MetaName(m.name, b_cf)
        s_certs: list = []
        t_certs: list = []
        for j in range(k):
            raw = self._translate(d.premises[j], th, thc, ga, gac)
            target_ty = cf.binder_type_cert(self.cf, thc[m], j)
            for sc in s_certs:
                target_ty = cf.cf_substitute(self.cf, target_ty, sc)
            s_certs.append(
                cf.boundary_convert(
                    self.cf, cf.presuppositions_cf(self.cf, raw),
                    cf.cf_bdry_tm(self.cf, target_ty), raw,
                )
            )
        for j in range(k):
            raw = self._translate(d.premises[k + j], th, thc, ga, gac)
            target_ty = cf.binder_type_cert(self.cf, thc[m], j)
            for tc in t_certs:
                target_ty = cf.cf_substitute(self.cf, target_ty, tc)
            t_certs.append(
                cf.boundary_convert(
                    self.cf, cf.presuppositions_cf(self.cf, raw),
                    cf.cf_bdry_tm(self.cf, target_ty), raw,
                )
            )
        eq_certs = []
        for j in range(k):
            raw = self._translate(d.premises[2 * k + j], th, thc, ga, gac)
            target_b = self._equation_boundary_cert_from(s_certs[j], t_certs[j])
            src_b = cf.presuppositions_cf(self.cf, raw)
            moved = cf.boundary_convert(self.cf, src_b, target_b, raw)
            eq_certs.append(self._rectify_eq_lhs(moved, s_certs[j]))
        return cf.cf_meta_congr(
            self.cf, m_cf, s_certs, t_certs, eq_certs, annotation_cert=thc[m]
        )

    def _equation_boundary_cert_from(self, l_cert, r_cert):
        return self._equation_boundary_cert(l_cert, r_cert)

    def _translate_specific(self, d, th, thc, ga, gac):
        rule_name = d.data[2]
        rule_cf = self.cf.rule(rule_name).rule
        n = len(rule_cf.premises)
        certs: list = []
        for i in range(n):
            raw = self._translate(d.premises[i], th, thc, ga, gac)
            target_b = self._instantiated_premise_boundary(rule_name, i, certs)
            src_b = cf.presuppositions_cf(self.cf, raw)
            certs.append(cf.boundary_convert(self.cf, src_b, target_b, raw))
        return cf.cf_apply_rule(self.cf, rule_name, certs)

    def _translate_congr(self, d, th, thc, ga, gac):
        rule_name = d.data[2]
        rule_cf = self.cf.rule(rule_name).rule
        n = len(rule_cf.premises)
        f_certs: list = []
        g_certs: list = []
        for i in range(n):
            raw = self._translate(d.premises[i], th, thc, ga, gac)
            target_b = self._instantiated_premise_boundary(rule_name, i, f_certs)
            f_certs.append(
                cf.boundary_convert(self.cf, cf.presuppositions_cf(self.cf, raw), target_b, raw)
            )
        for i in range(n):
            raw = self._translate(d.premises[n + i], th, thc, ga, gac)
            target_b = self._instantiated_premise_boundary(rule_name, i, g_certs)
            g_certs.append(
                cf.boundary_convert(self.cf, cf.presuppositions_cf(self.cf, raw), target_b, raw)
            )
        object_idx = [
            i
            for i, (_, b) in enumerate(rule_cf.premises)
            if boundary_arity(b).cls.is_object
        ]
        eq_certs = []
        for pos, i in enumerate(object_idx):
            raw = self._translate(d.premises[2 * n + pos], th, thc, ga, gac)
            target_b = self._equation_boundary_cert(f_certs[i], g_certs[i])
            moved = cf.boundary_convert(
                self.cf, cf.presuppositions_cf(self.cf, raw), target_b, raw
            )
            eq_certs.append(self._rectify_eq_lhs(moved, f_certs[i]))
        t_prime = None
        if isinstance(rule_cf.conclusion, IsTm):
            left_inst = cf.cf_apply_rule(self.cf, rule_name, f_certs)
            right_inst = cf.cf_apply_rule(self.cf, rule_name, g_certs)
            raw_ceq = self._translate(d.premises[-1], th, thc, ga, gac)
            li_ty = self._components(left_inst)[0]
            ri_ty = self._components(right_inst)[0]
            ceq = self._rectify_eq_lhs(raw_ceq, li_ty)
            # rectify the right side to the right-instantiated type
            comps = self._components(ceq)
            r = cf.cf_eqty_refl(self.cf, comps[1], ri_ty)
            ceq = cf.cf_eqty_trans(self.cf, ceq, r)
            t_prime = cf.cf_conv_tm(self.cf, right_inst, cf.cf_eqty_sym(self.cf, ceq))
        return cf.cf_congruence(
            self.cf, rule_name, f_certs, g_certs, eq_certs, t_prime_cert=t_prime
        )


def tt_to_cf(
    tt_theory: Theory,
    cf_theory: Theory,
    d,
    mctx_deriv=None,
    vctx_deriv=None,
    labelings=None,
):
    """Elaborates a contexted derivation into a certificate whose double
    erasure is the derivation's conclusion judgement.

    Labelings are built from the context well-formedness derivations unless
    supplied directly as ``(theta, theta_certs, gamma, gamma_certs)``.
    """
    tr = TTtoCF(tt_theory, cf_theory)
    if labelings is not None:
        theta, theta_certs, gamma, gamma_certs = labelings
    else:
        if mctx_deriv is None or vctx_deriv is None:
            raise UncheckableDerivation("labelings need context well-formedness evidence")
        theta, theta_certs, gamma, gamma_certs = tr.labelings_from_evidence(
            mctx_deriv, vctx_deriv
        )
    out = tr.translate(d, theta, theta_certs, gamma, gamma_certs)
    want = d.conclusion.jdg if hasattr(d.conclusion, "jdg") else d.conclusion.bdry
    if double_erase(out.payload) != double_erase(want):
        raise UncheckableDerivation(
            "translated certificate does not double-erase to the conclusion"
        )
    return out


def strip_derivation_atoms(tt_theory: Theory, d):
    """Renames annotated atoms to bare ones throughout a derivation, giving
    the double-erased view that the tt->cf translation starts from."""
    names: dict[str, object] = {}
    var_map: dict = {}
    meta_map: dict = {}

    def visit_stmt(s):
        m, v = tt._ctxs(s)
        for mm, _ in m:
            add_meta(mm)
        for vv, _ in v:
            add_var(vv)

    def add_var(v):
        if v in var_map or v.annotation is None:
            return
        bare = v.name
        if bare in names and names[bare] != v:
            bare = fresh_name(v.name, frozenset(names))
        names[bare] = v
        var_map[v] = FreeVar(bare, None)

    def add_meta(m):
        if m in meta_map or m.annotation is None:
            return
        bare = m.name
        if bare in names and names[bare] != m:
            bare = fresh_name(m.name, frozenset(names))
        names[bare] = m
        meta_map[m] = MetaName(bare, None)

    def walk(d):
        visit_stmt(d.conclusion)
        if d.rule in ("TT-Abstr", "TT-Bdry-Abstr"):
            add_var(d.data[2])
        for p in d.premises:
            walk(p)

    walk(d)
    stripped = tt.rename_derivation(tt_theory, d, var_map, meta_map)
    return stripped, var_map, meta_map


def round_trip_cf(cf_theory: Theory, tt_theory: Theory, cert: cf.CertifiedJudgement):
    """cf -> tt -> cf; erased-equal to the identity on well-annotated input."""
    mctx, vctx, d = cf_judgement_to_tt(cf_theory, tt_theory, cert)
    stripped, var_map, meta_map = strip_derivation_atoms(tt_theory, d)
    deriver_cache = dict(cert._annotations)

    def ann_judgement_cert(payload):
        got = deriver_cache.get(payload)
        if got is not None:
            return got
        from .derive import CFDeriver

        return CFDeriver(cf_theory).judgement(payload)

    def ann_boundary_cert(payload):
        got = deriver_cache.get(payload)
        if got is not None:
            return got
        from .derive import CFDeriver

        return CFDeriver(cf_theory).boundary(payload)

    theta: dict = {}
    theta_certs: dict = {}
    for m, _ in mctx:
        bare = meta_map.get(m, m)
        theta[bare] = m.annotation
        theta_certs[bare] = ann_boundary_cert(m.annotation)
    gamma: dict = {}
    gamma_certs: dict = {}
    for v, _ in vctx:
        bare = var_map.get(v, v)
        gamma[bare] = v.annotation
        gamma_certs[bare] = ann_judgement_cert(plain(IsTy(v.annotation)))
    return tt_to_cf(
        tt_theory,
        cf_theory,
        stripped,
        labelings=(theta, theta_certs, gamma, gamma_certs),
    )


# ---------------------------------------------------------------------------
# Transported congruence (judgementally equal instantiations, both ways)


def _fill_certs_of_equation(cf_theory: Theory, eq_cert):
    """Splits a certified (possibly abstracted) equation into certificates of
    its two object fills, via presuppositions and boundary inversion."""
    if eq_cert.payload.prefix:
        bd = cf.presuppositions_cf(cf_theory, eq_cert)
        ty_c = cf.binder_type_cert(cf_theory, bd, 0)
        name = fresh_name("x", atoms_in_use(eq_cert.payload))
        v = FreeVar(name, eq_cert.payload.prefix[0])
        var_c = cf.cf_var(cf_theory, v, ty_c)
        inner_l, inner_r = _fill_certs_of_equation(
            cf_theory, cf.cf_substitute(cf_theory, eq_cert, var_c)
        )
        return (
            cf.cf_abstract_fwd(cf_theory, ty_c, inner_l, v),
            cf.cf_abstract_fwd(cf_theory, ty_c, inner_r, v),
        )
    comps = cf.boundary_components(cf_theory, cf.presuppositions_cf(cf_theory, eq_cert))
    if len(comps) == 2:  # type equation: (lhs type, rhs type)
        return comps[0], comps[1]
    return comps[1], comps[2]  # term equation: (type, lhs, rhs)


def _labelings_for(cf_theory: Theory, mctx: MetaCtx, vctx: VarCtx, caches: dict):
    from .derive import CFDeriver

    deriver = CFDeriver(cf_theory)

    theta: dict = {}
    theta_certs: dict = {}
    for m, _ in mctx:
        bare = MetaName(m.name, None)
        theta[bare] = m.annotation
        theta_certs[bare] = caches.get(m.annotation) or deriver.boundary(m.annotation)
    gamma: dict = {}
    gamma_certs: dict = {}
    for v, _ in vctx:
        bare = FreeVar(v.name, None)
        gamma[bare] = v.annotation
        key = plain(IsTy(v.annotation))
        gamma_certs[bare] = caches.get(key) or deriver.judgement(key)
    return theta, theta_certs, gamma, gamma_certs


def transported_congruence(
    cf_theory: Theory,
    tt_theory: Theory,
    rule_name: str,
    premise_certs: Sequence[cf.CertifiedJudgement],
    target_bdry_cert=None,
):
    """Congruence for judgementally equal instantiations, transported through
    both translations.

    ``premise_certs[i]`` is, for the rule's i-th premise: an equation
    certificate  fill(<I>_i B_i, f_i == g'_i by a_i)  when the premise is an
    object premise, and the fill  fill(<I>_i B_i, f_i)  when it is an
    equality premise.  The result is an equational certificate for the
    congruence conclusion, rectified onto ``target_bdry_cert`` when given;
    its assumption set is drawn from the inputs.
    """
    from .derive import TTDeriver

    rule_cf = cf_theory.rule(rule_name).rule
    rule_tt = tt_theory.rule(rule_name).rule
    if not rule_cf.is_object:
        raise NonStandardTheory(f"rule {rule_name} is not an object rule")
    n = len(rule_cf.premises)
    if len(premise_certs) != n:
        raise UncheckableDerivation("one certificate per rule premise required")

    # split equations into their fills on the cf side
    lhs_fill: list = [None] * n
    rhs_fill: list = [None] * n
    for i, (m, b) in enumerate(rule_cf.premises):
        if boundary_arity(b).cls.is_object:
            lhs_fill[i], rhs_fill[i] = _fill_certs_of_equation(cf_theory, premise_certs[i])
        else:
            lhs_fill[i] = premise_certs[i]

    # joint suitable context
    payloads = [c.payload for c in premise_certs]
    if target_bdry_cert is not None:
        payloads.append(target_bdry_cert.payload)
    all_m: list = []
    all_v: list = []
    for p in payloads:
        all_m.extend(mv(p))
        all_v.extend(fv(p))
    mctx, vctx = suitable_context(
        sorted(set(all_m), key=lambda m: m.name), sorted(set(all_v), key=lambda v: v.name)
    )
    translator = CfToTT(cf_theory, tt_theory)
    ctx = (mctx, vctx)

    def to_tt(cert):
        return translator.judgement(cert, ctx)[2]

    entries = []
    prev_eq_tt: list = [None] * n
    for i, (m, b) in enumerate(rule_cf.premises):
        bare = MetaName(m.name, None)
        if boundary_arity(b).cls.is_object:
            eq_tt = to_tt(premise_certs[i])
            i_tt = to_tt(lhs_fill[i])
            jat_tt = to_tt(rhs_fill[i])
            prev_eq_tt[i] = eq_tt
            j_tt = _j_fill_tt(
                tt_theory, rule_tt, i, jat_tt, prev_eq_tt, rhs_fill, to_tt
            )
            entries.append(tt.EqInstEntry(bare, i_tt, j_tt, jat_tt, eq_tt))
        else:
            f_tt = to_tt(premise_certs[i])
            entries.append(tt.EqInstEntry(bare, f_tt, f_tt, f_tt, None))

    # the rule's own conclusion over its premises, instantiated equally
    ttd = TTDeriver(tt_theory)
    xi = MetaCtx(list(rule_tt.premises))
    d = ttd.judgement(xi, EMPTY_VARS, plain(rule_tt.conclusion))
    xi_wf = ttd.mctx_wf(xi)
    d = tt.weaken_vars(tt_theory, d, list(vctx.entries))
    _, _, d_eq = tt.eq_instantiate(tt_theory, entries, d, mctx, vctx, xi_wf)
    if d_eq is None:
        raise UncheckableDerivation("the rule conclusion is not an object judgement")

    # back to cf
    caches: dict = {}
    for c in premise_certs:
        caches.update(c._annotations)
    if target_bdry_cert is not None:
        caches.update(target_bdry_cert._annotations)
    stripped, var_map, meta_map = strip_derivation_atoms(tt_theory, d_eq)
    theta, theta_certs, gamma, gamma_certs = _labelings_for(cf_theory, mctx, vctx, caches)
    out = tt_to_cf(
        tt_theory, cf_theory, stripped, labelings=(theta, theta_certs, gamma, gamma_certs)
    )
    if target_bdry_cert is None:
        return out
    src_b = cf.presuppositions_cf(cf_theory, out)
    return cf.boundary_convert(cf_theory, src_b, target_bdry_cert, out)


def _j_fill_tt(tt_theory, rule_tt, idx, jat_tt, prev_eq_tt, rhs_fill, to_tt):
    """The right instantiation's fill at its own boundary, obtained from the
    fill at the left boundary by converting binder types along the earlier
    premises' equations."""
    _, b = rule_tt.premises[idx]
    if not b.prefix:
        return jat_tt
    if len(b.prefix) > 1:
        raise UncheckableDerivation(
            "transported congruence supports premises with at most one binder"
        )
    binder = b.prefix[0]
    if not isinstance(binder, MetaApp) or binder.args:
        raise UncheckableDerivation(
            "transported congruence supports metavariable binder types only"
        )
    k = next(
        i for i, (m, _) in enumerate(rule_tt.premises) if m == binder.meta
    )
    eq_k = prev_eq_tt[k]
    if eq_k is None:
        raise UncheckableDerivation("binder type premise is not an object premise")
    rhs_ty = to_tt(rhs_fill[k])
    return tt.conv_abstr(tt_theory, jat_tt, rhs_ty, eq_k)
