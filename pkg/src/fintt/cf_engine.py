"""The context-free trusted nucleus: forward-chaining certified-judgement
constructors with no stored derivations, plus the context-free
meta-operations.

A :class:`CertifiedJudgement` carries only its payload and a theory tag; it
can be produced exclusively by the constructors in this module, each of
which validates the side conditions of one closure rule or implements one
admissible meta-operation as a judgement-level computation.  Every
constructor also maintains a monotone cache of certified annotation
judgements so that the well-typed-annotation discipline never has to be
re-established.

Assumption sets emitted by the constructors are always the minimal suitable
ones.
"""

from __future__ import annotations

from typing import Optional, Sequence, Union

from .errors import (
    AnnotationMismatch,
    ArityMismatch,
    BadNode,
    BinderUsed,
    BoundaryExceedsPremises,
    ErasureMismatch,
    NonStandardTheory,
    NotObjectJudgement,
    PremiseMismatch,
    TypeMismatch,
    UnknownMeta,
    VarInAnnotation,
)
from .instantiation import Instantiation, act
from .judgements import (
    abstract_judgement,
    fill,
    fill_equation,
    instantiate_prefix,
    plain,
    unfill,
)
from .syntax import (
    Abstr,
    Abstracted,
    AbstractedBoundary,
    AbstractedJudgement,
    Argument,
    AssumptionSet,
    Convert,
    EMPTY_ASSUMPTIONS,
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
    boundary_arity,
    bv,
    conversion_residue,
    erase,
    erased_equal,
    fvt,
    mv,
    strip_conversions,
    subst_bound_many,
)
from .theory import (
    Theory,
    metavariable_rule_instance,
    rule_instance_premises,
)

_TOKEN = object()


class CertifiedJudgement:
    """A context-free judgement certified by the nucleus."""

    __slots__ = ("payload", "theory", "_annotations")

    def __init__(self, payload: AbstractedJudgement, theory: Theory, annotations, token=None):
        if token is not _TOKEN:
            raise PermissionError("certificates can only be made by the cf engine")
        self.payload = payload
        self.theory = theory
        self._annotations = annotations

    def __repr__(self) -> str:
        return f"CertifiedJudgement({self.payload!r})"


class CertifiedBoundary:
    """A context-free boundary certified by the nucleus."""

    __slots__ = ("payload", "theory", "_annotations")

    def __init__(self, payload: AbstractedBoundary, theory: Theory, annotations, token=None):
        if token is not _TOKEN:
            raise PermissionError("certificates can only be made by the cf engine")
        self.payload = payload
        self.theory = theory
        self._annotations = annotations

    def __repr__(self) -> str:
        return f"CertifiedBoundary({self.payload!r})"


Certificate = Union[CertifiedJudgement, CertifiedBoundary]


def _theory_extends(big: Theory, small: Theory) -> bool:
    if big is small:
        return True
    if big.flavor != small.flavor:
        return False
    have = {r.name: r.rule for r in big.rules}
    for r in small.rules:
        if have.get(r.name) != r.rule:
            return False
    for s in small.signature:
        if s not in big.signature or big.signature[s] != small.signature[s]:
            return False
    return True


def _merge(theory: Theory, *certs: Certificate) -> dict:
    out: dict = {}
    for c in certs:
        if c is None:
            continue
        if not _theory_extends(theory, c.theory):
            raise PremiseMismatch("certificate belongs to a different theory")
        out.update(c._annotations)
    return out


def _jdg(theory: Theory, payload: AbstractedJudgement, annotations) -> CertifiedJudgement:
    return CertifiedJudgement(payload, theory, annotations, token=_TOKEN)


def _bdry(theory: Theory, payload: AbstractedBoundary, annotations) -> CertifiedBoundary:
    return CertifiedBoundary(payload, theory, annotations, token=_TOKEN)


def _want(cert: CertifiedJudgement, expected: AbstractedJudgement, what: str) -> None:
    if cert.payload != expected:
        raise PremiseMismatch(f"{what}: expected {expected!r}, got {cert.payload!r}")


def _plain_body(cert: CertifiedJudgement, kind, what: str):
    if cert.payload.prefix or not isinstance(cert.payload.body, kind):
        raise PremiseMismatch(f"{what}: expected a non-abstracted {kind.__name__}")
    return cert.payload.body


def minimal_suitable(premises: Sequence, bdry: AbstractedBoundary) -> AssumptionSet:
    """The minimal suitable assumption set: asm(premises) minus asm(boundary).

    Raises :class:`BoundaryExceedsPremises` when the boundary mentions
    assumptions absent from the premises.
    """
    payloads = [p.payload if isinstance(p, (CertifiedJudgement, CertifiedBoundary)) else p for p in premises]
    prem = asm(*payloads) if payloads else EMPTY_ASSUMPTIONS
    bd = asm(bdry)
    if not bd.issubset(prem):
        raise BoundaryExceedsPremises(
            "conclusion boundary mentions assumptions absent from the premises"
        )
    return prem.difference(bd)


def _annotation_entries(*payloads) -> set:
    """Annotation judgements demanded by the well-typed-annotation discipline."""
    out = set()
    for p in payloads:
        a = asm(p)
        for v in a.free_vars:
            if v.annotation is not None:
                out.add(plain(IsTy(v.annotation)))
        for m in a.metas:
            if m.annotation is not None:
                out.add(m.annotation)
    return out


def _require_annotations(theory: Theory, annotations: dict, *payloads) -> None:
    missing = [e for e in _annotation_entries(*payloads) if e not in annotations]
    if missing:
        raise AnnotationMismatch(
            f"annotations lack certificates: {missing[0]!r}"
        )


# ---------------------------------------------------------------------------
# Structural constructors


def cf_var(theory: Theory, v: FreeVar, cert_annotation: CertifiedJudgement) -> CertifiedJudgement:
    """CF-Var: from a certificate that the annotation is a type,  a^A : A."""
    if v.annotation is None:
        raise AnnotationMismatch("cf variables carry their type as annotation")
    got = _plain_body(cert_annotation, IsTy, "CF-Var")
    if got.ty != v.annotation:
        raise AnnotationMismatch(
            f"annotation certificate proves a different type for {v.name}"
        )
    ann = _merge(theory, cert_annotation)
    ann[cert_annotation.payload] = cert_annotation
    return _jdg(theory, plain(IsTm(v, v.annotation)), ann)


def cf_abstract_fwd(
    theory: Theory,
    cert_ty: CertifiedJudgement,
    cert_j: CertifiedJudgement,
    v: FreeVar,
) -> CertifiedJudgement:
    """CF-Abstr-Fwd: abstract the variable ``v`` out of a derived judgement."""
    ty = _plain_body(cert_ty, IsTy, "CF-Abstr").ty
    if v.annotation != ty:
        raise AnnotationMismatch("abstracted variable must be annotated with the binder type")
    if v in fvt(cert_j.payload):
        raise VarInAnnotation(
            f"{v.name} occurs in a typing annotation of the judgement"
        )
    payload = abstract_judgement(cert_j.payload, v, ty)
    return _jdg(theory, payload, _merge(theory, cert_ty, cert_j))


def cf_abstract(
    theory: Theory,
    cert_ty: CertifiedJudgement,
    cert_j: CertifiedJudgement,
    name_hint: str = "x",
) -> CertifiedJudgement:
    """Backward-form CF-Abstr: abstracts a deterministically chosen fresh
    variable, for callers that never named one."""
    from .syntax import atoms_in_use, fresh_name

    ty = _plain_body(cert_ty, IsTy, "CF-Abstr").ty
    avoid = atoms_in_use(cert_ty.payload, cert_j.payload)
    v = FreeVar(fresh_name(name_hint, avoid), ty)
    return cf_abstract_fwd(theory, cert_ty, cert_j, v)


def cf_abstract_bdry_fwd(
    theory: Theory,
    cert_ty: CertifiedJudgement,
    cert_b: CertifiedBoundary,
    v: FreeVar,
) -> CertifiedBoundary:
    ty = _plain_body(cert_ty, IsTy, "CF-Bdry-Abstr").ty
    if v.annotation != ty:
        raise AnnotationMismatch("abstracted variable must be annotated with the binder type")
    if v in fvt(cert_b.payload):
        raise VarInAnnotation(f"{v.name} occurs in a typing annotation of the boundary")
    payload = abstract_judgement(cert_b.payload, v, ty)
    return _bdry(theory, payload, _merge(theory, cert_ty, cert_b))


def cf_meta(
    theory: Theory,
    m: MetaName,
    term_certs: Sequence[CertifiedJudgement],
    cert_bdry: Optional[CertifiedBoundary] = None,
    annotation_cert: Optional[CertifiedBoundary] = None,
) -> CertifiedJudgement:
    """CF-Meta, economic when the substituted boundary certificate is omitted.

    The metavariable's own boundary annotation must be certified, either by
    ``annotation_cert`` or through the premises' annotation caches.
    """
    if m.annotation is None:
        raise AnnotationMismatch("cf metavariables carry their boundary as annotation")
    ann = _merge(theory, *term_certs, cert_bdry, annotation_cert)
    if annotation_cert is not None:
        if annotation_cert.payload != m.annotation:
            raise AnnotationMismatch("annotation certificate proves a different boundary")
        ann[m.annotation] = annotation_cert
    if m.annotation not in ann:
        raise AnnotationMismatch(f"boundary of {m.name} has not been certified")
    terms = [_plain_body(c, IsTm, "CF-Meta").term for c in term_certs]
    premises, bdry, conclusion = metavariable_rule_instance(m, m.annotation, terms)
    for c, need in zip(term_certs, premises):
        _want(c, need, "CF-Meta")
    if cert_bdry is not None and cert_bdry.payload != bdry:
        raise PremiseMismatch("CF-Meta boundary premise mismatch")
    _require_annotations(theory, ann, conclusion)
    return _jdg(theory, conclusion, ann)


def cf_meta_congr(
    theory: Theory,
    m: MetaName,
    s_certs: Sequence[CertifiedJudgement],
    t_certs: Sequence[CertifiedJudgement],
    eq_certs: Sequence[CertifiedJudgement],
    annotation_cert: Optional[CertifiedBoundary] = None,
) -> CertifiedJudgement:
    """CF-Meta-Congr-Ty / CF-Meta-Congr-Tm.

    The equations may carry primed right-hand sides (equal up to erasure to
    the ``t_certs`` terms).  In the term case the converted right side
    ``v = convert(M(ts), eps)`` is constructed here via equal substitution
    into the boundary type.
    """
    if m.annotation is None:
        raise AnnotationMismatch("cf metavariables carry their boundary as annotation")
    bdry = m.annotation
    k = len(bdry.prefix)
    if len(s_certs) != k or len(t_certs) != k or len(eq_certs) != k:
        raise ArityMismatch(f"{m.name} takes {k} arguments")
    ann = _merge(theory, *s_certs, *t_certs, *eq_certs, annotation_cert)
    if annotation_cert is not None:
        if annotation_cert.payload != bdry:
            raise AnnotationMismatch("annotation certificate proves a different boundary")
        ann[bdry] = annotation_cert
    if bdry not in ann:
        raise AnnotationMismatch(f"boundary of {m.name} has not been certified")
    ss = [_plain_body(c, IsTm, "CF-Meta-Congr").term for c in s_certs]
    ts = [_plain_body(c, IsTm, "CF-Meta-Congr").term for c in t_certs]
    for j in range(k):
        ty_s = subst_bound_many(bdry.prefix[j], ss[:j])
        ty_t = subst_bound_many(bdry.prefix[j], ts[:j])
        _want(s_certs[j], plain(IsTm(ss[j], ty_s)), "CF-Meta-Congr s-premise")
        _want(t_certs[j], plain(IsTm(ts[j], ty_t)), "CF-Meta-Congr t-premise")
        eq = _plain_body(eq_certs[j], EqTm, "CF-Meta-Congr equation")
        if eq.lhs != ss[j] or eq.ty != ty_s:
            raise PremiseMismatch("CF-Meta-Congr equation does not match the s-premise")
        if not erased_equal(eq.rhs, ts[j]):
            raise ErasureMismatch("CF-Meta-Congr primed side differs after erasure")
    body = bdry.body
    if isinstance(body, IsTyB):
        lhs = MetaApp(m, tuple(ss))
        rhs = MetaApp(m, tuple(ts))
        bthesis = EqTyB(lhs, rhs)
        beta = minimal_suitable(list(s_certs) + list(t_certs) + list(eq_certs), plain(bthesis))
        return _jdg(theory, plain(EqTy(lhs, rhs, beta)), ann)
    if not isinstance(body, IsTmB):
        raise NotObjectJudgement("metavariable congruence needs an object boundary")
    # construct v by converting M(ts) to the s-substituted boundary type
    ty_cert = _type_of_term_boundary_cert(theory, _bdry(theory, bdry, ann))
    ty_eq = cf_subst_eqty(theory, ty_cert, s_certs, t_certs, eq_certs)
    mt = cf_meta(theory, m, t_certs, annotation_cert=ann[bdry])
    v_cert = cf_conv_tm(theory, mt, cf_eqty_sym(theory, ty_eq))
    v = _plain_body(v_cert, IsTm, "CF-Meta-Congr").term
    lhs = MetaApp(m, tuple(ss))
    ty_s_full = subst_bound_many(body.ty, ss)
    bthesis = EqTmB(lhs, v, ty_s_full)
    beta = minimal_suitable(
        list(s_certs) + list(t_certs) + list(eq_certs) + [v_cert], plain(bthesis)
    )
    ann = _merge(theory, *s_certs, *t_certs, *eq_certs, v_cert)
    if annotation_cert is not None:
        ann[bdry] = annotation_cert
    return _jdg(theory, plain(EqTm(lhs, v, ty_s_full, beta)), ann)


def _type_of_term_boundary_cert(theory: Theory, cert_b: CertifiedBoundary) -> CertifiedJudgement:
    """Inverts a certified term boundary  {xs:As} (box : B)  to the certified
    judgement  {xs:As} B type  (the boundary rules demand it as premise)."""
    b = cert_b.payload
    if not isinstance(b.body, IsTmB):
        raise PremiseMismatch("expected a term boundary")
    return _jdg(theory, Abstracted(b.prefix, IsTy(b.body.ty)), dict(cert_b._annotations))


# ---------------------------------------------------------------------------
# Equality constructors


def cf_eqty_refl(
    theory: Theory, cert_a1: CertifiedJudgement, cert_a2: CertifiedJudgement
) -> CertifiedJudgement:
    a1 = _plain_body(cert_a1, IsTy, "CF-EqTy-Refl").ty
    a2 = _plain_body(cert_a2, IsTy, "CF-EqTy-Refl").ty
    if not erased_equal(a1, a2):
        raise ErasureMismatch("CF-EqTy-Refl sides differ after erasure")
    return _jdg(theory, plain(EqTy(a1, a2, EMPTY_ASSUMPTIONS)), _merge(theory, cert_a1, cert_a2))


def cf_eqty_sym(theory: Theory, cert: CertifiedJudgement) -> CertifiedJudgement:
    eq = _plain_body(cert, EqTy, "CF-EqTy-Sym")
    return _jdg(theory, plain(EqTy(eq.rhs, eq.lhs, eq.by)), _merge(theory, cert))


def cf_eqty_trans(
    theory: Theory, cert1: CertifiedJudgement, cert2: CertifiedJudgement
) -> CertifiedJudgement:
    e1 = _plain_body(cert1, EqTy, "CF-EqTy-Trans")
    e2 = _plain_body(cert2, EqTy, "CF-EqTy-Trans")
    if not erased_equal(e1.rhs, e2.lhs):
        raise ErasureMismatch("CF-EqTy-Trans middle types differ after erasure")
    bthesis = EqTyB(e1.lhs, e2.rhs)
    gamma = minimal_suitable([cert1, cert2], plain(bthesis))
    return _jdg(theory, plain(EqTy(e1.lhs, e2.rhs, gamma)), _merge(theory, cert1, cert2))


def cf_eqtm_refl(
    theory: Theory, cert_t1: CertifiedJudgement, cert_t2: CertifiedJudgement
) -> CertifiedJudgement:
    t1 = _plain_body(cert_t1, IsTm, "CF-EqTm-Refl")
    t2 = _plain_body(cert_t2, IsTm, "CF-EqTm-Refl")
    if t1.ty != t2.ty:
        raise TypeMismatch("CF-EqTm-Refl sides live at different types")
    if not erased_equal(t1.term, t2.term):
        raise ErasureMismatch("CF-EqTm-Refl sides differ after erasure")
    return _jdg(
        theory,
        plain(EqTm(t1.term, t2.term, t1.ty, EMPTY_ASSUMPTIONS)),
        _merge(theory, cert_t1, cert_t2),
    )


def cf_eqtm_sym(theory: Theory, cert: CertifiedJudgement) -> CertifiedJudgement:
    eq = _plain_body(cert, EqTm, "CF-EqTm-Sym")
    return _jdg(theory, plain(EqTm(eq.rhs, eq.lhs, eq.ty, eq.by)), _merge(theory, cert))


def cf_eqtm_trans(
    theory: Theory, cert1: CertifiedJudgement, cert2: CertifiedJudgement
) -> CertifiedJudgement:
    e1 = _plain_body(cert1, EqTm, "CF-EqTm-Trans")
    e2 = _plain_body(cert2, EqTm, "CF-EqTm-Trans")
    if e1.ty != e2.ty:
        raise TypeMismatch("CF-EqTm-Trans premises live at different types")
    if not erased_equal(e1.rhs, e2.lhs):
        raise ErasureMismatch("CF-EqTm-Trans middle terms differ after erasure")
    bthesis = EqTmB(e1.lhs, e2.rhs, e1.ty)
    gamma = minimal_suitable([cert1, cert2], plain(bthesis))
    return _jdg(theory, plain(EqTm(e1.lhs, e2.rhs, e1.ty, gamma)), _merge(theory, cert1, cert2))


def cf_conv_tm(
    theory: Theory, cert_t: CertifiedJudgement, cert_eq: CertifiedJudgement
) -> CertifiedJudgement:
    """CF-Conv-Tm: wrap the term in a conversion recording the equation's
    assumptions; the recorded set is the minimal one satisfying the side
    condition  asm(t, A, B, alpha) = asm(t, B, beta)."""
    tm = _plain_body(cert_t, IsTm, "CF-Conv-Tm")
    eq = _plain_body(cert_eq, EqTy, "CF-Conv-Tm")
    if tm.ty != eq.lhs:
        raise TypeMismatch("CF-Conv-Tm premise types differ")
    everything = asm(tm.term, tm.ty, eq.rhs, eq.by)
    beta = everything.difference(asm(tm.term, eq.rhs))
    out = IsTm(Convert(tm.term, beta), eq.rhs)
    if asm(out) != everything:
        raise BadNode("conversion side condition failed")
    return _jdg(theory, plain(out), _merge(theory, cert_t, cert_eq))


def cf_conv_eqtm(
    theory: Theory, cert_eq: CertifiedJudgement, cert_tyeq: CertifiedJudgement
) -> CertifiedJudgement:
    """CF-Conv-EqTm: convert both sides of a term equation along a type
    equation, recording the minimal sets on each side."""
    eq = _plain_body(cert_eq, EqTm, "CF-Conv-EqTm")
    tyeq = _plain_body(cert_tyeq, EqTy, "CF-Conv-EqTm")
    if eq.ty != tyeq.lhs:
        raise TypeMismatch("CF-Conv-EqTm premise types differ")
    gamma = asm(eq.lhs, eq.ty, tyeq.rhs, tyeq.by).difference(asm(eq.lhs, tyeq.rhs))
    delta = asm(eq.rhs, eq.ty, tyeq.rhs, tyeq.by).difference(asm(eq.rhs, tyeq.rhs))
    out = EqTm(Convert(eq.lhs, gamma), Convert(eq.rhs, delta), tyeq.rhs, eq.by)
    return _jdg(theory, plain(out), _merge(theory, cert_eq, cert_tyeq))


# ---------------------------------------------------------------------------
# Boundary constructors


def cf_bdry_ty(theory: Theory) -> CertifiedBoundary:
    return _bdry(theory, plain(IsTyB()), {})


def cf_bdry_tm(theory: Theory, cert_a: CertifiedJudgement) -> CertifiedBoundary:
    a = _plain_body(cert_a, IsTy, "CF-Bdry-Tm").ty
    return _bdry(theory, plain(IsTmB(a)), _merge(theory, cert_a))


def cf_bdry_eqty(
    theory: Theory, cert_a: CertifiedJudgement, cert_b: CertifiedJudgement
) -> CertifiedBoundary:
    a = _plain_body(cert_a, IsTy, "CF-Bdry-EqTy").ty
    b = _plain_body(cert_b, IsTy, "CF-Bdry-EqTy").ty
    return _bdry(theory, plain(EqTyB(a, b)), _merge(theory, cert_a, cert_b))


def cf_bdry_eqtm(
    theory: Theory,
    cert_a: CertifiedJudgement,
    cert_s: CertifiedJudgement,
    cert_t: CertifiedJudgement,
) -> CertifiedBoundary:
    a = _plain_body(cert_a, IsTy, "CF-Bdry-EqTm").ty
    s = _plain_body(cert_s, IsTm, "CF-Bdry-EqTm")
    t = _plain_body(cert_t, IsTm, "CF-Bdry-EqTm")
    if s.ty != a or t.ty != a:
        raise TypeMismatch("CF-Bdry-EqTm sides must live at the stated type")
    return _bdry(theory, plain(EqTmB(s.term, t.term, a)), _merge(theory, cert_a, cert_s, cert_t))


# ---------------------------------------------------------------------------
# Specific rules and congruence


def cf_apply_rule(
    theory: Theory,
    rule_name: str,
    premise_certs: Sequence[CertifiedJudgement],
    cert_bdry: Optional[CertifiedBoundary] = None,
) -> CertifiedJudgement:
    """Applies a specific rule; the instantiation is read off the premise
    certificates' heads.  Without a boundary certificate this is the economic
    variant (CF-Specific-Eco), valid because theories are finitary-checked."""
    trule = theory.rule(rule_name)
    rule = trule.rule
    if len(premise_certs) != len(rule.premises):
        raise PremiseMismatch(
            f"rule {rule_name} has {len(rule.premises)} premises, got {len(premise_certs)}"
        )
    entries = []
    for (m, b), cert in zip(rule.premises, premise_certs):
        _, head = unfill(cert.payload)
        entries.append((m, head))
    inst = Instantiation(entries)
    premises, bdry, conclusion = rule_instance_premises(rule, inst)
    for cert, need in zip(premise_certs, premises):
        _want(cert, need, f"rule {rule_name}")
    if cert_bdry is not None and cert_bdry.payload != bdry:
        raise PremiseMismatch(f"rule {rule_name}: boundary premise mismatch")
    ann = _merge(theory, *premise_certs, cert_bdry)
    _require_annotations(theory, ann, conclusion)
    return _jdg(theory, conclusion, ann)


def cf_congruence(
    theory: Theory,
    rule_name: str,
    left_certs: Sequence[CertifiedJudgement],
    right_certs: Sequence[CertifiedJudgement],
    eq_certs: Sequence[CertifiedJudgement],
    t_prime_cert: Optional[CertifiedJudgement] = None,
) -> CertifiedJudgement:
    """The context-free congruence closure rule of an object rule.

    ``eq_certs`` pair up with the rule's object premises in order; their
    right-hand sides may be any primed heads agreeing with the right
    instantiation up to erasure.  Term rules need ``t_prime_cert`` deriving
    ``t' : I*A`` with ``erase t' = erase J*t``.
    """
    trule = theory.rule(rule_name)
    rule = trule.rule
    if not rule.is_object:
        raise NotObjectJudgement(f"rule {rule_name} is not an object rule")
    n = len(rule.premises)
    if len(left_certs) != n or len(right_certs) != n:
        raise PremiseMismatch("congruence needs both instantiations in full")
    left = Instantiation(
        [(m, unfill(c.payload)[1]) for (m, _), c in zip(rule.premises, left_certs)]
    )
    right = Instantiation(
        [(m, unfill(c.payload)[1]) for (m, _), c in zip(rule.premises, right_certs)]
    )
    lp, _, _ = rule_instance_premises(rule, left)
    rp, _, _ = rule_instance_premises(rule, right)
    for cert, need in zip(left_certs, lp):
        _want(cert, need, f"congruence {rule_name} (left)")
    for cert, need in zip(right_certs, rp):
        _want(cert, need, f"congruence {rule_name} (right)")
    object_idx = [
        i for i, (_, b) in enumerate(rule.premises) if boundary_arity(b).cls.is_object
    ]
    if len(eq_certs) != len(object_idx):
        raise PremiseMismatch("one equation per object premise required")
    for idx, eq_cert in zip(object_idx, eq_certs):
        m, b = rule.premises[idx]
        want_b = act(left.restrict(idx + 1), b)
        got = eq_cert.payload
        f_i = left[m]
        g_i = right[m]
        fe = fill_equation(want_b, f_i, _head_of_equation(got, want_b), got_by(got))
        if got != fe:
            raise PremiseMismatch(
                f"congruence {rule_name}: equation {idx + 1} does not fill the boundary"
            )
        if not erased_equal(_head_of_equation(got, want_b), g_i):
            raise ErasureMismatch(
                f"congruence {rule_name}: primed head differs from the right instance"
            )
    bdry_thesis, head = unfill(plain(rule.conclusion))
    concl_left = act(left, bdry_thesis)
    all_premises: list = list(left_certs) + list(right_certs) + list(eq_certs)
    if isinstance(rule.conclusion, IsTy):
        lhs = act(left, rule.conclusion.ty)
        rhs = act(right, rule.conclusion.ty)
        beta = minimal_suitable(all_premises, plain(EqTyB(lhs, rhs)))
        return _jdg(theory, plain(EqTy(lhs, rhs, beta)), _merge(theory, *all_premises))
    lhs = act(left, rule.conclusion.term)
    ty_l = act(left, rule.conclusion.ty)
    if t_prime_cert is None:
        raise PremiseMismatch("term congruence needs the converted right side t'")
    tp = _plain_body(t_prime_cert, IsTm, "congruence t'")
    if tp.ty != ty_l:
        raise TypeMismatch("t' must live at the left-instantiated type")
    if not erased_equal(tp.term, act(right, rule.conclusion.term)):
        raise ErasureMismatch("t' differs from the right instance after erasure")
    all_premises.append(t_prime_cert)
    beta = minimal_suitable(all_premises, plain(EqTmB(lhs, tp.term, ty_l)))
    return _jdg(
        theory, plain(EqTm(lhs, tp.term, ty_l, beta)), _merge(theory, *all_premises)
    )


def _head_of_equation(j: AbstractedJudgement, b: AbstractedBoundary) -> Argument:
    """The right head of an equation filled into an object boundary."""
    body = j.body
    if isinstance(body, EqTy):
        inner: Argument = ExprArg(body.rhs)
    elif isinstance(body, EqTm):
        inner = ExprArg(body.rhs)
    else:
        raise PremiseMismatch("expected an equation")
    for _ in range(len(j.prefix)):
        inner = Abstr(inner)
    return inner


def got_by(j: AbstractedJudgement):
    body = j.body
    if isinstance(body, (EqTy, EqTm)):
        return body.by
    raise PremiseMismatch("expected an equation")


# ---------------------------------------------------------------------------
# Substitution and instantiation


def cf_substitute(
    theory: Theory, cert_abs: CertifiedJudgement, cert_t: CertifiedJudgement
) -> CertifiedJudgement:
    """CF-Subst: plug a derived term into the outermost binder."""
    j = cert_abs.payload
    if not j.prefix:
        raise PremiseMismatch("CF-Subst needs an abstracted judgement")
    tm = _plain_body(cert_t, IsTm, "CF-Subst")
    if tm.ty != j.prefix[0]:
        raise TypeMismatch("substituted term does not live at the binder type")
    payload = instantiate_prefix(j, [tm.term])
    return _jdg(theory, payload, _merge(theory, cert_abs, cert_t))


def cf_subst_bdry(
    theory: Theory, cert_abs: CertifiedBoundary, cert_t: CertifiedJudgement
) -> CertifiedBoundary:
    b = cert_abs.payload
    if not b.prefix:
        raise PremiseMismatch("CF-Bdry-Subst needs an abstracted boundary")
    tm = _plain_body(cert_t, IsTm, "CF-Bdry-Subst")
    if tm.ty != b.prefix[0]:
        raise TypeMismatch("substituted term does not live at the binder type")
    payload = instantiate_prefix(b, [tm.term])
    return _bdry(theory, payload, _merge(theory, cert_abs, cert_t))


def _check_subst_eq_premises(
    cert_abs: CertifiedJudgement,
    s_certs: Sequence[CertifiedJudgement],
    t_certs: Sequence[CertifiedJudgement],
    eq_certs: Sequence[CertifiedJudgement],
) -> tuple[list[Expr], list[Expr]]:
    j = cert_abs.payload
    n = len(s_certs)
    if len(t_certs) != n or len(eq_certs) != n or n > len(j.prefix):
        raise PremiseMismatch("substitution triples do not match the abstraction")
    ss = [_plain_body(c, IsTm, "CF-Subst-Eq").term for c in s_certs]
    ts = [_plain_body(c, IsTm, "CF-Subst-Eq").term for c in t_certs]
    for i in range(n):
        ty_s = subst_bound_many(j.prefix[i], ss[:i])
        ty_t = subst_bound_many(j.prefix[i], ts[:i])
        _want(s_certs[i], plain(IsTm(ss[i], ty_s)), "CF-Subst-Eq s-premise")
        _want(t_certs[i], plain(IsTm(ts[i], ty_t)), "CF-Subst-Eq t-premise")
        eq = _plain_body(eq_certs[i], EqTm, "CF-Subst-Eq equation")
        if eq.lhs != ss[i] or eq.ty != ty_s:
            raise PremiseMismatch("CF-Subst-Eq equation does not match the s-premise")
        if not erased_equal(eq.rhs, ts[i]):
            raise ErasureMismatch("CF-Subst-Eq primed side differs after erasure")
    return ss, ts


def cf_subst_eqty(
    theory: Theory,
    cert_abs: CertifiedJudgement,
    s_certs: Sequence[CertifiedJudgement],
    t_certs: Sequence[CertifiedJudgement],
    eq_certs: Sequence[CertifiedJudgement],
) -> CertifiedJudgement:
    """CF-Subst-EqTy: equal substitution into an abstracted type judgement."""
    j = cert_abs.payload
    ss, ts = _check_subst_eq_premises(cert_abs, s_certs, t_certs, eq_certs)
    left = instantiate_prefix(j, ss)
    right = instantiate_prefix(j, ts)
    if not isinstance(left.body, IsTy):
        raise NotObjectJudgement("CF-Subst-EqTy applies to type judgements")
    bth = Abstracted(left.prefix, EqTyB(left.body.ty, right.body.ty))
    prem = list(s_certs) + list(t_certs) + list(eq_certs) + [cert_abs]
    beta = minimal_suitable(prem, bth)
    payload = Abstracted(left.prefix, EqTy(left.body.ty, right.body.ty, beta))
    return _jdg(theory, payload, _merge(theory, *prem))


def cf_subst_eqtm(
    theory: Theory,
    cert_abs: CertifiedJudgement,
    s_certs: Sequence[CertifiedJudgement],
    t_certs: Sequence[CertifiedJudgement],
    eq_certs: Sequence[CertifiedJudgement],
) -> CertifiedJudgement:
    """CF-Subst-EqTm: the right-hand side is the t-substituted term wrapped
    in a conversion recording the suitable set."""
    j = cert_abs.payload
    ss, ts = _check_subst_eq_premises(cert_abs, s_certs, t_certs, eq_certs)
    left = instantiate_prefix(j, ss)
    right = instantiate_prefix(j, ts)
    if not isinstance(left.body, IsTm):
        raise NotObjectJudgement("CF-Subst-EqTm applies to term judgements")
    bth = Abstracted(left.prefix, EqTmB(left.body.term, right.body.term, left.body.ty))
    prem = list(s_certs) + list(t_certs) + list(eq_certs) + [cert_abs]
    beta = minimal_suitable(prem, bth)
    payload = Abstracted(
        left.prefix,
        EqTm(left.body.term, Convert(right.body.term, beta), left.body.ty, beta),
    )
    return _jdg(theory, payload, _merge(theory, *prem))


def binder_type_cert(theory: Theory, cert_b: CertifiedBoundary, j: int) -> CertifiedJudgement:
    """Inverts a certified abstracted boundary to the certified judgement
    that its ``j``-th binder type is a type (a premise of the abstraction
    rule that built it)."""
    b = cert_b.payload
    if j < 0 or j >= len(b.prefix):
        raise PremiseMismatch("no such binder")
    return _jdg(
        theory, Abstracted(b.prefix[:j], IsTy(b.prefix[j])), dict(cert_b._annotations)
    )


def cf_instantiate_bdry(
    theory: Theory,
    entries: Sequence[tuple[MetaName, CertifiedJudgement]],
    cert_b: CertifiedBoundary,
) -> CertifiedBoundary:
    """Instantiation admissibility for boundaries."""
    inst_entries = []
    for m, cert in entries:
        if m.annotation is None:
            raise AnnotationMismatch("cf metavariables carry boundary annotations")
        _, head = unfill(cert.payload)
        inst_entries.append((m, head))
    inst = Instantiation(inst_entries)
    for i, (m, cert) in enumerate(entries, start=1):
        want = fill(act(inst.restrict(i), m.annotation), inst[m])
        _want(cert, want, "cf_instantiate_bdry")
    missing = [m for m in mv(cert_b.payload) if m not in inst]
    if missing:
        raise UnknownMeta(missing[0].name)
    payload = act(inst, cert_b.payload)
    ann = _merge(theory, cert_b, *[c for _, c in entries])
    _require_annotations(theory, ann, payload)
    return _bdry(theory, payload, ann)


def cf_instantiate(
    theory: Theory,
    entries: Sequence[tuple[MetaName, CertifiedJudgement]],
    cert_j: CertifiedJudgement,
) -> CertifiedJudgement:
    """Context-free admissibility of instantiation: act on the payload after
    validating that each certificate fills its restricted boundary."""
    inst_entries = []
    for m, cert in entries:
        if m.annotation is None:
            raise AnnotationMismatch("cf metavariables carry boundary annotations")
        _, head = unfill(cert.payload)
        inst_entries.append((m, head))
    inst = Instantiation(inst_entries)
    for i, (m, cert) in enumerate(entries, start=1):
        want = fill(act(inst.restrict(i), m.annotation), inst[m])
        _want(cert, want, "cf_instantiate")
    missing = [m for m in mv(cert_j.payload) if m not in inst]
    if missing:
        raise UnknownMeta(missing[0].name)
    payload = act(inst, cert_j.payload)
    ann = _merge(theory, cert_j, *[c for _, c in entries])
    _require_annotations(theory, ann, payload)
    return _jdg(theory, payload, ann)


# ---------------------------------------------------------------------------
# Presuppositions, natural types, inversion, strengthening


def presuppositions_cf(theory: Theory, cert: CertifiedJudgement) -> CertifiedBoundary:
    """Context-free presuppositivity: the boundary of a certified judgement
    with well-typed annotations is itself derivable."""
    b, _ = unfill(cert.payload)
    return _bdry(theory, b, dict(cert._annotations))


def boundary_components(theory: Theory, cert_b: CertifiedBoundary) -> tuple:
    """Inverts a non-abstracted certified boundary into certificates of its
    components (the premises of the boundary closure rule that built it)."""
    b = cert_b.payload
    if b.prefix:
        raise PremiseMismatch("open the abstraction first")
    ann = dict(cert_b._annotations)
    match b.body:
        case IsTyB():
            return ()
        case IsTmB(ty=a):
            return (_jdg(theory, plain(IsTy(a)), ann),)
        case EqTyB(lhs=a, rhs=c):
            return (_jdg(theory, plain(IsTy(a)), ann), _jdg(theory, plain(IsTy(c)), ann))
        case EqTmB(lhs=s, rhs=t, ty=a):
            return (
                _jdg(theory, plain(IsTy(a)), ann),
                _jdg(theory, plain(IsTm(s, a)), ann),
                _jdg(theory, plain(IsTm(t, a)), ann),
            )
    raise PremiseMismatch(f"not a boundary: {b.body!r}")


def natural_type_cf(theory: Theory, t: Expr) -> Expr:
    """The natural type of a term over a standard cf-theory."""
    match t:
        case FreeVar(annotation=a):
            if a is None:
                raise AnnotationMismatch("cf variables carry annotations")
            return a
        case MetaApp(meta=m, args=args):
            if m.annotation is None or not isinstance(m.annotation.body, IsTmB):
                raise NotObjectJudgement(f"{m.name} is not a term metavariable")
            return subst_bound_many(m.annotation.body.ty, list(args))
        case SymbolApp(symbol=s, args=args):
            from .errors import NoSymbolRule

            try:
                trule = theory.symbol_rule_for(s)
            except NoSymbolRule as exc:
                raise NonStandardTheory(str(exc)) from exc
            concl = trule.rule.conclusion
            if not isinstance(concl, IsTm):
                raise NonStandardTheory(f"{s} is not a term symbol")
            inst = Instantiation(
                [(m, a) for (m, _), a in zip(trule.rule.premises, args)]
            )
            return act(inst, concl.ty)
        case Convert(term=inner):
            return natural_type_cf(theory, inner)
    raise NotObjectJudgement(f"no natural type for {t!r}")


strip = strip_conversions
residue = conversion_residue


def invert_cf(theory: Theory, cert: CertifiedJudgement) -> CertifiedJudgement:
    """Context-free inversion: recover the stump  strip(t) : nat(t), or the
    single conversion  convert(strip t, residue t) : A  when A differs."""
    tm = _plain_body(cert, IsTm, "invert")
    nat = natural_type_cf(theory, tm.term)
    stripped = strip_conversions(tm.term)
    res = conversion_residue(tm.term)
    ann = dict(cert._annotations)
    if tm.ty == nat and stripped == tm.term:
        return cert
    if tm.ty == nat:
        return _jdg(theory, plain(IsTm(stripped, nat)), ann)
    return _jdg(theory, plain(IsTm(Convert(stripped, res), tm.ty)), ann)


def natural_type_eq(theory: Theory, cert: CertifiedJudgement) -> CertifiedJudgement:
    """The equation  nat(t) == A by residue(t)  for a certified  t : A."""
    tm = _plain_body(cert, IsTm, "natural_type_eq")
    nat = natural_type_cf(theory, tm.term)
    res = conversion_residue(tm.term)
    return _jdg(theory, plain(EqTy(nat, tm.ty, res)), dict(cert._annotations))


def uniqueness_of_typing_cf(
    theory: Theory, cert1: CertifiedJudgement, cert2: CertifiedJudgement
) -> CertifiedJudgement:
    """From  t : A  and  t : B, the equation  A == B  with assumptions drawn
    from  t  alone."""
    t1 = _plain_body(cert1, IsTm, "uniqueness")
    t2 = _plain_body(cert2, IsTm, "uniqueness")
    if t1.term != t2.term:
        raise PremiseMismatch("uniqueness applies to two typings of one term")
    e1 = natural_type_eq(theory, cert1)
    e2 = natural_type_eq(theory, cert2)
    return cf_eqty_trans(theory, cf_eqty_sym(theory, e1), e2)


def strengthen(theory: Theory, cert: CertifiedJudgement, position: Optional[int] = None) -> CertifiedJudgement:
    """Removes the binder at ``position`` (default: the innermost) when the
    remainder of the judgement does not use it."""
    j = cert.payload
    if not j.prefix:
        raise PremiseMismatch("nothing to strengthen")
    pos = len(j.prefix) - 1 if position is None else position
    if pos < 0 or pos >= len(j.prefix):
        raise PremiseMismatch("no such binder")
    n = len(j.prefix)
    # The binder `pos` is referenced as index (i - 1 - pos) inside prefix[i]
    # for i > pos, and as (n - 1 - pos) inside the body.
    for i in range(pos + 1, n):
        if (i - 1 - pos) in bv_at_root(j.prefix[i]):
            raise BinderUsed(f"binder {pos} occurs in a later binder type")
    if (n - 1 - pos) in bv_at_root(j.body):
        raise BinderUsed(f"binder {pos} occurs in the judgement")
    from .syntax import shift, subst_bound

    marker = FreeVar("#strengthen", None)
    new_prefix = tuple(
        subst_bound(ty, marker, i - 1 - pos) if i > pos else ty
        for i, ty in enumerate(j.prefix)
        if i != pos
    )
    new_body = subst_bound(j.body, marker, n - 1 - pos)
    payload = Abstracted(new_prefix, new_body)
    return _jdg(theory, payload, dict(cert._annotations))


def bv_at_root(x) -> frozenset[int]:
    return bv(x)


def boundary_convert(
    theory: Theory,
    cert_b1: CertifiedBoundary,
    cert_b2: CertifiedBoundary,
    cert_j: CertifiedJudgement,
) -> CertifiedJudgement:
    """Boundary conversion: move the head of a judgement onto an erasure-equal
    boundary, inserting conversions as the constructive proof prescribes."""
    b1, b2 = cert_b1.payload, cert_b2.payload
    if erase(b1) != erase(b2):
        raise ErasureMismatch("boundaries differ after erasure")
    j = cert_j.payload
    got_b, _ = unfill(j)
    if got_b != b1:
        raise PremiseMismatch("judgement does not fill the first boundary")
    if b1 == b2:
        return cert_j
    ann = _merge(theory, cert_b1, cert_b2, cert_j)

    if not b1.prefix:
        return _boundary_convert_plain(theory, b1.body, b2.body, j.body, ann)

    # abstracted case: open with a fresh variable at the second boundary's
    # binder type, convert it into the first, recurse, and re-abstract
    from .syntax import atoms_in_use, fresh_name

    a2_ty = b2.prefix[0]
    avoid = atoms_in_use(b1, b2, j)
    v = FreeVar(fresh_name("a", avoid), a2_ty)
    ty2_cert = _jdg(theory, plain(IsTy(a2_ty)), ann)
    var_cert = cf_var(theory, v, ty2_cert)
    ty1_cert = _jdg(theory, plain(IsTy(b1.prefix[0])), ann)
    eq = cf_eqty_refl(theory, ty2_cert, ty1_cert)
    conv_var = cf_conv_tm(theory, var_cert, eq)
    inner_j = cf_substitute(theory, cert_j, conv_var)
    inner_b1 = cf_subst_bdry(theory, cert_b1, conv_var)
    inner_b2 = cf_subst_bdry(theory, cert_b2, var_cert)
    inner = boundary_convert(theory, inner_b1, inner_b2, inner_j)
    return cf_abstract_fwd(theory, ty2_cert, inner, v)


def _boundary_convert_plain(theory, bt1, bt2, jt, ann) -> CertifiedJudgement:
    match bt1, bt2:
        case IsTyB(), IsTyB():
            return _jdg(theory, plain(jt), ann)
        case IsTmB(ty=a1), IsTmB(ty=a2):
            t_cert = _jdg(theory, plain(jt), ann)
            a1_cert = _jdg(theory, plain(IsTy(a1)), ann)
            a2_cert = _jdg(theory, plain(IsTy(a2)), ann)
            eq = cf_eqty_refl(theory, a1_cert, a2_cert)
            return cf_conv_tm(theory, t_cert, eq)
        case EqTyB(lhs=a1, rhs=c1), EqTyB(lhs=a2, rhs=c2):
            assert isinstance(jt, EqTy)
            e2 = (
                asm(jt.by, a1, c1).difference(asm(a2, c2))
            )
            return _jdg(theory, plain(EqTy(a2, c2, e2)), ann)
        case EqTmB(lhs=s1, rhs=t1, ty=a1), EqTmB(lhs=s2, rhs=t2, ty=a2):
            assert isinstance(jt, EqTm)
            e2 = asm(jt.by, s1, t1, a1).difference(asm(s2, t2, a2))
            return _jdg(theory, plain(EqTm(s2, t2, a2, e2)), ann)
    raise ErasureMismatch("boundary shapes differ")
