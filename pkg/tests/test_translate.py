"""Translations between presentations: suitable contexts, theory erasure,
cf -> tt reconstruction, tt -> cf elaboration, round trips."""

import pytest

from fintt import cf_engine as cf
from fintt import tt_engine as tt
from fintt import translate as tr
from fintt.derive import CFDeriver, TTDeriver
from fintt.judgements import EMPTY_METAS, EMPTY_VARS, MetaCtx, VarCtx, plain
from fintt.syntax import (
    Abstr,
    AssumptionSet,
    BoundVar,
    DUMMY,
    EqTm,
    EqTy,
    ExprArg,
    FreeVar,
    IsTm,
    IsTy,
    MetaName,
    SymbolApp,
    asm,
    double_erase,
    erase,
    erased_equal,
    fv,
    mv,
)
from fintt.theory import check_finitary, check_standard

BOOL = SymbolApp("bool", ())
NAT = SymbolApp("nat", ())


def id_ty(a, s, t):
    return SymbolApp("Id", (ExprArg(a), ExprArg(s), ExprArg(t)))


def test_suitable_context_simple():
    a = FreeVar("a", BOOL)
    mctx, vctx = tr.suitable_context([], [a])
    assert list(vctx.entries) == [(a, BOOL)]
    assert len(mctx) == 0


def test_suitable_context_pulls_in_dependencies():
    a = FreeVar("a", BOOL)
    s = FreeVar("s", BOOL)
    b = FreeVar("b", id_ty(BOOL, a, s))
    mctx, vctx = tr.suitable_context([], [b])
    names = [v for v, _ in vctx.entries]
    assert set(names) == {a, s, b}
    # dependencies come first
    assert names.index(b) > names.index(a)
    assert names.index(b) > names.index(s)
    # no spurious entries: exactly the dependence closure
    assert set(names) == set(tr.dependence_closure([], [b])[1])


def test_cf_theory_to_tt_is_finitary(corpus_cf):
    t_tt = tr.cf_theory_to_tt(corpus_cf)
    check_finitary(t_tt)
    check_standard(t_tt)


def test_cf_to_tt_var_case(corpus_cf, corpus_tt):
    d = CFDeriver(corpus_cf)
    ty_bool = d.ty(BOOL)
    a = FreeVar("a", BOOL)
    va = cf.cf_var(corpus_cf, a, ty_bool)
    mctx, vctx, deriv = tr.cf_judgement_to_tt(corpus_cf, corpus_tt, va)
    assert deriv.rule == "TT-Var"
    assert deriv.conclusion.jdg == plain(IsTm(a, BOOL))
    assert list(vctx.entries) == [(a, BOOL)]
    tt.check_derivation(corpus_tt, deriv)


def test_cf_to_tt_closed_pi(corpus_cf, corpus_tt):
    d = CFDeriver(corpus_cf)
    ty_bool = d.ty(BOOL)
    a = FreeVar("a", BOOL)
    fam = cf.cf_abstract_fwd(corpus_cf, ty_bool, ty_bool, a)
    pi = cf.cf_apply_rule(corpus_cf, "Pi", [ty_bool, fam])
    mctx, vctx, deriv = tr.cf_judgement_to_tt(corpus_cf, corpus_tt, pi)
    assert len(vctx) == 0 and len(mctx) == 0
    assert deriv.conclusion.jdg == erase(pi.payload)
    tt.check_derivation(corpus_tt, deriv)


@pytest.fixture()
def reflect_cert(corpus_cf):
    d = CFDeriver(corpus_cf)
    ty_bool = d.ty(BOOL)
    a, b = FreeVar("a", BOOL), FreeVar("b", BOOL)
    va, vb = cf.cf_var(corpus_cf, a, ty_bool), cf.cf_var(corpus_cf, b, ty_bool)
    idt = id_ty(BOOL, a, b)
    ty_id = d.ty(idt)
    p = FreeVar("p", idt)
    vp = cf.cf_var(corpus_cf, p, ty_id)
    return cf.cf_apply_rule(corpus_cf, "eq_reflect", [ty_bool, va, vb, vp])


def test_cf_to_tt_equality_reflection(reflect_cert, corpus_cf, corpus_tt):
    """The equation's proof term is recovered from the assumption set."""
    mctx, vctx, deriv = tr.cf_judgement_to_tt(corpus_cf, corpus_tt, reflect_cert)
    assert deriv.conclusion.jdg == erase(reflect_cert.payload)
    tt.check_derivation(corpus_tt, deriv)
    # the suitable context is exactly the dependence closure of the judgement
    ms, vs = tr.dependence_closure(
        list(mv(reflect_cert.payload)), list(fv(reflect_cert.payload))
    )
    assert [v for v, _ in vctx.entries] == vs
    # and the context evidence derivations check
    translator = tr.CfToTT(corpus_cf, corpus_tt)
    m_d, v_d = translator.context_evidence(mctx, vctx)
    tt.check_derivation(corpus_tt, m_d)
    tt.check_derivation(corpus_tt, v_d)


def test_tt_to_cf_var(corpus_cf, corpus_tt):
    ttd = TTDeriver(corpus_tt)
    a = FreeVar("a")
    vctx = VarCtx([(a, BOOL)])
    d = tt.tt_var(corpus_tt, EMPTY_METAS, vctx, a)
    mctx_d = tt.mctx_empty(corpus_tt)
    vctx_d = ttd.vctx_wf(EMPTY_METAS, vctx)
    cert = tr.tt_to_cf(corpus_tt, corpus_cf, d, mctx_d, vctx_d)
    assert double_erase(cert.payload) == d.conclusion.jdg
    body = cert.payload.body
    assert body.term == FreeVar("a", BOOL)


def test_tt_to_cf_closed_pi(corpus_cf, corpus_tt):
    from fintt.instantiation import Instantiation

    th = corpus_tt
    d_bool = tt.specific(th, EMPTY_METAS, EMPTY_VARS, "bool", Instantiation([]), [])
    a = FreeVar("a")
    d_bool_a = tt.specific(th, EMPTY_METAS, VarCtx([(a, BOOL)]), "bool", Instantiation([]), [])
    fam = tt.tt_abstr(th, d_bool, d_bool_a, a)
    inst = Instantiation([(MetaName("A"), ExprArg(BOOL)), (MetaName("B"), Abstr(ExprArg(BOOL)))])
    d = tt.specific(th, EMPTY_METAS, EMPTY_VARS, "Pi", inst, [d_bool, fam])
    mctx_d = tt.mctx_empty(th)
    vctx_d = tt.vctx_empty(th, EMPTY_METAS)
    cert = tr.tt_to_cf(th, corpus_cf, d, mctx_d, vctx_d)
    assert double_erase(cert.payload) == d.conclusion.jdg
    assert cert.payload == plain(IsTy(SymbolApp("Pi", (ExprArg(BOOL), Abstr(ExprArg(BOOL))))))


def test_tt_to_cf_equality_reflection(corpus_cf, corpus_tt):
    from fintt.instantiation import Instantiation

    th = corpus_tt
    ttd = TTDeriver(th)
    a, b, p = FreeVar("a"), FreeVar("b"), FreeVar("p")
    idt = id_ty(BOOL, a, b)
    vctx = VarCtx([(a, BOOL), (b, BOOL), (p, idt)])
    d = tt.specific(
        th,
        EMPTY_METAS,
        vctx,
        "eq_reflect",
        Instantiation(
            [
                (MetaName("A"), ExprArg(BOOL)),
                (MetaName("s"), ExprArg(a)),
                (MetaName("t"), ExprArg(b)),
                (MetaName("p"), ExprArg(p)),
            ]
        ),
        [
            ttd.ty(EMPTY_METAS, vctx, BOOL),
            tt.tt_var(th, EMPTY_METAS, vctx, a),
            tt.tt_var(th, EMPTY_METAS, vctx, b),
            tt.tt_var(th, EMPTY_METAS, vctx, p),
        ],
    )
    mctx_d = tt.mctx_empty(th)
    vctx_d = ttd.vctx_wf(EMPTY_METAS, vctx)
    cert = tr.tt_to_cf(th, corpus_cf, d, mctx_d, vctx_d)
    assert double_erase(cert.payload) == d.conclusion.jdg
    body = cert.payload.body
    assert isinstance(body, EqTm)
    # the proof term is recorded
    assert any(v.name == "p" for v in body.by.free_vars)


def test_round_trip_cf_tt_cf(reflect_cert, corpus_cf, corpus_tt):
    back = tr.round_trip_cf(corpus_cf, corpus_tt, reflect_cert)
    assert erased_equal(back.payload, reflect_cert.payload)


def test_round_trip_closed(corpus_cf, corpus_tt):
    d = CFDeriver(corpus_cf)
    ty_bool = d.ty(BOOL)
    a = FreeVar("a", BOOL)
    fam = cf.cf_abstract_fwd(corpus_cf, ty_bool, ty_bool, a)
    pi = cf.cf_apply_rule(corpus_cf, "Pi", [ty_bool, fam])
    back = tr.round_trip_cf(corpus_cf, corpus_tt, pi)
    assert erased_equal(back.payload, pi.payload)


# ---------------------------------------------------------------------------
# Transported congruence


def _pi_congruence_inputs(corpus_cf):
    d = CFDeriver(corpus_cf)
    ty_bool = d.ty(BOOL)
    ty_nat = d.ty(NAT)
    a = FreeVar("a", BOOL)
    p = FreeVar("p", id_ty(BOOL, a, a))
    # A1 = bool, A2 = Id(bool,a,a)-free equation? keep it honest: use an
    # equation derivable in the corpus: reflexivity on convertible types and
    # the equality-reflection consequence for the family position.
    eq_a = cf.cf_eqty_refl(corpus_cf, ty_bool, ty_bool)  # bool == bool by {}
    fam = cf.cf_abstract_fwd(corpus_cf, ty_bool, ty_nat, a)  # {x:bool} nat type
    b = FreeVar("b", BOOL)
    fam_eq = cf.cf_abstract_fwd(
        corpus_cf, ty_bool, cf.cf_eqty_refl(corpus_cf, ty_nat, ty_nat), b
    )  # {x:bool} nat == nat by {}
    return eq_a, fam_eq, fam


def test_transported_congruence_pi(corpus_cf, corpus_tt):
    eq_a, fam_eq, fam = _pi_congruence_inputs(corpus_cf)
    out = tr.transported_congruence(
        corpus_cf, corpus_tt, "Pi", [eq_a, fam_eq]
    )
    body = out.payload.body
    assert isinstance(body, EqTy)
    pi = SymbolApp("Pi", (ExprArg(BOOL), Abstr(ExprArg(NAT))))
    assert erased_equal(body.lhs, pi)
    assert erased_equal(body.rhs, pi)
    # beta is drawn from the inputs
    inputs = asm(eq_a.payload, fam_eq.payload)
    assert body.by.issubset(inputs)


def test_transported_congruence_matches_cf_congruence(corpus_cf, corpus_tt):
    """The transported instance agrees with the direct cf congruence rule up
    to erasure."""
    eq_a, fam_eq, fam = _pi_congruence_inputs(corpus_cf)
    d = CFDeriver(corpus_cf)
    ty_bool = d.ty(BOOL)
    direct = cf.cf_congruence(
        corpus_cf, "Pi", [ty_bool, fam], [ty_bool, fam], [eq_a, fam_eq]
    )
    out = tr.transported_congruence(corpus_cf, corpus_tt, "Pi", [eq_a, fam_eq])
    assert erased_equal(out.payload.body.lhs, direct.payload.body.lhs)
    assert erased_equal(out.payload.body.rhs, direct.payload.body.rhs)
