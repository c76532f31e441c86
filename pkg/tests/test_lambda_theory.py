"""A function-type fragment with introduction and elimination: abstracted
term premises, dependent conclusion types, and the full pipeline over it."""

import pytest

from fintt import cf_engine as cf
from fintt import tt_engine as tt
from fintt import translate as tr
from fintt.derive import CFDeriver, TTDeriver
from fintt.judgements import EMPTY_METAS, EMPTY_VARS, VarCtx, plain
from fintt.parser import elaborate, parse_script, parse_theory
from fintt.script import run_script
from fintt.syntax import (
    Abstr,
    BoundVar,
    ExprArg,
    FreeVar,
    IsTm,
    SymbolApp,
    double_erase,
    erase,
    erased_equal,
)
from fintt.theory import check_finitary, check_standard

THEORY_TEXT = """\
rule bool: yields type
rule Pi: premise A : type; premise B : {x : A} type; yields type
rule lam: premise A : type; premise B : {x : A} type; premise body : {x : A} B(x); yields : Pi(A, {x} B(x))
rule app: premise A : type; premise B : {x : A} type; premise f : Pi(A, {x} B(x)); premise arg : A; yields : B(arg)
"""

IDENTITY_SCRIPT = """\
let tb = rule(bool);
var x0 : tb;
let fam = abstract(tb, tb, x0);
var y0 : tb;
let body = abstract(tb, y0, y0);
let f = rule(lam, tb, fam, body);
return f;
"""

APPLY_SCRIPT = """\
let tb = rule(bool);
var x0 : tb;
let fam = abstract(tb, tb, x0);
var y0 : tb;
let body = abstract(tb, y0, y0);
let f = rule(lam, tb, fam, body);
var c : tb;
let fc = rule(app, tb, fam, f, c);
return fc;
"""


@pytest.fixture(scope="module")
def theories():
    decl = parse_theory(THEORY_TEXT)
    t_cf = elaborate(decl, "cf")
    t_tt = elaborate(decl, "tt")
    check_finitary(t_cf)
    check_finitary(t_tt)
    check_standard(t_cf)
    check_standard(t_tt)
    return t_cf, t_tt


BOOL = SymbolApp("bool", ())


def _pi_bool_bool():
    return SymbolApp("Pi", (ExprArg(BOOL), Abstr(ExprArg(BOOL))))


def test_identity_function_both_engines(theories):
    t_cf, t_tt = theories
    script = parse_script(IDENTITY_SCRIPT)
    out_cf = run_script(t_cf, script, "cf")
    out_tt = run_script(t_tt, script, "tt")
    assert erase(out_cf.payload) == out_tt.conclusion.jdg
    body = out_cf.payload.body
    assert isinstance(body, IsTm)
    assert body.ty == _pi_bool_bool()
    assert body.term == SymbolApp(
        "lam",
        (ExprArg(BOOL), Abstr(ExprArg(BOOL)), Abstr(ExprArg(BoundVar(0)))),
    )


def test_application_instantiates_dependent_codomain(theories):
    t_cf, t_tt = theories
    script = parse_script(APPLY_SCRIPT)
    out_cf = run_script(t_cf, script, "cf")
    out_tt = run_script(t_tt, script, "tt")
    assert erase(out_cf.payload) == out_tt.conclusion.jdg
    assert out_cf.payload.body.ty == BOOL  # B(arg) with constant family
    assert cf.natural_type_cf(t_cf, out_cf.payload.body.term) == BOOL


def test_lambda_translations_round_trip(theories):
    t_cf, t_tt = theories
    for text in (IDENTITY_SCRIPT, APPLY_SCRIPT):
        cert = run_script(t_cf, parse_script(text), "cf")
        mctx, vctx, d = tr.cf_judgement_to_tt(t_cf, t_tt, cert)
        tt.check_derivation(t_tt, d)
        assert d.conclusion.jdg == erase(cert.payload)
        back = tr.round_trip_cf(t_cf, t_tt, cert)
        assert erased_equal(back.payload, cert.payload)
        d_tt = run_script(t_tt, parse_script(text), "tt", annotate_vars=False)
        ttd = TTDeriver(t_tt)
        m, v = tt._ctxs(d_tt.conclusion)
        cert2 = tr.tt_to_cf(t_tt, t_cf, d_tt, tt.mctx_empty(t_tt), ttd.vctx_wf(m, v))
        assert double_erase(cert2.payload) == d_tt.conclusion.jdg


def test_lambda_congruence_transported(theories):
    """Transported congruence for the introduction rule, whose family and
    body premises bind one variable."""
    t_cf, t_tt = theories
    d = CFDeriver(t_cf)
    ty_bool = d.ty(BOOL)
    a = FreeVar("a", BOOL)
    fam = cf.cf_abstract_fwd(t_cf, ty_bool, ty_bool, a)
    b = FreeVar("b", BOOL)
    vb = cf.cf_var(t_cf, b, ty_bool)
    body = cf.cf_abstract_fwd(t_cf, ty_bool, vb, FreeVar("c", BOOL))
    eq_a = cf.cf_eqty_refl(t_cf, ty_bool, ty_bool)
    u = FreeVar("u", BOOL)
    fam_eq = cf.cf_abstract_fwd(
        t_cf, ty_bool, cf.cf_eqty_refl(t_cf, ty_bool, ty_bool), u
    )
    w = FreeVar("w", BOOL)
    body_eq = cf.cf_abstract_fwd(
        t_cf, ty_bool, cf.cf_eqtm_refl(t_cf, vb, vb), w
    )
    out = tr.transported_congruence(
        t_cf, t_tt, "lam", [eq_a, fam_eq, body_eq]
    )
    lam = SymbolApp(
        "lam", (ExprArg(BOOL), Abstr(ExprArg(BOOL)), Abstr(ExprArg(b)))
    )
    assert erased_equal(out.payload.body.lhs, lam)
    assert erased_equal(out.payload.body.rhs, lam)
    from fintt.syntax import asm

    inputs = asm(eq_a.payload, fam_eq.payload, body_eq.payload)
    assert out.payload.body.by.issubset(inputs)
