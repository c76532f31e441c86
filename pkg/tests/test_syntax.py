"""Core syntax laws: occurrences against a naive oracle, erasure and
substitution commutation, abstraction/substitution inverses."""

import random

import pytest
from hypothesis import given, settings, strategies as st

from fintt.errors import ArityMismatch, UnboundIndex, VarInAnnotation
from fintt.syntax import (
    Abstr,
    Abstracted,
    AssumptionSet,
    BoundVar,
    Cls,
    Convert,
    DUMMY,
    EqTm,
    EqTy,
    ExprArg,
    FreeVar,
    IsTm,
    IsTy,
    MetaApp,
    MetaArity,
    MetaName,
    SymbolApp,
    abstract_var,
    arity_check,
    asm,
    bv,
    close_var,
    double_erase,
    erase,
    erased_equal,
    fv,
    fv0,
    fvt,
    mv,
    subst_bound,
    substitute,
)

from .gen import ExprGen, corpus_signature

SIG = corpus_signature()
BOOL = SymbolApp("bool", ())
NAT = SymbolApp("nat", ())


def succ(t):
    return SymbolApp("succ", (ExprArg(t),))


# ---------------------------------------------------------------------------
# An independent occurrence oracle: transliterates the defining equations
# one case at a time, with explicit depth bookkeeping and list accumulators.


def oracle_occurrences(x, depth=0):
    """Returns (fv0, bv, mv-shallow-heads-with-annotation-descent) as lists."""
    free, bound, metas = [], [], []

    def annot_of_meta(m):
        if m.annotation is not None:
            f, b, mm = oracle_occurrences(m.annotation, 0)
            return f, mm
        return [], []

    def go(x, depth):
        if isinstance(x, FreeVar):
            free.append(x)
        elif isinstance(x, BoundVar):
            if x.index >= depth:
                bound.append(x.index - depth)
        elif isinstance(x, SymbolApp):
            for a in x.args:
                go(a, depth)
        elif isinstance(x, MetaApp):
            metas.append(x.meta)
            for f, mm in [annot_of_meta(x.meta)]:
                for v in f:
                    pass  # the deep meta oracle handles annotations below
            for t in x.args:
                go(t, depth)
        elif isinstance(x, Convert):
            go(x.term, depth)
            go(x.assumptions, depth)
        elif isinstance(x, AssumptionSet):
            free.extend(x.free_vars)
            for i in x.bound_vars:
                if i >= depth:
                    bound.append(i - depth)
            metas.extend(x.metas)
        elif isinstance(x, ExprArg):
            go(x.expr, depth)
        elif isinstance(x, Abstr):
            go(x.body, depth + 1)
        elif isinstance(x, IsTy):
            go(x.ty, depth)
        elif isinstance(x, IsTm):
            go(x.term, depth)
            go(x.ty, depth)
        elif isinstance(x, EqTy):
            go(x.lhs, depth)
            go(x.rhs, depth)
            go(x.by, depth)
        elif isinstance(x, EqTm):
            go(x.lhs, depth)
            go(x.rhs, depth)
            go(x.ty, depth)
            go(x.by, depth)
        elif isinstance(x, Abstracted):
            for i, ty in enumerate(x.prefix):
                go(ty, depth + i)
            go(x.body, depth + len(x.prefix))
        elif x is DUMMY or x is None:
            pass
        else:
            raise TypeError(x)

    go(x, depth)
    return free, bound, metas


def oracle_fv(x):
    """All free variables including annotation closure, via worklist."""
    out = set()
    work = list(oracle_occurrences(x)[0])
    while work:
        v = work.pop()
        if v in out:
            continue
        out.add(v)
        if v.annotation is not None:
            work.extend(oracle_occurrences(v.annotation)[0])
    return out


def oracle_mv(x):
    out = set()
    work = list(oracle_occurrences(x)[2])
    for v in oracle_fv(x):
        if v.annotation is not None:
            work.extend(oracle_occurrences(v.annotation)[2])
    while work:
        m = work.pop()
        if m in out:
            continue
        out.add(m)
        if m.annotation is not None:
            f, _, mm = oracle_occurrences(m.annotation)
            work.extend(mm)
            for v in f:
                for u in oracle_fv(v):
                    if u.annotation is not None:
                        work.extend(oracle_occurrences(u.annotation)[2])
    return out


@pytest.mark.parametrize("seed", range(40))
def test_occurrences_agree_with_oracle(seed):
    rng = random.Random(seed)
    g = ExprGen(rng, cf=True)
    for _ in range(25):
        e = g.abstracted(depth=rng.randrange(7))
        f0, b, _ = oracle_occurrences(e)
        assert fv0(e) == frozenset(f0)
        assert bv(e) == frozenset(b)
        assert fv(e) == frozenset(oracle_fv(e))
        assert mv(e) == frozenset(oracle_mv(e))
        a = asm(e)
        assert a.free_vars == fv(e)
        assert a.bound_vars == bv(e)
        assert a.metas == mv(e)


def test_fv0_and_fvt_on_annotated_var():
    a_bool = FreeVar("a", BOOL)
    assert fv0(a_bool) == frozenset([a_bool])
    assert fvt(a_bool) == fv(BOOL) == frozenset()
    b_ann = FreeVar("b", SymbolApp("Id", (ExprArg(BOOL), ExprArg(a_bool), ExprArg(a_bool))))
    assert fv0(b_ann) == frozenset([b_ann])
    assert fvt(b_ann) == frozenset([a_bool])
    assert fv(b_ann) == frozenset([b_ann, a_bool])


def test_asm_of_convert():
    a_bool = FreeVar("a", BOOL)
    b_bool = FreeVar("b", BOOL)
    t = Convert(b_bool, AssumptionSet(frozenset([a_bool]), frozenset(), frozenset()))
    got = asm(t)
    assert got.free_vars == frozenset([a_bool, b_bool])
    assert got.bound_vars == frozenset()


def test_binder_removes_bound_variable():
    arg = Abstr(ExprArg(succ(BoundVar(0))))
    assert bv(arg) == frozenset()
    assert bv(succ(BoundVar(0))) == frozenset([0])


# ---------------------------------------------------------------------------
# Arity checking


def test_arity_check_examples():
    A = SymbolApp("bool", ())
    pi_ok = SymbolApp("Pi", (ExprArg(A), Abstr(ExprArg(A))))
    arity_check(SIG, {}, pi_ok)
    with pytest.raises(ArityMismatch):
        arity_check(SIG, {}, SymbolApp("Pi", (ExprArg(A),)))
    arity_check(SIG, {}, SymbolApp("bool", ()))
    with pytest.raises(ArityMismatch):
        arity_check(SIG, {}, SymbolApp("Pi", (ExprArg(A), ExprArg(A))))


def test_arity_check_unbound_index():
    with pytest.raises(UnboundIndex):
        arity_check(SIG, {}, succ(BoundVar(0)))
    arity_check(SIG, {}, Abstr(ExprArg(succ(BoundVar(0)))))


def test_arity_check_metas():
    m = MetaName("M")
    metas = {m: MetaArity(Cls.TM, 2)}
    ok = MetaApp(m, (FreeVar("a"), FreeVar("b")))
    arity_check(SIG, metas, ok)
    with pytest.raises(ArityMismatch):
        arity_check(SIG, metas, MetaApp(m, (FreeVar("a"),)))


# ---------------------------------------------------------------------------
# Abstraction and substitution


def test_abstract_var_basic():
    a_bool = FreeVar("a", BOOL)
    assert abstract_var(a_bool, a_bool) == Abstr(ExprArg(BoundVar(0)))
    b_ann = FreeVar("b", NAT)
    assert abstract_var(b_ann, a_bool) == Abstr(ExprArg(b_ann))


def test_abstract_var_in_assumption_set():
    a_bool = FreeVar("a", BOOL)
    alpha = AssumptionSet(frozenset([a_bool]), frozenset(), frozenset())
    out = abstract_var(AsmOf(alpha), a_bool)
    assert out == Abstr(AsmOf(AssumptionSet(frozenset(), frozenset([0]), frozenset())))


def AsmOf(alpha):
    from fintt.syntax import AsmArg

    return AsmArg(alpha)


def test_abstract_var_rejects_annotation_occurrence():
    a_bool = FreeVar("a", BOOL)
    b_at_a = FreeVar("b", SymbolApp("Id", (ExprArg(BOOL), ExprArg(a_bool), ExprArg(a_bool))))
    with pytest.raises(VarInAnnotation):
        abstract_var(b_at_a, a_bool)


def test_substitute_identity():
    s = succ(FreeVar("a"))
    assert substitute(Abstr(ExprArg(BoundVar(0))), s) == ExprArg(s)


def test_substitution_into_assumption_set():
    a_bool = FreeVar("a", BOOL)
    m = MetaName("M")
    alpha = AssumptionSet(frozenset(), frozenset([0]), frozenset([m]))
    s = a_bool
    out = subst_bound(alpha, s, 0)
    assert out.free_vars == frozenset([a_bool])
    assert out.bound_vars == frozenset()
    assert out.metas == frozenset([m])


@pytest.mark.parametrize("seed", range(30))
def test_abstract_substitute_round_trip(seed):
    rng = random.Random(seed)
    g = ExprGen(rng, cf=True)
    fresh = FreeVar("zz", BOOL)
    for _ in range(20):
        e = g.tm(3)
        if fresh in fv(e):
            continue
        closed = abstract_var(e, fresh)
        assert substitute(closed, fresh) == ExprArg(e)
        # and the other way: substitute then abstract a fresh variable
        arg = Abstr(ExprArg(g.tm(2, binders=1)))
        opened = substitute(arg, fresh)
        if fresh in fvt(opened):
            continue
        assert abstract_var(opened.expr, fresh) == arg


# ---------------------------------------------------------------------------
# Erasure


def test_erase_examples():
    a_bool = FreeVar("a", BOOL)
    alpha = AssumptionSet(frozenset([a_bool]), frozenset(), frozenset())
    t = Convert(succ(a_bool), alpha)
    assert erase(t) == succ(a_bool)
    from fintt.syntax import AsmArg

    assert erase(AsmArg(alpha)) == DUMMY
    plain_arg = SymbolApp("succ", (ExprArg(a_bool),))
    assert erase(plain_arg) == plain_arg


def test_double_erase_examples():
    a_bool = FreeVar("a", BOOL)
    alpha = AssumptionSet(frozenset([a_bool]), frozenset(), frozenset())
    assert double_erase(a_bool) == FreeVar("a", None)
    assert double_erase(Convert(a_bool, alpha)) == FreeVar("a", None)


@pytest.mark.parametrize("seed", range(30))
def test_erase_commutes_with_substitution(seed):
    rng = random.Random(seed)
    g = ExprGen(rng, cf=True)
    for _ in range(20):
        body = g.tm(3, binders=1)
        s = g.tm(2)
        lhs = erase(subst_bound(body, s, 0))
        rhs = subst_bound(erase(body), erase(s), 0)
        assert lhs == rhs


def test_alpha_and_erased_equal():
    # {x} S(a, x) is equal to itself however the binder was displayed
    a = FreeVar("a")
    e1 = Abstr(ExprArg(SymbolApp("Id", (ExprArg(BOOL), ExprArg(a), ExprArg(BoundVar(0))))))
    e2 = Abstr(ExprArg(SymbolApp("Id", (ExprArg(BOOL), ExprArg(a), ExprArg(BoundVar(0))))))
    assert e1 == e2
    t = succ(a)
    assert erased_equal(Convert(t, AssumptionSet()), t)
    two = Abstr(Abstr(ExprArg(BoundVar(1))))
    other = Abstr(Abstr(ExprArg(BoundVar(0))))
    assert two != other


# ---------------------------------------------------------------------------
# Hypothesis property tests


def _ty_strategy(depth: int):
    base = st.sampled_from([BOOL, NAT])
    if depth == 0:
        return base
    sub = _ty_strategy(depth - 1)
    tm = _tm_strategy(depth - 1)
    return st.one_of(
        base,
        st.builds(lambda a, b: SymbolApp("Pi", (ExprArg(a), Abstr(ExprArg(b)))), sub, sub),
        st.builds(
            lambda a, s, t: SymbolApp("Id", (ExprArg(a), ExprArg(s), ExprArg(t))),
            sub,
            tm,
            tm,
        ),
    )


def _tm_strategy(depth: int):
    names = st.sampled_from(["a", "b", "c"])
    base = st.builds(FreeVar, names, _ty_strategy(0))
    if depth == 0:
        return base
    sub = _tm_strategy(depth - 1)
    return st.one_of(
        base,
        st.builds(succ, sub),
        st.builds(
            lambda t, vs: Convert(t, AssumptionSet(frozenset(vs), frozenset(), frozenset())),
            sub,
            st.lists(st.builds(FreeVar, names, _ty_strategy(0)), max_size=2),
        ),
    )


@given(_tm_strategy(3))
@settings(max_examples=200, deadline=None)
def test_hyp_asm_decomposition(e):
    a = asm(e)
    assert fv0(e) <= fv(e)
    assert a.free_vars == fv(e)
    assert a.bound_vars == bv(e)
    assert a.metas == mv(e)


@given(_tm_strategy(3), _tm_strategy(2))
@settings(max_examples=200, deadline=None)
def test_hyp_erase_substitute_commute(body, s):
    assert erase(subst_bound(body, s, 0)) == subst_bound(erase(body), erase(s), 0)


@given(_tm_strategy(2), _tm_strategy(2), _tm_strategy(2))
@settings(max_examples=100, deadline=None)
def test_hyp_equivalences(x, y, z):
    # alpha equality is an equivalence; erased equality a coarser one
    from fintt.syntax import alpha_equal

    assert alpha_equal(x, x)
    if alpha_equal(x, y):
        assert alpha_equal(y, x)
        assert erased_equal(x, y)
    if alpha_equal(x, y) and alpha_equal(y, z):
        assert alpha_equal(x, z)
    if erased_equal(x, y) and erased_equal(y, z):
        assert erased_equal(x, z)
    alpha = AssumptionSet(frozenset([FreeVar("q", BOOL)]), frozenset(), frozenset())
    assert erased_equal(Convert(x, alpha), x)


@given(_tm_strategy(3))
@settings(max_examples=200, deadline=None)
def test_hyp_abstract_substitute_inverse(e):
    fresh = FreeVar("zz", BOOL)
    if fresh in fv(e):
        return
    assert substitute(abstract_var(e, fresh), fresh) == ExprArg(e)
