"""Judgement and boundary theses, abstraction prefixes, filling and
un-filling, and the two context kinds of the contexted presentation."""

from __future__ import annotations

from typing import Optional, Union

from .errors import ArityMismatch, NotObjectBoundary
from .syntax import (
    Abstr,
    Abstracted,
    AbstractedBoundary,
    AbstractedJudgement,
    Argument,
    AsmArg,
    AssumptionSet,
    BoundaryThesis,
    DUMMY,
    DummyArg,
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
    MetaArity,
    MetaName,
    Thesis,
    asm,
    boundary_arity,
    close_var,
    subst_bound,
)


def plain(body: Union[Thesis, BoundaryThesis]) -> Abstracted:
    """An abstracted judgement or boundary with empty prefix."""
    return Abstracted((), body)


def _peel(arg: Argument, n: int) -> Argument:
    for _ in range(n):
        if not isinstance(arg, Abstr):
            raise ArityMismatch("head binds fewer variables than the boundary")
        arg = arg.body
    return arg


def fill(b: AbstractedBoundary, head: Argument) -> AbstractedJudgement:
    """Fills the placeholder of ``b`` with ``head``.

    Object boundaries take expression heads.  Equational boundaries take a
    dummy (tt) or, context-free, any argument: an assumption set records
    exactly that set, while other heads record their assumption set (the
    context-free reading; contexted callers always pass the dummy).
    """
    inner = _peel(head, len(b.prefix))
    if isinstance(inner, Abstr):
        raise ArityMismatch("head binds more variables than the boundary")
    match b.body, inner:
        case IsTyB(), ExprArg(expr=a):
            thesis: Thesis = IsTy(a)
        case IsTmB(ty=ty), ExprArg(expr=t):
            thesis = IsTm(t, ty)
        case (EqTyB() | EqTmB()), _:
            if isinstance(inner, DummyArg):
                by: object = DUMMY
            elif isinstance(inner, AsmArg):
                by = inner.assumptions
            else:
                by = asm(inner)
            if isinstance(b.body, EqTyB):
                thesis = EqTy(b.body.lhs, b.body.rhs, by)
            else:
                thesis = EqTm(b.body.lhs, b.body.rhs, b.body.ty, by)
        case _:
            raise ArityMismatch(
                f"cannot fill {type(b.body).__name__} with {type(inner).__name__}"
            )
    return Abstracted(b.prefix, thesis)


def fill_equation(
    b: AbstractedBoundary,
    lhs: Argument,
    rhs: Argument,
    by: Union[DummyArg, AssumptionSet] = DUMMY,
) -> AbstractedJudgement:
    """Fills an object boundary with an equation between two heads."""
    left = _peel(lhs, len(b.prefix))
    right = _peel(rhs, len(b.prefix))
    match b.body, left, right:
        case IsTyB(), ExprArg(expr=a1), ExprArg(expr=a2):
            thesis: Thesis = EqTy(a1, a2, by)
        case IsTmB(ty=ty), ExprArg(expr=t1), ExprArg(expr=t2):
            thesis = EqTm(t1, t2, ty, by)
        case _:
            raise NotObjectBoundary(
                f"cannot fill {type(b.body).__name__} with an equation"
            )
    return Abstracted(b.prefix, thesis)


def unfill(j: AbstractedJudgement) -> tuple[AbstractedBoundary, Argument]:
    """Splits a judgement into its boundary and head; inverse of ``fill``."""
    match j.body:
        case IsTy(ty=a):
            b: BoundaryThesis = IsTyB()
            head: Argument = ExprArg(a)
        case IsTm(term=t, ty=a):
            b = IsTmB(a)
            head = ExprArg(t)
        case EqTy(lhs=a, rhs=c, by=by):
            b = EqTyB(a, c)
            head = DUMMY if isinstance(by, DummyArg) else AsmArg(by)
        case EqTm(lhs=s, rhs=t, ty=a, by=by):
            b = EqTmB(s, t, a)
            head = DUMMY if isinstance(by, DummyArg) else AsmArg(by)
        case _:
            raise TypeError(f"not a judgement thesis: {j.body!r}")
    for _ in range(len(j.prefix)):
        head = Abstr(head)
    return Abstracted(j.prefix, b), head


def head_argument(j: AbstractedJudgement) -> Argument:
    return unfill(j)[1]


def boundary_of(j: AbstractedJudgement) -> AbstractedBoundary:
    return unfill(j)[0]


def abstract_judgement(j: Abstracted, v: FreeVar, ty: Expr) -> Abstracted:
    """Adds an outermost binder of type ``ty`` capturing the atom ``v``."""
    new_prefix = (ty,) + tuple(close_var(t, v, i) for i, t in enumerate(j.prefix))
    return Abstracted(new_prefix, close_var(j.body, v, len(j.prefix)))


def open_judgement(j: Abstracted, v: FreeVar) -> Abstracted:
    """Removes the outermost binder, substituting the atom ``v`` for it."""
    if not j.prefix:
        raise ValueError("judgement has no abstraction to open")
    rest = tuple(subst_bound(t, v, i - 1) for i, t in enumerate(j.prefix) if i > 0)
    return Abstracted(rest, subst_bound(j.body, v, len(j.prefix) - 1))


def open_all(j: Abstracted, vs: list[FreeVar]) -> Abstracted:
    out = j
    for v in vs:
        out = open_judgement(out, v)
    return out


def instantiate_prefix(j: Abstracted, terms: list[Expr]) -> Abstracted:
    """Substitutes ``terms`` for the outermost ``len(terms)`` binders."""
    out = j
    for t in terms:
        if not out.prefix:
            raise ValueError("more terms than binders")
        rest = tuple(subst_bound(ty, t, i - 1) for i, ty in enumerate(out.prefix) if i > 0)
        out = Abstracted(rest, subst_bound(out.body, t, len(out.prefix) - 1))
    return out


def binder_types_opened(j: Abstracted, vs: list[FreeVar]) -> list[Expr]:
    """The prefix types with earlier binders replaced by the given atoms;
    entry ``i`` is the type of ``vs[i]`` once ``vs[:i]`` stand for binders."""
    out = []
    for i, ty in enumerate(j.prefix):
        opened = ty
        for k, v in enumerate(vs[:i]):
            # after substituting the first k, binder k+... distances shrink
            opened = subst_bound(opened, v, i - 1 - k)
        out.append(opened)
    return out


# ---------------------------------------------------------------------------
# Contexts of the contexted presentation


class MetaCtx:
    """Finite list of metavariable declarations M : B, names distinct."""

    def __init__(self, entries: list[tuple[MetaName, AbstractedBoundary]] = ()):  # type: ignore[assignment]
        self.entries: tuple[tuple[MetaName, AbstractedBoundary], ...] = tuple(entries)
        names = [m for m, _ in self.entries]
        if len(set(names)) != len(names):
            raise ValueError("metavariable names must be distinct")
        self._map = dict(self.entries)

    def __contains__(self, m: MetaName) -> bool:
        return m in self._map

    def __getitem__(self, m: MetaName) -> AbstractedBoundary:
        return self._map[m]

    def __len__(self) -> int:
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)

    def __eq__(self, other) -> bool:
        return isinstance(other, MetaCtx) and self.entries == other.entries

    def __hash__(self) -> int:
        return hash(self.entries)

    def upto(self, i: int) -> "MetaCtx":
        return MetaCtx(list(self.entries[: max(i - 1, 0)]))

    def extend(self, m: MetaName, b: AbstractedBoundary) -> "MetaCtx":
        return MetaCtx(list(self.entries) + [(m, b)])

    def arities(self) -> dict[MetaName, MetaArity]:
        return {m: boundary_arity(b) for m, b in self.entries}

    def __repr__(self) -> str:
        return f"MetaCtx({[m.name for m, _ in self.entries]})"


class VarCtx:
    """Finite list of variable declarations a : A, names distinct."""

    def __init__(self, entries: list[tuple[FreeVar, Expr]] = ()):  # type: ignore[assignment]
        self.entries: tuple[tuple[FreeVar, Expr], ...] = tuple(entries)
        names = [v for v, _ in self.entries]
        if len(set(names)) != len(names):
            raise ValueError("variable names must be distinct")
        self._map = dict(self.entries)

    def __contains__(self, v: FreeVar) -> bool:
        return v in self._map

    def __getitem__(self, v: FreeVar) -> Expr:
        return self._map[v]

    def __len__(self) -> int:
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)

    def __eq__(self, other) -> bool:
        return isinstance(other, VarCtx) and self.entries == other.entries

    def __hash__(self) -> int:
        return hash(self.entries)

    def extend(self, v: FreeVar, ty: Expr) -> "VarCtx":
        return VarCtx(list(self.entries) + [(v, ty)])

    def pop(self) -> "VarCtx":
        return VarCtx(list(self.entries[:-1]))

    def __repr__(self) -> str:
        return f"VarCtx({[v.name for v, _ in self.entries]})"


EMPTY_METAS = MetaCtx([])
EMPTY_VARS = VarCtx([])
