"""Deterministic pretty-printer for syntax values, theories and scripts.

Binder names are canonical (x, y, z, w, x4, x5, ...) by depth, so printing
is a function of the de Bruijn representation alone; the corpus files are
written in this canonical form, making parse-then-print the identity on
them.
"""

from __future__ import annotations

from .syntax import (
    Abstr,
    Abstracted,
    AsmArg,
    AssumptionSet,
    BoundVar,
    Cls,
    Convert,
    DummyArg,
    EqTm,
    EqTmB,
    EqTy,
    EqTyB,
    ExprArg,
    FreeVar,
    IsTm,
    IsTmB,
    IsTy,
    IsTyB,
    MetaApp,
    MetaArity,
    SymbolApp,
    SymbolArity,
)

_CANON = ["x", "y", "z", "w"]


def binder_name(depth: int) -> str:
    return _CANON[depth] if depth < len(_CANON) else f"x{depth}"


def _is_atomic(e) -> bool:
    match e:
        case FreeVar(annotation=None) | BoundVar():
            return True
        case SymbolApp(args=args) | MetaApp(args=args):
            return not args
        case _:
            return False


def print_expr(e, binders: tuple[str, ...] = ()) -> str:
    match e:
        case FreeVar(name=n, annotation=None):
            return n
        case FreeVar(name=n, annotation=ann):
            inner = print_expr(ann, ())
            return f"{n}^{inner}" if _is_atomic(ann) else f"{n}^({inner})"
        case BoundVar(index=i):
            if i >= len(binders):
                return f"?{i}"
            return binders[len(binders) - 1 - i]
        case SymbolApp(symbol=s, args=args):
            if not args:
                return s
            return f"{s}({', '.join(print_arg(a, binders) for a in args)})"
        case MetaApp(meta=m, args=args):
            head = m.name
            if not args:
                return head
            return f"{head}({', '.join(print_expr(t, binders) for t in args)})"
        case Convert(term=t, assumptions=a):
            return f"convert({print_expr(t, binders)}, {print_set(a, binders)})"
    raise TypeError(f"cannot print {e!r}")


def print_set(a: AssumptionSet, binders: tuple[str, ...] = ()) -> str:
    parts = []
    for i in sorted(a.bound_vars):
        parts.append(print_expr(BoundVar(i), binders))
    for v in sorted(a.free_vars, key=lambda v: (v.name, print_expr(v))):
        parts.append(print_expr(v, ()))
    for m in sorted(a.metas, key=lambda m: m.name):
        parts.append(m.name)
    return "{" + ", ".join(parts) + "}"


def print_arg(a, binders: tuple[str, ...] = ()) -> str:
    names = []
    while isinstance(a, Abstr):
        names.append(binder_name(len(binders) + len(names)))
        a = a.body
    prefix = "".join(f"{{{n}}} " for n in names)
    inner_binders = binders + tuple(names)
    match a:
        case ExprArg(expr=e):
            return prefix + print_expr(e, inner_binders)
        case DummyArg():
            return prefix + "*"
        case AsmArg(assumptions=s):
            return prefix + print_set(s, inner_binders)
    raise TypeError(f"cannot print argument {a!r}")


def print_thesis(t, binders: tuple[str, ...] = (), show_by: bool = True) -> str:
    match t:
        case IsTy(ty=a):
            return f"{print_expr(a, binders)} type"
        case IsTm(term=tm, ty=a):
            return f"{print_expr(tm, binders)} : {print_expr(a, binders)}"
        case EqTy(lhs=a, rhs=b, by=by):
            base = f"{print_expr(a, binders)} == {print_expr(b, binders)}"
        case EqTm(lhs=s, rhs=tm, ty=a, by=by):
            base = (
                f"{print_expr(s, binders)} == {print_expr(tm, binders)}"
                f" : {print_expr(a, binders)}"
            )
        case IsTyB():
            return "type"
        case IsTmB(ty=a):
            return print_expr(a, binders)
        case EqTyB(lhs=a, rhs=b):
            return f"{print_expr(a, binders)} == {print_expr(b, binders)}"
        case EqTmB(lhs=s, rhs=tm, ty=a):
            return (
                f"{print_expr(s, binders)} == {print_expr(tm, binders)}"
                f" : {print_expr(a, binders)}"
            )
        case _:
            raise TypeError(f"cannot print {t!r}")
    if show_by and isinstance(by, AssumptionSet):
        return f"{base} by {print_set(by, binders)}"
    return base


def print_abstracted(j: Abstracted, show_by: bool = True) -> str:
    binders: tuple[str, ...] = ()
    parts = []
    for ty in j.prefix:
        name = binder_name(len(binders))
        parts.append(f"{{{name} : {print_expr(ty, binders)}}}")
        binders = binders + (name,)
    head = print_thesis(j.body, binders, show_by=show_by)
    return " ".join(parts + [head]) if parts else head


def print_statement(stmt) -> str:
    """One-line rendering of a tt statement."""
    from .tt_engine import BdryTT, JdgTT, MctxWF, VctxWF

    def ctx(mctx, vctx):
        ms = ", ".join(f"{m.name} : {print_abstracted(b)}" for m, b in mctx)
        vs = ", ".join(f"{print_expr(v)} : {print_expr(t)}" for v, t in vctx)
        return f"{ms}; {vs}"

    match stmt:
        case JdgTT(mctx=m, vctx=v, jdg=j):
            return f"{ctx(m, v)} |- {print_abstracted(j)}"
        case BdryTT(mctx=m, vctx=v, bdry=b):
            return f"{ctx(m, v)} |- {print_abstracted(b)} (boundary)"
        case MctxWF(mctx=m):
            return f"|- mctx {', '.join(mm.name for mm, _ in m)}"
        case VctxWF(mctx=m, vctx=v):
            return f"{', '.join(mm.name for mm, _ in m)} |- vctx {ctx(EmptyTuple(), v)}"
    raise TypeError(stmt)


def EmptyTuple():
    return ()


def print_arity(arity: SymbolArity) -> str:
    def slot(s: MetaArity) -> str:
        base = {"Ty": "type", "Tm": "term", "EqTy": "eqtype", "EqTm": "eqterm"}[s.cls.value]
        return f"{{{s.binders}}} {base}" if s.binders else base

    cls = "type" if arity.cls == Cls.TY else "term"
    if not arity.args:
        return cls
    return f"{cls} ({', '.join(slot(s) for s in arity.args)})"


# ---------------------------------------------------------------------------
# Declaration and script printing (parse-tree level, canonical layout)


def _print_node_expr(node) -> str:
    match node:
        case ("name", name, None, None, _):
            return name
        case ("name", name, ann, None, _):
            inner = _print_node_expr(ann)
            simple = isinstance(ann, tuple) and ann[0] == "name" and ann[3] is None
            return f"{name}^{inner}" if simple else f"{name}^({inner})"
        case ("name", name, None, args, _):
            return f"{name}({', '.join(_print_node_arg(a) for a in args)})"
        case ("convert", inner, aset):
            return f"convert({_print_node_expr(inner)}, {_print_node_set(aset)})"
    raise TypeError(f"cannot print node {node!r}")


def _print_node_arg(node) -> str:
    match node:
        case ("expr-arg", names, e):
            prefix = "".join(f"{{{n}}} " for n in names)
            return prefix + _print_node_expr(e)
        case ("dummy-arg", names):
            return "".join(f"{{{n}}} " for n in names) + "*"
        case ("asm-arg", names, aset):
            return "".join(f"{{{n}}} " for n in names) + _print_node_set(aset)
    raise TypeError(f"cannot print argument node {node!r}")


def _print_node_set(node) -> str:
    _, entries = node
    parts = []
    for _, name, ann, _ in entries:
        if ann is None:
            parts.append(name)
        else:
            inner = _print_node_expr(ann)
            simple = isinstance(ann, tuple) and ann[0] == "name" and ann[3] is None
            parts.append(f"{name}^{inner}" if simple else f"{name}^({inner})")
    return "{" + ", ".join(parts) + "}"


def _print_node_boundary(node) -> str:
    _, prefix, body = node
    parts = [f"{{{n} : {_print_node_expr(ty)}}}" for n, ty in prefix]
    match body:
        case ("ty",):
            parts.append("type")
        case ("tm", e):
            parts.append(_print_node_expr(e))
        case ("eqty", e1, e2):
            parts.append(f"{_print_node_expr(e1)} == {_print_node_expr(e2)}")
        case ("eqtm", e1, e2, ty):
            parts.append(
                f"{_print_node_expr(e1)} == {_print_node_expr(e2)} : {_print_node_expr(ty)}"
            )
    return " ".join(parts)


def print_theory_decl(decl) -> str:
    from .parser import RuleDecl, SymbolDecl

    lines = []
    for d in decl.decls:
        if isinstance(d, SymbolDecl):
            lines.append(f"symbol {d.name} : {print_arity(d.arity)}")
            continue
        parts = [f"rule {d.name}:"]
        for m, b in d.premises:
            parts.append(f" premise {m} : {_print_node_boundary(b)};")
        if d.kind == "symbol":
            match d.conclusion:
                case ("ty",):
                    parts.append(" yields type")
                case ("tm", e):
                    parts.append(f" yields : {_print_node_expr(e)}")
        elif d.kind == "equality":
            match d.conclusion:
                case ("eqty", e1, e2):
                    parts.append(
                        f" yields {_print_node_expr(e1)} == {_print_node_expr(e2)}"
                    )
                case ("eqtm", e1, e2, ty):
                    parts.append(
                        f" yields {_print_node_expr(e1)} == {_print_node_expr(e2)}"
                        f" : {_print_node_expr(ty)}"
                    )
        else:
            match d.conclusion:
                case ("isty", e):
                    parts.append(f" yields {_print_node_expr(e)} type")
                case ("istm", e, ty):
                    parts.append(
                        f" yields {_print_node_expr(e)} : {_print_node_expr(ty)}"
                    )
        lines.append("".join(parts))
    return "\n".join(lines) + "\n"


def print_script(script) -> str:
    from .parser import MetaDecl, Step, VarDecl

    lines = []
    for s in script.steps:
        if isinstance(s, VarDecl):
            lines.append(f"var {s.name} : {s.type_of};")
        elif isinstance(s, MetaDecl):
            lines.append(f"meta {s.name} : {_print_node_boundary(s.boundary)};")
        else:
            lines.append(f"let {s.target} = {s.op}({', '.join(s.args)});")
    if script.result is not None:
        lines.append(f"return {script.result};")
    return "\n".join(lines) + "\n"
