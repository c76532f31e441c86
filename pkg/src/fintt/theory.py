"""Raw rules, rule-boundaries, generated symbol/equality rules, congruence
and metavariable closure-rule schemas, and the theory well-formedness gates."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Union

from .errors import (
    ArityMismatch,
    DuplicateSymbolRule,
    FreeVarInRule,
    MetaIntroducedTwice,
    MetaNotIntroduced,
    NotEqualityBoundary,
    NotObjectBoundary,
    NotObjectRule,
    SymbolExists,
)
from .instantiation import Instantiation, act
from .judgements import MetaCtx, fill, fill_equation, plain
from .syntax import (
    Abstr,
    Abstracted,
    AbstractedBoundary,
    AbstractedJudgement,
    Argument,
    AsmArg,
    AssumptionSet,
    BoundVar,
    BoundaryThesis,
    DUMMY,
    DummyArg,
    EqTm,
    EqTy,
    Expr,
    ExprArg,
    IsTm,
    IsTy,
    MetaApp,
    MetaArity,
    MetaName,
    Signature,
    SymbolApp,
    SymbolArity,
    Thesis,
    arity_check,
    asm,
    boundary_arity,
    fv,
    mv,
    mv_shallow,
    subst_bound_many,
    thesis_class,
)

Flavor = str  # "tt" | "cf"


@dataclass(frozen=True)
class RawRule:
    """Premises (a metavariable context) and a non-abstracted conclusion.

    In the cf flavour each premise metavariable is annotated with its own
    boundary, and the conclusion carries assumption sets.
    """

    premises: tuple[tuple[MetaName, AbstractedBoundary], ...]
    conclusion: Thesis

    @property
    def is_object(self) -> bool:
        return thesis_class(self.conclusion).is_object

    def meta_arities(self) -> dict[MetaName, MetaArity]:
        return {m: boundary_arity(b) for m, b in self.premises}


@dataclass(frozen=True)
class RuleBoundary:
    """Premises plus a conclusion boundary; generates symbol/equality rules."""

    premises: tuple[tuple[MetaName, AbstractedBoundary], ...]
    conclusion: BoundaryThesis

    @property
    def is_object(self) -> bool:
        return thesis_class(self.conclusion).is_object

    def meta_arities(self) -> dict[MetaName, MetaArity]:
        return {m: boundary_arity(b) for m, b in self.premises}


def generic_application(m: MetaName, arity: MetaArity, flavor: Flavor) -> Argument:
    """The canonical head for building a symbol rule from a rule-boundary."""
    k = arity.binders
    if arity.cls.is_object:
        inner: Argument = ExprArg(MetaApp(m, tuple(BoundVar(k - 1 - i) for i in range(k))))
    elif flavor == "tt":
        inner = DUMMY
    else:
        inner = AsmArg(
            AssumptionSet(frozenset(), frozenset(range(k)), frozenset([m]))
        )
    for _ in range(k):
        inner = Abstr(inner)
    return inner


def symbol_rule(
    sig: Signature, rb: RuleBoundary, symbol: str, flavor: Flavor
) -> tuple[Signature, RawRule]:
    """Extends the signature with ``symbol`` and returns its associated rule."""
    if not rb.is_object:
        raise NotObjectBoundary("symbol rules arise from object rule-boundaries")
    if symbol in sig:
        raise SymbolExists(symbol)
    arity = SymbolArity(
        thesis_class(rb.conclusion), tuple(boundary_arity(b) for _, b in rb.premises)
    )
    new_sig = sig.extend(symbol, arity)
    head = SymbolApp(
        symbol,
        tuple(
            generic_application(m, boundary_arity(b), flavor) for m, b in rb.premises
        ),
    )
    conclusion = fill(plain(rb.conclusion), ExprArg(head)).body
    return new_sig, RawRule(rb.premises, conclusion)


def equality_rule(rb: RuleBoundary, flavor: Flavor) -> RawRule:
    """The equality rule associated to an equality rule-boundary."""
    if rb.is_object:
        raise NotEqualityBoundary("equality rules arise from equality rule-boundaries")
    if flavor == "tt":
        head: Argument = DUMMY
    else:
        everything = AssumptionSet(frozenset(), frozenset(), frozenset(m for m, _ in rb.premises))
        head = AsmArg(everything.difference(asm(plain(rb.conclusion))))
    conclusion = fill(plain(rb.conclusion), head).body
    return RawRule(rb.premises, conclusion)


def is_symbol_rule(sig: Signature, rule: RawRule, flavor: Flavor) -> Optional[str]:
    """The symbol this rule is the associated symbol rule for, if any."""
    if not rule.is_object:
        return None
    head = rule.conclusion.ty if isinstance(rule.conclusion, IsTy) else None
    if isinstance(rule.conclusion, IsTm):
        head = rule.conclusion.term
    if not isinstance(head, SymbolApp):
        return None
    symbol = head.symbol
    if symbol not in sig:
        return None
    rb = RuleBoundary(rule.premises, _conclusion_boundary(rule.conclusion))
    expected_head = SymbolApp(
        symbol,
        tuple(generic_application(m, boundary_arity(b), flavor) for m, b in rb.premises),
    )
    expected = fill(plain(rb.conclusion), ExprArg(expected_head)).body
    if expected == rule.conclusion:
        return symbol
    return None


def _conclusion_boundary(t: Thesis) -> BoundaryThesis:
    from .judgements import unfill

    return unfill(plain(t))[0].body


# ---------------------------------------------------------------------------
# Closure-rule schemas (shared between the two engines)


def rule_instance_premises(
    rule: RawRule, inst: Instantiation
) -> tuple[list[AbstractedJudgement], AbstractedBoundary, AbstractedJudgement]:
    """The closure rule of a specific rule under an instantiation: the filled
    premises, the instantiated conclusion boundary, and the conclusion."""
    if len(inst) != len(rule.premises) or any(
        m != n for (m, _), (n, _) in zip(rule.premises, inst.entries)
    ):
        raise ArityMismatch("instantiation does not match the rule's premises")
    premises = []
    for i, (m, b) in enumerate(rule.premises, start=1):
        premises.append(fill(act(inst.restrict(i), b), inst[m]))
    bdry_thesis = _conclusion_boundary(rule.conclusion)
    bdry = act(inst, plain(bdry_thesis))
    conclusion = act(inst, plain(rule.conclusion))
    return premises, bdry, conclusion


def congruence_premises_tt(
    rule: RawRule, left: Instantiation, right: Instantiation
) -> tuple[list[AbstractedJudgement], AbstractedJudgement]:
    """The tt congruence closure rule for an object rule: premise judgements
    (both instantiations, equations for object premises, and the type
    equation for term rules) and the equational conclusion."""
    if not rule.is_object:
        raise NotObjectRule("congruence rules attach to object rules")
    premises: list[AbstractedJudgement] = []
    for i, (m, b) in enumerate(rule.premises, start=1):
        premises.append(fill(act(left.restrict(i), b), left[m]))
    for i, (m, b) in enumerate(rule.premises, start=1):
        premises.append(fill(act(right.restrict(i), b), right[m]))
    for i, (m, b) in enumerate(rule.premises, start=1):
        if boundary_arity(b).cls.is_object:
            premises.append(
                fill_equation(act(left.restrict(i), b), left[m], right[m], DUMMY)
            )
    if isinstance(rule.conclusion, IsTm):
        premises.append(
            plain(EqTy(act(left, rule.conclusion.ty), act(right, rule.conclusion.ty), DUMMY))
        )
    conclusion = _congruence_conclusion(rule, left, right, DUMMY)
    return premises, conclusion


def congruence_premises_tt_eco(
    rule: RawRule, left: Instantiation, right: Instantiation
) -> tuple[list[AbstractedJudgement], AbstractedJudgement]:
    """The economic tt congruence rule: left fills for equational premises,
    equations for object premises, in premise order."""
    if not rule.is_object:
        raise NotObjectRule("congruence rules attach to object rules")
    if len(right) != len(rule.premises) or any(
        m != n for (m, _), (n, _) in zip(rule.premises, right.entries)
    ):
        raise ArityMismatch("instantiation does not match the rule's premises")
    premises: list[AbstractedJudgement] = []
    for i, (m, b) in enumerate(rule.premises, start=1):
        if boundary_arity(b).cls.is_object:
            premises.append(
                fill_equation(act(left.restrict(i), b), left[m], right[m], DUMMY)
            )
        else:
            premises.append(fill(act(left.restrict(i), b), left[m]))
    conclusion = _congruence_conclusion(rule, left, right, DUMMY)
    return premises, conclusion


def _congruence_conclusion(
    rule: RawRule,
    left: Instantiation,
    right: Instantiation,
    by: Union[DummyArg, AssumptionSet],
) -> AbstractedJudgement:
    from .judgements import unfill

    bdry, head = unfill(plain(rule.conclusion))
    return fill_equation(act(left, bdry), act(left, head), act(right, head), by)


def metavariable_rule_instance(
    m: MetaName, boundary: AbstractedBoundary, terms: list[Expr]
) -> tuple[list[AbstractedJudgement], AbstractedBoundary, AbstractedJudgement]:
    """The metavariable closure rule: term premises at iteratively substituted
    binder types, the substituted boundary, and the conclusion."""
    if len(terms) != len(boundary.prefix):
        raise ArityMismatch(
            f"{m.name} takes {len(boundary.prefix)} arguments, got {len(terms)}"
        )
    premises = []
    for j, ty in enumerate(boundary.prefix):
        # type of the j-th binder with the first j terms substituted in
        opened = subst_bound_many(ty, terms[:j]) if j else ty
        premises.append(plain(IsTm(terms[j], opened)))
    bdry = Abstracted((), subst_bound_many(boundary.body, terms) if terms else boundary.body)
    conclusion = fill(bdry, ExprArg(MetaApp(m, tuple(terms))))
    return premises, bdry, conclusion


def metavariable_congruence_instance(
    m: MetaName,
    boundary: AbstractedBoundary,
    left_terms: list[Expr],
    right_terms: list[Expr],
) -> tuple[list[AbstractedJudgement], AbstractedJudgement]:
    """The tt metavariable congruence closure rule (object boundaries only)."""
    if not boundary_arity(boundary).cls.is_object:
        raise NotObjectBoundary("metavariable congruence needs an object boundary")
    if len(left_terms) != len(boundary.prefix) or len(right_terms) != len(boundary.prefix):
        raise ArityMismatch("term lists must match the binder count")
    premises = []
    for j, ty in enumerate(boundary.prefix):
        premises.append(plain(IsTm(left_terms[j], subst_bound_many(ty, left_terms[:j]))))
    for j, ty in enumerate(boundary.prefix):
        premises.append(plain(IsTm(right_terms[j], subst_bound_many(ty, right_terms[:j]))))
    for j, ty in enumerate(boundary.prefix):
        opened = subst_bound_many(ty, left_terms[:j])
        premises.append(plain(EqTm(left_terms[j], right_terms[j], opened, DUMMY)))
    body = boundary.body
    from .syntax import IsTmB

    if isinstance(body, IsTmB):
        premises.append(
            plain(
                EqTy(
                    subst_bound_many(body.ty, left_terms),
                    subst_bound_many(body.ty, right_terms),
                    DUMMY,
                )
            )
        )
    bdry_left = Abstracted((), subst_bound_many(body, left_terms) if left_terms else body)
    conclusion = fill_equation(
        bdry_left,
        ExprArg(MetaApp(m, tuple(left_terms))),
        ExprArg(MetaApp(m, tuple(right_terms))),
        DUMMY,
    )
    return premises, conclusion


# ---------------------------------------------------------------------------
# Theories


@dataclass(frozen=True)
class TheoryRule:
    name: str
    rule: RawRule
    symbol_for: Optional[str] = None  # set when the rule was generated for a symbol


class Theory:
    """A signature together with an ordered list of named specific rules.

    The list order is the well-founded order of the finitary gate.  Theories
    are immutable after construction; the finitary/standard checks cache
    their witnesses on the instance.
    """

    def __init__(self, signature: Signature, rules: list[TheoryRule], flavor: Flavor):
        if flavor not in ("tt", "cf"):
            raise ValueError("flavor must be 'tt' or 'cf'")
        self.signature = signature
        self.rules: tuple[TheoryRule, ...] = tuple(rules)
        self.flavor = flavor
        names = [r.name for r in self.rules]
        if len(set(names)) != len(names):
            raise ValueError("rule names must be distinct")
        self._by_name = {r.name: r for r in self.rules}
        self.finitary_witnesses: Optional[dict] = None

    def __contains__(self, name: str) -> bool:
        return name in self._by_name

    def rule(self, name: str) -> TheoryRule:
        if name not in self._by_name:
            raise KeyError(f"no rule named {name!r}")
        return self._by_name[name]

    def prefix(self, n: int) -> "Theory":
        return Theory(self.signature, list(self.rules[:n]), self.flavor)

    def symbol_rule_for(self, symbol: str) -> TheoryRule:
        for r in self.rules:
            if r.symbol_for == symbol:
                return r
        from .errors import NoSymbolRule

        raise NoSymbolRule(symbol)

    def __repr__(self) -> str:
        return f"Theory({[r.name for r in self.rules]}, flavor={self.flavor!r})"


def check_raw(sig: Signature, rule: Union[RawRule, RuleBoundary], flavor: Flavor) -> None:
    """Validates the syntactic side conditions of a raw rule or rule-boundary.

    Premise boundaries and the conclusion must be closed, arities respected,
    each metavariable introduced exactly once before use, and (cf rules only)
    the conclusion must mention every premise metavariable.
    """
    seen: dict[MetaName, MetaArity] = {}
    names_seen: set[str] = set()
    for m, b in rule.premises:
        if m.name in names_seen:
            raise MetaIntroducedTwice(m.name)
        names_seen.add(m.name)
        if fv(b):
            raise FreeVarInRule(f"premise boundary of {m.name} mentions free variables")
        used = mv_shallow(b) if flavor == "tt" else mv(b)
        for u in used:
            if u not in seen:
                raise MetaNotIntroduced(
                    f"boundary of {m.name} fails to introduce the metavariable {u.name}"
                )
        arity_check(sig, dict(seen), b)
        if flavor == "cf" and m.annotation != b:
            raise MetaNotIntroduced(
                f"cf premise {m.name} must be annotated with its own boundary"
            )
        seen[m] = boundary_arity(b)
    conclusion = rule.conclusion
    if fv(plain(conclusion)):
        raise FreeVarInRule("conclusion mentions free variables")
    used = mv_shallow(plain(conclusion)) if flavor == "tt" else mv(plain(conclusion))
    for u in used:
        if u not in seen:
            raise MetaNotIntroduced(f"conclusion fails to introduce the metavariable {u.name}")
    arity_check(sig, dict(seen), plain(conclusion))
    if flavor == "cf" and isinstance(rule, RawRule):
        if used != frozenset(seen):
            missing = sorted(m.name for m in set(seen) - set(used))
            raise MetaNotIntroduced(
                "cf conclusion must mention every premise metavariable; "
                f"missing {', '.join(missing)}"
            )


def check_standard(theory: Theory) -> None:
    """Checks that object rules are symbol rules, one per symbol.

    Assumes ``check_finitary`` has already passed; raises
    :class:`DuplicateSymbolRule` or :class:`NotObjectRule`-flavoured errors
    via :class:`DuplicateSymbolRule` and ``MetaNotIntroduced`` otherwise.
    """
    seen_symbols: set[str] = set()
    for r in theory.rules:
        if not r.rule.is_object:
            continue
        symbol = is_symbol_rule(theory.signature, r.rule, theory.flavor)
        if symbol is None:
            raise NotObjectRule(f"rule {r.name} is an object rule but not a symbol rule")
        if symbol in seen_symbols:
            raise DuplicateSymbolRule(symbol)
        seen_symbols.add(symbol)
    for symbol in theory.signature:
        if symbol not in seen_symbols:
            raise DuplicateSymbolRule(f"symbol {symbol} has no associated rule")


def check_finitary(theory: Theory) -> None:
    """Walks the rules in list order, deriving each premise boundary and the
    conclusion boundary over the prefix theory; caches the witnesses."""
    from . import derive

    derive.check_finitary(theory)


# ---------------------------------------------------------------------------
# Building theories from flavourless declarations


def _annotate(x, mapping: dict[str, MetaName]):
    """Rewrites bare metavariable heads to their annotated cf counterparts."""
    from .syntax import (
        Abstr,
        Abstracted,
        AsmArg,
        AssumptionSet,
        BoundVar,
        Convert,
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
    )

    def walk(x):
        match x:
            case MetaApp(meta=m, args=args):
                new_m = mapping.get(m.name, m) if m.annotation is None else m
                return MetaApp(new_m, tuple(walk(t) for t in args))
            case FreeVar(name=n, annotation=ann):
                return x if ann is None else FreeVar(n, walk(ann))
            case BoundVar() | DummyArg() | IsTyB() | None:
                return x
            case SymbolApp(symbol=s, args=args):
                return SymbolApp(s, tuple(walk(a) for a in args))
            case Convert(term=t, assumptions=a):
                return Convert(walk(t), walk(a))
            case AssumptionSet(free_vars=fvs, bound_vars=bvs, metas=ms):
                return AssumptionSet(
                    frozenset(walk(v) for v in fvs),
                    bvs,
                    frozenset(
                        mapping.get(m.name, m) if m.annotation is None else m for m in ms
                    ),
                )
            case ExprArg(expr=e):
                return ExprArg(walk(e))
            case AsmArg(assumptions=a):
                return AsmArg(walk(a))
            case Abstr(body=b):
                return Abstr(walk(b))
            case IsTy(ty=a):
                return IsTy(walk(a))
            case IsTm(term=t, ty=a):
                return IsTm(walk(t), walk(a))
            case EqTy(lhs=a, rhs=b, by=by):
                return EqTy(walk(a), walk(b), walk(by) if not isinstance(by, DummyArg) else by)
            case EqTm(lhs=s, rhs=t, ty=a, by=by):
                return EqTm(
                    walk(s), walk(t), walk(a), walk(by) if not isinstance(by, DummyArg) else by
                )
            case IsTmB(ty=a):
                return IsTmB(walk(a))
            case EqTyB(lhs=a, rhs=b):
                return EqTyB(walk(a), walk(b))
            case EqTmB(lhs=s, rhs=t, ty=a):
                return EqTmB(walk(s), walk(t), walk(a))
            case Abstracted(prefix=pfx, body=body):
                return Abstracted(tuple(walk(t) for t in pfx), walk(body))
            case _:
                raise TypeError(f"cannot annotate {x!r}")

    return walk(x)


class TheoryBuilder:
    """Assembles a theory of one flavour from declarations written with bare
    metavariable names; the cf elaboration annotates them progressively."""

    def __init__(self, flavor: Flavor):
        self.flavor = flavor
        self.signature = Signature()
        self.rules: list[TheoryRule] = []

    def _elaborate_premises(
        self, premises: list[tuple[str, AbstractedBoundary]]
    ) -> tuple[tuple[MetaName, AbstractedBoundary], ...]:
        out = []
        mapping: dict[str, MetaName] = {}
        for name, b in premises:
            if self.flavor == "cf":
                b2 = _annotate(b, mapping)
                m = MetaName(name, b2)
            else:
                b2 = b
                m = MetaName(name)
            mapping[name] = m
            out.append((m, b2))
        return tuple(out), mapping

    def add_symbol(self, name: str, arity: SymbolArity) -> "TheoryBuilder":
        self.signature = self.signature.extend(name, arity)
        return self

    def declare_symbol_rule(
        self,
        rule_name: str,
        premises: list[tuple[str, AbstractedBoundary]],
        conclusion: BoundaryThesis,
        symbol: Optional[str] = None,
    ) -> "TheoryBuilder":
        symbol = symbol or rule_name
        prem, mapping = self._elaborate_premises(premises)
        concl = _annotate(conclusion, mapping) if self.flavor == "cf" else conclusion
        rb = RuleBoundary(prem, concl)
        self.signature, rule = symbol_rule(self.signature, rb, symbol, self.flavor)
        self.rules.append(TheoryRule(rule_name, rule, symbol_for=symbol))
        return self

    def declare_equality_rule(
        self,
        rule_name: str,
        premises: list[tuple[str, AbstractedBoundary]],
        conclusion: BoundaryThesis,
    ) -> "TheoryBuilder":
        prem, mapping = self._elaborate_premises(premises)
        concl = _annotate(conclusion, mapping) if self.flavor == "cf" else conclusion
        rule = equality_rule(RuleBoundary(prem, concl), self.flavor)
        self.rules.append(TheoryRule(rule_name, rule))
        return self

    def declare_explicit_rule(
        self,
        rule_name: str,
        premises: list[tuple[str, AbstractedBoundary]],
        conclusion: Thesis,
    ) -> "TheoryBuilder":
        """A rule whose conclusion judgement is spelled out (object rules)."""
        prem, mapping = self._elaborate_premises(premises)
        concl = _annotate(conclusion, mapping) if self.flavor == "cf" else conclusion
        rule = RawRule(prem, concl)
        self.rules.append(
            TheoryRule(rule_name, rule, symbol_for=is_symbol_rule(self.signature, rule, self.flavor))
        )
        return self

    def theory(self) -> Theory:
        return Theory(self.signature, self.rules, self.flavor)
