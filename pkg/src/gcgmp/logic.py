"""Strategy-logic formulas: syntax, parsing, fragment classification.

State formulas talk about a configuration: atomic propositions, arithmetic
constraints over current utilities, Boolean combinations, and coalition
modalities ``<<A,B>>body`` ("the coalition has strategies so that every
resulting play satisfies *body*").  Bodies are path formulas: temporal
operators ``X`` (next), ``G`` (always), ``U`` (until), the derived ``F p``
= ``true U p``, Boolean combinations of path formulas, play-value atoms
``w_<agent> REL bound``, and state formulas read at the first position.

One node set covers both levels; a formula is state-level when no temporal
operator or play-value atom occurs outside a coalition modality.  ``|`` is
accepted and immediately rewritten to ``!(!a & !b)``, and ``F p`` to
``true U p``, so engines only ever see the core connectives.

Concrete syntax, loosest to tightest: ``|``, ``&``, ``U`` (right
associative), then the unary ``! X G F``.  A coalition modality binds the
*whole* path formula to its right: ``<<I>>p U q`` is ``<<I>>(p U q)``, so
conjoining outside a modality needs parentheses, as in ``(<<I>>G p) & q``.
``true``, ``false``, ``X``, ``G``, ``F`` and ``U`` are reserved words; bare
comparisons and play-value atoms are parenthesised when nested, e.g.
``!(v_I > 0)``.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Union

from . import arith
from .arith import AtomicConstraint, PathConstraint, TokenStream
from .errors import FragmentError, ParseError, UnknownAgent
from .model import Gcgmp


@dataclass(frozen=True)
class Prop:
    name: str


@dataclass(frozen=True)
class Constraint:
    atom: AtomicConstraint


@dataclass(frozen=True)
class Tru:
    pass


TRUE = Tru()


@dataclass(frozen=True)
class Not:
    sub: "Formula"


@dataclass(frozen=True)
class And:
    left: "Formula"
    right: "Formula"


@dataclass(frozen=True)
class Next:
    sub: "Formula"


@dataclass(frozen=True)
class Always:
    sub: "Formula"


@dataclass(frozen=True)
class Until:
    left: "Formula"
    right: "Formula"


@dataclass(frozen=True)
class Apc:
    """Play-value atom ``w_<agent> REL bound``; only meaningful on paths."""

    pc: PathConstraint


@dataclass(frozen=True)
class Coop:
    coalition: frozenset[str]
    body: "Formula"


Formula = Union[Prop, Constraint, Tru, Not, And, Next, Always, Until, Apc, Coop]


def is_state_formula(f: Formula) -> bool:
    """No temporal operator or play-value atom outside a coalition modality."""
    if isinstance(f, (Prop, Constraint, Tru, Coop)):
        return True
    if isinstance(f, Not):
        return is_state_formula(f.sub)
    if isinstance(f, And):
        return is_state_formula(f.left) and is_state_formula(f.right)
    return False


class FragmentTag(Enum):
    """Nested fragments, smallest first.

    ATL_PURE   coalition bodies are exactly X/G/U over state formulas, and
               atoms are propositions only
    NGL        like ATL_PURE but utility comparisons may appear in state
               formulas
    NGL_STAR   everything else: play-value atoms, Boolean structure or
               nesting inside coalition bodies, bare state bodies
    """

    ATL_PURE = "ATL-pure"
    NGL = "NGL"
    NGL_STAR = "NGLstar"


_ORDER = {FragmentTag.ATL_PURE: 0, FragmentTag.NGL: 1, FragmentTag.NGL_STAR: 2}


def _join(a: FragmentTag, b: FragmentTag) -> FragmentTag:
    return a if _ORDER[a] >= _ORDER[b] else b


def classify(f: Formula) -> FragmentTag:
    """The smallest fragment containing ``f`` (a state formula)."""
    if not is_state_formula(f):
        raise FragmentError("only state formulas can be classified and checked")
    return _classify_state(f)


def _classify_state(f: Formula) -> FragmentTag:
    if isinstance(f, (Prop, Tru)):
        return FragmentTag.ATL_PURE
    if isinstance(f, Constraint):
        return FragmentTag.NGL
    if isinstance(f, Not):
        return _classify_state(f.sub)
    if isinstance(f, And):
        return _join(_classify_state(f.left), _classify_state(f.right))
    if isinstance(f, Coop):
        body = f.body
        if isinstance(body, Next) or isinstance(body, Always):
            if is_state_formula(body.sub):
                return _join(FragmentTag.ATL_PURE, _classify_state(body.sub))
        if isinstance(body, Until):
            if is_state_formula(body.left) and is_state_formula(body.right):
                return _join(_classify_state(body.left), _classify_state(body.right))
        return FragmentTag.NGL_STAR
    return FragmentTag.NGL_STAR  # path operators at state level never get here


# --- strategy classes ------------------------------------------------------


class StrategyMemory(Enum):
    MEMORYLESS = "memoryless"
    PERFECT_RECALL = "perfect-recall"


class StrategyObservation(Enum):
    STATE_BASED = "state-based"
    CONFIGURATION_BASED = "configuration-based"


@dataclass(frozen=True)
class StrategyClassSpec:
    """What a strategy may look at: memory discipline times observation.

    Memoryless strategies are tables over the current observation;
    perfect-recall strategies may branch on the entire observation history.
    Observations are either the bare state or the full configuration
    (state plus utilities).
    """

    memory: StrategyMemory
    observation: StrategyObservation

    SHORT = {
        ("memoryless", "state-based"): "ml-state",
        ("memoryless", "configuration-based"): "ml-config",
        ("perfect-recall", "state-based"): "pr-state",
        ("perfect-recall", "configuration-based"): "pr-config",
    }

    @property
    def short(self) -> str:
        return self.SHORT[(self.memory.value, self.observation.value)]

    @staticmethod
    def parse(text: str) -> "StrategyClassSpec":
        table = {
            "ml-state": ML_STATE,
            "ml-config": ML_CONFIG,
            "pr-state": PR_STATE,
            "pr-config": PR_CONFIG,
        }
        if text not in table:
            raise ValueError(
                f"unknown strategy class {text!r}; pick one of {sorted(table)}"
            )
        return table[text]


ML_STATE = StrategyClassSpec(StrategyMemory.MEMORYLESS, StrategyObservation.STATE_BASED)
ML_CONFIG = StrategyClassSpec(
    StrategyMemory.MEMORYLESS, StrategyObservation.CONFIGURATION_BASED
)
PR_STATE = StrategyClassSpec(
    StrategyMemory.PERFECT_RECALL, StrategyObservation.STATE_BASED
)
PR_CONFIG = StrategyClassSpec(
    StrategyMemory.PERFECT_RECALL, StrategyObservation.CONFIGURATION_BASED
)


# --- structure queries --------------------------------------------------


def constraint_atoms(f: Formula, m: Gcgmp | None = None) -> list[AtomicConstraint]:
    """Every utility comparison in the formula, in syntactic order.

    With a model, the comparisons inside its guards are appended too (the
    saturation bound has to cover both sources of constants).
    """
    out: list[AtomicConstraint] = []

    def walk(g: Formula):
        if isinstance(g, Constraint):
            out.append(g.atom)
        elif isinstance(g, (Not, Next, Always)):
            walk(g.sub)
        elif isinstance(g, (And, Until)):
            walk(g.left)
            walk(g.right)
        elif isinstance(g, Coop):
            walk(g.body)

    walk(f)
    if m is not None:
        for guard in m.guards.values():
            out.extend(arith.acf_atoms(guard))
    return out


def path_constraints(f: Formula) -> list[PathConstraint]:
    out: list[PathConstraint] = []

    def walk(g: Formula):
        if isinstance(g, Apc):
            out.append(g.pc)
        elif isinstance(g, (Not, Next, Always)):
            walk(g.sub)
        elif isinstance(g, (And, Until)):
            walk(g.left)
            walk(g.right)
        elif isinstance(g, Coop):
            walk(g.body)

    walk(f)
    return out


def formula_props(f: Formula) -> set[str]:
    if isinstance(f, Prop):
        return {f.name}
    if isinstance(f, (Not, Next, Always)):
        return formula_props(f.sub)
    if isinstance(f, (And, Until)):
        return formula_props(f.left) | formula_props(f.right)
    if isinstance(f, Coop):
        return formula_props(f.body)
    return set()


def formula_agents(f: Formula) -> set[str]:
    """Agents the formula talks about: coalitions, utilities, play values."""
    if isinstance(f, Constraint):
        return f.atom.variables()
    if isinstance(f, Apc):
        return {f.pc.agent}
    if isinstance(f, (Not, Next, Always)):
        return formula_agents(f.sub)
    if isinstance(f, (And, Until)):
        return formula_agents(f.left) | formula_agents(f.right)
    if isinstance(f, Coop):
        return set(f.coalition) | formula_agents(f.body)
    return set()


def bind_formula(m: Gcgmp, f: Formula) -> Formula:
    """Check every agent name in ``f`` against the model; returns ``f`` unchanged.

    Propositions need no declaration: one that labels no state is simply
    false everywhere, which keeps formulas stable across models (a halting
    objective may mention ``e1`` even when no reachable state carries it).
    """
    for a in sorted(formula_agents(f)):
        if a not in m.agents:
            raise UnknownAgent(f"agent {a!r} is not in the model")
    return f


# --- parsing --------------------------------------------------------------

_RESERVED = {"true", "false", "X", "G", "F", "U"}


def parse_formula(text: str) -> Formula:
    ts = TokenStream(text)
    f = _parse_or(ts)
    ts.expect_end()
    return f


def _mk_or(a: Formula, b: Formula) -> Formula:
    return Not(And(Not(a), Not(b)))


def _parse_or(ts: TokenStream) -> Formula:
    f = _parse_and(ts)
    while ts.at("|"):
        ts.take("|")
        f = _mk_or(f, _parse_and(ts))
    return f


def _parse_and(ts: TokenStream) -> Formula:
    f = _parse_until(ts)
    while ts.at("&"):
        ts.take("&")
        f = And(f, _parse_until(ts))
    return f


def _parse_until(ts: TokenStream) -> Formula:
    f = _parse_unary(ts)
    tok = ts.peek()
    if tok is not None and tok.kind == "ident" and tok.value == "U":
        ts.take()
        return Until(f, _parse_until(ts))
    return f


def _parse_unary(ts: TokenStream) -> Formula:
    tok = ts.peek()
    if tok is None:
        raise ParseError("unexpected end of input", col=len(ts.text), expected="formula")
    if tok.kind == "!":
        ts.take()
        return Not(_parse_unary(ts))
    if tok.kind == "ident" and tok.value in ("X", "G", "F"):
        ts.take()
        sub = _parse_unary(ts)
        if tok.value == "X":
            return Next(sub)
        if tok.value == "G":
            return Always(sub)
        return Until(TRUE, sub)
    return _parse_primary(ts)


def _parse_primary(ts: TokenStream) -> Formula:
    tok = ts.peek()
    if tok is None:
        raise ParseError("unexpected end of input", col=len(ts.text), expected="formula")
    if tok.kind == "(":
        ts.take()
        f = _parse_or(ts)
        ts.take(")")
        return f
    if tok.kind == "<<":
        ts.take()
        agents = []
        while not ts.at(">>"):
            el = ts.peek()
            if el is None or el.kind not in ("ident", "number"):
                pos = el.pos if el else len(ts.text)
                raise ParseError("bad coalition member", col=pos, expected="agent name")
            ts.take()
            agents.append(el.text)
            if ts.at(","):
                ts.take(",")
        ts.take(">>")
        body = _parse_or(ts)  # the modality swallows the whole path formula
        return Coop(frozenset(agents), body)
    if tok.kind == "wvar":
        return Apc(arith.parse_apc_tokens(ts))
    if tok.kind in ("var", "number"):
        return Constraint(arith.parse_atom_tokens(ts))
    if tok.kind == "ident":
        if tok.value == "true":
            ts.take()
            return TRUE
        if tok.value == "false":
            ts.take()
            return Not(TRUE)
        if tok.value in _RESERVED:
            raise ParseError(f"misplaced {tok.value!r}", col=tok.pos, expected="formula")
        ts.take()
        return Prop(tok.value)
    raise ParseError(f"unexpected {tok.text!r}", col=tok.pos, expected="formula")


# --- printing --------------------------------------------------------------

# precedence levels: 0 loosest (a coalition modality swallows everything to
# its right, so it only prints bare at level 0), 1 &, 2 U, 3 prefix
# operators; comparison atoms also wrap when nested.


def format_formula(f: Formula) -> str:
    return _fmt(f, 0)


def _fmt(f: Formula, min_level: int) -> str:
    if isinstance(f, Tru):
        return "true"
    if isinstance(f, Prop):
        return f.name
    if isinstance(f, Constraint):
        return _wrap(arith.format_atom(f.atom), min_level > 0)
    if isinstance(f, Apc):
        return _wrap(arith.format_apc(f.pc), min_level > 0)
    if isinstance(f, Not):
        return "!" + _fmt(f.sub, 3)
    if isinstance(f, And):
        return _wrap(f"{_fmt(f.left, 1)} & {_fmt(f.right, 2)}", min_level > 1)
    if isinstance(f, Until):
        if f.left == TRUE:
            return "F " + _fmt(f.right, 3)
        return _wrap(f"{_fmt(f.left, 3)} U {_fmt(f.right, 2)}", min_level > 2)
    if isinstance(f, Next):
        return "X " + _fmt(f.sub, 3)
    if isinstance(f, Always):
        return "G " + _fmt(f.sub, 3)
    if isinstance(f, Coop):
        s = f"<<{','.join(sorted(f.coalition))}>>" + _fmt(f.body, 0)
        return _wrap(s, min_level > 0)
    raise TypeError(f"not a formula: {f!r}")


def _wrap(s: str, need: bool) -> str:
    return f"({s})" if need else s
