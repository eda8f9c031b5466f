"""Game models: agents, guarded actions, transitions, payoffs.

A model couples an ordinary concurrent game structure (agents, per-state
available actions, a total transition function over action profiles, atomic
propositions labelling states) with

* a rational payoff vector per (state, action profile),
* per-agent *guards*: constraint formulas over that agent's own running
  utility which gate when an action may be taken, and
* per-agent discount factors in [0, 1] applied to accumulated payoffs.

Models are plain frozen dataclasses; `validate` reports every problem it can
find rather than stopping at the first.  The JSON file format writes
rationals as strings ("-3/2"), transitions/payoffs/guards as flat lists of
rows with action profiles spelled out as {agent: action} maps, and no atom
declarations: the atom set is the union of the label sets.  Loading only
checks what must hold for the document to denote *a* model at all
(well-formed shapes, no duplicate ids, no undeclared names inside profile
or value maps); everything else is `validate`'s business.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass
from enum import Enum
from fractions import Fraction
from importlib import resources
from typing import Iterator, Mapping

from . import arith
from .arith import ACF_TRUE, ConstraintFormula, eval_acf
from .errors import InvalidState, ParseError, UnknownAgent, UnknownIdentifier

Profile = tuple[str, ...]


class ValueSemantics(Enum):
    """How the long-run value ``w_<agent>`` of an infinite play is defined."""

    MEAN_LIMIT = "mean"
    DISCOUNTED = "discounted"
    TOTAL = "total"


@dataclass(frozen=True)
class Gcgmp:
    agents: tuple[str, ...]
    states: tuple[str, ...]
    actions: Mapping[str, tuple[str, ...]]
    available: Mapping[tuple[str, str], tuple[str, ...]]  # (agent, state)
    transitions: Mapping[tuple[str, Profile], str]
    payoffs: Mapping[tuple[str, Profile], tuple[Fraction, ...]]
    atoms: tuple[str, ...]
    labels: Mapping[str, frozenset[str]]
    guards: Mapping[tuple[str, str, str], ConstraintFormula]  # (agent, state, action)
    discounts: Mapping[str, Fraction]
    value_semantics: ValueSemantics = ValueSemantics.TOTAL

    # -- lookups with defaults -------------------------------------------

    def agent_index(self, agent: str) -> int:
        try:
            return self.agents.index(agent)
        except ValueError:
            raise UnknownAgent(agent) from None

    def available_of(self, agent: str, state: str) -> tuple[str, ...]:
        got = self.available.get((agent, state))
        if got is not None:
            return got
        return self.actions.get(agent, ())

    def guard_of(self, agent: str, state: str, action: str) -> ConstraintFormula:
        return self.guards.get((agent, state, action), ACF_TRUE)

    def payoff_of(self, agent: str, state: str, profile: Profile) -> Fraction:
        return self.payoffs[(state, profile)][self.agent_index(agent)]

    def label_of(self, state: str) -> frozenset[str]:
        if state not in self.states:
            raise InvalidState(state)
        return self.labels.get(state, frozenset())

    def available_profiles(self, state: str) -> Iterator[Profile]:
        pools = [self.available_of(a, state) for a in self.agents]
        return itertools.product(*pools)

    def enabled_actions(self, agent: str, state: str, utility: Fraction) -> tuple[str, ...]:
        """Available actions whose guard accepts the agent's current utility."""
        val = {agent: utility}
        return tuple(
            act
            for act in self.available_of(agent, state)
            if eval_acf(self.guard_of(agent, state, act), val)
        )


# --- validation -------------------------------------------------------------


@dataclass(frozen=True)
class Violation:
    kind: str
    subject: tuple
    message: str
    witness: Fraction | None = None

    def __str__(self):
        return f"[{self.kind}] {self.message}"


def validate(m: Gcgmp) -> list[Violation]:
    """Every defect `m` has; an empty list means the model is well-formed.

    Checked: uniqueness of names, non-empty availability drawn from each
    agent's alphabet, totality of transitions and payoffs over available
    profiles (and no entries beyond them), label/atom consistency, guards
    mentioning only the owning agent's utility variable, guard totality
    (for every reachable utility value at least one available action is
    enabled), discount factors within [0, 1], and discounted value
    semantics requiring strictly contractive discounts.
    """
    out: list[Violation] = []

    def bad(kind, subject, message, witness=None):
        out.append(Violation(kind, subject, message, witness))

    if not m.agents:
        bad("no-agents", (), "a model needs at least one agent")
    if not m.states:
        bad("no-states", (), "a model needs at least one state")
    for name, seq in [("agent", m.agents), ("state", m.states), ("atom", m.atoms)]:
        dups = {x for x in seq if seq.count(x) > 1}
        for x in sorted(dups):
            bad(f"duplicate-{name}", (x,), f"{name} {x!r} declared more than once")

    for a in m.agents:
        if not m.actions.get(a):
            bad("no-actions", (a,), f"agent {a!r} has an empty action alphabet")
    for a in m.actions:
        if a not in m.agents:
            bad("unknown-agent", (a,), f"actions listed for unknown agent {a!r}")

    for (a, s), acts in m.available.items():
        if a not in m.agents:
            bad("unknown-agent", (a, s), f"availability for unknown agent {a!r}")
            continue
        if s not in m.states:
            bad("unknown-state", (a, s), f"availability of {a!r} at unknown state {s!r}")
            continue
        if not acts:
            bad("empty-available", (a, s), f"agent {a!r} has no available action at {s!r}")
        for act in acts:
            if act not in m.actions.get(a, ()):
                bad(
                    "unknown-action",
                    (a, s, act),
                    f"available action {act!r} of {a!r} at {s!r} is not in its alphabet",
                )

    valid_profiles: dict[str, set[Profile]] = {
        s: set(m.available_profiles(s)) for s in m.states
    }
    for s in m.states:
        for prof in sorted(valid_profiles[s]):
            if (s, prof) not in m.transitions:
                bad(
                    "missing-transition",
                    (s, prof),
                    f"no successor for profile {','.join(prof)} at {s!r}",
                )
            if (s, prof) not in m.payoffs:
                bad(
                    "missing-payoff",
                    (s, prof),
                    f"no payoff vector for profile {','.join(prof)} at {s!r}",
                )
    for (s, prof), target in m.transitions.items():
        if s not in m.states or prof not in valid_profiles.get(s, set()):
            bad(
                "extraneous-transition",
                (s, prof),
                f"transition at {s!r} for unavailable profile {','.join(prof)}",
            )
        elif target not in m.states:
            bad("unknown-state", (s, prof), f"transition target {target!r} is not a state")
    for (s, prof), vec in m.payoffs.items():
        if s not in m.states or prof not in valid_profiles.get(s, set()):
            bad(
                "extraneous-payoff",
                (s, prof),
                f"payoff at {s!r} for unavailable profile {','.join(prof)}",
            )
        elif len(vec) != len(m.agents):
            bad(
                "payoff-arity",
                (s, prof),
                f"payoff vector at {s!r}/{','.join(prof)} has {len(vec)} entries, "
                f"expected {len(m.agents)}",
            )

    for s, lab in m.labels.items():
        if s not in m.states:
            bad("unknown-state", (s,), f"labelling for unknown state {s!r}")
        for p in sorted(lab):
            if p not in m.atoms:
                bad("unknown-atom", (s, p), f"state {s!r} labelled with undeclared atom {p!r}")

    for (a, s, act), g in m.guards.items():
        if a not in m.agents or s not in m.states:
            bad("unknown-agent" if a not in m.agents else "unknown-state", (a, s, act),
                f"guard for unknown agent/state ({a!r}, {s!r})")
            continue
        if act not in m.actions.get(a, ()):
            bad("unknown-action", (a, s, act),
                f"guard of {a!r} at {s!r} for action {act!r} outside its alphabet")
            continue
        foreign = arith.acf_variables(g) - {a}
        if foreign:
            bad(
                "guard-foreign-variable",
                (a, s, act),
                f"guard of {a!r} at {s!r} on {act!r} mentions other agents' "
                f"utilities: {', '.join(sorted(foreign))}",
            )

    # guard totality: at each state some available action must be enabled
    # whatever the agent's utility is
    for a in m.agents:
        for s in m.states:
            acts = m.available_of(a, s)
            if not acts:
                continue  # already reported as empty-available
            gs = [m.guard_of(a, s, act) for act in acts]
            if any(arith.acf_variables(g) - {a} for g in gs):
                continue  # foreign variables already reported; totality undecidable here
            disj = gs[0]
            for g in gs[1:]:
                disj = arith.Or(disj, g)
            cx = arith.validity_counterexample(disj)
            if cx is not None:
                bad(
                    "guard-gap",
                    (a, s),
                    f"agent {a!r} at {s!r} has no enabled action when its utility is {cx}",
                    witness=cx,
                )

    for a in m.agents:
        d = m.discounts.get(a)
        if d is None:
            bad("missing-discount", (a,), f"agent {a!r} has no discount factor")
        elif not (0 <= d <= 1):
            bad("bad-discount", (a,), f"discount of {a!r} is {d}, outside [0, 1]")
    for a in m.discounts:
        if a not in m.agents:
            bad("unknown-agent", (a,), f"discount listed for unknown agent {a!r}")

    if m.value_semantics is ValueSemantics.DISCOUNTED:
        for a in m.agents:
            if m.discounts.get(a) == 1:
                bad(
                    "discount-not-contractive",
                    (a,),
                    f"discounted value semantics needs discount < 1, agent {a!r} has 1",
                )

    return out


# --- JSON I/O ---------------------------------------------------------------

_FIELDS = {
    "agents", "states", "actions", "available", "transitions", "payoffs",
    "labels", "guards", "discounts", "value_semantics",
}


def _field(row, key, where):
    if not isinstance(row, Mapping) or key not in row:
        raise ParseError(f"{where}: missing {key!r}")
    return row[key]


def _profile_from_map(agents, entry, where) -> Profile:
    """An action profile written as a {agent: action} map covering every agent."""
    if not isinstance(entry, Mapping):
        raise ParseError(f"{where}: profile must map agents to actions")
    extra = sorted(set(entry) - set(agents))
    if extra:
        raise UnknownIdentifier(
            f"{where}: profile names undeclared agents: {', '.join(extra)}"
        )
    missing = [a for a in agents if a not in entry]
    if missing:
        raise ParseError(f"{where}: profile misses agents: {', '.join(missing)}")
    return tuple(entry[a] for a in agents)


def model_from_dict(doc: dict) -> Gcgmp:
    unknown = set(doc) - _FIELDS
    if unknown:
        raise ValueError(f"unknown model fields: {', '.join(sorted(unknown))}")
    agents = tuple(doc.get("agents", ()))
    states = tuple(doc.get("states", ()))
    for kind, seq in (("agent", agents), ("state", states)):
        dup = sorted({x for x in seq if seq.count(x) > 1})
        if dup:
            raise ParseError(f"duplicate {kind} id: {', '.join(dup)}")
    actions = {a: tuple(acts) for a, acts in doc.get("actions", {}).items()}

    available: dict[tuple[str, str], tuple[str, ...]] = {}
    for s, per_agent in doc.get("available", {}).items():
        for a, acts in per_agent.items():
            available[(a, s)] = tuple(acts)
    for a in agents:  # default: everything in the agent's alphabet
        for s in states:
            available.setdefault((a, s), actions.get(a, ()))

    transitions: dict[tuple[str, Profile], str] = {}
    for row in doc.get("transitions", ()):
        s = _field(row, "from", "transition")
        prof = _profile_from_map(
            agents, _field(row, "profile", f"transition from {s!r}"),
            f"transition from {s!r}",
        )
        transitions[(s, prof)] = _field(row, "to", f"transition from {s!r}")
    payoffs: dict[tuple[str, Profile], tuple[Fraction, ...]] = {}
    for row in doc.get("payoffs", ()):
        s = _field(row, "state", "payoff")
        prof = _profile_from_map(
            agents, _field(row, "profile", f"payoff at {s!r}"), f"payoff at {s!r}"
        )
        values = _field(row, "values", f"payoff at {s!r}")
        extra = sorted(set(values) - set(agents))
        if extra:
            raise UnknownIdentifier(
                f"payoff at {s!r} has values for undeclared agents: {', '.join(extra)}"
            )
        payoffs[(s, prof)] = tuple(Fraction(values[a]) for a in agents if a in values)
    labels = {s: frozenset(atoms) for s, atoms in doc.get("labels", {}).items()}
    guards = {
        (
            _field(row, "agent", "guard"),
            _field(row, "state", "guard"),
            _field(row, "action", "guard"),
        ): arith.parse_acf(_field(row, "formula", "guard"))
        for row in doc.get("guards", ())
    }
    discounts = {a: Fraction(x) for a, x in doc.get("discounts", {}).items()}
    for a in agents:
        discounts.setdefault(a, Fraction(1))
    semantics = ValueSemantics(doc.get("value_semantics", "total"))
    return Gcgmp(
        agents=agents,
        states=states,
        actions=actions,
        available=available,
        transitions=transitions,
        payoffs=payoffs,
        atoms=tuple(sorted(set().union(*labels.values()) if labels else ())),
        labels=labels,
        guards=guards,
        discounts=discounts,
        value_semantics=semantics,
    )


def model_to_dict(m: Gcgmp) -> dict:
    avail: dict[str, dict[str, list[str]]] = {}
    for (a, s), acts in sorted(m.available.items(), key=lambda kv: (kv[0][1], kv[0][0])):
        avail.setdefault(s, {})[a] = list(acts)
    trans = [
        {"from": s, "profile": dict(zip(m.agents, prof)), "to": target}
        for (s, prof), target in sorted(m.transitions.items())
    ]
    pays = [
        {
            "state": s,
            "profile": dict(zip(m.agents, prof)),
            "values": {a: str(x) for a, x in zip(m.agents, vec)},
        }
        for (s, prof), vec in sorted(m.payoffs.items())
    ]
    guards = [
        {"agent": a, "state": s, "action": act, "formula": arith.format_acf(g)}
        for (a, s, act), g in sorted(m.guards.items())
    ]
    return {
        "agents": list(m.agents),
        "states": list(m.states),
        "actions": {a: list(acts) for a, acts in m.actions.items()},
        "available": avail,
        "transitions": trans,
        "payoffs": pays,
        "labels": {s: sorted(lab) for s, lab in m.labels.items()},
        "guards": guards,
        "discounts": {a: str(d) for a, d in m.discounts.items()},
        "value_semantics": m.value_semantics.value,
    }


def load_model(path: str) -> Gcgmp:
    with open(path, "r", encoding="utf-8") as fh:
        return model_from_dict(json.load(fh))


def dump_model(m: Gcgmp, path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(model_to_dict(m), fh, indent=2)
        fh.write("\n")


def builtin_fig1() -> Gcgmp:
    """The bundled three-state two-player example model."""
    text = resources.files("gcgmp.data").joinpath("fig1.json").read_text("utf-8")
    return model_from_dict(json.loads(text))
