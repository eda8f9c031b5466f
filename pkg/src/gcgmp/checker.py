"""Model-checking engines for coalition formulas over guarded game models.

Three engines with different scopes, plus a brute-force reference:

``check_atl``
    Qualitative fixpoint checking on the bare state graph (guards and
    utilities ignored).  Exact, fast, and only for formulas without
    utility comparisons.

``check_saturated``
    Exact checking for models whose payoffs are all non-negative and
    undiscounted.  Utilities then only grow, so every comparison against a
    constant stabilizes once a utility passes the largest constant B
    mentioned anywhere; capping utilities at B+1 yields a finite graph on
    which coalition fixpoints are exact.

``check_bounded``
    Three-valued search for everything else.  Proponent strategies are
    enumerated lazily through an odometer over consultation points with
    conflict-directed backjumping; opponents branch freely (perfect
    recall) or under per-path commitment (memoryless).  A play that
    revisits a configuration (possible only with 0/1 discounts) closes
    into a lasso and is judged exactly; open plays at the horizon come
    back Unknown.  True verdicts carry a replayable strategy table, False
    verdicts a set of refuted-assignment traces.

``enumerate_oracle``
    An independent, deliberately naive enumeration of proponent/opponent
    strategy choices over the bounded tree, evaluating the temporal
    clauses literally on each outcome play.  Used to cross-validate the
    engines on tiny instances.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional, Union

from .arith import (
    _REL_FN,
    SATURATED,
    AtomicConstraint,
    PathConstraint,
    eval_atom,
    normalize_atom,
)
from .dynamics import Configuration, Play, step
from .errors import (
    FragmentError,
    GcgmpError,
    NotMonotone,
    TooLarge,
    VariableVsVariableAtom,
)
from .logic import (
    Always,
    And,
    Apc,
    Constraint,
    Coop,
    Formula,
    FragmentTag,
    ML_CONFIG,
    Next,
    Not,
    Prop,
    StrategyClassSpec,
    StrategyMemory,
    StrategyObservation,
    Tru,
    Until,
    classify,
    constraint_atoms,
    is_state_formula,
)
from .model import Gcgmp

Vb = Union[bool, None]  # three-valued: None means "unknown"


def k_not(x: Vb) -> Vb:
    return None if x is None else (not x)


def k_and(x: Vb, y: Vb) -> Vb:
    if x is False or y is False:
        return False
    if x is None or y is None:
        return None
    return True


def k_or(x: Vb, y: Vb) -> Vb:
    if x is True or y is True:
        return True
    if x is None or y is None:
        return None
    return False


# --- results ---------------------------------------------------------------


@dataclass(frozen=True)
class StrategyTable:
    """One action per coalition member per consulted observation.

    Observation keys are canonical strings: the state name for state-based
    strategies, ``state|u1,u2`` for configuration-based ones, and
    `` > ``-joined sequences of those for perfect recall.
    """

    spec: StrategyClassSpec
    coalition: tuple[str, ...]
    moves: dict[str, dict[str, str]]  # agent -> observation key -> action

    def as_json(self) -> dict:
        return {
            "class": self.spec.short,
            "coalition": list(self.coalition),
            "moves": {a: dict(sorted(t.items())) for a, t in self.moves.items()},
        }


@dataclass
class Verdict:
    """Three-valued engine result with optional evidence.

    ``value`` is True, False, or None (unknown; only the bounded engine
    produces it).  True verdicts from the bounded engine carry a strategy
    table, False verdicts a list of refutation records, each a replayable
    trace together with the proponent commitments it refutes.
    """

    value: Vb
    witness: Optional[StrategyTable] = None
    counterexample: Optional[list] = None
    bound_used: Optional[int] = None

    def as_json(self) -> dict:
        name = {True: "true", False: "false", None: "unknown"}[self.value]
        out: dict = {"verdict": name}
        if self.witness is not None:
            out["witness"] = self.witness.as_json()
        if self.counterexample is not None:
            out["counterexample"] = self.counterexample
        if self.bound_used is not None:
            out["bound_used"] = self.bound_used
        return out


@dataclass(frozen=True)
class Budget:
    """Exploration limits for the bounded engine.

    ``depth`` is the maximal number of transitions along any play;
    ``max_strategies`` caps how many proponent assignments one coalition
    node may try; ``max_nodes`` caps total search-tree nodes per call.
    """

    depth: int
    max_strategies: Optional[int] = None
    max_nodes: Optional[int] = None

    DEFAULT_STRATEGIES = 4000
    DEFAULT_NODES = 2_000_000

    @property
    def strategies(self) -> int:
        return self.max_strategies if self.max_strategies is not None else self.DEFAULT_STRATEGIES

    @property
    def nodes(self) -> int:
        return self.max_nodes if self.max_nodes is not None else self.DEFAULT_NODES


# --- qualitative fixpoints on the state graph --------------------------------


def pre_states(m: Gcgmp, coalition: frozenset, targets: frozenset) -> frozenset:
    """States from which the coalition can force the next state into targets.

    Pure state-graph reasoning: availability only, guards ignored.
    """
    members = [a for a in m.agents if a in coalition]
    others = [a for a in m.agents if a not in coalition]
    out = set()
    for s in m.states:
        member_pools = [m.available_of(a, s) for a in members]
        other_pools = [m.available_of(a, s) for a in others]
        for mv in itertools.product(*member_pools):
            ok = True
            for ov in itertools.product(*other_pools):
                prof = _weave(m, members, mv, others, ov)
                if m.transitions[(s, prof)] not in targets:
                    ok = False
                    break
            if ok:
                out.add(s)
                break
    return frozenset(out)


def _weave(m, members, mv, others, ov):
    by_agent = dict(zip(members, mv))
    by_agent.update(zip(others, ov))
    return tuple(by_agent[a] for a in m.agents)


def check_atl(m: Gcgmp, f: Formula) -> frozenset:
    """Exact satisfaction set of a constraint-free formula on the state graph."""
    if classify(f) is not FragmentTag.ATL_PURE:
        raise FragmentError(
            "the qualitative engine handles coalition formulas without "
            "utility comparisons only"
        )
    all_states = frozenset(m.states)

    def sat(g) -> frozenset:
        if isinstance(g, Tru):
            return all_states
        if isinstance(g, Prop):
            return frozenset(s for s in m.states if g.name in m.label_of(s))
        if isinstance(g, Not):
            return all_states - sat(g.sub)
        if isinstance(g, And):
            return sat(g.left) & sat(g.right)
        if isinstance(g, Coop):
            body = g.body
            if isinstance(body, Next):
                return pre_states(m, g.coalition, sat(body.sub))
            if isinstance(body, Always):
                phi = sat(body.sub)
                z = all_states
                while True:
                    z2 = phi & pre_states(m, g.coalition, z)
                    if z2 == z:
                        return z
                    z = z2
            if isinstance(body, Until):
                phi1, phi2 = sat(body.left), sat(body.right)
                z = frozenset()
                while True:
                    z2 = phi2 | (phi1 & pre_states(m, g.coalition, z))
                    if z2 == z:
                        return z
                    z = z2
        raise FragmentError(f"unsupported node in qualitative checking: {g!r}")

    return sat(f)


# --- saturation engine -------------------------------------------------------

# A saturated node is (state, utilities) where each utility is either an
# exact Fraction in [0, cap] or the SATURATED marker (meaning: exceeded cap,
# hence beyond every constant the formula or the guards mention).

SatNode = tuple


def _sat_atom(a: AtomicConstraint, valuation: dict) -> bool:
    kind = normalize_atom(a)
    if kind[0] == "const":
        return kind[1]
    if kind[0] == "mixed":
        raise VariableVsVariableAtom(
            "saturation cannot decide comparisons between two utility terms"
        )
    _, counts, rel, d = kind
    total = Fraction(0)
    for var, n in counts.items():
        v = valuation[var]
        if v is SATURATED:
            # the saturated utility alone already exceeds every constant,
            # and all other summands are non-negative here
            return rel in (">", ">=")
        total += n * v
    return _REL_FN[rel](total, d)


def _sat_acf(g, valuation: dict) -> bool:
    from . import arith

    if isinstance(g, arith.Atom):
        return _sat_atom(g.atom, valuation)
    if isinstance(g, arith.Not):
        return not _sat_acf(g.sub, valuation)
    if isinstance(g, arith.And):
        return _sat_acf(g.left, valuation) and _sat_acf(g.right, valuation)
    if isinstance(g, arith.Or):
        return _sat_acf(g.left, valuation) or _sat_acf(g.right, valuation)
    raise TypeError(f"not a constraint formula: {g!r}")


def saturation_cap(m: Gcgmp, f: Formula) -> Fraction:
    """One above the largest constant in the formula's and guards' atoms."""
    bound = Fraction(0)
    for a in constraint_atoms(f, m):
        kind = normalize_atom(a)
        if kind[0] == "mixed":
            raise VariableVsVariableAtom(
                "saturation cannot decide comparisons between two utility terms"
            )
        if kind[0] == "sum":
            bound = max(bound, kind[3])
    return bound + 1


def check_saturated(m: Gcgmp, c0: Configuration, f: Formula) -> Verdict:
    """Exact verdict for non-negative undiscounted models.

    Utilities are evolved exactly until they pass the cap, then pinned to
    the saturated marker; constraint atoms and guards are evaluated on the
    capped vectors, and coalition fixpoints run over the finite graph of
    reachable capped configurations.
    """
    tag = classify(f)
    if tag is FragmentTag.NGL_STAR:
        raise FragmentError(
            "the saturation engine needs plain X/G/U coalition bodies over "
            "state formulas, without play-value atoms"
        )
    for (s, prof), pays in m.payoffs.items():
        for a, p in zip(m.agents, pays):
            if p < 0:
                raise NotMonotone(
                    f"payoff {p} for agent {a!r} at state {s!r} under "
                    f"{prof!r} is negative"
                )
    for a, d in m.discounts.items():
        if d != 1:
            raise NotMonotone(f"agent {a!r} has discount {d}; saturation needs 1")
    for a, u in zip(m.agents, c0.utilities):
        if u < 0:
            raise NotMonotone(f"start utility {u} for agent {a!r} is negative")

    cap = saturation_cap(m, f)

    def clamp(u):
        return SATURATED if u > cap else u

    def bump(u, pay):
        if u is SATURATED:
            return SATURATED
        return clamp(u + pay)

    root: SatNode = (c0.state, tuple(clamp(u) for u in c0.utilities))

    def valuation(node: SatNode) -> dict:
        return dict(zip(m.agents, node[1]))

    def enabled(node: SatNode, agent: str) -> list:
        val = valuation(node)
        out = []
        for act in m.available_of(agent, node[0]):
            if _sat_acf(m.guard_of(agent, node[0], act), {agent: val[agent]}):
                out.append(act)
        return out

    # breadth-first closure of the capped configuration graph
    nodes: list[SatNode] = [root]
    seen = {root}
    succ: dict[tuple, SatNode] = {}
    queue = [root]
    while queue:
        node = queue.pop(0)
        pools = [enabled(node, a) for a in m.agents]
        for prof in itertools.product(*pools):
            target = m.transitions[(node[0], prof)]
            pays = m.payoffs[(node[0], prof)]
            nxt = (target, tuple(bump(u, p) for u, p in zip(node[1], pays)))
            succ[(node, prof)] = nxt
            if nxt not in seen:
                seen.add(nxt)
                nodes.append(nxt)
                queue.append(nxt)

    all_nodes = frozenset(nodes)

    def pre(coalition, targets: frozenset) -> frozenset:
        members = [a for a in m.agents if a in coalition]
        others = [a for a in m.agents if a not in coalition]
        out = set()
        for node in nodes:
            member_pools = [enabled(node, a) for a in members]
            other_pools = [enabled(node, a) for a in others]
            for mv in itertools.product(*member_pools):
                ok = True
                for ov in itertools.product(*other_pools):
                    prof = _weave(m, members, mv, others, ov)
                    if succ[(node, prof)] not in targets:
                        ok = False
                        break
                if ok:
                    out.add(node)
                    break
        return frozenset(out)

    def sat(g) -> frozenset:
        if isinstance(g, Tru):
            return all_nodes
        if isinstance(g, Prop):
            return frozenset(n for n in nodes if g.name in m.label_of(n[0]))
        if isinstance(g, Constraint):
            return frozenset(n for n in nodes if _sat_atom(g.atom, valuation(n)))
        if isinstance(g, Not):
            return all_nodes - sat(g.sub)
        if isinstance(g, And):
            return sat(g.left) & sat(g.right)
        if isinstance(g, Coop):
            body = g.body
            if isinstance(body, Next):
                return pre(g.coalition, sat(body.sub))
            if isinstance(body, Always):
                phi = sat(body.sub)
                z = all_nodes
                while True:
                    z2 = phi & pre(g.coalition, z)
                    if z2 == z:
                        return z
                    z = z2
            if isinstance(body, Until):
                phi1, phi2 = sat(body.left), sat(body.right)
                z = frozenset()
                while True:
                    z2 = phi2 | (phi1 & pre(g.coalition, z))
                    if z2 == z:
                        return z
                    z = z2
        raise FragmentError(f"unsupported node in saturation checking: {g!r}")

    return Verdict(root in sat(f))


# --- bounded engine ----------------------------------------------------------


class _BudgetStop(Exception):
    """Internal: the node budget ran out; surfaces as an Unknown verdict."""


@dataclass
class _Point:
    """One proponent consultation point in the odometer."""

    key: object
    alts: list  # coalition joint moves enabled where the point was created
    idx: int = 0
    blame: set = field(default_factory=set)

    @property
    def move(self):
        return self.alts[self.idx]


@dataclass
class _Ctx:
    m: Gcgmp
    sp: StrategyClassSpec
    so: StrategyClassSpec
    budget: Budget
    closure_ok: bool  # every discount 0 or 1
    frac_d: bool  # some discount strictly between 0 and 1
    memo: dict = field(default_factory=dict)
    nodes_used: int = 0
    enabled_cache: dict = field(default_factory=dict)
    succ_cache: dict = field(default_factory=dict)

    def tick(self):
        self.nodes_used += 1
        if self.nodes_used > self.budget.nodes:
            raise _BudgetStop()

    def enabled(self, agent: str, c: Configuration) -> tuple:
        """Guard-enabled actions, cached on (agent, state, own utility)."""
        u = c.utilities[self.m.agent_index(agent)]
        key = (agent, c.state, u)
        hit = self.enabled_cache.get(key)
        if hit is None:
            hit = self.m.enabled_actions(agent, c.state, u)
            self.enabled_cache[key] = hit
        return hit

    def succ(self, c: Configuration, prof: tuple, l: int) -> Configuration:
        """Successor configuration, assuming the profile is enabled.

        Skips the guard re-check of the public step operation and interns
        the result so repeated configurations share one object (and one
        cached hash).
        """
        lkey = l if self.frac_d else 0
        key = (c, prof, lkey)
        hit = self.succ_cache.get(key)
        if hit is None:
            m = self.m
            target = m.transitions[(c.state, prof)]
            pays = m.payoffs[(c.state, prof)]
            us = []
            for a, u, p in zip(m.agents, c.utilities, pays):
                d = m.discounts[a]
                if d == 1:
                    us.append(u + p)
                elif d == 0:
                    us.append(u)
                else:
                    us.append(u + d**l * p)
            hit = Configuration(target, tuple(us))
            self.succ_cache[key] = hit
        return hit


def _body_machine(body) -> tuple:
    """Initial evaluation state for a supported coalition body."""
    if isinstance(body, Next) and is_state_formula(body.sub):
        return ("X", body.sub)
    if isinstance(body, Always) and is_state_formula(body.sub):
        return ("G", body.sub, True)
    if (
        isinstance(body, Until)
        and is_state_formula(body.left)
        and is_state_formula(body.right)
    ):
        return ("U", body.left, body.right, False, True)
    if isinstance(body, Apc):
        return ("APC", body.pc)
    raise FragmentError(
        "the bounded engine handles coalition bodies of the form X/G/U over "
        "state formulas, or a single play-value comparison"
    )


def _check_supported(f: Formula):
    if not is_state_formula(f):
        raise FragmentError("only state formulas can be checked")
    if isinstance(f, (Prop, Tru, Constraint)):
        return
    if isinstance(f, Not):
        _check_supported(f.sub)
        return
    if isinstance(f, And):
        _check_supported(f.left)
        _check_supported(f.right)
        return
    if isinstance(f, Coop):
        machine = _body_machine(f.body)
        for part in machine[1:]:
            if isinstance(part, (Prop, Tru, Constraint, Not, And, Coop)):
                _check_supported(part)
        return
    raise FragmentError(f"unsupported formula node: {f!r}")


def _obs(observation: StrategyObservation, c: Configuration):
    if observation is StrategyObservation.STATE_BASED:
        return c.state
    return c


def _obs_str(key) -> str:
    if isinstance(key, str):
        return key
    if isinstance(key, Configuration):
        return f"{key.state}|{','.join(str(u) for u in key.utilities)}"
    return " > ".join(_obs_str(k) for k in key)


def _strategy_key(spec: StrategyClassSpec, path_configs: list) -> object:
    if spec.memory is StrategyMemory.MEMORYLESS:
        return _obs(spec.observation, path_configs[-1])
    return tuple(_obs(spec.observation, c) for c in path_configs)


def observation_key(spec: StrategyClassSpec, configs) -> str:
    """The table key a strategy of this class consults after this history.

    Matches the keys used in StrategyTable moves: bare state, "state|u1,u2",
    or those joined by " > " under perfect recall.
    """
    return _obs_str(_strategy_key(spec, list(configs)))


def _trace(m: Gcgmp, configs, profiles, loop=None) -> dict:
    steps = []
    for i, c in enumerate(configs):
        entry = {
            "state": c.state,
            "utilities": [str(u) for u in c.utilities],
        }
        if i < len(profiles):
            entry["profile"] = list(profiles[i])
        steps.append(entry)
    out = {"trace": steps}
    if loop is not None:
        out["loop"] = loop
    return out


class _CoopSolver:
    """Decides one coalition node: exists-proponent / for-all-opponent search.

    The proponent side is a persistent odometer over consultation points;
    each sweep fixes its committed choices and walks every opponent branch.
    A refuted sweep reports which points it actually consulted, and the
    odometer backjumps to the deepest of them, discarding younger points.
    """

    def __init__(self, ctx: _Ctx, coop: Coop, c0: Configuration, l0: int, depth: int):
        self.ctx = ctx
        self.coop = coop
        self.c0 = c0
        self.l0 = l0
        self.depth = depth
        m = ctx.m
        self.members = [a for a in m.agents if a in coop.coalition]
        self.others = [a for a in m.agents if a not in coop.coalition]
        self.machine0 = _body_machine(coop.body)
        self.points: list[_Point] = []
        self.index: dict = {}
        self.records: list = []
        self.sweep_consulted: set = set()
        self.capped = False  # gave up because of the sweep budget
        self.saw_refutation = False

    # -- odometer ------------------------------------------------------------

    def _consult(self, c: Configuration, path_configs: list):
        """Current committed coalition move at this node, creating the
        point if it is new.  Returns (move, point_id, invalid)."""
        if not self.members:
            return (), None, False
        key = _strategy_key(self.ctx.sp, path_configs)
        pid = self.index.get(key)
        if pid is None or pid >= len(self.points) or self.points[pid].key != key:
            pools = [self.ctx.enabled(a, c) for a in self.members]
            alts = list(itertools.product(*pools))
            pid = len(self.points)
            self.points.append(_Point(key, alts))
            self.index[key] = pid
        point = self.points[pid]
        self.sweep_consulted.add(pid)
        if not point.alts:
            return None, pid, True
        move = point.move
        # the committed action must be enabled here, not only where the
        # point was created
        for a, act in zip(self.members, move):
            if act not in self.ctx.enabled(a, c):
                return None, pid, True
        return move, pid, False

    def _bump(self, conflict: set) -> bool:
        """Advance the odometer past a refuted assignment; False when the
        whole proponent space is exhausted."""
        work = set(conflict)
        while work:
            j = max(work)
            point = self.points[j]
            point.blame |= work - {j}
            point.idx += 1
            for p in self.points[j + 1 :]:
                self.index.pop(p.key, None)
            del self.points[j + 1 :]
            if point.idx < len(point.alts):
                return True
            work = set(point.blame)
            self.index.pop(point.key, None)
            del self.points[j]
        return False

    # -- one sweep -------------------------------------------------------

    def solve(self):
        sweeps = 0
        any_unknown = False
        while True:
            sweeps += 1
            if sweeps > self.ctx.budget.strategies:
                self.capped = True
                return None, None, None
            self.sweep_consulted = set()
            value, conflict, record = self._walk(
                self.c0,
                self.l0,
                [self.c0],
                [],
                self.machine0,
                {},
                frozenset(),
                {self.c0: 0},
            )
            if value is True:
                return True, self._witness(), None
            if value is False:
                self.saw_refutation = True
                if record is not None and len(self.records) < 50:
                    record["refutes"] = {
                        _obs_str(self.points[i].key): list(self.points[i].move)
                        for i in sorted(conflict)
                    }
                    self.records.append(record)
                if not conflict:
                    return False, None, self.records
                if not self._bump(conflict):
                    if any_unknown:
                        return None, None, None
                    return False, None, self.records
                continue
            # unknown sweep: this horizon cannot refute the proponent any
            # more, so treat every live point as suspect and move on
            any_unknown = True
            if not self.points:
                return None, None, None
            if not self._bump(set(range(len(self.points)))):
                return None, None, None

    def _witness(self) -> StrategyTable:
        moves: dict[str, dict[str, str]] = {a: {} for a in self.members}
        for pid in sorted(self.sweep_consulted):
            point = self.points[pid]
            key = _obs_str(point.key)
            for a, act in zip(self.members, point.move):
                moves[a][key] = act
        return StrategyTable(self.ctx.sp, tuple(self.members), moves)

    # -- the for-all walk --------------------------------------------------

    def _walk(
        self,
        c,
        l,
        path_configs,
        path_profiles,
        machine,
        tau_store,
        consulted,
        path_index,
    ):
        ctx = self.ctx
        ctx.tick()
        pos = len(path_profiles)

        # fold the current position into the body state
        kind = machine[0]
        if kind == "X":
            if pos == 1:
                v = _eval_state(ctx, machine[1], c, l, self.depth)
                if v is False:
                    return False, consulted, _trace(ctx.m, path_configs, path_profiles)
                return v, None, None
        elif kind == "G":
            v = _eval_state(ctx, machine[1], c, l, self.depth)
            if v is False:
                return False, consulted, _trace(ctx.m, path_configs, path_profiles)
            machine = ("G", machine[1], k_and(machine[2], v))
        elif kind == "U":
            _, phi1, phi2, best, pcond = machine
            e2 = _eval_state(ctx, phi2, c, l, self.depth)
            best = k_or(best, k_and(pcond, e2))
            if best is True:
                return True, None, None
            e1 = _eval_state(ctx, phi1, c, l, self.depth)
            pcond = k_and(pcond, e1)
            if pcond is False:
                if best is False:
                    return False, consulted, _trace(ctx.m, path_configs, path_profiles)
                return None, None, None
            machine = ("U", phi1, phi2, best, pcond)

        # lasso closure: an exact repeat pins the infinite play
        if pos >= 1 and ctx.closure_ok:
            j = path_index.get(c)
            if j is not None and j < pos:
                v = self._closure_verdict(machine, path_configs, path_profiles, j)
                if (
                    v is False
                    and self.members
                    and ctx.sp.memory is StrategyMemory.PERFECT_RECALL
                ):
                    # a recall-ful proponent may deviate in later laps;
                    # pumping refutes only its memoryless collapse (with no
                    # coalition choices at all, the pump is forced and final)
                    v = None
                if v is False:
                    return (
                        False,
                        consulted,
                        _trace(ctx.m, path_configs, path_profiles, loop=j),
                    )
                return v, None, None

        if pos >= self.depth:
            return None, None, None

        move, pid, invalid = self._consult(c, path_configs)
        if pid is not None:
            consulted = consulted | {pid}
        if invalid:
            return False, consulted, _trace(ctx.m, path_configs, path_profiles)

        tau_key = _strategy_key(ctx.so, path_configs) if self.others else None
        committed = tau_store.get(tau_key) if self.others else None
        if committed is not None:
            responses = [committed]
        else:
            pools = [ctx.enabled(a, c) for a in self.others]
            responses = list(itertools.product(*pools))
            if self.others and not responses:
                return True, None, None  # opponents are stuck: nothing to refute

        any_unknown = False
        for resp in responses:
            if committed is not None:
                ok = True
                for a, act in zip(self.others, resp):
                    if act not in ctx.enabled(a, c):
                        ok = False
                        break
                if not ok:
                    continue  # the committed opponent action is no longer legal
            prof = _weave(ctx.m, self.members, move, self.others, resp)
            c2 = ctx.succ(c, prof, l)
            pushed = False
            if (
                self.others
                and committed is None
                and ctx.so.memory is StrategyMemory.MEMORYLESS
            ):
                tau_store[tau_key] = resp
                pushed = True
            fresh = c2 not in path_index
            if fresh:
                path_index[c2] = pos + 1
            value, conflict, record = self._walk(
                c2,
                l + 1,
                path_configs + [c2],
                path_profiles + [prof],
                machine,
                tau_store,
                consulted,
                path_index,
            )
            if fresh:
                del path_index[c2]
            if pushed:
                del tau_store[tau_key]
            if value is False:
                return False, conflict, record
            if value is None:
                any_unknown = True
        return (None if any_unknown else True), None, None

    def _closure_verdict(self, machine, path_configs, path_profiles, j):
        kind = machine[0]
        if kind == "G":
            return True if machine[2] is True else None
        if kind == "U":
            return machine[3] if machine[3] is not True else None
        if kind == "APC":
            pc = machine[1]
            play = Play(
                tuple(path_configs), tuple(path_profiles), j, start_index=self.l0
            )
            try:
                from .dynamics import play_value

                value = play_value(self.ctx.m, play, pc.agent)
            except GcgmpError:
                return None
            return _REL_FN[pc.rel](value, pc.bound)
        return None  # X resolves positionally, never via closure


def _eval_state(ctx: _Ctx, g, c: Configuration, l: int, depth: int) -> Vb:
    lkey = l if ctx.frac_d else None
    key = (g, c, lkey)
    hit = ctx.memo.get(key)
    if hit is not None:
        return hit
    value = _eval_state_raw(ctx, g, c, l, depth)
    if value is not None:
        ctx.memo[key] = value
    return value


def _eval_state_raw(ctx: _Ctx, g, c: Configuration, l: int, depth: int) -> Vb:
    if isinstance(g, Tru):
        return True
    if isinstance(g, Prop):
        return g.name in ctx.m.label_of(c.state)
    if isinstance(g, Constraint):
        return eval_atom(g.atom, dict(zip(ctx.m.agents, c.utilities)))
    if isinstance(g, Not):
        return k_not(_eval_state(ctx, g.sub, c, l, depth))
    if isinstance(g, And):
        return k_and(
            _eval_state(ctx, g.left, c, l, depth),
            _eval_state(ctx, g.right, c, l, depth),
        )
    if isinstance(g, Coop):
        value, _, _ = _CoopSolver(ctx, g, c, l, depth).solve()
        return value
    raise FragmentError(f"unsupported formula node: {g!r}")


def _ladder(depth: int) -> list[int]:
    if depth <= 2:
        return [max(depth, 0)]
    out = []
    d = 2
    while d < depth:
        out.append(d)
        d *= 2
    out.append(depth)
    return out


def check_bounded(
    m: Gcgmp,
    c0: Configuration,
    f: Formula,
    sp: StrategyClassSpec = ML_CONFIG,
    so: StrategyClassSpec = ML_CONFIG,
    budget: Union[Budget, int] = 25,
) -> Verdict:
    """Three-valued verdict for ``f`` at ``c0`` under bounded exploration.

    Horizons grow geometrically up to the budget depth; a verdict found at
    a shallow horizon is definitive, Unknown triggers deepening.  True
    carries the proponent table of the accepting sweep, False the refuted
    assignments with their traces.
    """
    if isinstance(budget, int):
        budget = Budget(budget)
    _check_supported(f)
    closure_ok = all(d == 0 or d == 1 for d in m.discounts.values())
    frac_d = any(0 < d < 1 for d in m.discounts.values())
    ctx = _Ctx(m, sp, so, budget, closure_ok, frac_d)
    rungs = _ladder(budget.depth)
    i = 0
    while i < len(rungs):
        depth = rungs[i]
        try:
            if isinstance(f, Coop):
                solver = _CoopSolver(ctx, f, c0, 1, depth)
                value, witness, records = solver.solve()
                if value is not None:
                    return Verdict(
                        value,
                        witness=witness,
                        counterexample=records if value is False else None,
                        bound_used=depth,
                    )
                if solver.capped and not solver.saw_refutation:
                    # the proponent space blew up without a single refuted
                    # sweep: intermediate horizons will only blow up again,
                    # so go straight to the deepest one and hunt for True
                    i = len(rungs) - 1 if i < len(rungs) - 1 else len(rungs)
                    continue
            else:
                value = _eval_state(ctx, f, c0, 1, depth)
                if value is not None:
                    return Verdict(value, bound_used=depth)
        except _BudgetStop:
            return Verdict(None, bound_used=depth)
        i += 1
    return Verdict(None, bound_used=budget.depth)


def check_apc_play(m: Gcgmp, p: Play, apc: PathConstraint) -> bool:
    """Whether the lasso's long-run value satisfies the comparison."""
    from .dynamics import play_value

    return _REL_FN[apc.rel](play_value(m, p, apc.agent), apc.bound)


def replay_strategy_table(
    m: Gcgmp,
    c0: Configuration,
    f: Coop,
    table: StrategyTable,
    so: StrategyClassSpec,
    depth: int,
) -> bool:
    """Re-run a witness: every prescribed action must be enabled wherever
    consulted, and every opponent branch must satisfy the body.  Used to
    audit True verdicts independently of the search that produced them."""
    machine0 = _body_machine(f.body)
    members = [a for a in m.agents if a in f.coalition]
    others = [a for a in m.agents if a not in f.coalition]
    closure_ok = all(d == 0 or d == 1 for d in m.discounts.values())
    frac_d = any(0 < d < 1 for d in m.discounts.values())
    ctx = _Ctx(m, table.spec, so, Budget(depth), closure_ok, frac_d)

    def eval_sub(g, c, l):
        return _eval_state(ctx, g, c, l, depth)

    def walk(c, l, path_configs, path_profiles, machine, tau_store) -> Vb:
        pos = len(path_profiles)
        kind = machine[0]
        if kind == "X":
            if pos == 1:
                return eval_sub(machine[1], c, l)
        elif kind == "G":
            v = eval_sub(machine[1], c, l)
            if v is False:
                return False
            machine = ("G", machine[1], k_and(machine[2], v))
        elif kind == "U":
            _, phi1, phi2, best, pcond = machine
            best = k_or(best, k_and(pcond, eval_sub(phi2, c, l)))
            if best is True:
                return True
            pcond = k_and(pcond, eval_sub(phi1, c, l))
            if pcond is False:
                return best if best is False else None
            machine = ("U", phi1, phi2, best, pcond)
        if pos >= 1 and closure_ok:
            for j, prev in enumerate(path_configs[:-1]):
                if prev == c:
                    if kind == "G":
                        return True if machine[2] is True else None
                    if kind == "U":
                        return machine[3] if machine[3] is not True else None
                    if kind == "APC":
                        play = Play(
                            tuple(path_configs), tuple(path_profiles), j, start_index=1
                        )
                        try:
                            return check_apc_play(m, play, machine[1])
                        except GcgmpError:
                            return None
                    return None
        if pos >= depth:
            return None
        if members:
            key = _obs_str(_strategy_key(table.spec, path_configs))
            move = []
            for a in members:
                act = table.moves.get(a, {}).get(key)
                i = m.agent_index(a)
                if act is None or act not in m.enabled_actions(
                    a, c.state, c.utilities[i]
                ):
                    return False
                move.append(act)
            move = tuple(move)
        else:
            move = ()
        tau_key = _strategy_key(so, path_configs) if others else None
        committed = tau_store.get(tau_key) if others else None
        if committed is not None:
            responses = [committed]
        else:
            pools = [
                m.enabled_actions(a, c.state, c.utilities[m.agent_index(a)])
                for a in others
            ]
            responses = list(itertools.product(*pools))
            if others and not responses:
                return True
        result: Vb = True
        for resp in responses:
            if committed is not None:
                if any(
                    act
                    not in m.enabled_actions(a, c.state, c.utilities[m.agent_index(a)])
                    for a, act in zip(others, resp)
                ):
                    continue
            prof = _weave(m, members, move, others, resp)
            c2 = step(m, c, prof, l)
            pushed = False
            if others and committed is None and so.memory is StrategyMemory.MEMORYLESS:
                tau_store[tau_key] = resp
                pushed = True
            v = walk(c2, l + 1, path_configs + [c2], path_profiles + [prof], machine, tau_store)
            if pushed:
                del tau_store[tau_key]
            result = k_and(result, v)
            if result is False:
                return False
        return result

    return walk(c0, 1, [c0], [], machine0, {}) is True


# --- brute-force reference ---------------------------------------------------


def enumerate_oracle(
    m: Gcgmp,
    c0: Configuration,
    f: Formula,
    sp: StrategyClassSpec = ML_CONFIG,
    so: StrategyClassSpec = ML_CONFIG,
    depth: int = 6,
) -> Verdict:
    """Literal strategy enumeration on tiny instances.

    Chronologically enumerates every distinct proponent commitment over the
    observations actually consulted within the horizon (equivalent to
    enumerating all full tables, since unconsulted entries cannot matter),
    plays out every opponent behaviour of the stated class, and evaluates
    the body positionally on each outcome play.  No pruning, no deepening,
    no backjumping — just the definitions.
    """
    if len(m.states) > 4:
        raise TooLarge(f"{len(m.states)} states is beyond the oracle's scale")
    for a in m.agents:
        if len(m.actions[a]) > 2:
            raise TooLarge(f"agent {a!r} has more than two actions")
    if depth > 8:
        raise TooLarge(f"depth {depth} is beyond the oracle's scale")
    _check_supported(f)
    closure_ok = all(d == 0 or d == 1 for d in m.discounts.values())
    frac_d = any(0 < d < 1 for d in m.discounts.values())
    memo: dict = {}
    counter = {"plays": 0}

    def spend():
        counter["plays"] += 1
        if counter["plays"] > 60_000:
            raise TooLarge("oracle enumeration exceeded its play budget")

    def eval_sf(g, c, l) -> Vb:
        lkey = l if frac_d else None
        key = (g, c, lkey)
        if key in memo:
            return memo[key]
        if isinstance(g, Tru):
            v: Vb = True
        elif isinstance(g, Prop):
            v = g.name in m.label_of(c.state)
        elif isinstance(g, Constraint):
            v = eval_atom(g.atom, dict(zip(m.agents, c.utilities)))
        elif isinstance(g, Not):
            v = k_not(eval_sf(g.sub, c, l))
        elif isinstance(g, And):
            v = k_and(eval_sf(g.left, c, l), eval_sf(g.right, c, l))
        elif isinstance(g, Coop):
            v = solve(g, c, l)
        else:
            raise FragmentError(f"unsupported formula node: {g!r}")
        if v is not None:
            memo[key] = v
        return v

    def eval_play(body, configs, profiles, loop, l0, sp_pr) -> Vb:
        """Clause-by-clause evaluation of a body on one outcome play.

        ``loop`` is None for an open (horizon-cut) prefix.  Positions are
        evaluated literally; an open prefix leaves undetermined futures
        Unknown.  A False that exists only because the closing cycle is
        pumped forever does not refute a perfect-recall proponent, who may
        deviate in later laps, so it degrades to Unknown.
        """
        n = len(profiles)
        # a closed play repeats configs[loop] at position n; an open prefix
        # still has a real final position to evaluate
        last = n + 1 if loop is None else n

        def at(i):
            return configs[i], l0 + i

        if body[0] == "X":
            if n >= 1:
                return eval_sf(body[1], *at(1))
            return None
        if body[0] == "G":
            acc: Vb = True
            for i in range(last):
                c, l = at(i)
                acc = k_and(acc, eval_sf(body[1], c, l))
                if acc is False:
                    return False
            if loop is None:
                return None  # held so far, but the play is cut short
            return acc
        if body[0] == "U":
            phi1, phi2 = body[1], body[2]
            best: Vb = False
            pcond: Vb = True
            for i in range(last):
                c, l = at(i)
                best = k_or(best, k_and(pcond, eval_sf(phi2, c, l)))
                if best is True:
                    return True
                pcond = k_and(pcond, eval_sf(phi1, c, l))
                if pcond is False:
                    return best if best is False else None
            if loop is None:
                return None
            # closed play: every later position repeats a cycle position
            if best is False:
                return None if sp_pr else False
            return None
        if body[0] == "APC":
            if loop is None:
                return None
            play = Play(tuple(configs), tuple(profiles), loop, start_index=l0)
            try:
                ok = check_apc_play(m, play, body[1])
            except GcgmpError:
                return None
            if ok is False and sp_pr:
                return None
            return ok
        raise FragmentError(f"unsupported body: {body!r}")

    def solve(coop: Coop, croot: Configuration, l0: int) -> Vb:
        body = _body_machine(coop.body)
        if body[0] == "G":
            body = ("G", body[1])
        elif body[0] == "U":
            body = ("U", body[1], body[2])
        members = [a for a in m.agents if a in coop.coalition]
        others = [a for a in m.agents if a not in coop.coalition]
        sp_pr = bool(members) and sp.memory is StrategyMemory.PERFECT_RECALL

        def enabled(c, a):
            return m.enabled_actions(a, c.state, c.utilities[m.agent_index(a)])

        def all_plays(sigma: dict, tau: dict):
            """Every outcome play under proponent table ``sigma``, across
            all opponent behaviours extending ``tau``: yields
            (configs, profiles, loop, sigma_fail) tuples."""
            out = []

            def go(configs, profiles, tau_local):
                spend()
                c = configs[-1]
                pos = len(profiles)
                if closure_ok and pos >= 1:
                    for j in range(pos):
                        if configs[j] == c:
                            out.append((configs, profiles, j, False))
                            return
                if pos >= depth:
                    out.append((configs, profiles, None, False))
                    return
                skey = _strategy_key(sp, configs) if members else None
                move = sigma.get(skey) if members else ()
                if members:
                    if move is None:
                        raise KeyError(skey)  # grow the table first
                    if any(
                        act not in enabled(c, a) for a, act in zip(members, move)
                    ):
                        out.append((configs, profiles, None, True))
                        return
                tkey = _strategy_key(so, configs) if others else None
                committed = tau_local.get(tkey) if others else None
                if committed is not None:
                    if any(
                        act not in enabled(c, a) for a, act in zip(others, committed)
                    ):
                        return  # opponent hit a dead commitment: vacuous
                    responses = [committed]
                else:
                    responses = list(
                        itertools.product(*[enabled(c, a) for a in others])
                    )
                    if others and not responses:
                        return
                for resp in responses:
                    prof = _weave(m, members, move, others, resp)
                    c2 = step(m, c, prof, l0 + pos)
                    pushed = False
                    if (
                        others
                        and committed is None
                        and so.memory is StrategyMemory.MEMORYLESS
                    ):
                        tau_local[tkey] = resp
                        pushed = True
                    go(configs + [c2], profiles + [prof], tau_local)
                    if pushed:
                        del tau_local[tkey]

            go([croot], [], dict(tau))
            return out

        # chronological enumeration of proponent tables over consulted keys
        sigma: dict = {}
        order: list = []  # keys in creation order
        alts: dict = {}

        def next_assignment() -> bool:
            while order:
                key = order[-1]
                i = alts[key].index(sigma[key]) + 1
                if i < len(alts[key]):
                    sigma[key] = alts[key][i]
                    return True
                del sigma[key]
                del alts[key]
                order.pop()
            return False

        any_unknown_sigma = False
        while True:
            # evaluate the current (partial) table, growing it on demand
            try:
                verdict: Vb = True
                for configs, profiles, loop, sigma_fail in all_plays(sigma, {}):
                    if sigma_fail:
                        verdict = False
                        break
                    verdict = k_and(
                        verdict, eval_play(body, configs, profiles, loop, l0, sp_pr)
                    )
                    if verdict is False:
                        break
            except KeyError as e:  # a new consultation point appeared
                key = e.args[0]
                state = key if isinstance(key, str) else None
                if state is None:
                    cfg = key if isinstance(key, Configuration) else key[-1]
                    state = cfg.state if isinstance(cfg, Configuration) else cfg
                    if isinstance(cfg, Configuration):
                        pools = [
                            enabled(cfg, a) for a in members
                        ]
                    else:
                        pools = [m.available_of(a, state) for a in members]
                else:
                    pools = [m.available_of(a, state) for a in members]
                options = list(itertools.product(*pools))
                if not options:
                    options = [tuple("?" for _ in members)]  # always invalid
                sigma[key] = options[0]
                alts[key] = options
                order.append(key)
                continue
            if verdict is True:
                return True
            if verdict is None:
                any_unknown_sigma = True
            if not next_assignment():
                return None if any_unknown_sigma else False

    value = eval_sf(f, c0, 1)
    return Verdict(value)
