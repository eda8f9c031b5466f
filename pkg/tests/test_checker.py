"""Engine tests: qualitative fixpoints, saturation, bounded search, oracle."""

import itertools
import random
from fractions import Fraction as F

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gcgmp.arith import parse_apc
from gcgmp.checker import (
    Budget,
    Verdict,
    check_apc_play,
    check_atl,
    check_bounded,
    check_saturated,
    enumerate_oracle,
    k_and,
    k_not,
    k_or,
    pre_states,
    replay_strategy_table,
    saturation_cap,
)
from gcgmp.dynamics import Configuration, Play, run_profiles, step
from gcgmp.errors import (
    Divergent,
    FragmentError,
    GcgmpError,
    GuardViolation,
    NotMonotone,
    TooLarge,
    VariableVsVariableAtom,
)
from gcgmp.logic import (
    ML_CONFIG,
    ML_STATE,
    PR_CONFIG,
    PR_STATE,
    bind_formula,
    parse_formula,
)
from gcgmp.model import builtin_fig1, model_from_dict, validate


def mk(d):
    m = model_from_dict(d)
    assert validate(m) == [], "test model must be well-formed"
    return m


def fml(m, text):
    return bind_formula(m, parse_formula(text))


@pytest.fixture(scope="module")
def fig1():
    return builtin_fig1()


def one_agent_loop(actions_pay, labels=None, semantics=None):
    """Single agent, single state; each action loops with the given payoff."""
    d = {
        "agents": ["a"],
        "states": ["s"],
        "actions": {"a": [act for act, _ in actions_pay]},
        "transitions": [
            {"from": "s", "profile": {"a": act}, "to": "s"} for act, _ in actions_pay
        ],
        "payoffs": [
            {"state": "s", "profile": {"a": act}, "values": {"a": str(p)}}
            for act, p in actions_pay
        ],
        "labels": labels or {},
        "value_semantics": semantics or "mean",
    }
    return mk(d)


CHAIN = {
    "agents": ["a"],
    "states": ["s", "t"],
    "actions": {"a": ["go"]},
    "transitions": [
        {"from": "s", "profile": {"a": "go"}, "to": "t"},
        {"from": "t", "profile": {"a": "go"}, "to": "t"},
    ],
    "payoffs": [
        {"state": "s", "profile": {"a": "go"}, "values": {"a": "0"}},
        {"state": "t", "profile": {"a": "go"}, "values": {"a": "0"}},
    ],
    "labels": {"t": ["q"]},
}


# --- three-valued helpers ---------------------------------------------------


class TestKleene:
    @given(st.sampled_from([True, False, None]), st.sampled_from([True, False, None]))
    def test_de_morgan(self, x, y):
        assert k_not(k_and(x, y)) == k_or(k_not(x), k_not(y))

    @given(st.sampled_from([True, False, None]))
    def test_negation_involutive(self, x):
        assert k_not(k_not(x)) == x

    def test_unknown_absorbs(self):
        assert k_and(None, True) is None
        assert k_and(None, False) is False
        assert k_or(None, False) is None
        assert k_or(None, True) is True


# --- qualitative engine -----------------------------------------------------


class TestQualitative:
    def test_nobody_keeps_p1(self, fig1):
        # from s1 every profile pair can be answered into s2 or s3
        assert check_atl(fig1, fml(fig1, "<<>> G p1")) == frozenset()

    def test_grand_coalition_next_true(self, fig1):
        f = fml(fig1, "<<I,II>> X true")
        assert check_atl(fig1, f) == frozenset(fig1.states)

    def test_inevitable_reach(self):
        m = mk(CHAIN)
        assert check_atl(m, fml(m, "<<>> F q")) == frozenset({"s", "t"})

    def test_until_and_negation(self, fig1):
        # I alone can steer s1 -> {s2, s3}? C gives {s1, s2}, D gives {s3, s2}:
        # no single choice pins p2, but <<I,II>> X p2 holds at every state
        assert "s1" in check_atl(fig1, fml(fig1, "<<I,II>> X p2"))
        got = check_atl(fig1, fml(fig1, "!(<<I,II>> X p2)"))
        assert got == frozenset()

    def test_rejects_constraints(self, fig1):
        with pytest.raises(FragmentError):
            check_atl(fig1, fml(fig1, "<<I>> G (v_I > 0)"))

    def test_rejects_play_value_bodies(self, fig1):
        with pytest.raises(FragmentError):
            check_atl(fig1, fml(fig1, "<<I>> w_I >= 5"))

    def test_nested_modalities_are_fine(self, fig1):
        # the inner modality is itself a state formula, so nesting is legal
        got = check_atl(fig1, fml(fig1, "<<I>> G (<<II>>(p1 U p2))"))
        assert got <= frozenset(fig1.states)

    def test_pre_manual(self, fig1):
        # both players together choose the move, so s1 can be sent to s2
        assert "s1" in pre_states(fig1, frozenset({"I", "II"}), frozenset({"s2"}))
        # the empty coalition forces only what every profile satisfies
        assert pre_states(fig1, frozenset(), frozenset({"s2"})) == frozenset()
        assert pre_states(
            fig1, frozenset(), frozenset(fig1.states)
        ) == frozenset(fig1.states)

    @given(st.integers(0, 7), st.integers(0, 7))
    @settings(max_examples=40, deadline=None)
    def test_pre_monotone(self, bits1, bits2):
        m = builtin_fig1()
        states = list(m.states)
        z1 = frozenset(s for i, s in enumerate(states) if bits1 & (1 << i))
        z2 = z1 | frozenset(s for i, s in enumerate(states) if bits2 & (1 << i))
        for coalition in [frozenset(), frozenset({"I"}), frozenset({"I", "II"})]:
            assert pre_states(m, coalition, z1) <= pre_states(m, coalition, z2)

    def test_until_iteration_is_increasing_and_short(self, fig1):
        # lfp stages grow and stabilize within the number of states
        target = frozenset(s for s in fig1.states if "p2" in fig1.label_of(s))
        coalition = frozenset({"I", "II"})
        z = frozenset()
        stages = [z]
        while True:
            z2 = target | pre_states(fig1, coalition, z)
            if z2 == z:
                break
            assert z < z2
            z = z2
            stages.append(z)
        assert len(stages) <= len(fig1.states) + 1
        assert z == check_atl(fig1, fml(fig1, "<<I,II>>(true U p2)"))

    def test_always_iteration_is_decreasing(self, fig1):
        keep = frozenset(s for s in fig1.states if "p1" in fig1.label_of(s))
        z = frozenset(fig1.states)
        while True:
            z2 = keep & pre_states(fig1, frozenset({"I"}), z)
            if z2 == z:
                break
            assert z2 < z
            z = z2
        assert z == check_atl(fig1, fml(fig1, "<<I>> G p1"))


# --- saturation engine ------------------------------------------------------


class TestSaturated:
    def test_counter_reaches_three(self):
        m = one_agent_loop([("inc", 1)])
        c0 = Configuration("s", (F(0),))
        assert check_saturated(m, c0, fml(m, "<<a>> F (v_a >= 3)")).value is True

    def test_forced_growth_breaks_ceiling(self):
        m = one_agent_loop([("inc", 1)])
        c0 = Configuration("s", (F(0),))
        assert check_saturated(m, c0, fml(m, "<<a>> G (v_a <= 2)")).value is False

    def test_idling_keeps_ceiling(self):
        m = one_agent_loop([("inc", 1), ("skip", 0)])
        c0 = Configuration("s", (F(0),))
        assert check_saturated(m, c0, fml(m, "<<a>> G (v_a <= 2)")).value is True

    def test_verdicts_carry_no_bound(self):
        m = one_agent_loop([("inc", 1)])
        v = check_saturated(m, Configuration("s", (F(0),)), fml(m, "<<a>> F (v_a >= 3)"))
        assert v.bound_used is None and v.witness is None

    def test_negative_payoff_rejected(self):
        m = one_agent_loop([("dec", -1)])
        with pytest.raises(NotMonotone):
            check_saturated(m, Configuration("s", (F(0),)), fml(m, "<<a>> F (v_a >= 1)"))

    def test_discount_rejected(self):
        d = {
            "agents": ["a"],
            "states": ["s"],
            "actions": {"a": ["inc"]},
            "transitions": [{"from": "s", "profile": {"a": "inc"}, "to": "s"}],
            "payoffs": [
                {"state": "s", "profile": {"a": "inc"}, "values": {"a": "1"}}
            ],
            "labels": {},
            "discounts": {"a": "1/2"},
            "value_semantics": "discounted",
        }
        m = mk(d)
        with pytest.raises(NotMonotone):
            check_saturated(m, Configuration("s", (F(0),)), fml(m, "<<a>> F (v_a >= 1)"))

    def test_negative_start_rejected(self):
        m = one_agent_loop([("inc", 1)])
        with pytest.raises(NotMonotone):
            check_saturated(m, Configuration("s", (F(-1),)), fml(m, "<<a>> F (v_a >= 1)"))

    def test_variable_vs_variable_rejected(self):
        d = {
            "agents": ["a", "b"],
            "states": ["s"],
            "actions": {"a": ["x"], "b": ["x"]},
            "transitions": [
                {"from": "s", "profile": {"a": "x", "b": "x"}, "to": "s"}
            ],
            "payoffs": [
                {"state": "s", "profile": {"a": "x", "b": "x"},
                 "values": {"a": "1", "b": "0"}}
            ],
            "labels": {},
        }
        m = mk(d)
        with pytest.raises(VariableVsVariableAtom):
            check_saturated(
                m, Configuration("s", (F(0), F(0))), fml(m, "<<a>> F (v_a > v_b)")
            )

    def test_play_value_atoms_rejected(self):
        m = one_agent_loop([("inc", 1)])
        with pytest.raises(FragmentError):
            check_saturated(m, Configuration("s", (F(0),)), fml(m, "<<a>> w_a >= 1"))

    def test_cap_covers_guards_too(self):
        d = {
            "agents": ["a"],
            "states": ["s"],
            "actions": {"a": ["inc", "skip"]},
            "transitions": [
                {"from": "s", "profile": {"a": "inc"}, "to": "s"},
                {"from": "s", "profile": {"a": "skip"}, "to": "s"},
            ],
            "payoffs": [
                {"state": "s", "profile": {"a": "inc"}, "values": {"a": "1"}},
                {"state": "s", "profile": {"a": "skip"}, "values": {"a": "0"}},
            ],
            "labels": {},
            "guards": [
                {"agent": "a", "state": "s", "action": "inc", "formula": "v_a <= 7"}
            ],
        }
        m = mk(d)
        f = fml(m, "<<a>> F (v_a >= 3)")
        assert saturation_cap(m, f) == F(8)
        # the guard cuts growth at 8, far above the formula's own constant
        assert check_saturated(m, Configuration("s", (F(0),)), f).value is True
        g = fml(m, "<<a>> F (v_a >= 9)")
        # inc is disabled once v_a passes 7, so 9 is unreachable
        assert check_saturated(m, Configuration("s", (F(0),)), g).value is False

    def test_saturated_start_utilities(self):
        m = one_agent_loop([("inc", 1)])
        v = check_saturated(m, Configuration("s", (F(1000),)), fml(m, "<<a>> G (v_a >= 3)"))
        assert v.value is True

    def test_rescaling_invariance_sample(self):
        def base_doc(k):
            return {
                "agents": ["a"],
                "states": ["s", "t"],
                "actions": {"a": ["go", "stay"]},
                "transitions": [
                    {"from": "s", "profile": {"a": "go"}, "to": "t"},
                    {"from": "s", "profile": {"a": "stay"}, "to": "s"},
                    {"from": "t", "profile": {"a": "go"}, "to": "t"},
                    {"from": "t", "profile": {"a": "stay"}, "to": "t"},
                ],
                "payoffs": [
                    {"state": "s", "profile": {"a": "go"}, "values": {"a": str(2 * k)}},
                    {"state": "s", "profile": {"a": "stay"}, "values": {"a": str(1 * k)}},
                    {"state": "t", "profile": {"a": "go"}, "values": {"a": str(0)}},
                    {"state": "t", "profile": {"a": "stay"}, "values": {"a": str(3 * k)}},
                ],
                "labels": {},
                "guards": [
                    {"agent": "a", "state": "t", "action": "stay",
                     "formula": f"v_a <= {5 * k}"}
                ],
            }

        m = mk(base_doc(1))
        c0 = Configuration("s", (F(0),))
        v1 = check_saturated(m, c0, fml(m, "<<a>> F (v_a >= 4)"))
        for k in (2, 3, 7):
            m2 = mk(base_doc(k))
            v2 = check_saturated(m2, c0, fml(m2, f"<<a>> F (v_a >= {4 * k})"))
            assert v2.value == v1.value


# --- bounded engine ---------------------------------------------------------


class TestBounded:
    def test_cooperation_pays(self, fig1):
        c0 = Configuration("s1", (F(0), F(0)))
        f = fml(fig1, "<<I,II>> F (p1 & v_I > 100 & v_II > 100)")
        v = check_bounded(fig1, c0, f, ML_CONFIG, ML_CONFIG, Budget(120))
        assert v.value is True
        assert v.witness is not None and v.bound_used is not None
        # the accepting table really wins: replay it against every response
        assert replay_strategy_table(fig1, c0, f, v.witness, ML_CONFIG, 120)

    def test_lone_player_cannot_stay_safe(self, fig1):
        c0 = Configuration("s1", (F(0), F(0)))
        f = fml(fig1, "<<I>> G (p1 | v_I > 0)")
        v = check_bounded(fig1, c0, f, ML_CONFIG, ML_CONFIG, Budget(150))
        assert v.value is False
        assert v.counterexample, "refutations must come with traces"

    def test_counterexample_traces_replay(self, fig1):
        c0 = Configuration("s1", (F(0), F(0)))
        f = fml(fig1, "<<I>> G (p1 | v_I > 0)")
        v = check_bounded(fig1, c0, f, ML_CONFIG, ML_CONFIG, Budget(150))
        for rec in v.counterexample:
            trace = rec["trace"]
            assert trace[0]["state"] == "s1"
            c = c0
            for i, entry in enumerate(trace[:-1]):
                prof = tuple(entry["profile"])
                c = step(fig1, c, prof, i + 1)
                nxt = trace[i + 1]
                assert c.state == nxt["state"]
                assert [str(u) for u in c.utilities] == nxt["utilities"]

    def test_forced_loop_always_true(self):
        m = one_agent_loop([("go", 0)])
        c0 = Configuration("s", (F(0),))
        v = check_bounded(m, c0, fml(m, "<<>> G true"), budget=Budget(1))
        assert v.value is True and v.bound_used == 1

    def test_horizon_without_closure_is_unknown(self):
        m = one_agent_loop([("inc", 1)])
        c0 = Configuration("s", (F(0),))
        v = check_bounded(m, c0, fml(m, "<<a>> F (v_a >= 10)"), budget=Budget(3))
        assert v.value is None
        assert v.bound_used == 3

    def test_node_budget_exhaustion_is_unknown(self, fig1):
        c0 = Configuration("s1", (F(0), F(0)))
        f = fml(fig1, "<<I,II>> F (p1 & v_I > 100 & v_II > 100)")
        v = check_bounded(
            fig1, c0, f, ML_CONFIG, ML_CONFIG, Budget(120, max_nodes=50)
        )
        assert v.value is None
        assert v.bound_used is not None

    def test_unknown_never_carries_evidence(self):
        m = one_agent_loop([("inc", 1)])
        v = check_bounded(
            m, Configuration("s", (F(0),)), fml(m, "<<a>> F (v_a >= 10)"), budget=Budget(3)
        )
        assert v.witness is None and v.counterexample is None

    def test_state_booleans_over_modalities(self, fig1):
        # at utilities (0,0) the guards pin both players to C, so even the
        # grand coalition cannot leave s1; with slack both conjuncts hold
        pinned = Configuration("s1", (F(0), F(0)))
        f = fml(fig1, "(<<I,II>> X p2) & !(<<>> X p2)")
        assert check_bounded(fig1, pinned, f, budget=Budget(4)).value is False
        free = Configuration("s1", (F(5), F(5)))
        v = check_bounded(fig1, free, f, budget=Budget(4))
        assert v.value is True
        assert v.witness is None  # evidence is attached only to a top-level modality

    def test_apc_body_resolves_on_exact_lassos_only(self):
        # a zero-increment cycle repeats its configuration, so the play is
        # pinned and its value judged exactly
        m = one_agent_loop([("go", 0)], semantics="mean")
        c0 = Configuration("s", (F(0),))
        assert check_bounded(m, c0, fml(m, "<<>> w_a = 0"), budget=Budget(4)).value is True
        assert check_bounded(m, c0, fml(m, "<<>> w_a >= 1"), budget=Budget(4)).value is False
        # accruing utilities never close a configuration lasso: honest Unknown
        grower = one_agent_loop([("go", 2)], semantics="mean")
        v = check_bounded(grower, c0, fml(grower, "<<>> w_a >= 2"), budget=Budget(4))
        assert v.value is None

    def test_apc_body_on_cancelling_cycle(self):
        d = {
            "agents": ["a"],
            "states": ["up", "down"],
            "actions": {"a": ["go"]},
            "transitions": [
                {"from": "up", "profile": {"a": "go"}, "to": "down"},
                {"from": "down", "profile": {"a": "go"}, "to": "up"},
            ],
            "payoffs": [
                {"state": "up", "profile": {"a": "go"}, "values": {"a": "2"}},
                {"state": "down", "profile": {"a": "go"}, "values": {"a": "-2"}},
            ],
            "labels": {},
            "value_semantics": "mean",
        }
        m = mk(d)
        c0 = Configuration("up", (F(0),))
        assert check_bounded(m, c0, fml(m, "<<>> w_a = 0"), budget=Budget(6)).value is True

    def test_empty_coalition_pumping_is_definite_even_with_recall(self):
        m = one_agent_loop([("go", 0)])  # "p" labels nothing: false everywhere
        c0 = Configuration("s", (F(0),))
        f = fml(m, "<<>>(true U p)")
        v = check_bounded(m, c0, f, PR_CONFIG, PR_CONFIG, Budget(6))
        assert v.value is False

    def test_proponent_recall_downgrades_pumped_refutation(self):
        # with a real choice, the memoryless pump does not refute a
        # recall-ful proponent; the engine must stay honest and say Unknown
        m = one_agent_loop([("go", 0), ("also", 0)])
        c0 = Configuration("s", (F(0),))
        f = fml(m, "<<a>>(true U p)")
        assert check_bounded(m, c0, f, ML_CONFIG, ML_CONFIG, Budget(6)).value is False
        assert check_bounded(m, c0, f, PR_CONFIG, PR_CONFIG, Budget(6)).value is None

    def test_nested_modalities(self):
        m = mk(CHAIN)
        c0 = Configuration("s", (F(0),))
        f = fml(m, "<<a>> X (<<a>> X q)")
        v = check_bounded(m, c0, f, budget=Budget(4))
        assert v.value is True

    def test_rejects_general_path_nesting(self, fig1):
        with pytest.raises(FragmentError):
            check_bounded(
                fig1,
                Configuration("s1", (F(0), F(0))),
                fml(fig1, "<<I>> G (<<II>>(p1 U p2))") .body,  # path formula
                budget=Budget(4),
            )

    def test_guard_respecting_witness(self, fig1):
        # every action the witness prescribes is enabled where consulted;
        # replay would raise GuardViolation otherwise
        c0 = Configuration("s1", (F(0), F(0)))
        f = fml(fig1, "<<I,II>> F (p1 & v_I > 100 & v_II > 100)")
        v = check_bounded(fig1, c0, f, ML_CONFIG, ML_CONFIG, Budget(120))
        for agent, table in v.witness.moves.items():
            for obs, act in table.items():
                state, us = obs.split("|")
                utilities = tuple(F(x) for x in us.split(","))
                i = fig1.agent_index(agent)
                assert act in fig1.enabled_actions(agent, state, utilities[i])

    def test_json_round_trip_shape(self, fig1):
        c0 = Configuration("s1", (F(0), F(0)))
        f = fml(fig1, "<<I>> G (p1 | v_I > 0)")
        v = check_bounded(fig1, c0, f, ML_CONFIG, ML_CONFIG, Budget(150))
        j = v.as_json()
        assert j["verdict"] == "false"
        assert isinstance(j["counterexample"], list)
        assert "witness" not in j

    def test_deeper_budget_refines_unknown(self):
        m = one_agent_loop([("inc", 1)])
        c0 = Configuration("s", (F(0),))
        f = fml(m, "<<a>> F (v_a >= 10)")
        assert check_bounded(m, c0, f, budget=Budget(3)).value is None
        assert check_bounded(m, c0, f, budget=Budget(12)).value is True


# --- play-value checks -------------------------------------------------------


class TestApcPlay:
    def _loop_play(self, m, profiles, loop=0):
        h = run_profiles(m, Configuration("s", tuple(F(0) for _ in m.agents)), profiles)
        return Play(h.configs, h.profiles, loop, start_index=1)

    def test_mean_cycle(self):
        d = {
            "agents": ["I", "II"],
            "states": ["s"],
            "actions": {"I": ["go"], "II": ["go"]},
            "transitions": [
                {"from": "s", "profile": {"I": "go", "II": "go"}, "to": "s"}
            ],
            "payoffs": [
                {"state": "s", "profile": {"I": "go", "II": "go"},
                 "values": {"I": "1", "II": "2"}}
            ],
            "labels": {},
            "value_semantics": "mean",
        }
        m = mk(d)
        p = self._loop_play(m, [("go", "go")])
        assert check_apc_play(m, p, parse_apc("w_II >= 3")) is False
        assert check_apc_play(m, p, parse_apc("w_II >= 2")) is True

    def test_zero_payoff_total(self):
        m = one_agent_loop([("go", 0)], semantics="total")
        p = self._loop_play(m, [("go",)])
        assert check_apc_play(m, p, parse_apc("w_a = 0")) is True

    def test_discounted_geometric(self):
        d = {
            "agents": ["a"],
            "states": ["s"],
            "actions": {"a": ["go"]},
            "transitions": [{"from": "s", "profile": {"a": "go"}, "to": "s"}],
            "payoffs": [
                {"state": "s", "profile": {"a": "go"}, "values": {"a": "2"}}
            ],
            "labels": {},
            "discounts": {"a": "1/2"},
            "value_semantics": "discounted",
        }
        m = mk(d)
        p = self._loop_play(m, [("go",)])
        assert check_apc_play(m, p, parse_apc("w_a = 2")) is True

    def test_inexact_lasso_rejected(self):
        from gcgmp.errors import NotLasso

        m = one_agent_loop([("inc", 1)], semantics="total")
        p = self._loop_play(m, [("inc",)])
        with pytest.raises(NotLasso):
            check_apc_play(m, p, parse_apc("w_a >= 0"))

    def test_divergent_total_propagates(self):
        # utilities oscillate 0,2,0,2,... -> no settled total value
        d = {
            "agents": ["a"],
            "states": ["up", "down"],
            "actions": {"a": ["go"]},
            "transitions": [
                {"from": "up", "profile": {"a": "go"}, "to": "down"},
                {"from": "down", "profile": {"a": "go"}, "to": "up"},
            ],
            "payoffs": [
                {"state": "up", "profile": {"a": "go"}, "values": {"a": "2"}},
                {"state": "down", "profile": {"a": "go"}, "values": {"a": "-2"}},
            ],
            "labels": {},
            "value_semantics": "total",
        }
        m = mk(d)
        h = run_profiles(m, Configuration("up", (F(0),)), [("go",), ("go",)])
        p = Play(h.configs, h.profiles, 0, start_index=1)
        with pytest.raises(Divergent):
            check_apc_play(m, p, parse_apc("w_a >= 0"))


# --- brute-force oracle -------------------------------------------------------


class TestOracle:
    def test_next_true(self):
        m = mk(CHAIN)
        v = enumerate_oracle(m, Configuration("s", (F(0),)), fml(m, "<<a>> X true"), depth=3)
        assert v.value is True

    def test_reach(self):
        m = mk(CHAIN)
        v = enumerate_oracle(m, Configuration("s", (F(0),)), fml(m, "<<a>> F q"), depth=4)
        assert v.value is True

    def test_size_guards(self):
        big = {
            "agents": ["a"],
            "states": [f"s{i}" for i in range(5)],
            "actions": {"a": ["x"]},
            "transitions": [
                {"from": f"s{i}", "profile": {"a": "x"}, "to": "s0"} for i in range(5)
            ],
            "payoffs": [
                {"state": f"s{i}", "profile": {"a": "x"}, "values": {"a": "0"}}
                for i in range(5)
            ],
            "labels": {},
        }
        m = mk(big)
        with pytest.raises(TooLarge):
            enumerate_oracle(m, Configuration("s0", (F(0),)), fml(m, "<<a>> X true"))
        m2 = one_agent_loop([("x", 0), ("y", 0), ("z", 0)])
        with pytest.raises(TooLarge):
            enumerate_oracle(m2, Configuration("s", (F(0),)), fml(m2, "<<a>> X true"))
        m3 = one_agent_loop([("x", 0)])
        with pytest.raises(TooLarge):
            enumerate_oracle(m3, Configuration("s", (F(0),)), fml(m3, "<<a>> X true"), depth=9)


# --- randomized cross-validation ----------------------------------------------


def random_model(rng, nonneg):
    agents = ["a", "b"]
    states = [f"s{i}" for i in range(rng.randint(1, 3))]
    actions = {ag: ["x", "y"][: rng.randint(1, 2)] for ag in agents}
    trans, pays = [], []
    for s in states:
        for prof in itertools.product(*(actions[a] for a in agents)):
            profile = dict(zip(agents, prof))
            trans.append({"from": s, "profile": profile, "to": rng.choice(states)})
            lo = 0 if nonneg else -2
            pays.append({
                "state": s,
                "profile": profile,
                "values": {a: str(rng.randint(lo, 2)) for a in agents},
            })
    labels = {s: [p for p in ["p", "q"] if rng.random() < 0.5] for s in states}
    guards = []
    for ag in agents:
        for s in states:
            for act in actions[ag]:
                if rng.random() < 0.6:
                    continue
                guards.append({
                    "agent": ag, "state": s, "action": act,
                    "formula": f"v_{ag} >= 0" if rng.random() < 0.5 else f"v_{ag} <= 3",
                })
    return model_from_dict(
        {
            "agents": agents,
            "states": states,
            "actions": actions,
            "transitions": trans,
            "payoffs": pays,
            "labels": labels,
            "guards": guards,
            "value_semantics": "mean",
        }
    )


def random_state_formula(rng, depth):
    r = rng.random()
    if depth == 0 or r < 0.35:
        if rng.random() < 0.4:
            return rng.choice(["p", "q", "true"])
        ag = rng.choice(["a", "b"])
        return f"v_{ag} {rng.choice(['<', '<=', '=', '>=', '>'])} {rng.randint(0, 3)}"
    if r < 0.5:
        return f"!({random_state_formula(rng, depth - 1)})"
    if r < 0.65:
        return (
            f"({random_state_formula(rng, depth - 1)})"
            f" & ({random_state_formula(rng, depth - 1)})"
        )
    coal = rng.choice(["", "a", "b", "a,b"])
    inner = random_state_formula(rng, depth - 1)
    b = rng.random()
    if b < 0.33:
        return f"<<{coal}>>X ({inner})"
    if b < 0.66:
        return f"<<{coal}>>G ({inner})"
    return f"<<{coal}>>(({inner}) U ({random_state_formula(rng, depth - 1)}))"


class TestEngineAgreement:
    @pytest.mark.parametrize("seed", [11, 12, 13, 14])
    def test_definite_verdicts_agree(self, seed):
        rng = random.Random(seed)
        checked = 0
        while checked < 15:
            nonneg = checked % 2 == 0
            m = random_model(rng, nonneg)
            if validate(m):
                continue
            try:
                f = bind_formula(m, parse_formula(random_state_formula(rng, 2)))
            except GcgmpError:
                continue
            c0 = Configuration(m.states[0], (F(0), F(0)))
            verdicts = {}
            try:
                verdicts["oracle"] = enumerate_oracle(
                    m, c0, f, ML_CONFIG, ML_CONFIG, depth=4
                ).value
            except (TooLarge, FragmentError):
                continue
            verdicts["bounded"] = check_bounded(
                m, c0, f, ML_CONFIG, ML_CONFIG, Budget(4)
            ).value
            if nonneg:
                try:
                    verdicts["saturated"] = check_saturated(m, c0, f).value
                except (NotMonotone, VariableVsVariableAtom, FragmentError):
                    pass
            defs = {k: v for k, v in verdicts.items() if v is not None}
            assert len(set(defs.values())) <= 1, (verdicts, f)
            checked += 1

    @pytest.mark.parametrize(
        "sp,so", [(ML_STATE, ML_STATE), (PR_CONFIG, ML_CONFIG), (ML_CONFIG, PR_CONFIG)]
    )
    def test_agreement_across_strategy_classes(self, sp, so):
        rng = random.Random(hash((sp.short, so.short)) & 0xFFFF)
        checked = 0
        while checked < 8:
            m = random_model(rng, False)
            if validate(m):
                continue
            try:
                f = bind_formula(m, parse_formula(random_state_formula(rng, 2)))
            except GcgmpError:
                continue
            c0 = Configuration(m.states[0], (F(0), F(0)))
            try:
                want = enumerate_oracle(m, c0, f, sp, so, depth=4).value
            except (TooLarge, FragmentError):
                continue
            got = check_bounded(m, c0, f, sp, so, Budget(4)).value
            if want is not None and got is not None:
                assert want == got, (want, got, f)
            checked += 1

    def test_oracle_matches_qualitative_engine(self):
        # guard-free, zero-payoff models: the state graph is the whole story
        rng = random.Random(4242)
        compared = 0
        while compared < 25:
            agents = ["a", "b"]
            states = [f"s{i}" for i in range(rng.randint(1, 3))]
            actions = {ag: ["x", "y"][: rng.randint(1, 2)] for ag in agents}
            trans, pays = [], []
            for s in states:
                for prof in itertools.product(*(actions[a] for a in agents)):
                    profile = dict(zip(agents, prof))
                    trans.append({"from": s, "profile": profile, "to": rng.choice(states)})
                    pays.append({
                        "state": s,
                        "profile": profile,
                        "values": {a: "0" for a in agents},
                    })
            m = model_from_dict(
                {
                    "agents": agents,
                    "states": states,
                    "actions": actions,
                    "transitions": trans,
                    "payoffs": pays,
                    "labels": {
                        s: (["p"] if rng.random() < 0.5 else []) for s in states
                    },
                }
            )
            coal = rng.choice(["", "a", "a,b"])
            body = rng.choice([f"<<{coal}>>X p", f"<<{coal}>>G p", f"<<{coal}>>(true U p)"])
            f = fml(m, body)
            sset = check_atl(m, f)
            c0 = Configuration(states[0], (F(0), F(0)))
            try:
                got = enumerate_oracle(m, c0, f, ML_STATE, ML_STATE, depth=8).value
            except TooLarge:
                continue
            if got is not None:
                assert got == (states[0] in sset), (body, sset)
                compared += 1

    def test_saturation_agrees_with_oracle_on_growth(self):
        # the decidable engine must match brute force once the brute force
        # can actually see past the largest constant
        m = one_agent_loop([("inc", 1), ("skip", 0)])
        c0 = Configuration("s", (F(0),))
        for text in [
            "<<a>> F (v_a >= 3)",
            "<<a>> G (v_a <= 2)",
            "<<a>>((v_a <= 1) U (v_a >= 2))",
            "<<>> G (v_a <= 2)",
        ]:
            f = fml(m, text)
            sat = check_saturated(m, c0, f).value
            brute = enumerate_oracle(m, c0, f, ML_CONFIG, ML_CONFIG, depth=8).value
            if brute is not None:
                assert brute == sat, text
