from dataclasses import dataclass

import pytest

from measures import (
    NotBlockedError,
    PikblkCycleError,
    default_horizon,
    impl_prog,
    nstrvs_list,
    pikblk,
    progress_steps,
    spec_prog,
    starver,
    starver_trace,
    sum_nsts,
    sys_noblk,
    sys_nstrv,
)
from ordinal import nats_to_ord
from run_engine import RoundRobinScheduler, simulate
from system_model import SystemState, TaskSystemDef, make_keys
from systems import get_system
from systems.bakery_impl import BakeImplTState
from systems.relay import RelayTState


@dataclass(frozen=True)
class Counter:
    level: int = 0


# peers at level 0 never get in the way; any other level is how long they still might
TOY = TaskSystemDef(
    name="toy",
    t_initial=lambda k: Counter(),
    t_init=lambda a, k: a.level == 0,
    t_next_check=lambda a, b, x: False,
    t_blok=lambda a, b: False,
    t_noblk=lambda a, b: b.level == 0,
    t_nstrv=lambda a, b: b.level,
    t_nlock=lambda k, x: 0,
)


@pytest.fixture
def chain_state():
    """A waits behind B and C; B waits behind C; C only waits for choosing peers."""
    return SystemState.build({
        "A": BakeImplTState(loc=6, key="A", pos=3, pos_valid=True),
        "B": BakeImplTState(loc=6, key="B", pos=2, pos_valid=True),
        "C": BakeImplTState(loc=5, key="C", pos=1, pos_valid=True),
    })


def test_sys_noblk(bakery_impl):
    past_choice = SystemState.build({
        "A": BakeImplTState(loc=3, key="A", choosing=True, pos_valid=True),
        "B": BakeImplTState(loc=1, key="B", choosing=True),
    })
    assert sys_noblk("A", past_choice, bakery_impl)
    waiting = SystemState.build({
        "A": BakeImplTState(loc=5, key="A", pos=2, pos_valid=True),
        "B": BakeImplTState(loc=1, key="B", choosing=True),
    })
    assert not sys_noblk("A", waiting, bakery_impl)
    assert sys_noblk("A", SystemState.build({}), TOY)


def test_pikblk_picks_least_blocker(bakery_impl, chain_state):
    assert pikblk("A", chain_state, bakery_impl) == "B"
    assert pikblk("B", chain_state, bakery_impl) == "C"
    with pytest.raises(NotBlockedError):
        pikblk("C", chain_state, bakery_impl)


def test_starver_follows_chain(bakery_impl, chain_state):
    assert starver("C", chain_state, bakery_impl) == "C"
    assert starver("B", chain_state, bakery_impl) == "C"
    assert starver("A", chain_state, bakery_impl) == "C"


def test_starver_reports_cycle():
    m3 = get_system("relay-m3")
    x = SystemState.build({"A": RelayTState(1), "B": RelayTState(2)})
    with pytest.raises(PikblkCycleError) as err:
        starver("A", x, m3)
    assert err.value.chain == ("A", "B", "A")


def test_sum_nsts():
    quiet = SystemState.build({"A": Counter(0), "B": Counter(0)})
    assert sum_nsts("A", quiet, TOY) == 1
    busy = SystemState.build({"A": Counter(0), "B": Counter(8)})
    assert sum_nsts("A", busy, TOY) == 9
    assert sum_nsts("A", SystemState.build({}), TOY) == 1


def test_sum_nsts_counts_own_wait(bakery_impl, chain_state):
    # C is not blocked by A or B, but has not yet passed its own ticket
    assert sum_nsts("C", chain_state, bakery_impl) == 12


def test_nstrvs_along_chain(bakery_impl, chain_state):
    assert nstrvs_list("C", chain_state, bakery_impl) == [sum_nsts("C", chain_state, bakery_impl)]
    values = nstrvs_list("A", chain_state, bakery_impl)
    assert values == [sum_nsts(k, chain_state, bakery_impl) for k in ("A", "B", "C")]
    assert sys_nstrv("A", chain_state, bakery_impl) == nats_to_ord(3, values)


def test_starver_trace(bakery_impl, chain_state):
    entries = starver_trace("A", chain_state, bakery_impl)
    assert [e.key for e in entries] == ["A", "B", "C"]
    assert [e.blocked for e in entries] == [True, True, False]


def test_nstrvs_length_bounded_on_reachable_states(bakery_impl, bakery_graph_2):
    for x in bakery_graph_2.states:
        for k in bakery_graph_2.keys:
            assert len(nstrvs_list(k, x, bakery_impl)) <= 2
            assert not any(e.blocked for e in starver_trace(k, x, bakery_impl)[-1:])


@pytest.fixture
def relay_trace(relay):
    # A, B, A, B(blocked), A, B
    return simulate(relay, make_keys(2), RoundRobinScheduler(make_keys(2)), 6)


def test_progress_steps(relay_trace):
    assert progress_steps("A", relay_trace.states, relay_trace.picks) == [1, 3, 5]
    assert progress_steps("B", relay_trace.states, relay_trace.picks) == [2, 6]


def test_impl_prog(relay_trace):
    states, picks = relay_trace.states, relay_trace.picks
    assert impl_prog("A", 0, states, picks) == 0
    assert impl_prog("B", 0, states, picks) == 1
    assert impl_prog("B", 2, states, picks) == 3
    assert impl_prog("B", 6, states, picks) is None
    assert impl_prog("B", 2, states, picks, horizon=2) is None
    assert impl_prog("Z", 0, states, picks) == 0


def test_impl_prog_drops_without_progress(bakery_impl):
    keys = make_keys(2)
    trace = simulate(bakery_impl, keys, RoundRobinScheduler(keys), 200)
    for k in keys:
        progress = set(progress_steps(k, trace.states, trace.picks))
        for i in range(1, len(trace)):
            before = impl_prog(k, i - 1, trace.states, trace.picks)
            after = impl_prog(k, i, trace.states, trace.picks)
            if i not in progress and after is not None:
                assert after < before


def test_spec_prog_waits_for_mapped_change(bakery_impl):
    trace = simulate(bakery_impl, make_keys(1), RoundRobinScheduler(make_keys(1)), 4)
    assert impl_prog("A", 0, trace.states, trace.picks) == 0
    assert spec_prog("A", 0, trace.states, trace.picks, bakery_impl) == 1


def test_default_horizon():
    assert default_horizon(3, 10) == 300
    assert default_horizon(0, 0) == 10
