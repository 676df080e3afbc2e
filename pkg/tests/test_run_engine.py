from dataclasses import replace

import pytest

from reports import Verdict
from run_engine import (
    AgingRandomScheduler,
    RoundRobinScheduler,
    ScriptedScheduler,
    Trace,
    check_fair_witness,
    check_refinement_trace,
    check_run_legal,
    derive_fair_witness,
    detect_starvation,
    map_trace,
    simulate,
)
from measures import impl_prog
from system_model import STUTTER, initial_state, make_keys
from systems import get_system
from tests.oracle import bakery_run


@pytest.fixture(scope="module")
def long_bakery_trace():
    bakery = get_system("bakery-impl")
    keys = make_keys(3)
    return simulate(bakery, keys, RoundRobinScheduler(keys), 10_000, seed=7)


def test_round_robin_bakery_passes_the_entry_section(bakery_impl):
    keys = make_keys(2)
    trace = simulate(bakery_impl, keys, RoundRobinScheduler(keys), 16)
    assert len(trace) == 16
    assert len(trace.states) == 17
    for k in keys:
        assert any(x.get(k).loc >= 5 for x in trace.states)
    assert trace.states[-1].get("A").loc == bakery_run(keys, trace.picks)[-1]["A"]["loc"]


def test_zero_steps(bakery_impl):
    trace = simulate(bakery_impl, make_keys(2), RoundRobinScheduler(make_keys(2)), 0)
    assert len(trace) == 0
    assert trace.states == [initial_state(bakery_impl, make_keys(2))]


def test_scripted_scheduler_replays_its_script(relay):
    trace = simulate(relay, make_keys(2), ScriptedScheduler(["A", STUTTER, "B"]), 6)
    assert trace.picks == ["A", None, "B", "A", None, "B"]
    assert trace.states[1] != trace.states[0]
    assert trace.states[2] == trace.states[1]
    assert trace.scheduler == "script:A,-,B"


def test_scripted_scheduler_from_text():
    sched = ScriptedScheduler.from_text("A, B -\n C")
    assert sched.script == ["A", "B", None, "C"]
    with pytest.raises(ValueError):
        ScriptedScheduler.from_text("  ")


@pytest.mark.parametrize("seed", [0, 1, 2, 3])
@pytest.mark.parametrize("bound", [3, 5])
def test_aging_scheduler_runs_are_legal_and_fair(bakery_impl, seed, bound):
    keys = make_keys(3)
    sched = AgingRandomScheduler(keys, bound, seed)
    trace = simulate(bakery_impl, keys, sched, 500, seed)
    assert trace.scheduler == f"aging:{bound}"
    assert check_run_legal(trace, bakery_impl).passed
    assert derive_fair_witness(trace, bound).ok


def test_aging_scheduler_is_seeded(bakery_impl):
    keys = make_keys(3)
    first = simulate(bakery_impl, keys, AgingRandomScheduler(keys, 4, 9), 200, 9)
    second = simulate(bakery_impl, keys, AgingRandomScheduler(keys, 4, 9), 200, 9)
    assert first == second


def test_aging_scheduler_needs_room_for_every_key():
    with pytest.raises(ValueError):
        AgingRandomScheduler(make_keys(3), 2, 0)


def test_round_robin_witness(relay):
    keys = make_keys(3)
    trace = simulate(relay, keys, RoundRobinScheduler(keys), 60)
    witness = derive_fair_witness(trace, len(keys))
    assert witness.ok
    assert all(v >= 0 for values in witness.table.values() for v in values)
    assert check_fair_witness(trace, len(keys)).passed


def test_fair_witness_violation(relay):
    trace = simulate(relay, make_keys(2), ScriptedScheduler(["A"]), 12)
    witness = derive_fair_witness(trace, 10)
    assert witness.violation == ("B", 11)
    report = check_fair_witness(trace, 10)
    verdict = report.verdict_for("pick-fair")
    assert verdict.verdict == Verdict.FAIL
    assert verdict.counterexample.reproduces()


def test_run_legal_catches_corruption(bakery_impl):
    keys = make_keys(2)
    trace = simulate(bakery_impl, keys, RoundRobinScheduler(keys), 10)
    assert check_run_legal(trace, bakery_impl).passed

    corrupted = trace.prefix(10)
    bad = corrupted.states[3].get("A")
    corrupted.states[3] = corrupted.states[3].set("A", replace(bad, pos=bad.pos + 7))
    verdict = check_run_legal(corrupted, bakery_impl).verdict_for("run-step")
    assert verdict.verdict == Verdict.FAIL
    assert verdict.counterexample.index == 3
    assert verdict.counterexample.reproduces()

    shifted = trace.prefix(10)
    shifted.states[0] = shifted.states[1]
    report = check_run_legal(shifted, bakery_impl)
    assert report.verdict_for("run-init").verdict == Verdict.FAIL


def test_map_trace_inserts_stutters(bakery_impl):
    trace = simulate(bakery_impl, make_keys(1), RoundRobinScheduler(make_keys(1)), 2)
    mapped = map_trace(trace, bakery_impl)
    assert mapped.picks == [STUTTER, "A"]
    assert mapped.states[0].get("A").loc == "idle"
    assert mapped.states[2].get("A").loc == "loaded"

    idle = simulate(bakery_impl, make_keys(1), ScriptedScheduler([STUTTER]), 3)
    assert map_trace(idle, bakery_impl).picks == [STUTTER] * 3


def test_map_trace_commutes_with_prefix(bakery_impl):
    keys = make_keys(2)
    trace = simulate(bakery_impl, keys, RoundRobinScheduler(keys), 40)
    for n in (0, 7, 40):
        whole = map_trace(trace, bakery_impl).prefix(n)
        part = map_trace(trace.prefix(n), bakery_impl)
        assert (part.states, part.picks) == (whole.states, whole.picks)


def test_refinement_holds_on_long_run(bakery_impl, bakery_spec, long_bakery_trace):
    report = check_refinement_trace(long_bakery_trace, bakery_impl, bakery_spec)
    assert report.overall == Verdict.PASS
    assert [v.theorem for v in report.verdicts] == [
        "spec-step", "spec-unblocked", "stutter-rank-decreases", "stutter-rank-stable",
    ]
    # tickets start at 1, so the mapped first state sits outside the spec's initial states
    assert "mapped first state is not a spec initial state" in report.notes
    assert report.stats["spec_steps"] > 0
    for k in long_bakery_trace.keys:
        assert report.stats[f"longest_stutter_{k}"] <= 3


def test_long_run_cycles_every_task(long_bakery_trace):
    states = long_bakery_trace.states
    for k in long_bakery_trace.keys:
        exits = sum(1 for x, y in zip(states, states[1:]) if x.get(k).loc == 7 and y.get(k).loc == 0)
        assert exits >= 50


def test_zero_rank_breaks_stutter_decrease(bakery_spec):
    m2 = get_system("bakery-impl-m2")
    keys = make_keys(2)
    trace = simulate(m2, keys, RoundRobinScheduler(keys), 50)
    report = check_refinement_trace(trace, m2, bakery_spec)
    verdict = report.verdict_for("stutter-rank-decreases")
    assert verdict.verdict == Verdict.FAIL
    assert verdict.counterexample.reproduces()
    assert report.verdict_for("spec-step").verdict == Verdict.PASS


def test_illegal_spec_move_is_caught(bakery_impl, bakery_spec):
    keys = make_keys(1)
    x0 = initial_state(bakery_impl, keys)
    jumped = x0.set("A", replace(x0.get("A"), loc=4, pos=5, pos_valid=True))
    trace = Trace("bakery-impl", keys, [x0, jumped], ["A"])
    report = check_refinement_trace(trace, bakery_impl, bakery_spec)
    verdict = report.verdict_for("spec-step")
    assert verdict.verdict == Verdict.FAIL
    assert verdict.counterexample.index == 1


def test_fair_bakery_run_has_no_starvation(bakery_impl, long_bakery_trace):
    findings = detect_starvation(long_bakery_trace, bakery_impl)
    assert findings.flagged() == []
    assert all(p.progress_steps > 0 for p in findings.per_key.values())
    assert findings.to_report(long_bakery_trace).overall == Verdict.PASS


def test_neglected_key_is_flagged(relay):
    trace = simulate(relay, make_keys(2), ScriptedScheduler(["A"]), 200)
    findings = detect_starvation(trace, relay)
    assert findings.horizon == 60
    assert "B" in findings.flagged()
    assert "A" not in findings.flagged()
    assert findings.per_key["B"].progress_steps == 0
    assert findings.per_key["B"].max_gap == 200


def test_permanent_block_is_a_confirmed_lasso():
    m3 = get_system("relay-m3")
    keys = make_keys(2)
    trace = simulate(m3, keys, RoundRobinScheduler(keys), 40)
    findings = detect_starvation(trace, m3)
    assert findings.confirmed() == ["A", "B"]
    report = findings.to_report(trace)
    assert report.overall == Verdict.FAIL
    assert "confirmed lasso" in report.verdict_for("progress-A").note


def test_neglected_key_is_flagged_through_impl_prog(relay):
    trace = simulate(relay, make_keys(2), ScriptedScheduler(["A"]), 200)
    assert impl_prog("B", 0, trace.states, trace.picks, 60) is None
    assert not detect_starvation(trace, relay, horizon=200).per_key["B"].horizon_exceeded
    assert detect_starvation(trace, relay, horizon=200).per_key["B"].spec_progress_steps is None
    assert detect_starvation(trace, relay, horizon=199).per_key["B"].horizon_exceeded


def test_map_stutter_stretch_is_flagged(bakery_impl):
    # alone, A moves every step, but locs 4-6 all map to the same spec t-state
    trace = simulate(bakery_impl, make_keys(1), RoundRobinScheduler(make_keys(1)), 16)
    findings = detect_starvation(trace, bakery_impl, horizon=2)
    p = findings.per_key["A"]
    assert p.progress_steps == 16
    assert p.spec_progress_steps == 8
    assert not p.horizon_exceeded
    assert p.spec_horizon_exceeded
    assert findings.flagged() == ["A"]
    assert "map-changing" in findings.to_report(trace).verdict_for("progress-A").note
    assert detect_starvation(trace, bakery_impl, horizon=3).flagged() == []


def test_random_scheduler_never_confirms_lasso(relay):
    keys = make_keys(2)
    trace = simulate(relay, keys, AgingRandomScheduler(keys, 2, 1), 100, 1)
    assert detect_starvation(trace, relay).confirmed() == []
