"""
Single-step proof obligations checked over explored state graphs.

Reachability stands in for the inductive invariant: every obligation is evaluated on
each stored state and on every raw successor of it, for every key, blocked or not.
A truncated graph turns passes into qualified passes, never into silent passes.
"""
import itertools
import logging
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Dict, Iterable, List, Optional, Sequence, Tuple

from config import DEFAULT_STATE_CAP, WORKERS
from measures import PikblkCycleError, nstrvs_list, starver, starver_trace, sys_noblk, sys_nstrv
from ordinal import ord_le, ord_lt
from reachability import StateGraph, explore
from reports import CheckReport, Counterexample, TheoremTally, TheoremVerdict, Verdict
from system_model import (
    STUTTER,
    Key,
    SystemState,
    TState,
    TaskSystemDef,
    initial_state,
    make_keys,
    map_state,
    sys_blok,
    sys_init,
    sys_next_check,
    sys_next_enum,
    sys_rank,
)

logger = logging.getLogger(__name__)

SUITE_SYSTEM_PROPS = "system-props"
SUITE_VALID_TASK = "valid-task"
SUITE_MATCH = "match"
SUITE_DERIVED = "derived-system"
SUITE_INVARIANTS = "invariants"
ALL_SUITES = (SUITE_SYSTEM_PROPS, SUITE_VALID_TASK, SUITE_MATCH, SUITE_DERIVED, SUITE_INVARIANTS)


class DomainUnavailableError(RuntimeError):
    """Raised when no finite t-state domain can be found for cycle search."""


def _finish(report: CheckReport, tallies: Iterable[TheoremTally], graph: StateGraph) -> CheckReport:
    report.bounded = not graph.complete
    report.verdicts = [t.verdict(report.bounded) for t in tallies]
    if report.bounded:
        report.notes.append(f"graph {graph.status.value}: verdicts hold on visited states only")
    failed = [v.theorem for v in report.verdicts if v.verdict == Verdict.FAIL]
    logger.info("[check %s] %s: %s", report.suite, report.system, "failed " + ", ".join(failed) if failed else "ok")
    return report


def _new_report(suite: str, graph: StateGraph, sys_name: str) -> CheckReport:
    return CheckReport(
        suite=suite,
        system=sys_name,
        keys=graph.keys,
        stats={"states": len(graph.states), "transitions": len(graph.edges)},
    )


def check_system_props(graph: StateGraph, sys: TaskSystemDef) -> CheckReport:
    """No step leaves a state unchanged, and the initial state satisfies sys_init."""
    report = _new_report(SUITE_SYSTEM_PROPS, graph, sys.name)
    no_self = TheoremTally("no-self-next")
    init = TheoremTally("init")
    stutter = TheoremTally("stutter-not-key")

    stutter.record(STUTTER not in graph.keys)
    x0 = initial_state(sys, graph.keys)
    init.record(
        sys_init(x0, sys, graph.keys),
        lambda: Counterexample("init", "initial state fails sys_init", states=(x0,),
                               replay=lambda: sys_init(x0, sys, graph.keys)),
    )
    for x in graph.states:
        for k in graph.keys:
            for y in sys_next_enum(x, k, sys):
                no_self.record(
                    y != x,
                    lambda x=x, k=k: Counterexample(
                        "no-self-next", f"key {k} has a successor equal to the state",
                        states=(x,), keys=(k,),
                        replay=lambda: all(y != x for y in sys_next_enum(x, k, sys)),
                    ),
                )
    return _finish(report, (no_self, init, stutter), graph)


def check_valid_task_obligations(graph: StateGraph, sys: TaskSystemDef) -> CheckReport:
    """The four task-level obligations relating t_noblk, t_blok, t_nlock and t_nstrv."""
    sys.require_validity()
    sys.require_enumerator()
    report = _new_report(SUITE_VALID_TASK, graph, sys.name)
    t1 = TheoremTally("t-noblk-blk-thm")
    t2 = TheoremTally("t-noblk-inv-thm")
    t3 = TheoremTally("t-nlock-decreases")
    t4 = TheoremTally("t-nstrv-decreases")
    positive = TheoremTally("t-nstrv-positive")
    pairs = 0

    for x in graph.states:
        for k, l in itertools.product(graph.keys, repeat=2):
            pairs += 1
            gk, gl = x.get(k), x.get(l)
            noblk = sys.t_noblk(gk, gl)
            blok = sys.t_blok(gk, gl)

            def pair_cex(theorem, description, replay, x=x, k=k, l=l):
                return lambda: Counterexample(theorem, description, states=(x,), keys=(k, l), replay=replay)

            t1.record(
                not (noblk and blok),
                pair_cex("t-noblk-blk-thm", "t_noblk holds but t_blok blocks",
                         lambda gk=gk, gl=gl: not (sys.t_noblk(gk, gl) and sys.t_blok(gk, gl))),
            )
            if blok:
                t3.record(
                    ord_lt(sys.t_nlock(l, x), sys.t_nlock(k, x)),
                    pair_cex("t-nlock-decreases", "t_nlock of the blocker is not below t_nlock of the blocked",
                             lambda x=x, k=k, l=l: ord_lt(sys.t_nlock(l, x), sys.t_nlock(k, x))),
                )
            if not noblk:
                positive.record(sys.t_nstrv(gk, gl) >= 1)

            for c in sys.t_next_enum(gl, x):
                def step_cex(theorem, description, replay, x=x, k=k, l=l, c=c):
                    return lambda: Counterexample(theorem, description, states=(x,), keys=(k, l),
                                                  successor=c, replay=replay)

                if noblk:
                    t2.record(
                        sys.t_noblk(gk, c),
                        step_cex("t-noblk-inv-thm", "t_noblk lost by a step of the other task",
                                 lambda gk=gk, c=c: sys.t_noblk(gk, c)),
                    )
                elif not sys.t_noblk(gk, c):
                    t4.record(
                        sys.t_nstrv(gk, c) < sys.t_nstrv(gk, gl),
                        step_cex("t-nstrv-decreases", "t_nstrv did not drop on the other task's step",
                                 lambda gk=gk, gl=gl, c=c: sys.t_nstrv(gk, c) < sys.t_nstrv(gk, gl)),
                    )

    report.stats["pairs"] = pairs
    return _finish(report, (t1, t2, t3, t4, positive), graph)


def check_match_obligations(graph: StateGraph, impl: TaskSystemDef, spec: TaskSystemDef) -> CheckReport:
    """Each implementation step matches a spec step or stutters with a dropping rank."""
    impl.require_refinement()
    impl.require_enumerator()
    report = _new_report(SUITE_MATCH, graph, impl.name)
    report.notes.append(f"spec: {spec.name}")
    matches = TheoremTally("map-matches-next")
    finite = TheoremTally("map-finite-stutter")
    stable = TheoremTally("map-rank-stable")

    for x in graph.states:
        mx = map_state(x, impl)
        for k in graph.keys:
            blocked = sys_blok(x, k, impl)
            for y in sys_next_enum(x, k, impl):
                my = map_state(y, impl)
                if my != mx:
                    if not blocked:
                        def replay_match(mx=mx, my=my, k=k):
                            return sys_next_check(mx, my, k, spec) and not sys_blok(mx, k, spec)

                        matches.record(
                            replay_match(),
                            lambda x=x, y=y, k=k, mx=mx, my=my, r=replay_match: Counterexample(
                                "map-matches-next",
                                "spec step check failed" if not sys_next_check(mx, my, k, spec)
                                else "spec blocks the mapped key",
                                states=(x, y, mx, my), keys=(k,), replay=r,
                            ),
                        )
                else:
                    def replay_finite(x=x, y=y, k=k):
                        return ord_lt(sys_rank(k, y, impl), sys_rank(k, x, impl))

                    finite.record(
                        replay_finite(),
                        lambda x=x, y=y, k=k, r=replay_finite: Counterexample(
                            "map-finite-stutter", "rank did not drop on a map-stuttering step",
                            states=(x, y), keys=(k,), replay=r,
                        ),
                    )
                for j in graph.keys:
                    if j == k:
                        continue

                    def replay_stable(x=x, y=y, j=j):
                        return ord_le(sys_rank(j, y, impl), sys_rank(j, x, impl))

                    stable.record(
                        replay_stable(),
                        lambda x=x, y=y, j=j, k=k, r=replay_stable: Counterexample(
                            "map-rank-stable", f"rank of {j} rose on a step of {k}",
                            states=(x, y), keys=(j, k), replay=r,
                        ),
                    )
    return _finish(report, (matches, finite, stable), graph)


def check_derived_system_obligations(graph: StateGraph, sys: TaskSystemDef) -> CheckReport:
    """System-level noblk / starver / nstrv theorems, using the derived measures."""
    sys.require_validity()
    sys.require_enumerator()
    report = _new_report(SUITE_DERIVED, graph, sys.name)
    noblk_blk = TheoremTally("noblk-blk-thm")
    noblk_inv = TheoremTally("noblk-inv-thm")
    starver_thm = TheoremTally("starver-thm")
    decreases = TheoremTally("nstrv-decreases")
    holds = TheoremTally("nstrv-holds")
    persists = TheoremTally("starver-persists")
    length = TheoremTally("nstrvs-length")
    card = len(graph.keys)

    def cycle_cex(tally: TheoremTally, x: SystemState, k: Key, err: PikblkCycleError):
        tally.note = "pikblk cycle: starver does not terminate"
        return lambda: Counterexample(
            tally.theorem, str(err), states=(x,), keys=err.chain,
            replay=lambda: _starver_terminates(k, x, sys),
        )

    for x in graph.states:
        for k in graph.keys:
            noblk_k = sys_noblk(k, x, sys)
            noblk_blk.record(
                not (noblk_k and sys_blok(x, k, sys)),
                lambda x=x, k=k: Counterexample(
                    "noblk-blk-thm", "sys_noblk holds but the key is blocked", states=(x,), keys=(k,),
                    replay=lambda: not (sys_noblk(k, x, sys) and sys_blok(x, k, sys)),
                ),
            )
            try:
                s = starver(k, x, sys)
                chain_len = len(nstrvs_list(k, x, sys))
                nx = sys_nstrv(k, x, sys)
            except PikblkCycleError as err:
                starver_thm.record(False, cycle_cex(starver_thm, x, k, err))
                continue
            starver_thm.record(
                not sys_blok(x, s, sys),
                lambda x=x, k=k, s=s: Counterexample(
                    "starver-thm", f"starver {s} is blocked; chain: {_describe_chain(k, x, sys)}",
                    states=(x,), keys=(k, s),
                    replay=lambda: not sys_blok(x, starver(k, x, sys), sys),
                ),
            )
            length.record(
                chain_len <= card,
                lambda x=x, k=k: Counterexample(
                    "nstrvs-length", "nstrvs list is longer than the key set", states=(x,), keys=(k,),
                    replay=lambda: len(nstrvs_list(k, x, sys)) <= card,
                ),
            )

            for l in graph.keys:
                for y in sys_next_enum(x, l, sys):
                    if l != k and noblk_k:
                        noblk_inv.record(
                            sys_noblk(k, y, sys),
                            lambda x=x, y=y, k=k, l=l: Counterexample(
                                "noblk-inv-thm", f"step of {l} broke sys_noblk of {k}",
                                states=(x, y), keys=(k, l), replay=lambda: sys_noblk(k, y, sys),
                            ),
                        )
                    if noblk_k or l == k:
                        continue
                    try:
                        ny = sys_nstrv(k, y, sys)
                    except PikblkCycleError as err:
                        holds.record(False, cycle_cex(holds, y, k, err))
                        continue
                    if k != s and l == s:
                        decreases.record(
                            ord_lt(ny, nx),
                            lambda x=x, y=y, k=k, l=l: Counterexample(
                                "nstrv-decreases",
                                f"sys_nstrv did not drop on the starver's step; chain before: "
                                f"{_describe_chain(k, x, sys)}, after: {_describe_chain(k, y, sys)}",
                                states=(x, y), keys=(k, l),
                                replay=lambda: ord_lt(sys_nstrv(k, y, sys), sys_nstrv(k, x, sys)),
                            ),
                        )
                    holds.record(
                        ord_le(ny, nx),
                        lambda x=x, y=y, k=k, l=l: Counterexample(
                            "nstrv-holds", f"sys_nstrv rose on a step of {l}",
                            states=(x, y), keys=(k, l),
                            replay=lambda: ord_le(sys_nstrv(k, y, sys), sys_nstrv(k, x, sys)),
                        ),
                    )
                    if l != s and ny == nx:
                        persists.record(
                            _same_starver(k, x, y, sys),
                            lambda x=x, y=y, k=k, l=l: Counterexample(
                                "starver-persists", "starver changed while sys_nstrv stayed put",
                                states=(x, y), keys=(k, l),
                                replay=lambda: _same_starver(k, x, y, sys),
                            ),
                        )

    return _finish(report, (noblk_blk, noblk_inv, starver_thm, decreases, holds, persists, length), graph)


def _describe_chain(k: Key, x: SystemState, sys: TaskSystemDef) -> str:
    return " -> ".join(
        f"{e.key}(nsts={e.sum_nsts}" + (", blocked)" if e.blocked else ")") for e in starver_trace(k, x, sys)
    )


def _starver_terminates(k: Key, x: SystemState, sys: TaskSystemDef) -> bool:
    try:
        starver(k, x, sys)
        return True
    except PikblkCycleError:
        return False


def _same_starver(k: Key, x: SystemState, y: SystemState, sys: TaskSystemDef) -> bool:
    try:
        return starver(k, y, sys) == starver(k, x, sys)
    except PikblkCycleError:
        return False


def check_state_invariant(
    graph: StateGraph,
    predicate: Callable[[SystemState], bool],
    name: str = "invariant",
    sys_name: Optional[str] = None,
) -> CheckReport:
    report = _new_report(SUITE_INVARIANTS, graph, sys_name or graph.system)
    tally = TheoremTally(name)
    for x in graph.states:
        tally.record(
            bool(predicate(x)),
            lambda x=x: Counterexample(name, "predicate is false on a reachable state",
                                       states=(x,), replay=lambda: bool(predicate(x))),
        )
    return _finish(report, (tally,), graph)


def check_declared_invariants(graph: StateGraph, sys: TaskSystemDef) -> CheckReport:
    """Every named invariant the system declares, as one report."""
    report = _new_report(SUITE_INVARIANTS, graph, sys.name)
    tallies = []
    for name, predicate in sys.invariants:
        tallies.append(check_state_invariant(graph, predicate, name, sys.name).verdicts[0])
    report.bounded = not graph.complete
    report.verdicts = tallies
    return report


# ---------------------------------------------------------------------------
# Blocking cycles
# ---------------------------------------------------------------------------

def cycle_domain(sys: TaskSystemDef, max_len: int, state_cap: int = DEFAULT_STATE_CAP) -> List[TState]:
    """The system's declared t-state domain, else the t-states of a complete 1-key closure."""
    if sys.t_domain is not None:
        domain = list(sys.t_domain(make_keys(max_len)))
    else:
        if not sys.has_enumerator():
            raise DomainUnavailableError(f"system '{sys.name}' has neither a t-state domain nor an enumerator")
        graph = explore(sys, make_keys(1), state_cap=state_cap)
        if not graph.complete:
            raise DomainUnavailableError(f"1-key closure of '{sys.name}' is {graph.status.value}")
        domain = [x.get("A") for x in graph.states]
    unique = []
    for a in domain:
        if a not in unique:
            unique.append(a)
    return unique


def find_blocking_cycles(
    sys: TaskSystemDef,
    domain: Sequence[TState],
    max_len: int,
) -> List[Tuple[TState, ...]]:
    """
    Simple cycles of the blocking relation over ``domain``, up to ``max_len`` long.

    Each cycle is reported once, rotated to start at its earliest domain element.
    """
    nodes = list(domain)
    adjacency = [
        [j for j, b in enumerate(nodes) if sys.t_blok(a, b)]
        for a in nodes
    ]
    cycles = []

    def extend(start: int, path: List[int], on_path: set) -> None:
        for nxt in adjacency[path[-1]]:
            if nxt == start:
                cycles.append(tuple(nodes[i] for i in path))
            elif nxt > start and nxt not in on_path and len(path) < max_len:
                path.append(nxt)
                on_path.add(nxt)
                extend(start, path, on_path)
                on_path.discard(nxt)
                path.pop()

    for start in range(len(nodes)):
        extend(start, [start], {start})
    logger.info("[cycles] %s: %d cycles up to length %d over %d t-states",
                sys.name, len(cycles), max_len, len(nodes))
    return cycles


def _realizes(x: SystemState, cycle: Sequence[TState]) -> Optional[Tuple[Key, ...]]:
    for assignment in itertools.permutations(x.keys(), len(cycle)):
        if all(x.get(k) == a for k, a in zip(assignment, cycle)):
            return assignment
    return None


def check_cycle_reachability(
    sys: TaskSystemDef,
    cycle: Sequence[TState],
    state_cap: int = DEFAULT_STATE_CAP,
    graph: Optional[StateGraph] = None,
) -> CheckReport:
    """Look for a state of ``graph`` (default: the n-key instance) holding the whole cycle at once."""
    n = len(cycle)
    if graph is None:
        graph = explore(sys, make_keys(n), state_cap=state_cap)
    report = _new_report("cycle-reachability", graph, sys.name)
    tally = TheoremTally("cycle-unreachable")
    for x in graph.states:
        assignment = _realizes(x, cycle)
        tally.record(
            assignment is None,
            lambda x=x, assignment=assignment: Counterexample(
                "cycle-unreachable", "a reachable state realizes the blocking cycle",
                states=(x,), keys=assignment,
                replay=lambda: _realizes(x, cycle) is None,
            ),
        )
    return _finish(report, (tally,), graph)


def blocking_cycle_among_keys(x: SystemState, sys: TaskSystemDef) -> Optional[Tuple[Key, ...]]:
    """A cycle in the key-level blocking graph of ``x``, if any."""
    keys = x.keys()
    edges = {k: [l for l in keys if sys.t_blok(x.get(k), x.get(l))] for k in keys}
    for start in keys:
        stack = [(start, (start,))]
        while stack:
            k, path = stack.pop()
            for l in edges[k]:
                if l == start:
                    return path
                if l > start and l not in path:
                    stack.append((l, path + (l,)))
    return None


def find_reachable_deadlocks(graph: StateGraph, sys: TaskSystemDef) -> CheckReport:
    """Reachable states whose keys block each other in a cycle."""
    report = _new_report("deadlock", graph, sys.name)
    tally = TheoremTally("no-reachable-deadlock")
    for x in graph.states:
        cycle = blocking_cycle_among_keys(x, sys)
        tally.record(
            cycle is None,
            lambda x=x, cycle=cycle: Counterexample(
                "no-reachable-deadlock", "keys block each other in a cycle",
                states=(x,), keys=cycle,
                replay=lambda: blocking_cycle_among_keys(x, sys) is None,
            ),
        )
    return _finish(report, (tally,), graph)


# ---------------------------------------------------------------------------
# Suite selection and parallel execution
# ---------------------------------------------------------------------------

def applicable_suites(sys: TaskSystemDef, spec: Optional[TaskSystemDef]) -> List[str]:
    suites = [SUITE_SYSTEM_PROPS]
    if sys.has_validity():
        suites.append(SUITE_VALID_TASK)
    if spec is not None and sys.has_refinement():
        suites.append(SUITE_MATCH)
    if sys.has_validity():
        suites.append(SUITE_DERIVED)
    if sys.invariants:
        suites.append(SUITE_INVARIANTS)
    return suites


def run_suites(
    graph: StateGraph,
    sys: TaskSystemDef,
    suites: Sequence[str],
    spec: Optional[TaskSystemDef] = None,
    workers: int = WORKERS,
) -> List[CheckReport]:
    """
    Run the named suites concurrently over one graph.

    Reports come back in the order the suites were named.
    """
    runners: Dict[str, Callable[[], CheckReport]] = {
        SUITE_SYSTEM_PROPS: lambda: check_system_props(graph, sys),
        SUITE_VALID_TASK: lambda: check_valid_task_obligations(graph, sys),
        SUITE_MATCH: lambda: check_match_obligations(graph, sys, spec),
        SUITE_DERIVED: lambda: check_derived_system_obligations(graph, sys),
        SUITE_INVARIANTS: lambda: check_declared_invariants(graph, sys),
    }
    unknown = [s for s in suites if s not in runners]
    if unknown:
        raise ValueError(f"unknown suites: {', '.join(unknown)}")
    if SUITE_MATCH in suites and spec is None:
        raise ValueError(f"the {SUITE_MATCH} suite needs a spec system")

    with ThreadPoolExecutor(max_workers=max(1, workers)) as executor:
        futures = [executor.submit(runners[name]) for name in suites]
        return [f.result() for f in futures]


def verdict_agreement(first: Sequence[CheckReport], second: Sequence[CheckReport]) -> Dict[str, bool]:
    """Per suite/theorem: do two runs (e.g. at different key counts) agree on pass vs fail?"""
    def outcomes(reports):
        return {
            f"{r.suite}/{v.theorem}": v.verdict == Verdict.FAIL
            for r in reports for v in r.verdicts
        }

    a, b = outcomes(first), outcomes(second)
    return {name: a[name] == b[name] for name in sorted(a) if name in b}
