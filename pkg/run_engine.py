"""
Fair runs: scheduling, simulation, and checks over finite run prefixes.

A run alternates system states and selectors; a blocked or stutter selection repeats
the state. Infinite-run properties are approximated on prefixes, with lasso detection
where the scheduler is deterministic.
"""
import logging
import random
from dataclasses import dataclass, field
from typing import Callable, Dict, Hashable, List, Optional, Sequence, Tuple

from measures import default_horizon, impl_prog, progress_steps, spec_prog
from ordinal import ord_le, ord_lt
from reports import CheckReport, Counterexample, TheoremTally, TheoremVerdict, Verdict
from system_model import (
    STUTTER,
    Key,
    Selector,
    SystemState,
    TaskSystemDef,
    canonical,
    format_selector,
    initial_state,
    legal_step,
    map_state,
    parse_selector,
    sys_blok,
    sys_init,
    sys_next_check,
    sys_next_enum,
    sys_rank,
)

logger = logging.getLogger(__name__)


@dataclass
class Trace:
    system: str
    keys: Tuple[Key, ...]
    states: List[SystemState]
    picks: List[Selector]
    scheduler: str = "unknown"
    seed: Optional[int] = None
    # scheduler snapshot before each step; only kept in memory for lasso detection
    sched_states: Optional[List[Hashable]] = field(default=None, compare=False, repr=False)

    def __len__(self) -> int:
        return len(self.picks)

    def pick(self, i: int) -> Selector:
        """Selector of step i, the step from state i-1 to state i."""
        return self.picks[i - 1]

    def prefix(self, n: int) -> "Trace":
        return Trace(
            self.system, self.keys, self.states[: n + 1], self.picks[:n], self.scheduler, self.seed,
            self.sched_states[:n] if self.sched_states is not None else None,
        )


# ---------------------------------------------------------------------------
# Schedulers
# ---------------------------------------------------------------------------

class Scheduler:
    """Chooses the selector of each step. ``bound`` is its fairness bound, if known."""

    bound: Optional[int] = None

    def next_pick(self) -> Selector:
        raise NotImplementedError

    def snapshot(self) -> Optional[Hashable]:
        """Hashable scheduler state, or None when the future is not determined by it."""
        return None

    def descriptor(self) -> str:
        raise NotImplementedError


class RoundRobinScheduler(Scheduler):
    def __init__(self, keys: Sequence[Key]):
        self.keys = tuple(sorted(keys))
        self.bound = len(self.keys)
        self.position = 0

    def next_pick(self) -> Selector:
        if not self.keys:
            return STUTTER
        k = self.keys[self.position]
        self.position = (self.position + 1) % len(self.keys)
        return k

    def snapshot(self) -> Hashable:
        return self.position

    def descriptor(self) -> str:
        return "rr"


class AgingRandomScheduler(Scheduler):
    """
    Uniform random picks, forced when a key's deadline leaves no slack.

    Key k must be picked within ``bound`` steps of its last pick. Before each step the
    keys are sorted by deadline; if the j-th earliest deadline is due within j steps,
    the earliest-deadline key is forced.
    """

    def __init__(self, keys: Sequence[Key], bound: int, seed: int):
        self.keys = tuple(sorted(keys))
        if bound < len(self.keys):
            raise ValueError(f"bound {bound} cannot cover {len(self.keys)} keys")
        self.bound = bound
        self.seed = seed
        self.rng = random.Random(seed)
        self.step = 0
        self.last = {k: 0 for k in self.keys}

    def next_pick(self) -> Selector:
        if not self.keys:
            return STUTTER
        self.step += 1
        deadlines = sorted((self.last[k] + self.bound, k) for k in self.keys)
        forced = any(deadline < self.step + j for j, (deadline, _) in enumerate(deadlines))
        k = deadlines[0][1] if forced else self.rng.choice(self.keys)
        self.last[k] = self.step
        return k

    def descriptor(self) -> str:
        return f"aging:{self.bound}"


class ScriptedScheduler(Scheduler):
    """Replays a fixed script of selectors, starting over when it runs out."""

    def __init__(self, script: Sequence[Selector], bound: Optional[int] = None):
        if not script:
            raise ValueError("empty scheduler script")
        self.script = list(script)
        self.bound = bound
        self.position = 0

    @classmethod
    def from_text(cls, text: str) -> "ScriptedScheduler":
        return cls([parse_selector(token) for token in text.replace(",", " ").split()])

    def next_pick(self) -> Selector:
        sel = self.script[self.position]
        self.position = (self.position + 1) % len(self.script)
        return sel

    def snapshot(self) -> Hashable:
        return self.position

    def descriptor(self) -> str:
        return "script:" + ",".join(format_selector(s) for s in self.script)


# ---------------------------------------------------------------------------
# Simulation and run checks
# ---------------------------------------------------------------------------

def simulate(
    sys: TaskSystemDef,
    keys: Sequence[Key],
    sched: Scheduler,
    steps: int,
    seed: Optional[int] = None,
) -> Trace:
    """
    Run ``steps`` steps from the initial state.

    Blocked or stutter selections repeat the state; otherwise one successor is taken,
    chosen uniformly (seeded) when there are several.
    """
    sys.require_enumerator()
    keys = tuple(sorted(keys))
    rng = random.Random(f"{seed}:successors")
    x = initial_state(sys, keys)
    states, picks, snapshots = [x], [], []
    for _ in range(steps):
        snapshots.append(sched.snapshot())
        sel = sched.next_pick()
        if sel is STUTTER or sys_blok(x, sel, sys):
            y = x
        else:
            successors = sys_next_enum(x, sel, sys)
            if not successors:
                y = x
            elif len(successors) == 1:
                y = successors[0]
            else:
                y = rng.choice(successors)
        states.append(y)
        picks.append(sel)
        x = y
    logger.info("[simulate] %s keys=%s steps=%d scheduler=%s", sys.name, ",".join(keys), steps, sched.descriptor())
    return Trace(sys.name, keys, states, picks, sched.descriptor(), seed, snapshots)


def check_run_legal(trace: Trace, sys: TaskSystemDef) -> CheckReport:
    report = CheckReport(suite="run-legal", system=sys.name, keys=trace.keys, run_level=True,
                         stats={"steps": len(trace)})
    init = TheoremTally("run-init")
    step = TheoremTally("run-step")
    x0 = trace.states[0]
    init.record(
        sys_init(x0, sys, trace.keys),
        lambda: Counterexample("run-init", "first state is not initial", states=(x0,), index=0,
                               replay=lambda: sys_init(x0, sys, trace.keys)),
    )
    for i in range(1, len(trace.states)):
        x, y, sel = trace.states[i - 1], trace.states[i], trace.pick(i)
        step.record(
            legal_step(x, y, sel, sys),
            lambda x=x, y=y, sel=sel, i=i: Counterexample(
                "run-step", f"step {i} with selector {format_selector(sel)} is not legal",
                states=(x, y), keys=(sel,) if sel is not STUTTER else (), index=i,
                replay=lambda: legal_step(x, y, sel, sys),
            ),
        )
    report.verdicts = [init.verdict(False), step.verdict(False)]
    return report


@dataclass
class FairWitness:
    """fair(k, i) for every key and index, or the first place the bound breaks."""

    bound: int
    table: Dict[Key, List[int]] = field(default_factory=dict)
    violation: Optional[Tuple[Key, int]] = None

    @property
    def ok(self) -> bool:
        return self.violation is None


def derive_fair_witness(trace: Trace, bound: int) -> FairWitness:
    """fair(k, i) = bound - (steps since k was last picked); must stay a natural."""
    witness = FairWitness(bound)
    last = {k: 0 for k in trace.keys}
    for k in trace.keys:
        witness.table[k] = [bound]
    for i in range(1, len(trace.states)):
        sel = trace.pick(i)
        for k in trace.keys:
            if sel == k:
                last[k] = i
            value = bound - (i - last[k])
            if value < 0:
                witness.violation = (k, i)
                return witness
            witness.table[k].append(value)
    return witness


def check_fair_witness(trace: Trace, bound: int) -> CheckReport:
    witness = derive_fair_witness(trace, bound)
    report = CheckReport(suite="fair-witness", system=trace.system, keys=trace.keys, run_level=True,
                         stats={"steps": len(trace), "bound": bound})
    if witness.ok:
        report.verdicts.append(TheoremVerdict("pick-fair", Verdict.PASS, len(trace)))
    else:
        k, i = witness.violation
        report.verdicts.append(TheoremVerdict(
            "pick-fair", Verdict.FAIL, i,
            Counterexample("pick-fair", f"key {k} unpicked for more than {bound} steps", keys=(k,), index=i,
                           replay=lambda: derive_fair_witness(trace.prefix(i), bound).ok),
        ))
    return report


def map_trace(trace: Trace, impl_sys: TaskSystemDef) -> Trace:
    """Pointwise image under t_map; steps that leave the image unchanged become stutters."""
    mapped = [map_state(x, impl_sys) for x in trace.states]
    picks = [
        STUTTER if mapped[i] == mapped[i - 1] else trace.pick(i)
        for i in range(1, len(mapped))
    ]
    return Trace(f"{impl_sys.name}:mapped", trace.keys, mapped, picks, trace.scheduler, trace.seed)


def check_refinement_trace(trace: Trace, impl_sys: TaskSystemDef, spec_sys: TaskSystemDef) -> CheckReport:
    """
    The mapped run is a legal spec run and every stutter stretch is finite.

    Finiteness is certified by rank: a map-stuttering step of key k that changes the
    implementation state lowers k's rank, and steps of other keys never raise it.
    """
    impl_sys.require_refinement()
    spec_trace = map_trace(trace, impl_sys)
    report = CheckReport(suite="refinement", system=impl_sys.name, keys=trace.keys, run_level=True)
    report.notes.append(f"spec: {spec_sys.name}")
    spec_step = TheoremTally("spec-step")
    spec_unblocked = TheoremTally("spec-unblocked")
    decrease = TheoremTally("stutter-rank-decreases")
    stable = TheoremTally("stutter-rank-stable")

    # only the steps of the mapped run are obligations; its first state is informational
    if not sys_init(spec_trace.states[0], spec_sys, trace.keys):
        report.notes.append("mapped first state is not a spec initial state")
    own_stutters = {k: 0 for k in trace.keys}
    longest = {k: 0 for k in trace.keys}
    for i in range(1, len(trace.states)):
        x, y, sel = trace.states[i - 1], trace.states[i], trace.pick(i)
        mx, my, spec_sel = spec_trace.states[i - 1], spec_trace.states[i], spec_trace.pick(i)
        if spec_sel is not STUTTER:
            spec_step.record(
                sys_next_check(mx, my, spec_sel, spec_sys),
                lambda mx=mx, my=my, k=spec_sel, i=i: Counterexample(
                    "spec-step", "mapped step is not a spec step", states=(mx, my), keys=(k,), index=i,
                    replay=lambda: sys_next_check(mx, my, k, spec_sys),
                ),
            )
            spec_unblocked.record(
                not sys_blok(mx, spec_sel, spec_sys),
                lambda mx=mx, k=spec_sel, i=i: Counterexample(
                    "spec-unblocked", "spec blocks the mapped key", states=(mx,), keys=(k,), index=i,
                    replay=lambda: not sys_blok(mx, k, spec_sys),
                ),
            )
            own_stutters[spec_sel] = 0
            continue
        if sel is STUTTER or x == y:
            continue
        decrease.record(
            ord_lt(sys_rank(sel, y, impl_sys), sys_rank(sel, x, impl_sys)),
            lambda x=x, y=y, k=sel, i=i: Counterexample(
                "stutter-rank-decreases", "rank did not drop on a map-stuttering step",
                states=(x, y), keys=(k,), index=i,
                replay=lambda: ord_lt(sys_rank(k, y, impl_sys), sys_rank(k, x, impl_sys)),
            ),
        )
        own_stutters[sel] += 1
        longest[sel] = max(longest[sel], own_stutters[sel])
        for j in trace.keys:
            if j == sel:
                continue
            stable.record(
                ord_le(sys_rank(j, y, impl_sys), sys_rank(j, x, impl_sys)),
                lambda x=x, y=y, j=j, k=sel, i=i: Counterexample(
                    "stutter-rank-stable", f"rank of {j} rose on a step of {k}",
                    states=(x, y), keys=(j, k), index=i,
                    replay=lambda: ord_le(sys_rank(j, y, impl_sys), sys_rank(j, x, impl_sys)),
                ),
            )

    report.stats = {"steps": len(trace), "spec_steps": sum(1 for p in spec_trace.picks if p is not STUTTER)}
    report.stats.update({f"longest_stutter_{k}": n for k, n in longest.items()})
    report.verdicts = [t.verdict(False) for t in (spec_step, spec_unblocked, decrease, stable)]
    return report


# ---------------------------------------------------------------------------
# Starvation
# ---------------------------------------------------------------------------

@dataclass
class KeyProgress:
    key: Key
    progress_steps: int
    max_gap: int
    horizon_exceeded: bool = False
    lasso: Optional[Tuple[int, int]] = None
    # map-changing progress; None when the system has no refinement bundle
    spec_progress_steps: Optional[int] = None
    spec_horizon_exceeded: bool = False

    @property
    def flagged(self) -> bool:
        return self.horizon_exceeded or self.spec_horizon_exceeded or self.lasso is not None


@dataclass
class StarvationFindings:
    horizon: int
    per_key: Dict[Key, KeyProgress] = field(default_factory=dict)

    def flagged(self) -> List[Key]:
        return [k for k, p in self.per_key.items() if p.flagged]

    def confirmed(self) -> List[Key]:
        return [k for k, p in self.per_key.items() if p.lasso is not None]

    def to_report(self, trace: Trace) -> CheckReport:
        report = CheckReport(suite="starvation", system=trace.system, keys=trace.keys, run_level=True,
                             stats={"steps": len(trace), "horizon": self.horizon})
        for k, p in sorted(self.per_key.items()):
            report.stats[f"progress_{k}"] = p.progress_steps
            report.stats[f"max_gap_{k}"] = p.max_gap
            if p.spec_progress_steps is not None:
                report.stats[f"spec_progress_{k}"] = p.spec_progress_steps
            if p.lasso is not None:
                note = f"confirmed lasso between indices {p.lasso[0]} and {p.lasso[1]}"
            elif p.horizon_exceeded:
                note = f"no progress within {self.horizon} steps (potential starvation)"
            elif p.spec_horizon_exceeded:
                note = f"no map-changing progress within {self.horizon} steps (potential endless stutter)"
            else:
                report.verdicts.append(TheoremVerdict(f"progress-{k}", Verdict.PASS, len(trace)))
                continue
            report.verdicts.append(TheoremVerdict(f"progress-{k}", Verdict.FAIL, len(trace), note=note))
        return report


def _find_lasso(
    k: Key,
    trace: Trace,
    canon_states: Sequence[SystemState],
    progress: Sequence[int],
) -> Optional[Tuple[int, int]]:
    if trace.sched_states is None:
        return None
    progress_at = set(progress)
    seen: Dict[Tuple[SystemState, Hashable], int] = {}
    for i in range(len(trace.sched_states)):
        if i in progress_at:
            seen.clear()
        snapshot = trace.sched_states[i]
        if snapshot is None:
            return None
        marker = (canon_states[i], snapshot)
        if marker in seen:
            return (seen[marker], i)
        seen[marker] = i
    return None


def _horizon_exceeded(starts: Sequence[int], end: int, horizon: int, prog: Callable[[int], Optional[int]]) -> bool:
    """Some progress point leaves a whole horizon window inside the prefix without progress."""
    return any(a + horizon < end and prog(a) is None for a in starts)


def detect_starvation(trace: Trace, sys: TaskSystemDef, horizon: Optional[int] = None) -> StarvationFindings:
    """
    Per key: progress counts, longest gap between progress steps, horizon flags, lassos.

    A key is flagged when ``impl_prog`` (or, for systems with a refinement bundle,
    ``spec_prog``) finds no progress within the horizon. A lasso is a repeated
    (canonical state, scheduler state) pair with no progress of the key in between;
    with a deterministic scheduler and system the run loops there forever.
    """
    canon_states = [canonical(x, sys) for x in trace.states]
    if horizon is None:
        distinct = len(set(canon_states))
        horizon = default_horizon(len(trace.keys), distinct)
    mapped = [map_state(x, sys) for x in trace.states] if sys.has_refinement() else None
    findings = StarvationFindings(horizon)
    end = len(trace.states) - 1
    for k in trace.keys:
        progress = progress_steps(k, trace.states, trace.picks)
        marks = [0] + progress + [end]
        max_gap = max((b - a for a, b in zip(marks, marks[1:])), default=0)
        p = KeyProgress(k, len(progress), max_gap)
        p.horizon_exceeded = _horizon_exceeded(
            [0] + progress, end, horizon,
            lambda a: impl_prog(k, a, trace.states, trace.picks, horizon),
        )
        if mapped is not None:
            spec_progress = progress_steps(k, mapped, trace.picks)
            p.spec_progress_steps = len(spec_progress)
            p.spec_horizon_exceeded = _horizon_exceeded(
                [0] + spec_progress, end, horizon,
                lambda a: spec_prog(k, a, trace.states, trace.picks, sys, horizon, mapped),
            )
        p.lasso = _find_lasso(k, trace, canon_states, progress)
        findings.per_key[k] = p
        if p.flagged:
            logger.warning("[starvation] %s: key %s flagged (max gap %d, lasso %s)", sys.name, k, max_gap, p.lasso)
    return findings
