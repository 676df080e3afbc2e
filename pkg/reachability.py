"""
Explicit-state exploration of finite instances.

Breadth-first closure from the initial state under legal per-key steps: a key blocked
in a state only stutters there, so it contributes no edge. Successors are canonicalized
(optionally) and deduplicated; the resulting ``StateGraph`` is what every checker reads.
"""
import itertools
import logging
from collections import deque
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, List, Optional, Sequence, Tuple

from tqdm import tqdm

from config import DEFAULT_STATE_CAP
from reports import CheckReport, Counterexample, TheoremVerdict, Verdict
from system_model import (
    Key,
    SystemState,
    TaskSystemDef,
    MissingBundleError,
    canonical,
    initial_state,
    make_keys,
    sys_blok,
    sys_next_enum,
)

logger = logging.getLogger(__name__)


class ExplorationStatus(str, Enum):
    COMPLETE = "complete"
    TRUNCATED_BY_DEPTH = "truncated-by-depth"
    TRUNCATED_BY_CAP = "truncated-by-cap"


@dataclass
class StateGraph:
    system: str
    keys: Tuple[Key, ...]
    states: List[SystemState] = field(default_factory=list)
    edges: List[Tuple[int, Key, int]] = field(default_factory=list)
    initial: List[int] = field(default_factory=list)
    status: ExplorationStatus = ExplorationStatus.COMPLETE
    canonicalized: bool = False
    depth_reached: int = 0
    index: Dict[SystemState, int] = field(default_factory=dict, repr=False)

    @property
    def complete(self) -> bool:
        return self.status == ExplorationStatus.COMPLETE

    def add_state(self, x: SystemState) -> int:
        self.index[x] = len(self.states)
        self.states.append(x)
        return self.index[x]

    def state_id(self, x: SystemState) -> Optional[int]:
        return self.index.get(x)

    def __contains__(self, x: SystemState) -> bool:
        return x in self.index

    def successors(self, sid: int) -> List[Tuple[Key, int]]:
        return [(k, dst) for src, k, dst in self.edges if src == sid]


def explore(
    sys: TaskSystemDef,
    keys: Sequence[Key],
    depth: Optional[int] = None,
    state_cap: int = DEFAULT_STATE_CAP,
    use_canon: bool = False,
    progress: bool = False,
) -> StateGraph:
    """
    Breadth-first closure from the initial state.

    Args:
        sys: system with a successor enumerator
        keys: key set of the instance
        depth: stop expanding states at this distance (None for unlimited)
        state_cap: stop adding states beyond this many
        use_canon: canonicalize every stored state with ``sys.canon``
        progress: show a progress bar

    Returns:
        StateGraph whose status says whether closure was reached
    """
    sys.require_enumerator()
    if use_canon and sys.canon is None:
        raise MissingBundleError(f"system '{sys.name}' has no canonicalizer")
    keys = tuple(sorted(keys))
    normalize = (lambda x: canonical(x, sys)) if use_canon else (lambda x: x)

    graph = StateGraph(system=sys.name, keys=keys, canonicalized=use_canon)
    graph.initial.append(graph.add_state(normalize(initial_state(sys, keys))))
    frontier = deque([(graph.initial[0], 0)])
    truncated_by_depth = False

    with tqdm(desc=f"explore {sys.name}", unit="states", disable=not progress) as bar:
        while frontier:
            sid, dist = frontier.popleft()
            bar.update(1)
            if depth is not None and dist >= depth:
                truncated_by_depth = True
                continue
            x = graph.states[sid]
            for k in keys:
                if sys_blok(x, k, sys):
                    continue
                for y in sys_next_enum(x, k, sys):
                    y = normalize(y)
                    dst = graph.state_id(y)
                    if dst is None:
                        if len(graph.states) >= state_cap:
                            graph.status = ExplorationStatus.TRUNCATED_BY_CAP
                            continue
                        dst = graph.add_state(y)
                        frontier.append((dst, dist + 1))
                        graph.depth_reached = max(graph.depth_reached, dist + 1)
                    graph.edges.append((sid, k, dst))

    if graph.status == ExplorationStatus.COMPLETE and truncated_by_depth:
        graph.status = ExplorationStatus.TRUNCATED_BY_DEPTH
    logger.info(
        "[explore] %s keys=%s states=%d edges=%d status=%s",
        sys.name, ",".join(keys), len(graph.states), len(graph.edges), graph.status.value,
    )
    return graph


def _project(x: SystemState, kept: Sequence[Key], sys: TaskSystemDef) -> SystemState:
    renamed = make_keys(len(kept))
    return SystemState.build({new: x.get(old) for new, old in zip(renamed, kept)})


def substate_closure_check(
    sys: TaskSystemDef,
    n: int,
    state_cap: int = DEFAULT_STATE_CAP,
) -> CheckReport:
    """
    Every (n-1)-key projection of a reachable n-key state is reachable with n-1 keys.

    Only meaningful for systems whose steps ignore the rest of the state.
    """
    keys = make_keys(n)
    report = CheckReport(suite="substate-closure", system=sys.name, keys=keys)
    theorem = "substate-reachable"
    if not sys.state_independent:
        report.verdicts.append(TheoremVerdict(
            theorem, Verdict.INAPPLICABLE, note="steps depend on other tasks' t-states",
        ))
        return report
    if n < 2:
        raise ValueError(f"substate closure needs at least 2 keys, got {n}")

    use_canon = sys.canon is not None
    big = explore(sys, keys, state_cap=state_cap, use_canon=use_canon)
    small = explore(sys, make_keys(n - 1), state_cap=state_cap, use_canon=use_canon)
    report.stats = {"states": len(big.states), "substates": len(small.states)}
    if not (big.complete and small.complete):
        report.verdicts.append(TheoremVerdict(
            theorem, Verdict.INAPPLICABLE, note="state graphs are not complete",
        ))
        return report

    checked = 0
    for x in big.states:
        for kept in itertools.combinations(keys, n - 1):
            checked += 1
            sub = canonical(_project(x, kept, sys), sys)
            if sub not in small:
                dropped = tuple(k for k in keys if k not in kept)
                cex = Counterexample(
                    theorem, f"dropping {dropped[0]} gives a state unreachable with {n - 1} keys",
                    states=(x, sub), keys=dropped,
                    replay=lambda sub=sub: sub in small,
                )
                report.verdicts.append(TheoremVerdict(theorem, Verdict.FAIL, checked, cex))
                return report
    report.verdicts.append(TheoremVerdict(theorem, Verdict.PASS, checked))
    return report
