"""
Progress measures built from the validity bundle.

A blocked key follows its chain of blockers (``pikblk``) to an unblocked ``starver``;
the summed per-key starvation counts along that chain, packed first-aligned into an
ordinal, must drop whenever the starver moves.
"""
import logging
from dataclasses import dataclass
from typing import List, Optional, Sequence

from ordinal import Ord, nats_to_ord
from system_model import Key, Selector, SystemState, TaskSystemDef, map_state, sys_blok, t_state

logger = logging.getLogger(__name__)


class NotBlockedError(ValueError):
    """Raised when ``pikblk`` is asked about a key nobody blocks."""


class PikblkCycleError(RuntimeError):
    """Raised when the chain of blockers revisits a key."""

    def __init__(self, chain: Sequence[Key]):
        self.chain = tuple(chain)
        super().__init__(f"pikblk chain revisits a key: {' -> '.join(self.chain)}")


@dataclass(frozen=True)
class StarverTraceEntry:
    key: Key
    sum_nsts: int
    blocked: bool


def sys_noblk(k: Key, x: SystemState, sys: TaskSystemDef) -> bool:
    sys.require_validity()
    a = t_state(x, k, sys)
    return all(sys.t_noblk(a, x.get(l)) for l in x.keys())


def pikblk(k: Key, x: SystemState, sys: TaskSystemDef) -> Key:
    """Least key blocking ``k`` in ``x``."""
    a = t_state(x, k, sys)
    for l in sorted(x.keys()):
        if sys.t_blok(a, x.get(l)):
            return l
    raise NotBlockedError(f"key {k} is not blocked")


def starver_chain(k: Key, x: SystemState, sys: TaskSystemDef) -> List[Key]:
    """Keys visited from ``k`` along ``pikblk`` up to and including the starver."""
    chain = [k]
    seen = {k}
    while sys_blok(x, chain[-1], sys):
        nxt = pikblk(chain[-1], x, sys)
        if nxt in seen:
            raise PikblkCycleError(chain + [nxt])
        chain.append(nxt)
        seen.add(nxt)
    return chain


def starver(k: Key, x: SystemState, sys: TaskSystemDef) -> Key:
    return starver_chain(k, x, sys)[-1]


def sum_nsts(k: Key, x: SystemState, sys: TaskSystemDef) -> int:
    sys.require_validity()
    a = t_state(x, k, sys)
    total = 1
    for l in x.keys():
        b = x.get(l)
        if not sys.t_noblk(a, b):
            total += sys.t_nstrv(a, b)
    return total


def nstrvs_list(k: Key, x: SystemState, sys: TaskSystemDef) -> List[int]:
    return [sum_nsts(l, x, sys) for l in starver_chain(k, x, sys)]


def sys_nstrv(k: Key, x: SystemState, sys: TaskSystemDef) -> Ord:
    return nats_to_ord(len(x.keys()), nstrvs_list(k, x, sys))


def starver_trace(k: Key, x: SystemState, sys: TaskSystemDef) -> List[StarverTraceEntry]:
    return [
        StarverTraceEntry(l, sum_nsts(l, x, sys), sys_blok(x, l, sys))
        for l in starver_chain(k, x, sys)
    ]


# ---------------------------------------------------------------------------
# Run-prefix progress measures
# ---------------------------------------------------------------------------

def progress_steps(
    k: Key,
    states: Sequence[SystemState],
    picks: Sequence[Selector],
) -> List[int]:
    """Indices j such that step j (from state j-1) picks ``k`` and changes the state."""
    return [
        j for j in range(1, len(states))
        if picks[j - 1] == k and states[j] != states[j - 1]
    ]


def impl_prog(
    k: Key,
    i: int,
    states: Sequence[SystemState],
    picks: Sequence[Selector],
    horizon: Optional[int] = None,
) -> Optional[int]:
    """
    Least d >= 0 such that step i+d+1 picks ``k`` and changes the state.

    Returns 0 for keys outside the state's key set, and None when no such step occurs
    within the horizon or before the prefix ends.
    """
    if not states or k not in states[0].keys():
        return 0
    d = 0
    while True:
        j = i + d + 1
        if j >= len(states) or (horizon is not None and d >= horizon):
            return None
        if picks[j - 1] == k and states[j] != states[j - 1]:
            return d
        d += 1


def spec_prog(
    k: Key,
    i: int,
    states: Sequence[SystemState],
    picks: Sequence[Selector],
    impl_sys: TaskSystemDef,
    horizon: Optional[int] = None,
    mapped: Optional[Sequence[SystemState]] = None,
) -> Optional[int]:
    """
    ``impl_prog`` over the mapped run, where only map-changing steps count.

    ``mapped`` may carry the already mapped states of ``states``.
    """
    if mapped is None:
        mapped = [map_state(x, impl_sys) for x in states]
    return impl_prog(k, i, mapped, picks, horizon)


def default_horizon(num_keys: int, distinct_states: int) -> int:
    return 10 * max(num_keys, 1) * max(distinct_states, 1)
