"""A three-location relay whose steps ignore the rest of the system."""
from dataclasses import dataclass
from typing import List, Sequence

from system_model import Key, SystemState, TaskSystemDef

RELAY_LOCS = 3


@dataclass(frozen=True)
class RelayTState:
    loc: int = 0


def relay_t_initial(k: Key) -> RelayTState:
    return RelayTState()


def relay_t_init(a: RelayTState, k: Key) -> bool:
    return a.loc == 0


def relay_t_next_enum(a: RelayTState, x: SystemState) -> List[RelayTState]:
    return [RelayTState((a.loc + 1) % RELAY_LOCS)]


def relay_t_next_check(a: RelayTState, b: RelayTState, x: SystemState) -> bool:
    return b.loc == (a.loc + 1) % RELAY_LOCS


def relay_t_blok(a: RelayTState, b: RelayTState) -> bool:
    # location 1 waits while anyone holds location 2
    return a.loc == 1 and b.loc == 2


def relay_domain(keys: Sequence[Key]) -> List[RelayTState]:
    return [RelayTState(loc) for loc in range(RELAY_LOCS)]


def at_most_one_holder(x: SystemState) -> bool:
    return sum(1 for a in x.values() if a.loc == 2) <= 1


RELAY = TaskSystemDef(
    name="relay",
    t_initial=relay_t_initial,
    t_init=relay_t_init,
    t_next_check=relay_t_next_check,
    t_blok=relay_t_blok,
    t_next_enum=relay_t_next_enum,
    t_domain=relay_domain,
    state_independent=True,
    invariants=(("at-most-one-holder", at_most_one_holder),),
    tstate_type=RelayTState,
    description="state-independent 3-location relay; location 1 waits behind location 2",
)
