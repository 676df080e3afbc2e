"""Deliberately broken systems, one per checker they should trip."""
from dataclasses import replace
from typing import List

from system_model import Key, SystemState
from systems.bakery_impl import BAKERY_IMPL, WAIT_CHOOSING, WAIT_TICKET, BakeImplTState
from systems.relay import RELAY, RelayTState, relay_t_next_enum


def noblk_ignoring_choosing(a: BakeImplTState, b: BakeImplTState) -> bool:
    return a.loc not in (WAIT_CHOOSING, WAIT_TICKET) or b.pos > a.pos


def zero_rank(a: BakeImplTState) -> int:
    return 0


def symmetric_blok(a: RelayTState, b: RelayTState) -> bool:
    return (a.loc, b.loc) in ((1, 2), (2, 1))


def constant_nlock(k: Key, x: SystemState) -> int:
    return 0


def noblk_outside_wait(a: RelayTState, b: RelayTState) -> bool:
    return a.loc not in (1, 2)


def constant_nstrv(a: RelayTState, b: RelayTState) -> int:
    return 1


def next_with_self_loop(a: RelayTState, x: SystemState) -> List[RelayTState]:
    return [a] + relay_t_next_enum(a, x)


def check_with_self_loop(a: RelayTState, b: RelayTState, x: SystemState) -> bool:
    return b in next_with_self_loop(a, x)


BAKERY_IMPL_M1 = replace(
    BAKERY_IMPL,
    name="bakery-impl-m1",
    t_noblk=noblk_ignoring_choosing,
    description="bakery-impl whose t_noblk forgets the 'not choosing' conjunct (valid-task and derived-system fail)",
)

BAKERY_IMPL_M2 = replace(
    BAKERY_IMPL,
    name="bakery-impl-m2",
    t_rank=zero_rank,
    description="bakery-impl with a constant zero rank",
)

RELAY_M3 = replace(
    RELAY,
    name="relay-m3",
    t_blok=symmetric_blok,
    t_noblk=noblk_outside_wait,
    t_nstrv=constant_nstrv,
    t_nlock=constant_nlock,
    invariants=(),
    description="relay whose locations 1 and 2 block each other",
)

RELAY_SELF_LOOP = replace(
    RELAY,
    name="relay-selfloop",
    t_next_enum=next_with_self_loop,
    t_next_check=check_with_self_loop,
    description="relay whose successor set also contains the current t-state",
)
