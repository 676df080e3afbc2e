"""
Bakery mutual exclusion, specification level.

A task goes idle -> loaded -> interested -> go -> idle. Loading picks any natural
``load`` above every ticket and at least every pending load; the unbounded choice is
why the step relation is the primary interface here.
"""
from dataclasses import dataclass, replace
from typing import List

from system_model import Key, SystemState, TaskSystemDef

SPEC_LOCS = ("idle", "loaded", "interested", "go")


@dataclass(frozen=True)
class BakeSpecTState:
    loc: str = "idle"
    pos: int = 0
    load: int = 0


def bake_spec_t_initial(k: Key) -> BakeSpecTState:
    return BakeSpecTState()


def bake_spec_t_init(a: BakeSpecTState, k: Key) -> bool:
    return a.loc == "idle" and a.pos == 0 and a.load == 0


def max_pos(x: SystemState) -> int:
    return max((a.pos for a in x.values()), default=0)


def max_load(x: SystemState) -> int:
    return max((a.load for a in x.values()), default=0)


def bake_spec_t_next_check(a: BakeSpecTState, b: BakeSpecTState, x: SystemState) -> bool:
    if a.loc == "idle":
        return (
            b.loc == "loaded"
            and b.pos == a.pos
            and isinstance(b.load, int) and b.load >= 0
            and b.load > max_pos(x)
            and b.load >= max_load(x)
        )
    if a.loc == "loaded":
        return b == replace(a, loc="interested", pos=a.load)
    if a.loc == "interested":
        return b == replace(a, loc="go")
    if a.loc == "go":
        return b == replace(a, loc="idle")
    return False


def bake_spec_t_blok(a: BakeSpecTState, b: BakeSpecTState) -> bool:
    return a.loc == "interested" and (
        b.loc == "go" or (b.loc == "interested" and b.pos < a.pos)
    )


def bake_spec_t_next_enum(a: BakeSpecTState, x: SystemState) -> List[BakeSpecTState]:
    """
    Successors up to order type.

    The only unbounded choice is the new load. Every spec predicate compares values, so
    it suffices to try each value from the lower bound to one past the largest value in
    the state; on states produced by ``bake_spec_canon`` (values two apart) this covers
    every relative position the new load can take.
    """
    if a.loc == "idle":
        low = max(max_pos(x) + 1, max_load(x))
        top = max([low - 1] + [v for t in x.values() for v in (t.pos, t.load)])
        return [replace(a, loc="loaded", load=v) for v in range(low, top + 2)]
    if a.loc == "loaded":
        return [replace(a, loc="interested", pos=a.load)]
    if a.loc == "interested":
        return [replace(a, loc="go")]
    if a.loc == "go":
        return [replace(a, loc="idle")]
    return []


def bake_spec_canon(x: SystemState) -> SystemState:
    """Rank every pos/load value densely and spread the ranks onto even numbers."""
    values = sorted({v for a in x.values() for v in (a.pos, a.load)})
    rank = {v: 2 * i for i, v in enumerate(values)}
    return SystemState.build({
        k: replace(a, pos=rank[a.pos], load=rank[a.load]) for k, a in x.items()
    })


def spec_mutual_exclusion(x: SystemState) -> bool:
    return sum(1 for a in x.values() if a.loc == "go") <= 1


BAKERY_SPEC = TaskSystemDef(
    name="bakery-spec",
    t_initial=bake_spec_t_initial,
    t_init=bake_spec_t_init,
    t_next_check=bake_spec_t_next_check,
    t_blok=bake_spec_t_blok,
    t_next_enum=bake_spec_t_next_enum,
    canon=bake_spec_canon,
    invariants=(("mutual-exclusion", spec_mutual_exclusion),),
    tstate_type=BakeSpecTState,
    description="Bakery specification with an unbounded load choice",
)
