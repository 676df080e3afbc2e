"""
Bakery mutual exclusion, implementation level.

Each task runs an 8-location loop. Locations 1-4 pick a ticket (``pos``) one past the
shared maximum, publishing it through a compare-and-swap on the shared-max copies;
location 5 waits for choosing peers, location 6 waits for peers holding a smaller
ticket, location 7 is the critical section.
"""
from dataclasses import dataclass, replace
from typing import Iterator, List, Sequence

from ordinal import make_ord
from system_model import Key, SystemState, TaskSystemDef, ndx
from systems.bakery_spec import BakeSpecTState

NUM_LOCS = 8
WAIT_CHOOSING = 5
WAIT_TICKET = 6
CRITICAL = 7


@dataclass(frozen=True)
class BakeImplTState:
    loc: int = 0
    key: str = "A"
    pos: int = 1
    old_pos: int = 0
    temp: int = 0
    sh_max: int = 1
    choosing: bool = False
    pos_valid: bool = False


def bake_impl_t_initial(k: Key) -> BakeImplTState:
    return BakeImplTState(key=k)


def bake_impl_t_init(a: BakeImplTState, k: Key) -> bool:
    return a == bake_impl_t_initial(k)


def curr_sh_max(x: SystemState) -> int:
    """Current shared maximum: the join of every task's sh-max copy."""
    return max((a.sh_max for a in x.values()), default=1)


def pos_fix(v: int) -> int:
    return v if v >= 1 else 1


def lex_lt(p: int, i: int, q: int, j: int) -> bool:
    return (p, i) < (q, j)


def bake_impl_t_next_enum(a: BakeImplTState, x: SystemState) -> List[BakeImplTState]:
    loc = a.loc
    if loc == 0:
        b = replace(a, loc=1, choosing=True)
    elif loc == 1:
        b = replace(a, loc=2, temp=curr_sh_max(x))
    elif loc == 2:
        b = replace(a, loc=3, pos=a.temp + 1, old_pos=a.pos, pos_valid=True)
    elif loc == 3:
        # compare-and-swap: keep the shared max if someone raised it past our read
        curr = curr_sh_max(x)
        b = replace(a, loc=4, sh_max=curr if curr > a.temp else a.pos)
    elif loc == 4:
        b = replace(a, loc=5, choosing=False)
    elif loc == 5:
        b = replace(a, loc=6)
    elif loc == 6:
        b = replace(a, loc=7)
    elif loc == 7:
        b = replace(a, loc=0, pos_valid=False)
    else:
        return []
    return [b]


def bake_impl_t_next_check(a: BakeImplTState, b: BakeImplTState, x: SystemState) -> bool:
    return b in bake_impl_t_next_enum(a, x)


def bake_impl_t_blok(a: BakeImplTState, b: BakeImplTState) -> bool:
    if a.loc == WAIT_CHOOSING:
        return b.choosing
    if a.loc == WAIT_TICKET:
        return b.pos_valid and lex_lt(b.pos, ndx(b.key), a.pos, ndx(a.key))
    return False


def bake_impl_t_nlock(k: Key, x: SystemState):
    a = x.get(k, bake_impl_t_initial)
    return make_ord(2, 1 if a.choosing else 2, make_ord(1, 1 + a.pos, ndx(a.key)))


def bake_impl_t_noblk(a: BakeImplTState, b: BakeImplTState) -> bool:
    return a.loc not in (WAIT_CHOOSING, WAIT_TICKET) or (not b.choosing and b.pos > a.pos)


def bake_impl_t_nstrv(a: BakeImplTState, b: BakeImplTState) -> int:
    """Steps ``b`` still needs before it can no longer block ``a``."""
    if (b.loc == 2 and b.temp < a.pos) or (b.loc > 2 and b.pos <= a.pos):
        return pos_fix(8 + (NUM_LOCS - b.loc))
    if b.loc >= WAIT_CHOOSING:
        return pos_fix(5 + (NUM_LOCS - b.loc))
    return pos_fix(5 - b.loc)


def bake_impl_t_map(a: BakeImplTState) -> BakeSpecTState:
    if a.loc in (0, 1):
        loc = "idle"
    elif a.loc in (2, 3):
        loc = "loaded"
    elif a.loc in (4, 5, 6):
        loc = "interested"
    else:
        loc = "go"
    pos = a.old_pos if a.loc == 3 else a.pos
    load = 1 + a.temp if a.loc == 2 else a.pos
    return BakeSpecTState(loc=loc, pos=pos, load=load)


_RANKS = {0: 1, 1: 0, 2: 1, 3: 0, 4: 2, 5: 1, 6: 0, 7: 0}


def bake_impl_t_rank(a: BakeImplTState) -> int:
    return _RANKS[a.loc]


def mutual_exclusion(x: SystemState) -> bool:
    return sum(1 for a in x.values() if a.loc == CRITICAL) <= 1


def choosing_matches_loc(x: SystemState) -> bool:
    return all(a.choosing == (1 <= a.loc <= 4) for a in x.values())


# ---------------------------------------------------------------------------
# Canonicalization
# ---------------------------------------------------------------------------

def bake_canon(x: SystemState) -> SystemState:
    """Shift every counter down by the global minimum of pos, old-pos, temp and sh-max."""
    if not len(x):
        return x
    d = min(min(a.pos, a.old_pos, a.temp, a.sh_max) for a in x.values())
    if d == 0:
        return x
    return SystemState.build({
        k: replace(a, pos=a.pos - d, old_pos=a.old_pos - d, temp=a.temp - d, sh_max=a.sh_max - d)
        for k, a in x.items()
    })


def _live_values(x: SystemState, curr: int) -> Iterator[int]:
    yield curr
    for a in x.values():
        if a.loc >= 3:
            yield a.pos
        if a.loc in (2, 3):
            yield a.temp


def bake_reduce(x: SystemState) -> SystemState:
    """
    Normalize counters no transition will read again.

    sh-max copies become the shared maximum; pos at locs 0-2 and old-pos at loc 3 become
    the smallest live value; temp outside locs 2-3 and old-pos outside loc 3 sit one
    below it. Shift-equivariant, so ``bake_canon`` afterwards yields one representative
    per shift class.
    """
    if not len(x):
        return x
    curr = curr_sh_max(x)
    floor = min(_live_values(x, curr))
    reduced = {}
    for k, a in x.items():
        reduced[k] = replace(
            a,
            sh_max=curr,
            pos=a.pos if a.loc >= 3 else floor,
            temp=a.temp if a.loc in (2, 3) else floor - 1,
            old_pos=floor if a.loc == 3 else floor - 1,
        )
    return SystemState.build(reduced)


def bake_impl_canon(x: SystemState) -> SystemState:
    return bake_canon(bake_reduce(x))


def bake_impl_domain(keys: Sequence[Key]) -> List[BakeImplTState]:
    """
    Bounded t-state domain for blocking-cycle search.

    Every location and key, tickets 1..len(keys)+1, flags as they stand on reachable
    states; fields the blocking relation never reads stay at their initial values.
    """
    domain = []
    for k in keys:
        for loc in range(NUM_LOCS):
            for pos in range(1, len(keys) + 2):
                domain.append(BakeImplTState(
                    loc=loc, key=k, pos=pos,
                    choosing=1 <= loc <= 4, pos_valid=loc >= 3,
                ))
    return domain


BAKERY_IMPL = TaskSystemDef(
    name="bakery-impl",
    t_initial=bake_impl_t_initial,
    t_init=bake_impl_t_init,
    t_next_check=bake_impl_t_next_check,
    t_blok=bake_impl_t_blok,
    t_next_enum=bake_impl_t_next_enum,
    t_map=bake_impl_t_map,
    t_rank=bake_impl_t_rank,
    refines="bakery-spec",
    t_noblk=bake_impl_t_noblk,
    t_nstrv=bake_impl_t_nstrv,
    t_nlock=bake_impl_t_nlock,
    canon=bake_impl_canon,
    t_domain=bake_impl_domain,
    invariants=(
        ("mutual-exclusion", mutual_exclusion),
        ("choosing-at-locs-1-4", choosing_matches_loc),
    ),
    tstate_type=BakeImplTState,
    description="Bakery algorithm with a compare-and-swap shared maximum",
)
