"""
Task systems: per-task definitions lifted to system-level semantics.

A system state maps every key of a fixed key set to a task state (t-state). A
``TaskSystemDef`` bundles the task-level relations; the functions here derive the
system-level init, next, blocking and step relations from them.
"""
import dataclasses
import logging
import string
import typing
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, Iterable, Iterator, List, Optional, Sequence, Tuple

logger = logging.getLogger(__name__)

Key = str
Selector = Optional[Key]
TState = Any

STUTTER: Selector = None
STUTTER_TOKEN = "-"

_KEY_ALPHABET = string.ascii_uppercase


class SystemDefinitionError(ValueError):
    """Raised when a system lacks something an operation needs."""


class MissingBundleError(SystemDefinitionError):
    """Raised when an optional refinement or validity bundle is absent."""


def make_keys(n: int) -> Tuple[Key, ...]:
    """The key set of an ``n``-key instance: ``A``, ``B``, ... in sorted order."""
    if n < 0 or n > len(_KEY_ALPHABET):
        raise ValueError(f"key count must be between 0 and {len(_KEY_ALPHABET)}, got {n}")
    return tuple(_KEY_ALPHABET[:n])


def ndx(k: Key) -> int:
    """0-based position of ``k`` in the sorted key order."""
    if len(k) != 1 or k not in _KEY_ALPHABET:
        raise ValueError(f"not a key: {k!r}")
    return _KEY_ALPHABET.index(k)


def format_selector(sel: Selector) -> str:
    return STUTTER_TOKEN if sel is STUTTER else sel


def parse_selector(token: str) -> Selector:
    return STUTTER if token == STUTTER_TOKEN else token


@dataclass(frozen=True)
class SystemState:
    """
    Immutable map from keys to t-states.

    A key without an entry reads as ``default_factory(key)``, normally the system's
    declared initial t-state. The factory takes no part in equality or hashing.
    """

    entries: Tuple[Tuple[Key, TState], ...]
    default_factory: Optional[Callable[[Key], TState]] = field(
        default=None, compare=False, hash=False, repr=False,
    )

    @classmethod
    def build(
        cls,
        mapping: Dict[Key, TState],
        default_factory: Optional[Callable[[Key], TState]] = None,
    ) -> "SystemState":
        return cls(tuple(sorted(mapping.items())), default_factory)

    def get(self, k: Key, fallback: Optional[Callable[[Key], TState]] = None) -> TState:
        """Entry of ``k``; else the state's default factory, else ``fallback``, else None."""
        for key, value in self.entries:
            if key == k:
                return value
        factory = self.default_factory or fallback
        return factory(k) if factory is not None else None

    def set(self, k: Key, value: TState) -> "SystemState":
        updated = dict(self.entries)
        updated[k] = value
        return SystemState.build(updated, self.default_factory)

    def keys(self) -> Tuple[Key, ...]:
        return tuple(k for k, _ in self.entries)

    def values(self) -> Tuple[TState, ...]:
        return tuple(v for _, v in self.entries)

    def items(self) -> Tuple[Tuple[Key, TState], ...]:
        return self.entries

    def __iter__(self) -> Iterator[Key]:
        return iter(self.keys())

    def __len__(self) -> int:
        return len(self.entries)


@dataclass(frozen=True)
class TaskSystemDef:
    """
    Task-level definition of one system.

    ``t_initial(k)`` builds the declared initial t-state of key ``k``; it is also the
    default for keys missing from a state. Everything after ``t_blok`` is optional.
    """

    name: str
    t_initial: Callable[[Key], TState]
    t_init: Callable[[TState, Key], bool]
    t_next_check: Callable[[TState, TState, SystemState], bool]
    t_blok: Callable[[TState, TState], bool]
    t_next_enum: Optional[Callable[[TState, SystemState], Iterable[TState]]] = None
    # refinement bundle
    t_map: Optional[Callable[[TState], TState]] = None
    t_rank: Optional[Callable[[TState], Any]] = None
    refines: Optional[str] = None
    # validity bundle
    t_noblk: Optional[Callable[[TState, TState], bool]] = None
    t_nstrv: Optional[Callable[[TState, TState], int]] = None
    t_nlock: Optional[Callable[[Key, SystemState], Any]] = None
    canon: Optional[Callable[[SystemState], SystemState]] = None
    t_domain: Optional[Callable[[Sequence[Key]], Iterable[TState]]] = None
    state_independent: bool = False
    invariants: Tuple[Tuple[str, Callable[[SystemState], bool]], ...] = ()
    tstate_type: Optional[type] = None
    description: str = ""

    def has_enumerator(self) -> bool:
        return self.t_next_enum is not None

    def has_refinement(self) -> bool:
        return self.t_map is not None and self.t_rank is not None

    def has_validity(self) -> bool:
        return self.t_noblk is not None and self.t_nstrv is not None and self.t_nlock is not None

    def require_enumerator(self) -> None:
        if not self.has_enumerator():
            raise MissingBundleError(f"system '{self.name}' has no successor enumerator")

    def require_refinement(self) -> None:
        if not self.has_refinement():
            raise MissingBundleError(f"system '{self.name}' has no refinement bundle (t_map, t_rank)")

    def require_validity(self) -> None:
        if not self.has_validity():
            raise MissingBundleError(f"system '{self.name}' has no validity bundle (t_noblk, t_nstrv, t_nlock)")


def initial_state(sys: TaskSystemDef, keys: Sequence[Key]) -> SystemState:
    """Every key at its declared initial t-state; keys added later default to it too."""
    return SystemState.build({k: sys.t_initial(k) for k in keys}, sys.t_initial)


def t_state(x: SystemState, k: Key, sys: TaskSystemDef) -> TState:
    """The t-state of ``k`` in ``x``, reading a missing key as its initial t-state."""
    return x.get(k, sys.t_initial)


def sys_init(x: SystemState, sys: TaskSystemDef, keys: Sequence[Key]) -> bool:
    return all(sys.t_init(t_state(x, k, sys), k) for k in keys)


def sys_next_check(x: SystemState, y: SystemState, k: Key, sys: TaskSystemDef) -> bool:
    if x.keys() != y.keys():
        return False
    if any(l != k and x.get(l) != y.get(l) for l in x.keys()):
        return False
    return bool(sys.t_next_check(t_state(x, k, sys), t_state(y, k, sys), x))


def sys_blok(x: SystemState, k: Key, sys: TaskSystemDef) -> bool:
    """True iff some key, ``k`` included, blocks ``k`` in ``x``."""
    a = t_state(x, k, sys)
    return any(sys.t_blok(a, x.get(l)) for l in x.keys())


def legal_step(x: SystemState, y: SystemState, sel: Selector, sys: TaskSystemDef) -> bool:
    if sel is STUTTER or sys_blok(x, sel, sys):
        return x == y
    return sys_next_check(x, y, sel, sys)


def sys_next_enum(x: SystemState, k: Key, sys: TaskSystemDef) -> List[SystemState]:
    """All system successors of ``x`` by key ``k``, blocked or not."""
    sys.require_enumerator()
    return [x.set(k, b) for b in sys.t_next_enum(t_state(x, k, sys), x)]


def map_state(x: SystemState, sys: TaskSystemDef) -> SystemState:
    """Pointwise image of ``x`` under the system's t_map."""
    sys.require_refinement()
    return SystemState.build({k: sys.t_map(a) for k, a in x.items()})


def sys_rank(k: Key, x: SystemState, sys: TaskSystemDef):
    sys.require_refinement()
    return sys.t_rank(t_state(x, k, sys))


def canonical(x: SystemState, sys: TaskSystemDef) -> SystemState:
    if sys.canon is None:
        return x
    return dataclasses.replace(sys.canon(x), default_factory=x.default_factory or sys.t_initial)


# ---------------------------------------------------------------------------
# Serialization: one line per key, ``key=<name> field=<value> ...``
# ---------------------------------------------------------------------------

def _format_value(value: Any) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    return str(value)


def format_tstate(a: TState) -> str:
    if dataclasses.is_dataclass(a):
        values = {f.name: getattr(a, f.name) for f in dataclasses.fields(a)}
    else:
        values = {"value": a}
    return " ".join(f"{name}={_format_value(values[name])}" for name in sorted(values))


def format_state(x: SystemState) -> List[str]:
    return [f"key={k} {format_tstate(a)}" for k, a in x.items()]


def _parse_value(text: str, annotation: Any) -> Any:
    if annotation is bool:
        if text not in ("true", "false"):
            raise ValueError(f"not a boolean: {text!r}")
        return text == "true"
    if annotation is int:
        return int(text)
    return text


def parse_tstate(fields_text: Sequence[str], tstate_type: Optional[type]) -> TState:
    values = {}
    for token in fields_text:
        name, sep, raw = token.partition("=")
        if not sep:
            raise ValueError(f"malformed field {token!r}")
        values[name] = raw
    if tstate_type is None or not dataclasses.is_dataclass(tstate_type):
        return values.get("value")
    hints = typing.get_type_hints(tstate_type)
    converted = {}
    for f in dataclasses.fields(tstate_type):
        if f.name not in values:
            raise ValueError(f"missing field '{f.name}' for {tstate_type.__name__}")
        converted[f.name] = _parse_value(values[f.name], hints.get(f.name))
    return tstate_type(**converted)


def parse_state(lines: Sequence[str], tstate_type: Optional[type]) -> SystemState:
    """Inverse of ``format_state``; the first token of each line names the map key."""
    mapping = {}
    for line in lines:
        tokens = line.split()
        if not tokens or not tokens[0].startswith("key="):
            raise ValueError(f"state line must start with key=<name>: {line!r}")
        mapping[tokens[0][len("key="):]] = parse_tstate(tokens[1:], tstate_type)
    return SystemState.build(mapping)
