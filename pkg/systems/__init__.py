from typing import Dict, List

from system_model import TaskSystemDef
from systems.bakery_impl import BAKERY_IMPL
from systems.bakery_spec import BAKERY_SPEC
from systems.mutants import BAKERY_IMPL_M1, BAKERY_IMPL_M2, RELAY_M3, RELAY_SELF_LOOP
from systems.relay import RELAY


class UnknownSystemError(KeyError):
    """Raised when a system name is not registered."""

    def __str__(self) -> str:
        return f"unknown system '{self.args[0]}' (known: {', '.join(list_systems())})"


SYSTEMS: Dict[str, TaskSystemDef] = {
    sys.name: sys
    for sys in (
        BAKERY_IMPL,
        BAKERY_SPEC,
        RELAY,
        BAKERY_IMPL_M1,
        BAKERY_IMPL_M2,
        RELAY_M3,
        RELAY_SELF_LOOP,
    )
}


def get_system(name: str) -> TaskSystemDef:
    try:
        return SYSTEMS[name]
    except KeyError:
        raise UnknownSystemError(name) from None


def list_systems() -> List[str]:
    return sorted(SYSTEMS)
