"""
Check reports: verdicts, counterexamples, and their text / structured renderings.
"""
import json
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

from ordinal import render_ordinal
from system_model import Key, SystemState, TState, format_state, format_tstate

SCHEMA_VERSION = "fairstep.verdict/1"
PREFIX_NOTE = "note: infinite runs are approximated by finite prefixes and lasso detection"

EXIT_PASS = 0
EXIT_USAGE = 1
EXIT_COUNTEREXAMPLE = 2
EXIT_QUALIFIED = 3


class Verdict(str, Enum):
    PASS = "pass"
    FAIL = "fail"
    QUALIFIED = "qualified-pass"
    INAPPLICABLE = "inapplicable"


@dataclass
class Counterexample:
    """A concrete witness that a theorem fails; ``replay()`` re-evaluates the theorem on it."""

    theorem: str
    description: str
    states: Tuple[SystemState, ...] = ()
    keys: Tuple[Key, ...] = ()
    successor: Optional[TState] = None
    index: Optional[int] = None
    replay: Optional[Callable[[], bool]] = field(default=None, compare=False, repr=False)

    def reproduces(self) -> bool:
        """True iff replaying the witness still falsifies the theorem."""
        return self.replay is not None and not self.replay()

    def to_lines(self) -> List[str]:
        lines = [f"theorem: {self.theorem}", f"failed: {self.description}"]
        if self.keys:
            lines.append(f"keys: {' '.join(self.keys)}")
        if self.index is not None:
            lines.append(f"index: {self.index}")
        for i, x in enumerate(self.states):
            lines.append(f"state {i}")
            lines.extend(format_state(x))
        if self.successor is not None:
            lines.append(f"successor {format_tstate(self.successor)}")
        return lines

    def to_record(self) -> Dict[str, Any]:
        return {
            "description": self.description,
            "keys": list(self.keys),
            "index": self.index,
            "states": [format_state(x) for x in self.states],
            "successor": format_tstate(self.successor) if self.successor is not None else None,
        }


@dataclass
class TheoremVerdict:
    theorem: str
    verdict: Verdict
    checked: int = 0
    counterexample: Optional[Counterexample] = None
    note: str = ""


@dataclass
class CheckReport:
    suite: str
    system: str
    keys: Tuple[Key, ...] = ()
    verdicts: List[TheoremVerdict] = field(default_factory=list)
    stats: Dict[str, int] = field(default_factory=dict)
    bounded: bool = False
    run_level: bool = False
    notes: List[str] = field(default_factory=list)

    def verdict_for(self, theorem: str) -> TheoremVerdict:
        for v in self.verdicts:
            if v.theorem == theorem:
                return v
        raise KeyError(theorem)

    def failures(self) -> List[TheoremVerdict]:
        return [v for v in self.verdicts if v.verdict == Verdict.FAIL]

    def counterexamples(self) -> List[Counterexample]:
        return [v.counterexample for v in self.failures() if v.counterexample is not None]

    @property
    def passed(self) -> bool:
        return not self.failures()

    @property
    def overall(self) -> Verdict:
        if self.failures():
            return Verdict.FAIL
        if any(v.verdict == Verdict.QUALIFIED for v in self.verdicts):
            return Verdict.QUALIFIED
        if self.verdicts and all(v.verdict == Verdict.INAPPLICABLE for v in self.verdicts):
            return Verdict.INAPPLICABLE
        return Verdict.PASS


class TheoremTally:
    """
    Accumulates one theorem's outcome across many checked instances.

    Only the first counterexample is kept; later failures are counted.
    """

    def __init__(self, theorem: str):
        self.theorem = theorem
        self.checked = 0
        self.failed = 0
        self.counterexample: Optional[Counterexample] = None
        self.note = ""

    def record(self, holds: bool, witness: Optional[Callable[[], Counterexample]] = None) -> bool:
        self.checked += 1
        if not holds:
            self.failed += 1
            if self.counterexample is None and witness is not None:
                self.counterexample = witness()
        return holds

    def verdict(self, bounded: bool) -> TheoremVerdict:
        if self.failed:
            outcome = Verdict.FAIL
        elif bounded:
            outcome = Verdict.QUALIFIED
        else:
            outcome = Verdict.PASS
        note = self.note or (f"{self.failed} failing instances" if self.failed > 1 else "")
        return TheoremVerdict(self.theorem, outcome, self.checked, self.counterexample, note)


def _format_stat(value: Any) -> str:
    return render_ordinal(value) if not isinstance(value, (str, bool)) else str(value)


def render_text(report: CheckReport) -> str:
    """Human-readable block for one report."""
    stats = " ".join(f"{name}={_format_stat(value)}" for name, value in sorted(report.stats.items()))
    header = f"== {report.suite} | system={report.system} keys={','.join(report.keys)}"
    if report.bounded:
        header += " | bounded"
    lines = [header]
    if report.run_level:
        lines.append(PREFIX_NOTE)
    if stats:
        lines.append(f"   {stats}")
    for note in report.notes:
        lines.append(f"   note: {note}")
    for v in report.verdicts:
        line = f"   [{v.verdict.value.upper()}] {v.theorem} (checked {v.checked})"
        if v.note:
            line += f" - {v.note}"
        lines.append(line)
        if v.counterexample is not None:
            lines.extend(f"      {cex_line}" for cex_line in v.counterexample.to_lines())
    lines.append(f"   overall: {report.overall.value}")
    return "\n".join(lines)


def to_records(report: CheckReport) -> List[Dict[str, Any]]:
    """One structured record per theorem verdict."""
    records = []
    for v in report.verdicts:
        records.append({
            "schema": SCHEMA_VERSION,
            "suite": report.suite,
            "system": report.system,
            "keys": list(report.keys),
            "theorem": v.theorem,
            "verdict": v.verdict.value,
            "checked": v.checked,
            "bounded": report.bounded,
            "note": v.note,
            "counterexample": v.counterexample.to_record() if v.counterexample else None,
        })
    return records


def to_jsonl(reports: Sequence[CheckReport]) -> str:
    lines = [json.dumps(record, sort_keys=True) for report in reports for record in to_records(report)]
    return "\n".join(lines) + ("\n" if lines else "")


def exit_code_for(reports: Sequence[CheckReport]) -> int:
    """0 all pass, 2 any counterexample, 3 any qualified (bounded) pass."""
    overall = [r.overall for r in reports]
    if Verdict.FAIL in overall:
        return EXIT_COUNTEREXAMPLE
    if Verdict.QUALIFIED in overall:
        return EXIT_QUALIFIED
    return EXIT_PASS
