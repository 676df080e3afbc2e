import os
from typing import Callable, List, Optional, Sequence

from reachability import StateGraph
from reports import CheckReport, render_text, to_jsonl
from run_engine import Trace
from system_model import format_selector, format_state, parse_selector, parse_state

TRACE_MAGIC = "fairstep-trace v1"
GRAPH_MAGIC = "fairstep-graph v1"


class TraceFormatError(ValueError):
    """Raised when a trace file cannot be parsed."""


def _header(fields: dict) -> str:
    return " ".join(f"{name}={value}" for name, value in fields.items())


def format_trace(trace: Trace) -> str:
    """Header line, then alternating state blocks and ``pick <key|->`` lines."""
    lines = [
        TRACE_MAGIC,
        _header({
            "system": trace.system,
            "keys": ",".join(trace.keys),
            "scheduler": trace.scheduler,
            "seed": "none" if trace.seed is None else trace.seed,
            "length": len(trace),
        }),
    ]
    for i, x in enumerate(trace.states):
        if i:
            lines.append(f"pick {format_selector(trace.pick(i))}")
        lines.append("state")
        lines.extend(format_state(x))
    return "\n".join(lines) + "\n"


def parse_trace(text: str, tstate_type_for: Callable[[str], Optional[type]]) -> Trace:
    """
    Parse a trace file.

    Args:
        text: file contents
        tstate_type_for: maps the system name in the header to its t-state type

    Returns:
        Trace with the recorded states, picks, scheduler and seed
    """
    lines = text.splitlines()
    if len(lines) < 2 or lines[0] != TRACE_MAGIC:
        raise TraceFormatError("missing trace header")
    try:
        header = dict(token.split("=", 1) for token in lines[1].split())
        system = header["system"]
        keys = tuple(k for k in header["keys"].split(",") if k)
        length = int(header["length"])
        seed = None if header["seed"] == "none" else int(header["seed"])
        scheduler = header["scheduler"]
    except (KeyError, ValueError) as e:
        raise TraceFormatError(f"bad trace header: {lines[1]!r}") from e

    tstate_type = tstate_type_for(system)
    states, picks, block = [], [], None
    for line in lines[2:]:
        if line == "state":
            if block is not None:
                states.append(parse_state(block, tstate_type))
            block = []
        elif line.startswith("pick "):
            picks.append(parse_selector(line[len("pick "):]))
        elif block is not None and line:
            block.append(line)
        elif line:
            raise TraceFormatError(f"unexpected line {line!r}")
    if block is not None:
        states.append(parse_state(block, tstate_type))
    if len(picks) != length or len(states) != length + 1:
        raise TraceFormatError(f"trace declares {length} steps but holds {len(picks)} picks and {len(states)} states")
    return Trace(system, keys, states, picks, scheduler, seed)


def format_graph(graph: StateGraph) -> str:
    lines = [
        GRAPH_MAGIC,
        _header({
            "system": graph.system,
            "keys": ",".join(graph.keys),
            "status": graph.status.value,
            "states": len(graph.states),
            "edges": len(graph.edges),
            "initial": ",".join(str(i) for i in graph.initial),
        }),
    ]
    for sid, x in enumerate(graph.states):
        lines.append(f"state {sid}")
        lines.extend(format_state(x))
    lines.extend(f"edge {src} {k} {dst}" for src, k, dst in graph.edges)
    return "\n".join(lines) + "\n"


class ArtifactStorage:
    """Handles writing and reading of traces, graph dumps, reports and counterexamples."""

    def __init__(self, storage_dir: str = "results"):
        """
        Initialize storage with a directory for artifacts.

        Args:
            storage_dir: Directory path for artifact files
        """
        self.storage_dir = storage_dir
        os.makedirs(storage_dir, exist_ok=True)

    def path_for(self, name: str) -> str:
        return name if os.path.isabs(name) else os.path.join(self.storage_dir, name)

    def _write(self, name: str, text: str) -> str:
        path = self.path_for(name)
        parent = os.path.dirname(path)
        if parent:
            os.makedirs(parent, exist_ok=True)
        with open(path, "w", newline="\n") as f:
            f.write(text)
        return path

    def save_trace(self, trace: Trace, name: str) -> str:
        """
        Save a trace file.

        Args:
            trace: Trace to write
            name: File name, relative to the storage directory

        Returns:
            str: Path of the written file
        """
        return self._write(name, format_trace(trace))

    def load_trace(self, name: str, tstate_type_for: Callable[[str], Optional[type]]) -> Trace:
        with open(self.path_for(name), "r") as f:
            return parse_trace(f.read(), tstate_type_for)

    def save_graph(self, graph: StateGraph, name: str) -> str:
        return self._write(name, format_graph(graph))

    def save_reports(self, reports: Sequence[CheckReport], name: str, report_format: str = "text") -> str:
        """
        Save reports as text blocks or as line-delimited JSON records.

        Args:
            reports: Reports to write
            name: File name, relative to the storage directory
            report_format: "text" or "structured"

        Returns:
            str: Path of the written file
        """
        if report_format == "structured":
            return self._write(name, to_jsonl(reports))
        return self._write(name, "\n\n".join(render_text(r) for r in reports) + "\n")

    def save_counterexamples(self, reports: Sequence[CheckReport], name: str) -> Optional[str]:
        """
        Save every counterexample of the given reports.

        Returns:
            str: Path of the written file, or None if there was nothing to write
        """
        blocks: List[str] = []
        for report in reports:
            for cex in report.counterexamples():
                blocks.append("\n".join([f"suite: {report.suite}", f"system: {report.system}"] + cex.to_lines()))
        if not blocks:
            return None
        return self._write(name, "\n\n".join(blocks) + "\n")
