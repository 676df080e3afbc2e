import logging
import sys
from typing import List, Optional, Sequence

import click

from config import DEFAULT_STATE_CAP, LOG_LEVEL, OUTPUT_DIR, WORKERS, RunConfig
from obligations import (
    ALL_SUITES,
    DomainUnavailableError,
    applicable_suites,
    check_cycle_reachability,
    cycle_domain,
    find_blocking_cycles,
    find_reachable_deadlocks,
    run_suites,
    verdict_agreement,
)
from reachability import explore, substate_closure_check
from reports import (
    EXIT_PASS,
    EXIT_QUALIFIED,
    EXIT_USAGE,
    CheckReport,
    exit_code_for,
    render_text,
    to_jsonl,
)
from run_engine import (
    AgingRandomScheduler,
    RoundRobinScheduler,
    Scheduler,
    ScriptedScheduler,
    Trace,
    check_fair_witness,
    check_refinement_trace,
    check_run_legal,
    detect_starvation,
    simulate,
)
from storage import ArtifactStorage, TraceFormatError
from system_model import SystemDefinitionError, TaskSystemDef, format_tstate, make_keys
from systems import SYSTEMS, UnknownSystemError, get_system, list_systems

logger = logging.getLogger("fairstep")


def _emit(reports: Sequence[CheckReport], report_format: str) -> None:
    if report_format == "structured":
        click.echo(to_jsonl(reports), nl=False)
    else:
        for report in reports:
            click.echo(render_text(report))


def _report_name(prefix: str, system: str, keys: int, report_format: str) -> str:
    return f"{prefix}-{system}-{keys}keys.{'jsonl' if report_format == 'structured' else 'txt'}"


def _save(config: RunConfig, prefix: str, reports: Sequence[CheckReport]) -> None:
    storage = ArtifactStorage(config.output_dir)
    system = config.systems[0]
    path = storage.save_reports(reports, _report_name(prefix, system, config.keys, config.report_format),
                                config.report_format)
    logger.info("[%s] report written to %s", prefix, path)
    cex_path = storage.save_counterexamples(reports, f"counterexample-{prefix}-{system}-{config.keys}keys.txt")
    if cex_path:
        click.echo(f"counterexample written to {cex_path}", err=True)


def _scheduler(config: RunConfig, keys: Sequence[str]) -> Scheduler:
    if config.sched == "rr":
        return RoundRobinScheduler(keys)
    if config.sched == "aging":
        return AgingRandomScheduler(keys, config.bound or len(keys), config.seed)
    with open(config.script, "r") as f:
        scheduler = ScriptedScheduler.from_text(f.read())
    scheduler.bound = config.bound
    return scheduler


def _recorded_bound(trace: Trace) -> Optional[int]:
    """Fairness bound implied by a recorded scheduler descriptor, if any."""
    if trace.scheduler == "rr":
        return len(trace.keys)
    policy, _, rest = trace.scheduler.partition(":")
    if policy == "aging" and rest.isdigit():
        return int(rest)
    return None


def _spec_for(system: TaskSystemDef, spec_name: Optional[str]) -> Optional[TaskSystemDef]:
    name = spec_name or system.refines
    return get_system(name) if name else None


def _check_at(
    system: TaskSystemDef,
    spec: Optional[TaskSystemDef],
    suites: Sequence[str],
    config: RunConfig,
    keys: int,
    progress: bool,
) -> List[CheckReport]:
    graph = explore(system, make_keys(keys), depth=config.depth, state_cap=config.state_cap,
                    use_canon=config.canon, progress=progress)
    return run_suites(graph, system, suites, spec=spec, workers=WORKERS)


@click.group()
@click.option("--log-level", default=LOG_LEVEL, show_default=True, help="Logging level for stderr diagnostics.")
def cli(log_level: str) -> None:
    """Check fair stuttering refinement obligations of task-based transition systems."""
    logging.basicConfig(level=log_level.upper(), format="[%(name)s] %(levelname)s %(message)s", stream=sys.stderr)


@cli.command("systems")
def systems_command() -> int:
    """List registered systems."""
    for name in list_systems():
        click.echo(f"{name:16} {SYSTEMS[name].description}")
    return EXIT_PASS


@cli.command()
@click.option("--system", "system_name", required=True)
@click.option("--spec", "spec_name", default=None, help="Spec system for the match suite.")
@click.option("--keys", default=2, show_default=True, type=int)
@click.option("--canon/--no-canon", default=False, show_default=True)
@click.option("--depth", default=None, type=int)
@click.option("--state-cap", default=None, type=int)
@click.option("--suite", "suites", multiple=True, type=click.Choice(ALL_SUITES))
@click.option("--format", "report_format", default="text", type=click.Choice(["text", "structured"]))
@click.option("--out", "output_dir", default=None, help="Directory for reports and counterexamples.")
@click.option("--compare-keys", default=None, type=int, help="Re-run at this key count and compare verdicts.")
@click.option("--progress", is_flag=True, default=False)
def check(system_name, spec_name, keys, canon, depth, state_cap, suites, report_format, output_dir,
          compare_keys, progress) -> int:
    """Explore an instance and check proof obligations on it."""
    config = RunConfig(
        command="check",
        systems=tuple(n for n in (system_name, spec_name) if n),
        keys=keys,
        depth=depth,
        state_cap=state_cap or DEFAULT_STATE_CAP,
        canon=canon,
        output_dir=output_dir or OUTPUT_DIR,
        report_format=report_format,
    )
    system = get_system(system_name)
    spec = _spec_for(system, spec_name)
    selected = list(suites) or applicable_suites(system, spec)
    reports = _check_at(system, spec, selected, config, keys, progress)
    _emit(reports, report_format)
    _save(config, "check", reports)

    if compare_keys is not None:
        other = _check_at(system, spec, selected, config, compare_keys, progress)
        agreement = verdict_agreement(reports, other)
        differing = [name for name, same in agreement.items() if not same]
        click.echo(f"verdicts at {keys} and {compare_keys} keys "
                   f"{'agree' if not differing else 'differ on ' + ', '.join(differing)}")
    return exit_code_for(reports)


@cli.command("simulate")
@click.option("--system", "system_name", required=True)
@click.option("--keys", default=2, show_default=True, type=int)
@click.option("--sched", default="rr", type=click.Choice(["rr", "aging", "script"]))
@click.option("--bound", default=None, type=int)
@click.option("--script", default=None, help="File of selectors for the script scheduler ('-' stutters).")
@click.option("--steps", default=100, show_default=True, type=int)
@click.option("--seed", default=None, type=int)
@click.option("--out", default=None, help="Trace file name.")
@click.option("--out-dir", "output_dir", default=None)
def simulate_command(system_name, keys, sched, bound, script, steps, seed, out, output_dir) -> int:
    """Simulate a fair run and write its trace file."""
    config = RunConfig(
        command="simulate", systems=(system_name,), keys=keys, sched=sched, bound=bound,
        script=script, steps=steps, seed=seed, out=out, output_dir=output_dir or OUTPUT_DIR,
    )
    system = get_system(system_name)
    key_set = make_keys(keys)
    trace = simulate(system, key_set, _scheduler(config, key_set), steps, seed)
    path = ArtifactStorage(config.output_dir).save_trace(
        trace, out or f"trace-{system_name}-{keys}keys.txt",
    )
    click.echo(f"trace written to {path} ({steps} steps)")
    return EXIT_PASS


@cli.command()
@click.option("--impl", "impl_name", required=True)
@click.option("--spec", "spec_name", default=None)
@click.option("--keys", default=2, show_default=True, type=int)
@click.option("--sched", default="rr", type=click.Choice(["rr", "aging", "script"]))
@click.option("--bound", default=None, type=int)
@click.option("--script", default=None)
@click.option("--steps", default=1000, show_default=True, type=int)
@click.option("--seed", default=None, type=int)
@click.option("--horizon", default=None, type=int)
@click.option("--format", "report_format", default="text", type=click.Choice(["text", "structured"]))
@click.option("--out", "output_dir", default=None)
@click.option("--trace-out", default=None, help="Also write the simulated trace under this name.")
@click.option("--trace", "trace_file", default=None, help="Check this recorded trace instead of simulating.")
def refine(impl_name, spec_name, keys, sched, bound, script, steps, seed, horizon, report_format,
           output_dir, trace_out, trace_file) -> int:
    """Simulate the implementation (or load a recorded run) and check it against the system it refines."""
    config = RunConfig(
        command="refine", systems=tuple(n for n in (impl_name, spec_name) if n), keys=keys, sched=sched,
        bound=bound, script=script, steps=steps, seed=seed, output_dir=output_dir or OUTPUT_DIR,
        report_format=report_format, **({"horizon": horizon} if horizon is not None else {}),
    )
    impl = get_system(impl_name)
    spec = _spec_for(impl, spec_name)
    if spec is None:
        raise click.UsageError(f"no spec given and '{impl_name}' declares none")
    storage = ArtifactStorage(config.output_dir)
    if trace_file:
        trace = storage.load_trace(trace_file, lambda name: get_system(name).tstate_type)
        if trace.system != impl.name:
            raise click.UsageError(f"trace records system '{trace.system}', not '{impl.name}'")
        config = config.model_copy(update={"keys": max(len(trace.keys), 1)})
        fair_bound = bound if bound is not None else _recorded_bound(trace)
        logger.info("[refine] loaded %d steps of %s from %s", len(trace), trace.system, trace_file)
    else:
        key_set = make_keys(keys)
        scheduler = _scheduler(config, key_set)
        trace = simulate(impl, key_set, scheduler, steps, seed)
        fair_bound = scheduler.bound
    if trace_out:
        storage.save_trace(trace, trace_out)

    reports = [check_run_legal(trace, impl)]
    if fair_bound is not None:
        reports.append(check_fair_witness(trace, fair_bound))
    reports.append(check_refinement_trace(trace, impl, spec))
    reports.append(detect_starvation(trace, impl, config.horizon).to_report(trace))
    _emit(reports, report_format)
    _save(config, "refine", reports)
    return exit_code_for(reports)


@cli.command()
@click.option("--system", "system_name", required=True)
@click.option("--max-len", default=4, show_default=True, type=int)
@click.option("--state-cap", default=None, type=int)
@click.option("--format", "report_format", default="text", type=click.Choice(["text", "structured"]))
@click.option("--out", "output_dir", default=None)
def cycles(system_name, max_len, state_cap, report_format, output_dir) -> int:
    """Search the blocking relation for cycles, check their reachability and scan for deadlocks."""
    config = RunConfig(command="cycles", systems=(system_name,), keys=max(max_len, 1),
                       state_cap=state_cap or DEFAULT_STATE_CAP, output_dir=output_dir or OUTPUT_DIR,
                       report_format=report_format)
    system = get_system(system_name)
    try:
        domain = cycle_domain(system, max_len, config.state_cap)
    except DomainUnavailableError as e:
        raise click.UsageError(str(e))
    found = find_blocking_cycles(system, domain, max_len)
    if not found:
        click.echo(f"no cycles up to length {max_len} over {len(domain)} t-states")
        return EXIT_PASS
    graph = explore(system, make_keys(max(len(c) for c in found)), state_cap=config.state_cap)
    reports = []
    for cycle in found:
        click.echo("cycle: " + " -> ".join(f"[{format_tstate(a)}]" for a in cycle))
        reports.append(check_cycle_reachability(system, cycle, config.state_cap, graph=graph))
    reports.append(find_reachable_deadlocks(graph, system))
    _emit(reports, report_format)
    _save(config, "cycles", reports)
    return exit_code_for(reports)


@cli.command()
@click.option("--system", "system_name", required=True)
@click.option("--keys", default=2, show_default=True, type=int)
@click.option("--state-cap", default=None, type=int)
def closure(system_name, keys, state_cap) -> int:
    """Check that reachable substates are reachable with one key fewer."""
    config = RunConfig(command="closure", systems=(system_name,), keys=keys,
                       state_cap=state_cap or DEFAULT_STATE_CAP)
    report = substate_closure_check(get_system(system_name), config.keys, config.state_cap)
    click.echo(render_text(report))
    return exit_code_for([report])


@cli.command("explore")
@click.option("--system", "system_name", required=True)
@click.option("--keys", default=2, show_default=True, type=int)
@click.option("--canon/--no-canon", default=False)
@click.option("--depth", default=None, type=int)
@click.option("--state-cap", default=None, type=int)
@click.option("--out", default=None, help="Graph dump file name.")
@click.option("--out-dir", "output_dir", default=None)
@click.option("--progress", is_flag=True, default=False)
def explore_command(system_name, keys, canon, depth, state_cap, out, output_dir, progress) -> int:
    """Explore an instance and dump its state graph."""
    config = RunConfig(command="explore", systems=(system_name,), keys=keys, depth=depth,
                       state_cap=state_cap or DEFAULT_STATE_CAP, canon=canon,
                       output_dir=output_dir or OUTPUT_DIR, out=out)
    graph = explore(get_system(system_name), make_keys(keys), depth=config.depth,
                    state_cap=config.state_cap, use_canon=canon, progress=progress)
    path = ArtifactStorage(config.output_dir).save_graph(graph, out or f"graph-{system_name}-{keys}keys.txt")
    click.echo(f"{len(graph.states)} states, {len(graph.edges)} edges, {graph.status.value}; written to {path}")
    return EXIT_PASS if graph.complete else EXIT_QUALIFIED


def run(argv: Optional[Sequence[str]] = None) -> int:
    """Run the CLI and return its exit code instead of exiting."""
    try:
        result = cli.main(args=list(argv) if argv is not None else None, prog_name="fairstep",
                          standalone_mode=False)
    except click.ClickException as e:
        e.show()
        return EXIT_USAGE
    except click.Abort:
        return EXIT_USAGE
    except (UnknownSystemError, SystemDefinitionError, TraceFormatError, OSError, ValueError) as e:
        click.echo(f"error: {e}", err=True)
        return EXIT_USAGE
    return result if isinstance(result, int) else EXIT_PASS


if __name__ == '__main__':
    sys.exit(run())
