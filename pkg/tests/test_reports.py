import json

import pytest
from pydantic import ValidationError

from config import RunConfig
from reports import (
    EXIT_COUNTEREXAMPLE,
    EXIT_PASS,
    EXIT_QUALIFIED,
    PREFIX_NOTE,
    CheckReport,
    Counterexample,
    TheoremTally,
    TheoremVerdict,
    Verdict,
    exit_code_for,
    render_text,
    to_jsonl,
)
from system_model import SystemState
from systems.relay import RelayTState


def _report(*verdicts, **kwargs):
    return CheckReport("suite", "relay", ("A", "B"), list(verdicts), **kwargs)


def test_tally_keeps_first_counterexample():
    tally = TheoremTally("thm")
    made = []
    for holds in (True, False, False):
        tally.record(holds, lambda: made.append(1) or Counterexample("thm", f"witness {len(made)}"))
    verdict = tally.verdict(bounded=False)
    assert verdict.verdict == Verdict.FAIL
    assert verdict.checked == 3
    assert verdict.counterexample.description == "witness 1"
    assert verdict.note == "2 failing instances"
    assert TheoremTally("empty").verdict(bounded=True).verdict == Verdict.QUALIFIED


def test_overall_and_exit_codes():
    passing = _report(TheoremVerdict("a", Verdict.PASS))
    qualified = _report(TheoremVerdict("a", Verdict.QUALIFIED))
    failing = _report(TheoremVerdict("a", Verdict.PASS), TheoremVerdict("b", Verdict.FAIL))
    inapplicable = _report(TheoremVerdict("a", Verdict.INAPPLICABLE))
    assert exit_code_for([passing]) == EXIT_PASS
    assert exit_code_for([passing, qualified]) == EXIT_QUALIFIED
    assert exit_code_for([qualified, failing]) == EXIT_COUNTEREXAMPLE
    assert inapplicable.overall == Verdict.INAPPLICABLE
    assert exit_code_for([inapplicable]) == EXIT_PASS


def test_counterexample_replay():
    x = SystemState.build({"A": RelayTState(1)})
    cex = Counterexample("thm", "broken", states=(x,), keys=("A",), replay=lambda: False)
    assert cex.reproduces()
    assert not Counterexample("thm", "no replay").reproduces()
    assert cex.to_lines() == ["theorem: thm", "failed: broken", "keys: A", "state 0", "key=A loc=1"]


def test_render_text():
    cex = Counterexample("b", "broken", keys=("B",), index=4)
    report = _report(
        TheoremVerdict("a", Verdict.PASS, 10),
        TheoremVerdict("b", Verdict.FAIL, 3, cex),
        stats={"states": 8}, run_level=True,
    )
    text = render_text(report)
    assert text.splitlines()[0] == "== suite | system=relay keys=A,B"
    assert PREFIX_NOTE in text
    assert "   states=8" in text
    assert "   [PASS] a (checked 10)" in text
    assert "   [FAIL] b (checked 3)" in text
    assert "      index: 4" in text
    assert text.endswith("   overall: fail")


def test_jsonl_one_record_per_verdict():
    report = _report(TheoremVerdict("a", Verdict.PASS), TheoremVerdict("b", Verdict.QUALIFIED), bounded=True)
    lines = to_jsonl([report]).splitlines()
    assert len(lines) == 2
    record = json.loads(lines[1])
    assert record["theorem"] == "b"
    assert record["verdict"] == "qualified-pass"
    assert record["bounded"] is True
    assert to_jsonl([]) == ""


def test_run_config_validation():
    assert RunConfig(command="simulate", sched="aging", seed=3, bound=4, keys=3).bound == 4
    with pytest.raises(ValidationError):
        RunConfig(command="simulate", sched="aging", keys=2)
    with pytest.raises(ValidationError):
        RunConfig(command="simulate", sched="aging", seed=1, bound=2, keys=3)
    with pytest.raises(ValidationError):
        RunConfig(command="simulate", sched="script")
    with pytest.raises(ValidationError):
        RunConfig(command="check", keys=0)
