import pytest

from volumetrack.exceptions import ConfigError
from volumetrack.utils.expression import interpolate, resolve_expression

CONTEXT = {
    "generate": {"output": {"dataset_dir": "/data/run1", "people": [3, 7], "frames": 12}},
    "run": {"id": "abc"},
}


def test_whole_expression_keeps_type():
    assert interpolate("{{generate.output.frames}}", CONTEXT) == 12
    assert interpolate("{{generate.output.people}}", CONTEXT) == [3, 7]
    assert interpolate("{{generate.output.people.1}}", CONTEXT) == 7


def test_embedded_expressions_become_strings():
    assert interpolate("{{generate.output.dataset_dir}}/gt.jsonl", CONTEXT) == "/data/run1/gt.jsonl"
    assert interpolate("run-{{run.id}}-{{generate.output.frames}}", CONTEXT) == "run-abc-12"


def test_nested_structures():
    template = {"paths": ["{{generate.output.dataset_dir}}", "x"], "n": 3}
    assert interpolate(template, CONTEXT) == {"paths": ["/data/run1", "x"], "n": 3}


def test_unresolved_lenient_and_strict():
    assert interpolate("{{train.output.detector_path}}", CONTEXT) is None
    assert interpolate("a{{train.output.x}}b", CONTEXT) == "ab"
    assert resolve_expression("generate.output.people.5", CONTEXT) is None
    with pytest.raises(ConfigError, match="train.output.detector_path"):
        interpolate({"d": "{{train.output.detector_path}}"}, CONTEXT, strict=True)
