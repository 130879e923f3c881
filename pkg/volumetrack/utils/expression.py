"""
Expression interpolation for stage params.
Supports: {{train.output.detector_path}}, {{track.output.results_path}}, {{generate.output.people.0}}
"""

import re
from typing import Any

from volumetrack.exceptions import ConfigError

EXPRESSION_PATTERN = re.compile(r"\{\{(.+?)\}\}")
_MISSING = object()


def _lookup(expression: str, context: dict[str, Any]) -> Any:
    current: Any = context
    for part in expression.strip().split("."):
        if isinstance(current, dict) and part in current:
            current = current[part]
        elif isinstance(current, list) and part.lstrip("-").isdigit() and -len(current) <= int(part) < len(current):
            current = current[int(part)]
        else:
            return _MISSING
    return current


def resolve_expression(expression: str, context: dict[str, Any]) -> Any:
    """Value at a dotted path like 'train.output.delta', None when any step is absent."""
    value = _lookup(expression, context)
    return None if value is _MISSING else value


def interpolate(template: Any, context: dict[str, Any], strict: bool = False) -> Any:
    """
    A string that is exactly one expression resolves to the value itself (any type);
    otherwise every expression is replaced by its string form. Unresolved expressions
    become "" (None for a whole-string expression), or raise ConfigError when strict.
    """
    def resolve(expression: str) -> Any:
        value = _lookup(expression, context)
        if value is _MISSING:
            if strict:
                raise ConfigError(f"unresolved expression {{{{{expression.strip()}}}}}")
            return None
        return value

    if isinstance(template, str):
        match = EXPRESSION_PATTERN.fullmatch(template)
        if match:
            return resolve(match.group(1))
        return EXPRESSION_PATTERN.sub(lambda m: "" if (v := resolve(m.group(1))) is None else str(v), template)
    if isinstance(template, dict):
        return {k: interpolate(v, context, strict) for k, v in template.items()}
    if isinstance(template, list):
        return [interpolate(item, context, strict) for item in template]
    return template
