"""Lenient JSON extraction for model responses, and the two response parsers."""

from __future__ import annotations

import ast
import json
import logging
import re
from typing import Any, Iterable, Mapping

from ..types import Belief, ToMStage

logger = logging.getLogger(__name__)

_FENCE = re.compile(r"```[a-zA-Z0-9_-]*\s*\n?(.*?)```", re.DOTALL)
_LEVEL_KEY = re.compile(r"^ToM_level(\d+)$")


class ParseError(ValueError):
    """A response could not be turned into the expected structure."""

    def __init__(self, message: str, fragment: str = "", missing: Iterable[str] = ()):
        super().__init__(message if not fragment else f"{message} (near: {fragment[:80]!r})")
        self.fragment = fragment
        self.missing = tuple(missing)


class AlignmentParseError(ParseError):
    def __init__(self, partial: Mapping[str, float], missing: Iterable[str], fragment: str = ""):
        missing = tuple(missing)
        super().__init__(f"no score for {', '.join(missing)}", fragment, missing)
        self.partial = dict(partial)


def _outermost_object(text: str) -> str | None:
    start = text.find("{")
    if start < 0:
        return None
    depth, quote, escaped = 0, None, False
    for pos in range(start, len(text)):
        ch = text[pos]
        if quote:
            if escaped:
                escaped = False
            elif ch == "\\":
                escaped = True
            elif ch == quote:
                quote = None
        elif ch in "\"'":
            quote = ch
        elif ch == "{":
            depth += 1
        elif ch == "}":
            depth -= 1
            if depth == 0:
                return text[start : pos + 1]
    return None


def extract_json(text: str) -> dict[str, Any]:
    """First JSON object in ``text``, tolerating code fences, prose and single quotes."""
    candidates = [m.group(1) for m in _FENCE.finditer(text)] + [text]
    for cand in candidates:
        obj = _outermost_object(cand)
        if obj is None:
            continue
        try:
            value = json.loads(obj)
        except json.JSONDecodeError:
            try:
                value = ast.literal_eval(obj)
            except (ValueError, SyntaxError):
                continue
        if isinstance(value, dict):
            return value
    raise ParseError("no JSON object found in response", text.strip())


def _require(block: Mapping[str, Any], key: str, where: str) -> str:
    if key not in block:
        raise ParseError(f"{where} is missing required key {key!r}", json.dumps(block)[:200], [key])
    return str(block[key])


def parse_tom_response(text: str, owner: int = 0) -> Belief:
    """Text-form belief with one stage per ``ToM_levelK`` block, lowest level first.

    The highest level present is the working belief and action.
    """
    data = extract_json(text)
    levels = {}
    for key, block in data.items():
        m = _LEVEL_KEY.match(str(key))
        if m is None:
            continue
        if not isinstance(block, Mapping):
            raise ParseError(f"{key} must be an object", str(block))
        levels[int(m.group(1))] = block
    if not levels:
        raise ParseError("response has no ToM_level block", text.strip(), ["ToM_level"])
    stages = []
    for level in sorted(levels):
        block = levels[level]
        where = f"ToM_level{level}"
        belief = _require(block, "belief", where)
        action = _require(block, "action", where)
        if level > 0 and "explanation" not in block:
            raise ParseError(f"{where} is missing required key 'explanation'", json.dumps(block)[:200], ["explanation"])
        stages.append(ToMStage(level, belief, action, block.get("explanation")))
    return Belief(owner, max(levels), stages=tuple(stages))


def parse_alignment_response(text: str, expected: Iterable[str] | None = None) -> dict[str, float]:
    """Per-peer scores. String scores are coerced with a warning.

    Values are returned as given; range clamping happens when they are
    ingested into an alignment matrix. Missing expected peers raise
    :class:`AlignmentParseError`, which carries the partial result.
    """
    data = extract_json(text)
    scores: dict[str, float] = {}
    for name, block in data.items():
        raw = block.get("score") if isinstance(block, Mapping) else block
        if raw is None:
            continue
        if isinstance(raw, str):
            try:
                value = float(raw.strip())
            except ValueError:
                raise ParseError(f"score for {name} is not a number", raw) from None
            logger.warning("score for %s given as string %r; coerced to %r", name, raw, value)
        elif isinstance(raw, (int, float)) and not isinstance(raw, bool):
            value = float(raw)
        else:
            raise ParseError(f"score for {name} is not a number", repr(raw))
        scores[str(name)] = value
    names = list(expected) if expected is not None else list(scores)
    missing = [n for n in names if n not in scores]
    if missing:
        raise AlignmentParseError(scores, missing, text.strip())
    if not scores:
        raise ParseError("response has no scores", text.strip())
    return scores
