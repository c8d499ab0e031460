"""Belief-action alignment scores.

Vector agents are scored with a pluggable kernel (cosine by default);
LLM agents report their own scores, which are clamped and validated by
:func:`ingest_external_scores`.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Callable, Mapping

import numpy as np

from .types import ActionVector, AlignmentMatrix, Belief, Team

logger = logging.getLogger(__name__)

Kernel = Callable[[ActionVector, ActionVector], float]


def _check_dims(predicted: ActionVector, actual: ActionVector) -> None:
    if predicted.dim != actual.dim:
        raise ValueError(f"dimension mismatch: predicted has {predicted.dim}, actual has {actual.dim}")


def cosine_alignment(predicted: ActionVector, actual: ActionVector) -> float:
    """Cosine of the angle between a predicted and an actual action.

    Exactly one zero vector scores 0.0 (neutral); two zero vectors have no
    defined angle and raise ``ValueError``.
    """
    _check_dims(predicted, actual)
    p_zero, a_zero = predicted.is_zero(), actual.is_zero()
    if p_zero and a_zero:
        raise ValueError("both vectors are all-zero; alignment is undefined")
    if p_zero or a_zero:
        return 0.0
    # rescale first so tiny or huge entries cannot under/overflow the dot products
    p = np.asarray(predicted.values)
    a = np.asarray(actual.values)
    p = p / np.abs(p).max()
    a = a / np.abs(a).max()
    cos = float(np.dot(p, a)) / math.sqrt(float(np.dot(p, p)) * float(np.dot(a, a)))
    return min(1.0, max(-1.0, cos))


def distance_alignment(predicted: ActionVector, actual: ActionVector) -> float:
    """1 - 2 * |p - a| / (|p| + |a|), a magnitude-aware alternative to cosine."""
    _check_dims(predicted, actual)
    if predicted.is_zero() and actual.is_zero():
        raise ValueError("both vectors are all-zero; alignment is undefined")
    p = np.asarray(predicted.values)
    a = np.asarray(actual.values)
    top = max(np.abs(p).max(), np.abs(a).max())
    p, a = p / top, a / top
    scale = float(np.linalg.norm(p) + np.linalg.norm(a))
    return min(1.0, max(-1.0, 1.0 - 2.0 * float(np.linalg.norm(p - a)) / scale))


KERNELS: dict[str, Kernel] = {
    "cosine": cosine_alignment,
    "distance": distance_alignment,
}


def register_kernel(name: str, kernel: Kernel) -> None:
    KERNELS[name] = kernel


def build_alignment_matrix(
    beliefs: Mapping[int, Belief],
    actions: Mapping[int, ActionVector],
    team: Team,
    round_index: int = 0,
    kernel: Kernel | str = "cosine",
) -> AlignmentMatrix:
    """Score every ordered teammate pair: observer's prediction vs. subject's action."""
    fn = KERNELS[kernel] if isinstance(kernel, str) else kernel
    scores = {}
    for i in team:
        if i not in beliefs:
            raise KeyError(f"no belief for team member {i}")
        for j in team:
            if i == j:
                continue
            if j not in beliefs[i].predictions:
                raise KeyError(f"agent {i} has no prediction for teammate {j}")
            if j not in actions:
                raise KeyError(f"no action recorded for team member {j}")
            scores[(i, j)] = fn(beliefs[i].predictions[j], actions[j])
    return AlignmentMatrix(round_index, scores)


class InvalidScoreError(ValueError):
    """A self-reported score was not numeric; the caller should retry."""

    def __init__(self, observer: int, subjects: list[int]):
        super().__init__(f"agent {observer} reported non-numeric scores for {subjects}")
        self.observer = observer
        self.subjects = subjects


@dataclass(frozen=True)
class ExternalRow:
    """One observer's self-reported scores after clamping and validation."""

    observer: int
    scores: Mapping[int, float]
    clamped: tuple[int, ...] = ()
    invalid: tuple[int, ...] = ()

    @property
    def valid(self) -> bool:
        return not self.invalid


def ingest_external_scores(
    parsed: Mapping[int, object],
    observer: int = 0,
    policy: str = "neutral",
) -> ExternalRow:
    """Validate self-reported scores into a matrix row.

    Out-of-range numbers are clamped to [-1, 1] with a warning. Non-numeric
    entries either raise :class:`InvalidScoreError` (``policy="retry"``) or
    are replaced with the neutral 0.0 (``policy="neutral"``); either way the
    row records which subjects were invalid.
    """
    if policy not in ("neutral", "retry"):
        raise ValueError(f"unknown invalid-score policy {policy!r}")
    scores: dict[int, float] = {}
    clamped, invalid = [], []
    for j in sorted(parsed):
        raw = parsed[j]
        try:
            if isinstance(raw, bool):
                raise TypeError
            value = float(raw)  # type: ignore[arg-type]
            if not math.isfinite(value):
                raise ValueError
        except (TypeError, ValueError):
            invalid.append(j)
            continue
        if value > 1.0 or value < -1.0:
            logger.warning("clamping score %r from agent %d about agent %d into [-1, 1]", value, observer, j)
            value = min(1.0, max(-1.0, value))
            clamped.append(j)
        scores[j] = value
    if invalid:
        if policy == "retry":
            raise InvalidScoreError(observer, invalid)
        logger.warning("agent %d gave non-numeric scores for %s; using neutral 0.0", observer, invalid)
        for j in invalid:
            scores[j] = 0.0
    return ExternalRow(observer, dict(sorted(scores.items())), tuple(clamped), tuple(invalid))


def matrix_from_rows(rows: list[ExternalRow], round_index: int = 0) -> AlignmentMatrix:
    return AlignmentMatrix(
        round_index,
        {(r.observer, j): s for r in rows for j, s in r.scores.items() if j != r.observer},
    )
