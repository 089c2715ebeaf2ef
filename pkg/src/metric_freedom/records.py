"""Multi-run agent records: JSON Lines ingestion, validation and grouping."""

from __future__ import annotations

import enum
import io
import json
import logging
import math
from dataclasses import dataclass, field
from datetime import datetime, timezone
from itertools import groupby
from pathlib import Path
from typing import IO, Iterable, Sequence

from .errors import (
    DimensionMismatch,
    DuplicateKey,
    EmptyRunSet,
    MalformedLine,
    ScoreOutOfRange,
)

log = logging.getLogger(__name__)

DEFAULT_SCORE_TOLERANCE = 1e-9

_REQUIRED = ("dataset_id", "question_id", "run_index", "output", "score")
_KNOWN = frozenset(_REQUIRED + ("trace_vector", "approach_hint"))


class OutputKind(enum.Enum):
    SET = "set"
    CATEGORY = "category"
    TOKENS = "tokens"
    SCALAR_VEC = "vector"


@dataclass(frozen=True)
class OutputPayload:
    """Final output of one run.

    ``value`` is a frozenset for SET, a str for CATEGORY, a tuple of str for
    TOKENS and a tuple of float for SCALAR_VEC.
    """

    kind: OutputKind
    value: object

    def __post_init__(self):
        k, v = self.kind, self.value
        if k is OutputKind.SET:
            if not isinstance(v, frozenset):
                object.__setattr__(self, "value", frozenset(v))
        elif k is OutputKind.CATEGORY:
            if not isinstance(v, str):
                raise TypeError("CATEGORY payload must be a string")
        elif k is OutputKind.TOKENS:
            object.__setattr__(self, "value", tuple(v))
        elif k is OutputKind.SCALAR_VEC:
            vec = tuple(float(x) for x in v)
            if not vec:
                raise ValueError("SCALAR_VEC payload must be non-empty")
            object.__setattr__(self, "value", vec)

    @classmethod
    def set_of(cls, items: Iterable[str]) -> "OutputPayload":
        return cls(OutputKind.SET, frozenset(items))

    @classmethod
    def category(cls, label: str) -> "OutputPayload":
        return cls(OutputKind.CATEGORY, label)

    @classmethod
    def tokens(cls, toks: Iterable[str]) -> "OutputPayload":
        return cls(OutputKind.TOKENS, tuple(toks))

    @classmethod
    def vector(cls, xs: Iterable[float]) -> "OutputPayload":
        return cls(OutputKind.SCALAR_VEC, tuple(xs))

    def to_json(self) -> dict:
        if self.kind is OutputKind.SET:
            value = sorted(self.value)
        elif self.kind is OutputKind.CATEGORY:
            value = self.value
        else:
            value = list(self.value)
        return {"kind": self.kind.value, "value": value}


@dataclass(frozen=True)
class RunRecord:
    dataset_id: str
    question_id: str
    run_index: int
    output: OutputPayload
    score: float
    trace_vector: tuple[float, ...] | None = None
    approach_hint: str | None = None

    @property
    def key(self) -> tuple[str, str, int]:
        return (self.dataset_id, self.question_id, self.run_index)

    def to_json(self) -> dict:
        obj = {
            "dataset_id": self.dataset_id,
            "question_id": self.question_id,
            "run_index": self.run_index,
            "output": self.output.to_json(),
            "score": self.score,
        }
        if self.trace_vector is not None:
            obj["trace_vector"] = list(self.trace_vector)
        if self.approach_hint is not None:
            obj["approach_hint"] = self.approach_hint
        return obj


@dataclass(frozen=True)
class QuestionGroup:
    dataset_id: str
    question_id: str
    runs: tuple[RunRecord, ...]

    @property
    def scores(self) -> list[float]:
        return [r.score for r in self.runs]

    def __len__(self) -> int:
        return len(self.runs)


@dataclass(frozen=True)
class RunSet:
    records: tuple[RunRecord, ...]
    source: str = "<stream>"
    ingested_at: datetime = field(
        default_factory=lambda: datetime.now(timezone.utc), compare=False
    )
    unknown_fields: int = field(default=0, compare=False)

    def __len__(self) -> int:
        return len(self.records)

    def __iter__(self):
        return iter(self.records)

    def datasets(self) -> list[str]:
        return sorted({r.dataset_id for r in self.records})

    def for_dataset(self, dataset_id: str) -> list[RunRecord]:
        return [r for r in self.records if r.dataset_id == dataset_id]


def _payload_from_json(obj, line_no: int) -> OutputPayload:
    if not isinstance(obj, dict) or "kind" not in obj or "value" not in obj:
        raise MalformedLine(line_no, "output must be an object with 'kind' and 'value'")
    kind, value = obj["kind"], obj["value"]
    try:
        kind = OutputKind(kind)
    except ValueError:
        raise MalformedLine(line_no, f"unknown output kind {kind!r}") from None
    if kind is OutputKind.CATEGORY:
        if not isinstance(value, str):
            raise MalformedLine(line_no, "category value must be a string")
    elif kind is OutputKind.SCALAR_VEC:
        if not isinstance(value, list) or not value or not all(_is_real(x) for x in value):
            raise MalformedLine(line_no, "vector value must be a non-empty list of numbers")
    elif not isinstance(value, list) or not all(isinstance(x, str) for x in value):
        raise MalformedLine(line_no, f"{kind.value} value must be a list of strings")
    return OutputPayload(kind, value)


def _is_real(x) -> bool:
    return isinstance(x, (int, float)) and not isinstance(x, bool) and math.isfinite(x)


def _record_from_json(obj, line_no: int) -> tuple[RunRecord, int]:
    if not isinstance(obj, dict):
        raise MalformedLine(line_no, "expected a JSON object")
    missing = [k for k in _REQUIRED if k not in obj]
    if missing:
        raise MalformedLine(line_no, f"missing required field(s): {', '.join(missing)}")
    ds, q, idx, score = obj["dataset_id"], obj["question_id"], obj["run_index"], obj["score"]
    if not isinstance(ds, str) or not isinstance(q, str):
        raise MalformedLine(line_no, "dataset_id and question_id must be strings")
    if not isinstance(idx, int) or isinstance(idx, bool) or idx < 0:
        raise MalformedLine(line_no, "run_index must be a non-negative integer")
    if not _is_real(score):
        raise MalformedLine(line_no, "score must be a finite number")
    if not 0.0 <= score <= 1.0:
        raise ScoreOutOfRange(line_no, score)
    payload = _payload_from_json(obj["output"], line_no)

    trace = obj.get("trace_vector")
    if trace is not None:
        if not isinstance(trace, list) or not trace or not all(_is_real(x) for x in trace):
            raise MalformedLine(line_no, "trace_vector must be a non-empty list of numbers")
        trace = tuple(float(x) for x in trace)
    hint = obj.get("approach_hint")
    if hint is not None and not isinstance(hint, str):
        raise MalformedLine(line_no, "approach_hint must be a string")

    unknown = sum(1 for k in obj if k not in _KNOWN)
    rec = RunRecord(ds, q, idx, payload, float(score), trace, hint)
    return rec, unknown


def _iter_lines(stream) -> Iterable[str]:
    if isinstance(stream, (bytes, bytearray)):
        stream = io.BytesIO(stream)
    elif isinstance(stream, str):
        stream = io.StringIO(stream)
    for raw in stream:
        if isinstance(raw, (bytes, bytearray)):
            raw = raw.decode("utf-8")
        yield raw


def parse_run_records(stream: bytes | str | IO, source: str = "<stream>") -> RunSet:
    """Parse a JSON Lines stream into a :class:`RunSet`.

    Blank lines are skipped; line numbers in errors are 1-based physical lines.
    """
    records: list[RunRecord] = []
    seen: dict[tuple[str, str, int], int] = {}
    unknown = 0
    for line_no, line in enumerate(_iter_lines(stream), start=1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise MalformedLine(line_no, f"invalid JSON ({exc.msg})") from None
        rec, n_unknown = _record_from_json(obj, line_no)
        if rec.key in seen:
            raise DuplicateKey(
                f"line {line_no}: duplicate (dataset, question, run_index) {rec.key}, "
                f"first seen on line {seen[rec.key]}",
                key=rec.key,
            )
        seen[rec.key] = line_no
        unknown += n_unknown
        records.append(rec)
    if unknown:
        log.warning("%s: ignored %d unknown field(s)", source, unknown)
    return RunSet(tuple(records), source=source, unknown_fields=unknown)


def read_run_records(path: str | Path) -> RunSet:
    path = Path(path)
    with path.open("rb") as fh:
        return parse_run_records(fh, source=str(path))


def serialize_run_records(runs: RunSet | Sequence[RunRecord]) -> str:
    return "".join(json.dumps(r.to_json(), sort_keys=True) + "\n" for r in runs)


def validate_run_set(runs: RunSet) -> RunSet:
    """Reject empty sets and per-question trace-vector dimension mismatches."""
    if len(runs) == 0:
        raise EmptyRunSet(f"{runs.source}: no records")
    dims: dict[tuple[str, str], int] = {}
    for r in runs:
        if r.trace_vector is None:
            continue
        k = (r.dataset_id, r.question_id)
        d = dims.setdefault(k, len(r.trace_vector))
        if d != len(r.trace_vector):
            raise DimensionMismatch(
                f"question {k}: trace_vector dimension {len(r.trace_vector)} != {d}"
            )
    return runs


def group_by_question(runs: RunSet | Iterable[RunRecord]) -> list[QuestionGroup]:
    def qkey(r):
        return (r.dataset_id, r.question_id)

    ordered = sorted(runs, key=lambda r: (r.dataset_id, r.question_id, r.run_index))
    return [
        QuestionGroup(ds, q, tuple(members))
        for (ds, q), members in groupby(ordered, key=qkey)
    ]


def is_mixed(group: QuestionGroup, score_tolerance: float = DEFAULT_SCORE_TOLERANCE) -> bool:
    scores = group.scores
    return bool(scores) and max(scores) - min(scores) > score_tolerance


def filter_mixed_questions(
    groups: Iterable[QuestionGroup], score_tolerance: float = DEFAULT_SCORE_TOLERANCE
) -> list[QuestionGroup]:
    """Keep groups whose score spread exceeds ``score_tolerance``."""
    if score_tolerance < 0:
        raise ValueError("score_tolerance must be >= 0")
    return [g for g in groups if is_mixed(g, score_tolerance)]
