"""Time spans and laughter annotations (with their JSON form)."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

from .errors import DataError, FormatError

KINDS = ("laughter", "music", "other")


@dataclass(frozen=True, order=True)
class TimeSpan:
    start_s: float
    end_s: float

    def __post_init__(self):
        if self.start_s < 0:
            raise ValueError(f"span start must be >= 0, got {self.start_s}")
        if not self.end_s > self.start_s:
            raise ValueError(f"span end {self.end_s} must exceed start {self.start_s}")

    @property
    def duration(self) -> float:
        return self.end_s - self.start_s


@dataclass(frozen=True)
class Event:
    span: TimeSpan
    kind: str = "laughter"

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown event kind {self.kind!r}")


@dataclass
class LaughterAnnotation:
    media_id: str
    events: list[Event] = field(default_factory=list)
    duration_s: float | None = None  # length of the media, when known

    def __post_init__(self):
        self.events = sorted(self.events, key=lambda e: (e.span.start_s, e.span.end_s))
        laughs = self.laughter_spans()
        for a, b in zip(laughs, laughs[1:]):
            if b.start_s < a.end_s:
                raise DataError(f"{self.media_id}: overlapping laughter events {a} and {b}")

    def laughter_spans(self) -> list[TimeSpan]:
        return [e.span for e in self.events if e.kind == "laughter"]

    def to_dict(self) -> dict:
        d = {
            "media_id": self.media_id,
            "events": [
                {"start_s": e.span.start_s, "end_s": e.span.end_s, "kind": e.kind}
                for e in self.events
            ],
        }
        if self.duration_s is not None:
            d["duration_s"] = self.duration_s
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "LaughterAnnotation":
        try:
            events = [
                Event(TimeSpan(float(e["start_s"]), float(e["end_s"])), e.get("kind", "laughter"))
                for e in d["events"]
            ]
            dur = d.get("duration_s")
            return cls(str(d["media_id"]), events, None if dur is None else float(dur))
        except (KeyError, TypeError, ValueError) as exc:
            raise FormatError(f"malformed annotation: {exc}") from exc


def save_annotation(ann: LaughterAnnotation, path: str | Path) -> None:
    Path(path).write_text(json.dumps(ann.to_dict(), indent=2) + "\n")


def load_annotation(path: str | Path) -> LaughterAnnotation:
    try:
        d = json.loads(Path(path).read_text())
    except FileNotFoundError as exc:
        raise DataError(f"annotation file not found: {path}") from exc
    except json.JSONDecodeError as exc:
        raise FormatError(f"{path}: invalid JSON ({exc})") from exc
    return LaughterAnnotation.from_dict(d)
