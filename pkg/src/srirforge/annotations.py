"""Frame-level activity annotations on a 100 ms grid.

CSV rows are `frame,class,source,azimuth,elevation`, all integers, no header:
frame is the 100 ms index, source a track id (0..2), azimuth in [-180, 180),
elevation in [-90, 90].
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

FRAME_SECONDS = 0.1


@dataclass
class FrameAnnotations:
    """Ordered (frame, class_id, source, azimuth, elevation) integer rows."""

    rows: list[tuple[int, int, int, int, int]] = field(default_factory=list)

    def add(self, frame: int, class_id: int, source: int, azimuth: int, elevation: int):
        if not -180 <= azimuth < 180:
            raise ValueError(f"azimuth {azimuth} outside [-180, 180)")
        if not -90 <= elevation <= 90:
            raise ValueError(f"elevation {elevation} outside [-90, 90]")
        self.rows.append((int(frame), int(class_id), int(source), int(azimuth), int(elevation)))

    def sort(self):
        self.rows.sort(key=lambda r: (r[0], r[2], r[1]))

    def active_frames(self) -> set[int]:
        return {r[0] for r in self.rows}

    def polyphony(self) -> dict[int, int]:
        counts: dict[int, int] = {}
        for r in self.rows:
            counts[r[0]] = counts.get(r[0], 0) + 1
        return counts

    def to_csv(self) -> str:
        return "".join(f"{f},{c},{s},{az},{el}\n" for f, c, s, az, el in self.rows)

    def write(self, path):
        Path(path).write_text(self.to_csv())

    @classmethod
    def from_csv(cls, text: str) -> "FrameAnnotations":
        ann = cls()
        for lineno, line in enumerate(text.splitlines(), start=1):
            line = line.strip()
            if not line:
                continue
            parts = line.split(",")
            if len(parts) != 5:
                raise ValueError(f"line {lineno}: expected 5 integer fields, got {line!r}")
            try:
                frame, class_id, source, az, el = (int(p) for p in parts)
            except ValueError as exc:
                raise ValueError(f"line {lineno}: non-integer field in {line!r}") from exc
            ann.add(frame, class_id, source, az, el)
        return ann

    @classmethod
    def read(cls, path) -> "FrameAnnotations":
        path = Path(path)
        try:
            text = path.read_text()
        except OSError as exc:
            raise ValueError(f"cannot read annotations {path}: {exc}") from exc
        try:
            return cls.from_csv(text)
        except ValueError as exc:
            raise ValueError(f"{path}: {exc}") from exc
