"""Joint localization-detection scoring of frame-level annotations.

Within each frame and class, references and predictions are paired by a
minimum-total-angular-distance optimal assignment. A pair inside the spatial
threshold is a true positive; outside it counts one false positive plus one
false negative. The class-dependent localization error and recall use all
class-matched pairs regardless of threshold.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linear_sum_assignment

from .annotations import FrameAnnotations
from .geometry import Direction, angular_distance, sph_to_cart

DEFAULT_THRESHOLD_DEG = 20.0


class EmptyReferenceError(ValueError):
    """Scores are undefined when the reference contains no events."""


@dataclass(eq=False)
class FrameEvent:
    frame: int
    class_id: int
    doa: np.ndarray

    @classmethod
    def from_angles(cls, frame: int, class_id: int, azimuth: float, elevation: float):
        az = azimuth if azimuth > -180 else azimuth + 360.0
        return cls(frame=frame, class_id=class_id,
                   doa=sph_to_cart(Direction(az, elevation), 1.0))


@dataclass
class ClassStats:
    tp: int = 0
    fp: int = 0
    fn: int = 0
    n_matched: int = 0
    sum_angular_error: float = 0.0
    n_ref: int = 0

    @property
    def f_score(self) -> float:
        denom = 2 * self.tp + self.fp + self.fn
        return 2 * self.tp / denom if denom else 0.0

    @property
    def localization_error(self) -> float | None:
        return self.sum_angular_error / self.n_matched if self.n_matched else None

    @property
    def localization_recall(self) -> float:
        return self.n_matched / self.n_ref if self.n_ref else 0.0


@dataclass(eq=False)
class SeldScores:
    er20: float
    f20: float
    le_cd: float | None
    lr_cd: float
    per_class: dict[int, ClassStats] = field(default_factory=dict)
    threshold: float = DEFAULT_THRESHOLD_DEG


@dataclass(eq=False)
class FrameMatch:
    pairs: list[tuple[int, int, float]] = field(default_factory=list)  # (ref_i, pred_i, deg)
    unmatched_refs: list[int] = field(default_factory=list)
    unmatched_preds: list[int] = field(default_factory=list)


def events_from_annotations(annotations: FrameAnnotations) -> list[FrameEvent]:
    return [
        FrameEvent.from_angles(frame, class_id, float(az), float(el))
        for frame, class_id, _source, az, el in annotations.rows
    ]


def match_frame(refs: list[FrameEvent], preds: list[FrameEvent]) -> dict[int, FrameMatch]:
    """Per-class optimal assignment between same-frame events.

    Returns a FrameMatch per class occurring on either side; items of a class
    with no counterpart are reported unmatched (indices into the input lists).
    """
    classes = {e.class_id for e in refs} | {e.class_id for e in preds}
    result: dict[int, FrameMatch] = {}
    for class_id in sorted(classes):
        ref_idx = [i for i, e in enumerate(refs) if e.class_id == class_id]
        pred_idx = [i for i, e in enumerate(preds) if e.class_id == class_id]
        match = FrameMatch()
        if ref_idx and pred_idx:
            cost = np.array(
                [[angular_distance(refs[i].doa, preds[j].doa) for j in pred_idx] for i in ref_idx]
            )
            rows, cols = linear_sum_assignment(cost)
            taken_r, taken_p = set(), set()
            for r, c in zip(rows, cols):
                match.pairs.append((ref_idx[r], pred_idx[c], float(cost[r, c])))
                taken_r.add(ref_idx[r])
                taken_p.add(pred_idx[c])
            match.unmatched_refs = [i for i in ref_idx if i not in taken_r]
            match.unmatched_preds = [j for j in pred_idx if j not in taken_p]
        else:
            match.unmatched_refs = ref_idx
            match.unmatched_preds = pred_idx
        result[class_id] = match
    return result


def _as_events(x) -> list[FrameEvent]:
    if isinstance(x, FrameAnnotations):
        return events_from_annotations(x)
    return list(x)


def compute_scores(
    ref,
    pred,
    threshold: float = DEFAULT_THRESHOLD_DEG,
    segment_frames: int = 1,
) -> SeldScores:
    """Score predictions against a reference on a shared frame grid.

    Accepts FrameAnnotations or lists of FrameEvent. `segment_frames` > 1
    pools consecutive frames into coarser scoring units before matching; the
    default scores frame by frame.
    """
    if segment_frames < 1:
        raise ValueError(f"segment_frames must be >= 1, got {segment_frames}")
    ref_events = _as_events(ref)
    pred_events = _as_events(pred)
    if not ref_events:
        raise EmptyReferenceError("reference contains no events; metrics are undefined")

    by_unit_ref: dict[int, list[FrameEvent]] = {}
    by_unit_pred: dict[int, list[FrameEvent]] = {}
    for e in ref_events:
        by_unit_ref.setdefault(e.frame // segment_frames, []).append(e)
    for e in pred_events:
        by_unit_pred.setdefault(e.frame // segment_frames, []).append(e)

    per_class: dict[int, ClassStats] = {}
    error_count = 0  # substitutions + deletions + insertions over all units
    for unit in sorted(set(by_unit_ref) | set(by_unit_pred)):
        refs = by_unit_ref.get(unit, [])
        preds = by_unit_pred.get(unit, [])
        unit_fp = 0
        unit_fn = 0
        for class_id, m in match_frame(refs, preds).items():
            stats = per_class.setdefault(class_id, ClassStats())
            for _ri, _pi, angle in m.pairs:
                stats.n_matched += 1
                stats.sum_angular_error += angle
                if angle <= threshold:
                    stats.tp += 1
                else:
                    stats.fp += 1
                    stats.fn += 1
                    unit_fp += 1
                    unit_fn += 1
            stats.fp += len(m.unmatched_preds)
            stats.fn += len(m.unmatched_refs)
            unit_fp += len(m.unmatched_preds)
            unit_fn += len(m.unmatched_refs)
        substitutions = min(unit_fp, unit_fn)
        deletions = max(0, unit_fn - unit_fp)
        insertions = max(0, unit_fp - unit_fn)
        error_count += substitutions + deletions + insertions

    for e in ref_events:
        per_class.setdefault(e.class_id, ClassStats()).n_ref += 1

    present = sorted(c for c, st in per_class.items() if st.n_ref > 0)
    f20 = float(np.mean([per_class[c].f_score for c in present]))
    lr_cd = float(np.mean([per_class[c].localization_recall for c in present]))
    le_values = [
        per_class[c].localization_error for c in present if per_class[c].n_matched > 0
    ]
    le_cd = float(np.mean(le_values)) if le_values else None
    er20 = error_count / len(ref_events)
    return SeldScores(er20=er20, f20=f20, le_cd=le_cd, lr_cd=lr_cd,
                      per_class=per_class, threshold=threshold)


def _fmt_le(le: float | None, decimals: int = 1) -> str:
    return "n/a" if le is None else f"{le:.{decimals}f}°"


def report(scores: SeldScores, format: str = "text") -> str:
    """Render scores: a cross-class line plus a per-class table."""
    if format == "text":
        lines = [
            f"ER {scores.er20:.2f}  F {scores.f20 * 100:.1f}%  "
            f"LE {_fmt_le(scores.le_cd)}  LR {scores.lr_cd * 100:.1f}%",
            "",
            f"{'class':>5}  {'F20':>7}  {'LE':>8}  {'LR':>7}",
        ]
        for class_id in sorted(scores.per_class):
            st = scores.per_class[class_id]
            le = _fmt_le(st.localization_error)
            lines.append(
                f"{class_id:>5}  {st.f_score * 100:6.1f}%  {le:>8}  "
                f"{st.localization_recall * 100:6.1f}%"
            )
        return "\n".join(lines) + "\n"
    if format == "csv":
        rows = ["section,class,er20,f20,le_cd,lr_cd,tp,fp,fn,n_matched,sum_angular_error,n_ref,threshold"]
        le = "" if scores.le_cd is None else repr(float(scores.le_cd))
        rows.append(
            f"overall,,{float(scores.er20)!r},{float(scores.f20)!r},{le},"
            f"{float(scores.lr_cd)!r},,,,,,,{float(scores.threshold)!r}"
        )
        for class_id in sorted(scores.per_class):
            st = scores.per_class[class_id]
            rows.append(
                f"class,{class_id},,,,,{st.tp},{st.fp},{st.fn},{st.n_matched},"
                f"{float(st.sum_angular_error)!r},{st.n_ref},"
            )
        return "\n".join(rows) + "\n"
    raise ValueError(f"unknown report format {format!r}")


def scores_from_csv(text: str) -> SeldScores:
    """Parse a CSV report back into SeldScores (inverse of report(format='csv'))."""
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines or not lines[0].startswith("section,"):
        raise ValueError("not a scores CSV: missing header")
    overall = None
    per_class: dict[int, ClassStats] = {}
    for line in lines[1:]:
        parts = line.split(",")
        if parts[0] == "overall":
            overall = {
                "er20": float(parts[2]),
                "f20": float(parts[3]),
                "le_cd": float(parts[4]) if parts[4] else None,
                "lr_cd": float(parts[5]),
                "threshold": float(parts[12]),
            }
        elif parts[0] == "class":
            per_class[int(parts[1])] = ClassStats(
                tp=int(parts[6]), fp=int(parts[7]), fn=int(parts[8]),
                n_matched=int(parts[9]), sum_angular_error=float(parts[10]),
                n_ref=int(parts[11]),
            )
        else:
            raise ValueError(f"unknown row section {parts[0]!r}")
    if overall is None:
        raise ValueError("scores CSV has no overall row")
    return SeldScores(per_class=per_class, **overall)
