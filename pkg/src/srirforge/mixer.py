"""Spatial sound-event mixture synthesis.

Schedules labeled clips onto a room's SRIR bank under polyphony/activity
constraints, spatializes them (static convolution, or segmented convolution
with complementary raised-cosine crossfades for moving sources), and emits
60 s 4-channel mixtures with 100 ms frame annotations.
"""

from __future__ import annotations

import hashlib
import json
import logging
import math
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

import numpy as np
from scipy.signal import fftconvolve, resample_poly

from .annotations import FRAME_SECONDS, FrameAnnotations
from .bank import BankEntry, SrirBank
from .geometry import CircularTrajectory, cart_to_sph
from .ism import Srir
from .wavio import read_wav, write_wav_pcm16

log = logging.getLogger(__name__)

TARGET_RATE = 24000
INGEST_PEAK_DBFS = -3.0
TRIM_FLOOR_DBFS = -60.0
MIX_PEAK_DBFS = -1.0
DATASET_MANIFEST_NAME = "manifest.json"
DATASET_FORMAT = "srirforge-dataset-v1"


class SchedulingError(RuntimeError):
    """Event placement could not satisfy the activity/polyphony constraints."""


@dataclass(eq=False)
class EventClip:
    """One labeled mono event at the working sample rate."""

    class_id: int
    samples: np.ndarray
    source_id: str
    sample_rate: int = TARGET_RATE

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=float)
        if self.samples.ndim != 1:
            raise ValueError(f"event clip must be mono, got shape {self.samples.shape}")
        if self.samples.size == 0 or not np.any(self.samples):
            raise ValueError(f"event clip {self.source_id!r} is silent")

    @property
    def duration(self) -> float:
        return self.samples.shape[0] / self.sample_rate


@dataclass(frozen=True)
class StaticMotion:
    trajectory_id: int
    height_id: int
    index: int


@dataclass(frozen=True)
class DynamicMotion:
    trajectory_id: int
    height_id: int
    start_index: int
    direction: int  # +1 or -1 along the trace
    angular_speed: float  # deg/s


Motion = StaticMotion | DynamicMotion


@dataclass(eq=False)
class ScheduledEvent:
    clip: EventClip
    onset: float  # seconds, aligned to the annotation grid
    motion: Motion
    track: int
    gain_db: float = 0.0

    @property
    def duration(self) -> float:
        return self.clip.duration


@dataclass(eq=False)
class EventTimeline:
    room_name: str
    fold: str
    events: list[ScheduledEvent]
    duration: float
    seed_key: tuple[int, ...] | None = None


@dataclass
class MixtureConfig:
    duration: float = 60.0
    min_activity: float = 40.0
    max_polyphony: int = 3
    speeds: tuple[float, ...] = (10.0, 20.0, 40.0)
    static_prob: float = 0.5
    gain_db_range: tuple[float, float] = (-6.0, 0.0)
    class_balanced: bool = True
    min_events: int = 0
    max_events: int | None = None
    max_retries: int = 2000
    noise_floor_db: float | None = None  # optional ambient noise, off by default


@dataclass
class DatasetConfig:
    mixture: MixtureConfig = field(default_factory=MixtureConfig)
    n_train_rooms: int = 6
    n_val_rooms: int = 3
    base_train: int = 900
    base_val: int = 300
    scale: float = 1.0

    @property
    def n_train(self) -> int:
        return max(1, round(self.base_train * self.scale))

    @property
    def n_val(self) -> int:
        return max(1, round(self.base_val * self.scale))


def _to_mono(data: np.ndarray) -> np.ndarray:
    if data.ndim == 1:
        return data
    return data.mean(axis=1)


def _resample(x: np.ndarray, rate_in: int, rate_out: int) -> np.ndarray:
    if rate_in == rate_out:
        return x
    ratio = Fraction(rate_out, rate_in)
    return resample_poly(x, ratio.numerator, ratio.denominator)


def _trim_silence(x: np.ndarray, floor: float) -> np.ndarray:
    loud = np.nonzero(np.abs(x) >= floor)[0]
    if loud.size == 0:
        return x[:0]
    return x[loud[0] : loud[-1] + 1]


def ingest_corpus(directory, label_map: dict[str, int], sample_rate: int = TARGET_RATE) -> list[EventClip]:
    """Load a labeled corpus: one subdirectory per label, WAV files inside.

    Clips are downmixed to mono, resampled, peak-normalized to -3 dBFS, and
    silence-trimmed at -60 dBFS edges. Subdirectories whose label is not in
    `label_map` are skipped with a warning.
    """
    directory = Path(directory)
    if not directory.is_dir():
        raise ValueError(f"corpus directory not found: {directory}")
    clips: list[EventClip] = []
    skipped_labels = 0
    skipped_silent = 0
    for label_dir in sorted(p for p in directory.iterdir() if p.is_dir()):
        if label_dir.name not in label_map:
            skipped_labels += 1
            continue
        class_id = label_map[label_dir.name]
        for wav_path in sorted(label_dir.glob("*.wav")):
            rate, data = read_wav(wav_path)
            x = _resample(_to_mono(data), rate, sample_rate)
            peak = float(np.max(np.abs(x))) if x.size else 0.0
            if peak == 0.0:
                skipped_silent += 1
                continue
            x = x * (10.0 ** (INGEST_PEAK_DBFS / 20.0) / peak)
            x = _trim_silence(x, 10.0 ** (TRIM_FLOOR_DBFS / 20.0))
            if x.size == 0:
                skipped_silent += 1
                continue
            clips.append(
                EventClip(class_id=class_id, samples=x,
                          source_id=f"{label_dir.name}/{wav_path.name}",
                          sample_rate=sample_rate)
            )
    if skipped_labels:
        log.warning("ingest: skipped %d unmapped label directories", skipped_labels)
    if skipped_silent:
        log.warning("ingest: skipped %d silent clips", skipped_silent)
    if not clips:
        log.warning("ingest: corpus %s produced no clips", directory)
    return clips


def _segment_length(sample_rate: int, spacing_deg: float, speed: float) -> int:
    seg = int(round(sample_rate * spacing_deg / speed))
    if seg < 2:
        raise ValueError(
            f"angular speed {speed} deg/s with {spacing_deg} deg spacing gives a "
            f"{seg}-sample segment; too short"
        )
    return seg


def _n_segments(n_samples: int, seg_len: int) -> int:
    return max(1, math.ceil(n_samples / seg_len))


def spatialize_static(clip: EventClip, srir: Srir) -> np.ndarray:
    """Full linear convolution of the clip with each SRIR channel."""
    if clip.sample_rate != srir.sample_rate:
        raise ValueError(
            f"sample rate mismatch: clip {clip.sample_rate} vs SRIR {srir.sample_rate}"
        )
    return fftconvolve(clip.samples[:, None], np.asarray(srir.data, dtype=float), axes=0)


def _ramp_up(n: int) -> np.ndarray:
    return 0.5 - 0.5 * np.cos(np.pi * (np.arange(n) + 0.5) / n)


def spatialize_moving(
    clip: EventClip, srirs: list[Srir], speed: float, spacing_deg: float = 1.0
) -> np.ndarray:
    """Moving-source rendering: per-segment convolution with crossfades.

    The clip is cut into segments of spacing/speed seconds, one SRIR per
    segment, with raised-cosine crossfades over half a segment at each
    boundary. Fade-in and fade-out sum to one, so a constant SRIR sequence
    reproduces the static render exactly.
    """
    if not srirs:
        raise ValueError("empty SRIR sequence")
    for srir in srirs:
        if clip.sample_rate != srir.sample_rate:
            raise ValueError(
                f"sample rate mismatch: clip {clip.sample_rate} vs SRIR {srir.sample_rate}"
            )
    ir_len = srirs[0].length
    n_ch = srirs[0].n_channels
    if any(s.length != ir_len or s.n_channels != n_ch for s in srirs):
        raise ValueError("SRIR sequence entries differ in shape")
    x = clip.samples
    n = x.shape[0]
    seg_len = _segment_length(clip.sample_rate, spacing_deg, speed)
    n_seg = _n_segments(n, seg_len)
    travel_deg = clip.duration * speed
    if travel_deg > (len(srirs) - 1) * spacing_deg + 1e-9:
        raise ValueError(
            f"SRIR sequence too short: the clip travels {travel_deg:.1f} deg at "
            f"{speed} deg/s but the sequence spans {(len(srirs) - 1) * spacing_deg:.1f} deg"
        )
    fade = max(1, seg_len // 2)
    half_lo = fade // 2
    ramp = _ramp_up(fade)
    out = np.zeros((n + ir_len - 1, n_ch))
    # crossfade region at boundary b covers [b - half_lo, b - half_lo + fade);
    # both neighbors index their ramps from the region start, so fade-out and
    # fade-in always sum to one even where the clip end truncates a region
    for k in range(n_seg):
        left = 0 if k == 0 else k * seg_len - half_lo
        right = n if k == n_seg - 1 else min(n, (k + 1) * seg_len - half_lo + fade)
        w = np.ones(right - left)
        if k > 0:
            m = min(fade, right - left)
            w[:m] = ramp[:m]
        if k < n_seg - 1:
            rstart = (k + 1) * seg_len - half_lo - left
            m = right - left - rstart
            w[rstart : rstart + m] = 1.0 - ramp[:m]
        seg = fftconvolve((x[left:right] * w)[:, None], np.asarray(srirs[k].data, dtype=float), axes=0)
        out[left : left + seg.shape[0]] += seg
    return out


def _event_frames(onset: float, duration: float, n_frames: int) -> range:
    f0 = int(round(onset / FRAME_SECONDS))
    f1 = int(math.floor((onset + duration) / FRAME_SECONDS + 1e-9))
    return range(max(0, f0), min(n_frames - 1, f1) + 1)


def schedule_events(
    corpus: list[EventClip],
    bank: SrirBank,
    config: MixtureConfig,
    rng: np.random.Generator,
    room_name: str | None = None,
    fold: str = "train",
) -> EventTimeline:
    """Place events until at least `min_activity` seconds of the mixture have
    one active source, never exceeding `max_polyphony` concurrent sources.

    Events are static or dynamic with probability `static_prob`; dynamic ones
    draw a speed uniformly from `speeds` and a contiguous trajectory slice
    long enough for the clip at that speed. Deterministic for a given
    (rng state, corpus order, bank).
    """
    if not corpus:
        raise SchedulingError("empty corpus")
    if not bank.entries:
        raise SchedulingError("empty SRIR bank")
    n_frames = int(round(config.duration / FRAME_SECONDS))
    tail = bank.spec.srir_length / bank.spec.sample_rate
    spacing = bank.spec.spacing_deg
    traj_keys = bank.trajectory_keys()
    slice_lens = {key: len(bank.trajectory_slice(*key)) for key in traj_keys}
    circular_keys = {
        (t.group_index, t.height_index)
        for t in bank.spec.trajectories
        if isinstance(t, CircularTrajectory)
    }
    by_class: dict[int, list[EventClip]] = {}
    for clip in corpus:
        by_class.setdefault(clip.class_id, []).append(clip)
    class_ids = sorted(by_class)

    counts = np.zeros(n_frames, dtype=int)
    track_busy = np.zeros((n_frames, config.max_polyphony), dtype=bool)
    events: list[ScheduledEvent] = []
    retries = 0
    while True:
        activity = float(np.count_nonzero(counts > 0)) * FRAME_SECONDS
        if activity >= config.min_activity and len(events) >= config.min_events:
            break
        if config.max_events is not None and len(events) >= config.max_events:
            break
        if retries > config.max_retries or len(events) > config.max_polyphony * n_frames:
            raise SchedulingError(
                f"gave up after {retries} retries: {len(events)} events placed, "
                f"{activity:.1f}s of {config.min_activity}s activity covered"
            )
        if config.class_balanced:
            class_id = class_ids[int(rng.integers(len(class_ids)))]
            clip = by_class[class_id][int(rng.integers(len(by_class[class_id])))]
        else:
            clip = corpus[int(rng.integers(len(corpus)))]
        max_onset = config.duration - clip.duration - tail
        if max_onset < 0:
            retries += 1
            continue
        onset_frame = int(rng.integers(int(max_onset / FRAME_SECONDS) + 1))
        onset = onset_frame * FRAME_SECONDS
        frames = _event_frames(onset, clip.duration, n_frames)
        if np.any(counts[frames.start : frames.stop] >= config.max_polyphony):
            retries += 1
            continue

        if rng.random() < config.static_prob:
            tkey = traj_keys[int(rng.integers(len(traj_keys)))]
            motion: Motion = StaticMotion(
                trajectory_id=tkey[0], height_id=tkey[1],
                index=int(rng.integers(slice_lens[tkey])),
            )
        else:
            # speed uniform over feasible speeds, then a trajectory whose
            # slice is long enough, so short traces don't skew the
            # static/dynamic ratio (circular traces wrap and always fit)
            by_speed = {}
            for speed in config.speeds:
                # one SRIR per segment plus the end-of-path sample, so the
                # sequence span covers duration * speed
                needed = 1 + _n_segments(
                    clip.samples.shape[0], _segment_length(clip.sample_rate, spacing, speed)
                )
                keys = [
                    tkey for tkey in traj_keys
                    if tkey in circular_keys or needed <= slice_lens[tkey]
                ]
                if keys:
                    by_speed[speed] = (keys, needed)
            if not by_speed:
                retries += 1
                continue
            speeds_ok = sorted(by_speed)
            speed = speeds_ok[int(rng.integers(len(speeds_ok)))]
            keys, needed = by_speed[speed]
            tkey = keys[int(rng.integers(len(keys)))]
            slice_len = slice_lens[tkey]
            direction = 1 if rng.random() < 0.5 else -1
            if tkey in circular_keys:
                start = int(rng.integers(slice_len))
            elif direction == 1:
                start = int(rng.integers(slice_len - needed + 1))
            else:
                start = int(rng.integers(needed - 1, slice_len))
            motion = DynamicMotion(
                trajectory_id=tkey[0], height_id=tkey[1], start_index=start,
                direction=direction, angular_speed=speed,
            )

        track = -1
        for t in range(config.max_polyphony):
            if not track_busy[frames.start : frames.stop, t].any():
                track = t
                break
        if track < 0:
            retries += 1
            continue
        gain_db = float(rng.uniform(*config.gain_db_range))
        events.append(ScheduledEvent(clip=clip, onset=onset, motion=motion,
                                     track=track, gain_db=gain_db))
        counts[frames.start : frames.stop] += 1
        track_busy[frames.start : frames.stop, track] = True

    return EventTimeline(
        room_name=room_name or bank.spec.name, fold=fold,
        events=events, duration=config.duration,
    )


def _motion_entries(bank: SrirBank, event: ScheduledEvent) -> list[BankEntry]:
    m = event.motion
    entries = bank.trajectory_slice(m.trajectory_id, m.height_id)
    if not entries:
        raise ValueError(
            f"bank has no trajectory (group {m.trajectory_id}, height {m.height_id})"
        )
    if isinstance(m, StaticMotion):
        return [entries[m.index]]
    seg_len = _segment_length(event.clip.sample_rate, bank.spec.spacing_deg, m.angular_speed)
    needed = 1 + _n_segments(event.clip.samples.shape[0], seg_len)
    n = len(entries)
    circular = any(
        isinstance(t, CircularTrajectory)
        and (t.group_index, t.height_index) == (m.trajectory_id, m.height_id)
        for t in bank.spec.trajectories
    )
    picked = []
    for k in range(needed):
        idx = m.start_index + m.direction * k
        if circular:
            idx %= n
        elif not 0 <= idx < n:
            raise ValueError(
                f"dynamic event runs off the trajectory: index {idx} of {n}"
            )
        picked.append(entries[idx])
    return picked


def _doa_to_int_angles(doa: np.ndarray) -> tuple[int, int]:
    direction, _ = cart_to_sph(doa)
    az = int(math.floor(direction.azimuth + 0.5))
    el = int(math.floor(direction.elevation + 0.5))
    if az >= 180:
        az -= 360
    return az, el


def render_mixture(
    timeline: EventTimeline,
    bank: SrirBank,
    config: MixtureConfig | None = None,
    rng: np.random.Generator | None = None,
) -> tuple[np.ndarray, FrameAnnotations, float]:
    """Render a timeline into (audio, annotations, normalization gain).

    Audio is float, shape (duration * fs, channels), peak-normalized to
    -1 dBFS with the single global gain returned alongside. Annotations are
    emitted on the 100 ms grid while each event is active, with the DoA of
    the trajectory sample under the event's current angular position. When
    `config.noise_floor_db` is set, Gaussian ambience at that level is added
    before normalization (requires `rng`).
    """
    config = config or MixtureConfig(duration=timeline.duration)
    fs = bank.spec.sample_rate
    spacing = bank.spec.spacing_deg
    n_samples = int(round(timeline.duration * fs))
    n_frames = int(round(timeline.duration / FRAME_SECONDS))
    n_ch = bank.entries[0].srir.n_channels if bank.entries else 4
    audio = np.zeros((n_samples, n_ch))
    ann = FrameAnnotations()
    for event in timeline.events:
        entries = _motion_entries(bank, event)
        gain = 10.0 ** (event.gain_db / 20.0)
        clip = replace_clip_gain(event.clip, gain)
        if isinstance(event.motion, StaticMotion):
            rendered = spatialize_static(clip, entries[0].srir)
        else:
            rendered = spatialize_moving(
                clip, [e.srir for e in entries], event.motion.angular_speed, spacing
            )
        if not np.all(np.isfinite(rendered)):
            raise ValueError(f"event {event.clip.source_id!r} produced non-finite audio")
        start = int(round(event.onset * fs))
        stop = min(n_samples, start + rendered.shape[0])
        audio[start:stop] += rendered[: stop - start]
        for f in _event_frames(event.onset, event.duration, n_frames):
            if isinstance(event.motion, StaticMotion):
                doa = entries[0].doa
            else:
                t = f * FRAME_SECONDS - event.onset
                idx = int(round(t * event.motion.angular_speed / spacing))
                idx = min(max(idx, 0), len(entries) - 1)
                doa = entries[idx].doa
            az, el = _doa_to_int_angles(doa)
            ann.add(f, event.clip.class_id, event.track, az, el)
    ann.sort()
    if config.noise_floor_db is not None:
        if rng is None:
            raise ValueError("noise injection requires an rng")
        audio += rng.normal(0.0, 10.0 ** (config.noise_floor_db / 20.0), size=audio.shape)
    peak = float(np.max(np.abs(audio))) if audio.any() else 0.0
    norm_gain = (10.0 ** (MIX_PEAK_DBFS / 20.0) / peak) if peak > 0 else 1.0
    audio *= norm_gain
    return audio, ann, norm_gain


def replace_clip_gain(clip: EventClip, gain: float) -> EventClip:
    return EventClip(
        class_id=clip.class_id, samples=clip.samples * gain,
        source_id=clip.source_id, sample_rate=clip.sample_rate,
    )


def _sha256_file(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def render_dataset_mixture(
    bank: SrirBank,
    corpus: list[EventClip],
    config: MixtureConfig,
    seed_key: tuple[int, int, int],
    fold: str,
) -> tuple[EventTimeline, np.ndarray, FrameAnnotations, float]:
    """Deterministically render the mixture identified by its seed key."""
    rng = np.random.default_rng(np.random.SeedSequence(entropy=list(seed_key)))
    timeline = schedule_events(corpus, bank, config, rng, fold=fold)
    timeline.seed_key = tuple(seed_key)
    audio, ann, gain = render_mixture(timeline, bank, config, rng=rng)
    return timeline, audio, ann, gain


def generate_dataset(
    banks: list[SrirBank],
    corpus: list[EventClip],
    out_dir,
    seed: int,
    config: DatasetConfig | None = None,
) -> dict:
    """Synthesize room-disjoint train/val mixture folds onto disk.

    Writes one 16-bit 4-channel WAV plus one annotation CSV per mixture and a
    manifest with per-mixture seed keys that allow byte-identical
    regeneration. Returns the manifest.
    """
    config = config or DatasetConfig()
    needed = config.n_train_rooms + config.n_val_rooms
    if len(banks) < needed:
        raise ValueError(
            f"need {needed} room banks for disjoint folds "
            f"({config.n_train_rooms} train + {config.n_val_rooms} val), got {len(banks)}"
        )
    out_dir = Path(out_dir)
    train_banks = banks[: config.n_train_rooms]
    val_banks = banks[config.n_train_rooms : needed]
    mixtures = []
    for fold_code, (fold, fold_banks, n_mix) in enumerate(
        (("train", train_banks, config.n_train), ("val", val_banks, config.n_val))
    ):
        fold_dir = out_dir / fold
        fold_dir.mkdir(parents=True, exist_ok=True)
        for j in range(n_mix):
            bank = fold_banks[j % len(fold_banks)]
            seed_key = (int(seed), fold_code, j)
            _, audio, ann, gain = render_dataset_mixture(
                bank, corpus, config.mixture, seed_key, fold
            )
            name = f"{fold}_{bank.spec.name}_mix{j:04d}"
            wav_path = fold_dir / f"{name}.wav"
            csv_path = fold_dir / f"{name}.csv"
            write_wav_pcm16(wav_path, bank.spec.sample_rate, audio)
            ann.write(csv_path)
            mixtures.append(
                {
                    "name": name,
                    "fold": fold,
                    "room": bank.spec.name,
                    "index": j,
                    "seed_key": list(seed_key),
                    "norm_gain": gain,
                    "wav": f"{fold}/{name}.wav",
                    "csv": f"{fold}/{name}.csv",
                    "wav_sha256": _sha256_file(wav_path),
                    "csv_sha256": _sha256_file(csv_path),
                }
            )
    manifest = {
        "format": DATASET_FORMAT,
        "seed": int(seed),
        "scale": config.scale,
        "duration": config.mixture.duration,
        "sample_rate": banks[0].spec.sample_rate,
        "folds": {
            "train": [b.spec.name for b in train_banks],
            "val": [b.spec.name for b in val_banks],
        },
        "mixtures": mixtures,
    }
    (out_dir / DATASET_MANIFEST_NAME).write_text(json.dumps(manifest, indent=1) + "\n")
    return manifest


def regenerate_mixture(
    manifest_entry: dict,
    banks_by_room: dict[str, SrirBank],
    corpus: list[EventClip],
    config: MixtureConfig | None = None,
) -> tuple[np.ndarray, str]:
    """Re-render one manifest mixture; returns (audio, annotation CSV text)."""
    config = config or MixtureConfig()
    bank = banks_by_room[manifest_entry["room"]]
    _, audio, ann, _ = render_dataset_mixture(
        bank, corpus, config, tuple(manifest_entry["seed_key"]), manifest_entry["fold"]
    )
    return audio, ann.to_csv()
