"""Per-room SRIR bank pipeline: room spec -> calibrated shoebox -> trajectory
sampling -> rendered 4-channel SRIRs, plus on-disk persistence.

A bank directory holds one float32 WAV per entry, named
`<room>_<trajectory>_<height>_<index>.wav`, and a `manifest.json` carrying the
room spec, per-entry DoAs/positions as full-precision floats, and a bank
checksum (sha256 over the ordered per-entry digests).
"""

from __future__ import annotations

import hashlib
import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .calibration import inverse_sabine
from .geometry import (
    CircularTrajectory,
    LinearTrajectory,
    Trajectory,
    as_vec3,
    sample_trajectory,
    tetrahedral_array,
)
from .ism import DEFAULT_SAMPLE_RATE, DEFAULT_SRIR_LENGTH, ShoeboxRoom, Srir, render_srirs_batch
from .wavio import read_wav_float32, write_wav_float32

MANIFEST_NAME = "manifest.json"
MANIFEST_FORMAT = "srirforge-bank-v1"


class BankIntegrityError(Exception):
    """Stored bank does not match its manifest checksum."""


class TrajectoryOutsideRoomError(ValueError):
    """A sampled trajectory point falls outside the room."""


@dataclass(eq=False)
class RoomSpec:
    """Virtual room description: geometry, target acoustics, trajectories.

    Either `rt60_target` (absorption and reflection order derived via inverse
    Sabine) or both `absorption` and `max_order` must be given.
    """

    name: str
    dims: np.ndarray
    array_center: np.ndarray
    trajectories: list[Trajectory]
    rt60_target: float | None = None
    absorption: float | None = None
    max_order: int | None = None
    sample_rate: int = DEFAULT_SAMPLE_RATE
    srir_length: int = DEFAULT_SRIR_LENGTH
    spacing_deg: float = 1.0
    speed_of_sound: float = 343.0

    def __post_init__(self):
        self.dims = as_vec3(self.dims)
        self.array_center = as_vec3(self.array_center)
        if not self.name:
            raise ValueError("room spec needs a name")
        if np.any(self.dims <= 0):
            raise ValueError(f"room dimensions must be positive, got {self.dims}")
        if not (np.all(self.array_center > 0) and np.all(self.array_center < self.dims)):
            raise ValueError(
                f"array center {self.array_center} is not strictly inside dims {self.dims}"
            )
        has_direct = self.absorption is not None and self.max_order is not None
        if (self.rt60_target is None) == (not has_direct):
            raise ValueError("give either rt60_target or both absorption and max_order")
        if self.spacing_deg <= 0:
            raise ValueError(f"spacing_deg must be > 0, got {self.spacing_deg}")

    def build_room(self) -> ShoeboxRoom:
        if self.rt60_target is not None:
            alpha, order = inverse_sabine(self.rt60_target, self.dims, self.speed_of_sound)
        else:
            alpha, order = self.absorption, self.max_order
        return ShoeboxRoom(
            dims=self.dims, absorption=alpha, max_order=order,
            speed_of_sound=self.speed_of_sound,
        )


@dataclass(eq=False)
class BankEntry:
    trajectory_id: int
    height_id: int
    index: int
    doa: np.ndarray
    srir: Srir


@dataclass(eq=False)
class SrirBank:
    spec: RoomSpec
    entries: list[BankEntry]
    checksum: str = ""

    def __len__(self) -> int:
        return len(self.entries)

    def trajectory_slice(self, trajectory_id: int, height_id: int) -> list[BankEntry]:
        sel = [
            e for e in self.entries
            if e.trajectory_id == trajectory_id and e.height_id == height_id
        ]
        return sorted(sel, key=lambda e: e.index)

    def trajectory_keys(self) -> list[tuple[int, int]]:
        return sorted({(e.trajectory_id, e.height_id) for e in self.entries})


def _trajectory_to_dict(traj: Trajectory) -> dict:
    if isinstance(traj, CircularTrajectory):
        return {
            "kind": "circular", "radius": traj.radius, "height": traj.height,
            "center_xy": list(traj.center_xy),
            "group": traj.group_index, "height_index": traj.height_index,
        }
    return {
        "kind": "linear", "start": list(traj.start), "end": list(traj.end),
        "group": traj.group_index, "height_index": traj.height_index,
    }


def _trajectory_from_dict(d: dict) -> Trajectory:
    kind = d.get("kind")
    if kind == "circular":
        return CircularTrajectory(
            radius=d["radius"], height=d["height"],
            center_xy=tuple(d.get("center_xy", (0.0, 0.0))),
            group_index=int(d.get("group", 0)), height_index=int(d.get("height_index", 0)),
        )
    if kind == "linear":
        return LinearTrajectory(
            start=d["start"], end=d["end"],
            group_index=int(d.get("group", 0)), height_index=int(d.get("height_index", 0)),
        )
    raise ValueError(f"unknown trajectory kind {kind!r}")


def room_spec_to_dict(spec: RoomSpec) -> dict:
    return {
        "name": spec.name,
        "dims": list(spec.dims),
        "array_center": list(spec.array_center),
        "rt60_target": spec.rt60_target,
        "absorption": spec.absorption,
        "max_order": spec.max_order,
        "sample_rate": spec.sample_rate,
        "srir_length": spec.srir_length,
        "spacing_deg": spec.spacing_deg,
        "speed_of_sound": spec.speed_of_sound,
        "trajectories": [_trajectory_to_dict(t) for t in spec.trajectories],
    }


def room_spec_from_dict(d: dict) -> RoomSpec:
    try:
        return RoomSpec(
            name=d["name"],
            dims=d["dims"],
            array_center=d["array_center"],
            trajectories=[_trajectory_from_dict(t) for t in d["trajectories"]],
            rt60_target=d.get("rt60_target"),
            absorption=d.get("absorption"),
            max_order=d.get("max_order"),
            sample_rate=int(d.get("sample_rate", DEFAULT_SAMPLE_RATE)),
            srir_length=int(d.get("srir_length", DEFAULT_SRIR_LENGTH)),
            spacing_deg=float(d.get("spacing_deg", 1.0)),
            speed_of_sound=float(d.get("speed_of_sound", 343.0)),
        )
    except KeyError as exc:
        raise ValueError(f"room spec is missing required field {exc}") from exc


def load_room_spec(path) -> RoomSpec:
    path = Path(path)
    try:
        payload = json.loads(path.read_text())
    except OSError as exc:
        raise ValueError(f"cannot read room spec {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ValueError(f"room spec {path} is not valid JSON: {exc}") from exc
    return room_spec_from_dict(payload)


def save_room_spec(spec: RoomSpec, path):
    Path(path).write_text(json.dumps(room_spec_to_dict(spec), indent=2) + "\n")


def _sorted_trajectories(spec: RoomSpec) -> list[Trajectory]:
    return sorted(spec.trajectories, key=lambda t: (t.group_index, t.height_index))


def _trajectory_sources(spec: RoomSpec, traj: Trajectory) -> np.ndarray:
    samples = sample_trajectory(traj, spec.array_center, spec.spacing_deg)
    sources = np.stack([s.position for s in samples])
    inside = np.all(sources > 0, axis=1) & np.all(sources < spec.dims[None, :], axis=1)
    if not np.all(inside):
        bad = sources[int(np.argmin(inside))]
        raise TrajectoryOutsideRoomError(
            f"trajectory (group {traj.group_index}, height {traj.height_index}) leaves the "
            f"room at point ({bad[0]:.3f}, {bad[1]:.3f}, {bad[2]:.3f})"
        )
    return sources


def _entry_filename(room_name: str, traj_id: int, height_id: int, index: int) -> str:
    return f"{room_name}_{traj_id}_{height_id}_{index:04d}.wav"


def _entry_meta(room_name: str, traj_id: int, height_id: int, index: int,
                doa: np.ndarray, position: np.ndarray) -> dict:
    return {
        "file": _entry_filename(room_name, traj_id, height_id, index),
        "trajectory": traj_id,
        "height": height_id,
        "index": index,
        "doa": [float(x) for x in doa],
        "position": [float(x) for x in position],
    }


def _entry_sha(meta: dict, samples_f32: np.ndarray) -> bytes:
    h = hashlib.sha256()
    h.update(json.dumps(meta, sort_keys=True).encode())
    h.update(samples_f32.tobytes())
    return h.digest()


def _bank_checksum(entry_shas: list[bytes]) -> str:
    h = hashlib.sha256()
    for s in entry_shas:
        h.update(s)
    return h.hexdigest()


def _render_trajectory(spec: RoomSpec, traj: Trajectory, directory: Path | None):
    """Render one trajectory; write WAVs if a directory is given.

    Returns (metas, shas, srirs) with srirs=None in streaming mode.
    """
    room = spec.build_room()
    array = tetrahedral_array(spec.array_center)
    sources = _trajectory_sources(spec, traj)
    metas, shas, srirs = [], [], []
    for i, srir in render_srirs_batch(room, sources, array, spec.sample_rate, spec.srir_length):
        srir.data = srir.data.astype(np.float32)
        meta = _entry_meta(
            spec.name, traj.group_index, traj.height_index, i, srir.doa, srir.source_position
        )
        metas.append(meta)
        shas.append(_entry_sha(meta, srir.data))
        if directory is None:
            srirs.append(srir)
        else:
            write_wav_float32(directory / meta["file"], spec.sample_rate, srir.data)
    return metas, shas, (srirs if directory is None else None)


def build_bank(spec: RoomSpec) -> SrirBank:
    """Render every trajectory sample of a room spec into an in-memory bank.

    Entries are ordered by (trajectory group, height, sample index) and hold
    float32 sample data, matching the on-disk format exactly.
    """
    entries: list[BankEntry] = []
    shas: list[bytes] = []
    for traj in _sorted_trajectories(spec):
        metas, traj_shas, srirs = _render_trajectory(spec, traj, None)
        shas.extend(traj_shas)
        for meta, srir in zip(metas, srirs):
            entries.append(
                BankEntry(
                    trajectory_id=traj.group_index, height_id=traj.height_index,
                    index=meta["index"], doa=srir.doa, srir=srir,
                )
            )
    return SrirBank(spec=spec, entries=entries, checksum=_bank_checksum(shas))


def save_bank(bank: SrirBank, directory):
    """Write one float32 WAV per entry plus the JSON manifest."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    manifest_entries = []
    for entry in bank.entries:
        meta = _entry_meta(
            bank.spec.name, entry.trajectory_id, entry.height_id, entry.index,
            entry.doa, entry.srir.source_position,
        )
        write_wav_float32(directory / meta["file"], bank.spec.sample_rate, entry.srir.data)
        manifest_entries.append(meta)
    _write_manifest(directory, bank.spec, bank.checksum, manifest_entries)


def _write_manifest(directory: Path, spec: RoomSpec, checksum: str, entries: list[dict]):
    manifest = {
        "format": MANIFEST_FORMAT,
        "room": room_spec_to_dict(spec),
        "checksum": checksum,
        "entries": entries,
    }
    (directory / MANIFEST_NAME).write_text(json.dumps(manifest, indent=1) + "\n")


def _render_trajectory_job(spec_dict: dict, traj_dict: dict, directory: str):
    spec = room_spec_from_dict(spec_dict)
    traj = _trajectory_from_dict(traj_dict)
    metas, shas, _ = _render_trajectory(spec, traj, Path(directory))
    return metas, shas


def build_and_save_bank(spec: RoomSpec, directory, jobs: int = 1, progress=None) -> dict:
    """Streamed build: render trajectory by trajectory, writing WAVs as they
    finish so large banks never sit fully in memory. Returns the manifest.

    With jobs > 1 trajectories render in separate processes; entry order, file
    contents, and the checksum are identical regardless of the worker count.
    """
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    trajectories = _sorted_trajectories(spec)
    manifest_entries: list[dict] = []
    shas: list[bytes] = []
    if jobs > 1 and len(trajectories) > 1:
        spec_dict = room_spec_to_dict(spec)
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = pool.map(
                _render_trajectory_job,
                [spec_dict] * len(trajectories),
                [_trajectory_to_dict(t) for t in trajectories],
                [str(directory)] * len(trajectories),
            )
            for metas, traj_shas in results:
                manifest_entries.extend(metas)
                shas.extend(traj_shas)
                if progress is not None:
                    progress(len(metas))
    else:
        for traj in trajectories:
            metas, traj_shas, _ = _render_trajectory(spec, traj, directory)
            manifest_entries.extend(metas)
            shas.extend(traj_shas)
            if progress is not None:
                progress(len(metas))
    checksum = _bank_checksum(shas)
    _write_manifest(directory, spec, checksum, manifest_entries)
    return {
        "format": MANIFEST_FORMAT,
        "room": room_spec_to_dict(spec),
        "checksum": checksum,
        "entries": manifest_entries,
    }


def load_bank(directory) -> SrirBank:
    """Load a saved bank, verifying the manifest checksum over all entries."""
    directory = Path(directory)
    manifest_path = directory / MANIFEST_NAME
    if not manifest_path.is_file():
        raise ValueError(f"bank manifest not found: {manifest_path}")
    try:
        manifest = json.loads(manifest_path.read_text())
    except json.JSONDecodeError as exc:
        raise ValueError(f"corrupt bank manifest {manifest_path}: {exc}") from exc
    if manifest.get("format") != MANIFEST_FORMAT:
        raise ValueError(f"{manifest_path}: unknown bank format {manifest.get('format')!r}")
    spec = room_spec_from_dict(manifest["room"])
    entries = []
    shas = []
    for meta in manifest["entries"]:
        wav_path = directory / meta["file"]
        sample_rate, data = read_wav_float32(wav_path)
        if data.ndim == 1:
            data = data[:, None]
        if sample_rate != spec.sample_rate:
            raise BankIntegrityError(
                f"{wav_path}: sample rate {sample_rate} != spec {spec.sample_rate}"
            )
        doa = np.asarray(meta["doa"], dtype=float)
        position = np.asarray(meta["position"], dtype=float)
        srir = Srir(data=data, sample_rate=sample_rate, doa=doa, source_position=position)
        check_meta = _entry_meta(
            spec.name, int(meta["trajectory"]), int(meta["height"]), int(meta["index"]),
            doa, position,
        )
        shas.append(_entry_sha(check_meta, data))
        entries.append(
            BankEntry(
                trajectory_id=int(meta["trajectory"]), height_id=int(meta["height"]),
                index=int(meta["index"]), doa=doa, srir=srir,
            )
        )
    if _bank_checksum(shas) != manifest["checksum"]:
        raise BankIntegrityError(
            f"{directory}: bank contents do not match the manifest checksum"
        )
    return SrirBank(spec=spec, entries=entries, checksum=manifest["checksum"])


def circular_room_preset(
    name: str,
    dims=(8.0, 6.0, 3.0),
    array_center=None,
    rt60_target: float | None = 0.5,
    absorption: float | None = None,
    max_order: int | None = None,
    radii=(1.5, 2.0),
    n_heights: int = 9,
    height_span=(1.0, 2.2),
    spacing_deg: float = 1.0,
) -> RoomSpec:
    """Circular-room preset: len(radii) trajectory groups x n_heights heights.

    With the defaults (2 groups x 9 heights x 1 degree spacing) a bank holds
    6480 entries. Dimensions are placeholders; pass measured ones for real
    rooms.
    """
    dims = as_vec3(dims)
    if array_center is None:
        array_center = dims / 2.0
    heights = np.linspace(height_span[0], height_span[1], n_heights)
    trajectories: list[Trajectory] = [
        CircularTrajectory(radius=float(r), height=float(h), group_index=gi, height_index=hi)
        for gi, r in enumerate(radii)
        for hi, h in enumerate(heights)
    ]
    return RoomSpec(
        name=name, dims=dims, array_center=as_vec3(array_center),
        trajectories=trajectories, rt60_target=rt60_target,
        absorption=absorption, max_order=max_order, spacing_deg=spacing_deg,
    )
