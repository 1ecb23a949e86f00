"""Image source method for shoebox rooms.

Enumerates the mirrored-source lattice up to a reflection order, attaches
spherical-spreading and wall-absorption gains plus capsule directivity, and
renders band-limited impulse responses by depositing an 81-tap Hann-windowed
sinc kernel at each fractional arrival time.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .geometry import CapsuleSpec, MicArray, as_vec3

DEFAULT_SAMPLE_RATE = 24000
DEFAULT_SRIR_LENGTH = 7200  # 300 ms at 24 kHz
SPEED_OF_SOUND = 343.0

KERNEL_HALF = 40
_KERNEL_WINDOW = np.hanning(2 * KERNEL_HALF + 1)
_KERNEL_OFFSETS = np.arange(-KERNEL_HALF, KERNEL_HALF + 1)

# on-axis-normalized first-order patterns g(theta) = a + (1 - a) cos(theta)
PATTERN_COEFF = {"omnidirectional": 1.0, "cardioid": 0.5, "hypercardioid": 0.25}


@dataclass(eq=False)
class ShoeboxRoom:
    """Rectangular room with one mean absorption coefficient on all six walls."""

    dims: np.ndarray
    absorption: float
    max_order: int
    speed_of_sound: float = SPEED_OF_SOUND

    def __post_init__(self):
        self.dims = as_vec3(self.dims)
        if np.any(self.dims <= 0):
            raise ValueError(f"room dimensions must be positive, got {self.dims}")
        if not 0.0 <= self.absorption <= 1.0:
            raise ValueError(f"absorption must be in [0, 1], got {self.absorption}")
        if self.max_order < 0:
            raise ValueError(f"max_order must be >= 0, got {self.max_order}")
        if self.speed_of_sound <= 0:
            raise ValueError(f"speed of sound must be > 0, got {self.speed_of_sound}")

    def contains(self, point, margin: float = 0.0) -> bool:
        p = as_vec3(point)
        return bool(np.all(p > margin) and np.all(p < self.dims - margin))


@dataclass(eq=False)
class ImageSource:
    position: np.ndarray
    reflection_counts: tuple[int, int, int, int, int, int]
    total_order: int


@dataclass(eq=False)
class Rir:
    samples: np.ndarray
    sample_rate: int

    @property
    def length(self) -> int:
        return int(self.samples.shape[0])


@dataclass(eq=False)
class Srir:
    """4-channel RIR bundle, channels ordered like the array's capsules."""

    data: np.ndarray  # (length, n_channels)
    sample_rate: int
    doa: np.ndarray
    source_position: np.ndarray

    @property
    def length(self) -> int:
        return int(self.data.shape[0])

    @property
    def n_channels(self) -> int:
        return int(self.data.shape[1])

    @property
    def channels(self) -> list[Rir]:
        return [Rir(self.data[:, i], self.sample_rate) for i in range(self.n_channels)]


def _axis_images(coord: float, length: float, max_order: int):
    """1-D mirror images along one axis.

    Returns (coords, near_counts, far_counts) where counts are reflections off
    the wall at 0 and at `length`; per-axis order is their sum.
    """
    coords = [coord]
    near = [0]
    far = [0]
    for j in range(1, max_order + 1):
        if j % 2 == 0:
            for m in (j // 2, -(j // 2)):
                coords.append(coord + 2.0 * m * length)
                near.append(abs(m))
                far.append(abs(m))
        else:
            for m in ((j + 1) // 2, (1 - j) // 2):
                coords.append(-coord + 2.0 * m * length)
                near.append(abs(m - 1))
                far.append(abs(m))
    return (np.asarray(coords), np.asarray(near, dtype=np.int32), np.asarray(far, dtype=np.int32))


def _image_lattice(room: ShoeboxRoom, source: np.ndarray, max_order: int):
    """All images with total order <= max_order.

    Returns (positions (I, 3), orders (I,), counts (I, 6)); the direct source
    is index 0. Built per axis then combined, so there are no duplicates.
    """
    per_axis = [_axis_images(source[i], room.dims[i], max_order) for i in range(3)]
    ox = per_axis[0][1] + per_axis[0][2]
    oy = per_axis[1][1] + per_axis[1][2]
    oz = per_axis[2][1] + per_axis[2][2]

    oxy = ox[:, None] + oy[None, :]
    ix, iy = np.nonzero(oxy <= max_order)
    oxy = oxy[ix, iy]

    oxyz = oxy[:, None] + oz[None, :]
    ip, iz = np.nonzero(oxyz <= max_order)
    orders = oxyz[ip, iz]
    ix, iy = ix[ip], iy[ip]

    positions = np.stack(
        [per_axis[0][0][ix], per_axis[1][0][iy], per_axis[2][0][iz]], axis=1
    )
    counts = np.stack(
        [
            per_axis[0][1][ix], per_axis[0][2][ix],
            per_axis[1][1][iy], per_axis[1][2][iy],
            per_axis[2][1][iz], per_axis[2][2][iz],
        ],
        axis=1,
    )
    return positions, orders.astype(np.int32), counts


def _require_inside(room: ShoeboxRoom, source) -> np.ndarray:
    source = as_vec3(source)
    if not room.contains(source):
        raise ValueError(f"source {source} is not strictly inside room dims {room.dims}")
    return source


def enumerate_images(room: ShoeboxRoom, source, max_order: int | None = None) -> list[ImageSource]:
    """Mirror-image sources of `source` up to `max_order` (default: the room's)."""
    source = _require_inside(room, source)
    if max_order is None:
        max_order = room.max_order
    if max_order < 0:
        raise ValueError(f"max_order must be >= 0, got {max_order}")
    positions, orders, counts = _image_lattice(room, source, max_order)
    return [
        ImageSource(position=positions[i], reflection_counts=tuple(int(c) for c in counts[i]),
                    total_order=int(orders[i]))
        for i in range(len(orders))
    ]


def image_amplitude(img: ImageSource, receiver, absorption: float) -> float:
    """Point-source gain of one image at the receiver.

    beta^order / (4 pi d) with beta = sqrt(1 - absorption): spherical spreading
    plus one energy-reflection factor per wall bounce.
    """
    receiver = as_vec3(receiver)
    d = float(np.linalg.norm(as_vec3(img.position) - receiver))
    if d == 0.0:
        raise ValueError("receiver coincides with the image source")
    beta = np.sqrt(1.0 - absorption)
    return float(beta ** img.total_order / (4.0 * np.pi * d))


def directivity_gain(pattern: str, incidence_angle_deg: float) -> float:
    """First-order pattern gain at the given incidence angle (degrees)."""
    if pattern not in PATTERN_COEFF:
        raise ValueError(f"unknown pattern {pattern!r}")
    a = PATTERN_COEFF[pattern]
    return a + (1.0 - a) * np.cos(np.radians(incidence_angle_deg))


def deposit_arrivals(delays: np.ndarray, amps: np.ndarray, length: int) -> np.ndarray:
    """Sum windowed-sinc kernels centered at fractional sample positions.

    Arrivals whose center falls at or beyond `length` are dropped; kernel taps
    that straddle the ends are clipped.
    """
    out = np.zeros(length)
    keep = (delays < length) & (amps != 0.0)
    delays = delays[keep]
    amps = amps[keep]
    chunk = 200_000
    for s in range(0, delays.shape[0], chunk):
        dl = delays[s : s + chunk]
        am = amps[s : s + chunk]
        n0 = np.floor(dl).astype(np.int64)
        frac = dl - n0
        idx = n0[:, None] + _KERNEL_OFFSETS[None, :]
        vals = am[:, None] * (_KERNEL_WINDOW[None, :] * np.sinc(_KERNEL_OFFSETS[None, :] - frac[:, None]))
        ok = (idx >= 0) & (idx < length)
        out += np.bincount(idx[ok].ravel(), weights=vals[ok].ravel(), minlength=length)
    return out


def _render_from_lattice(
    positions: np.ndarray,
    orders: np.ndarray,
    receiver: np.ndarray,
    orientation_vec: np.ndarray | None,
    pattern: str,
    absorption: float,
    c: float,
    sample_rate: int,
    length: int,
) -> np.ndarray:
    diff = positions - receiver[None, :]
    dists = np.linalg.norm(diff, axis=1)
    if np.any(dists == 0.0):
        raise ValueError("receiver coincides with an image source")
    beta = np.sqrt(1.0 - absorption)
    amps = beta ** orders / (4.0 * np.pi * dists)
    if orientation_vec is not None:
        a = PATTERN_COEFF[pattern]
        cos_inc = diff @ orientation_vec / dists
        amps = amps * (a + (1.0 - a) * cos_inc)
    delays = dists / c * sample_rate
    return deposit_arrivals(delays, amps, length)


def render_rir(
    room: ShoeboxRoom,
    source,
    capsule_position,
    capsule: CapsuleSpec | None = None,
    sample_rate: int = DEFAULT_SAMPLE_RATE,
    length: int = DEFAULT_SRIR_LENGTH,
) -> Rir:
    """Render a single-channel RIR. `capsule=None` means an omni point receiver."""
    source = _require_inside(room, source)
    if length <= 0:
        raise ValueError(f"length must be > 0, got {length}")
    capsule_position = as_vec3(capsule_position)
    positions, orders, _ = _image_lattice(room, source, room.max_order)
    if capsule is None or capsule.pattern == "omnidirectional":
        orientation = None
        pattern = "omnidirectional"
    else:
        orientation = capsule.orientation.unit_vector
        pattern = capsule.pattern
    samples = _render_from_lattice(
        positions, orders, capsule_position, orientation, pattern,
        room.absorption, room.speed_of_sound, sample_rate, length,
    )
    return Rir(samples=samples, sample_rate=sample_rate)


def render_srir(
    room: ShoeboxRoom,
    source,
    array: MicArray,
    sample_rate: int = DEFAULT_SAMPLE_RATE,
    length: int = DEFAULT_SRIR_LENGTH,
) -> Srir:
    """Render one RIR per capsule; DoA is the unit vector array center -> source."""
    source = _require_inside(room, source)
    if not room.contains(array.center):
        raise ValueError(f"array center {array.center} is not inside the room")
    if length <= 0:
        raise ValueError(f"length must be > 0, got {length}")
    positions, orders, _ = _image_lattice(room, source, room.max_order)
    data = np.empty((length, len(array.capsules)))
    cap_positions = array.capsule_positions
    for i, cap in enumerate(array.capsules):
        orientation = None if cap.pattern == "omnidirectional" else cap.orientation.unit_vector
        data[:, i] = _render_from_lattice(
            positions, orders, cap_positions[i], orientation, cap.pattern,
            room.absorption, room.speed_of_sound, sample_rate, length,
        )
    rel = source - array.center
    doa = rel / np.linalg.norm(rel)
    return Srir(data=data, sample_rate=sample_rate, doa=doa, source_position=source)


def render_srirs_batch(
    room: ShoeboxRoom,
    sources: np.ndarray,
    array: MicArray,
    sample_rate: int = DEFAULT_SAMPLE_RATE,
    length: int = DEFAULT_SRIR_LENGTH,
):
    """Yield (index, Srir) for many sources of one room, in order.

    The mirror lattice is affine in the source position, so all sources share
    one set of per-axis sign/shift transforms computed up front.
    """
    sources = np.atleast_2d(np.asarray(sources, dtype=float))
    if sources.shape[1] != 3:
        raise ValueError(f"sources must be (S, 3), got {sources.shape}")
    for s in sources:
        _require_inside(room, s)
    if not room.contains(array.center):
        raise ValueError(f"array center {array.center} is not inside the room")

    # per-axis image transform coord' = sgn * coord + shift; even 1-D order
    # means an unflipped copy, odd means a mirrored one
    axis_sgn, axis_shift, axis_order = [], [], []
    for i in range(3):
        shift, near, far = _axis_images(0.0, room.dims[i], room.max_order)
        orders_1d = near + far
        axis_sgn.append(np.where(orders_1d % 2 == 0, 1.0, -1.0))
        axis_shift.append(shift)
        axis_order.append(orders_1d)
    oxy = axis_order[0][:, None] + axis_order[1][None, :]
    ix, iy = np.nonzero(oxy <= room.max_order)
    oxyz = oxy[ix, iy][:, None] + axis_order[2][None, :]
    ip, iz = np.nonzero(oxyz <= room.max_order)
    orders = oxyz[ip, iz].astype(np.int32)
    ix, iy = ix[ip], iy[ip]
    sgn = np.stack([axis_sgn[0][ix], axis_sgn[1][iy], axis_sgn[2][iz]], axis=1)
    shift = np.stack([axis_shift[0][ix], axis_shift[1][iy], axis_shift[2][iz]], axis=1)

    cap_positions = array.capsule_positions
    orientations = [
        None if cap.pattern == "omnidirectional" else cap.orientation.unit_vector
        for cap in array.capsules
    ]
    for si, src in enumerate(sources):
        positions = sgn * src[None, :] + shift
        data = np.empty((length, len(array.capsules)))
        for ci, cap in enumerate(array.capsules):
            data[:, ci] = _render_from_lattice(
                positions, orders, cap_positions[ci], orientations[ci], cap.pattern,
                room.absorption, room.speed_of_sound, sample_rate, length,
            )
        rel = src - array.center
        yield si, Srir(
            data=data, sample_rate=sample_rate,
            doa=rel / np.linalg.norm(rel), source_position=src,
        )
