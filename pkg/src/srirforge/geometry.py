"""Array geometry, angle conversions, trajectories, and DoA projections.

Angles are degrees at every public interface (azimuth in (-180, 180],
elevation in [-90, 90]); radians are used internally. Positions are plain
numpy arrays of shape (3,) in meters, room coordinates.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

UNIT_NORM_TOL = 1e-6

# Tetrahedral capsule layout: (azimuth, elevation) degrees, radially outward,
# 4.2 cm from the array center, hypercardioid response.
TETRAHEDRAL_ANGLES = ((45.0, 35.0), (-45.0, -35.0), (135.0, -35.0), (-135.0, 35.0))
CAPSULE_OFFSET_M = 0.042

PATTERNS = ("omnidirectional", "cardioid", "hypercardioid")


def as_vec3(value) -> np.ndarray:
    """Coerce to a finite float vector of shape (3,)."""
    v = np.asarray(value, dtype=float)
    if v.shape != (3,):
        raise ValueError(f"expected a 3-vector, got shape {v.shape}")
    if not np.all(np.isfinite(v)):
        raise ValueError(f"non-finite vector components: {v}")
    return v


def normalize(v) -> np.ndarray:
    v = as_vec3(v)
    n = float(np.linalg.norm(v))
    if n == 0.0:
        raise ValueError("cannot normalize the zero vector")
    return v / n


def wrap_azimuth(az_deg: float) -> float:
    """Wrap an azimuth into (-180, 180]."""
    az = math.fmod(az_deg, 360.0)
    if az <= -180.0:
        az += 360.0
    elif az > 180.0:
        az -= 360.0
    return az


@dataclass(frozen=True)
class Direction:
    """Pointing direction as azimuth/elevation in degrees.

    Azimuth is measured counterclockwise from +x in the horizontal plane,
    elevation upward from the horizontal plane.
    """

    azimuth: float
    elevation: float

    def __post_init__(self):
        if not (-180.0 < self.azimuth <= 180.0):
            raise ValueError(f"azimuth {self.azimuth} outside (-180, 180]")
        if not (-90.0 <= self.elevation <= 90.0):
            raise ValueError(f"elevation {self.elevation} outside [-90, 90]")

    @property
    def unit_vector(self) -> np.ndarray:
        return sph_to_cart(self, 1.0)


def sph_to_cart(d: Direction, r: float) -> np.ndarray:
    """Spherical (azimuth, elevation, radius) to Cartesian.

    x = r cos(el) cos(az), y = r cos(el) sin(az), z = r sin(el).
    """
    if r < 0:
        raise ValueError(f"radius must be >= 0, got {r}")
    az = math.radians(d.azimuth)
    el = math.radians(d.elevation)
    ce = math.cos(el)
    return np.array([r * ce * math.cos(az), r * ce * math.sin(az), r * math.sin(el)])


def cart_to_sph(v) -> tuple[Direction, float]:
    """Inverse of :func:`sph_to_cart`. Returns (direction, radius)."""
    v = as_vec3(v)
    r = float(np.linalg.norm(v))
    if r == 0.0:
        raise ValueError("direction of the zero vector is undefined")
    el = math.degrees(math.asin(max(-1.0, min(1.0, v[2] / r))))
    az = math.degrees(math.atan2(v[1], v[0]))
    return Direction(wrap_azimuth(az), el), r


def angular_distance(u, v) -> float:
    """Great-circle angle in degrees between two unit vectors."""
    u = as_vec3(u)
    v = as_vec3(v)
    for name, w in (("u", u), ("v", v)):
        if abs(np.linalg.norm(w) - 1.0) > UNIT_NORM_TOL:
            raise ValueError(f"{name} is not a unit vector: |{name}| = {np.linalg.norm(w)}")
    # atan2 form stays well conditioned near 0 and 180 degrees
    return math.degrees(
        math.atan2(float(np.linalg.norm(np.cross(u, v))), float(np.dot(u, v)))
    )


@dataclass(frozen=True)
class CapsuleSpec:
    """One microphone capsule: outward orientation, radial offset, pattern."""

    orientation: Direction
    offset_radius: float
    pattern: str

    def __post_init__(self):
        if self.offset_radius < 0:
            raise ValueError(f"offset_radius must be >= 0, got {self.offset_radius}")
        if self.pattern not in PATTERNS:
            raise ValueError(f"unknown pattern {self.pattern!r}, expected one of {PATTERNS}")


@dataclass(eq=False)
class MicArray:
    center: np.ndarray
    capsules: tuple[CapsuleSpec, ...]

    def __post_init__(self):
        self.center = as_vec3(self.center)
        self.capsules = tuple(self.capsules)
        if not self.capsules:
            raise ValueError("array needs at least one capsule")

    @property
    def capsule_positions(self) -> np.ndarray:
        """Capsule positions as an (M, 3) array."""
        return np.stack(
            [self.center + sph_to_cart(c.orientation, c.offset_radius) for c in self.capsules]
        )


def tetrahedral_array(center=(0.0, 0.0, 0.0)) -> MicArray:
    """The 4-capsule tetrahedral array preset (hypercardioid, 4.2 cm offsets)."""
    capsules = tuple(
        CapsuleSpec(Direction(az, el), CAPSULE_OFFSET_M, "hypercardioid")
        for az, el in TETRAHEDRAL_ANGLES
    )
    return MicArray(as_vec3(center), capsules)


@dataclass(eq=False)
class CircularTrajectory:
    """Horizontal circular trace at absolute height `height`, axis through the
    array center shifted by `center_xy`."""

    radius: float
    height: float
    center_xy: tuple[float, float] = (0.0, 0.0)
    group_index: int = 0
    height_index: int = 0

    def __post_init__(self):
        if self.radius <= 0:
            raise ValueError(f"circular trajectory radius must be > 0, got {self.radius}")


@dataclass(eq=False)
class LinearTrajectory:
    start: np.ndarray
    end: np.ndarray
    group_index: int = 0
    height_index: int = 0

    def __post_init__(self):
        self.start = as_vec3(self.start)
        self.end = as_vec3(self.end)
        if np.allclose(self.start, self.end):
            raise ValueError("linear trajectory start and end coincide")


Trajectory = CircularTrajectory | LinearTrajectory


@dataclass(eq=False)
class TrajectorySample:
    position: np.ndarray
    doa: np.ndarray
    index: int


def project_doa_circular(doa, array_center, radius: float, height: float):
    """Project a DoA ray onto the vertical cylinder of a circular trace.

    Walks the ray from the array center until its horizontal distance from the
    cylinder axis equals `radius`, then snaps z to the trace height. Returns
    (position, z_residual) where z_residual is the |z - height| mismatch of the
    raw intersection, kept as a quality diagnostic.
    """
    doa = as_vec3(doa)
    c = as_vec3(array_center)
    if radius <= 0:
        raise ValueError(f"radius must be > 0, got {radius}")
    horiz = math.hypot(doa[0], doa[1])
    if horiz < 1e-12:
        raise ValueError("DoA is vertical: the ray never meets the cylinder")
    t = radius / horiz
    hit = c + t * doa
    residual = abs(float(hit[2]) - height)
    hit[2] = height
    return hit, residual


def project_doa_linear(doa, array_center, segment) -> np.ndarray:
    """Closest point on a segment to the DoA ray from the array center.

    Solves the two-line least-squares system in closed form, clamping the ray
    parameter to t >= 0 and the segment parameter to [0, 1], so the result is
    always on the segment.
    """
    u = as_vec3(doa)
    c = as_vec3(array_center)
    a = as_vec3(segment[0])
    b = as_vec3(segment[1])
    w = b - a
    ww = float(np.dot(w, w))
    if ww == 0.0:
        raise ValueError("segment endpoints coincide")
    d0 = c - a
    uw = float(np.dot(u, w))
    uu = float(np.dot(u, u))

    def ray_distance(s: float) -> tuple[float, float]:
        # best t >= 0 for the segment point at parameter s, then the distance
        p = a + s * w
        t = max(0.0, float(np.dot(u, p - c)) / uu)
        return float(np.linalg.norm(c + t * u - p)), t

    # KKT candidates over {t >= 0} x {s in [0, 1]}: segment ends, the t = 0
    # face optimum, and the unconstrained joint minimum when it exists
    candidates = [0.0, 1.0, min(1.0, max(0.0, float(np.dot(w, d0)) / ww))]
    det = uu * ww - uw * uw
    if det > 1e-12 * uu * ww:
        s_star = (uu * float(np.dot(w, d0)) - uw * float(np.dot(u, d0))) / det
        candidates.append(min(1.0, max(0.0, s_star)))
    best_s = min(candidates, key=lambda s: ray_distance(s)[0])
    return a + best_s * w


def _max_consecutive_angle(positions: np.ndarray, center: np.ndarray, closed: bool) -> float:
    doas = positions - center
    doas /= np.linalg.norm(doas, axis=1, keepdims=True)
    pairs = np.einsum("ij,ij->i", doas[:-1], doas[1:])
    if closed:
        pairs = np.append(pairs, np.dot(doas[-1], doas[0]))
    return math.degrees(np.arccos(np.clip(pairs, -1.0, 1.0)).max())


def _sample_circular(traj: CircularTrajectory, center: np.ndarray, spacing: float):
    cx = center[0] + traj.center_xy[0]
    cy = center[1] + traj.center_xy[1]
    n = max(3, math.ceil(360.0 / spacing))
    while True:
        az = np.arange(n) * (2.0 * math.pi / n)
        positions = np.stack(
            [
                cx + traj.radius * np.cos(az),
                cy + traj.radius * np.sin(az),
                np.full(n, traj.height),
            ],
            axis=1,
        )
        # off-axis circles subtend unevenly at the array center; refine until
        # every consecutive pair stays within the requested spacing
        if _max_consecutive_angle(positions, center, closed=True) <= spacing + 1e-9:
            return positions
        n *= 2


def _sample_linear(traj: LinearTrajectory, center: np.ndarray, spacing: float):
    a = traj.start
    b = traj.end
    u0 = a - center
    r0 = float(np.linalg.norm(u0))
    if r0 == 0.0:
        raise ValueError("linear trajectory starts at the array center")
    e1 = u0 / r0
    w = b - a
    w1 = float(np.dot(w, e1))
    w_perp = w - w1 * e1
    w2 = float(np.linalg.norm(w_perp))
    if w2 < 1e-12:
        raise ValueError("linear trajectory is radial: it subtends no angle at the array")
    span = math.atan2(w2, r0 + w1)  # angle of the far endpoint in the trace plane
    n = max(1, math.ceil(math.degrees(span) / spacing))
    alphas = np.arange(n + 1) * (span / n)
    sin_a = np.sin(alphas)
    cos_a = np.cos(alphas)
    ts = r0 * sin_a / (w2 * cos_a - w1 * sin_a)
    ts[0] = 0.0
    ts[-1] = 1.0
    return a[None, :] + ts[:, None] * w[None, :]


def sample_trajectory(traj: Trajectory, array_center, spacing: float = 1.0) -> list[TrajectorySample]:
    """Sample a trajectory so consecutive points subtend <= `spacing` degrees
    at the array center.

    Circular traces cover the full orbit starting at azimuth 0 relative to the
    array, counterclockwise; linear traces run start to end inclusive, spaced
    uniformly in subtended angle.
    """
    if spacing <= 0:
        raise ValueError(f"spacing must be > 0, got {spacing}")
    center = as_vec3(array_center)
    if isinstance(traj, CircularTrajectory):
        positions = _sample_circular(traj, center, spacing)
    elif isinstance(traj, LinearTrajectory):
        positions = _sample_linear(traj, center, spacing)
    else:
        raise TypeError(f"unknown trajectory type {type(traj).__name__}")
    samples = []
    for i, p in enumerate(positions):
        rel = p - center
        n = float(np.linalg.norm(rel))
        if n == 0.0:
            raise ValueError(f"trajectory point {p} coincides with the array center")
        samples.append(TrajectorySample(position=p, doa=rel / n, index=i))
    return samples
