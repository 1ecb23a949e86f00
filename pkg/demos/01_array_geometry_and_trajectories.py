"""
Tetrahedral array geometry and measurement trajectories
=======================================================

Builds the 4-capsule tetrahedral array, samples a circular and a linear
trajectory in ~1 degree steps, and reconstructs measurement positions from
DoA vectors by projecting them back onto the trace.
"""

import numpy as np

import srirforge as sf

array = sf.tetrahedral_array(center=(3.0, 2.5, 1.5))
print("capsule layout (azimuth, elevation, pattern):")
for i, cap in enumerate(array.capsules):
    print(f"  M{i + 1}: ({cap.orientation.azimuth:+.0f}, {cap.orientation.elevation:+.0f})"
          f"  {cap.pattern}, {cap.offset_radius * 100:.1f} cm offset")

pairs = [
    (i, j, sf.angular_distance(array.capsules[i].orientation.unit_vector,
                               array.capsules[j].orientation.unit_vector))
    for i in range(4) for j in range(i + 1, 4)
]
print("pairwise capsule separations:",
      ", ".join(f"M{i+1}-M{j+1} {a:.2f}" for i, j, a in pairs))

circle = sf.CircularTrajectory(radius=1.8, height=1.9, group_index=0, height_index=0)
samples = sf.sample_trajectory(circle, array.center, spacing=1.0)
print(f"\ncircular trace r={circle.radius} m, height {circle.height} m: "
      f"{len(samples)} samples at 1 degree spacing")

line = sf.LinearTrajectory(start=(1.0, 0.8, 1.2), end=(1.0, 4.2, 1.8),
                           group_index=1, height_index=0)
line_samples = sf.sample_trajectory(line, array.center, spacing=1.0)
print(f"linear trace {line.start} -> {line.end}: {len(line_samples)} samples")

# round-trip: take each sample's DoA and project it back onto the trace
worst = 0.0
for s in samples:
    recovered, residual = sf.project_doa_circular(
        s.doa, array.center, circle.radius, circle.height
    )
    worst = max(worst, float(np.linalg.norm(recovered - s.position)), residual)
print(f"\ncircular DoA projection: worst recovery error {worst:.2e} m")

worst_lin = max(
    float(np.linalg.norm(
        sf.project_doa_linear(s.doa, array.center, (line.start, line.end)) - s.position
    ))
    for s in line_samples
)
print(f"linear DoA projection: worst recovery error {worst_lin:.2e} m")
