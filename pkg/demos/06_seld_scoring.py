"""
Joint localization-detection scoring
====================================

Builds a reference annotation set, derives predictions with angular noise,
dropouts, and spurious events, and scores them with the threshold metrics
(ER/F at 20 degrees) and the class-dependent localization error/recall.
"""

import numpy as np

import srirforge as sf
from srirforge.metrics import FrameEvent

rng = np.random.default_rng(7)

reference = []
for frame in range(200):
    for class_id in range(5):
        if rng.random() < 0.3:
            az = float(rng.uniform(-180, 180))
            el = float(rng.uniform(-60, 60))
            reference.append(FrameEvent.from_angles(frame, class_id, az, el))

predictions = []
for event in reference:
    if rng.random() < 0.15:
        continue  # missed detection
    jitter = rng.normal(0, 12, size=3)
    noisy = event.doa + np.radians(jitter)
    noisy /= np.linalg.norm(noisy)
    predictions.append(FrameEvent(event.frame, event.class_id, noisy))
for _ in range(60):  # spurious detections
    predictions.append(
        FrameEvent(int(rng.integers(200)), int(rng.integers(5)),
                   sf.sph_to_cart(sf.Direction(float(rng.uniform(-179, 180)), 0.0), 1.0))
    )

print(f"reference events: {len(reference)}, predicted: {len(predictions)}\n")
scores = sf.compute_scores(reference, predictions, threshold=20.0)
print(sf.report(scores, "text"))

scores40 = sf.compute_scores(reference, predictions, threshold=40.0)
print(f"threshold 40: ER {scores40.er20:.2f}, F {scores40.f20 * 100:.1f}% "
      f"(LE/LR unchanged: {scores40.le_cd == scores.le_cd}, "
      f"{scores40.lr_cd == scores.lr_cd})")
