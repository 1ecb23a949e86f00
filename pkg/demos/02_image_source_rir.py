"""
Image-source rendering of room impulse responses
================================================

Enumerates mirror images of a source in a shoebox room, renders a
single-channel RIR and a 4-channel SRIR, and plots the early reflections.
"""

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

import srirforge as sf

room = sf.ShoeboxRoom(dims=(6.0, 5.0, 3.2), absorption=0.25, max_order=12)
source = np.array([4.4, 3.2, 1.3])
receiver = np.array([2.0, 2.2, 1.6])

images = sf.enumerate_images(room, source, max_order=2)
print(f"images up to order 2: {len(images)} (1 direct + 6 first + 18 second)")
for img in images[:4]:
    print(f"  order {img.total_order} at {np.round(img.position, 2)}, "
          f"gain {sf.image_amplitude(img, receiver, room.absorption):.4f}")

rir = sf.render_rir(room, source, receiver)
print(f"\nRIR: {rir.length} samples at {rir.sample_rate} Hz "
      f"({rir.length / rir.sample_rate * 1000:.0f} ms)")
direct_ms = np.linalg.norm(source - receiver) / room.speed_of_sound * 1000
print(f"direct path: {direct_ms:.2f} ms, "
      f"peak at sample {int(np.argmax(np.abs(rir.samples)))}")

array = sf.tetrahedral_array((2.0, 2.2, 1.6))
srir = sf.render_srir(room, source, array)
print(f"SRIR: {srir.data.shape[0]} x {srir.data.shape[1]}, DoA {np.round(srir.doa, 3)}")

fig, axes = plt.subplots(2, 1, figsize=(8, 5), sharex=True)
t = np.arange(rir.length) / rir.sample_rate * 1000
axes[0].plot(t, rir.samples, lw=0.6)
axes[0].set_ylabel("omni RIR")
axes[0].set_xlim(0, 80)
for ch in range(4):
    axes[1].plot(t, srir.data[:, ch] + 0.05 * ch, lw=0.6, label=f"M{ch + 1}")
axes[1].set_ylabel("SRIR channels (offset)")
axes[1].set_xlabel("time (ms)")
axes[1].legend(fontsize=8, ncol=4)
fig.tight_layout()
fig.savefig("demo_02_rir.svg")
print("wrote demo_02_rir.svg")
