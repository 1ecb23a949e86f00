"""
Reverberation-time calibration round trip
=========================================

Targets an RT60, derives wall absorption and a reflection-order budget with
the inverse Sabine relation, renders a test RIR in the resulting room, and
re-estimates the RT60 from its Schroeder decay.
"""

import numpy as np

import srirforge as sf

dims = np.array([7.0, 5.0, 3.0])
rng = np.random.default_rng(11)

for target in (0.3, 0.5):
    alpha, max_order = sf.inverse_sabine(target, dims)
    print(f"target rt60 {target} s -> absorption {alpha:.3f}, max order {max_order}")

    room = sf.ShoeboxRoom(dims=dims, absorption=alpha, max_order=max_order)
    source = rng.uniform(0.7, dims - 0.7)
    receiver = rng.uniform(0.7, dims - 0.7)
    rir = sf.render_rir(room, source, receiver, length=int(1.2 * target * 24000))

    result = sf.calibrate_room([rir], dims)
    print(f"  re-estimated rt60 {result.rt60:.3f} s "
          f"({(result.rt60 - target) / target:+.1%}), "
          f"fit r^2 {result.r_squared:.4f}")

    edc = sf.energy_decay_curve(sf.dc_block(rir))
    for level in (-5, -15, -25):
        idx = int(np.argmax(edc.values <= level))
        print(f"  EDC reaches {level} dB at {idx / edc.sample_rate * 1000:.0f} ms")
