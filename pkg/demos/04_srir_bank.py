"""
Building and persisting an SRIR bank
====================================

Renders a small per-room bank (one circular trajectory), saves it as
float32 WAVs plus a JSON manifest, and loads it back with checksum
verification.
"""

import json
import tempfile
from pathlib import Path

import srirforge as sf

spec = sf.RoomSpec(
    name="demo_room",
    dims=(6.0, 5.0, 3.0),
    array_center=(3.0, 2.5, 1.5),
    trajectories=[
        sf.CircularTrajectory(radius=1.6, height=1.4, group_index=0, height_index=0),
        sf.CircularTrajectory(radius=1.6, height=1.8, group_index=0, height_index=1),
    ],
    rt60_target=0.4,
    spacing_deg=5.0,  # coarse spacing keeps the demo quick
)

bank = sf.build_bank(spec)
print(f"bank: {len(bank)} SRIRs over {len(bank.trajectory_keys())} trajectories")
print(f"checksum {bank.checksum[:16]}...")

entry = bank.entries[0]
print(f"first entry: trajectory {entry.trajectory_id}, height {entry.height_id}, "
      f"index {entry.index}, DoA {entry.doa.round(3)}, "
      f"shape {entry.srir.data.shape}")

with tempfile.TemporaryDirectory() as tmp:
    out = Path(tmp) / "bank"
    sf.save_bank(bank, out)
    manifest = json.loads((out / "manifest.json").read_text())
    print(f"\nsaved {len(manifest['entries'])} WAVs + manifest.json")

    loaded = sf.load_bank(out)
    print(f"reloaded: {len(loaded)} entries, checksum match: "
          f"{loaded.checksum == bank.checksum}")
