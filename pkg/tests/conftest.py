import numpy as np
import pytest

import srirforge as sf
from srirforge.wavio import write_wav_pcm16

CLASS_NAMES = tuple(f"class{i:02d}" for i in range(13))
FS = 24000


def synth_clip(rng, class_id: int, duration: float) -> np.ndarray:
    """Band-limited tone burst with noise, distinct per class."""
    n = int(duration * FS)
    t = np.arange(n) / FS
    f0 = 180.0 + 130.0 * class_id
    env = np.clip(np.minimum(t / 0.04, (duration - t) / 0.08), 0.0, 1.0)
    x = env * (np.sin(2 * np.pi * f0 * t) + 0.3 * np.sin(2 * np.pi * 2.3 * f0 * t))
    x += 0.05 * env * rng.standard_normal(n)
    return 0.8 * x / np.max(np.abs(x))


@pytest.fixture(scope="session")
def label_map():
    return {name: i for i, name in enumerate(CLASS_NAMES)}


@pytest.fixture(scope="session")
def corpus_dir(tmp_path_factory):
    root = tmp_path_factory.mktemp("corpus")
    rng = np.random.default_rng(1234)
    for class_id, name in enumerate(CLASS_NAMES):
        sub = root / name
        sub.mkdir()
        for k in range(3):
            duration = float(rng.uniform(1.2, 4.5))
            write_wav_pcm16(sub / f"event{k}.wav", FS, synth_clip(rng, class_id, duration))
    return root


@pytest.fixture(scope="session")
def corpus(corpus_dir, label_map):
    return sf.ingest_corpus(corpus_dir, label_map)


@pytest.fixture(scope="session")
def small_bank():
    """Low-order two-trajectory bank, 2 degree spacing, quick to render."""
    spec = sf.RoomSpec(
        name="testroom",
        dims=(6.0, 5.0, 3.0),
        array_center=(3.0, 2.5, 1.5),
        trajectories=[
            sf.CircularTrajectory(radius=1.5, height=1.5, group_index=0, height_index=0),
            sf.LinearTrajectory(start=(1.2, 1.0, 1.2), end=(1.2, 4.0, 1.8),
                                group_index=1, height_index=0),
        ],
        absorption=0.35,
        max_order=2,
        spacing_deg=2.0,
    )
    return sf.build_bank(spec)
