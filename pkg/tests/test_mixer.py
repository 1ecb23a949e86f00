import numpy as np
import pytest

import srirforge as sf
from srirforge.annotations import FRAME_SECONDS
from srirforge.mixer import DynamicMotion, SchedulingError, StaticMotion, _segment_length
from srirforge.wavio import read_wav, write_wav_pcm16

FS = 24000


class TestIngest:
    def test_thirteen_classes(self, corpus, label_map):
        assert sorted({c.class_id for c in corpus}) == list(range(13))
        assert len(corpus) == 13 * 3

    def test_peak_normalized_and_trimmed(self, corpus):
        target = 10 ** (-3 / 20)
        for clip in corpus:
            peak = np.max(np.abs(clip.samples))
            assert peak <= target + 1e-6
            floor = 10 ** (-60 / 20)
            assert abs(clip.samples[0]) >= floor or abs(clip.samples[-1]) >= floor

    def test_stereo_downmix_preserves_length(self, tmp_path, label_map):
        d = tmp_path / "class00"
        d.mkdir()
        rng = np.random.default_rng(0)
        stereo = 0.5 * rng.standard_normal((FS, 2))
        stereo[0] = stereo[-1] = 0.9  # pin the edges above the trim floor
        write_wav_pcm16(d / "s.wav", FS, stereo)
        clips = sf.ingest_corpus(tmp_path, label_map)
        assert len(clips) == 1
        assert clips[0].samples.shape[0] == FS

    def test_resamples_other_rates(self, tmp_path, label_map):
        d = tmp_path / "class01"
        d.mkdir()
        t = np.arange(48000) / 48000.0
        x = 0.9 * np.sin(2 * np.pi * 440 * t)
        write_wav_pcm16(d / "hi.wav", 48000, x)
        clips = sf.ingest_corpus(tmp_path, label_map)
        assert clips[0].sample_rate == FS
        assert abs(clips[0].samples.shape[0] - FS) < 100  # ~1 s after trim

    def test_unmapped_label_skipped(self, tmp_path, label_map):
        d = tmp_path / "not_a_class"
        d.mkdir()
        write_wav_pcm16(d / "x.wav", FS, 0.5 * np.ones(1000))
        assert sf.ingest_corpus(tmp_path, label_map) == []

    def test_empty_directory(self, tmp_path, label_map):
        assert sf.ingest_corpus(tmp_path, label_map) == []

    def test_missing_directory_rejected(self, tmp_path, label_map):
        with pytest.raises(ValueError):
            sf.ingest_corpus(tmp_path / "nope", label_map)


class TestSchedule:
    def test_degenerate_single_static_event(self, corpus, small_bank):
        config = sf.MixtureConfig(min_activity=0.0, min_events=1, max_events=1,
                                  static_prob=1.0)
        rng = np.random.default_rng(0)
        timeline = sf.schedule_events(corpus, small_bank, config, rng)
        assert len(timeline.events) == 1
        assert isinstance(timeline.events[0].motion, StaticMotion)

    def test_constraints_hold(self, corpus, small_bank):
        config = sf.MixtureConfig()
        n_frames = int(round(config.duration / FRAME_SECONDS))
        for seed in range(3):
            timeline = sf.schedule_events(
                corpus, small_bank, config, np.random.default_rng(seed)
            )
            counts = np.zeros(n_frames, dtype=int)
            for ev in timeline.events:
                f0 = int(round(ev.onset / FRAME_SECONDS))
                f1 = int(np.floor((ev.onset + ev.duration) / FRAME_SECONDS + 1e-9))
                counts[f0 : min(f1, n_frames - 1) + 1] += 1
                assert ev.onset + ev.duration <= config.duration
                assert ev.motion.trajectory_id in (0, 1)
            assert counts.max() <= 3
            assert np.count_nonzero(counts) * FRAME_SECONDS >= config.min_activity

    def test_static_fraction_half(self, corpus, small_bank):
        config = sf.MixtureConfig()
        statics = total = 0
        seed = 0
        while total < 10_000:
            timeline = sf.schedule_events(
                corpus, small_bank, config, np.random.default_rng(1000 + seed)
            )
            for ev in timeline.events:
                total += 1
                statics += isinstance(ev.motion, StaticMotion)
            seed += 1
        assert 0.48 <= statics / total <= 0.52

    def test_speeds_from_menu(self, corpus, small_bank):
        config = sf.MixtureConfig()
        seen = set()
        for seed in range(10):
            timeline = sf.schedule_events(
                corpus, small_bank, config, np.random.default_rng(seed)
            )
            for ev in timeline.events:
                if isinstance(ev.motion, DynamicMotion):
                    seen.add(ev.motion.angular_speed)
        assert seen <= {10.0, 20.0, 40.0}
        assert len(seen) == 3

    def test_empty_corpus_fails(self, small_bank):
        with pytest.raises(SchedulingError):
            sf.schedule_events([], small_bank, sf.MixtureConfig(), np.random.default_rng(0))

    def test_oversized_clips_fail_with_diagnostics(self, small_bank):
        clip = sf.EventClip(class_id=0, samples=np.ones(FS * 70), source_id="long")
        config = sf.MixtureConfig(max_retries=50)
        with pytest.raises(SchedulingError, match="retries"):
            sf.schedule_events([clip], small_bank, config, np.random.default_rng(0))


class TestSpatialize:
    def test_impulse_identity(self, small_bank):
        srir = small_bank.entries[0].srir
        impulse = np.zeros(64)
        impulse[0] = 1.0
        clip = sf.EventClip(class_id=0, samples=impulse, source_id="imp")
        out = sf.spatialize_static(clip, srir)
        assert out.shape == (64 + srir.length - 1, 4)
        assert np.allclose(out[: srir.length], srir.data, atol=1e-12)

    def test_linearity(self, small_bank):
        srir = small_bank.entries[3].srir
        rng = np.random.default_rng(1)
        a = rng.standard_normal(2000)
        b = rng.standard_normal(2000)
        out_sum = sf.spatialize_static(sf.EventClip(0, a + b, "ab"), srir)
        out_a = sf.spatialize_static(sf.EventClip(0, a, "a"), srir)
        out_b = sf.spatialize_static(sf.EventClip(0, b, "b"), srir)
        denom = np.max(np.abs(out_sum))
        assert np.max(np.abs(out_a + out_b - out_sum)) / denom < 1e-6

    def test_rate_mismatch_rejected(self, small_bank):
        clip = sf.EventClip(class_id=0, samples=np.ones(100), source_id="x",
                            sample_rate=48000)
        with pytest.raises(ValueError, match="sample rate"):
            sf.spatialize_static(clip, small_bank.entries[0].srir)
        with pytest.raises(ValueError, match="sample rate"):
            sf.spatialize_moving(clip, [small_bank.entries[0].srir], 10.0, 2.0)

    def test_segment_durations(self):
        assert _segment_length(FS, 1.0, 10.0) == 2400  # 100 ms
        assert _segment_length(FS, 1.0, 40.0) == 600  # 25 ms

    def test_constant_sequence_equals_static(self, small_bank):
        srir = small_bank.entries[10].srir
        rng = np.random.default_rng(2)
        clip = sf.EventClip(0, rng.standard_normal(int(1.7 * FS)), "n")
        static = sf.spatialize_static(clip, srir)
        for speed in (10.0, 20.0, 40.0):
            seg = _segment_length(FS, small_bank.spec.spacing_deg, speed)
            n_seg = int(np.ceil(clip.samples.shape[0] / seg))
            moving = sf.spatialize_moving(
                clip, [srir] * (n_seg + 1), speed, small_bank.spec.spacing_deg
            )
            assert np.max(np.abs(moving - static)) / np.max(np.abs(static)) < 1e-6

    def test_short_sequence_names_required_span(self, small_bank):
        clip = sf.EventClip(0, np.ones(FS * 2), "x")
        with pytest.raises(ValueError, match="too short.*80.0 deg"):
            sf.spatialize_moving(clip, [small_bank.entries[0].srir] * 2, 40.0, 2.0)


class TestRenderMixture:
    def test_empty_timeline(self, small_bank):
        timeline = sf.EventTimeline(room_name="testroom", fold="train", events=[],
                                    duration=60.0)
        audio, ann, gain = sf.render_mixture(timeline, small_bank)
        assert audio.shape == (60 * FS, 4)
        assert not audio.any()
        assert ann.rows == []
        assert gain == 1.0

    def test_static_event_annotation_constant(self, small_bank):
        entry = small_bank.trajectory_slice(0, 0)[40]
        clip = sf.EventClip(0, np.tile([1.0, 0, 0, 0], 3 * FS // 4), "imp_train")
        ev = sf.ScheduledEvent(
            clip=clip, onset=1.0,
            motion=StaticMotion(trajectory_id=0, height_id=0, index=40), track=0,
        )
        timeline = sf.EventTimeline("testroom", "train", [ev], 60.0)
        audio, ann, _ = sf.render_mixture(timeline, small_bank)
        assert len(ann.rows) == len({r[0] for r in ann.rows})
        doas = {(r[3], r[4]) for r in ann.rows}
        assert len(doas) == 1
        direction, _ = sf.cart_to_sph(entry.doa)
        az, el = doas.pop()
        assert abs(az - direction.azimuth) <= 0.5 + 1e-9
        assert abs(el - direction.elevation) <= 0.5 + 1e-9

    def test_dynamic_event_azimuth_span(self, small_bank):
        # 20 deg/s for 2 s sweeps 40 degrees along the circular trace
        clip = sf.EventClip(0, np.random.default_rng(3).standard_normal(2 * FS), "n")
        ev = sf.ScheduledEvent(
            clip=clip, onset=2.0,
            motion=DynamicMotion(trajectory_id=0, height_id=0, start_index=10,
                                 direction=1, angular_speed=20.0),
            track=0,
        )
        timeline = sf.EventTimeline("testroom", "train", [ev], 60.0)
        _, ann, _ = sf.render_mixture(timeline, small_bank)
        azimuths = np.unwrap(np.array([r[3] for r in ann.rows], dtype=float), period=360.0)
        assert abs(abs(azimuths[-1] - azimuths[0]) - 40.0) <= 1.0

    def test_peak_normalized(self, corpus, small_bank):
        timeline = sf.schedule_events(
            corpus, small_bank, sf.MixtureConfig(), np.random.default_rng(4)
        )
        audio, _, gain = sf.render_mixture(timeline, small_bank)
        assert np.max(np.abs(audio)) == pytest.approx(10 ** (-1 / 20), rel=1e-6)
        assert gain > 0

    def test_annotated_frames_have_energy(self, corpus, small_bank):
        timeline = sf.schedule_events(
            corpus, small_bank, sf.MixtureConfig(), np.random.default_rng(5)
        )
        audio, ann, _ = sf.render_mixture(timeline, small_bank)
        frame_len = int(FRAME_SECONDS * FS)
        active = ann.active_frames()
        tail_frames = int(np.ceil(small_bank.spec.srir_length / FS / FRAME_SECONDS)) + 1
        energies = np.array([
            float(np.sum(audio[f * frame_len : (f + 1) * frame_len] ** 2))
            for f in range(600)
        ])
        for f in range(600):
            in_tail = any((f - k) in active for k in range(tail_frames + 1))
            if f in active:
                assert energies[f] > 0.0
            elif not in_tail:
                assert energies[f] == 0.0


@pytest.fixture(scope="module")
def three_banks():
    banks = []
    for i in range(3):
        spec = sf.RoomSpec(
            name=f"room{i}", dims=(6.0 + i * 0.3, 5.0, 3.0),
            array_center=(3.0, 2.5, 1.5),
            trajectories=[
                sf.CircularTrajectory(radius=1.6, height=1.5, group_index=0,
                                      height_index=0)
            ],
            absorption=0.4, max_order=1, spacing_deg=2.0, srir_length=1200,
        )
        banks.append(sf.build_bank(spec))
    return banks


@pytest.fixture(scope="module")
def tiny_config():
    return sf.DatasetConfig(
        n_train_rooms=2, n_val_rooms=1, base_train=3, base_val=2, scale=1.0,
        mixture=sf.MixtureConfig(min_activity=20.0),
    )


class TestDataset:
    def test_generate_and_manifest(self, three_banks, corpus, tiny_config, tmp_path):
        manifest = sf.generate_dataset(three_banks, corpus, tmp_path / "ds", seed=42,
                                       config=tiny_config)
        assert len(manifest["mixtures"]) == 5
        assert set(manifest["folds"]["train"]) == {"room0", "room1"}
        assert manifest["folds"]["val"] == ["room2"]
        assert not set(manifest["folds"]["train"]) & set(manifest["folds"]["val"])
        for m in manifest["mixtures"]:
            wav = tmp_path / "ds" / m["wav"]
            rate, data = read_wav(wav)
            assert rate == FS
            assert data.shape == (60 * FS, 4)
            ann = sf.FrameAnnotations.read(tmp_path / "ds" / m["csv"])
            poly = ann.polyphony()
            assert max(poly.values()) <= 3
            assert len(ann.active_frames()) * FRAME_SECONDS >= 20.0

    def test_regeneration_bit_exact(self, three_banks, corpus, tiny_config, tmp_path):
        out = tmp_path / "ds"
        manifest = sf.generate_dataset(three_banks, corpus, out, seed=7, config=tiny_config)
        banks_by_room = {b.spec.name: b for b in three_banks}
        for m in manifest["mixtures"][:2]:
            audio, csv_text = sf.regenerate_mixture(
                m, banks_by_room, corpus, tiny_config.mixture
            )
            assert (out / m["csv"]).read_text() == csv_text
            regen = tmp_path / "regen.wav"
            write_wav_pcm16(regen, FS, audio)
            assert regen.read_bytes() == (out / m["wav"]).read_bytes()

    def test_same_seed_same_hashes(self, three_banks, corpus, tiny_config, tmp_path):
        m1 = sf.generate_dataset(three_banks, corpus, tmp_path / "a", seed=5,
                                 config=tiny_config)
        m2 = sf.generate_dataset(three_banks, corpus, tmp_path / "b", seed=5,
                                 config=tiny_config)
        assert [x["wav_sha256"] for x in m1["mixtures"]] == [
            x["wav_sha256"] for x in m2["mixtures"]
        ]
        m3 = sf.generate_dataset(three_banks, corpus, tmp_path / "c", seed=6,
                                 config=tiny_config)
        assert [x["wav_sha256"] for x in m1["mixtures"]] != [
            x["wav_sha256"] for x in m3["mixtures"]
        ]

    def test_insufficient_rooms(self, three_banks, corpus, tmp_path):
        with pytest.raises(ValueError, match="room banks"):
            sf.generate_dataset(three_banks, corpus, tmp_path / "x", seed=1,
                                config=sf.DatasetConfig())

    def test_scale_counts(self):
        config = sf.DatasetConfig(scale=0.01)
        assert (config.n_train, config.n_val) == (9, 3)
        config = sf.DatasetConfig(scale=0.05)
        assert (config.n_train, config.n_val) == (45, 15)
