import math

import numpy as np
import pytest

import srirforge as sf
from srirforge.geometry import Direction, normalize
from srirforge.ism import _image_lattice, _render_from_lattice


def brute_force_images(dims, source, max_order):
    """Oracle: mirror recursively across all six walls, keep minimal depth."""
    dims = np.asarray(dims, float)
    seen = {tuple(np.round(np.asarray(source, float), 9)): 0}
    frontier = [np.asarray(source, float)]
    for depth in range(1, max_order + 1):
        nxt = []
        for p in frontier:
            for axis in range(3):
                for wall in (0.0, dims[axis]):
                    q = p.copy()
                    q[axis] = 2.0 * wall - q[axis]
                    key = tuple(np.round(q, 9))
                    if key not in seen:
                        seen[key] = depth
                        nxt.append(q)
        frontier = nxt
    return seen


def closed_form_count(k):
    f = lambda n: 1 if n == 0 else 2
    return sum(
        f(a) * f(b) * f(c)
        for a in range(k + 1)
        for b in range(k + 1 - a)
        for c in range(k + 1 - a - b)
    )


class TestEnumerateImages:
    def test_order_zero(self):
        room = sf.ShoeboxRoom(dims=(5, 4, 3), absorption=0.3, max_order=0)
        imgs = sf.enumerate_images(room, (2, 2, 1.5), 0)
        assert len(imgs) == 1
        assert np.allclose(imgs[0].position, [2, 2, 1.5])
        assert imgs[0].total_order == 0

    def test_order_counts(self):
        room = sf.ShoeboxRoom(dims=(5, 4, 3), absorption=0.3, max_order=3)
        for k, expected in [(0, 1), (1, 7), (2, 25)]:
            assert len(sf.enumerate_images(room, (2.2, 1.7, 1.1), k)) == expected
            assert closed_form_count(k) == expected
        for k in range(6):
            imgs = sf.enumerate_images(room, (2.2, 1.7, 1.1), k)
            assert len(imgs) == closed_form_count(k)

    def test_reflection_counts_sum_to_order(self):
        room = sf.ShoeboxRoom(dims=(5, 4, 3), absorption=0.3, max_order=3)
        for img in sf.enumerate_images(room, (2.2, 1.7, 1.1), 3):
            assert sum(img.reflection_counts) == img.total_order

    def test_matches_recursive_mirror_oracle(self):
        rng = np.random.default_rng(99)
        room_dims = [(5.0, 4.0, 3.0), (7.3, 2.9, 4.1), (3.3, 3.3, 3.3)]
        for dims in room_dims:
            source = rng.uniform(0.3, np.asarray(dims) - 0.3)
            room = sf.ShoeboxRoom(dims=dims, absorption=0.2, max_order=3)
            imgs = sf.enumerate_images(room, source, 3)
            oracle = brute_force_images(dims, source, 3)
            mine = {tuple(np.round(i.position, 9)): i.total_order for i in imgs}
            assert len(mine) == len(imgs)  # no duplicates
            assert mine == oracle

    def test_source_outside_rejected(self):
        room = sf.ShoeboxRoom(dims=(5, 4, 3), absorption=0.3, max_order=1)
        with pytest.raises(ValueError):
            sf.enumerate_images(room, (6, 2, 1), 1)
        with pytest.raises(ValueError):
            sf.enumerate_images(room, (5.0, 2, 1), 1)  # on the wall is not inside


class TestImageAmplitude:
    def test_direct_path_1m(self):
        img = sf.ImageSource(position=np.array([1.0, 0, 0]), reflection_counts=(0,) * 6,
                             total_order=0)
        assert sf.image_amplitude(img, (0, 0, 0), 0.3) == pytest.approx(1 / (4 * math.pi))

    def test_one_reflection(self):
        img = sf.ImageSource(position=np.array([2.0, 0, 0]), reflection_counts=(1, 0, 0, 0, 0, 0),
                             total_order=1)
        # beta = sqrt(1 - 0.75) = 0.5, d = 2
        assert sf.image_amplitude(img, (0, 0, 0), 0.75) == pytest.approx(0.5 / (8 * math.pi))

    def test_fully_absorbing_wall(self):
        img = sf.ImageSource(position=np.array([2.0, 0, 0]), reflection_counts=(1, 0, 0, 0, 0, 0),
                             total_order=1)
        assert sf.image_amplitude(img, (0, 0, 0), 1.0) == 0.0

    def test_zero_distance_rejected(self):
        img = sf.ImageSource(position=np.array([1.0, 2, 3]), reflection_counts=(0,) * 6,
                             total_order=0)
        with pytest.raises(ValueError):
            sf.image_amplitude(img, (1, 2, 3), 0.3)


class TestDirectivity:
    def test_omni(self):
        for angle in (0, 45, 90, 180):
            assert sf.directivity_gain("omnidirectional", angle) == 1.0

    def test_hypercardioid_on_axis(self):
        assert sf.directivity_gain("hypercardioid", 0.0) == pytest.approx(1.0)

    def test_hypercardioid_null(self):
        null = math.degrees(math.acos(-1.0 / 3.0))  # 109.4712
        assert sf.directivity_gain("hypercardioid", null) == pytest.approx(0.0, abs=1e-12)

    def test_cardioid_rear(self):
        assert sf.directivity_gain("cardioid", 180.0) == pytest.approx(0.0, abs=1e-12)


ANECHOIC = dict(absorption=0.0, max_order=0)


class TestRenderRir:
    def test_anechoic_peak_position_and_amplitude(self):
        room = sf.ShoeboxRoom(dims=(10, 10, 10), **ANECHOIC)
        rir = sf.render_rir(room, (6, 5, 5), (5, 5, 5), length=2400)
        # d = 1 m, t*fs = 24000/343 = 69.97
        assert abs(int(np.argmax(np.abs(rir.samples))) - 69.97) <= 0.5 + 1e-9
        assert rir.samples.max() == pytest.approx(1 / (4 * math.pi), rel=0.01)

    def test_inverse_distance_law(self):
        room = sf.ShoeboxRoom(dims=(10, 10, 10), **ANECHOIC)
        peak1 = sf.render_rir(room, (6, 5, 5), (5, 5, 5), length=2400).samples.max()
        peak2 = sf.render_rir(room, (7, 5, 5), (5, 5, 5), length=2400).samples.max()
        assert peak1 / peak2 == pytest.approx(2.0, rel=0.01)

    def test_full_absorption_equals_anechoic(self):
        dead = sf.ShoeboxRoom(dims=(6, 5, 4), absorption=1.0, max_order=3)
        free = sf.ShoeboxRoom(dims=(6, 5, 4), **ANECHOIC)
        a = sf.render_rir(dead, (2, 2, 2), (4, 3, 2), length=2400).samples
        b = sf.render_rir(free, (2, 2, 2), (4, 3, 2), length=2400).samples
        assert np.array_equal(a, b)

    def test_linearity_over_image_subsets(self):
        room = sf.ShoeboxRoom(dims=(6, 5, 4), absorption=0.3, max_order=2)
        source = np.array([2.1, 2.4, 1.9])
        receiver = np.array([4.0, 3.0, 2.0])
        positions, orders, _ = _image_lattice(room, source, 2)
        full = _render_from_lattice(
            positions, orders, receiver, None, "omnidirectional",
            room.absorption, room.speed_of_sound, 24000, 2400,
        )
        subset = np.zeros(len(orders), dtype=bool)
        subset[::3] = True
        part1 = _render_from_lattice(
            positions[subset], orders[subset], receiver, None, "omnidirectional",
            room.absorption, room.speed_of_sound, 24000, 2400,
        )
        part2 = _render_from_lattice(
            positions[~subset], orders[~subset], receiver, None, "omnidirectional",
            room.absorption, room.speed_of_sound, 24000, 2400,
        )
        assert np.max(np.abs(part1 + part2 - full)) < 1e-9

    def test_energy_monotone_in_absorption(self):
        energies = []
        for alpha in np.arange(0.1, 1.0, 0.1):
            room = sf.ShoeboxRoom(dims=(6, 5, 4), absorption=float(alpha), max_order=3)
            h = sf.render_rir(room, (2, 2, 2), (4.4, 3.1, 2.3), length=4800).samples
            energies.append(float(np.sum(h * h)))
        assert all(b <= a + 1e-15 for a, b in zip(energies, energies[1:]))

    def test_direct_delay_random_pairs(self):
        room = sf.ShoeboxRoom(dims=(12, 11, 9), **ANECHOIC)
        rng = np.random.default_rng(17)
        for _ in range(100):
            src = rng.uniform(1.0, np.array([11, 10, 8]))
            rcv = rng.uniform(1.0, np.array([11, 10, 8]))
            if np.linalg.norm(src - rcv) < 0.2:
                continue
            rir = sf.render_rir(room, src, rcv, length=2400)
            expected = np.linalg.norm(src - rcv) / 343.0 * 24000
            assert abs(int(np.argmax(np.abs(rir.samples))) - expected) <= 0.5 + 1e-9


class TestRenderSrir:
    def test_default_shape(self):
        room = sf.ShoeboxRoom(dims=(6, 5, 3), absorption=0.4, max_order=1)
        srir = sf.render_srir(room, (4, 3, 1.5), sf.tetrahedral_array((3, 2.5, 1.5)))
        assert srir.data.shape == (7200, 4)
        assert srir.sample_rate == 24000
        assert np.allclose(srir.doa, normalize((1.0, 0.5, 0.0)), atol=1e-12)

    def test_on_axis_channel_dominates(self):
        room = sf.ShoeboxRoom(dims=(10, 10, 10), **ANECHOIC)
        center = np.array([5.0, 5.0, 5.0])
        array = sf.tetrahedral_array(center)
        source = center + 1.5 * sf.sph_to_cart(Direction(45, 35), 1.0)
        srir = sf.render_srir(room, source, array, length=1024)
        peaks = np.abs(srir.data).max(axis=0)
        assert peaks[0] >= peaks.max() - 1e-12

    def test_mirrored_scene_swaps_channel_pairs(self):
        # mirroring y and z about the array (a 180 deg rotation about x) maps
        # capsule M1->M2 and M4->M3 for the tetrahedral layout
        center = np.array([3.0, 2.5, 1.5])
        room = sf.ShoeboxRoom(dims=(6, 5, 3), absorption=0.35, max_order=2)
        array = sf.tetrahedral_array(center)
        source = np.array([4.2, 3.1, 2.2])
        mirrored = np.array([4.2, 2 * 2.5 - 3.1, 2 * 1.5 - 2.2])
        a = sf.render_srir(room, source, array, length=2400).data
        b = sf.render_srir(room, mirrored, array, length=2400).data
        for src_ch, dst_ch in ((0, 1), (1, 0), (2, 3), (3, 2)):
            assert np.max(np.abs(a[:, src_ch] - b[:, dst_ch])) < 1e-6

    def test_array_outside_rejected(self):
        room = sf.ShoeboxRoom(dims=(6, 5, 3), absorption=0.4, max_order=1)
        with pytest.raises(ValueError):
            sf.render_srir(room, (4, 3, 1.5), sf.tetrahedral_array((7, 2.5, 1.5)))


class TestBatchRender:
    def test_matches_single_renders(self):
        room = sf.ShoeboxRoom(dims=(6, 5, 3), absorption=0.35, max_order=2)
        array = sf.tetrahedral_array((3, 2.5, 1.5))
        sources = np.array([[4.0, 3.0, 1.5], [2.0, 1.5, 2.0], [4.5, 2.5, 1.0]])
        from srirforge.ism import render_srirs_batch

        for i, srir in render_srirs_batch(room, sources, array, length=2400):
            single = sf.render_srir(room, sources[i], array, length=2400)
            assert np.max(np.abs(srir.data - single.data)) < 1e-12
            assert np.allclose(srir.doa, single.doa)
