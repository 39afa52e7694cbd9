import numpy as np
import pytest
from hypothesis import given, strategies as st

from ambiroom import Room, RoomSpec, Scene, compute_amb, compute_arir, compute_images, sh_matrix
from ambiroom.errors import ConfigError, GeometryError, IncompleteSceneError
from ambiroom.ism import image_direction
from ambiroom.room import fractional_delay_kernel, kernel_centre

from conftest import DEMO_RECEIVER, DEMO_SOURCE


def demo_room(order=5, **kw):
    room = Room(dimensions=[6, 5, 3], absorption=0.4, max_ism_order=order, sh_order=3,
                fs=48000, **kw)
    room.add_source(DEMO_SOURCE)
    room.set_receiver(DEMO_RECEIVER)
    return room


def place(taps, offset, length, n):
    out = np.zeros(n)
    for k, t in enumerate(taps):
        i = offset + k - kernel_centre(length)
        if 0 <= i < n:
            out[i] += t
    return out


@given(st.integers(0, 500))
def test_integer_delay_is_a_unit_tap(d):
    taps, offset = fractional_delay_kernel(float(d), 32)
    assert offset == d
    assert taps[kernel_centre(32)] == 1.0 and np.count_nonzero(taps) == 1


@given(st.floats(0, 1000, allow_nan=False))
def test_unit_dc_gain(d):
    taps, _ = fractional_delay_kernel(d, 32)
    np.testing.assert_allclose(taps.sum(), 1.0, atol=1e-12)


@pytest.mark.parametrize("frac", [0.1, 0.25, 0.5, 0.77])
def test_interpolates_band_limited_signal(frac):
    # a 1 kHz tone delayed by 40 + frac samples, sampled at 48 kHz
    f = 1000 / 48000
    d = 40 + frac
    taps, offset = fractional_delay_kernel(d, 32)
    h = place(taps, offset, 32, 80)
    n = np.arange(400)
    y = np.convolve(np.sin(2 * np.pi * f * n), h)[100:300]
    ref = np.sin(2 * np.pi * f * (n[100:300] - d))
    assert np.abs(y - ref).max() < 1e-3


def test_negative_delay_rejected():
    with pytest.raises(ConfigError):
        fractional_delay_kernel(-1.0)


def test_quick_start_shape():
    arir = demo_room().compute_arir()
    assert arir.data.shape[:2] == (1, 16)
    assert arir.sh_order == 3 and arir.fs == 48000


def test_dc_sums_match_images():
    # summing over time removes the kernel: each channel's sum is sum_i a_i Y_c(dir_i)
    room = demo_room(3)
    arir = room.compute_arir().data[0]
    imgs = compute_images(room.spec, DEMO_SOURCE, DEMO_RECEIVER)
    ref = np.zeros(16)
    for img in imgs:
        azi, ele = image_direction(img, DEMO_RECEIVER)
        ref += img.amplitude * sh_matrix(3, [azi], [ele])[0]
    np.testing.assert_allclose(arir.sum(axis=-1), ref, rtol=1e-10, atol=1e-14)


def test_arrival_times():
    room = Room([6, 5, 3], 0.4, 0, sh_order=1, fs=48000)
    room.add_source(DEMO_SOURCE)
    room.set_receiver(DEMO_RECEIVER)
    arir = room.compute_arir().data[0, 0]
    d = np.linalg.norm(np.subtract(DEMO_SOURCE, DEMO_RECEIVER)) * 48000 / 343
    peak = np.argmax(np.abs(arir))
    assert abs(peak - d) <= 1


def test_mixed_is_sum_of_sources():
    spec = RoomSpec((6, 5, 3), 0.4, 3)
    scene = Scene(spec, np.array(DEMO_RECEIVER))
    scene.add_source(DEMO_SOURCE).add_source((1.0, 4.0, 2.0))
    per = compute_arir(scene)
    mixed = compute_arir(scene, mixed=True)
    assert per.data.shape[0] == 2 and mixed.data.shape[0] == 1
    np.testing.assert_allclose(mixed.data[0], per.data.sum(axis=0), atol=1e-14)


def test_amb_is_convolution(rng):
    spec = RoomSpec((6, 5, 3), 0.4, 2)
    scene = Scene(spec, np.array(DEMO_RECEIVER), sh_order=2)
    dry = [rng.standard_normal(300), rng.standard_normal(120)]
    scene.add_source(DEMO_SOURCE, dry[0]).add_source((1.0, 4.0, 2.0), dry[1])
    per = compute_arir(scene)
    amb = compute_amb(scene).data[0]
    ref = np.zeros_like(amb)
    for k in range(2):
        for c in range(9):
            y = np.convolve(per.data[k, c], dry[k])
            ref[c, :len(y)] += y
    np.testing.assert_allclose(amb, ref, atol=1e-12)


def test_amb_needs_signals():
    with pytest.raises(IncompleteSceneError):
        demo_room().compute_amb()


def test_scene_validation():
    room = Room([6, 5, 3])
    with pytest.raises(GeometryError):
        room.add_source((6.5, 1, 1))
    with pytest.raises(IncompleteSceneError):
        room.compute_arir()
    room.set_receiver(DEMO_RECEIVER)
    with pytest.raises(IncompleteSceneError):
        room.compute_arir()


def test_direct_path_ignores_absorption():
    a = demo_room(2, c=343.0).compute_arir().data
    spec = RoomSpec((6, 5, 3), 0.0, 0)
    direct = compute_arir(Scene(spec, np.array(DEMO_RECEIVER),
                                [(np.array(DEMO_SOURCE), None)])).data
    first = np.argmax(np.abs(direct[0, 0]))
    np.testing.assert_allclose(a[0, :, :first + 10], direct[0, :, :first + 10], atol=1e-14)
