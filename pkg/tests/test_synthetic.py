import numpy as np
import pytest
from scipy.signal import correlate, resample

from ambiroom import generate_synthetic_hrtf, load_file, save_file
from ambiroom.errors import ConfigError, GeometryError
from ambiroom.grids import DirectionGrid
from ambiroom.synthetic import SyntheticHrtf, woodworth_itd

FS = 48000.0


def horizontal(az_deg):
    az = np.radians(np.atleast_1d(az_deg).astype(float))
    return DirectionGrid(az, np.zeros_like(az), np.full(az.size, 4 * np.pi / az.size))


def test_left_right_mirror_symmetry(small_hrtf):
    g = small_hrtf.grid
    mirror = g.nearest(-g.azimuths, g.elevations)
    np.testing.assert_allclose(g.azimuths[mirror] % (2 * np.pi), -g.azimuths % (2 * np.pi),
                               atol=1e-9)
    irs = small_hrtf.irs
    np.testing.assert_allclose(irs[mirror, 0], irs[:, 1], atol=1e-10)


def test_head_shadow_at_3khz():
    h = generate_synthetic_hrtf(grid=horizontal([30, 60, 90, 120]))
    H = np.abs(np.fft.rfft(h.irs, axis=-1))
    k = int(round(3000 * h.taps / FS))
    assert np.all(H[:, 0, k] >= H[:, 1, k])
    assert 20 * np.log10(H[2, 0, k] / H[2, 1, k]) > 3      # the contralateral bright spot caps it


def test_frontal_source_has_no_interaural_difference():
    h = generate_synthetic_hrtf(grid=horizontal([0]))
    H = np.abs(np.fft.rfft(h.irs[0], axis=-1))
    band = slice(1, int(20000 * h.taps / FS))
    assert np.abs(20 * np.log10(H[0, band] / H[1, band])).max() < 0.5


def test_itd_follows_woodworth():
    az = np.array([10, 20, 30, 45, 60, 75, 90])
    h = generate_synthetic_hrtf(grid=horizontal(az), taps=512)
    up = 8
    x = resample(h.irs, h.taps * up, axis=-1)
    itd = []
    for left, right in x:
        c = correlate(right, left, mode="full")
        itd.append((np.argmax(c) - (len(left) - 1)) / (FS * up))
    ref = woodworth_itd(np.radians(az), radius=0.0875)
    np.testing.assert_allclose(itd, ref, rtol=0.1)


def test_itd_scales_with_radius():
    g = horizontal([90])
    small = generate_synthetic_hrtf(grid=g, radius=0.07, taps=512)
    large = generate_synthetic_hrtf(grid=g, radius=0.1, taps=512)

    def lag(h):
        c = correlate(h.irs[0, 1], h.irs[0, 0], mode="full")
        return np.argmax(c) - (h.taps - 1)

    assert lag(large) > lag(small) > 0


def test_container_round_trip(tmp_path, small_hrtf):
    p = tmp_path / "synthetic.shrm"
    save_file(p, small_hrtf)
    back = load_file(p)
    # irs are stored as float32
    np.testing.assert_array_equal(back.irs, small_hrtf.irs.astype(np.float32))
    np.testing.assert_array_equal(back.grid.azimuths, small_hrtf.grid.azimuths)
    save_file(tmp_path / "again.shrm", back)
    assert (tmp_path / "again.shrm").read_bytes() == p.read_bytes()


def test_defaults_and_validation():
    assert SyntheticHrtf().radius == 0.0875
    assert SyntheticHrtf().grid().n_dirs == 2702
    with pytest.raises(GeometryError):
        generate_synthetic_hrtf(radius=0.0, grid=horizontal([0]))
    with pytest.raises(ConfigError):
        generate_synthetic_hrtf(taps=16, delay=32.0, grid=horizontal([0]))


def test_invariants(small_hrtf):
    assert small_hrtf.irs.shape == (small_hrtf.grid.n_dirs, 2, 128)
    assert np.all(np.isfinite(small_hrtf.irs))
    np.testing.assert_allclose(small_hrtf.grid.weights.sum(), 4 * np.pi)
