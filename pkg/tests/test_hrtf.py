import numpy as np
import pytest
from hypothesis import given, strategies as st

from ambiroom import (DirectionGrid, HrtfSet, load_file, lsd, magls, magls_hrtf, project_ls,
                      resample_hrtf, save_file)
from ambiroom.errors import ConfigError, DimensionError, FormatError, UnderdeterminedGridError
from ambiroom.hrtf import DEFAULT_CROSSOVER, default_crossover, dump_hrtf, load_hrtf


def test_container_round_trip_is_bit_exact(hrtf, tmp_path):
    blob = dump_hrtf(hrtf)
    back = load_hrtf(blob)
    assert dump_hrtf(back) == blob
    np.testing.assert_array_equal(back.irs, hrtf.irs.astype(np.float32))
    assert back.grid.same_directions(hrtf.grid) and back.fs == hrtf.fs
    save_file(tmp_path / "set.shrm", hrtf)
    assert dump_hrtf(load_file(tmp_path / "set.shrm")) == blob


def test_container_size(small_hrtf):
    D, T = small_hrtf.n_dirs, small_hrtf.taps
    assert len(dump_hrtf(small_hrtf)) == 20 + 24 * D + 8 * D * T


def test_header_errors_name_offsets(small_hrtf):
    blob = bytearray(dump_hrtf(small_hrtf))
    cases = [(b"XXXX", 0, 0), ((2).to_bytes(4, "little"), 4, 4), (bytes(4), 8, 8),
             (bytes(4), 12, 12), (bytes(4), 16, 16)]
    for patch, at, offset in cases:
        bad = bytearray(blob)
        bad[at:at + len(patch)] = patch
        with pytest.raises(FormatError) as err:
            load_hrtf(bytes(bad))
        assert err.value.offset == offset


def test_trailing_bytes(small_hrtf):
    blob = dump_hrtf(small_hrtf)
    with pytest.raises(FormatError) as err:
        load_hrtf(blob + b"\0")
    assert err.value.offset == len(blob)


@given(st.data())
def test_any_truncation_is_a_format_error(small_hrtf, data):
    blob = dump_hrtf(small_hrtf)
    cut = data.draw(st.integers(0, len(blob) - 1))
    with pytest.raises(FormatError) as err:
        load_hrtf(blob[:cut])
    assert err.value.offset is not None and err.value.offset <= cut


@given(st.binary(max_size=200))
def test_fuzzed_bytes_fail_cleanly(blob):
    with pytest.raises(FormatError):
        load_hrtf(blob)


def test_bad_grid_is_a_format_error(small_hrtf):
    blob = bytearray(dump_hrtf(small_hrtf))
    D = small_hrtf.n_dirs
    w0 = 20 + 16 * D
    blob[w0:w0 + 8] = np.float64(-1.0).tobytes()
    with pytest.raises(FormatError) as err:
        load_hrtf(bytes(blob))
    assert err.value.offset == 20


def test_sample_rate_must_be_integral(small_hrtf):
    odd = HrtfSet(small_hrtf.grid, small_hrtf.irs, 44100.5)
    with pytest.raises(FormatError):
        dump_hrtf(odd)


def test_set_validation(small_hrtf):
    with pytest.raises(DimensionError):
        HrtfSet(small_hrtf.grid, small_hrtf.irs[:, :1], 48000)
    with pytest.raises(DimensionError):
        HrtfSet(small_hrtf.grid, small_hrtf.irs[:-1], 48000)


def test_ls_is_the_weighted_least_squares_optimum(small_hrtf):
    from ambiroom import sh_matrix

    sh = project_ls(small_hrtf, 4)
    g = small_hrtf.grid
    Y = sh_matrix(4, g.azimuths, g.elevations)
    resid = sh.synthesize(g) - small_hrtf.spectra(sh.nfft)
    # normal equations: the residual is W-orthogonal to every basis function
    grad = np.einsum("pc,p,peb->ceb", Y, g.weights, resid)
    assert np.abs(grad).max() < 1e-10 * np.abs(sh.coeffs).max()


def test_ls_reproduces_the_set_at_high_order(hrtf):
    sh = project_ls(hrtf, 44)
    H = hrtf.spectra(sh.nfft)
    assert np.abs(sh.synthesize(hrtf.grid) - H).max() < 0.01 * np.abs(H).max()


def test_ls_needs_an_adequate_grid(small_hrtf):
    with pytest.raises(UnderdeterminedGridError):
        project_ls(small_hrtf, 30)


@pytest.mark.parametrize("order", [1, 3, 5])
def test_magls_beats_ls_on_magnitude_above_fc(small_hrtf, order):
    ls, mg = project_ls(small_hrtf, order), magls(small_hrtf, order)
    H = np.abs(small_hrtf.spectra(ls.nfft))
    w = small_hrtf.grid.weights[:, None, None]

    def err(sh):
        return np.sum(w * (np.abs(sh.synthesize(small_hrtf.grid)) - H) ** 2, axis=(0, 1))

    above = ls.freqs > mg.fc
    assert np.all(err(mg)[above] <= err(ls)[above])
    np.testing.assert_array_equal(mg.coeffs[..., ~above], ls.coeffs[..., ~above])


def test_magls_lowers_binaural_lsd(small_hrtf):
    from ambiroom.evaluation import plane_wave_arir
    from ambiroom import BinauralDecoder

    g = small_hrtf.grid
    i = 17
    pw = plane_wave_arir(3, g.azimuths[i], g.elevations[i], 48000)
    ref = small_hrtf.irs[i]
    out = {m: BinauralDecoder(f(small_hrtf, 3)).process(pw).data[0]
           for m, f in (("ls", project_ls), ("magls", magls_hrtf))}
    assert lsd(out["magls"], ref, 48000).lsd_avg < lsd(out["ls"], ref, 48000).lsd_avg


def test_crossover_defaults():
    for N, fc in DEFAULT_CROSSOVER.items():
        assert default_crossover(N) == fc
    assert default_crossover(2) == pytest.approx(2 * 343 / (2 * np.pi * 0.085))
    assert default_crossover(40) == 5000.0
    assert magls(generate_small(), 3).fc == 2000.0


def generate_small():
    from ambiroom import generate_synthetic_hrtf
    return generate_synthetic_hrtf(grid_degree=17, taps=64)


@pytest.mark.parametrize("fc", [0.0, -5.0, 24000.0, 30000.0])
def test_magls_crossover_range(fc):
    with pytest.raises(ConfigError):
        magls(generate_small(), 2, fc=fc)


def test_truncate(small_hrtf):
    sh = project_ls(small_hrtf, 4)
    low = sh.truncate(2)
    np.testing.assert_array_equal(low.coeffs, project_ls(small_hrtf, 4).coeffs[:9])
    assert sh.truncate(4) is sh
    with pytest.raises(DimensionError):
        sh.truncate(5)
    assert sh.filters().shape == (25, 2, sh.nfft)


def test_nfft_shorter_than_taps(small_hrtf):
    with pytest.raises(ConfigError):
        project_ls(small_hrtf, 2, nfft=64)


def test_resample_preserves_in_band_content():
    # a band-limited pulse train sampled at two rates
    grid = DirectionGrid.lebedev(3)
    t44 = np.arange(200) / 44100
    t48 = np.arange(218) / 48000

    def pulse(t):
        tone = np.sin(2 * np.pi * 1000 * t) * np.exp(-((t - 0.002) / 0.0008) ** 2)
        return np.sinc(8000 * (t - 0.002)) + tone

    irs = np.broadcast_to(pulse(t44), (grid.n_dirs, 2, 200))
    up = resample_hrtf(HrtfSet(grid, irs, 44100), 48000)
    assert up.fs == 48000 and up.taps == int(np.ceil(200 * 48000 / 44100))
    mid = slice(40, 160)
    np.testing.assert_allclose(up.irs[0, 0, mid], pulse(t48)[mid], atol=2e-3)
    same = resample_hrtf(up, 48000)
    np.testing.assert_array_equal(same.irs, up.irs)
    with pytest.raises(ConfigError):
        resample_hrtf(up, 0)


def test_container_rejects_non_finite_samples(small_hrtf):
    from ambiroom.errors import FormatError
    from ambiroom.hrtf import dump_hrtf, load_hrtf

    blob = bytearray(dump_hrtf(small_hrtf))
    blob[-4:] = np.float32(np.nan).tobytes()
    with pytest.raises(FormatError, match="non-finite"):
        load_hrtf(bytes(blob))
