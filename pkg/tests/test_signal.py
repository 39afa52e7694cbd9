import numpy as np
import pytest
from hypothesis import given, strategies as st

from ambiroom import DirectionGrid, Domain, SpatialSignal, read_wav, write_wav
from ambiroom.errors import DimensionError, FormatError, MalformedSignalError
from ambiroom.signal import reset_transform_counts, spectrum_weights, transform_counts

shapes = st.tuples(st.integers(1, 3), st.sampled_from([1, 4, 9]), st.integers(1, 300))


@given(shapes, st.integers(0, 2 ** 32 - 1))
def test_time_freq_round_trip(shape, seed):
    x = np.random.default_rng(seed).standard_normal(shape)
    sig = SpatialSignal(x.copy(), 48000, Domain.TIME, Domain.SH)
    sig.to_freq().to_time()
    np.testing.assert_allclose(sig.data, x, atol=1e-12)
    assert sig.n_frames == shape[-1]


@given(st.integers(1, 257), st.integers(0, 2 ** 32 - 1))
def test_parseval(n, seed):
    x = np.random.default_rng(seed).standard_normal((1, 1, n))
    sig = SpatialSignal(x, 48000, Domain.TIME, Domain.SPACE).to_freq()
    energy = np.sum(spectrum_weights(sig.nfft) * np.abs(sig.data[0, 0]) ** 2) / sig.nfft
    np.testing.assert_allclose(energy, np.sum(x ** 2), rtol=1e-10)


def test_to_freq_is_idempotent():
    sig = SpatialSignal(np.ones((1, 4, 10)), 48000, Domain.TIME, Domain.SH)
    reset_transform_counts()
    sig.to_freq()
    sig.to_freq()
    assert transform_counts["forward"] == 1
    sig.to_time()
    sig.to_time()
    assert transform_counts["inverse"] == 1


def test_space_sh_round_trip(rng):
    grid = DirectionGrid.for_order(3)
    coeffs = rng.standard_normal((2, 16, 20))
    sig = SpatialSignal(coeffs.copy(), 48000, Domain.TIME, Domain.SH)
    sig.to_space(grid)
    assert sig.space_domain is Domain.SPACE and sig.n_spatial == grid.n_dirs
    sig.to_sh(3)
    np.testing.assert_allclose(sig.data, coeffs, atol=1e-12)


def test_space_and_time_commute(rng):
    grid = DirectionGrid.for_order(2)
    x = rng.standard_normal((1, 9, 33))
    a = SpatialSignal(x.copy(), 48000, Domain.TIME, Domain.SH).to_freq().to_space(grid)
    b = SpatialSignal(x.copy(), 48000, Domain.TIME, Domain.SH).to_space(grid).to_freq()
    np.testing.assert_allclose(a.data, b.data, atol=1e-12)


def test_quick_start_aliases():
    sig = SpatialSignal(np.ones((1, 4, 8)), 48000)
    assert sig.toFreq() is sig and sig.toTime() is sig


def test_validation():
    with pytest.raises(MalformedSignalError):
        SpatialSignal(np.ones(5), 48000)
    with pytest.raises(DimensionError):
        SpatialSignal(np.ones((1, 5, 4)), 48000, space_domain=Domain.SH, sh_order=1)
    with pytest.raises(MalformedSignalError):
        SpatialSignal(np.ones((1, 4, 5)), 48000, Domain.FREQ)
    sig = SpatialSignal(np.ones((1, 4, 8)), 48000, Domain.TIME, Domain.SPACE)
    with pytest.raises(DimensionError):
        sig.to_sh(1)
    with pytest.raises(DimensionError):
        SpatialSignal(np.ones((1, 4, 8)), 48000).to_freq(4)


def test_wav_round_trip_spatial_major(tmp_path, rng):
    x = rng.standard_normal((2, 4, 100)).astype(np.float32).astype(float)
    sig = SpatialSignal(x, 48000, Domain.TIME, Domain.SH)
    write_wav(tmp_path / "a.wav", sig)
    back = read_wav(tmp_path / "a.wav", n_channels=2, space_domain=Domain.SH, sh_order=1)
    np.testing.assert_array_equal(back.data, x)
    flat = read_wav(tmp_path / "a.wav")
    # file channel s * n_channels + c holds spatial s of channel c
    np.testing.assert_array_equal(flat.data[0, 3], x[1, 1])


def test_wav_rejects_spectra_and_garbage(tmp_path):
    sig = SpatialSignal(np.ones((1, 1, 8)), 48000, Domain.TIME, Domain.SPACE).to_freq()
    with pytest.raises(MalformedSignalError):
        write_wav(tmp_path / "x.wav", sig)
    (tmp_path / "bad.wav").write_bytes(b"not a wav file at all")
    with pytest.raises(FormatError):
        read_wav(tmp_path / "bad.wav")
