import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from spiqgan import spikedata as sd
from spiqgan.errors import ConfigurationError, DataFormatError


def test_load_simple_file(tmp_path):
    path = tmp_path / "tiny.spk"
    path.write_text("SPIKES v1 2 4 0.02\n0101\n0011\n")
    m = sd.load_spikes(path)
    np.testing.assert_array_equal(m.data, [[0, 1, 0, 1], [0, 0, 1, 1]])
    assert m.bin_width == 0.02


def test_load_rejects_non_binary_entry(tmp_path):
    path = tmp_path / "bad.spk"
    path.write_text("SPIKES v1 1 3 0.02\n012\n")
    with pytest.raises(DataFormatError, match="row 0, column 2"):
        sd.load_spikes(path)


def test_load_rejects_ragged_rows(tmp_path):
    path = tmp_path / "ragged.spk"
    path.write_text("SPIKES v1 2 4 0.02\n0101\n011\n")
    with pytest.raises(DataFormatError, match="row 1"):
        sd.load_spikes(path)


@pytest.mark.parametrize("header", [
    "SPIKES v2 1 1 0.02",
    "NOTSPIKES v1 1 1 0.02",
    "SPIKES v1 1 1",
    "SPIKES v1 x 1 0.02",
    "SPIKES v1 1 1 -0.5",
])
def test_load_rejects_bad_headers(tmp_path, header):
    path = tmp_path / "bad.spk"
    path.write_text(header + "\n0\n")
    with pytest.raises(DataFormatError):
        sd.load_spikes(path)


def test_load_rejects_trailing_rows(tmp_path):
    path = tmp_path / "extra.spk"
    path.write_text("SPIKES v1 1 3 0.02\n010\n111\n")
    with pytest.raises(DataFormatError, match="trailing"):
        sd.load_spikes(path)


def test_save_load_round_trip(tmp_path):
    rng = np.random.default_rng(0)
    m = sd.SpikeMatrix((rng.random((5, 40)) < 0.3).astype(int), bin_width=0.01)
    path = tmp_path / "round.spk"
    sd.save_spikes(m, path)
    loaded = sd.load_spikes(path)
    np.testing.assert_array_equal(loaded.data, m.data)
    assert loaded.bin_width == m.bin_width


def test_save_is_byte_deterministic(tmp_path):
    m = sd.SpikeMatrix(np.array([[1, 0], [0, 1]]))
    a, b = tmp_path / "a.spk", tmp_path / "b.spk"
    sd.save_spikes(m, a)
    sd.save_spikes(m, b)
    assert a.read_bytes() == b.read_bytes()


def test_empty_matrix_refused():
    with pytest.raises(ConfigurationError):
        sd.SpikeMatrix(np.zeros((0, 4)))
    with pytest.raises(ConfigurationError):
        sd.SpikeMatrix(np.zeros((2, 0)))


def test_non_binary_matrix_refused():
    with pytest.raises(ConfigurationError):
        sd.SpikeMatrix(np.array([[0, 2], [1, 0]]))


def test_windows_full_width():
    m = sd.SpikeMatrix(np.array([[0, 1, 0], [1, 1, 0]]))
    spec = sd.WindowSpec((0, 1), 3)
    out = sd.sample_windows(m, spec, 4, np.random.default_rng(0))
    assert out.shape == (4, 6)
    expected = sd.flatten_windows(m.data[None])[0]
    for row in out:
        np.testing.assert_array_equal(row, expected)


def test_windows_constant_matrix():
    m = sd.SpikeMatrix(np.ones((3, 20), dtype=int))
    spec = sd.WindowSpec((0, 1, 2), 4)
    out = sd.sample_windows(m, spec, 8, np.random.default_rng(1))
    assert (out == 1.0).all()


def test_window_layout_is_patch_major():
    m = sd.SpikeMatrix(np.array([[1, 0], [0, 1]]))
    out = sd.sample_windows(m, sd.WindowSpec((0, 1), 2), 1,
                            np.random.default_rng(0))
    # timestep 0: neurons (1, 0); timestep 1: neurons (0, 1)
    np.testing.assert_array_equal(out[0], [1, 0, 0, 1])


def test_window_start_uniformity():
    # encode each column index in binary over 7 rows so a sampled t=1
    # window identifies its start column exactly
    cols = 100
    data = np.array([[(c >> i) & 1 for c in range(cols)] for i in range(7)])
    m = sd.SpikeMatrix(data)
    spec = sd.WindowSpec(tuple(range(7)), 1)
    draws = 10_000
    out = sd.sample_windows(m, spec, draws, np.random.default_rng(2))
    starts = (out.astype(int) * (1 << np.arange(7))).sum(axis=1)
    assert starts.min() >= 0 and starts.max() <= cols - 1
    counts = np.bincount(starts, minlength=cols)
    expected = draws / cols
    sigma = np.sqrt(draws * (1 / cols) * (1 - 1 / cols))
    assert (np.abs(counts - expected) < 3 * sigma).mean() > 0.97


def test_window_spec_validation():
    m = sd.SpikeMatrix(np.zeros((2, 5), dtype=int))
    with pytest.raises(ConfigurationError):
        sd.WindowSpec((0, 0), 2)
    with pytest.raises(ConfigurationError):
        sd.WindowSpec((0, 1), 0)
    with pytest.raises(ConfigurationError):
        sd.WindowSpec((0, 5), 2).validate_for(m)
    with pytest.raises(ConfigurationError):
        sd.WindowSpec((0, 1), 9).validate_for(m)


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 4), st.integers(1, 30), st.integers(1, 30),
       st.integers(0, 2**31))
def test_windows_stay_in_bounds(n, cols, window_len, seed):
    rng = np.random.default_rng(seed)
    m = sd.SpikeMatrix((rng.random((n, cols)) < 0.5).astype(int))
    if window_len > cols:
        with pytest.raises(ConfigurationError):
            sd.WindowSpec(tuple(range(n)), window_len).validate_for(m)
        return
    spec = sd.WindowSpec(tuple(range(n)), window_len)
    out = sd.sample_windows(m, spec, 16, rng)
    assert out.shape == (16, n * window_len)
    assert np.isin(out, (0.0, 1.0)).all()


def test_surrogate_iid_rates():
    rng = np.random.default_rng(3)
    rates = np.array([0.1, 0.3])
    m = sd.synthesize_surrogate(2, 100_000, rates, 0.9, 1.0, rng)
    emp = m.data.mean(axis=1)
    sigma = np.sqrt(rates * (1 - rates) / 100_000)
    assert (np.abs(emp - rates) < 3 * sigma).all()


def test_surrogate_iid_covariance_near_zero():
    rng = np.random.default_rng(4)
    m = sd.synthesize_surrogate(2, 100_000, [0.2, 0.2], 0.9, 1.0, rng)
    x, y = m.data[0].astype(float), m.data[1].astype(float)
    cov = (x * y).mean() - x.mean() * y.mean()
    sigma = np.sqrt(0.2 * 0.8 * 0.2 * 0.8 / 100_000)
    assert abs(cov) < 3 * sigma


def test_surrogate_bursting_positive_covariances():
    rng = np.random.default_rng(5)
    m = sd.synthesize_surrogate(4, 100_000, [0.1, 0.15, 0.2, 0.25],
                                0.9, 2.5, rng)
    data = m.data.astype(float)
    for i in range(4):
        for j in range(i + 1, 4):
            cov = (data[i] * data[j]).mean() - data[i].mean() * data[j].mean()
            assert cov > 0


def test_surrogate_validation():
    rng = np.random.default_rng(6)
    with pytest.raises(ConfigurationError):
        sd.synthesize_surrogate(2, 10, [0.0, 0.5], 0.9, 1.0, rng)
    with pytest.raises(ConfigurationError):
        sd.synthesize_surrogate(2, 10, [0.5, 0.5], 0.9, 3.0, rng)
    with pytest.raises(ConfigurationError):
        sd.synthesize_surrogate(2, 10, [0.2, 0.2], 1.5, 1.0, rng)


def test_state_index_examples():
    assert sd.state_index(np.zeros((2, 2), dtype=int)) == 0
    assert sd.state_index(np.array([[1], [0]])) == 2
    assert sd.state_index(np.ones((2, 2), dtype=int)) == 15


def test_state_index_guard():
    with pytest.raises(ConfigurationError):
        sd.state_index(np.zeros((3, 7), dtype=int))


@pytest.mark.parametrize("n,t", [(1, 1), (2, 1), (2, 2), (3, 2), (2, 5), (3, 4)])
def test_state_index_bijection(n, t):
    seen = set()
    for value in range(2 ** (n * t)):
        bits = [(value >> i) & 1 for i in range(n * t - 1, -1, -1)]
        window = np.array(bits).reshape(t, n).T
        idx = sd.state_index(window)
        assert idx == value
        seen.add(idx)
    assert len(seen) == 2 ** (n * t)


def test_state_indices_vectorized_matches_scalar():
    rng = np.random.default_rng(7)
    windows = (rng.random((50, 3, 4)) < 0.4).astype(np.uint8)
    vec = sd.state_indices(windows)
    for j in range(50):
        assert vec[j] == sd.state_index(windows[j])


def test_bit_reverse_permutation():
    rev = sd.bit_reverse_permutation(3)
    assert rev[0b001] == 0b100
    assert rev[0b011] == 0b110
    assert rev[0b111] == 0b111


def test_all_windows_counts_and_stride():
    m = sd.SpikeMatrix((np.arange(10)[None, :] % 2))
    spec = sd.WindowSpec((0,), 3)
    sliding = sd.all_windows(m, spec)
    assert sliding.shape == (8, 1, 3)
    strided = sd.all_windows(m, spec, stride=3)
    assert strided.shape == (3, 1, 3)


def test_export_windows_csv(tmp_path):
    windows = np.array([[[1, 0], [0, 1]]], dtype=np.uint8)
    out = tmp_path / "w.csv"
    sd.export_windows_csv(windows, out)
    lines = out.read_text().splitlines()
    assert lines[0] == "window,b0,b1,b2,b3"
    assert lines[1] == "0,1,0,0,1"
