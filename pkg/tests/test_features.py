import numpy as np
import pytest

from gmwvoc import features
from gmwvoc.features import FeatureFileError, decode, encode


def _small(rng, F=7, K=3, n=2, M=4, residual=True):
    f32 = lambda *shape: rng.normal(size=shape).astype(np.float32)
    return features.FeatureFile(
        sample_rate=16000, hop_samples=80, win_samples=400, fft_size=1024,
        scale0=np.float32(0.02), gains=f32(F), weights=f32(F, K), means=f32(F, K),
        sigmas=f32(F, K), transmat=f32(n, n), state_means=f32(n, 1 + K), state_vars=f32(n, 1 + K),
        state_path=rng.integers(0, n, F).astype(np.uint32),
        hmm_residuals=f32(F, 1 + K) if residual else None, scales=f32(M),
        cwt_coefficients=f32(M, F), cwt_residual=f32(F), mean_level=np.float32(4.5), energy=f32(F))


def _assert_same(a, b):
    for name in a.__dataclass_fields__:
        x, y = getattr(a, name), getattr(b, name)
        if x is None or y is None:
            assert x is None and y is None
        else:
            assert np.array_equal(np.asarray(x), np.asarray(y)), name
            assert np.asarray(x).tobytes() == np.asarray(y).tobytes(), name


class TestCodec:
    @pytest.mark.parametrize("residual", [True, False])
    def test_round_trip_is_bit_exact(self, rng, residual):
        ff = _small(rng, residual=residual)
        out = decode(encode(ff))
        _assert_same(ff, out)
        assert encode(out) == encode(ff)

    def test_header_layout(self, rng):
        data = encode(_small(rng))
        assert data[:4] == b"GMWF"
        assert int.from_bytes(data[4:6], "little") == 1
        assert int.from_bytes(data[6:10], "little") == 16000
        assert np.frombuffer(data[34:38], "<f4")[0] == np.float32(0.02)
        assert int.from_bytes(data[38:42], "little") == 7  # n_frames
        assert int.from_bytes(data[42:46], "little") == 1  # flags

    def test_size_matches_counts(self, rng):
        F, K, n, M = 7, 3, 2, 4
        expected = 46 + 4 * (F * (1 + 3 * K) + n * n + 2 * n * (1 + K) + F + F * (1 + K)
                             + M + M * F + F + 1 + F)
        assert len(encode(_small(rng, F, K, n, M))) == expected

    def test_bad_magic(self, rng):
        data = bytearray(encode(_small(rng)))
        data[0:4] = b"RIFF"
        with pytest.raises(FeatureFileError, match="header.*offset 0"):
            decode(bytes(data))

    def test_bad_version(self, rng):
        data = bytearray(encode(_small(rng)))
        data[4] = 2
        with pytest.raises(FeatureFileError, match="version"):
            decode(bytes(data))

    def test_truncated_names_block(self, rng):
        data = encode(_small(rng))
        with pytest.raises(FeatureFileError, match="'cwt'.*offset"):
            decode(data[:-4 * 7 - 10])
        with pytest.raises(FeatureFileError, match="'gmm'"):
            decode(data[:60])
        with pytest.raises(FeatureFileError, match="'header'"):
            decode(data[:20])

    def test_trailing_bytes(self, rng):
        with pytest.raises(FeatureFileError, match="trailing"):
            decode(encode(_small(rng)) + b"\x00")

    def test_state_out_of_range(self, rng):
        ff = _small(rng)
        ff.state_path[0] = 5
        with pytest.raises(FeatureFileError, match="'hmm'"):
            decode(encode(ff))

    def test_save_load(self, rng, tmp_path):
        ff = _small(rng)
        features.save(ff, tmp_path / "f.gmwf")
        _assert_same(ff, features.load(tmp_path / "f.gmwf"))
        assert [p.name for p in tmp_path.iterdir()] == ["f.gmwf"]

    def test_interrupted_write_keeps_old_file(self, rng, tmp_path, monkeypatch):
        target = tmp_path / "f.gmwf"
        target.write_bytes(b"old")

        def boom(src, dst):
            raise OSError("disk full")

        monkeypatch.setattr(features.os, "replace", boom)
        with pytest.raises(OSError):
            features.save(_small(rng), target)
        assert target.read_bytes() == b"old"
        assert [p.name for p in tmp_path.iterdir()] == ["f.gmwf"]

    def test_observations(self, rng):
        ff = _small(rng)
        obs = ff.observations()
        assert obs.shape == (7, 4)
        assert np.array_equal(obs[:, 0], ff.gains.astype(float))
