"""WAV decoding and waveform preparation.

Decodes RIFF/WAVE containers with integer PCM payloads (8/16/24/32 bit),
normalizes to float amplitudes in [-1, 1], mixes down to mono, resamples,
and trims or segments clips into fixed-duration analysis windows.
"""

from __future__ import annotations

import struct
import wave
from dataclasses import dataclass
from pathlib import Path

import numpy as np

SUPPORTED_BIT_DEPTHS = (8, 16, 24, 32)


class WavError(ValueError):
    """Base class for WAV decoding failures."""


class MalformedHeaderError(WavError):
    """Container structure is broken or truncated."""


class UnsupportedEncodingError(WavError):
    """Payload is not integer PCM of a supported bit depth."""


class EmptyDataError(WavError):
    """The data chunk holds no samples."""


@dataclass
class RawAudio:
    """Integer PCM samples as decoded, one row per channel."""

    channels: np.ndarray  # (n_channels, n_samples) signed integers
    bit_depth: int
    sample_rate_hz: int

    @property
    def n_channels(self) -> int:
        return self.channels.shape[0]

    @property
    def n_samples(self) -> int:
        return self.channels.shape[1]


@dataclass
class AudioClip:
    """Mono waveform with amplitudes in [-1, 1]."""

    samples: np.ndarray  # (n_samples,) float64
    sample_rate_hz: int

    def __post_init__(self) -> None:
        if self.sample_rate_hz <= 0:
            raise ValueError(f"sample rate must be positive, got {self.sample_rate_hz}")

    @property
    def duration_seconds(self) -> float:
        return len(self.samples) / self.sample_rate_hz


@dataclass
class Segment:
    """One analysis window cut from a longer clip."""

    clip: AudioClip
    start_sample: int
    index: int

    @property
    def start_seconds(self) -> float:
        return self.start_sample / self.clip.sample_rate_hz

    @property
    def end_seconds(self) -> float:
        return (self.start_sample + len(self.clip.samples)) / self.clip.sample_rate_hz


def _read_u16(data: bytes, offset: int) -> int:
    return struct.unpack_from("<H", data, offset)[0]


def _read_u32(data: bytes, offset: int) -> int:
    return struct.unpack_from("<I", data, offset)[0]


def decode_wav(data: bytes) -> RawAudio:
    """Decode a RIFF/WAVE byte string holding integer PCM audio.

    Raises MalformedHeaderError for broken or truncated containers,
    UnsupportedEncodingError for non-PCM payloads (including float PCM)
    or unsupported bit depths, and EmptyDataError for a zero-length
    data chunk.
    """
    if len(data) < 12:
        raise MalformedHeaderError("file too short to hold a RIFF header")
    if data[0:4] != b"RIFF":
        raise MalformedHeaderError("missing RIFF magic")
    if data[8:12] != b"WAVE":
        raise MalformedHeaderError("missing WAVE form type")

    fmt_chunk: bytes | None = None
    data_chunk: bytes | None = None
    offset = 12
    while offset + 8 <= len(data):
        chunk_id = data[offset : offset + 4]
        chunk_size = _read_u32(data, offset + 4)
        body_start = offset + 8
        body_end = body_start + chunk_size
        if body_end > len(data):
            raise MalformedHeaderError(
                f"chunk {chunk_id!r} declares {chunk_size} bytes but file ends early"
            )
        if chunk_id == b"fmt " and fmt_chunk is None:
            fmt_chunk = data[body_start:body_end]
        elif chunk_id == b"data" and data_chunk is None:
            if chunk_size == 0:
                raise EmptyDataError("data chunk is empty")
            data_chunk = data[body_start:body_end]
        # chunks are word aligned; odd sizes carry a pad byte
        offset = body_end + (chunk_size & 1)

    if fmt_chunk is None:
        raise MalformedHeaderError("no fmt chunk found")
    if data_chunk is None:
        raise MalformedHeaderError("no data chunk found")
    if len(fmt_chunk) < 16:
        raise MalformedHeaderError("fmt chunk too short")

    audio_format = _read_u16(fmt_chunk, 0)
    n_channels = _read_u16(fmt_chunk, 2)
    sample_rate = _read_u32(fmt_chunk, 4)
    bit_depth = _read_u16(fmt_chunk, 14)

    if audio_format == 3:
        raise UnsupportedEncodingError("float PCM is not supported, integer PCM only")
    if audio_format != 1:
        raise UnsupportedEncodingError(f"non-PCM encoding (format tag {audio_format})")
    if bit_depth not in SUPPORTED_BIT_DEPTHS:
        raise UnsupportedEncodingError(f"unsupported bit depth {bit_depth}")
    if n_channels < 1:
        raise MalformedHeaderError("fmt chunk declares zero channels")
    if sample_rate <= 0:
        raise MalformedHeaderError("fmt chunk declares zero sample rate")

    bytes_per_sample = bit_depth // 8
    frame_size = bytes_per_sample * n_channels
    if len(data_chunk) % frame_size != 0:
        raise MalformedHeaderError(
            f"data chunk size {len(data_chunk)} is not a multiple of the "
            f"{frame_size}-byte frame size"
        )

    if bit_depth == 8:
        # 8-bit WAV is unsigned with a 128 offset
        flat = np.frombuffer(data_chunk, dtype=np.uint8).astype(np.int32) - 128
    elif bit_depth == 16:
        flat = np.frombuffer(data_chunk, dtype="<i2").astype(np.int32)
    elif bit_depth == 24:
        raw = np.frombuffer(data_chunk, dtype=np.uint8).reshape(-1, 3).astype(np.int32)
        flat = raw[:, 0] | (raw[:, 1] << 8) | (raw[:, 2] << 16)
        flat = np.where(flat >= 1 << 23, flat - (1 << 24), flat)
    else:
        flat = np.frombuffer(data_chunk, dtype="<i4").astype(np.int64)

    channels = np.ascontiguousarray(flat.reshape(-1, n_channels).T)
    return RawAudio(channels=channels, bit_depth=bit_depth, sample_rate_hz=sample_rate)


def normalize(raw: RawAudio) -> np.ndarray:
    """Scale integer samples to floats by the signed full-scale divisor.

    A value v at bit depth b maps to v / 2^(b-1), e.g. 21707 at 16 bit
    becomes 21707/32768 = 0.66244507.
    """
    if raw.bit_depth not in SUPPORTED_BIT_DEPTHS:
        raise UnsupportedEncodingError(f"unsupported bit depth {raw.bit_depth}")
    divisor = float(2 ** (raw.bit_depth - 1))
    return raw.channels / divisor


def to_mono(channels) -> np.ndarray:
    """Average across channels; a single channel passes through unchanged."""
    arrays = [np.asarray(c, dtype=np.float64) for c in channels]
    if not arrays:
        raise ValueError("no channels to mix")
    lengths = {a.shape[0] for a in arrays}
    if len(lengths) != 1:
        raise ValueError(f"channel lengths differ: {sorted(lengths)}")
    if len(arrays) == 1:
        return arrays[0]
    return np.mean(np.stack(arrays), axis=0)


def resample(clip: AudioClip, target_rate_hz: int) -> AudioClip:
    """Linear-interpolation resampling to target_rate_hz.

    Output length is round(n * target/source). The same rate returns the
    input clip untouched.
    """
    if target_rate_hz <= 0:
        raise ValueError(f"target rate must be positive, got {target_rate_hz}")
    if target_rate_hz == clip.sample_rate_hz:
        return clip
    n_in = len(clip.samples)
    if n_in == 0:
        return AudioClip(np.zeros(0), target_rate_hz)
    n_out = int(round(n_in * target_rate_hz / clip.sample_rate_hz))
    positions = np.arange(n_out) * (clip.sample_rate_hz / target_rate_hz)
    out = np.interp(positions, np.arange(n_in), clip.samples)
    return AudioClip(out, target_rate_hz)


def trim(clip: AudioClip, max_seconds: float = 15.0) -> AudioClip:
    """Keep the first max_seconds of the clip; shorter clips pass through."""
    if max_seconds <= 0:
        raise ValueError(f"max_seconds must be positive, got {max_seconds}")
    keep = int(round(max_seconds * clip.sample_rate_hz))
    if len(clip.samples) <= keep:
        return clip
    return AudioClip(clip.samples[:keep].copy(), clip.sample_rate_hz)


def segment(
    clip: AudioClip,
    window_seconds: float = 15.0,
    min_tail_seconds: float = 3.0,
) -> list[Segment]:
    """Cut consecutive non-overlapping windows of window_seconds.

    A trailing partial window is kept only when it lasts at least
    min_tail_seconds, otherwise it is dropped.
    """
    if window_seconds <= 0:
        raise ValueError(f"window_seconds must be positive, got {window_seconds}")
    rate = clip.sample_rate_hz
    window_len = int(round(window_seconds * rate))
    if window_len == 0:
        raise ValueError("window shorter than one sample")
    n = len(clip.samples)
    segments: list[Segment] = []
    n_full = n // window_len
    for i in range(n_full):
        start = i * window_len
        piece = AudioClip(clip.samples[start : start + window_len].copy(), rate)
        segments.append(Segment(clip=piece, start_sample=start, index=i))
    tail_len = n - n_full * window_len
    if tail_len > 0 and tail_len >= min_tail_seconds * rate:
        start = n_full * window_len
        piece = AudioClip(clip.samples[start:].copy(), rate)
        segments.append(Segment(clip=piece, start_sample=start, index=n_full))
    return segments


def load_clip(data: bytes, target_rate_hz: int | None = None) -> AudioClip:
    """Decode, normalize, and mix down WAV bytes; optionally resample."""
    raw = decode_wav(data)
    mono = to_mono(normalize(raw))
    clip = AudioClip(mono, raw.sample_rate_hz)
    if target_rate_hz is not None:
        clip = resample(clip, target_rate_hz)
    return clip


def encode_wav_pcm16(samples: np.ndarray, sample_rate_hz: int) -> bytes:
    """Serialize float samples in [-1, 1] as a 16-bit PCM mono WAV."""
    clipped = np.clip(np.asarray(samples, dtype=np.float64), -1.0, 1.0)
    ints = np.round(clipped * 32767.0).astype("<i2")
    import io

    buf = io.BytesIO()
    with wave.open(buf, "wb") as wf:
        wf.setnchannels(1)
        wf.setsampwidth(2)
        wf.setframerate(int(sample_rate_hz))
        wf.writeframes(ints.tobytes())
    return buf.getvalue()


def write_wav_pcm16(path, samples: np.ndarray, sample_rate_hz: int) -> None:
    Path(path).write_bytes(encode_wav_pcm16(samples, sample_rate_hz))
