"""Framing, windowing, fast Fourier transform, and spectrogram rendering."""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from birdsong import _kernels
from birdsong.audio_io import AudioClip

DB_EPSILON = 1e-10


@dataclass
class PowerSpectrogram:
    """Per-frame power spectra: frames is (n_frames, n_bins) with non-negative values."""

    frames: np.ndarray
    frame_len_samples: int
    hop_samples: int
    sample_rate_hz: int

    @property
    def n_bins(self) -> int:
        return self.frames.shape[1]


def is_power_of_two(n: int) -> bool:
    return n > 0 and (n & (n - 1)) == 0


def next_power_of_two(n: int) -> int:
    return 1 if n <= 1 else 1 << (n - 1).bit_length()


def fft(signal, n: int) -> np.ndarray:
    """n-point transform of a real or complex signal, zero-padded to n.

    n must be a power of two; the radix-2 butterfly kernel runs in
    O(n log n). Returns all n complex bins.
    """
    if not is_power_of_two(n):
        raise ValueError(f"transform size must be a power of two, got {n}")
    x = np.asarray(signal)
    if x.ndim != 1:
        raise ValueError("signal must be one-dimensional")
    if len(x) > n:
        raise ValueError(f"signal length {len(x)} exceeds transform size {n}")
    padded = np.zeros(n, dtype=np.complex128)
    padded[: len(x)] = x
    return _kernels.fft_batch(padded[np.newaxis, :])[0]


def fft_frames(frames: np.ndarray, n: int) -> np.ndarray:
    """Transform each row of a real frame matrix, zero-padded to width n."""
    if not is_power_of_two(n):
        raise ValueError(f"transform size must be a power of two, got {n}")
    if frames.shape[1] > n:
        raise ValueError(f"frame length {frames.shape[1]} exceeds transform size {n}")
    padded = np.zeros((frames.shape[0], n), dtype=np.complex128)
    padded[:, : frames.shape[1]] = frames
    return _kernels.fft_batch(padded)


def frame_geometry(sample_rate_hz: int, frame_ms: float, hop_ms: float) -> tuple[int, int]:
    """Frame and hop lengths in samples for the given timing parameters."""
    if frame_ms <= 0:
        raise ValueError(f"frame_ms must be positive, got {frame_ms}")
    if hop_ms <= 0 or hop_ms > frame_ms:
        raise ValueError(f"hop_ms must satisfy 0 < hop_ms <= frame_ms, got {hop_ms}")
    frame_len = int(round(frame_ms * sample_rate_hz / 1000.0))
    hop = int(round(hop_ms * sample_rate_hz / 1000.0))
    if frame_len < 1 or hop < 1:
        raise ValueError("frame or hop shorter than one sample at this rate")
    return frame_len, hop


def frame_signal(clip: AudioClip, frame_ms: float = 40.0, hop_ms: float = 20.0) -> np.ndarray:
    """Slice a clip into overlapping frames of frame_ms every hop_ms.

    Yields floor((len - frame_len)/hop) + 1 frames; a signal shorter than
    one frame produces a single zero-padded frame.
    """
    samples = clip.samples
    if len(samples) == 0:
        raise ValueError("cannot frame an empty signal")
    frame_len, hop = frame_geometry(clip.sample_rate_hz, frame_ms, hop_ms)
    if len(samples) < frame_len:
        frame = np.zeros(frame_len)
        frame[: len(samples)] = samples
        return frame[np.newaxis, :]
    windows = np.lib.stride_tricks.sliding_window_view(samples, frame_len)
    return np.ascontiguousarray(windows[::hop])


@lru_cache(maxsize=16)
def periodic_hann(n: int) -> np.ndarray:
    """Periodic Hann coefficients w[k] = 0.5 (1 - cos(2 pi k / n)) (read-only)."""
    if n < 1:
        raise ValueError("window length must be at least 1")
    w = 0.5 * (1.0 - np.cos(2.0 * np.pi * np.arange(n) / n))
    w.setflags(write=False)
    return w


def hann_window(frame) -> np.ndarray:
    """Apply a periodic Hann window to one frame."""
    x = np.asarray(frame, dtype=np.float64)
    if len(x) == 0:
        raise ValueError("cannot window an empty frame")
    return x * periodic_hann(len(x))


def power_spectrum(spectrum: np.ndarray) -> np.ndarray:
    """Squared magnitudes of the non-negative-frequency bins (length n/2 + 1)."""
    n = len(spectrum)
    half = spectrum[: n // 2 + 1]
    return (half.real * half.real + half.imag * half.imag).astype(np.float64)


def power_spectrogram(
    clip: AudioClip, frame_ms: float = 40.0, hop_ms: float = 20.0
) -> PowerSpectrogram:
    """Frame, window, and transform a clip into per-frame power spectra."""
    frames = frame_signal(clip, frame_ms, hop_ms)
    frame_len = frames.shape[1]
    windowed = frames * periodic_hann(frame_len)
    n_fft = next_power_of_two(frame_len)
    spectra = fft_frames(windowed, n_fft)
    half = spectra[:, : n_fft // 2 + 1]
    power = (half.real * half.real + half.imag * half.imag).astype(np.float64)
    _, hop = frame_geometry(clip.sample_rate_hz, frame_ms, hop_ms)
    return PowerSpectrogram(
        frames=power,
        frame_len_samples=frame_len,
        hop_samples=hop,
        sample_rate_hz=clip.sample_rate_hz,
    )


def render_spectrogram(spec: PowerSpectrogram, out_path, colormap: str = "magma") -> None:
    """Write the spectrogram as a PNG, one column per frame, low bins at the bottom.

    Intensity is dB power 10 log10(p + eps) mapped linearly onto the
    colormap between the matrix minimum and maximum; the colormap name is
    recorded in the PNG text metadata.
    """
    if spec.frames.size == 0:
        raise ValueError("cannot render an empty spectrogram")
    from matplotlib import colormaps
    from PIL import Image
    from PIL.PngImagePlugin import PngInfo

    db = 10.0 * np.log10(spec.frames + DB_EPSILON)
    span = db.max() - db.min()
    norm = np.zeros_like(db) if span == 0 else (db - db.min()) / span
    # rows become bins with low frequency at the bottom of the image
    image_values = norm.T[::-1, :]
    lut = colormaps[colormap]
    rgb = (lut(image_values)[..., :3] * 255.0 + 0.5).astype(np.uint8)
    info = PngInfo()
    info.add_text("colormap", colormap)
    Image.fromarray(rgb, mode="RGB").save(out_path, format="PNG", pnginfo=info)
