"""Mel-scale mapping, triangular filterbank, DCT, and MFCC aggregation.

The feature chain per frame: Hann window -> FFT -> power spectrum ->
mel filterbank energies -> log compression -> orthonormal DCT-II ->
leading coefficients. A clip's feature vector is the per-coefficient
mean over its frames.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from birdsong import dsp
from birdsong.audio_io import AudioClip

LOG_EPSILON = 1e-10
MEL_CONSTANT = 2595.0
MEL_BREAK_HZ = 700.0


@dataclass(frozen=True)
class FeatureConfig:
    """Parameters of the MFCC front end."""

    n_mfcc: int = 80
    n_mels: int = 128
    frame_ms: float = 40.0
    hop_ms: float = 20.0
    f_min_hz: float = 0.0
    f_max_hz: float | None = None  # None means Nyquist at featurization time
    mel_constant: float = MEL_CONSTANT

    def __post_init__(self) -> None:
        if not 0 < self.n_mfcc <= self.n_mels:
            raise ValueError(
                f"need 0 < n_mfcc <= n_mels, got {self.n_mfcc} and {self.n_mels}"
            )
        if self.f_min_hz < 0:
            raise ValueError("f_min_hz must be non-negative")
        if self.f_max_hz is not None and self.f_max_hz <= self.f_min_hz:
            raise ValueError("f_max_hz must exceed f_min_hz")


@dataclass
class MelFilterbank:
    """Triangular filters over FFT bins; weights is (n_mels, n_bins)."""

    weights: np.ndarray
    center_freqs_hz: np.ndarray


def hz_to_mel(f, mel_constant: float = MEL_CONSTANT):
    """Map frequency in Hz onto the mel scale: c * log10(1 + f/700)."""
    f = np.asarray(f, dtype=np.float64)
    if np.any(f < 0):
        raise ValueError("frequency must be non-negative")
    out = mel_constant * np.log10(1.0 + f / MEL_BREAK_HZ)
    return float(out) if out.ndim == 0 else out


def mel_to_hz(m, mel_constant: float = MEL_CONSTANT):
    """Exact inverse of hz_to_mel: 700 (10^(m/c) - 1)."""
    m = np.asarray(m, dtype=np.float64)
    if np.any(m < 0):
        raise ValueError("mel value must be non-negative")
    out = MEL_BREAK_HZ * (10.0 ** (m / mel_constant) - 1.0)
    return float(out) if out.ndim == 0 else out


@lru_cache(maxsize=8)
def build_filterbank(config: FeatureConfig, fft_size: int, sample_rate_hz: int) -> MelFilterbank:
    """Triangular filters with vertices equally spaced on the mel axis.

    n_mels + 2 mel points between f_min and f_max are mapped back to Hz;
    filter m rises from point m to point m+1 and falls to point m+2,
    evaluated at FFT bin center frequencies.
    """
    if config.n_mels < 2:
        raise ValueError("need at least 2 mel filters")
    if not dsp.is_power_of_two(fft_size):
        raise ValueError(f"fft_size must be a power of two, got {fft_size}")
    nyquist = sample_rate_hz / 2.0
    f_max = nyquist if config.f_max_hz is None else config.f_max_hz
    if f_max > nyquist:
        raise ValueError(f"f_max {f_max} Hz exceeds Nyquist {nyquist} Hz")

    mel_points = np.linspace(
        hz_to_mel(config.f_min_hz, config.mel_constant),
        hz_to_mel(f_max, config.mel_constant),
        config.n_mels + 2,
    )
    hz_points = mel_to_hz(mel_points, config.mel_constant)

    n_bins = fft_size // 2 + 1
    bin_freqs = np.arange(n_bins) * (sample_rate_hz / fft_size)
    left = hz_points[:-2, np.newaxis]
    center = hz_points[1:-1, np.newaxis]
    right = hz_points[2:, np.newaxis]
    rising = (bin_freqs - left) / (center - left)
    falling = (right - bin_freqs) / (right - center)
    weights = np.maximum(0.0, np.minimum(rising, falling))

    if np.any(weights.sum(axis=1) == 0):
        raise ValueError(
            "some mel filters cover no FFT bin; lower n_mels or raise fft_size"
        )
    return MelFilterbank(weights=weights, center_freqs_hz=hz_points[1:-1].copy())


@lru_cache(maxsize=8)
def _dct_basis(n: int) -> np.ndarray:
    """Orthonormal DCT-II basis: row k is s(k) cos(pi k (2j+1) / 2n)."""
    j = np.arange(n)
    k = np.arange(n)[:, np.newaxis]
    basis = np.cos(np.pi * k * (2 * j + 1) / (2 * n))
    basis[0] *= np.sqrt(1.0 / n)
    basis[1:] *= np.sqrt(2.0 / n)
    basis.setflags(write=False)
    return basis


def dct_ii(v, n_out: int) -> np.ndarray:
    """First n_out coefficients of the orthonormal DCT-II of v."""
    x = np.asarray(v, dtype=np.float64)
    if len(x) == 0:
        raise ValueError("cannot transform an empty sequence")
    if not 1 <= n_out <= len(x):
        raise ValueError(f"n_out must be in [1, {len(x)}], got {n_out}")
    return _dct_basis(len(x))[:n_out] @ x


def mfcc_frames(clip: AudioClip, config: FeatureConfig | None = None) -> np.ndarray:
    """Per-frame MFCC matrix of shape (n_frames, n_mfcc)."""
    if config is None:
        config = FeatureConfig()
    if len(clip.samples) == 0:
        raise ValueError("cannot featurize an empty clip")
    frames = dsp.frame_signal(clip, config.frame_ms, config.hop_ms)
    frame_len = frames.shape[1]
    windowed = frames * dsp.periodic_hann(frame_len)
    n_fft = dsp.next_power_of_two(frame_len)
    spectra = dsp.fft_frames(windowed, n_fft)
    half = spectra[:, : n_fft // 2 + 1]
    power = half.real * half.real + half.imag * half.imag
    bank = build_filterbank(config, n_fft, clip.sample_rate_hz)
    energies = power @ bank.weights.T
    log_energies = np.log(energies + LOG_EPSILON)
    return log_energies @ _dct_basis(config.n_mels)[: config.n_mfcc].T


def aggregate_features(frames: np.ndarray) -> np.ndarray:
    """Per-coefficient mean over frames: the clip-level feature vector."""
    m = np.asarray(frames, dtype=np.float64)
    if m.ndim != 2 or m.shape[0] == 0:
        raise ValueError("need a non-empty (n_frames, n_mfcc) matrix")
    return m.mean(axis=0)


def clip_features(clip: AudioClip, config: FeatureConfig | None = None) -> np.ndarray:
    """Aggregate MFCC feature vector for one clip."""
    return aggregate_features(mfcc_frames(clip, config))
