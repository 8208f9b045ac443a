"""Multichannel audio buffers, WAV I/O and an invertible STFT."""
from dataclasses import dataclass, field
import math
import warnings

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy.io import wavfile

#: Frame lengths (ms, sample rate) used for speech and music material.
FRAME_PRESETS = {
    "speech16k": (32.0, 16000),
    "music16k": (128.0, 16000),
    "music44k": (46.4, 44100),
}


class WavFormatError(ValueError):
    """The file is not a readable RIFF/WAVE file."""


class UnsupportedEncodingError(ValueError):
    """The WAV encoding is not 16-bit PCM or 32-bit float."""


@dataclass
class AudioBuffer:
    """``samples`` has shape (channels, n_samples)."""

    samples: np.ndarray
    sample_rate: int
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        s = np.asarray(self.samples, dtype=float)
        if s.ndim == 1:
            s = s[None, :]
        if s.ndim != 2 or s.shape[0] < 1:
            raise ValueError("samples must be (channels, n_samples)")
        if not self.sample_rate > 0:
            raise ValueError("sample_rate must be positive")
        self.samples = s
        self.sample_rate = int(self.sample_rate)

    @property
    def channels(self):
        return self.samples.shape[0]

    @property
    def n_samples(self):
        return self.samples.shape[1]


def read_wav(path):
    """Read a 16-bit PCM or 32-bit float WAV into an :class:`AudioBuffer`.

    16-bit values are scaled by 1/32768, so 0x7FFF maps to 32767/32768.
    """
    try:
        with warnings.catch_warnings():
            # a short data chunk is only a warning in scipy
            warnings.simplefilter("error", wavfile.WavFileWarning)
            rate, data = wavfile.read(path)
    except (FileNotFoundError, IsADirectoryError, PermissionError):
        raise
    except Exception as exc:
        raise WavFormatError(f"malformed WAV file {path}: {exc}") from exc

    if data.dtype == np.int16:
        x = data.astype(np.float64) / 32768.0
    elif data.dtype == np.float32:
        x = data.astype(np.float64)
    else:
        raise UnsupportedEncodingError(f"unsupported WAV sample type {data.dtype}")
    if x.ndim == 1:
        x = x[:, None]
    x = x.T
    return AudioBuffer(np.ascontiguousarray(x), rate)


def write_wav(buf, path, encoding="pcm16"):
    """Write ``buf`` as interleaved little-endian WAV.

    ``encoding`` is ``"pcm16"`` (values clipped to [-1, 1)) or ``"float32"``.
    """
    x = buf.samples.T
    if encoding == "pcm16":
        data = np.clip(np.round(x * 32768.0), -32768, 32767).astype("<i2")
    elif encoding == "float32":
        data = x.astype("<f4")
    else:
        raise UnsupportedEncodingError(f"unknown encoding {encoding!r}")
    if data.shape[1] == 1:
        data = data[:, 0]
    wavfile.write(path, buf.sample_rate, data)


@dataclass(frozen=True)
class StftConfig:
    """Frame/hop/window settings; construction checks constant overlap-add."""

    frame_length: int
    hop: int
    window: str = "hann"
    fft_size: int = 0

    def __post_init__(self):
        if self.frame_length < 2:
            raise ValueError("frame_length must be >= 2")
        if not 1 <= self.hop <= self.frame_length:
            raise ValueError("hop must be in [1, frame_length]")
        if self.fft_size == 0:
            object.__setattr__(self, "fft_size", 1 << (self.frame_length - 1).bit_length())
        if self.fft_size < self.frame_length:
            raise ValueError("fft_size must be >= frame_length")
        w = self.window_array()
        ola = np.zeros(self.hop)
        for start in range(0, self.frame_length, self.hop):
            seg = w[start:start + self.hop]
            ola[:len(seg)] += seg
        if np.ptp(ola) > 1e-10 * np.max(ola):
            raise ValueError(
                f"window {self.window!r} with hop {self.hop} is not constant-overlap-add")

    @classmethod
    def from_ms(cls, frame_ms, sample_rate, overlap=0.5, window="hann"):
        n = int(round(frame_ms * sample_rate / 1000.0))
        n += n % 2
        return cls(n, int(round(n * (1.0 - overlap))), window)

    @property
    def bins(self):
        return self.fft_size // 2 + 1

    def window_array(self):
        n = self.frame_length
        if self.window == "hann":
            # periodic Hann is COLA at 50% overlap
            return 0.5 - 0.5 * np.cos(2.0 * math.pi * np.arange(n) / n)
        if self.window in ("rect", "boxcar"):
            return np.ones(n)
        raise ValueError(f"unknown window {self.window!r}")


@dataclass
class Spectrogram:
    """Complex STFT values of shape (channels, frames, bins)."""

    values: np.ndarray
    config: StftConfig
    sample_rate: int
    n_samples: int

    @property
    def channels(self):
        return self.values.shape[0]

    @property
    def frames(self):
        return self.values.shape[1]

    @property
    def bins(self):
        return self.values.shape[2]

    def with_values(self, values):
        return Spectrogram(values, self.config, self.sample_rate, self.n_samples)


def _n_frames(n_samples, cfg):
    lead = cfg.frame_length - cfg.hop
    return max(1, -(-(n_samples + lead) // cfg.hop))


def stft(buf, cfg):
    """Per-channel STFT.

    The signal is front-padded with ``frame_length - hop`` zeros so that every
    original sample is covered by a full set of overlapping frames, and
    tail-padded to complete the last frame.
    """
    lead = cfg.frame_length - cfg.hop
    T = _n_frames(buf.n_samples, cfg)
    total = (T - 1) * cfg.hop + cfg.frame_length
    x = np.zeros((buf.channels, total))
    x[:, lead:lead + buf.n_samples] = buf.samples
    frames = sliding_window_view(x, cfg.frame_length, axis=1)[:, ::cfg.hop][:, :T]
    values = np.fft.rfft(frames * cfg.window_array(), n=cfg.fft_size, axis=-1)
    return Spectrogram(values, cfg, buf.sample_rate, buf.n_samples)


def istft(spec):
    """Weighted overlap-add inverse of :func:`stft`, trimmed to the original length."""
    cfg = spec.config
    w = cfg.window_array()
    K, T, _ = spec.values.shape
    frames = np.fft.irfft(spec.values, n=cfg.fft_size, axis=-1)[..., :cfg.frame_length]
    total = (T - 1) * cfg.hop + cfg.frame_length
    y = np.zeros((K, total))
    norm = np.zeros(total)
    for t in range(T):
        sl = slice(t * cfg.hop, t * cfg.hop + cfg.frame_length)
        y[:, sl] += frames[:, t] * w
        norm[sl] += w * w
    lead = cfg.frame_length - cfg.hop
    span = slice(lead, lead + spec.n_samples)
    denom = norm[span]
    out = np.divide(y[:, span], denom, out=np.zeros((K, spec.n_samples)), where=denom > 1e-12)
    return AudioBuffer(out, spec.sample_rate)
