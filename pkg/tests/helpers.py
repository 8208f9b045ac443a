"""Small builders shared by several test modules."""
import numpy as np

from wmdld.audio import Spectrogram, StftConfig, stft
from wmdld.evaluation import MixingSpec, burst_sources, mix

ANGLES_2X4 = [-60.0, -20.0, 20.0, 70.0]


def make_spec(values, frame=8, hop=4):
    values = np.asarray(values, dtype=complex)
    return Spectrogram(values, StftConfig(frame, hop), 16000, 0)


def burst_mixture(angles=ANGLES_2X4, seed=0, duration=10.0, sample_rate=16000):
    rows = np.atleast_2d(angles)
    L = rows.shape[1]
    sources = burst_sources(L, duration, sample_rate, seed)
    return sources, mix(sources, MixingSpec.from_angle_rows(rows))


def burst_spectrogram(angles=ANGLES_2X4, seed=0, duration=10.0):
    _, mixture = burst_mixture(angles, seed, duration)
    return stft(mixture, StftConfig.from_ms(32, mixture.sample_rate))
