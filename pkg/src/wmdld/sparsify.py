"""Selection of single-source time-frequency points.

A QxQ neighbourhood around each (t, f) is summarized by the real scatter of
its real and imaginary parts. When one source dominates, the scatter is close
to rank one and the ratio of its top eigenvalue to the mean of the others (the
confidence) is large. Points in confident neighbourhoods are turned into unit
vectors for mixture training.
"""
from dataclasses import dataclass
import csv
import logging
import math

import numpy as np

from ._backend import kernels
from ._pykernels import EPS_REL, MIN_NORM, window_offsets

log = logging.getLogger(__name__)

#: The adaptive fallback never lowers the threshold below this.
THRESHOLD_FLOOR = 1.5
FALLBACK_FACTOR = 0.8

REAL, IMAG = 0, 1


class EmptySelectionError(RuntimeError):
    """No time-frequency point survived selection."""


@dataclass(frozen=True)
class NeighborhoodStats:
    center: tuple
    eigenvalues: np.ndarray
    principal_direction: np.ndarray
    confidence: float


@dataclass(frozen=True)
class SparsifierConfig:
    q: int = 2
    confidence_threshold: float = 300.0
    min_points: int = 0

    def __post_init__(self):
        if self.q < 1:
            raise ValueError("q must be >= 1")
        if not self.confidence_threshold > 1:
            raise ValueError("confidence_threshold must be > 1")
        if self.min_points < 0:
            raise ValueError("min_points must be >= 0")

    def check_channels(self, K):
        if 2 * self.q * self.q < K:
            raise ValueError(f"q={self.q} is too small for {K} channels")


@dataclass
class SparseDirectionalSet:
    """Unit vectors (N, D) with their (t, f, part) origins (N, 3)."""

    points: np.ndarray
    origins: np.ndarray
    threshold: float = math.nan

    def __post_init__(self):
        points = np.asarray(self.points, dtype=float)
        self.points = points if points.ndim == 2 else points.reshape(len(points), -1)
        self.origins = np.asarray(self.origins, dtype=np.int64).reshape(-1, 3)
        if len(self.points) != len(self.origins):
            raise ValueError("points and origins must have equal length")

    @property
    def count(self):
        return len(self.points)

    @property
    def dimension(self):
        return self.points.shape[1]

    @classmethod
    def from_points(cls, points):
        """Wrap bare unit vectors (no spectrogram provenance)."""
        points = np.asarray(points, dtype=float)
        origins = np.full((len(points), 3), -1, dtype=np.int64)
        return cls(points, origins)


def _parts(spec):
    values = spec.values
    return (np.ascontiguousarray(values.real, dtype=float),
            np.ascontiguousarray(values.imag, dtype=float))


def neighborhood_stats(spec, t, f, q):
    """Local PCA of the augmented real/imaginary scatter around ``(t, f)``."""
    K, T, F = spec.values.shape
    offs = window_offsets(q)
    ts = [t + o for o in offs if 0 <= t + o < T]
    fs = [f + o for o in offs if 0 <= f + o < F]
    block = spec.values[:, ts][:, :, fs].reshape(K, -1)
    aug = np.concatenate([block.real, block.imag], axis=1)
    lam, vec = np.linalg.eigh(aug @ aug.T)
    lam = np.clip(lam[::-1], 0.0, None)
    u = vec[:, -1]
    top = lam[0]
    if top <= 0:
        conf = 0.0
    else:
        conf = top / max(lam[1:].mean() if K > 1 else 0.0, EPS_REL * top)
    return NeighborhoodStats((t, f), lam, u / np.linalg.norm(u), float(conf))


def confidence_map(spec, q):
    """Confidence of every (t, f) neighbourhood, shape (T, F)."""
    re, im = _parts(spec)
    return kernels.neighborhood_confidence(re, im, int(q))


def _directional_points(spec, mask):
    """Unit real/imag vectors for the (t, f) positions in ``mask``, sorted by (t, f, part)."""
    t_idx, f_idx = np.nonzero(mask)
    vecs = spec.values[:, t_idx, f_idx].T
    both = np.stack([vecs.real, vecs.imag], axis=1)
    norms = np.linalg.norm(both, axis=2)
    keep = norms >= MIN_NORM
    n_idx, part = np.nonzero(keep)
    points = both[n_idx, part] / norms[n_idx, part, None]
    origins = np.column_stack([t_idx[n_idx], f_idx[n_idx], part])
    return points, origins


def select_points(spec, cfg: SparsifierConfig, conf=None):
    """Keep points whose neighbourhood confidence exceeds the threshold.

    Each surviving (t, f) yields its normalized real part and its normalized
    imaginary part as two samples. If fewer than ``cfg.min_points`` samples
    survive, the threshold is multiplied by 0.8 until enough do or it reaches
    1.5; the threshold actually used is stored on the result.
    """
    K = spec.channels
    if K < 2:
        raise ValueError("point selection needs at least two channels")
    cfg.check_channels(K)
    if conf is None:
        conf = confidence_map(spec, cfg.q)

    d = cfg.confidence_threshold
    points, origins = _directional_points(spec, conf > d)
    while len(points) < cfg.min_points and math.isfinite(d) and d > THRESHOLD_FLOOR:
        d = max(THRESHOLD_FLOOR, d * FALLBACK_FACTOR)
        points, origins = _directional_points(spec, conf > d)
    if d != cfg.confidence_threshold:
        log.info("confidence threshold lowered to %.4g (%d points)", d, len(points))
    if len(points) == 0:
        raise EmptySelectionError(f"no time-frequency point has confidence above {d:g}")
    return SparseDirectionalSet(points, origins, d)


def norm_threshold_points(spec, threshold):
    """Keep real/imag vectors whose norm is at least ``threshold``."""
    if threshold < 0:
        raise ValueError("threshold must be >= 0")
    vecs = spec.values.reshape(spec.channels, -1).T
    both = np.stack([vecs.real, vecs.imag], axis=1)
    norms = np.linalg.norm(both, axis=2)
    keep = (norms >= threshold) & (norms > 0)
    n_idx, part = np.nonzero(keep)
    t_idx, f_idx = np.unravel_index(n_idx, (spec.frames, spec.bins))
    points = both[n_idx, part] / norms[n_idx, part, None]
    return SparseDirectionalSet(points, np.column_stack([t_idx, f_idx, part]), threshold)


def norm_threshold_for_count(spec, count):
    """Norm threshold that keeps (about) ``count`` of the real/imag vectors."""
    vecs = spec.values.reshape(spec.channels, -1).T
    norms = np.sort(np.concatenate([np.linalg.norm(vecs.real, axis=1),
                                    np.linalg.norm(vecs.imag, axis=1)]))[::-1]
    if count <= 0:
        return float(norms[0]) * 2 + 1.0
    return float(norms[min(count, len(norms)) - 1])


def axial_angles(points):
    """Angle of 2-D axial data folded into [-90, 90) degrees."""
    theta = np.degrees(np.arctan2(points[:, 1], points[:, 0]))
    return (theta + 90.0) % 180.0 - 90.0


def angle_histogram(data: SparseDirectionalSet, bins=180):
    """Histogram of folded angles: ``(centers_deg, counts)`` with uniform bins."""
    if data.dimension != 2:
        raise ValueError(f"angle histogram needs 2-D data, got D={data.dimension}")
    edges = np.linspace(-90.0, 90.0, bins + 1)
    if data.count == 0:
        counts = np.zeros(bins, dtype=np.int64)
    else:
        idx = np.floor((axial_angles(data.points) + 90.0) / 180.0 * bins).astype(int)
        counts = np.bincount(np.clip(idx, 0, bins - 1), minlength=bins)
    return 0.5 * (edges[:-1] + edges[1:]), counts


def peak_to_valley_ratio(counts, n_peaks):
    """Mean height of the ``n_peaks`` tallest circular local maxima over the
    mean of the minima separating them (the histogram is periodic)."""
    counts = np.asarray(counts, dtype=float)
    n = len(counts)
    left, right = np.roll(counts, 1), np.roll(counts, -1)
    cand = np.nonzero((counts >= left) & (counts > right))[0]
    if len(cand) < n_peaks:
        return 0.0
    peaks = np.sort(cand[np.argsort(counts[cand], kind="stable")[::-1][:n_peaks]])
    valleys = []
    for a, b in zip(peaks, np.roll(peaks, -1)):
        span = np.arange(a, b if b > a else b + n) % n
        valleys.append(counts[span].min())
    return float(counts[peaks].mean() / max(np.mean(valleys), 1.0))


def write_histogram_csv(path, centers, counts):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["angle_deg", "count"])
        for c, n in zip(centers, counts):
            w.writerow([f"{c:.6g}", int(n)])


def write_scatter_csv(path, data: SparseDirectionalSet):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow([f"x{i + 1}" for i in range(data.dimension)])
        w.writerows(data.points.tolist())
