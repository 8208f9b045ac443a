"""Synthetic mixtures and SDR/SIR/SAR scoring."""
from dataclasses import dataclass, field
import csv
import itertools
import json
import math
import warnings

import numpy as np
from scipy.optimize import linear_sum_assignment

from .audio import AudioBuffer
from .directional import DldParams, sample_dld, uniform_sphere

DB_CAP = 100.0

#: Angle sets (degrees) for the 3x5 and 4x8 multichannel scenarios, one list
#: per angle index; column j of the mixing matrix uses the j-th entry of each.
ANGLES_3X5 = [[0, -87, -60, 0, 45], [85, 0, -60, 0, 45]]
ANGLES_4X8 = [[-75, -30, 0, 50, 10, 80, -45, 0],
              [70, 30, -20, 50, -70, 0, 15, -70],
              [80, 20, 10, -50, 0, -10, -25, -35]]


def hyperspherical_unit(angles_deg):
    """Unit vector in R^(len(angles)+1) from nested sin/cos angles.

    ``(t1,)`` -> ``[cos t1, sin t1]``; ``(t1, t2)`` ->
    ``[cos t1 cos t2, sin t1 cos t2, sin t2]``, and so on.
    """
    v = np.array([1.0])
    for a in np.radians(np.asarray(angles_deg, dtype=float)):
        v = np.append(v * math.cos(a), math.sin(a))
    return v


@dataclass
class MixingSpec:
    angles: np.ndarray  # (L, K-1) degrees
    matrix: np.ndarray  # (K, L)

    @property
    def K(self):
        return self.matrix.shape[0]

    @property
    def L(self):
        return self.matrix.shape[1]

    @classmethod
    def from_angle_rows(cls, rows):
        """Build from K-1 rows of per-source angles."""
        rows = np.atleast_2d(np.asarray(rows, dtype=float))
        return mixing_matrix(rows.T, rows.shape[0] + 1)

    def to_dict(self):
        return {"K": self.K, "L": self.L, "angles_deg": self.angles.tolist(),
                "matrix": self.matrix.tolist()}


def mixing_matrix(angles, K):
    """K x L mixing matrix whose columns are hyperspherical unit vectors.

    ``angles`` holds, per source, ``K - 1`` angles in degrees.
    """
    if K < 2:
        raise ValueError("K must be >= 2")
    rows = [np.atleast_1d(np.asarray(a, dtype=float)) for a in angles]
    if len(rows) < 1:
        raise ValueError("need at least one source")
    for j, a in enumerate(rows):
        if a.size != K - 1:
            raise ValueError(f"source {j} has {a.size} angles, expected {K - 1}")
    A = np.column_stack([hyperspherical_unit(a) for a in rows])
    L = A.shape[1]
    for i, j in itertools.combinations(range(L), 2):
        sep = math.degrees(math.acos(min(1.0, abs(float(A[:, i] @ A[:, j])))))
        if sep < 1e-6:
            raise ValueError(f"columns {i} and {j} coincide (axially)")
        if sep < 3.0:
            warnings.warn(f"columns {i} and {j} are only {sep:.2f} degrees apart")
    return MixingSpec(np.array(rows), A)


def mix(sources, spec: MixingSpec, peak=None):
    """Instantaneous mixture ``x(n) = A s(n)`` of mono source buffers.

    With ``peak`` set, the mixture is rescaled so its largest magnitude
    equals ``peak``; the gain is kept in ``metadata["mix_gain"]``.
    """
    if len(sources) != spec.L:
        raise ValueError(f"{len(sources)} sources for a {spec.K}x{spec.L} mixing matrix")
    lengths = {s.n_samples for s in sources}
    rates = {s.sample_rate for s in sources}
    if len(lengths) != 1:
        raise ValueError("sources have different lengths")
    if len(rates) != 1:
        raise ValueError("sources have different sample rates")
    S = np.vstack([s.samples[0] for s in sources])
    x = spec.matrix @ S
    gain = 1.0
    if peak is not None:
        top = np.max(np.abs(x)) if x.size else 0.0
        if top > 0:
            gain = peak / top
            x = x * gain
    return AudioBuffer(x, rates.pop(), {"mix_gain": gain, "mixing": spec.to_dict()})


@dataclass
class SeparationReport:
    sdr: np.ndarray
    sir: np.ndarray
    sar: np.ndarray
    permutation: list  # permutation[i] = reference matched to estimate i
    meta: dict = field(default_factory=dict)

    @property
    def averages(self):
        return {"sdr": float(np.mean(self.sdr)), "sir": float(np.mean(self.sir)),
                "sar": float(np.mean(self.sar))}

    def to_dict(self):
        est_for_ref = {r: e for e, r in enumerate(self.permutation)}
        return {
            "per_source": [
                {"reference": j, "estimate": est_for_ref[j], "sdr": float(self.sdr[j]),
                 "sir": float(self.sir[j]), "sar": float(self.sar[j])}
                for j in range(len(self.sdr))
            ],
            "permutation": [int(p) for p in self.permutation],
            "averages": self.averages,
            **self.meta,
        }

    def write_json(self, path):
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=2)

    def write_csv(self, path, label=""):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["experiment", "source", "sdr", "sir", "sar"])
            for j in range(len(self.sdr)):
                w.writerow([label, j + 1, f"{self.sdr[j]:.4f}", f"{self.sir[j]:.4f}",
                            f"{self.sar[j]:.4f}"])
            avg = self.averages
            w.writerow([label, "average", f"{avg['sdr']:.4f}", f"{avg['sir']:.4f}",
                        f"{avg['sar']:.4f}"])


def _db(num, den):
    if num <= 0.0:
        return -DB_CAP
    if den <= 0.0 or num >= den * 10 ** (DB_CAP / 10):
        return DB_CAP
    if num <= den * 10 ** (-DB_CAP / 10):
        return -DB_CAP
    return 10.0 * math.log10(num / den)


def _as_matrix(bufs):
    if isinstance(bufs, AudioBuffer):
        return bufs.samples
    arr = [b.samples[0] if isinstance(b, AudioBuffer) else np.asarray(b, dtype=float)
           for b in bufs]
    if len({len(a) for a in arr}) > 1:
        raise ValueError("signals have different lengths")
    return np.vstack(arr)


def decompose(estimate, references, j):
    """Split ``estimate`` into target, interference and artifact parts."""
    S = references
    s = S[j]
    target = (estimate @ s) / (s @ s) * s
    coef = np.linalg.solve(S @ S.T, S @ estimate)
    in_span = coef @ S
    return target, in_span - target, estimate - in_span


def _criteria(estimate, references, j):
    target, interf, artif = decompose(estimate, references, j)
    e2 = float(target @ target)
    return (_db(e2, float((interf + artif) @ (interf + artif))),
            _db(e2, float(interf @ interf)),
            _db(float((target + interf) @ (target + interf)), float(artif @ artif)))


def bss_metrics(estimates, references):
    """Time-invariant SDR/SIR/SAR with the estimate/reference matching that
    maximizes total SIR (exhaustive up to 8 sources). Values lie in [-100, 100] dB.
    """
    E = _as_matrix(estimates)
    S = _as_matrix(references)
    if E.shape != S.shape:
        raise ValueError(f"estimates {E.shape} and references {S.shape} differ in shape")
    L = S.shape[0]
    if np.any(np.sum(S * S, axis=1) == 0):
        raise ValueError("a reference signal is all zeros")
    gram = S @ S.T
    if np.linalg.cond(gram) > 1e12:
        raise ValueError("references are (nearly) linearly dependent")

    crit = np.array([[_criteria(E[i], S, j) for j in range(L)] for i in range(L)])
    sir = crit[:, :, 1]
    if L <= 8:
        perms = np.array(list(itertools.permutations(range(L))))
        totals = sir[np.arange(L), perms].sum(axis=1)
        best = perms[int(np.argmax(totals))]
    else:
        rows, cols = linear_sum_assignment(-sir)
        best = cols[np.argsort(rows)]
    ref_to_est = np.empty(L, dtype=int)
    ref_to_est[best] = np.arange(L)
    picked = crit[ref_to_est, np.arange(L)]
    return SeparationReport(picked[:, 0], picked[:, 1], picked[:, 2], [int(b) for b in best])


def directional_fixture(angles_deg, k, n_per_cluster, seed, outlier_fraction=0.0):
    """2-D axial data: one DLD cluster per angle plus uniform outliers.

    Returns ``(points, true_means)``; the outlier count is
    ``outlier_fraction`` times the clustered point count.
    """
    seqs = np.random.SeedSequence(seed).spawn(len(angles_deg) + 1)
    means = np.array([hyperspherical_unit([a]) for a in angles_deg])
    parts = [sample_dld(DldParams(m, k, 2), n_per_cluster, s) for m, s in zip(means, seqs)]
    n_out = int(round(outlier_fraction * n_per_cluster * len(angles_deg)))
    if n_out:
        parts.append(uniform_sphere(n_out, 2, np.random.default_rng(seqs[-1])))
    return np.vstack(parts), means


def burst_sources(L, duration, sample_rate, seed, activity=0.3,
                  burst_ms=(60.0, 300.0), bandwidth_hz=(300.0, 1200.0)):
    """``L`` mono buffers of band-limited noise bursts.

    Each burst has a random onset, length, and frequency band, with a Hann
    envelope. Sources are active about ``activity`` of the time and rarely
    share both time and band, so their time-frequency supports mostly differ.
    """
    rng = np.random.default_rng(seed)
    n = int(round(duration * sample_rate))
    nyq = 0.5 * sample_rate
    out = []
    for _ in range(L):
        s = np.zeros(n)
        active = 0
        while active < activity * n:
            length = int(rng.uniform(*burst_ms) * sample_rate / 1000.0)
            length = max(16, min(length, n))
            start = int(rng.integers(0, n - length + 1))
            bw = rng.uniform(*bandwidth_hz)
            lo = rng.uniform(50.0, nyq - bw - 50.0)
            spec = np.fft.rfft(rng.standard_normal(length))
            freqs = np.fft.rfftfreq(length, 1.0 / sample_rate)
            spec[(freqs < lo) | (freqs > lo + bw)] = 0.0
            burst = np.fft.irfft(spec, n=length) * np.hanning(length)
            peak = np.max(np.abs(burst))
            if peak > 0:
                s[start:start + length] += 0.5 * burst / peak
            active += length
        out.append(AudioBuffer(s, sample_rate))
    return out
