"""Winner-takes-all separation of a full mixture spectrogram."""
from dataclasses import dataclass, field
import json

import numpy as np

from ._backend import kernels
from .audio import AudioBuffer, istft, stft
from .em import EmConfig, fit
from .sparsify import SparsifierConfig, select_points


@dataclass
class AssignmentMap:
    """Component index (0-based) for every (t, f) of the spectrogram."""

    labels: np.ndarray
    tie_count: int
    n_sources: int

    def counts(self):
        return np.bincount(self.labels.ravel(), minlength=self.n_sources)

    def summary(self):
        return {"points_per_source": [int(c) for c in self.counts()],
                "tie_count": int(self.tie_count)}


@dataclass
class SeparatedSources:
    buffers: list
    model: object
    assignment: AssignmentMap = None
    info: dict = field(default_factory=dict)

    def summary(self):
        out = dict(self.info)
        if self.assignment is not None:
            out.update(self.assignment.summary())
        return out

    def write_summary(self, path):
        with open(path, "w") as fh:
            json.dump(self.summary(), fh, indent=2)


def assign_points(spec, model):
    """Give every (t, f) to the component closest to both of its real and
    imaginary directions (sum of the two directional distances)."""
    if model.dimension != spec.channels:
        raise ValueError(f"model dimension {model.dimension} != {spec.channels} channels")
    re = np.ascontiguousarray(spec.values.real, dtype=float)
    im = np.ascontiguousarray(spec.values.imag, dtype=float)
    labels, ties = kernels.assign_labels(re, im, np.ascontiguousarray(model.means))
    return AssignmentMap(labels, ties, model.n_components)


def projected_spectrograms(spec, assignment, model):
    """(L, T, F) masked projections ``m_i^T X(t, f)``."""
    proj = np.einsum("lk,ktf->ltf", model.means, spec.values)
    mask = assignment.labels[None] == np.arange(model.n_components)[:, None, None]
    return proj * mask


def reconstruct(spec, assignment, model):
    U = projected_spectrograms(spec, assignment, model)
    out = istft(spec.with_values(U))
    buffers = [AudioBuffer(ch, spec.sample_rate) for ch in out.samples]
    return SeparatedSources(buffers, model, assignment)


def separate(mixture, L, stft_cfg, sparse_cfg=SparsifierConfig(), em_cfg=EmConfig(),
             mode="weighted"):
    """stft -> point selection -> EM fit -> assignment -> reconstruction.

    Returns ``(SeparatedSources, WmdldModel)``. A ``sparse_cfg`` with
    ``min_points=0`` gets a floor of 100 points per source.
    """
    if mixture.channels < 2:
        raise ValueError("separation needs at least two mixture channels")
    if sparse_cfg.min_points == 0:
        sparse_cfg = SparsifierConfig(sparse_cfg.q, sparse_cfg.confidence_threshold, 100 * L)
    spec = stft(mixture, stft_cfg)
    data = select_points(spec, sparse_cfg)
    model = fit(data, L, em_cfg, mode)
    assignment = assign_points(spec, model)
    result = reconstruct(spec, assignment, model)
    result.info = {"selected_points": int(data.count),
                   "effective_threshold": float(data.threshold)}
    return result, model
