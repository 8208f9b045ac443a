"""EM training of (weighted) mixtures of directional Laplacian densities.

In ``weighted`` mode every point's contribution to component ``i`` is scaled
by ``w = (1 - D_l(x, m_i)) / 2``, which favours points near the component
axis. ``unweighted`` mode (all ``w = 1``) is the plain MDLD baseline.
"""
from dataclasses import asdict, dataclass, field
import json
import logging

import numpy as np

from .directional import (GRAD_CLAMP, K_MAX, DldParams, directional_distance,
                          log_dld_norm_coeff, solve_concentration)

log = logging.getLogger(__name__)

SCHEMA = "wmdld-model/1"
MODES = ("weighted", "unweighted")

_MASS_FLOOR = 1e-10
_RHS_CLAMP = 1e-12
_MAX_HALVINGS = 10


class InsufficientDataError(ValueError):
    """Too few points for the requested number of components."""


@dataclass(frozen=True)
class EmConfig:
    max_iterations: int = 200
    mean_tolerance: float = 1e-4
    k_init: float = 15.0
    step_scale: float = 0.1
    seed: int = 0

    def __post_init__(self):
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")
        if not self.mean_tolerance > 0:
            raise ValueError("mean_tolerance must be > 0")
        if not self.k_init >= 0:
            raise ValueError("k_init must be >= 0")


@dataclass
class WmdldModel:
    """Mixture parameters: priors (R,), means (R, D), concentrations (R,)."""

    priors: np.ndarray
    means: np.ndarray
    concentrations: np.ndarray
    mode: str = "weighted"
    config: EmConfig = field(default_factory=EmConfig)
    training_log: list = field(default_factory=list)

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}")
        self.priors = np.asarray(self.priors, dtype=float)
        self.means = np.atleast_2d(np.asarray(self.means, dtype=float))
        self.concentrations = np.asarray(self.concentrations, dtype=float)
        if np.any(self.priors < 0):
            raise ValueError("priors must be non-negative")

    @property
    def n_components(self):
        return len(self.means)

    @property
    def dimension(self):
        return self.means.shape[1]

    @property
    def components(self):
        return [(float(a), DldParams(m, k, self.dimension))
                for a, m, k in zip(self.priors, self.means, self.concentrations)]

    def copy(self):
        return WmdldModel(self.priors.copy(), self.means.copy(), self.concentrations.copy(),
                          self.mode, self.config, list(self.training_log))

    def to_dict(self):
        return {
            "schema": SCHEMA,
            "dimension": self.dimension,
            "mode": self.mode,
            # densities integrate to one over a hemisphere (axial data)
            "normalization": "hemisphere",
            "components": [
                {"a": float(a), "m": [float(v) for v in m], "k": float(k),
                 "saturated": bool(k >= K_MAX)}
                for a, m, k in zip(self.priors, self.means, self.concentrations)
            ],
            "config": asdict(self.config),
            "training_log": self.training_log,
        }

    @classmethod
    def from_dict(cls, d):
        if d.get("schema") != SCHEMA:
            raise ValueError(f"unsupported model schema {d.get('schema')!r}")
        comps = d["components"]
        return cls([c["a"] for c in comps], [c["m"] for c in comps],
                   [c["k"] for c in comps], d["mode"], EmConfig(**d["config"]),
                   list(d.get("training_log", [])))

    def save(self, path):
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=2)

    @classmethod
    def load(cls, path):
        with open(path) as fh:
            return cls.from_dict(json.load(fh))


def _points(data):
    return np.asarray(getattr(data, "points", data), dtype=float)


def axial_angle(a, b):
    """Angle in radians between two axes, in [0, pi/2]."""
    c = abs(float(np.dot(a, b))) / (np.linalg.norm(a) * np.linalg.norm(b))
    return float(np.arccos(min(c, 1.0)))


def directional_kmeans(data, R, seed, max_rounds=100):
    """Axial k-means under ``D_l``; returns (R, D) unit centers.

    Seeding picks a random first point then repeatedly the point farthest
    from all chosen centers. Centers are updated to the dominant eigenvector
    of their cluster's scatter.
    """
    X = _points(data)
    N = len(X)
    if R < 1 or R > N:
        raise InsufficientDataError(f"cannot place {R} centers on {N} points")
    rng = np.random.default_rng(seed)
    chosen = [int(rng.integers(N))]
    nearest = directional_distance(X, X[chosen[0]])
    for _ in range(1, R):
        nxt = int(np.argmax(nearest))
        chosen.append(nxt)
        nearest = np.minimum(nearest, directional_distance(X, X[nxt]))
    centers = X[chosen].copy()

    labels = None
    for _ in range(max_rounds):
        new = np.argmax(np.abs(X @ centers.T), axis=1)
        if labels is not None and np.array_equal(new, labels):
            break
        labels = new
        for i in range(R):
            members = X[labels == i]
            if len(members) == 0:
                continue
            _, vec = np.linalg.eigh(members.T @ members)
            centers[i] = vec[:, -1]
    return centers / np.linalg.norm(centers, axis=1, keepdims=True)


def log_component_densities(X, model):
    """``log(a_i c_D(k_i)) - k_i D_l(x_n, m_i)`` as an (N, R) array."""
    D = model.dimension
    log_c = np.array([log_dld_norm_coeff(D, k) for k in model.concentrations])
    with np.errstate(divide="ignore"):
        log_a = np.log(model.priors)
    dist = directional_distance(X, model.means.T)
    return log_a + log_c - model.concentrations * dist


def e_step(data, model):
    """Posterior component probabilities, an (N, R) row-stochastic array."""
    X = _points(data)
    if model.n_components == 1:
        return np.ones((len(X), 1))
    logp = log_component_densities(X, model)
    top = np.max(logp, axis=1, keepdims=True)
    top[~np.isfinite(top)] = 0.0
    p = np.exp(logp - top)
    return p / np.maximum(p.sum(axis=1, keepdims=True), 1e-300)


def importance_weights(X, means, mode):
    if mode == "unweighted":
        return np.ones((len(X), len(means)))
    return 0.5 * (1.0 - directional_distance(X, np.atleast_2d(means).T))


def mean_gradient(X, m, k, wp):
    """Gradient of ``sum_n wp_n * log DLD(x_n; m, k)`` with respect to ``m``.

    ``(m.x)^2`` is clamped below one so points on the axis stay finite.
    """
    u = X @ m
    sq = np.minimum(u * u, GRAD_CLAMP)
    coef = k * u / np.sqrt(1.0 - sq) * wp
    return coef @ X


def _distance_objective(X, m, wp):
    return float(wp @ directional_distance(X, m))


def _update_mean(X, m, k, wp, step_scale):
    """One backtracking step along the tangential part of ``mean_gradient``.

    The radial part only rescales ``m`` before renormalization, and near-axis
    points make it dominate, so it is removed.
    """
    g = mean_gradient(X, m, k, wp)
    g = g - (g @ m) * m
    eta = step_scale / max(1.0, float(wp.sum()))
    before = _distance_objective(X, m, wp)
    for _ in range(_MAX_HALVINGS + 1):
        cand = m + eta * g
        norm = np.linalg.norm(cand)
        if norm > 0:
            cand = cand / norm
            if _distance_objective(X, cand, wp) <= before:
                return cand
        eta *= 0.5
    return m


def _reseed_target(X, model):
    """Index of the point the current model explains worst."""
    return int(np.argmin(np.max(log_component_densities(X, model), axis=1)))


def m_step(data, model, resp, cfg: EmConfig):
    """Update priors, means and concentrations from responsibilities ``resp``."""
    X = _points(data)
    N, D = X.shape
    new = model.copy()
    w = importance_weights(X, model.means, model.mode)
    wp = w * resp
    mass = wp.sum(axis=0)
    new.priors = mass / N
    events = []

    for i in range(model.n_components):
        if resp[:, i].sum() < _MASS_FLOOR:
            events.append(i)
            continue
        m = _update_mean(X, model.means[i], model.concentrations[i], wp[:, i], cfg.step_scale)
        rhs = float(wp[:, i] @ directional_distance(X, m)) / mass[i]
        rhs = min(max(rhs, _RHS_CLAMP), 1.0 - _RHS_CLAMP)
        new.means[i] = m
        new.concentrations[i] = solve_concentration(rhs, D)
        if new.concentrations[i] >= K_MAX and new.priors[i] < 1e-6:
            events.append(i)

    for i in events:
        j = _reseed_target(X, new)
        log.info("reseeding component %d at point %d", i, j)
        new.means[i] = X[j]
        new.concentrations[i] = cfg.k_init
        new.priors[i] = float(np.mean(new.priors))
    new.training_log = list(model.training_log)
    if events:
        new.training_log.append({"reseeded": [int(i) for i in events]})
    return new


def mixture_log_density(X, model):
    """Average log of the (unweighted) mixture density over the points."""
    logp = log_component_densities(X, model)
    top = np.max(logp, axis=1)
    return float(np.mean(top + np.log(np.sum(np.exp(logp - top[:, None]), axis=1))))


def initial_model(data, R, cfg: EmConfig, mode="weighted"):
    centers = directional_kmeans(data, R, cfg.seed)
    return WmdldModel(np.full(R, 1.0 / R), centers, np.full(R, float(cfg.k_init)), mode, cfg)


def fit(data, R, cfg: EmConfig = EmConfig(), mode="weighted", init=None):
    """Train an R-component mixture by EM.

    Stops once no mean moves more than ``cfg.mean_tolerance`` radians in an
    iteration, or after ``cfg.max_iterations``. ``init`` may supply (R, D)
    starting means in place of directional k-means.
    """
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}")
    X = _points(data)
    if len(X) == 0:
        raise InsufficientDataError("no data points")
    if len(X) < 10 * R:
        raise InsufficientDataError(f"{len(X)} points are too few for {R} components")

    if init is None:
        model = initial_model(X, R, cfg, mode)
    else:
        init = np.asarray(init, dtype=float)
        model = WmdldModel(np.full(R, 1.0 / R), init / np.linalg.norm(init, axis=1, keepdims=True),
                           np.full(R, float(cfg.k_init)), mode, cfg)

    for it in range(cfg.max_iterations):
        resp = e_step(X, model)
        new = m_step(X, model, resp, cfg)
        moved = max(axial_angle(a, b) for a, b in zip(model.means, new.means))
        new.training_log.append({"iteration": it + 1, "mean_movement": moved,
                                 "avg_log_density": mixture_log_density(X, new)})
        model = new
        if moved < cfg.mean_tolerance:
            break
    return model
