"""Pure NumPy versions of the per-time-frequency-point kernels.

These are the reference implementations; ``_kernels.pyx`` mirrors them
loop-for-loop and is preferred when it has been compiled.
"""
import numpy as np

# relative floor on the confidence denominator
EPS_REL = 1e-12
# parts with a smaller norm carry no direction
MIN_NORM = 1e-9
TIE_TOL = 1e-12


def window_offsets(q):
    """Offsets spanned by a Q-wide window: ``[-(ceil(Q/2)-1), floor(Q/2)]``."""
    return range(-((q + 1) // 2 - 1), q // 2 + 1)


def neighborhood_scatter(re, im, q):
    """Sum of ``x x^T`` over real and imaginary parts in each QxQ window.

    ``re``/``im`` have shape (K, T, F); the result has shape (T, F, K, K).
    Windows are truncated at the spectrogram borders.
    """
    K, T, F = re.shape
    before = (q + 1) // 2 - 1
    after = q // 2
    pad = ((0, 0), (before, after), (before, after))
    rp = np.pad(re, pad)
    ip = np.pad(im, pad)
    outer = np.einsum("ktf,jtf->tfkj", rp, rp) + np.einsum("ktf,jtf->tfkj", ip, ip)
    scatter = np.zeros((T, F, K, K))
    for a in range(q):
        for b in range(q):
            scatter += outer[a:a + T, b:b + F]
    return scatter


def confidence_from_eigenvalues(lam):
    """Largest eigenvalue over the mean of the rest; ``lam`` sorted ascending on the last axis."""
    lam = np.clip(lam, 0.0, None)
    top = lam[..., -1]
    rest = lam[..., :-1].mean(axis=-1)
    denom = np.maximum(rest, EPS_REL * top)
    out = np.zeros_like(top)
    np.divide(top, denom, out=out, where=top > 0)
    return out


def neighborhood_confidence(re, im, q):
    """Confidence map of shape (T, F)."""
    scatter = neighborhood_scatter(re, im, q)
    return confidence_from_eigenvalues(np.linalg.eigvalsh(scatter))


def assign_labels(re, im, means):
    """Winner-takes-all labels over all (t, f).

    The score of component ``i`` is ``D_l(re/|re|, m_i) + D_l(im/|im|, m_i)``,
    dropping a part whose norm is below ``MIN_NORM``. Points with no energy go
    to component 0. Returns ``(labels, tie_count)``.
    """
    K, T, F = re.shape
    r = re.reshape(K, -1).T
    i = im.reshape(K, -1).T
    nr = np.linalg.norm(r, axis=1)
    ni = np.linalg.norm(i, axis=1)
    score = np.zeros((len(r), len(means)))
    for part, n in ((r, nr), (i, ni)):
        ok = n >= MIN_NORM
        c = (part[ok] / n[ok, None]) @ means.T
        score[ok] += np.sqrt(np.clip(1.0 - c * c, 0.0, 1.0))
    labels = np.argmin(score, axis=1)
    best = score[np.arange(len(score)), labels]
    live = np.hypot(nr, ni) >= MIN_NORM
    labels[~live] = 0
    ties = (np.sum(score <= best[:, None] + TIE_TOL, axis=1) > 1) & live
    return labels.reshape(T, F), int(ties.sum())
