"""Brenier map, entropic map and the slack functions between support points.

``eps`` is the regularization strength for the squared-distance cost
``|x - y|^2 + eps KL``. In the inner-product form used by the dual potentials
this is a softmax temperature of ``eps / 2``; with this convention the
entropic map of the two-point example on [-1, 1] is ``tanh(2x / eps)``.
"""

from __future__ import annotations

import numpy as np

from .geometry import LaguerreDiagram, PotentialVector, _values
from .measures import DiscreteMeasure, as_points


class DomainError(ValueError):
    pass


def temperature(eps: float) -> float:
    return 0.5 * eps


def delta(target: DiscreteMeasure, z, i: int, j: int, x) -> np.ndarray:
    """Slack ``<y_i - y_j, x> - z_i + z_j`` at each point of ``x``."""
    if i == j:
        raise ValueError("delta needs distinct indices")
    zv = _values(z)
    x = as_points(x, target.dim)
    return x @ (target.points[i] - target.points[j]) - zv[i] + zv[j]


def brenier_eval(diag: LaguerreDiagram, x) -> np.ndarray:
    """Support point of the cell containing each ``x``; boundary ties go to the lowest index."""
    x = as_points(x, diag.source.dim)
    outside = ~diag.source.contains(x)
    if outside.any():
        raise DomainError(f"point {x[np.argmax(outside)].tolist()} lies outside the domain")
    return diag.target.points[diag.locate(x)]


def softmax_weights(x, target: DiscreteMeasure, z, eps: float) -> np.ndarray:
    """Entropic assignment probabilities, shape (m, N), stabilised per point."""
    x = as_points(x, target.dim)
    logits = (x @ target.points.T - _values(z)) / temperature(eps)
    logits -= logits.max(axis=1, keepdims=True)
    w = np.exp(logits)
    w /= w.sum(axis=1, keepdims=True)
    return w


def _eps_of(z, eps):
    eps = eps if eps is not None else getattr(z, "eps", None)
    if eps is None or not eps > 0:
        raise ValueError("entropic evaluation needs eps > 0")
    return eps


def entropic_eval(target: DiscreteMeasure, z, x, eps: float | None = None) -> np.ndarray:
    """Entropic map ``sum_i y_i w_i(x)`` at each point, shape (m, d)."""
    eps = _eps_of(z, eps)
    return softmax_weights(x, target, z, eps) @ target.points


def entropic_offset(target: DiscreteMeasure, z, eps: float, x, anchor: np.ndarray) -> np.ndarray:
    """``T_eps(x) - anchor`` computed as ``sum_j (y_j - anchor) w_j(x)``.

    Where ``anchor`` is the dominant support point this avoids the
    cancellation in ``T_eps(x) - anchor`` deep inside a cell.
    """
    w = softmax_weights(x, target, z, eps)
    return np.einsum("mj,mjd->md", w, target.points[None, :, :] - anchor[:, None, :])


__all__ = ["DomainError", "PotentialVector", "brenier_eval", "delta", "entropic_eval",
           "entropic_offset", "softmax_weights", "temperature"]
