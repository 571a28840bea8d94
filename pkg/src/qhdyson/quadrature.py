"""Cumulative Simpson quadrature and finite-difference stencils on uniform grids."""

from __future__ import annotations

import numpy as np

from .errors import GridTooShort


def cumulative_simpson_fn(fun, times: np.ndarray, refine: int = 1) -> np.ndarray:
    """Running integral of a callable from ``times[0]`` to every node.

    Each interval ``[t_k, t_{k+1}]`` is split into ``refine`` panels and every
    panel gets Simpson's rule with its own midpoint, so the error varies
    smoothly from node to node (no odd/even alternation).
    """
    times = np.asarray(times, dtype=float)
    edges = np.linspace(0.0, 1.0, refine + 1)
    left = times[:-1, None] + np.diff(times)[:, None] * edges[None, :-1]
    right = times[:-1, None] + np.diff(times)[:, None] * edges[None, 1:]
    mid = 0.5 * (left + right)
    fl, fm, fr = (np.asarray(fun(x)) for x in (left, mid, right))
    panels = ((right - left) / 6.0 * (fl + 4.0 * fm + fr)).sum(axis=1)
    out = np.zeros(times.shape, dtype=panels.dtype)
    out[1:] = np.cumsum(panels)
    return out


def richardson_error(fun, times: np.ndarray) -> float:
    """Estimate of the Simpson error of ``cumulative_simpson_fn`` (max over nodes)."""
    coarse = cumulative_simpson_fn(fun, times, refine=1)
    fine = cumulative_simpson_fn(fun, times, refine=2)
    return float(np.abs(fine - coarse).max() / 15.0)


def cumulative_simpson(y: np.ndarray, dt: float) -> np.ndarray:
    """Running integral of samples ``y`` on a uniform grid.

    Composite Simpson over pairs of intervals. The odd nodes close their last
    interval with the three-point rule ``dt/12 (5 y0 + 8 y1 - y2)``, which
    keeps fourth-order accuracy everywhere.
    """
    y = np.asarray(y)
    n = y.shape[0]
    if n < 3:
        raise GridTooShort("cumulative Simpson needs at least 3 nodes")
    out = np.zeros(y.shape, dtype=np.result_type(y, float))
    pairs = dt / 3.0 * (y[0:-2:2] + 4.0 * y[1:-1:2] + y[2::2])
    out[2::2] = np.cumsum(pairs, axis=0)
    # odd node 2j+1 = even node 2j + one interval
    half = dt / 12.0 * (5.0 * y[0:-2:2] + 8.0 * y[1:-1:2] - y[2::2])
    out[1:-1:2] = out[0:-2:2] + half
    if n % 2 == 0:
        # last node is odd and has no right neighbour: use the backward form
        out[-1] = out[-2] + dt / 12.0 * (5.0 * y[-1] + 8.0 * y[-2] - y[-3])
    return out


# One-sided fourth-order stencils for the first and second node.
_FORWARD = np.array([-25.0, 48.0, -36.0, 16.0, -3.0]) / 12.0
_SECOND = np.array([-3.0, -10.0, 18.0, -6.0, 1.0]) / 12.0


def derivative4(y: np.ndarray, dt: float, edges: bool = True) -> np.ndarray:
    """Fourth-order finite-difference derivative along axis 0.

    With ``edges=False`` the two nodes at either end are left as NaN.
    """
    y = np.asarray(y)
    n = y.shape[0]
    if n < 5:
        raise GridTooShort("fourth-order differences need at least 5 nodes")
    d = np.full(y.shape, np.nan, dtype=np.result_type(y, float))
    d[2:-2] = (y[:-4] - 8.0 * y[1:-3] + 8.0 * y[3:-1] - y[4:]) / (12.0 * dt)
    if edges:
        w = _FORWARD.reshape((5,) + (1,) * (y.ndim - 1))
        w2 = _SECOND.reshape(w.shape)
        d[0] = (w * y[:5]).sum(axis=0) / dt
        d[1] = (w2 * y[:5]).sum(axis=0) / dt
        d[-1] = -(w * y[::-1][:5]).sum(axis=0) / dt
        d[-2] = -(w2 * y[::-1][:5]).sum(axis=0) / dt
    return d
