"""Special functions and inverse-transform sampling support.

Everything here is computed in log space so that the fading densities and
detector tail probabilities survive large arguments without overflow.
"""

import math
from dataclasses import dataclass

import numpy as np

from ._accel import jit_kernel

_LOG_EPS = -40.0  # terms this far below the running sum cannot move it
_SERIES_CAP = 200_000
_MARCUM_CAP = 1_000_000


@jit_kernel
def _logaddexp(a, b):
    if a == -math.inf:
        return b
    if b == -math.inf:
        return a
    m = a if a > b else b
    return m + math.log1p(math.exp(-abs(a - b)))


@jit_kernel
def _log_besseli_kernel(order, x):
    # ln I_order(x); power series in log space, large-x asymptotic beyond
    # the point where the series gets long.
    if x == 0.0:
        if order == 0.0:
            return 0.0
        return -math.inf
    if x > 700.0 and x > order * order:
        # I_v(x) ~ e^x / sqrt(2 pi x) * sum_k c_k, c_k alternating in 1/x
        s = 1.0
        c = 1.0
        prev = 1.0
        fourv2 = 4.0 * order * order
        for k in range(1, 60):
            c *= -(fourv2 - (2.0 * k - 1.0) ** 2) / (8.0 * k * x)
            if abs(c) > abs(prev):
                break
            s += c
            prev = c
            if abs(c) < 1e-18 * abs(s):
                break
        return x - 0.5 * math.log(2.0 * math.pi * x) + math.log(s)
    lhalf = math.log(0.5 * x)
    acc = -math.inf
    prev_t = -math.inf
    for k in range(_SERIES_CAP):
        t = (order + 2.0 * k) * lhalf - math.lgamma(k + 1.0) - math.lgamma(order + k + 1.0)
        acc = _logaddexp(acc, t)
        if t < prev_t and t - acc < _LOG_EPS:
            break
        prev_t = t
    return acc


@jit_kernel
def _reg_gamma_upper_kernel(a, x):
    # Q(a, x) = Gamma(a, x) / Gamma(a), abs error ~1e-14
    if x <= 0.0:
        return 1.0
    lead = a * math.log(x) - x - math.lgamma(a)
    if x < a + 1.0:
        # lower-tail series, Q = 1 - P
        ap = a
        term = 1.0 / a
        total = term
        for _ in range(_SERIES_CAP):
            ap += 1.0
            term *= x / ap
            total += term
            if term < total * 1e-17:
                break
        p = math.exp(lead + math.log(total))
        q = 1.0 - p
        if q < 0.0:
            q = 0.0
        return q
    # Lentz continued fraction for the upper tail
    tiny = 1e-300
    b = x + 1.0 - a
    c = 1.0 / tiny
    d = 1.0 / b
    h = d
    for i in range(1, _SERIES_CAP):
        an = -i * (i - a)
        b += 2.0
        d = an * d + b
        if abs(d) < tiny:
            d = tiny
        c = b + an / c
        if abs(c) < tiny:
            c = tiny
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < 3e-16:
            break
    q = math.exp(lead) * h
    if q > 1.0:
        q = 1.0
    if q < 0.0:
        q = 0.0
    return q


@jit_kernel
def _marcum_q_kernel(m, a, b):
    # Poisson mixture of central gamma upper tails; noncentral chi-square
    # with 2m dof and noncentrality a^2, upper tail at b^2.
    if b <= 0.0:
        return 1.0
    x = 0.5 * b * b
    h = 0.5 * a * a
    q = _reg_gamma_upper_kernel(m, x)
    if h == 0.0:
        return q
    lx = math.log(x)
    lh = math.log(h)
    total = 0.0
    for k in range(_MARCUM_CAP):
        lw = -h + k * lh - math.lgamma(k + 1.0)
        w = math.exp(lw)
        total += w * q
        if k >= h and w < 1e-14:
            break
        # advance the gamma tail from shape m+k to m+k+1
        q += math.exp((m + k) * lx - x - math.lgamma(m + k + 1.0))
        if q > 1.0:
            q = 1.0
    if total > 1.0:
        total = 1.0
    if total < 0.0:
        total = 0.0
    return total


def log_besseli(order, x):
    """ln of the modified Bessel function of the first kind, I_order(x)."""
    if order < 0.0 or x < 0.0:
        raise ValueError("log_besseli requires order >= 0 and x >= 0")
    return float(_log_besseli_kernel(float(order), float(x)))


def reg_gamma_upper(shape, x):
    """Regularized upper incomplete gamma Q(shape, x) in [0, 1]."""
    if shape <= 0.0:
        raise ValueError("reg_gamma_upper requires shape > 0")
    if x < 0.0:
        raise ValueError("reg_gamma_upper requires x >= 0")
    return float(_reg_gamma_upper_kernel(float(shape), float(x)))


def marcum_q(m, a, b):
    """Generalized Marcum Q_m(a, b) in [0, 1]."""
    if m < 1.0:
        raise ValueError("marcum_q requires m >= 1")
    if a < 0.0 or b < 0.0:
        raise ValueError("marcum_q requires a >= 0 and b >= 0")
    return float(_marcum_q_kernel(float(m), float(a), float(b)))


@dataclass(frozen=True)
class QuantileTable:
    """Tabulated CDF on a strictly increasing grid; piecewise-linear inverse."""

    grid: np.ndarray
    cdf: np.ndarray

    def __post_init__(self):
        grid = np.asarray(self.grid, dtype=np.float64)
        cdf = np.asarray(self.cdf, dtype=np.float64)
        object.__setattr__(self, "grid", grid)
        object.__setattr__(self, "cdf", cdf)
        if grid.ndim != 1 or grid.size < 2 or grid.shape != cdf.shape:
            raise ValueError("grid and cdf must be 1-d arrays of equal length >= 2")
        if not np.all(np.diff(grid) > 0):
            raise ValueError("grid must be strictly increasing")
        if np.any(np.diff(cdf) < 0):
            raise ValueError("cdf must be nondecreasing")
        if cdf[0] > 1e-6 or cdf[-1] < 1.0 - 1e-6:
            raise ValueError("cdf must start <= 1e-6 and end >= 1 - 1e-6")
        grid.setflags(write=False)
        cdf.setflags(write=False)

    def quantile(self, u):
        """Inverse CDF lookup; u may be a scalar or an array in [0, 1]."""
        u_arr = np.asarray(u, dtype=np.float64)
        if np.any(u_arr < 0.0) or np.any(u_arr > 1.0):
            raise ValueError("quantile argument must lie in [0, 1]")
        idx = np.clip(np.searchsorted(self.cdf, u_arr, side="left"), 1, self.cdf.size - 1)
        c_lo = self.cdf[idx - 1]
        c_hi = self.cdf[idx]
        width = c_hi - c_lo
        frac = np.where(width > 0.0, (u_arr - c_lo) / np.where(width > 0.0, width, 1.0), 0.0)
        frac = np.clip(frac, 0.0, 1.0)
        out = self.grid[idx - 1] + frac * (self.grid[idx] - self.grid[idx - 1])
        return float(out) if np.isscalar(u) or u_arr.ndim == 0 else out

    def cdf_at(self, x):
        """Forward CDF by linear interpolation on the stored table."""
        return np.interp(x, self.grid, self.cdf)


def build_quantile_table(pdf, lo, hi, points=4096):
    """Tabulate the CDF of ``pdf`` on a geometric grid over (lo, hi].

    ``pdf`` must accept an array of abscissae.  The trapezoid-rule mass on
    [lo, hi] has to be within 1e-4 of 1, otherwise the domain is too narrow
    and a ValueError is raised; the CDF is then renormalized to end at 1.
    """
    if points < 256:
        raise ValueError("points must be >= 256")
    if hi <= 0 or hi <= lo:
        raise ValueError("need hi > max(lo, 0)")
    lo_eff = lo if lo > 0 else hi * 1e-12
    grid = np.geomspace(lo_eff, hi, int(points))
    vals = np.asarray(pdf(grid), dtype=np.float64)
    if vals.shape != grid.shape:
        raise ValueError("pdf must map an array of points to an equal-length array")
    if np.any(vals < 0):
        if vals.min() < -1e-12 * max(vals.max(), 1.0):
            raise ValueError("pdf must be nonnegative on the domain")
        vals = np.clip(vals, 0.0, None)
    increments = 0.5 * (vals[1:] + vals[:-1]) * np.diff(grid)
    cdf = np.concatenate(([0.0], np.cumsum(increments)))
    total = cdf[-1]
    if not (1.0 - 1e-4 <= total <= 1.0 + 1e-4):
        raise ValueError(
            f"pdf mass on [{lo_eff:g}, {hi:g}] is {total:.6g}, not within 1e-4 of 1; "
            "widen the domain"
        )
    cdf = cdf / total
    cdf[-1] = 1.0
    return QuantileTable(grid, cdf)
