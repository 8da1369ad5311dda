"""Soft-margin kernel SVM trained by sequential minimal optimization.

The dual  max  sum(alpha) - 1/2 sum_ij y_i y_j alpha_i alpha_j k(x_i, x_j)
subject to sum(alpha*y) = 0 and 0 <= alpha <= theta  is solved by repeated
two-variable updates with second-order working-pair selection, Gram matrix
cached in full up to ``cache_limit`` rows and recomputed row-by-row above.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from ._accel import jit_kernel
from .sensing import Dataset

_NEG = -1e300
_QUAD_FLOOR = 1e-12


class TrainingError(RuntimeError):
    """Solver failure; carries best-so-far diagnostics in ``.diagnostics``."""

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


@dataclass(frozen=True)
class KernelSpec:
    """Kernel choice: linear, polynomial (degree d) or rbf (width sigma)."""

    kind: str
    degree: int | None = None
    sigma: float | None = None

    def __post_init__(self):
        if self.kind == "linear":
            if self.degree is not None or self.sigma is not None:
                raise ValueError("linear kernel takes no parameters")
        elif self.kind == "polynomial":
            if self.degree is None or self.degree < 2:
                raise ValueError("polynomial kernel requires degree >= 2")
        elif self.kind == "rbf":
            if self.sigma is None or self.sigma <= 0:
                raise ValueError("rbf kernel requires sigma > 0")
        else:
            raise ValueError(f"unknown kernel kind: {self.kind!r}")

    @staticmethod
    def linear():
        return KernelSpec("linear")

    @staticmethod
    def polynomial(degree):
        return KernelSpec("polynomial", degree=int(degree))

    @staticmethod
    def rbf(sigma):
        return KernelSpec("rbf", sigma=float(sigma))

    def label(self):
        if self.kind == "polynomial":
            return f"polynomial(d={self.degree})"
        if self.kind == "rbf":
            return f"rbf(sigma={self.sigma:g})"
        return "linear"


def kernel_matrix(spec, a, b=None):
    """Gram matrix k(a_i, b_j); ``b`` defaults to ``a``."""
    a = np.atleast_2d(np.asarray(a, dtype=np.float64))
    b = a if b is None else np.atleast_2d(np.asarray(b, dtype=np.float64))
    if a.shape[1] != b.shape[1]:
        raise ValueError("kernel operands must share the feature dimension")
    if spec.kind == "linear":
        return a @ b.T
    if spec.kind == "polynomial":
        return (a @ b.T + 1.0) ** spec.degree
    sq = np.sum(a * a, axis=1)[:, None] + np.sum(b * b, axis=1)[None, :] - 2.0 * (a @ b.T)
    np.clip(sq, 0.0, None, out=sq)
    return np.exp(-sq / (2.0 * spec.sigma**2))


def kernel_eval(spec, x, y):
    """Kernel value for a single pair of feature vectors."""
    x = np.asarray(x, dtype=np.float64).ravel()
    y = np.asarray(y, dtype=np.float64).ravel()
    if x.shape != y.shape:
        raise ValueError("kernel operands must share the feature dimension")
    return float(kernel_matrix(spec, x[None, :], y[None, :])[0, 0])


@jit_kernel
def _smo_cached(K, y, theta, tol, max_iter, max_refresh):
    # Returns (alpha, beta, gap, iters, status); status 0 = converged,
    # 1 = iteration cap, 2 = refresh cap, 3 = stalled step.
    n = y.shape[0]
    alpha = np.zeros(n)
    f = np.zeros(n)  # sum_j y_j alpha_j K_ij, bias-free score cache
    diag = np.empty(n)
    for i in range(n):
        diag[i] = K[i, i]
    snap = 1e-12 * (1.0 + theta)
    iters = 0
    refreshes = 0
    status = 0
    gap = math.inf
    m_up = 0.0
    m_low = 0.0
    while True:
        g = y - f
        up = ((y > 0.0) & (alpha < theta)) | ((y < 0.0) & (alpha > 0.0))
        low = ((y > 0.0) & (alpha > 0.0)) | ((y < 0.0) & (alpha < theta))
        g_up = np.where(up, g, _NEG)
        g_low = np.where(low, g, -_NEG)
        i_idx = int(np.argmax(g_up))
        m_up = g_up[i_idx]
        m_low = np.min(g_low)
        gap = m_up - m_low
        if gap <= tol:
            # recompute the score cache to rule out accumulated drift
            f = np.dot(K, y * alpha)
            g = y - f
            g_up = np.where(up, g, _NEG)
            g_low = np.where(low, g, -_NEG)
            i_idx = int(np.argmax(g_up))
            m_up = g_up[i_idx]
            m_low = np.min(g_low)
            gap = m_up - m_low
            if gap <= tol:
                break
            refreshes += 1
            if refreshes >= max_refresh:
                status = 2
                break
        if iters >= max_iter:
            status = 1
            break
        ki = K[i_idx]
        quad = diag[i_idx] + diag - 2.0 * ki
        quad = np.where(quad > _QUAD_FLOOR, quad, _QUAD_FLOOR)
        b_vec = m_up - g
        gain = np.where(low & (b_vec > 0.0), b_vec * b_vec / quad, _NEG)
        j_idx = int(np.argmax(gain))
        if gain[j_idx] <= 0.5 * _NEG:
            status = 3
            break
        delta = b_vec[j_idx] / quad[j_idx]
        yi = y[i_idx]
        yj = y[j_idx]
        head_i = theta - alpha[i_idx] if yi > 0.0 else alpha[i_idx]
        head_j = alpha[j_idx] if yj > 0.0 else theta - alpha[j_idx]
        if delta > head_i:
            delta = head_i
        if delta > head_j:
            delta = head_j
        if delta <= 0.0:
            status = 3
            break
        alpha[i_idx] += yi * delta
        alpha[j_idx] -= yj * delta
        for t in (i_idx, j_idx):
            if alpha[t] < snap:
                alpha[t] = 0.0
            elif alpha[t] > theta - snap:
                alpha[t] = theta
        kj = K[j_idx]
        f = f + delta * (ki - kj)
        iters += 1
    g = y - f
    unb = (alpha > 0.0) & (alpha < theta)
    n_unb = int(np.sum(unb))
    if n_unb > 0:
        beta = float(np.sum(np.where(unb, g, 0.0))) / n_unb
    else:
        beta = 0.5 * (m_up + m_low)
    return alpha, beta, gap, iters, status


def _smo_uncached(spec, x, y, theta, tol, max_iter, max_refresh):
    # Same logic as _smo_cached but kernel rows are recomputed on demand,
    # for training sets too large to hold the Gram matrix.
    n = y.shape[0]
    alpha = np.zeros(n)
    f = np.zeros(n)
    if spec.kind == "linear":
        diag = np.sum(x * x, axis=1)
    elif spec.kind == "polynomial":
        diag = (np.sum(x * x, axis=1) + 1.0) ** spec.degree
    else:
        diag = np.ones(n)
    snap = 1e-12 * (1.0 + theta)

    def row(i):
        return kernel_matrix(spec, x[i][None, :], x)[0]

    iters = refreshes = 0
    status = 0
    gap = math.inf
    m_up = m_low = 0.0
    while True:
        g = y - f
        up = ((y > 0.0) & (alpha < theta)) | ((y < 0.0) & (alpha > 0.0))
        low = ((y > 0.0) & (alpha > 0.0)) | ((y < 0.0) & (alpha < theta))
        g_up = np.where(up, g, _NEG)
        g_low = np.where(low, g, -_NEG)
        i_idx = int(np.argmax(g_up))
        m_up = g_up[i_idx]
        m_low = float(np.min(g_low))
        gap = m_up - m_low
        if gap <= tol:
            mask = alpha > 0.0
            f = kernel_matrix(spec, x, x[mask]) @ (y[mask] * alpha[mask]) if mask.any() else np.zeros(n)
            g = y - f
            g_up = np.where(up, g, _NEG)
            g_low = np.where(low, g, -_NEG)
            i_idx = int(np.argmax(g_up))
            m_up = g_up[i_idx]
            m_low = float(np.min(g_low))
            gap = m_up - m_low
            if gap <= tol:
                break
            refreshes += 1
            if refreshes >= max_refresh:
                status = 2
                break
        if iters >= max_iter:
            status = 1
            break
        ki = row(i_idx)
        quad = np.maximum(diag[i_idx] + diag - 2.0 * ki, _QUAD_FLOOR)
        b_vec = m_up - g
        gain = np.where(low & (b_vec > 0.0), b_vec * b_vec / quad, _NEG)
        j_idx = int(np.argmax(gain))
        if gain[j_idx] <= 0.5 * _NEG:
            status = 3
            break
        delta = b_vec[j_idx] / quad[j_idx]
        yi, yj = y[i_idx], y[j_idx]
        head_i = theta - alpha[i_idx] if yi > 0.0 else alpha[i_idx]
        head_j = alpha[j_idx] if yj > 0.0 else theta - alpha[j_idx]
        delta = min(delta, head_i, head_j)
        if delta <= 0.0:
            status = 3
            break
        alpha[i_idx] += yi * delta
        alpha[j_idx] -= yj * delta
        for t in (i_idx, j_idx):
            if alpha[t] < snap:
                alpha[t] = 0.0
            elif alpha[t] > theta - snap:
                alpha[t] = theta
        f += delta * (ki - row(j_idx))
        iters += 1
    g = y - f
    unb = (alpha > 0.0) & (alpha < theta)
    if unb.any():
        beta = float(np.mean(g[unb]))
    else:
        beta = 0.5 * (m_up + m_low)
    return alpha, beta, gap, iters, status


@dataclass
class SvmModel:
    """Trained classifier: retained support vectors (in standardized feature
    space), their dual coefficients and labels, the bias, and the
    standardization statistics applied to queries."""

    kernel: KernelSpec
    theta: float
    bias: float
    support_vectors: np.ndarray
    sv_alphas: np.ndarray
    sv_labels: np.ndarray
    feature_mean: np.ndarray
    feature_scale: np.ndarray
    n_iter: int = 0
    kkt_gap: float = 0.0
    sv_indices: np.ndarray | None = field(default=None, repr=False)

    @property
    def dim(self):
        return self.feature_mean.shape[0]


def train_smo(
    data,
    kernel,
    theta,
    tol=1e-3,
    max_passes=10,
    max_iter=100_000,
    standardize=True,
    cache_limit=4000,
):
    """Train a soft-margin SVM on ``data`` with the given kernel and box
    constant ``theta``.

    ``tol`` is the KKT gap at which optimization stops; ``max_passes``
    bounds the convergence re-checks done on a freshly recomputed score
    cache.  Raises TrainingError on single-class data or non-convergence.
    """
    if theta <= 0:
        raise ValueError("theta must be > 0")
    if tol <= 0:
        raise ValueError("tol must be > 0")
    n_pos, n_neg = data.class_counts()
    if n_pos == 0 or n_neg == 0:
        raise TrainingError("training data must contain both classes")
    x = np.ascontiguousarray(data.energies, dtype=np.float64)
    y = data.labels.astype(np.float64)
    if standardize:
        mean = x.mean(axis=0)
        scale = x.std(axis=0)
        scale[scale == 0.0] = 1.0
    else:
        mean = np.zeros(x.shape[1])
        scale = np.ones(x.shape[1])
    xs = np.ascontiguousarray((x - mean) / scale)
    if len(data) <= cache_limit:
        gram = np.ascontiguousarray(kernel_matrix(kernel, xs))
        alpha, beta, gap, iters, status = _smo_cached(
            gram, y, float(theta), float(tol), int(max_iter), int(max_passes)
        )
    else:
        alpha, beta, gap, iters, status = _smo_uncached(
            kernel, xs, y, float(theta), float(tol), int(max_iter), int(max_passes)
        )
    if status != 0:
        reasons = {1: "iteration cap reached", 2: "refresh cap reached", 3: "stalled step"}
        raise TrainingError(
            f"SMO did not converge: {reasons.get(status, 'unknown')} "
            f"(gap={gap:.3e}, iters={iters})",
            diagnostics={"gap": float(gap), "iterations": int(iters), "alpha": alpha},
        )
    mask = alpha > 0.0
    return SvmModel(
        kernel=kernel,
        theta=float(theta),
        bias=float(beta),
        support_vectors=xs[mask].copy(),
        sv_alphas=alpha[mask].copy(),
        sv_labels=y[mask].copy(),
        feature_mean=mean,
        feature_scale=scale,
        n_iter=int(iters),
        kkt_gap=float(gap),
        sv_indices=np.nonzero(mask)[0],
    )


def decision_values(model, x):
    """Pre-sign scores for a batch of feature rows."""
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    if x.shape[1] != model.dim:
        raise ValueError(f"expected {model.dim} features, got {x.shape[1]}")
    xs = (x - model.feature_mean) / model.feature_scale
    if model.support_vectors.shape[0] == 0:
        return np.full(x.shape[0], model.bias)
    k = kernel_matrix(model.kernel, xs, model.support_vectors)
    return k @ (model.sv_alphas * model.sv_labels) + model.bias


def decision_value(model, x):
    """Pre-sign score of a single feature vector."""
    x = np.asarray(x, dtype=np.float64).ravel()
    return float(decision_values(model, x[None, :])[0])


def classify(model, x):
    """Class of ``x``: sign of the decision value, ties resolved to +1."""
    return 1 if decision_value(model, x) >= 0.0 else -1


def _alphas_for(model, data):
    # Per-row dual coefficients aligned with ``data``; uses stored training
    # indices when they fit, else matches support vectors to rows exactly.
    alpha = np.zeros(len(data))
    if model.sv_indices is not None and (
        len(model.sv_indices) == 0 or model.sv_indices.max() < len(data)
    ):
        alpha[model.sv_indices] = model.sv_alphas
        return alpha
    xs = (data.energies - model.feature_mean) / model.feature_scale
    used = np.zeros(len(data), dtype=bool)
    for sv, a in zip(model.support_vectors, model.sv_alphas):
        match = np.nonzero(~used & np.all(xs == sv, axis=1))[0]
        if match.size == 0:
            raise ValueError("support vector not found among the provided rows")
        alpha[match[0]] = a
        used[match[0]] = True
    return alpha


def kkt_violation(model, data):
    """Largest first-order optimality residual of the model on its training set."""
    alpha = _alphas_for(model, data)
    yf = data.labels * decision_values(model, data.energies)
    at_zero = alpha == 0.0
    at_theta = alpha == model.theta
    interior = ~at_zero & ~at_theta
    viol = np.zeros(len(data))
    viol[at_zero] = np.maximum(0.0, 1.0 - yf[at_zero])
    viol[interior] = np.abs(yf[interior] - 1.0)
    viol[at_theta] = np.maximum(0.0, yf[at_theta] - 1.0)
    return float(viol.max())


def dual_objective(model, data=None):
    """Dual value sum(alpha) - 1/2 (alpha*y)' K (alpha*y) of the stored solution."""
    if model.sv_alphas.size == 0:
        return 0.0
    ya = model.sv_alphas * model.sv_labels
    k = kernel_matrix(model.kernel, model.support_vectors)
    return float(np.sum(model.sv_alphas) - 0.5 * ya @ k @ ya)


def _fmt(v):
    return format(float(v), ".17g")


def _fmt_vec(v):
    return ",".join(_fmt(t) for t in v)


def save_model(model, path):
    """Write the model as a self-describing text file (17 significant digits)."""
    lines = [f"kernel={model.kernel.kind}"]
    if model.kernel.kind == "polynomial":
        lines.append(f"degree={model.kernel.degree}")
    elif model.kernel.kind == "rbf":
        lines.append(f"sigma={_fmt(model.kernel.sigma)}")
    lines += [
        f"theta={_fmt(model.theta)}",
        f"bias={_fmt(model.bias)}",
        f"dim={model.dim}",
        f"mean={_fmt_vec(model.feature_mean)}",
        f"scale={_fmt_vec(model.feature_scale)}",
        f"support_vectors={model.sv_alphas.size}",
    ]
    for a, lab, sv in zip(model.sv_alphas, model.sv_labels, model.support_vectors):
        lines.append(",".join([_fmt(a), str(int(lab))] + [_fmt(v) for v in sv]))
    with open(str(path), "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def load_model(path):
    """Read a model written by save_model; reproduces decision values exactly."""
    with open(str(path), "r", encoding="utf-8") as fh:
        lines = [ln.rstrip("\n") for ln in fh if ln.strip()]
    header = {}
    i = 0
    while "=" in lines[i]:
        key, val = lines[i].split("=", 1)
        header[key] = val
        i += 1
        if key == "support_vectors":
            break
    kind = header["kernel"]
    if kind == "polynomial":
        kernel = KernelSpec.polynomial(int(header["degree"]))
    elif kind == "rbf":
        kernel = KernelSpec.rbf(float(header["sigma"]))
    else:
        kernel = KernelSpec.linear()
    dim = int(header["dim"])
    count = int(header["support_vectors"])
    rows = [np.fromstring(ln, sep=",") for ln in lines[i : i + count]]
    body = np.array(rows, dtype=np.float64).reshape(count, dim + 2)
    return SvmModel(
        kernel=kernel,
        theta=float(header["theta"]),
        bias=float(header["bias"]),
        support_vectors=body[:, 2:].copy(),
        sv_alphas=body[:, 0].copy(),
        sv_labels=body[:, 1].copy(),
        feature_mean=np.fromstring(header["mean"], sep=","),
        feature_scale=np.fromstring(header["scale"], sep=","),
    )


def dataset_from_arrays(x, y):
    """Convenience: wrap raw feature rows and +1/-1 labels as a Dataset."""
    return Dataset(np.asarray(x, dtype=np.float64), np.asarray(y, dtype=np.int64))
