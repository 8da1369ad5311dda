"""Detection metrics: Pd/Pfa at a threshold, ROC curves and trapezoidal AUC.

The false-alarm probability follows the standard convention
Pfa = P[declared present | actually absent]; predictions use a strict
``score > threshold`` comparison and tied scores collapse into a single
operating point.
"""

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class RocCurve:
    """Operating points sorted by pfa from (0,0) to (1,1), plus their AUC."""

    pfa: np.ndarray
    pd: np.ndarray
    auc: float

    def __post_init__(self):
        pfa = np.asarray(self.pfa, dtype=np.float64)
        pd = np.asarray(self.pd, dtype=np.float64)
        object.__setattr__(self, "pfa", pfa)
        object.__setattr__(self, "pd", pd)
        if pfa.shape != pd.shape or pfa.ndim != 1 or pfa.size < 2:
            raise ValueError("pfa and pd must be equal-length 1-d arrays (>= 2 points)")
        for arr in (pfa, pd):
            if np.any(arr < 0) or np.any(arr > 1) or np.any(np.diff(arr) < 0):
                raise ValueError("curve coordinates must be nondecreasing within [0, 1]")
        if pfa[0] != 0 or pd[0] != 0 or pfa[-1] != 1 or pd[-1] != 1:
            raise ValueError("curve must run from (0, 0) to (1, 1)")
        if abs(self.auc - float(np.trapz(pd, pfa))) > 1e-12:
            raise ValueError("stored auc does not match the stored points")
        pfa.setflags(write=False)
        pd.setflags(write=False)

    @property
    def points(self):
        return list(zip(self.pfa.tolist(), self.pd.tolist()))


def _check_scores_labels(scores, labels):
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    if scores.shape != labels.shape or scores.ndim != 1 or scores.size == 0:
        raise ValueError("scores and labels must be equal-length 1-d sequences")
    if not np.all(np.isin(labels, (-1, 1))):
        raise ValueError("labels must be +1 or -1")
    n_pos = int(np.sum(labels == 1))
    n_neg = labels.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise ValueError("both classes must be present")
    return scores, labels, n_pos, n_neg


def pd_pfa_at(scores, labels, threshold):
    """Empirical (pd, pfa) when declaring present for score > threshold."""
    scores, labels, n_pos, n_neg = _check_scores_labels(scores, labels)
    predicted = scores > threshold
    pd = float(np.sum(predicted & (labels == 1))) / n_pos
    pfa = float(np.sum(predicted & (labels == -1))) / n_neg
    return pd, pfa


def roc_curve(scores, labels):
    """Threshold sweep over all distinct score values."""
    scores, labels, n_pos, n_neg = _check_scores_labels(scores, labels)
    order = np.argsort(-scores, kind="stable")
    s = scores[order]
    pos = labels[order] == 1
    tp = np.cumsum(pos)
    fp = np.cumsum(~pos)
    boundary = np.nonzero(np.append(s[1:] != s[:-1], True))[0]
    pd = np.concatenate(([0.0], tp[boundary] / n_pos))
    pfa = np.concatenate(([0.0], fp[boundary] / n_neg))
    return RocCurve(pfa=pfa, pd=pd, auc=float(np.trapz(pd, pfa)))


def roc_from_points(pfa_points, pd_points):
    """Assemble a RocCurve from explicit operating points (e.g. a hard-fusion
    threshold sweep); points must be jointly monotone once sorted by pfa."""
    pfa = np.asarray(pfa_points, dtype=np.float64)
    pd = np.asarray(pd_points, dtype=np.float64)
    order = np.lexsort((pd, pfa))
    pfa, pd = pfa[order], pd[order]
    if pfa.size == 0 or pfa[0] > 0 or pd[0] > 0:
        pfa = np.concatenate(([0.0], pfa))
        pd = np.concatenate(([0.0], pd))
    if pfa[-1] < 1 or pd[-1] < 1:
        pfa = np.concatenate((pfa, [1.0]))
        pd = np.concatenate((pd, [1.0]))
    return RocCurve(pfa=pfa, pd=pd, auc=float(np.trapz(pd, pfa)))


def auc(curve):
    """Trapezoidal area under the stored operating points."""
    return float(np.trapz(curve.pd, curve.pfa))


def pd_at_pfa(curve, pfa_target):
    """Interpolated detection probability at a target false-alarm rate."""
    if not 0.0 <= pfa_target <= 1.0:
        raise ValueError("pfa_target must lie in [0, 1]")
    return float(np.interp(pfa_target, curve.pfa, curve.pd))


def save_roc(curve, path, metadata=None):
    """Write the curve as CSV (pfa,pd) plus a key=value sidecar with the AUC."""
    path = str(path)
    lines = ["pfa,pd"]
    for x, y in zip(curve.pfa, curve.pd):
        lines.append(f"{format(x, '.17g')},{format(y, '.17g')}")
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")
    meta = {"auc": format(curve.auc, ".17g")}
    if metadata:
        meta.update({k: str(v) for k, v in metadata.items()})
    with open(path + ".meta", "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(f"{k}={v}" for k, v in meta.items()) + "\n")
