"""Bagged/stacked ensemble of SVM base classifiers.

Base models are trained on bootstrap replicas of one part of the training
data; a linear-SVM meta-model is then fit on the base decision values over
a held-out stacking part and combines them into a single score.
"""

import os
from dataclasses import dataclass

import numpy as np

from .sensing import Dataset
from .svm import (
    KernelSpec,
    SvmModel,
    TrainingError,
    decision_values,
    load_model,
    save_model,
    train_smo,
)

_BOOTSTRAP_RETRIES = 10


@dataclass
class EnsembleModel:
    """Base SVMs plus the linear meta-model over their decision values."""

    base_models: list
    combiner: SvmModel
    bag_fraction: float
    stacking_split: float

    def __post_init__(self):
        if len(self.base_models) < 1:
            raise ValueError("ensemble needs at least one base model")
        if self.combiner.dim != len(self.base_models):
            raise ValueError("combiner dimension must equal the number of base models")


def bootstrap_sample(data, fraction, rng):
    """Resample round(fraction * L) rows uniformly with replacement."""
    if not 0.0 < fraction <= 1.0:
        raise ValueError("fraction must lie in (0, 1]")
    if len(data) == 0:
        raise ValueError("cannot bootstrap an empty dataset")
    count = int(round(fraction * len(data)))
    if count < 1:
        raise ValueError("fraction too small: bootstrap replica would be empty")
    idx = rng.integers(0, len(data), size=count)
    return data.take(idx)


def _base_scores(models, x):
    return np.column_stack([decision_values(m, x) for m in models])


def _fit_replica(part, spec, theta, bag_fraction, rng, tol):
    # bootstrap with retries against single-class replicas, then train
    for _ in range(_BOOTSTRAP_RETRIES):
        candidate = bootstrap_sample(part, bag_fraction, rng)
        c_pos, c_neg = candidate.class_counts()
        if c_pos > 0 and c_neg > 0:
            return train_smo(candidate, spec, theta, tol=tol)
    raise TrainingError("bootstrap replicas kept coming out single-class")


def train_ensemble(
    data,
    base_specs,
    b_per_spec=3,
    bag_fraction=1.0,
    stacking_split=0.2,
    seed=0,
    theta_combiner=1.0,
    tol=1e-3,
):
    """Train the stacked ensemble.

    ``base_specs`` is a sequence of (KernelSpec, theta) pairs; each spec
    contributes ``b_per_spec`` bootstrap-replica models.  Stacking is
    cross-validated: the data is cut into round(1/stacking_split) folds and
    every fold is scored by replicas trained on bootstrap replicas of the
    remaining (1 - stacking_split) share, giving held-out decision values
    for every row.  The combiner (a linear SVM) is fit on those, and the
    replicas served at prediction time are refit on bootstrap replicas of
    the full training set.  Replica slots that fail to train anywhere are
    dropped; it is an error if all fail.
    """
    if len(base_specs) < 1:
        raise ValueError("need at least one base spec")
    if not 0.0 < stacking_split < 1.0:
        raise ValueError("stacking_split must lie in (0, 1)")
    if b_per_spec < 1:
        raise ValueError("b_per_spec must be >= 1")
    n_pos, n_neg = data.class_counts()
    if n_pos == 0 or n_neg == 0:
        raise TrainingError("training data must contain both classes")
    root = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    slots = [(spec, theta) for spec, theta in base_specs for _ in range(b_per_spec)]
    n_slots = len(slots)
    n_folds = max(2, int(round(1.0 / stacking_split)))
    if n_folds > len(data):
        raise ValueError("stacking_split leaves folds smaller than one row")
    streams = root.spawn(1 + n_folds * n_slots + n_slots)
    perm = np.random.default_rng(streams[0]).permutation(len(data))
    folds = np.array_split(perm, n_folds)
    oof = np.zeros((len(data), n_slots))
    alive = [True] * n_slots
    failures = []
    for f, fold_idx in enumerate(folds):
        rest = np.concatenate([folds[g] for g in range(n_folds) if g != f])
        part = data.take(rest)
        r_pos, r_neg = part.class_counts()
        if r_pos == 0 or r_neg == 0:
            raise TrainingError(
                "a stacking fold complement is single-class; "
                "increase stacking_split or use a different seed"
            )
        for s, (spec, theta) in enumerate(slots):
            if not alive[s]:
                continue
            rng = np.random.default_rng(streams[1 + f * n_slots + s])
            try:
                model = _fit_replica(part, spec, theta, bag_fraction, rng, tol)
            except TrainingError as exc:
                alive[s] = False
                failures.append((spec.label(), str(exc)))
                continue
            oof[fold_idx, s] = decision_values(model, data.energies[fold_idx])
    models = []
    kept = []
    for s, (spec, theta) in enumerate(slots):
        if not alive[s]:
            continue
        rng = np.random.default_rng(streams[1 + n_folds * n_slots + s])
        try:
            models.append(_fit_replica(data, spec, theta, bag_fraction, rng, tol))
            kept.append(s)
        except TrainingError as exc:
            failures.append((spec.label(), str(exc)))
    if not models:
        raise TrainingError(
            "all base classifiers failed to train: "
            + "; ".join(f"{lab}: {msg}" for lab, msg in failures)
        )
    combiner = train_smo(
        Dataset(oof[:, kept], data.labels),
        KernelSpec.linear(),
        theta_combiner,
        tol=tol,
    )
    return EnsembleModel(
        base_models=models,
        combiner=combiner,
        bag_fraction=float(bag_fraction),
        stacking_split=float(stacking_split),
    )


def ensemble_scores(model, x):
    """Combiner decision values for a batch of feature rows."""
    return decision_values(model.combiner, _base_scores(model.base_models, x))


def ensemble_score(model, x):
    """Combiner decision value for a single feature vector."""
    x = np.asarray(x, dtype=np.float64).ravel()
    return float(ensemble_scores(model, x[None, :])[0])


def ensemble_classify(model, x):
    """Ensemble class of ``x``; ties resolve to +1 (PU present)."""
    return 1 if ensemble_score(model, x) >= 0.0 else -1


def combiner_weights(model):
    """Explicit linear weights of the meta-model over base decision values."""
    c = model.combiner
    raw = (c.sv_alphas * c.sv_labels) @ c.support_vectors
    return raw / c.feature_scale


def save_ensemble(model, directory):
    """Write base models, combiner and a manifest into ``directory``."""
    directory = str(directory)
    os.makedirs(directory, exist_ok=True)
    lines = [
        f"base_count={len(model.base_models)}",
        f"bag_fraction={format(model.bag_fraction, '.17g')}",
        f"stacking_split={format(model.stacking_split, '.17g')}",
    ]
    for i, base in enumerate(model.base_models):
        name = f"base_{i:02d}.svm"
        save_model(base, os.path.join(directory, name))
        lines.append(f"base_{i}={name}")
    save_model(model.combiner, os.path.join(directory, "combiner.svm"))
    lines.append("combiner=combiner.svm")
    with open(os.path.join(directory, "manifest.txt"), "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def load_ensemble(directory):
    """Read an ensemble written by save_ensemble."""
    directory = str(directory)
    with open(os.path.join(directory, "manifest.txt"), "r", encoding="utf-8") as fh:
        kv = dict(line.strip().split("=", 1) for line in fh if line.strip())
    count = int(kv["base_count"])
    bases = [load_model(os.path.join(directory, kv[f"base_{i}"])) for i in range(count)]
    combiner = load_model(os.path.join(directory, kv["combiner"]))
    return EnsembleModel(
        base_models=bases,
        combiner=combiner,
        bag_fraction=float(kv["bag_fraction"]),
        stacking_split=float(kv["stacking_split"]),
    )
