"""Experiment orchestration: config parsing, single runs, and parameter sweeps.

A run generates train/test datasets, trains the configured classifiers,
evaluates every classifier and hard-fusion baseline on the same test set,
and writes CSV artifacts; everything derives deterministically from the
config seed.

Config conventions: ``fading.gamma_bar_db`` is the average per-sample SNR
in dB.  The channel draws the total collected SNR of an event, so the
fading scale passed to the channel is M * 10^(dB/10); integrating longer
(larger M) collects proportionally more signal energy.
"""

import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from copy import deepcopy
from dataclasses import dataclass

import numpy as np

from .channel import FadingParams
from .ensemble import ensemble_scores, save_ensemble, train_ensemble
from .evaluation import pd_at_pfa, roc_curve, roc_from_points, save_roc
from .sensing import SensingConfig, generate_dataset, load_dataset, save_dataset, threshold_for_pfa
from .svm import KernelSpec, TrainingError, decision_values, save_model, train_smo

_AXES = {
    "sample_size": ("sensing", "M"),
    "snr_db": ("fading", "gamma_bar_db"),
    "num_sus": ("sensing", "N"),
    "train_size": ("data", "L_train"),
}


class ConfigError(ValueError):
    """Invalid experiment configuration; ``.key`` names the offending entry."""

    def __init__(self, key, problem):
        super().__init__(f"{problem}: {key}")
        self.key = key


def default_config():
    """The built-in scenario (documented in the README)."""
    return {
        "fading": {"alpha": 2.0, "kappa": 2.0, "mu": 2.0, "gamma_bar_db": 0.0},
        "sensing": {"M": 4, "N": 3, "prior_h1": 0.5},
        "data": {"L_train": 2000, "L_test": 4000},
        "classifiers": {
            "svm": [
                {"kernel": "linear", "theta": 1.0},
                {"kernel": "polynomial", "degree": 2, "theta": 1.0},
                {"kernel": "rbf", "sigma": 1.0, "theta": 1.0},
            ],
            "ensemble": {
                "enabled": True,
                "replicas_per_spec": 3,
                "bag_fraction": 1.0,
                "stacking_split": 0.2,
            },
        },
        "fusion": {"k_values": [1, 2, 3], "num_thresholds": 33},
        "seed": 1,
    }


def _require(tree, key, path, types, predicate=None, what=""):
    if key not in tree:
        raise ConfigError(f"{path}{key}", "missing key")
    val = tree[key]
    if isinstance(val, bool) and bool not in (types if isinstance(types, tuple) else (types,)):
        raise ConfigError(f"{path}{key}", "wrong type for key")
    if not isinstance(val, types):
        raise ConfigError(f"{path}{key}", "wrong type for key")
    if predicate is not None and not predicate(val):
        raise ConfigError(f"{path}{key}", f"invalid value ({what})")
    return val


def _reject_unknown(tree, allowed, path):
    for key in tree:
        if key not in allowed:
            raise ConfigError(f"{path}{key}", "unknown key")


def _parse_kernel(entry, path):
    _reject_unknown(entry, {"kernel", "theta", "degree", "sigma"}, path + ".")
    kind = _require(entry, "kernel", path + ".", str)
    theta = _require(entry, "theta", path + ".", (int, float), lambda v: v > 0, "theta > 0")
    if kind == "linear":
        if "degree" in entry or "sigma" in entry:
            raise ConfigError(path, "linear kernel takes no degree/sigma")
        return KernelSpec.linear(), float(theta)
    if kind == "polynomial":
        degree = _require(entry, "degree", path + ".", int, lambda v: v >= 2, "degree >= 2")
        if "sigma" in entry:
            raise ConfigError(path, "polynomial kernel takes no sigma")
        return KernelSpec.polynomial(degree), float(theta)
    if kind == "rbf":
        sigma = _require(entry, "sigma", path + ".", (int, float), lambda v: v > 0, "sigma > 0")
        if "degree" in entry:
            raise ConfigError(path, "rbf kernel takes no degree")
        return KernelSpec.rbf(float(sigma)), float(theta)
    raise ConfigError(path + ".kernel", "invalid value (linear|polynomial|rbf)")


@dataclass
class ExperimentConfig:
    """Validated experiment description; ``raw`` is the resolved dict."""

    raw: dict
    fading_alpha: float
    fading_kappa: float
    fading_mu: float
    gamma_bar_db: float
    m: int
    n: int
    prior_h1: float
    l_train: int
    l_test: int
    svm_classifiers: list  # (name, KernelSpec, theta)
    ensemble_enabled: bool
    ensemble_replicas: int
    ensemble_bag_fraction: float
    ensemble_stacking_split: float
    fusion_k_values: list
    fusion_num_thresholds: int
    seed: int
    output_dir: str | None

    def fading_params(self):
        # config dB is per-sample average SNR; the channel works in total
        # collected SNR, hence the factor M
        return FadingParams(
            alpha=self.fading_alpha,
            kappa=self.fading_kappa,
            mu=self.fading_mu,
            gamma_bar=self.m * 10.0 ** (self.gamma_bar_db / 10.0),
        )

    def sensing_config(self):
        return SensingConfig(
            num_samples=self.m,
            num_sus=self.n,
            prior_h1=self.prior_h1,
            fading=self.fading_params(),
        )

    def with_value(self, axis, value):
        """New config with one sweep axis replaced (revalidated)."""
        section, key = _AXES[axis]
        raw = deepcopy(self.raw)
        raw[section][key] = value
        return validate_config(raw)


def validate_config(cfg):
    """Strict parse of a config dict: unknown keys rejected, missing required
    keys and bad values reported with their dotted path."""
    if not isinstance(cfg, dict):
        raise ConfigError("<root>", "config must be a key/value tree")
    cfg = deepcopy(cfg)
    _reject_unknown(
        cfg, {"fading", "sensing", "data", "classifiers", "fusion", "seed", "output_dir"}, ""
    )
    fading = _require(cfg, "fading", "", dict)
    _reject_unknown(fading, {"alpha", "kappa", "mu", "gamma_bar_db"}, "fading.")
    alpha = _require(fading, "alpha", "fading.", (int, float), lambda v: v > 0, "alpha > 0")
    kappa = _require(fading, "kappa", "fading.", (int, float), lambda v: v >= 0, "kappa >= 0")
    mu = _require(fading, "mu", "fading.", (int, float), lambda v: v > 0, "mu > 0")
    gdb = _require(fading, "gamma_bar_db", "fading.", (int, float))
    sensing = _require(cfg, "sensing", "", dict)
    _reject_unknown(sensing, {"M", "N", "prior_h1"}, "sensing.")
    m = _require(sensing, "M", "sensing.", int, lambda v: v >= 1, "M >= 1")
    n = _require(sensing, "N", "sensing.", int, lambda v: v >= 1, "N >= 1")
    prior = _require(
        sensing, "prior_h1", "sensing.", (int, float), lambda v: 0 <= v <= 1, "prior in [0,1]"
    )
    data = _require(cfg, "data", "", dict)
    _reject_unknown(data, {"L_train", "L_test"}, "data.")
    l_train = _require(data, "L_train", "data.", int, lambda v: v >= 10, "L_train >= 10")
    l_test = _require(data, "L_test", "data.", int, lambda v: v >= 10, "L_test >= 10")
    classifiers = cfg.setdefault("classifiers", default_config()["classifiers"])
    _reject_unknown(classifiers, {"svm", "ensemble"}, "classifiers.")
    svm_entries = classifiers.setdefault("svm", default_config()["classifiers"]["svm"])
    if not isinstance(svm_entries, list):
        raise ConfigError("classifiers.svm", "wrong type for key")
    svm_classifiers = []
    seen = {}
    for i, entry in enumerate(svm_entries):
        if not isinstance(entry, dict):
            raise ConfigError(f"classifiers.svm[{i}]", "wrong type for key")
        spec, theta = _parse_kernel(entry, f"classifiers.svm[{i}]")
        name = spec.kind
        if name in seen:
            seen[name] += 1
            name = f"{name}_{seen[spec.kind]}"
        else:
            seen[name] = 1
        svm_classifiers.append((name, spec, theta))
    ens = classifiers.setdefault("ensemble", default_config()["classifiers"]["ensemble"])
    _reject_unknown(
        ens, {"enabled", "replicas_per_spec", "bag_fraction", "stacking_split"}, "classifiers.ensemble."
    )
    ens_enabled = _require(ens, "enabled", "classifiers.ensemble.", bool)
    ens_reps = _require(
        ens, "replicas_per_spec", "classifiers.ensemble.", int, lambda v: v >= 1, ">= 1"
    )
    ens_bag = _require(
        ens, "bag_fraction", "classifiers.ensemble.", (int, float), lambda v: 0 < v <= 1, "(0,1]"
    )
    ens_split = _require(
        ens, "stacking_split", "classifiers.ensemble.", (int, float), lambda v: 0 < v < 1, "(0,1)"
    )
    fusion = cfg.setdefault("fusion", default_config()["fusion"])
    _reject_unknown(fusion, {"k_values", "num_thresholds"}, "fusion.")
    k_values = _require(fusion, "k_values", "fusion.", list)
    for i, k in enumerate(k_values):
        if not isinstance(k, int) or isinstance(k, bool) or k < 1:
            raise ConfigError(f"fusion.k_values[{i}]", "invalid value (int >= 1)")
    num_thr = _require(fusion, "num_thresholds", "fusion.", int, lambda v: v >= 2, ">= 2")
    seed = _require(cfg, "seed", "", int, lambda v: v >= 0, "seed >= 0")
    output_dir = cfg.get("output_dir")
    if output_dir is not None and not isinstance(output_dir, str):
        raise ConfigError("output_dir", "wrong type for key")
    return ExperimentConfig(
        raw=cfg,
        fading_alpha=float(alpha),
        fading_kappa=float(kappa),
        fading_mu=float(mu),
        gamma_bar_db=float(gdb),
        m=m,
        n=n,
        prior_h1=float(prior),
        l_train=l_train,
        l_test=l_test,
        svm_classifiers=svm_classifiers,
        ensemble_enabled=ens_enabled,
        ensemble_replicas=ens_reps,
        ensemble_bag_fraction=float(ens_bag),
        ensemble_stacking_split=float(ens_split),
        fusion_k_values=list(k_values),
        fusion_num_thresholds=num_thr,
        seed=seed,
        output_dir=output_dir,
    )


def load_config(path):
    """Read and validate a JSON config file."""
    with open(str(path), "r", encoding="utf-8") as fh:
        try:
            cfg = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError("<file>", f"config is not valid JSON ({exc})") from exc
    return validate_config(cfg)


def _fmt(v):
    if isinstance(v, float) and math.isnan(v):
        return "nan"
    return format(float(v), ".17g")


def _substreams(config):
    root = np.random.SeedSequence(config.seed)
    return root.spawn(3)  # train data, test data, model training


def generate_phase(config, out_dir):
    """Generate and write the train/test datasets for a config."""
    os.makedirs(out_dir, exist_ok=True)
    ss_train, ss_test, _ = _substreams(config)
    scfg = config.sensing_config()
    train_ds = generate_dataset(scfg, config.l_train, ss_train)
    test_ds = generate_dataset(scfg, config.l_test, ss_test)
    save_dataset(train_ds, os.path.join(out_dir, "train.csv"))
    save_dataset(test_ds, os.path.join(out_dir, "test.csv"))
    return train_ds, test_ds


def train_phase(config, train_ds, out_dir):
    """Train all configured classifiers; returns (models, error strings).

    ``models`` maps classifier name to ("svm", SvmModel) or
    ("ensemble", EnsembleModel); failed classifiers appear in the error
    list and the run continues.
    """
    models_dir = os.path.join(out_dir, "models")
    os.makedirs(models_dir, exist_ok=True)
    _, _, ss_model = _substreams(config)
    models = {}
    errors = []
    for name, spec, theta in config.svm_classifiers:
        try:
            model = train_smo(train_ds, spec, theta)
            save_model(model, os.path.join(models_dir, f"{name}.svm"))
            models[name] = ("svm", model)
        except TrainingError as exc:
            errors.append(f"{name}: {exc}")
    if config.ensemble_enabled:
        try:
            ens = train_ensemble(
                train_ds,
                [(spec, theta) for _, spec, theta in config.svm_classifiers],
                b_per_spec=config.ensemble_replicas,
                bag_fraction=config.ensemble_bag_fraction,
                stacking_split=config.ensemble_stacking_split,
                seed=ss_model,
            )
            save_ensemble(ens, os.path.join(models_dir, "ensemble"))
            models["ensemble"] = ("ensemble", ens)
        except TrainingError as exc:
            errors.append(f"ensemble: {exc}")
    return models, errors


def _fusion_curves(config, test_ds):
    # sweep identical local thresholds; thresholds target logit-spaced local
    # false-alarm rates through the analytic idle-band tail
    lo, hi = math.log(1e-3 / (1 - 1e-3)), math.log((1 - 1e-3) / 1e-3)
    pfa_targets = 1.0 / (1.0 + np.exp(-np.linspace(lo, hi, config.fusion_num_thresholds)))
    taus = np.array([threshold_for_pfa(config.m, p) for p in pfa_targets])
    energies = test_ds.energies
    labels = test_ds.labels
    h1 = labels == 1
    h0 = ~h1
    curves = {}
    skipped = []
    for k in config.fusion_k_values:
        if k > test_ds.dim:
            skipped.append(k)
            continue
        pds, pfas = [], []
        for tau in taus:
            # local rule: energy Y > tau/(2M) in the chi-square variate's units
            votes = np.sum(energies > tau / (2.0 * config.m), axis=1)
            declared = votes >= k
            pds.append(np.mean(declared[h1]) if h1.any() else 0.0)
            pfas.append(np.mean(declared[h0]) if h0.any() else 0.0)
        curves[f"fusion_k{k}"] = roc_from_points(pfas, pds)
    return curves, skipped


def eval_phase(config, models, test_ds, out_dir, errors=()):
    """Score models and fusion baselines on the test set; write artifacts."""
    os.makedirs(out_dir, exist_ok=True)
    errors = list(errors)
    rows = []
    ordered = [name for name, _, _ in config.svm_classifiers]
    if config.ensemble_enabled:
        ordered.append("ensemble")
    for name in ordered:
        if name not in models:
            rows.append((name, float("nan"), float("nan")))
            continue
        kind, model = models[name]
        scores = (
            ensemble_scores(model, test_ds.energies)
            if kind == "ensemble"
            else decision_values(model, test_ds.energies)
        )
        curve = roc_curve(scores, test_ds.labels)
        save_roc(curve, os.path.join(out_dir, f"roc_{name}.csv"), {"classifier": name})
        rows.append((name, curve.auc, pd_at_pfa(curve, 0.1)))
    fusion_curves, skipped = _fusion_curves(config, test_ds)
    for k in skipped:
        errors.append(f"fusion_k{k}: k exceeds the number of SUs ({test_ds.dim}); skipped")
    for name, curve in fusion_curves.items():
        save_roc(curve, os.path.join(out_dir, f"roc_{name}.csv"), {"classifier": name})
        rows.append((name, curve.auc, pd_at_pfa(curve, 0.1)))
    lines = ["classifier,auc,pd_at_pfa_0.1"]
    for name, auc_val, pd01 in rows:
        lines.append(f"{name},{_fmt(auc_val)},{_fmt(pd01)}")
    with open(os.path.join(out_dir, "summary.csv"), "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")
    if errors:
        with open(os.path.join(out_dir, "errors.log"), "w", encoding="utf-8", newline="\n") as fh:
            fh.write("\n".join(errors) + "\n")
    return {name: {"auc": auc_val, "pd_at_pfa_0.1": pd01} for name, auc_val, pd01 in rows}


def run(config, out_dir=None):
    """Full pipeline for one config; returns {classifier: metrics}."""
    out_dir = out_dir or config.output_dir
    if not out_dir:
        raise ConfigError("output_dir", "missing key")
    os.makedirs(out_dir, exist_ok=True)
    with open(os.path.join(out_dir, "resolved_config.json"), "w", encoding="utf-8", newline="\n") as fh:
        json.dump(config.raw, fh, sort_keys=True, indent=2)
        fh.write("\n")
    train_ds, test_ds = generate_phase(config, out_dir)
    models, errors = train_phase(config, train_ds, out_dir)
    return eval_phase(config, models, test_ds, out_dir, errors)


_AXIS_IDS = {"sample_size": 0, "snr_db": 1, "num_sus": 2, "train_size": 3}


def _sweep_point(args):
    raw, axis, index, value, point_dir = args
    section, key = _AXES[axis]
    sub_raw = deepcopy(raw)
    sub_raw[section][key] = value
    # sub-seed derived from (master seed, axis, point index) so sweep points
    # are independent realizations
    derived = np.random.SeedSequence(
        entropy=raw["seed"], spawn_key=(_AXIS_IDS[axis], index)
    ).generate_state(1, np.uint64)[0]
    sub_raw["seed"] = int(derived)
    sub = validate_config(sub_raw)
    return run(sub, point_dir)


def sweep(config, axis, values, out_dir=None, workers=1):
    """Run the pipeline once per axis value; sub-runs use the same seed tree
    (their configs differ, so their streams are independent realizations of
    the same master seed)."""
    if axis not in _AXES:
        raise ValueError(f"unknown sweep axis: {axis!r} (expected one of {sorted(_AXES)})")
    values = list(values)
    if not values:
        raise ValueError("sweep needs a nonempty list of values")
    out_dir = out_dir or config.output_dir
    if not out_dir:
        raise ConfigError("output_dir", "missing key")
    os.makedirs(out_dir, exist_ok=True)
    jobs = []
    for index, value in enumerate(values):
        point_dir = os.path.join(out_dir, f"{axis}={value:g}")
        jobs.append((config.raw, axis, index, value, point_dir))
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_sweep_point, jobs))
    else:
        results = [_sweep_point(job) for job in jobs]
    lines = ["axis_value,classifier,auc"]
    table = {}
    for value, result in zip(values, results):
        table[value] = result
        for name, metrics in result.items():
            lines.append(f"{value:g},{name},{_fmt(metrics['auc'])}")
    with open(os.path.join(out_dir, "sweep_summary.csv"), "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")
    return table


def evaluate_saved(config, out_dir):
    """Eval phase against previously written models and test.csv (CLI 'eval')."""
    from .ensemble import load_ensemble
    from .svm import load_model

    test_path = os.path.join(out_dir, "test.csv")
    if not os.path.exists(test_path):
        raise FileNotFoundError(f"no test dataset at {test_path}; run 'generate' first")
    test_ds = load_dataset(test_path)
    models_dir = os.path.join(out_dir, "models")
    models = {}
    for name, _, _ in config.svm_classifiers:
        path = os.path.join(models_dir, f"{name}.svm")
        if os.path.exists(path):
            models[name] = ("svm", load_model(path))
    ens_dir = os.path.join(models_dir, "ensemble")
    if config.ensemble_enabled and os.path.isdir(ens_dir):
        models["ensemble"] = ("ensemble", load_ensemble(ens_dir))
    return eval_phase(config, models, test_ds, out_dir)
