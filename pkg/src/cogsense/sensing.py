"""Per-SU energy detection and fusion-center dataset construction.

Noise is unit-power circularly-symmetric complex Gaussian, so the scaled
statistic 2*M*Y is central chi-square with 2M dof when the band is idle and
noncentral with noncentrality 2*gamma when it is occupied; gamma is the
total received signal energy of the event.
"""

import math
from dataclasses import dataclass

import numpy as np

from .channel import FadingParams, make_snr_sampler, sample_snr
from .numerics import marcum_q, reg_gamma_upper

H1 = 1
H0 = -1


@dataclass(frozen=True)
class SensingConfig:
    """Sensing-event geometry: M samples per SU, N cooperating SUs, the
    prior probability that the PU is transmitting, and the fading law."""

    num_samples: int
    num_sus: int
    prior_h1: float
    fading: FadingParams

    def __post_init__(self):
        if self.num_samples < 1 or self.num_sus < 1:
            raise ValueError("num_samples and num_sus must be >= 1")
        if not 0.0 <= self.prior_h1 <= 1.0:
            raise ValueError("prior_h1 must lie in [0, 1]")


@dataclass(frozen=True)
class EnergyVector:
    """One labeled sensing event: a per-SU energy row and its +1/-1 label."""

    energies: np.ndarray
    label: int

    def __post_init__(self):
        e = np.asarray(self.energies, dtype=np.float64)
        object.__setattr__(self, "energies", e)
        if e.ndim != 1 or np.any(e < 0) or not np.all(np.isfinite(e)):
            raise ValueError("energies must be a 1-d array of finite nonnegative values")
        if self.label not in (H0, H1):
            raise ValueError("label must be +1 or -1")


class Dataset:
    """Ordered collection of labeled energy rows with common dimension."""

    def __init__(self, energies, labels, provenance=None):
        energies = np.asarray(energies, dtype=np.float64)
        labels = np.asarray(labels, dtype=np.int64)
        if energies.ndim != 2 or labels.ndim != 1 or energies.shape[0] != labels.shape[0]:
            raise ValueError("energies must be (L, N) with one label per row")
        if energies.shape[0] == 0:
            raise ValueError("dataset must contain at least one row")
        # nonnegativity is an EnergyVector invariant; rows of a Dataset may be
        # generic features (e.g. classifier scores fed to a stacking combiner)
        if not np.all(np.isfinite(energies)):
            raise ValueError("feature values must be finite")
        if not np.all(np.isin(labels, (H0, H1))):
            raise ValueError("labels must be +1 or -1")
        self.energies = energies
        self.labels = labels
        self.provenance = provenance

    def __len__(self):
        return self.energies.shape[0]

    def __getitem__(self, i):
        return EnergyVector(self.energies[i], int(self.labels[i]))

    @property
    def dim(self):
        return self.energies.shape[1]

    def take(self, indices):
        """Row subset/resample as a new Dataset (provenance not carried over)."""
        idx = np.asarray(indices, dtype=np.int64)
        return Dataset(self.energies[idx], self.labels[idx])

    def class_counts(self):
        return int(np.sum(self.labels == H1)), int(np.sum(self.labels == H0))


def energy_statistic(samples):
    """Mean squared magnitude of the received samples (normalized energy)."""
    s = np.asarray(samples)
    if s.size == 0:
        raise ValueError("energy_statistic requires at least one sample")
    return float(np.mean(np.abs(s) ** 2))


def simulate_event(config, hypothesis, rng, snr_table=None):
    """Simulate one sensing event and return its EnergyVector.

    Draw order per event is fixed (noise, then SNRs, then phases under H1)
    so an event is fully determined by its rng substream.  Pass a prebuilt
    ``snr_table`` when simulating many events; otherwise one is built from
    ``config.fading`` on the fly.
    """
    if hypothesis not in (H0, H1):
        raise ValueError("hypothesis must be +1 (PU present) or -1 (PU absent)")
    n, m = config.num_sus, config.num_samples
    z = (rng.standard_normal((n, m)) + 1j * rng.standard_normal((n, m))) * math.sqrt(0.5)
    if hypothesis == H1:
        if snr_table is None:
            snr_table = make_snr_sampler(config.fading)
        snrs = sample_snr(snr_table, rng, n)
        phases = 2.0 * math.pi * rng.random(n)
        # constant-modulus symbol stream carrying total energy gamma_n per SU
        z += (np.sqrt(snrs / m) * np.exp(1j * phases))[:, None]
    energies = np.mean(np.abs(z) ** 2, axis=1)
    return EnergyVector(energies, hypothesis)


def generate_dataset(config, count, seed):
    """Generate ``count`` labeled events, one rng substream per event.

    Substreams are spawned from the master seed by event index, so the
    result is independent of any worker scheduling and byte-reproducible.
    """
    if count < 1:
        raise ValueError("count must be >= 1")
    root = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    table = make_snr_sampler(config.fading) if config.prior_h1 > 0 else None
    energies = np.empty((count, config.num_sus), dtype=np.float64)
    labels = np.empty(count, dtype=np.int64)
    for i, child in enumerate(root.spawn(count)):
        rng = np.random.default_rng(child)
        hyp = H1 if rng.random() < config.prior_h1 else H0
        event = simulate_event(config, hyp, rng, table)
        energies[i] = event.energies
        labels[i] = event.label
    return Dataset(energies, labels, provenance={"config": config, "seed": root.entropy})


def analytic_ed_performance(n, gamma, tau):
    """Closed-form (pd, pfa) of the energy detector on y = 2*M*Y at threshold tau."""
    if n < 1:
        raise ValueError("n must be >= 1")
    if tau < 0 or gamma < 0:
        raise ValueError("tau and gamma must be >= 0")
    pfa = reg_gamma_upper(n, 0.5 * tau)
    pd = marcum_q(n, math.sqrt(2.0 * gamma), math.sqrt(tau))
    return pd, pfa


def threshold_for_pfa(n, pfa):
    """Invert the idle-band tail: the tau with reg_gamma_upper(n, tau/2) = pfa."""
    if not 0.0 < pfa < 1.0:
        raise ValueError("pfa must lie strictly between 0 and 1")
    lo, hi = 0.0, 4.0 * (n + 10.0 * math.sqrt(n) + 40.0)
    while reg_gamma_upper(n, 0.5 * hi) > pfa:
        hi *= 2.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if reg_gamma_upper(n, 0.5 * mid) > pfa:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def _format_float(v):
    return format(float(v), ".17g")


def save_dataset(dataset, path):
    """Write the dataset CSV (header y_1..y_N,label) plus a key=value sidecar.

    Requires generation provenance (fading parameters, sensing geometry and
    master seed); the sidecar makes the file pair self-describing.
    """
    prov = dataset.provenance
    if not prov or "config" not in prov:
        raise ValueError("save_dataset needs a dataset with generation provenance")
    config = prov["config"]
    path = str(path)
    n = dataset.dim
    lines = [",".join([f"y_{j + 1}" for j in range(n)] + ["label"])]
    for row, label in zip(dataset.energies, dataset.labels):
        lines.append(",".join([_format_float(v) for v in row] + [str(int(label))]))
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")
    fading = config.fading
    meta = [
        ("alpha", _format_float(fading.alpha)),
        ("kappa", _format_float(fading.kappa)),
        ("mu", _format_float(fading.mu)),
        ("gamma_bar_db", _format_float(10.0 * math.log10(fading.gamma_bar))),
        ("M", str(config.num_samples)),
        ("N", str(config.num_sus)),
        ("prior_h1", _format_float(config.prior_h1)),
        ("L", str(len(dataset))),
        ("seed", str(prov.get("seed"))),
    ]
    with open(path + ".meta", "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(f"{k}={v}" for k, v in meta) + "\n")


def load_dataset(path):
    """Read a dataset CSV written by save_dataset; restores provenance if the
    sidecar is present."""
    path = str(path)
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().strip().split(",")
        if header[-1] != "label" or len(header) < 2:
            raise ValueError(f"{path} is not a dataset CSV (bad header)")
        raw = np.loadtxt(fh, delimiter=",", ndmin=2)
    energies = raw[:, :-1]
    labels = raw[:, -1].astype(np.int64)
    provenance = None
    try:
        with open(path + ".meta", "r", encoding="utf-8") as fh:
            kv = dict(line.strip().split("=", 1) for line in fh if line.strip())
        fading = FadingParams(
            alpha=float(kv["alpha"]),
            kappa=float(kv["kappa"]),
            mu=float(kv["mu"]),
            gamma_bar=10.0 ** (float(kv["gamma_bar_db"]) / 10.0),
        )
        config = SensingConfig(
            num_samples=int(kv["M"]),
            num_sus=int(kv["N"]),
            prior_h1=float(kv["prior_h1"]),
            fading=fading,
        )
        provenance = {"config": config, "seed": int(kv["seed"])}
    except FileNotFoundError:
        pass
    return Dataset(energies, labels, provenance=provenance)
