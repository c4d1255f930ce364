"""Sensor fingerprinting from measurement noise.

Noise chunks are fixed-length windows of de-meaned readings (or estimator
residuals). Each chunk is summarised by time-domain moments and a coarse
shape of its magnitude spectrum; sensors are told apart by a standardised
nearest-centroid rule, and a distance threshold turns that into open-set
authentication.
"""

from __future__ import annotations

from dataclasses import astuple, dataclass, fields
from typing import Iterable, Sequence

import numpy as np

from .errors import (InsufficientDataError, InvalidParameterError,
                     SeriesTooShortError, UnknownLabelError)

SCALE_FLOOR = 1e-12
DEFAULT_CHUNK_LEN = 300


@dataclass(frozen=True, eq=False)
class NoiseChunk:
    samples: np.ndarray
    source_label: str | None = None

    def __post_init__(self):
        s = np.array(self.samples, dtype=np.float64).ravel()
        if s.size < 8:
            raise InvalidParameterError("a noise chunk needs at least 8 samples")
        if not np.all(np.isfinite(s)):
            raise InvalidParameterError("noise chunk samples must be finite")
        s.flags.writeable = False
        object.__setattr__(self, "samples", s)

    def __len__(self):
        return self.samples.size


@dataclass(frozen=True)
class FeatureVector:
    mean: float
    variance: float
    std: float
    mean_abs_deviation: float
    skewness: float
    excess_kurtosis: float
    rms: float
    peak_to_peak: float
    spectral_centroid: float
    spectral_std: float
    band_energy_low: float
    band_energy_mid: float
    band_energy_high: float

    def as_array(self) -> np.ndarray:
        return np.array(astuple(self), dtype=np.float64)

    @classmethod
    def from_array(cls, values) -> "FeatureVector":
        return cls(*(float(v) for v in values))


FEATURE_NAMES = tuple(f.name for f in fields(FeatureVector))


def _chunk(series, chunk_len):
    series = np.asarray(series, dtype=np.float64).ravel()
    if chunk_len < 8:
        raise InvalidParameterError("chunk_len must be >= 8")
    if series.size < chunk_len:
        raise SeriesTooShortError(f"series has {series.size} samples, chunk_len is {chunk_len}")
    count = series.size // chunk_len
    return series[: count * chunk_len].reshape(count, chunk_len)


def extract_noise_constant(series, chunk_len: int = DEFAULT_CHUNK_LEN, label=None) -> list[NoiseChunk]:
    """Non-overlapping chunks of a constant-setpoint record, each minus its own mean.
    The trailing partial chunk is dropped."""
    blocks = _chunk(series, chunk_len)
    blocks = blocks - blocks.mean(axis=1, keepdims=True)
    return [NoiseChunk(b, label) for b in blocks]


def extract_noise_residual(residuals, chunk_len: int = DEFAULT_CHUNK_LEN, label=None) -> list[NoiseChunk]:
    """Like :func:`extract_noise_constant` but keeps the samples as they are."""
    return [NoiseChunk(b, label) for b in _chunk(residuals, chunk_len)]


def feature_matrix(samples) -> np.ndarray:
    """Features of each row of ``samples`` (shape ``(N, L)``), columns in
    :data:`FEATURE_NAMES` order.

    Variance is the unbiased sample variance, skewness the adjusted
    Fisher-Pearson G1 and kurtosis the bias-corrected excess G2 (both 0 for
    a constant chunk). The spectrum is ``|rfft|`` over bins ``1 .. L//2``:
    centroid and spread are magnitude-weighted bin indices, band energies are
    the fractions of squared magnitude in the lower/middle/upper third of
    those bins (``numpy.array_split`` order). A chunk without AC content gets
    centroid 0, spread 0 and band energies 1/3 each.
    """
    x = np.atleast_2d(np.asarray(samples, dtype=np.float64))
    n = x.shape[1]
    mean = x.mean(axis=1)
    d = x - mean[:, None]
    m2 = np.mean(d ** 2, axis=1)
    m3 = np.mean(d ** 3, axis=1)
    m4 = np.mean(d ** 4, axis=1)
    variance = m2 * n / (n - 1)
    flat = m2 == 0
    safe = np.where(flat, 1.0, m2)
    g1 = m3 / safe ** 1.5
    g2 = m4 / safe ** 2 - 3.0
    skew = np.where(flat, 0.0, g1 * np.sqrt(n * (n - 1.0)) / (n - 2.0))
    kurt = np.where(flat, 0.0, ((n + 1.0) * g2 + 6.0) * (n - 1.0) / ((n - 2.0) * (n - 3.0)))

    mag = np.abs(np.fft.rfft(x, axis=1))[:, 1: n // 2 + 1]
    bins = np.arange(1, mag.shape[1] + 1, dtype=np.float64)
    mag_sum = mag.sum(axis=1)
    silent = mag_sum == 0
    msafe = np.where(silent, 1.0, mag_sum)
    centroid = np.where(silent, 0.0, (mag * bins).sum(axis=1) / msafe)
    spread = np.where(silent, 0.0, np.sqrt((mag * (bins[None, :] - centroid[:, None]) ** 2).sum(axis=1) / msafe))
    power = mag ** 2
    total = power.sum(axis=1)
    psafe = np.where(total == 0, 1.0, total)
    bands = np.stack([b.sum(axis=1) for b in np.array_split(power, 3, axis=1)], axis=1) / psafe[:, None]
    bands[total == 0] = 1.0 / 3.0

    return np.column_stack([
        mean, variance, np.sqrt(variance), np.mean(np.abs(d), axis=1), skew, kurt,
        np.sqrt(np.mean(x ** 2, axis=1)), x.max(axis=1) - x.min(axis=1),
        centroid, spread, bands,
    ])


def compute_features(chunk: NoiseChunk) -> FeatureVector:
    return FeatureVector.from_array(feature_matrix(chunk.samples[None, :])[0])


def _features_of(items) -> np.ndarray:
    items = list(items)
    if not items:
        return np.zeros((0, len(FEATURE_NAMES)))
    if isinstance(items[0], FeatureVector):
        return np.array([fv.as_array() for fv in items])
    lengths = {len(c) for c in items}
    if len(lengths) == 1:
        return feature_matrix(np.stack([c.samples for c in items]))
    return np.array([compute_features(c).as_array() for c in items])


@dataclass(frozen=True, eq=False)
class SensorProfile:
    label: str
    centroid: FeatureVector
    scale: np.ndarray

    def distance(self, features) -> np.ndarray:
        """Standardised Euclidean distance of one or many feature rows."""
        z = (np.asarray(features, dtype=np.float64) - self.centroid.as_array()) / self.scale
        return np.sqrt(np.sum(z * z, axis=-1))


@dataclass(frozen=True, eq=False)
class FingerprintModel:
    profiles: tuple
    accept_threshold: float

    def __post_init__(self):
        labels = [p.label for p in self.profiles]
        if len(set(labels)) != len(labels):
            raise InvalidParameterError("profile labels must be unique")
        object.__setattr__(self, "profiles", tuple(sorted(self.profiles, key=lambda p: p.label)))

    @property
    def labels(self) -> list[str]:
        return [p.label for p in self.profiles]

    def profile(self, label) -> SensorProfile:
        for p in self.profiles:
            if p.label == label:
                return p
        raise UnknownLabelError(label)

    def distances(self, features) -> np.ndarray:
        """``(N, n_profiles)`` distances, columns in sorted label order."""
        f = np.atleast_2d(features)
        return np.column_stack([p.distance(f) for p in self.profiles])

    def to_dict(self) -> dict:
        return {
            "features": list(FEATURE_NAMES),
            "accept_threshold": self.accept_threshold,
            "profiles": [
                {"label": p.label,
                 "centroid": p.centroid.as_array().tolist(),
                 "scale": p.scale.tolist()}
                for p in self.profiles
            ],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "FingerprintModel":
        if list(data["features"]) != list(FEATURE_NAMES):
            raise InvalidParameterError("model was built with a different feature set")
        profiles = [SensorProfile(p["label"], FeatureVector.from_array(p["centroid"]),
                                  np.array(p["scale"], dtype=np.float64))
                    for p in data["profiles"]]
        return cls(tuple(profiles), float(data["accept_threshold"]))


def _centre_and_scale(rows, pooled):
    # clipping is a no-op except for rounding: a constant feature gets its exact value
    centre = np.clip(rows.mean(axis=0), rows.min(axis=0), rows.max(axis=0))
    scale = np.sqrt(np.sum((rows - centre) ** 2, axis=0) / (len(rows) - 1))
    return centre, np.where(scale < SCALE_FLOOR, pooled, scale)


def _leave_one_out_distances(rows, pooled):
    out = np.empty(len(rows))
    for i in range(len(rows)):
        centre, scale = _centre_and_scale(np.delete(rows, i, axis=0), pooled)
        z = (rows[i] - centre) / scale
        out[i] = np.sqrt(np.sum(z * z))
    return out


def train(chunks: Sequence[NoiseChunk], accept_quantile: float = 0.99) -> FingerprintModel:
    """Per-label centroid and feature scale, plus the open-set threshold.

    ``scale`` is the per-label sample std (ddof=1) of each feature; entries
    below 1e-12 fall back to the pooled within-label std, then to 1e-12.
    ``accept_threshold`` is the ``accept_quantile`` quantile (linear
    interpolation) of every training chunk's distance to its own label's
    centroid and scale, each computed with that chunk left out. In-sample
    distances are optimistic, so new chunks from the same sensor would be
    rejected more often than ``1 - accept_quantile``.
    """
    if not 0 < accept_quantile <= 1:
        raise InvalidParameterError("accept_quantile must be in (0, 1]")
    labels = [c.source_label for c in chunks]
    if any(l is None for l in labels):
        raise InvalidParameterError("training chunks need a source_label")
    uniq = sorted(set(labels))
    if len(uniq) < 2:
        raise InvalidParameterError("identification needs at least 2 labels")
    feats = _features_of(chunks)
    labels = np.array(labels, dtype=object)
    groups = {}
    for lab in uniq:
        rows = feats[labels == lab]
        if len(rows) < 5:
            raise InsufficientDataError(f"label {lab!r} has {len(rows)} chunks, need >= 5")
        groups[lab] = rows
    pooled = np.sqrt(np.mean([rows.var(axis=0, ddof=1) for rows in groups.values()], axis=0))
    pooled = np.maximum(pooled, SCALE_FLOOR)
    profiles = []
    own_dist = []
    for lab in uniq:
        rows = groups[lab]
        centre, scale = _centre_and_scale(rows, pooled)
        prof = SensorProfile(lab, FeatureVector.from_array(centre), scale)
        profiles.append(prof)
        own_dist.append(_leave_one_out_distances(rows, pooled))
    threshold = float(np.quantile(np.concatenate(own_dist), accept_quantile, method="linear"))
    return FingerprintModel(tuple(profiles), threshold)


def classify(model: FingerprintModel, fv: FeatureVector | NoiseChunk):
    """Nearest profile ``(label, distance)``; exact ties go to the
    lexicographically smallest label."""
    if isinstance(fv, NoiseChunk):
        fv = compute_features(fv)
    d = model.distances(fv.as_array())[0]
    i = int(np.argmin(d))
    return model.profiles[i].label, float(d[i])


def classify_many(model: FingerprintModel, chunks) -> tuple[list[str], np.ndarray]:
    d = model.distances(_features_of(chunks))
    idx = np.argmin(d, axis=1)
    labels = model.labels
    return [labels[i] for i in idx], d[np.arange(len(idx)), idx]


@dataclass(frozen=True)
class AuthResult:
    accepted: bool
    distance: float

    def __bool__(self):
        return self.accepted


def authenticate(model: FingerprintModel, claimed_label: str, chunk) -> AuthResult:
    """Accept iff the distance to the claimed profile is within the threshold."""
    prof = model.profile(claimed_label)
    fv = compute_features(chunk) if isinstance(chunk, NoiseChunk) else chunk
    d = float(prof.distance(fv.as_array()))
    return AuthResult(d <= model.accept_threshold, d)


@dataclass(frozen=True, eq=False)
class EvalReport:
    labels: list
    confusion_matrix: np.ndarray
    accuracy: float
    tpr: dict
    fpr: dict

    def to_dict(self) -> dict:
        return {
            "labels": list(self.labels),
            "confusion_matrix": self.confusion_matrix.tolist(),
            "accuracy": self.accuracy,
            "tpr": dict(self.tpr),
            "fpr": dict(self.fpr),
        }


def _check_labels(model, chunks):
    known = set(model.labels)
    for c in chunks:
        if c.source_label not in known:
            raise UnknownLabelError(c.source_label)


def evaluate(model: FingerprintModel, chunks: Iterable[NoiseChunk]) -> EvalReport:
    """Confusion matrix (rows = true label, columns = predicted), accuracy and
    one-vs-rest TPR/FPR per label, all in sorted label order."""
    chunks = list(chunks)
    _check_labels(model, chunks)
    labels = model.labels
    index = {lab: i for i, lab in enumerate(labels)}
    predicted, _ = classify_many(model, chunks) if chunks else ([], None)
    cm = np.zeros((len(labels), len(labels)), dtype=np.int64)
    for c, pred in zip(chunks, predicted):
        cm[index[c.source_label], index[pred]] += 1
    total = int(cm.sum())
    accuracy = float(np.trace(cm) / total) if total else 0.0
    tpr, fpr = {}, {}
    for lab, i in index.items():
        pos = cm[i].sum()
        neg = total - pos
        tpr[lab] = float(cm[i, i] / pos) if pos else 0.0
        fpr[lab] = float((cm[:, i].sum() - cm[i, i]) / neg) if neg else 0.0
    return EvalReport(labels, cm, accuracy, tpr, fpr)


def authentication_rates(model: FingerprintModel, chunks: Iterable[NoiseChunk]) -> np.ndarray:
    """``A[c, t]``: fraction of true-label ``t`` chunks accepted when claiming
    ``c``. The diagonal is the genuine-accept rate, off-diagonal entries are
    impostor-accept rates."""
    chunks = list(chunks)
    _check_labels(model, chunks)
    labels = model.labels
    accepted = model.distances(_features_of(chunks)) <= model.accept_threshold
    truth = np.array([c.source_label for c in chunks], dtype=object)
    rates = np.zeros((len(labels), len(labels)))
    for t, lab in enumerate(labels):
        rows = accepted[truth == lab]
        if len(rows):
            rates[:, t] = rows.mean(axis=0)
    return rates
