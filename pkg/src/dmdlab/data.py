"""Synthetic conditional Gaussian mixtures with exact moment formulas.

These mixtures play the real-data role: the teacher trains on them, the GAN
regularizer draws real batches from them, and evaluation compares generated
clouds against held-out draws.
"""

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np


@dataclass
class Component:
    label: int
    center: np.ndarray
    cov: np.ndarray  # diagonal entries
    weight: float


@dataclass
class MixtureSpec:
    dim: int
    label_count: int
    components: list

    def validate(self) -> None:
        if self.dim < 1 or self.label_count < 1:
            raise ValueError("dim and label_count must be positive")
        totals = {}
        for c in self.components:
            if not 0 <= c.label < self.label_count:
                raise ValueError(f"component label {c.label} out of range")
            if c.center.shape != (self.dim,) or c.cov.shape != (self.dim,):
                raise ValueError("component center/cov must match dim")
            if np.any(c.cov <= 0):
                raise ValueError("covariances must be strictly positive")
            if c.weight <= 0:
                raise ValueError("weights must be positive")
            totals[c.label] = totals.get(c.label, 0.0) + c.weight
        for label in range(self.label_count):
            if label not in totals:
                raise ValueError(f"label {label} has no components")
            if abs(totals[label] - 1.0) > 1e-9:
                raise ValueError(f"label {label} weights sum to {totals[label]}, not 1")

    def components_for(self, label: int) -> list:
        if not 0 <= label < self.label_count:
            raise ValueError(f"unknown label {label}")
        return [c for c in self.components if c.label == label]

    def to_json(self) -> dict:
        return {
            "dim": self.dim,
            "labels": self.label_count,
            "components": [
                {"label": c.label, "center": list(map(float, c.center)),
                 "cov": list(map(float, c.cov)), "weight": float(c.weight)}
                for c in self.components
            ],
        }

    @classmethod
    def from_json(cls, obj: dict) -> "MixtureSpec":
        spec = cls(
            dim=int(obj["dim"]),
            label_count=int(obj["labels"]),
            components=[
                Component(label=int(c["label"]),
                          center=np.asarray(c["center"], dtype=float),
                          cov=np.asarray(c["cov"], dtype=float),
                          weight=float(c["weight"]))
                for c in obj["components"]
            ],
        )
        spec.validate()
        return spec

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_json(), indent=2) + "\n")

    @classmethod
    def load(cls, path) -> "MixtureSpec":
        return cls.from_json(json.loads(Path(path).read_text()))


@dataclass
class LabeledBatch:
    points: np.ndarray  # (n, dim)
    labels: np.ndarray  # (n,)


def gmm8(sigma: float = 0.15, radius: float = 2.0) -> MixtureSpec:
    """Default benchmark: 8 modes on a circle, 2 per label, 4 labels.

    Label 3 gets asymmetric mode weights (0.7/0.3) so that guidance scales
    above 1 visibly sharpen its conditional.
    """
    comps = []
    for label in range(4):
        weights = (0.7, 0.3) if label == 3 else (0.5, 0.5)
        for j, w in enumerate(weights):
            angle = (2 * label + j) * np.pi / 4
            comps.append(Component(
                label=label,
                center=radius * np.array([np.cos(angle), np.sin(angle)]),
                cov=np.array([sigma ** 2, sigma ** 2]),
                weight=w,
            ))
    spec = MixtureSpec(dim=2, label_count=4, components=comps)
    spec.validate()
    return spec


def sample_points_for_labels(spec: MixtureSpec, labels: np.ndarray,
                             rng: np.random.Generator) -> np.ndarray:
    """Draw one point per given label (component by weight, then Gaussian)."""
    labels = np.asarray(labels)
    points = np.empty((len(labels), spec.dim))
    for label in range(spec.label_count):
        idx = np.nonzero(labels == label)[0]
        if idx.size == 0:
            continue
        comps = spec.components_for(label)
        w = np.array([c.weight for c in comps])
        choice = rng.choice(len(comps), size=idx.size, p=w / w.sum())
        eps = rng.standard_normal((idx.size, spec.dim))
        centers = np.stack([comps[k].center for k in choice])
        stds = np.sqrt(np.stack([comps[k].cov for k in choice]))
        points[idx] = centers + stds * eps
    return points


def sample_dataset(spec: MixtureSpec, n: int, rng: np.random.Generator,
                   label_priors=None) -> LabeledBatch:
    """Draw n i.i.d. labelled points: label uniform (or by priors), component
    by weight within the label, point Gaussian around the component center."""
    if n <= 0:
        raise ValueError("n must be positive")
    spec.validate()
    if label_priors is None:
        labels = rng.integers(0, spec.label_count, size=n)
    else:
        p = np.asarray(label_priors, dtype=float)
        if p.shape != (spec.label_count,) or np.any(p < 0):
            raise ValueError("label_priors must be a nonnegative vector per label")
        labels = rng.choice(spec.label_count, size=n, p=p / p.sum())
    return LabeledBatch(points=sample_points_for_labels(spec, labels, rng),
                        labels=labels)


def target_stats(spec: MixtureSpec, label: int):
    """Exact mixture mean and per-coordinate variance for one label."""
    comps = spec.components_for(label)
    w = np.array([c.weight for c in comps])
    centers = np.stack([c.center for c in comps])
    covs = np.stack([c.cov for c in comps])
    mean = (w[:, None] * centers).sum(axis=0)
    second = (w[:, None] * (covs + centers ** 2)).sum(axis=0)
    return mean, second - mean ** 2


def expected_sample_stats(spec: MixtureSpec, label=None):
    """Expected per-sample statistics ( E[mean over coords], E[var over coords] ).

    The per-sample variance is the population variance across one point's
    coordinates; its expectation is exact for diagonal Gaussian mixtures:
    E[var(x)] = (1/d) sum_j (s_j^2 + c_j^2) - (1/d^2) sum_j s_j^2 - mean(c)^2
    per component, mixed by weight. label=None pools labels uniformly.
    """
    if label is None:
        pairs = [expected_sample_stats(spec, lb) for lb in range(spec.label_count)]
        return (float(np.mean([p[0] for p in pairs])),
                float(np.mean([p[1] for p in pairs])))
    comps = spec.components_for(label)
    d = spec.dim
    mu = 0.0
    var = 0.0
    for c in comps:
        cmean = c.center.mean()
        mu += c.weight * cmean
        e_var = ((c.cov + c.center ** 2).sum() / d
                 - c.cov.sum() / d ** 2 - cmean ** 2)
        var += c.weight * e_var
    return float(mu), float(var)
