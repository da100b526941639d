"""Per-operator continuous-parameter samplers: a diagonal Gaussian proposal
fit by maximum likelihood, plus a k-nearest-neighbor accept model for
rejection sampling."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np

SIGMA_MIN = 1e-3
DEFAULT_MAX_ATTEMPTS = 100


class EmptyDataset(ValueError):
    """Raised when fitting a sampler with no positive examples."""


class Exhausted(RuntimeError):
    """Raised when rejection sampling uses up its attempt budget."""


@dataclass
class SamplerDataset:
    """Training data for one operator's sampler.

    Inputs are the concatenated feature vectors of the operator's bound
    objects; outputs are the continuous parameters used in the transition.
    Negatives come from same-skill transitions outside the equivalence class.
    """
    positives: List[Tuple[np.ndarray, np.ndarray]]
    negatives: List[Tuple[np.ndarray, np.ndarray]]
    theta_dim: int

    def __post_init__(self) -> None:
        for x, theta in self.positives + self.negatives:
            assert theta.shape == (self.theta_dim,)
            assert x.ndim == 1


@dataclass(frozen=True)
class Sampler:
    """Gaussian proposal over theta with k-NN rejection.

    With continuous_dim 0 the sampler degenerates to returning the empty
    vector and never consults the accept model. When there are no negatives
    the accept model accepts everything (no signal to reject on).
    """
    mean: np.ndarray
    var: np.ndarray
    neighbors: Tuple[Tuple[Tuple[float, ...], Tuple[float, ...], bool], ...]
    k: int = 5
    sigma_min: float = SIGMA_MIN
    feat_scale: Optional[np.ndarray] = None

    @property
    def theta_dim(self) -> int:
        return len(self.mean)

    def accepts(self, x: np.ndarray, theta: np.ndarray) -> bool:
        if not self.neighbors or not any(not lab for *_, lab in self.neighbors):
            return True
        point = np.concatenate([x, theta])
        scale = self.feat_scale
        if scale is None:
            scale = np.ones_like(point)
        scored = []
        for nx, ntheta, label in self.neighbors:
            other = np.concatenate([np.asarray(nx), np.asarray(ntheta)])
            dist = float(np.linalg.norm((point - other) / scale))
            scored.append((dist, label))
        scored.sort(key=lambda pair: pair[0])
        k = min(self.k, len(scored))
        votes = [label for _, label in scored[:k]]
        return sum(votes) * 2 > len(votes)

    def sample(self, x: np.ndarray, rng: np.random.Generator,
               max_attempts: int = DEFAULT_MAX_ATTEMPTS) -> np.ndarray:
        if self.theta_dim == 0:
            return np.zeros(0)
        for _ in range(max_attempts):
            theta = rng.normal(self.mean, np.sqrt(self.var))
            if self.accepts(x, theta):
                return theta
        raise Exhausted(f"no accepted draw in {max_attempts} attempts")


def fit(dataset: SamplerDataset, k: int = 5,
        sigma_min: float = SIGMA_MIN) -> Sampler:
    """Maximum-likelihood diagonal Gaussian over the positives, with a
    variance floor, plus the stored labeled neighbor set."""
    if not dataset.positives:
        raise EmptyDataset("sampler fit requires at least one positive")
    if k % 2 == 0:
        raise ValueError("k must be odd")
    if dataset.theta_dim == 0:
        return Sampler(np.zeros(0), np.zeros(0), (), k=k,
                       sigma_min=sigma_min)
    thetas = np.stack([theta for _, theta in dataset.positives])
    mean = thetas.mean(axis=0)
    var = np.maximum(thetas.var(axis=0), sigma_min)
    neighbors = []
    for x, theta, label in (
            [(x, t, True) for x, t in dataset.positives] +
            [(x, t, False) for x, t in dataset.negatives]):
        neighbors.append((tuple(float(v) for v in x),
                          tuple(float(v) for v in theta), label))
    # Standardize distances by the per-dimension spread of the stored points.
    pts = np.stack([np.concatenate([np.asarray(nx), np.asarray(nt)])
                    for nx, nt, _ in neighbors])
    scale = np.maximum(pts.std(axis=0), 1e-6)
    return Sampler(mean, var, tuple(neighbors), k=k, sigma_min=sigma_min,
                   feat_scale=scale)


def sampler_input(state_data: Sequence[np.ndarray]) -> np.ndarray:
    """Concatenate object feature vectors in operator-parameter order."""
    if not state_data:
        return np.zeros(0)
    return np.concatenate([np.asarray(v, dtype=float) for v in state_data])


def sampler_to_json(sampler: Sampler) -> dict:
    return {
        "mean": [float(v) for v in sampler.mean],
        "var": [float(v) for v in sampler.var],
        "neighbors": [[list(nx), list(nt), label]
                      for nx, nt, label in sampler.neighbors],
        "k": sampler.k,
        "sigma_min": sampler.sigma_min,
        "feat_scale": (None if sampler.feat_scale is None
                       else [float(v) for v in sampler.feat_scale]),
    }


def sampler_from_json(data: dict) -> Sampler:
    return Sampler(
        mean=np.asarray(data["mean"], dtype=float),
        var=np.asarray(data["var"], dtype=float),
        neighbors=tuple((tuple(nx), tuple(nt), bool(label))
                        for nx, nt, label in data["neighbors"]),
        k=int(data["k"]),
        sigma_min=float(data["sigma_min"]),
        feat_scale=(None if data.get("feat_scale") is None
                    else np.asarray(data["feat_scale"], dtype=float)),
    )
