"""Finite probability vectors over the non-negative integers."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

NORM_TOL = 1e-9


@dataclass(frozen=True, eq=False)
class ProbDist:
    """Normalized pmf on ``0..n_max``.

    ``tail`` is the probability mass that lay beyond ``n_max`` before the
    vector was renormalized (zero for empirical histograms).
    """

    probs: np.ndarray
    tail: float = 0.0

    def __post_init__(self):
        p = np.array(self.probs, dtype=float, copy=True).ravel()
        if p.size == 0:
            raise ValueError("ProbDist needs at least one entry")
        if not np.all(np.isfinite(p)):
            raise ValueError("ProbDist entries must be finite")
        if np.any(p < 0):
            raise ValueError("ProbDist entries must be non-negative")
        s = p.sum()
        if abs(s - 1.0) > NORM_TOL:
            raise ValueError(f"ProbDist sums to {s!r}, not 1")
        p.setflags(write=False)
        object.__setattr__(self, "probs", p)

    @classmethod
    def from_weights(cls, weights, tail: float = 0.0) -> ProbDist:
        """Renormalize non-negative weights into a distribution."""
        w = np.asarray(weights, dtype=float)
        # round-off in log-space evaluation can leave entries at -1e-300 or so
        w = np.where(w < 0, 0.0, w)
        s = w.sum()
        if not s > 0:
            raise ValueError("weights have no mass")
        return cls(w / s, tail=tail)

    @classmethod
    def from_counts(cls, counts) -> ProbDist:
        return cls.from_weights(np.asarray(counts, dtype=float))

    @property
    def n_max(self) -> int:
        return self.probs.size - 1

    def __len__(self):
        return self.probs.size

    def __getitem__(self, n):
        return self.probs[n]

    def support(self) -> np.ndarray:
        return np.arange(self.probs.size)

    def mean(self) -> float:
        return float(np.dot(self.support(), self.probs))

    def variance(self) -> float:
        n = self.support()
        mu = self.mean()
        return float(np.dot((n - mu) ** 2, self.probs))

    def padded(self, size: int) -> np.ndarray:
        """Probabilities zero-padded (never truncated) to ``size`` entries."""
        out = np.zeros(max(size, self.probs.size))
        out[: self.probs.size] = self.probs
        return out

    def __eq__(self, other):
        if not isinstance(other, ProbDist):
            return NotImplemented
        size = max(len(self), len(other))
        return bool(np.array_equal(self.padded(size), other.padded(size)))

    def __repr__(self):
        return f"ProbDist(n_max={self.n_max}, mean={self.mean():.6g})"
