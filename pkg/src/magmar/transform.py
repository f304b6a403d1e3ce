"""Mixed-difference probability integral transform for integer counts.

A count a with discrete marginal F is mapped to
``u = F(a-) + v * p(a)`` with auxiliary v ~ Uniform(0,1) (randomized
mode) or v = 0.5 (deterministic "mid" diagnostic mode).  The transform
is order preserving and, under the true marginal, exactly uniform.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import specfun as sf
from .copulas import U_EPS
from .rng import Rng


@dataclass(frozen=True)
class DiscreteMarginal:
    """Probability mass function on a sorted integer support."""

    support: np.ndarray        # sorted, unique integers
    probs: np.ndarray          # p(d) > 0, sums to 1

    def __post_init__(self):
        support = np.asarray(self.support)
        probs = np.asarray(self.probs, dtype=float)
        if len(support) == 0 or len(support) != len(probs):
            raise ValueError("support and probs must be nonempty and equal length")
        if np.any(np.diff(support) <= 0):
            raise ValueError("support must be strictly increasing")
        if np.any(probs < 0) or abs(probs.sum() - 1.0) > 1e-12:
            raise ValueError("probabilities must be nonnegative and sum to 1")
        object.__setattr__(self, "support", support)
        object.__setattr__(self, "probs", probs)
        cum = np.concatenate(([0.0], np.cumsum(probs)[:-1]))
        object.__setattr__(self, "_left_cum", cum)

    def index_of(self, values) -> np.ndarray:
        values = np.asarray(values)
        idx = np.searchsorted(self.support, values)
        ok = (idx < len(self.support)) & (self.support[np.minimum(idx, len(self.support) - 1)] == values)
        if not np.all(ok):
            bad = np.asarray(values)[~ok]
            raise ValueError(f"values outside marginal support: {np.unique(bad)!r}")
        return idx

    def left_cdf(self, values) -> np.ndarray:
        """F(d-): cumulative mass strictly below each value."""
        return self._left_cum[self.index_of(values)]

    def pmf(self, values) -> np.ndarray:
        return self.probs[self.index_of(values)]

    def extended(self, new_values, n_train: int) -> "DiscreteMarginal":
        """Support extension for out-of-sample counts unseen in training.

        Each unseen value receives mass 1/(2*n_train); the whole pmf is
        then renormalized.  Keeps out-of-sample log-scores finite.
        """
        new_values = np.unique(np.asarray(new_values))
        missing = new_values[~np.isin(new_values, self.support)]
        if len(missing) == 0:
            return self
        extra = np.full(len(missing), 1.0 / (2.0 * n_train))
        support = np.concatenate((self.support, missing))
        probs = np.concatenate((self.probs, extra))
        order = np.argsort(support)
        probs = probs[order] / probs.sum()
        return DiscreteMarginal(support[order], probs)


@dataclass(frozen=True)
class UniformSeries:
    """Mixed-difference transformed series plus everything needed to replay it."""

    u: np.ndarray
    v: np.ndarray
    a: np.ndarray
    marginal: DiscreteMarginal
    seed: int | None
    mode: str

    def __len__(self):
        return len(self.u)


def empirical_marginal(a) -> DiscreteMarginal:
    """Empirical pmf of an integer series: p(d) = count(d)/T."""
    a = np.asarray(a)
    if len(a) == 0:
        raise ValueError("empirical_marginal: empty input")
    support, counts = np.unique(a, return_counts=True)
    return DiscreteMarginal(support, counts / len(a))


def mixed_difference(a, marginal: DiscreteMarginal, seed: int | None = 0,
                     mode: str = "randomized") -> UniformSeries:
    """Apply u_t = F(a_t-) + v_t * p(a_t); v iid uniform or fixed 0.5."""
    a = np.asarray(a)
    if mode == "randomized":
        if seed is None:
            raise ValueError("randomized mode requires a seed")
        v = Rng(seed).uniforms(len(a))
    elif mode == "mid":
        v = np.full(len(a), 0.5)
    else:
        raise ValueError(f"unknown mode: {mode!r}")
    u = marginal.left_cdf(a) + v * marginal.pmf(a)
    u = np.clip(u, U_EPS, 1.0 - U_EPS)
    return UniformSeries(u=u, v=v, a=a.copy(), marginal=marginal, seed=seed, mode=mode)


def gaussianize(u) -> np.ndarray:
    """Elementwise standard-normal quantile of a series in (0,1)."""
    u = np.asarray(u, dtype=float)
    if np.any(u <= 0.0) or np.any(u >= 1.0):
        raise ValueError("gaussianize: inputs must lie in (0,1)")
    return np.asarray(sf.std_normal_quantile(u))
