"""Particle systems, weighted estimators and deterministic random streams.

A particle system is a weighted cloud of points approximating one member of
a sequence of target distributions.  Weights are kept in log scale
internally, because they are only defined up to a multiplicative constant
and products of per-step weights underflow quickly in linear scale.  All
randomness flows through :class:`RngStream` values, so any computation is
bit-reproducible from a ``(seed, stream)`` pair.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

__all__ = [
    "DegenerateWeightsError",
    "NonFiniteFunctionalError",
    "Functional",
    "ParticleSystem",
    "RngStream",
    "effective_sample_size",
    "normalize_weights",
    "unweighted_estimate",
    "weighted_estimate",
]


class DegenerateWeightsError(ValueError):
    """All particle weights are zero; no normalization exists."""


class NonFiniteFunctionalError(ValueError):
    """A functional produced a NaN or infinite value on the support."""


class RngStream:
    """Deterministic random stream identified by ``(seed, stream)``.

    Wraps a counter-based Philox bit generator keyed by the pair, so that

    * identical ``(seed, stream)`` pairs reproduce the same output sequence
      bit for bit, independently of platform, and
    * distinct stream ids give statistically independent streams.

    Parameters
    ----------
    seed : int
        64-bit base seed shared by a family of streams.
    stream : int, optional
        Stream id within the family (default 0).
    """

    def __init__(self, seed: int, stream: int = 0):
        self.seed = int(seed)
        self.stream = int(stream)
        key = np.array([self.seed, self.stream], dtype=np.uint64)
        self._bitgen = np.random.Philox(key=key)
        self.generator = np.random.Generator(self._bitgen)

    @property
    def position(self) -> int:
        """Number of 128-bit blocks consumed so far."""
        return int(self._bitgen.state["state"]["counter"][0])

    def substream(self, k: int) -> "RngStream":
        """Derive an independent child stream; children of distinct ``k`` or
        distinct parents never collide (the id space is split by bit 63)."""
        child = (np.uint64(self.stream) * np.uint64(0x9E3779B97F4A7C15)
                 + np.uint64(k) + np.uint64(1)) | np.uint64(1 << 63)
        return RngStream(self.seed, int(child))

    def __repr__(self) -> str:
        return f"RngStream(seed={self.seed}, stream={self.stream})"


@dataclass(frozen=True)
class Functional:
    """A test function evaluated on particle states.

    Parameters
    ----------
    fn : callable
        Vectorized evaluation rule: maps an ``(H, ...)`` state array to an
        ``(H,)`` or ``(H, dim)`` array of values.  Must be deterministic and
        finite on the model's support.
    dim : int
        Output arity ``d``.
    variation : float
        Declared supremum of ``|fn(x) - fn(x')|`` over the support
        (``inf`` when unbounded); used by stability bounds.
    name : str
        Optional label used in reports.
    """

    fn: Callable[[np.ndarray], np.ndarray]
    dim: int = 1
    variation: float = float("inf")
    name: str = ""

    def __call__(self, states: np.ndarray) -> np.ndarray:
        """Evaluate on a state array, returning an ``(H, dim)`` float array."""
        vals = np.asarray(self.fn(states), dtype=float)
        if vals.ndim == 1:
            vals = vals[:, None]
        if vals.shape[1] != self.dim:
            raise ValueError(
                f"functional '{self.name}' returned arity {vals.shape[1]}, "
                f"declared {self.dim}")
        if not np.all(np.isfinite(vals)):
            raise NonFiniteFunctionalError(
                f"non-finite functional value from '{self.name}'")
        return vals


def _check_log_weights(log_weights: np.ndarray) -> None:
    if np.any(np.isnan(log_weights)) or np.any(log_weights == np.inf):
        raise ValueError("non-finite weight")
    if not np.any(log_weights > -np.inf):
        raise DegenerateWeightsError("degenerate weights")


@dataclass
class ParticleSystem:
    """Weighted particle cloud at a fixed time index.

    ``particles`` holds one row (or one integer index) per particle;
    ``log_weights`` the unnormalized weights in log scale.  ``-inf`` encodes
    a zero weight; at least one weight must be positive.

    Use :meth:`from_weights` to build from linear-scale weights and
    :meth:`unit` for a uniformly weighted cloud (the state after a
    selection step).
    """

    particles: np.ndarray
    log_weights: np.ndarray
    t: int = 0

    def __post_init__(self):
        self.particles = np.asarray(self.particles)
        self.log_weights = np.asarray(self.log_weights, dtype=float)
        if len(self.particles) != len(self.log_weights):
            raise ValueError("particles and weights must have equal length")
        _check_log_weights(self.log_weights)

    @classmethod
    def from_weights(cls, particles, weights, t: int = 0) -> "ParticleSystem":
        """Build from linear-scale nonnegative weights."""
        w = np.asarray(weights, dtype=float)
        if np.any(w < 0) or np.any(~np.isfinite(w)):
            raise ValueError("weights must be finite and nonnegative")
        with np.errstate(divide="ignore"):
            return cls(np.asarray(particles), np.log(w), t)

    @classmethod
    def unit(cls, particles, t: int = 0) -> "ParticleSystem":
        """Uniformly weighted system (all weights equal to one)."""
        return cls(np.asarray(particles), np.zeros(len(particles)), t)

    @property
    def size(self) -> int:
        return len(self.log_weights)

    @property
    def weights(self) -> np.ndarray:
        """Unnormalized weights in linear scale (may underflow; prefer
        :meth:`normalized_weights` for computation)."""
        return np.exp(self.log_weights)

    def normalized_weights(self) -> np.ndarray:
        """Normalized weights, computed via a max-shift in log scale."""
        _check_log_weights(self.log_weights)
        shifted = np.exp(self.log_weights - self.log_weights.max())
        return shifted / shifted.sum()

    def log_mean_weight(self) -> float:
        """Log of the average unnormalized weight, ``log(H^-1 sum w_j)``."""
        m = self.log_weights.max()
        return float(m + np.log(np.exp(self.log_weights - m).sum() / self.size))


def weighted_estimate(system: ParticleSystem, phi: Functional):
    """Self-normalized weighted average ``sum w_j phi_j / sum w_j``.

    Invariant under positive rescaling of the weight array.  Returns a float
    for arity-1 functionals, else a ``(dim,)`` array.

    Raises
    ------
    DegenerateWeightsError
        If every weight is zero.
    NonFiniteFunctionalError
        If the functional evaluates to NaN or infinity.
    """
    rho = system.normalized_weights()
    vals = phi(system.particles)
    est = (rho[:, None] * vals).sum(axis=0)
    return float(est[0]) if phi.dim == 1 else est


def unweighted_estimate(system: ParticleSystem, phi: Functional):
    """Plain average ``H^-1 sum phi_j``, ignoring weights.

    Intended for post-selection systems, whose weights are all one.
    """
    vals = phi(system.particles)
    est = vals.mean(axis=0)
    return float(est[0]) if phi.dim == 1 else est


def normalize_weights(system: ParticleSystem) -> np.ndarray:
    """Normalized weight vector ``rho_j = w_j / sum w_j`` (order preserved)."""
    return system.normalized_weights()


def effective_sample_size(rho: np.ndarray) -> float:
    """Effective sample size ``1 / sum rho_j**2`` of normalized weights.

    Equals ``H`` exactly for uniform weights and 1 when a single particle
    carries all the mass.  Diagnostic only; the filters never use it to
    trigger selection.
    """
    rho = np.asarray(rho, dtype=float)
    if abs(rho.sum() - 1.0) > 1e-8 or np.any(rho < 0):
        raise ValueError("rho must be a normalized weight vector")
    return float(1.0 / (rho ** 2).sum())
