"""Selection schemes: multinomial, residual and systematic resampling.

Each scheme turns a normalized weight vector ``rho`` into nonnegative
replicate counts ``n_j`` with ``sum n_j = H`` and ``E(n_j) = H rho_j``:

* multinomial -- ``H`` independent draws with probabilities ``rho_j``;
* residual -- ``floor(H rho_j)`` deterministic copies of particle ``j``
  completed by ``H^r = H - sum floor(H rho_j)`` multinomial draws on the
  fractional remainders;
* systematic -- a single uniform ``u``; ``n_j`` counts the points
  ``(u + i)/H`` falling in the j-th cumulative-weight interval, so every
  count differs from its quota ``H rho_j`` by less than one.

Counts, not copied particle arrays, are the primitive output; use
:func:`apply_selection` to materialize the resampled system.  The
``*_counts_batch`` variants draw many independent replicates at once and
share the single-draw code path; they exist because the distributional
test suites need millions of draws.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .core import ParticleSystem, RngStream

__all__ = [
    "SelectionCounts",
    "SelectionScheme",
    "apply_selection",
    "multinomial_counts",
    "multinomial_counts_batch",
    "residual_counts",
    "residual_counts_batch",
    "sample_counts",
    "systematic_counts",
    "systematic_counts_batch",
]


class SelectionScheme(str, Enum):
    """The supported selection schemes; NONE skips the selection step."""

    MULTINOMIAL = "multinomial"
    RESIDUAL = "residual"
    SYSTEMATIC = "systematic"
    NONE = "none"


@dataclass(frozen=True)
class SelectionCounts:
    """Replicate counts produced by one selection draw.

    ``residual_draws`` is the number of random draws made by the residual
    scheme (0 for multinomial and systematic, whose randomness is not
    split into a deterministic part).
    """

    counts: np.ndarray
    target: int
    residual_draws: int = 0

    def __post_init__(self):
        if int(self.counts.sum()) != self.target:
            raise ValueError("counts do not sum to the target size")


def _check_rho(rho: np.ndarray, size: int) -> np.ndarray:
    rho = np.asarray(rho, dtype=float)
    if rho.ndim != 1 or len(rho) == 0:
        raise ValueError("rho must be a nonempty vector")
    if size <= 0:
        raise ValueError("target size H must be positive")
    if np.any(rho < 0) or abs(rho.sum() - 1.0) > 1e-8:
        raise ValueError("rho must be normalized (nonnegative, summing to 1)")
    return rho


def multinomial_counts_batch(rho, size: int, rng: RngStream,
                             trials: int) -> np.ndarray:
    """Independent multinomial count rows, stacked as ``(trials, len(rho))``."""
    rho = _check_rho(rho, size)
    # numpy requires pvals summing to <= 1; push rounding slack onto the
    # largest atom so zero atoms stay exactly zero
    p = rho.copy()
    p[np.argmax(p)] += 1.0 - p.sum()
    return rng.generator.multinomial(size, p, size=trials)


def multinomial_counts(rho, size: int, rng: RngStream) -> SelectionCounts:
    """One multinomial selection draw: ``counts ~ Multinomial(H, rho)``."""
    counts = multinomial_counts_batch(rho, size, rng, 1)[0]
    return SelectionCounts(counts, size)


def residual_counts_batch(rho, size: int, rng: RngStream,
                          trials: int) -> np.ndarray:
    """Independent residual-scheme count rows, stacked."""
    rho = _check_rho(rho, size)
    quota = size * rho
    # quotas that are integral in real arithmetic may land a rounding error
    # below the integer; snap them so the deterministic stage stays exact
    near = np.abs(quota - np.round(quota)) <= 1e-9 * max(1.0, size)
    quota = np.where(near, np.round(quota), quota)
    floors = np.floor(quota).astype(np.int64)
    while floors.sum() > size:  # pathological rho normalization slack
        floors[np.argmax(floors)] -= 1
    n_res = size - int(floors.sum())
    out = np.tile(floors, (trials, 1))
    if n_res > 0:
        frac = np.clip(quota - floors, 0.0, None)
        frac /= frac.sum()
        out += rng.generator.multinomial(n_res, frac, size=trials)
    return out


def residual_counts(rho, size: int, rng: RngStream) -> SelectionCounts:
    """One residual selection draw.

    Reproduces ``floor(H rho_j)`` copies of each particle deterministically,
    then completes the vector with ``H^r`` multinomial draws on the
    normalized fractional parts.  When every quota is integral the random
    stage is skipped entirely.
    """
    rho = _check_rho(rho, size)
    n_res = size - int(np.floor(size * rho).sum())
    counts = residual_counts_batch(rho, size, rng, 1)[0]
    return SelectionCounts(counts, size, residual_draws=n_res)


def systematic_counts_batch(rho, size: int, rng: RngStream,
                            trials: int) -> np.ndarray:
    """Independent systematic-scheme count rows, stacked."""
    rho = _check_rho(rho, size)
    edges = np.cumsum(rho)
    edges[-1] = 1.0  # guard against cumsum rounding below 1
    u = rng.generator.random(trials)
    m = len(rho)
    out = np.empty((trials, m), dtype=np.int64)
    # chunked so that the (chunk, H) position matrix stays small
    chunk = max(1, int(4_000_000 // max(size, 1)))
    offsets = np.arange(size)
    for lo in range(0, trials, chunk):
        hi = min(lo + chunk, trials)
        pos = (u[lo:hi, None] + offsets) / size
        idx = np.searchsorted(edges, pos, side="right")
        rows = np.arange(hi - lo)[:, None]
        flat = np.bincount((rows * m + idx).ravel(), minlength=(hi - lo) * m)
        out[lo:hi] = flat.reshape(hi - lo, m)
    return out


def systematic_counts(rho, size: int, rng: RngStream) -> SelectionCounts:
    """One systematic selection draw from a single uniform variate.

    Cumulative-weight intervals are built left to right in particle-index
    order; the scheme guarantees ``floor(H rho_j) <= n_j <= ceil(H rho_j)``
    on every draw.
    """
    counts = systematic_counts_batch(rho, size, rng, 1)[0]
    return SelectionCounts(counts, size)


_SAMPLERS = {
    SelectionScheme.MULTINOMIAL: multinomial_counts,
    SelectionScheme.RESIDUAL: residual_counts,
    SelectionScheme.SYSTEMATIC: systematic_counts,
}


def sample_counts(scheme: SelectionScheme, rho, size: int,
                  rng: RngStream) -> SelectionCounts:
    """Dispatch one selection draw for the given scheme."""
    try:
        return _SAMPLERS[SelectionScheme(scheme)](rho, size, rng)
    except KeyError:
        raise ValueError(f"scheme {scheme!r} does not draw counts") from None


def apply_selection(system: ParticleSystem,
                    counts: SelectionCounts) -> ParticleSystem:
    """Replace the weighted system by the resampled, unit-weight system.

    Particle ``j`` appears ``counts.counts[j]`` times in the output; the
    time index is unchanged and all weights are reset to one.
    """
    if counts.target != system.size:
        raise ValueError("count/size mismatch between counts and system")
    idx = np.repeat(np.arange(system.size), counts.counts)
    return ParticleSystem.unit(system.particles[idx], t=system.t)
