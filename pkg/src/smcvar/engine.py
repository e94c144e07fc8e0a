"""Filter drivers: the mutation/correction/selection loop and its variants.

:func:`run_filter` implements the generic loop.  With an identity kernel it
is sequential importance resampling; with a kernel that leaves the previous
target invariant it is the resample-move algorithm; with the selection
schedule ``"never"`` it degenerates to sequential importance sampling,
whose weights accumulate multiplicatively (see :func:`run_sis`).
:func:`run_replicates` runs ``k`` independent copies on separate random
streams to estimate the sampling variance of any reported estimate, and
:func:`run_marginal_pair` runs a joint filter and its marginalized
counterpart side by side.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence, Union

import numpy as np

from .core import (DegenerateWeightsError, Functional, ParticleSystem,
                   RngStream, effective_sample_size)
from .resampling import SelectionScheme, apply_selection, sample_counts

__all__ = [
    "FilterConfig",
    "FilterTrace",
    "ModelSpec",
    "ReplicateSummary",
    "WeightCollapseError",
    "resolve_threads",
    "run_filter",
    "run_marginal_pair",
    "run_replicates",
    "run_sis",
]


class WeightCollapseError(RuntimeError):
    """Every particle weight vanished at some step."""

    def __init__(self, t: int, replicate: Optional[int] = None):
        self.t = t
        self.replicate = replicate
        where = f" in replicate {replicate}" if replicate is not None else ""
        super().__init__(f"weight collapse at t={t}{where}")


@dataclass(frozen=True)
class ModelSpec:
    """A target sequence presented to the filter drivers.

    All callables are vectorized over particles.

    Parameters
    ----------
    initial_sampler : callable
        ``(H, generator) -> states``; iid draws from the instrumental
        distribution used at step 0.
    kernel : callable
        ``(t, states, generator) -> states``; the mutation kernel applied
        at steps ``t >= 1``.
    log_weight : callable
        ``(t, proposed_states, parent_states_or_None) -> (H,)`` array of
        log unnormalized correction weights.  Called with ``t=0`` and
        parent ``None`` for the initial correction; may ignore the parent
        when the weight depends on the proposed point only.
    dimension : str
        Support descriptor: ``"fixed"`` (constant space), ``"path"``
        (growing product space, states store the suffix the weight needs)
        or ``"product"`` (fixed parameter times a growing latent path).
    oracle : callable, optional
        ``(t, Functional) -> exact expectation`` under the step-``t``
        target, when one is available.
    invariant_kernel : bool
        Declares that the kernel leaves the previous target invariant
        (resample-move); the weight function is then the static-target one.
    xi_projection : callable, optional
        For joint models of a marginalizable pair: maps a joint state
        array to the coordinate the marginal filter tracks.
    """

    initial_sampler: Callable[[int, np.random.Generator], np.ndarray]
    kernel: Optional[Callable[[int, np.ndarray, np.random.Generator], np.ndarray]]
    log_weight: Callable[[int, np.ndarray, Optional[np.ndarray]], np.ndarray]
    dimension: str = "fixed"
    oracle: Optional[Callable[[int, Functional], np.ndarray]] = None
    invariant_kernel: bool = False
    xi_projection: Optional[Callable[[np.ndarray], np.ndarray]] = None
    name: str = ""


Schedule = Union[str, Sequence[int]]


@dataclass
class FilterConfig:
    """Run parameters for one filter.

    ``schedule`` is ``"every"``, ``"never"`` or an explicit collection of
    step indices at which selection happens.  ``"never"`` forces the scheme
    ``NONE`` and vice versa.
    """

    particles: int
    steps: int
    functionals: Sequence[Functional]
    scheme: SelectionScheme = SelectionScheme.MULTINOMIAL
    schedule: Schedule = "every"
    seed: int = 0
    stream: int = 0
    eval_times: Optional[Sequence[int]] = None
    store_paths: bool = False
    threads: int = 0

    def __post_init__(self):
        if self.particles <= 0 or self.steps < 0:
            raise ValueError("particles must be positive and steps >= 0")
        self.scheme = SelectionScheme(self.scheme)
        if isinstance(self.schedule, str):
            if self.schedule not in ("every", "never"):
                raise ValueError("schedule must be 'every', 'never' or a "
                                 "collection of step indices")
        else:
            times = set(int(t) for t in self.schedule)
            if not times <= set(range(self.steps + 1)):
                raise ValueError("explicit selection times must lie in 0..T")
            self.schedule = times
        if (self.schedule == "never") != (self.scheme == SelectionScheme.NONE):
            raise ValueError("schedule 'never' requires scheme 'none' and "
                             "conversely")

    def selects_at(self, t: int) -> bool:
        if self.schedule == "every":
            return True
        if self.schedule == "never":
            return False
        return t in self.schedule


@dataclass
class FilterTrace:
    """Per-step output of one filter run.

    ``weighted[t, i]`` is the self-normalized estimate of functional ``i``
    computed before any selection at step ``t`` and ``unweighted[t, i]``
    the plain average after selection; the latter is NaN at steps where no
    selection occurred (``selected[t]`` is False there).
    """

    times: np.ndarray
    weighted: np.ndarray          # (T+1, n_func, d_max)
    unweighted: np.ndarray        # (T+1, n_func, d_max), NaN if not selected
    selected: np.ndarray          # (T+1,) bool
    ess: np.ndarray               # (T+1,)
    log_mean_weight: np.ndarray   # (T+1,)
    max_normalized_weight: np.ndarray  # (T+1,)
    functionals: Sequence[Functional]
    paths: Optional[np.ndarray] = None

    def final_weighted(self, i: int = 0):
        d = self.functionals[i].dim
        vals = self.weighted[-1, i, :d]
        return float(vals[0]) if d == 1 else vals

    def final_unweighted(self, i: int = 0):
        d = self.functionals[i].dim
        vals = self.unweighted[-1, i, :d]
        return float(vals[0]) if d == 1 else vals


def _estimates(rho: np.ndarray, states: np.ndarray,
               functionals: Sequence[Functional], d_max: int) -> np.ndarray:
    out = np.full((len(functionals), d_max), np.nan)
    for i, phi in enumerate(functionals):
        vals = phi(states)
        out[i, :phi.dim] = rho @ vals
    return out


def run_filter(model: ModelSpec, config: FilterConfig) -> FilterTrace:
    """Run the mutation/correction/selection loop for ``config.steps`` steps.

    Step 0 draws from the instrumental distribution and applies the initial
    correction weight.  At every step the weighted (pre-selection) estimate
    of each functional is recorded; when selection occurs the unweighted
    (post-selection) estimate is recorded as well.  Estimates use the
    cumulative weights carried since the last selection, so an explicit
    schedule (including "never") accumulates weights multiplicatively.

    Raises
    ------
    WeightCollapseError
        If every weight vanishes at some step, carrying the step index.
    """
    H, T = config.particles, config.steps
    rng = RngStream(config.seed, config.stream)
    gen = rng.generator
    n_func = len(config.functionals)
    d_max = max((phi.dim for phi in config.functionals), default=1)

    weighted = np.full((T + 1, n_func, d_max), np.nan)
    unweighted = np.full((T + 1, n_func, d_max), np.nan)
    selected = np.zeros(T + 1, dtype=bool)
    ess = np.full(T + 1, np.nan)
    log_mean_w = np.full(T + 1, np.nan)
    max_rho = np.full(T + 1, np.nan)
    eval_times = (None if config.eval_times is None
                  else set(int(t) for t in config.eval_times))
    history: list[np.ndarray] = []

    states = model.initial_sampler(H, gen)
    carried = np.zeros(H)

    for t in range(T + 1):
        if t > 0:
            parents = states
            states = model.kernel(t, parents, gen)
            incr = np.asarray(model.log_weight(t, states, parents), dtype=float)
        else:
            incr = np.asarray(model.log_weight(0, states, None), dtype=float)
        if np.any(np.isnan(incr)) or np.any(incr == np.inf):
            raise ValueError(f"non-finite weight at t={t}")
        log_w = carried + incr
        if not np.any(log_w > -np.inf):
            raise WeightCollapseError(t)

        system = ParticleSystem(states, log_w, t=t)
        rho = system.normalized_weights()
        ess[t] = effective_sample_size(rho)
        log_mean_w[t] = system.log_mean_weight()
        max_rho[t] = rho.max()
        if eval_times is None or t in eval_times:
            weighted[t] = _estimates(rho, states, config.functionals, d_max)
        if config.store_paths:
            history.append(states.copy())

        if config.selects_at(t):
            counts = sample_counts(config.scheme, rho, H, rng)
            idx = np.repeat(np.arange(H), counts.counts)
            states = states[idx]
            carried = np.zeros(H)
            selected[t] = True
            if config.store_paths:
                history = [h[idx] for h in history]
            if eval_times is None or t in eval_times:
                unweighted[t] = _estimates(np.full(H, 1.0 / H), states,
                                           config.functionals, d_max)
        else:
            carried = log_w

    paths = np.stack(history, axis=0) if config.store_paths else None
    return FilterTrace(np.arange(T + 1), weighted, unweighted, selected,
                       ess, log_mean_w, max_rho, config.functionals, paths)


def run_sis(model: ModelSpec, config: FilterConfig) -> FilterTrace:
    """Sequential importance sampling: the loop with no selection step.

    Weights accumulate in log scale across steps.  The trace exposes the
    weighted estimates together with the maximum normalized weight at each
    step, the natural degeneracy diagnostic.
    """
    if config.schedule != "never":
        raise ValueError("run_sis requires schedule 'never'")
    return run_filter(model, config)


@dataclass
class ReplicateSummary:
    """Cross-replicate summary of ``k`` independent filter runs.

    ``final_estimates[i]`` collects the ``k`` final weighted estimates of
    functional ``i``; ``variance_trajectory`` is the empirical variance of
    the weighted estimate across replicates at every step (and
    ``unweighted_variance_trajectory`` the post-selection analogue, NaN
    where no selection occurred).
    """

    replicates: int
    final_estimates: np.ndarray          # (n_func, k, d_max)
    pooled_mean: np.ndarray              # (n_func, d_max)
    empirical_variance: np.ndarray       # (n_func, d_max) at final step
    variance_trajectory: np.ndarray      # (T+1, n_func, d_max)
    unweighted_variance_trajectory: np.ndarray
    traces: Sequence[FilterTrace]


def resolve_threads(threads: int = 0) -> int:
    """Thread-count resolution: explicit value, else ``SMC_THREADS``, else 1."""
    if threads and threads > 0:
        return int(threads)
    env = os.environ.get("SMC_THREADS", "")
    try:
        return max(1, int(env))
    except ValueError:
        return 1


def _pool_map(fn, items, threads: int):
    if threads <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


def run_replicates(model: ModelSpec, config: FilterConfig, k: int,
                   base_seed: Optional[int] = None) -> ReplicateSummary:
    """Run ``k`` independent filters on distinct substreams and summarize.

    The pooled mean is the average of the ``k`` final estimates (a
    consistent estimator at the computational cost of a single filter of
    size ``kH``); the empirical variance across replicates tracks the
    stability of the algorithm over time.
    """
    if k < 2:
        raise ValueError("k must be at least 2")
    seed = config.seed if base_seed is None else base_seed
    base = RngStream(seed, config.stream)

    def one(i: int) -> FilterTrace:
        sub = base.substream(i)
        cfg = FilterConfig(config.particles, config.steps, config.functionals,
                           scheme=config.scheme, schedule=config.schedule,
                           seed=sub.seed, stream=sub.stream,
                           eval_times=config.eval_times,
                           store_paths=config.store_paths)
        try:
            return run_filter(model, cfg)
        except WeightCollapseError as err:
            raise WeightCollapseError(err.t, replicate=i) from None

    traces = _pool_map(one, range(k), resolve_threads(config.threads))

    weighted = np.stack([tr.weighted for tr in traces])      # (k, T+1, nf, d)
    unweighted = np.stack([tr.unweighted for tr in traces])
    n_func = len(config.functionals)
    d_max = weighted.shape[-1]
    finals = np.transpose(weighted[:, -1, :, :], (1, 0, 2))  # (nf, k, d)
    return ReplicateSummary(
        replicates=k,
        final_estimates=finals,
        pooled_mean=finals.mean(axis=1),
        empirical_variance=finals.var(axis=1, ddof=1),
        variance_trajectory=weighted.var(axis=0, ddof=1),
        unweighted_variance_trajectory=unweighted.var(axis=0, ddof=1),
        traces=traces,
    )


def run_marginal_pair(joint: ModelSpec, marginal: ModelSpec, pairing: str,
                      config: FilterConfig) -> tuple[FilterTrace, FilterTrace]:
    """Run a joint filter and its marginalized counterpart on one config.

    ``pairing`` is the caller's declaration that the two kernels are
    compatible, i.e. mutating the joint target and then conditioning equals
    mutating the marginal target and redrawing the nuisance coordinate from
    its conditional proposal.  The functionals in ``config`` must depend on
    the marginal coordinate only; they are evaluated on the joint states
    through the joint model's ``xi_projection``.  The two runs use
    independent streams: the comparison is between sampling distributions,
    not coupled paths.
    """
    if not pairing:
        raise ValueError("marginal pair requires a pairing declaration")
    if joint.xi_projection is None:
        raise ValueError("joint model must project onto the marginal "
                         "coordinate; functionals of the nuisance coordinate "
                         "are not comparable across the pair")
    proj = joint.xi_projection
    lifted = [Functional(lambda s, f=phi.fn: f(proj(s)), phi.dim,
                         phi.variation, phi.name) for phi in config.functionals]
    joint_cfg = FilterConfig(config.particles, config.steps, lifted,
                             scheme=config.scheme, schedule=config.schedule,
                             seed=config.seed, stream=config.stream,
                             eval_times=config.eval_times)
    base = RngStream(config.seed, config.stream)
    sub = base.substream(1)
    marg_cfg = FilterConfig(config.particles, config.steps, config.functionals,
                            scheme=config.scheme, schedule=config.schedule,
                            seed=sub.seed, stream=sub.stream,
                            eval_times=config.eval_times)
    return run_filter(joint, joint_cfg), run_filter(marginal, marg_cfg)
