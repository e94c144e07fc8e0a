"""Concrete model families with exact oracles.

Four families are bundled, chosen so that every expectation a variance
computation needs is an exact finite sum or a conjugate closed form:

* :class:`FiniteHMM` -- finite-state hidden Markov model with a finite
  observation alphabet; the forward recursion gives exact filtering
  distributions and conditionals.
* :class:`LinearGaussianSSM` -- scalar linear-Gaussian state-space model;
  the Kalman recursion is the exact oracle.
* :class:`BetaBernoulliModel` -- fixed Bernoulli parameter under a Beta
  prior; posteriors are Beta with closed-form moments.
* :class:`MarginalPairModel` -- a finite joint model built so that the
  joint mutation kernel factorizes through the marginal kernel and the
  conditional proposal; the marginal filter on the first coordinate is
  the Rao-Blackwellized counterpart of the joint filter by construction.

Each family also provides vectorized :class:`~smcvar.engine.ModelSpec`
builders for the simulation drivers and a joint-law simulator.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from .core import Functional, RngStream
from .engine import ModelSpec

__all__ = [
    "BetaBernoulliModel",
    "FiniteHMM",
    "ForwardResult",
    "ImpossibleObservationError",
    "LinearGaussianSSM",
    "MarginalPairModel",
    "beta_posterior",
    "finite_hmm_forward",
    "hmm_filter_model",
    "kalman_filter",
    "lgssm_filter_model",
    "marginal_pair_models",
    "model_from_config",
    "parameter_model_specs",
    "simulate_data",
    "stationary_distribution",
]

_ROW_TOL = 1e-12


class ImpossibleObservationError(ValueError):
    """The observation sequence has zero probability under the model."""


def _check_stochastic(table: np.ndarray, name: str) -> np.ndarray:
    table = np.asarray(table, dtype=float)
    if np.any(table < 0):
        raise ValueError(f"{name} has negative entries")
    if np.any(np.abs(table.sum(axis=-1) - 1.0) > _ROW_TOL):
        raise ValueError(f"{name} rows must sum to 1 within {_ROW_TOL}")
    return table


def _categorical_rows(prob_rows: np.ndarray,
                      gen: np.random.Generator) -> np.ndarray:
    """One draw per row from row-wise categorical distributions."""
    cum = np.cumsum(prob_rows, axis=1)
    u = gen.random(len(prob_rows))
    idx = (u[:, None] > cum).sum(axis=1)
    return np.minimum(idx, prob_rows.shape[1] - 1)


def _categorical(p: np.ndarray, n: int, gen: np.random.Generator) -> np.ndarray:
    cum = np.cumsum(p)
    cum[-1] = 1.0
    return np.searchsorted(cum, gen.random(n), side="right").astype(np.int64)


# ---------------------------------------------------------------------------
# finite hidden Markov model


@dataclass(frozen=True)
class FiniteHMM:
    """Finite-state HMM with a finite observation alphabet.

    ``transition[i, j]`` is the probability of moving from state ``i`` to
    state ``j``; ``emission[i, y]`` the probability (or unnormalized
    likelihood) of symbol ``y`` in state ``i``.  ``proposal`` is the
    mutation kernel used by the filters (defaults to the transition table,
    the bootstrap choice) and ``initial_proposal`` the instrumental
    distribution for the first draw (defaults to ``initial``, making the
    initial correction weight constant).
    """

    transition: np.ndarray
    emission: np.ndarray
    initial: np.ndarray
    observations: np.ndarray
    proposal: Optional[np.ndarray] = None
    initial_proposal: Optional[np.ndarray] = None

    def __post_init__(self):
        g = _check_stochastic(self.transition, "transition")
        f = np.asarray(self.emission, dtype=float)
        if np.any(f < 0):
            raise ValueError("emission entries must be nonnegative")
        mu = _check_stochastic(np.asarray(self.initial, dtype=float), "initial")
        if g.shape[0] != g.shape[1] or g.shape[0] != f.shape[0]:
            raise ValueError("table shapes are inconsistent")
        q = self.proposal
        q = g if q is None else _check_stochastic(q, "proposal")
        if np.any((g > 0) & (q == 0)):
            raise ValueError("proposal must dominate the transition kernel")
        mu0 = self.initial_proposal
        mu0 = mu if mu0 is None else _check_stochastic(
            np.asarray(mu0, dtype=float), "initial_proposal")
        if np.any((mu > 0) & (mu0 == 0)):
            raise ValueError("initial_proposal must dominate initial")
        ys = np.asarray(self.observations, dtype=np.int64)
        if ys.size and (ys.min() < 0 or ys.max() >= f.shape[1]):
            raise ValueError("observations outside the emission alphabet")
        object.__setattr__(self, "transition", g)
        object.__setattr__(self, "emission", f)
        object.__setattr__(self, "initial", mu)
        object.__setattr__(self, "proposal", q)
        object.__setattr__(self, "initial_proposal", mu0)
        object.__setattr__(self, "observations", ys)

    @property
    def n_states(self) -> int:
        return self.transition.shape[0]

    @property
    def steps(self) -> int:
        return len(self.observations)

    def with_observations(self, observations) -> "FiniteHMM":
        return replace(self, observations=np.asarray(observations))

    def stability_constants(self) -> tuple[float, float, float]:
        """Recompute the kernel-ratio and likelihood bounds exhaustively.

        Returns ``(C, f_lo, f_hi)`` where ``C`` bounds every column ratio of
        the transition and proposal tables, and ``f_lo <= f(y|x) <= f_hi``
        over the whole emission table.  ``C`` is infinite when a column
        mixes zero and nonzero entries, ``f_lo`` can be zero; callers decide
        whether that is acceptable.
        """
        ratios = []
        for table in (self.transition, self.proposal):
            hi = table.max(axis=0)
            lo = table.min(axis=0)
            with np.errstate(divide="ignore", invalid="ignore"):
                r = np.where(hi == 0, 1.0, hi / lo)
            ratios.append(np.max(r))
        return (float(max(ratios)), float(self.emission.min()),
                float(self.emission.max()))


@dataclass(frozen=True)
class ForwardResult:
    """Exact forward-recursion output up to a step ``t``.

    ``filtering[s]`` is the distribution of the state at step ``s`` given
    the first ``s`` observations, for ``s = 0..t``; ``conditionals[k]``
    the ``(m, m)`` matrix whose row ``x_k`` is the distribution of the
    step-``t`` state given the state at step ``k`` and the observations,
    for ``k = 0..t-1``.
    """

    filtering: np.ndarray
    conditionals: np.ndarray

    @property
    def final(self) -> np.ndarray:
        return self.filtering[-1]


def finite_hmm_forward(model: FiniteHMM, t: Optional[int] = None) -> ForwardResult:
    """Exact filtering distributions and state conditionals by recursion.

    Raises :class:`ImpossibleObservationError` when the observation
    sequence has probability zero under the model.
    """
    t = model.steps if t is None else int(t)
    if t > model.steps:
        raise ValueError("t exceeds the observation sequence length")
    g, f, ys = model.transition, model.emission, model.observations
    m = model.n_states

    filt = np.empty((t + 1, m))
    filt[0] = model.initial
    for s in range(1, t + 1):
        p = (filt[s - 1] @ g) * f[:, ys[s - 1]]
        tot = p.sum()
        if tot <= 0:
            raise ImpossibleObservationError(f"impossible observation at t={s}")
        filt[s] = p / tot

    cond = np.empty((t, m, m)) if t > 0 else np.empty((0, m, m))
    for k in range(t):
        a = np.eye(m)
        for s in range(k + 1, t + 1):
            a = (a @ g) * f[:, ys[s - 1]][None, :]
            tot = a.sum(axis=1, keepdims=True)
            if np.any(tot <= 0):
                raise ImpossibleObservationError(
                    f"impossible observation between steps {k} and {s}")
            a = a / tot
        cond[k] = a
    return ForwardResult(filt, cond)


def hmm_filter_model(model: FiniteHMM) -> ModelSpec:
    """Vectorized filter spec for an HMM (bootstrap when proposal is the
    transition table); the exact forward recursion is attached as oracle."""
    g, f, q = model.transition, model.emission, model.proposal
    ys = model.observations
    with np.errstate(divide="ignore"):
        log_f = np.log(f)
        log_gq = np.where(g > 0, np.log(np.where(g > 0, g, 1.0))
                          - np.log(np.where(q > 0, q, 1.0)), -np.inf)
        log_init_ratio = np.where(
            model.initial > 0,
            np.log(np.where(model.initial > 0, model.initial, 1.0))
            - np.log(np.where(model.initial_proposal > 0,
                              model.initial_proposal, 1.0)),
            -np.inf)
    bootstrap = np.array_equal(g, q)
    forward = finite_hmm_forward(model)

    def initial_sampler(n, gen):
        return _categorical(model.initial_proposal, n, gen)

    def kernel(t, states, gen):
        return _categorical_rows(q[states], gen)

    def log_weight(t, states, parents):
        if t == 0:
            return log_init_ratio[states]
        w = log_f[states, ys[t - 1]]
        if not bootstrap:
            w = w + log_gq[parents, states]
        return w

    def oracle(t, phi: Functional):
        vals = phi(np.arange(model.n_states))
        out = forward.filtering[t] @ vals
        return float(out[0]) if phi.dim == 1 else out

    return ModelSpec(initial_sampler, kernel, log_weight, dimension="path",
                     oracle=oracle, name="finite-hmm")


def stationary_distribution(kernel: np.ndarray) -> np.ndarray:
    """Stationary distribution of a row-stochastic kernel."""
    kernel = _check_stochastic(np.asarray(kernel, dtype=float), "kernel")
    vals, vecs = np.linalg.eig(kernel.T)
    i = int(np.argmin(np.abs(vals - 1.0)))
    pi = np.real(vecs[:, i])
    pi = np.abs(pi)
    return pi / pi.sum()


# ---------------------------------------------------------------------------
# linear-Gaussian state-space model


@dataclass(frozen=True)
class LinearGaussianSSM:
    """Scalar AR(1) state with Gaussian observation noise.

    ``x_t = ar x_{t-1} + state_sd * eps``, ``y_t = x_t + obs_sd * eta``;
    the state at step 0 is drawn from ``N(initial_mean, initial_sd**2)``
    and observations start at step 1.
    """

    ar: float
    state_sd: float
    obs_sd: float
    initial_mean: float
    initial_sd: float
    observations: np.ndarray

    def __post_init__(self):
        if self.state_sd <= 0 or self.obs_sd <= 0 or self.initial_sd <= 0:
            raise ValueError("standard deviations must be positive")
        object.__setattr__(self, "observations",
                           np.asarray(self.observations, dtype=float))

    @property
    def steps(self) -> int:
        return len(self.observations)


def kalman_filter(model: LinearGaussianSSM) -> tuple[np.ndarray, np.ndarray]:
    """Exact filtering means and variances, indexed ``t = 0..T``.

    Row 0 is the prior on the initial state; row ``t`` conditions on the
    first ``t`` observations.
    """
    T = model.steps
    means = np.empty(T + 1)
    varis = np.empty(T + 1)
    means[0], varis[0] = model.initial_mean, model.initial_sd ** 2
    r = model.obs_sd ** 2
    for t in range(1, T + 1):
        m_pred = model.ar * means[t - 1]
        p_pred = model.ar ** 2 * varis[t - 1] + model.state_sd ** 2
        gain = p_pred / (p_pred + r)
        means[t] = m_pred + gain * (model.observations[t - 1] - m_pred)
        varis[t] = (1.0 - gain) * p_pred
    return means, varis


def lgssm_filter_model(model: LinearGaussianSSM) -> ModelSpec:
    """Bootstrap filter spec: prior-transition proposal, Gaussian
    likelihood weights."""
    ys = model.observations
    log_norm = -0.5 * np.log(2 * np.pi) - np.log(model.obs_sd)

    def initial_sampler(n, gen):
        return model.initial_mean + model.initial_sd * gen.standard_normal(n)

    def kernel(t, states, gen):
        return (model.ar * states
                + model.state_sd * gen.standard_normal(len(states)))

    def log_weight(t, states, parents):
        if t == 0:
            return np.zeros(len(states))
        z = (ys[t - 1] - states) / model.obs_sd
        return log_norm - 0.5 * z * z

    return ModelSpec(initial_sampler, kernel, log_weight, dimension="path",
                     name="linear-gaussian")


# ---------------------------------------------------------------------------
# fixed-parameter Beta-Bernoulli model


@dataclass(frozen=True)
class BetaBernoulliModel:
    """Bernoulli observations with a fixed success probability under a
    ``Beta(alpha, beta)`` prior; particles are drawn once from the
    overdispersed instrumental ``Beta(alpha0, beta0)``."""

    alpha: float
    beta: float
    alpha0: float
    beta0: float
    observations: np.ndarray
    true_theta: Optional[float] = None

    def __post_init__(self):
        if min(self.alpha, self.beta, self.alpha0, self.beta0) <= 0:
            raise ValueError("Beta shapes must be positive")
        ys = np.asarray(self.observations, dtype=np.int64)
        if ys.size and not np.all((ys == 0) | (ys == 1)):
            raise ValueError("observations must be binary")
        object.__setattr__(self, "observations", ys)

    @property
    def steps(self) -> int:
        return len(self.observations)

    def posterior_shape(self, t: int) -> tuple[float, float]:
        s = int(self.observations[:t].sum())
        return self.alpha + s, self.beta + t - s


def beta_posterior(model: BetaBernoulliModel, t: int) -> tuple[float, float]:
    """Exact conjugate posterior shape ``(alpha + s_t, beta + t - s_t)``."""
    if t > model.steps:
        raise ValueError("t exceeds the observation sequence length")
    return model.posterior_shape(t)


def _beta_logpdf(theta, a, b):
    from scipy.special import betaln, xlog1py, xlogy
    return (xlogy(a - 1.0, theta) + xlog1py(b - 1.0, -theta)
            - betaln(a, b))


def parameter_model_specs(model: BetaBernoulliModel) -> dict[str, ModelSpec]:
    """Filter specs for the fixed-parameter model.

    ``"static"`` uses the identity kernel (sequential importance sampling
    or resampling, depending on the schedule); ``"resample_move"`` mutates
    through a random-walk Metropolis step on the log-odds scale that leaves
    the current posterior invariant, with proposal scale 2.4 times the
    spread of the current particle cloud.
    """
    ys = model.observations

    def initial_sampler(n, gen):
        return gen.beta(model.alpha0, model.beta0, size=n)

    def log_weight(t, states, parents):
        if t == 0:
            return (_beta_logpdf(states, model.alpha, model.beta)
                    - _beta_logpdf(states, model.alpha0, model.beta0))
        if ys[t - 1] == 1:
            return np.log(states)
        return np.log1p(-states)

    def identity_kernel(t, states, gen):
        return states

    def mh_kernel(t, states, gen):
        # one Metropolis step targeting the posterior after t-1 observations
        a, b = model.posterior_shape(t - 1)
        z = np.log(states) - np.log1p(-states)
        step = 2.4 * max(z.std(), 1e-3)
        z_new = z + step * gen.standard_normal(len(states))
        # log target in log-odds space includes the change of variables
        def logp(zv):
            return a * zv - (a + b) * np.logaddexp(0.0, zv)
        accept = np.log(gen.random(len(states))) < logp(z_new) - logp(z)
        z = np.where(accept, z_new, z)
        return 1.0 / (1.0 + np.exp(-z))

    def oracle(t, phi: Functional):
        # exact only for the identity functional; enough for the demos
        a, b = model.posterior_shape(t)
        vals = phi(np.array([a / (a + b)]))
        return float(vals[0, 0]) if phi.dim == 1 else vals[0]

    static = ModelSpec(initial_sampler, identity_kernel, log_weight,
                       dimension="fixed", oracle=oracle, name="beta-static")
    move = ModelSpec(initial_sampler, mh_kernel, log_weight,
                     dimension="fixed", oracle=oracle,
                     invariant_kernel=True, name="beta-resample-move")
    return {"static": static, "resample_move": move}


# ---------------------------------------------------------------------------
# marginalizable pair


@dataclass(frozen=True)
class MarginalPairModel:
    """A finite joint model whose nuisance coordinate can be integrated out.

    The marginal part is a bootstrap :class:`FiniteHMM` on the tracked
    coordinate.  At every step the joint filter redraws the nuisance
    coordinate from ``conditional_proposal`` given the new tracked state,
    while the target conditional is ``conditional_target``; the joint
    mutation kernel therefore factorizes through the marginal kernel, which
    makes the marginal filter the Rao-Blackwellized version of the joint
    one by construction (``pairing_tag`` records this).  The joint
    correction weight splits as ``v = v_marginal(xi) * v_conditional(lambda
    | xi)`` and the conditional factor integrates to one under the
    conditional proposal for every ``xi``.
    """

    marginal: FiniteHMM
    conditional_target: np.ndarray
    conditional_proposal: np.ndarray

    def __post_init__(self):
        pc = _check_stochastic(self.conditional_target, "conditional_target")
        qc = _check_stochastic(self.conditional_proposal,
                               "conditional_proposal")
        if pc.shape != qc.shape or pc.shape[0] != self.marginal.n_states:
            raise ValueError("conditional table shapes are inconsistent")
        if np.any((pc > 0) & (qc == 0)):
            raise ValueError("conditional proposal must dominate the target")
        if not np.array_equal(self.marginal.proposal,
                              self.marginal.transition):
            raise ValueError("the marginal part must use the bootstrap "
                             "proposal for the factorized pairing to hold")
        object.__setattr__(self, "conditional_target", pc)
        object.__setattr__(self, "conditional_proposal", qc)

    @property
    def pairing_tag(self) -> str:
        return "factorized-joint-kernel"

    @property
    def n_xi(self) -> int:
        return self.marginal.n_states

    @property
    def n_lambda(self) -> int:
        return self.conditional_target.shape[1]

    @property
    def conditionals_match(self) -> bool:
        return bool(np.allclose(self.conditional_target,
                                self.conditional_proposal, atol=1e-14))


def marginal_pair_models(pair: MarginalPairModel) -> tuple[ModelSpec, ModelSpec]:
    """Joint and marginal filter specs for a marginalizable pair.

    Joint states are encoded as ``xi * n_lambda + lam``; the joint spec's
    ``xi_projection`` decodes the tracked coordinate.
    """
    hmm = pair.marginal
    m_l = pair.n_lambda
    pc, qc = pair.conditional_target, pair.conditional_proposal
    ys = hmm.observations
    with np.errstate(divide="ignore"):
        log_f = np.log(hmm.emission)
        log_ratio = np.where(pc > 0,
                             np.log(np.where(pc > 0, pc, 1.0))
                             - np.log(np.where(qc > 0, qc, 1.0)), -np.inf)
        log_init_ratio = np.where(
            hmm.initial > 0,
            np.log(np.where(hmm.initial > 0, hmm.initial, 1.0))
            - np.log(np.where(hmm.initial_proposal > 0,
                              hmm.initial_proposal, 1.0)), -np.inf)

    def initial_sampler(n, gen):
        xi = _categorical(hmm.initial_proposal, n, gen)
        lam = _categorical_rows(qc[xi], gen)
        return xi * m_l + lam

    def kernel(t, states, gen):
        xi = _categorical_rows(hmm.transition[states // m_l], gen)
        lam = _categorical_rows(qc[xi], gen)
        return xi * m_l + lam

    def log_weight(t, states, parents):
        xi, lam = states // m_l, states % m_l
        w = log_ratio[xi, lam]
        if t == 0:
            return w + log_init_ratio[xi]
        return w + log_f[xi, ys[t - 1]]

    joint = ModelSpec(initial_sampler, kernel, log_weight, dimension="product",
                      xi_projection=lambda s: s // m_l, name="pair-joint")
    return joint, hmm_filter_model(hmm)


# ---------------------------------------------------------------------------
# joint-law simulators


def simulate_data(model, steps: int, rng: RngStream, initial=None):
    """Draw ``(observations, latent_path)`` from a model's joint law.

    ``initial`` optionally overrides the initial state distribution (e.g.
    the stationary one).  For the Beta-Bernoulli family the latent draw is
    the parameter itself unless the model fixes ``true_theta``.
    """
    gen = rng.generator
    if isinstance(model, FiniteHMM):
        mu = model.initial if initial is None else np.asarray(initial)
        f = _check_stochastic(model.emission, "emission")
        xs = np.empty(steps + 1, dtype=np.int64)
        ys = np.empty(steps, dtype=np.int64)
        xs[0] = _categorical(mu, 1, gen)[0]
        for t in range(1, steps + 1):
            xs[t] = _categorical(model.transition[xs[t - 1]], 1, gen)[0]
            ys[t - 1] = _categorical(f[xs[t]], 1, gen)[0]
        return ys, xs
    if isinstance(model, LinearGaussianSSM):
        xs = np.empty(steps + 1)
        xs[0] = model.initial_mean + model.initial_sd * gen.standard_normal()
        noise = model.state_sd * gen.standard_normal(steps)
        eta = model.obs_sd * gen.standard_normal(steps)
        for t in range(1, steps + 1):
            xs[t] = model.ar * xs[t - 1] + noise[t - 1]
        return xs[1:] + eta, xs
    if isinstance(model, BetaBernoulliModel):
        theta = (model.true_theta if model.true_theta is not None
                 else gen.beta(model.alpha, model.beta))
        ys = (gen.random(steps) < theta).astype(np.int64)
        return ys, theta
    if isinstance(model, MarginalPairModel):
        return simulate_data(model.marginal, steps, rng, initial=initial)
    raise TypeError(f"cannot simulate {type(model).__name__}")


# ---------------------------------------------------------------------------
# structured-config loading


def _observations_from_config(spec: dict, builder, sim_key="observations"):
    obs = spec.get(sim_key)
    if isinstance(obs, dict):
        steps = int(obs["steps"])
        seed = int(obs.get("seed", 0))
        model = builder(np.zeros(0, dtype=np.int64))
        ys, _ = simulate_data(model, steps, RngStream(seed))
        return ys
    return np.asarray(obs)


def model_from_config(spec: dict):
    """Build a model from its structured (JSON-style) description.

    ``spec["type"]`` selects the family; tables are nested arrays and the
    ``observations`` entry is either a literal array or
    ``{"steps": T, "seed": s}``, in which case the sequence is simulated
    from the model's own joint law with that seed.
    """
    kind = spec.get("type")
    if kind == "finite_hmm":
        def build(obs):
            return FiniteHMM(
                transition=np.asarray(spec["transition"], dtype=float),
                emission=np.asarray(spec["emission"], dtype=float),
                initial=np.asarray(spec["initial"], dtype=float),
                observations=obs,
                proposal=(np.asarray(spec["proposal"], dtype=float)
                          if "proposal" in spec else None),
                initial_proposal=(np.asarray(spec["initial_proposal"],
                                             dtype=float)
                                  if "initial_proposal" in spec else None))
        return build(_observations_from_config(spec, build))
    if kind == "linear_gaussian":
        def build(obs):
            return LinearGaussianSSM(
                ar=float(spec["ar"]), state_sd=float(spec["state_sd"]),
                obs_sd=float(spec["obs_sd"]),
                initial_mean=float(spec["initial_mean"]),
                initial_sd=float(spec["initial_sd"]), observations=obs)
        return build(_observations_from_config(spec, build))
    if kind == "beta_bernoulli":
        def build(obs):
            return BetaBernoulliModel(
                alpha=float(spec["alpha"]), beta=float(spec["beta"]),
                alpha0=float(spec["alpha0"]), beta0=float(spec["beta0"]),
                observations=obs,
                true_theta=(float(spec["true_theta"])
                            if "true_theta" in spec else None))
        return build(_observations_from_config(spec, build))
    if kind == "marginal_pair":
        marg = dict(spec["marginal"])
        marg.setdefault("type", "finite_hmm")
        return MarginalPairModel(
            marginal=model_from_config(marg),
            conditional_target=np.asarray(spec["conditional_target"],
                                          dtype=float),
            conditional_proposal=np.asarray(spec["conditional_proposal"],
                                            dtype=float))
    raise ValueError(f"unknown model type {kind!r}")
