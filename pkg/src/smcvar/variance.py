"""Exact asymptotic variances of particle-filter estimators on finite models.

The central limit theorem for the mutation/correction/selection loop
attaches to each step three variance functionals: the variance of the
plain average over freshly mutated particles, the variance of the
self-normalized weighted estimate, and the variance of the plain average
after selection.  They obey a forward recursion whose selection term is
the target variance of the functional under multinomial selection and a
fractional-part correction under residual selection.  On a finite model
every expectation in the recursion is a finite sum, so all of these
quantities are computed here exactly, along with

* an independent closed form for the weighted-estimate variance as a sum
  over steps of weight-twisted operator compositions,
* the exact gap between residual and multinomial selection,
* the variance of sequential importance sampling (no selection),
* the fixed-parameter (identity-kernel) variances for the conjugate
  Beta-Bernoulli model, evaluated by adaptive quadrature,
* Dobrushin contraction coefficients and a geometric-series upper bound
  on the filtering variance for strictly contractive models.

Everything here is deterministic; no Monte Carlo is involved.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional, Sequence, Union

import numpy as np

from .core import Functional
from .models import (BetaBernoulliModel, FiniteHMM, ImpossibleObservationError,
                     MarginalPairModel, finite_hmm_forward)

__all__ = [
    "ChainView",
    "FilterChain",
    "QuadratureError",
    "StabilityParams",
    "VarianceReport",
    "WeightOperator",
    "closed_form_variance",
    "conditional_contraction_profile",
    "dobrushin_coefficient",
    "hmm_chain_view",
    "marginal_pair_chain_views",
    "operator_variation_profile",
    "posterior_ratio_integrality_gap",
    "recursion_variances",
    "residual_gap",
    "sir_fixed_param_variance",
    "sis_variance",
    "stability_bound",
    "stability_bound_limit",
    "variation_product_check",
    "weight_operators",
]


class QuadratureError(RuntimeError):
    """Adaptive quadrature failed to reach the requested tolerance."""


# ---------------------------------------------------------------------------
# finite filter chains


class FilterChain:
    """Exact finite-state representation of one filter problem.

    ``initial`` is the instrumental distribution over the step-0 state set,
    ``kernels[t-1]`` the mutation kernel from the step ``t-1`` state set to
    the step ``t`` one, and ``step_weights[t]`` the raw (unnormalized)
    correction weight as a function of the step-``t`` state.  State sets
    may differ across steps; parent-dependent weights are handled upstream
    by augmenting states with the coordinates the weight needs.

    On construction the chain computes, exactly, the proposal marginal
    ``ptil[t]`` (state distribution after mutation), the normalized weight
    table ``v[t]`` scaled so its proposal expectation is one, and the
    target marginal ``p[t]``.
    """

    def __init__(self, initial, kernels, step_weights):
        self.initial = np.asarray(initial, dtype=float)
        self.kernels = [np.asarray(k, dtype=float) for k in kernels]
        self.step_weights = [np.asarray(u, dtype=float) for u in step_weights]
        if len(self.step_weights) != len(self.kernels) + 1:
            raise ValueError("need one weight table per step, including step 0")
        self.steps = len(self.kernels)
        self.ptil: list[np.ndarray] = []
        self.p: list[np.ndarray] = []
        self.v: list[np.ndarray] = []
        cur = self.initial
        for t in range(self.steps + 1):
            if t > 0:
                cur = self.p[t - 1] @ self.kernels[t - 1]
            z = cur @ self.step_weights[t]
            if z <= 0:
                raise ImpossibleObservationError(
                    f"zero total weight at step {t}")
            self.ptil.append(cur)
            self.v.append(self.step_weights[t] / z)
            tgt = cur * self.v[t]
            self.p.append(tgt / tgt.sum())

    def kernel(self, t: int) -> np.ndarray:
        """Mutation kernel applied at step ``t`` (``t >= 1``)."""
        return self.kernels[t - 1]

    def target_mean(self, t: int, table: np.ndarray) -> np.ndarray:
        return self.p[t] @ table

    def target_variance(self, t: int, table: np.ndarray) -> np.ndarray:
        return _weighted_cov(self.p[t], table)

    def residual_term(self, t: int, table: np.ndarray) -> np.ndarray:
        """Selection-variance term of residual resampling at step ``t``.

        The fractional parts of the normalized weights drive the random
        stage of residual selection; when they all vanish the selection is
        deterministic and the term is defined as zero.
        """
        r = _fractional_part(self.v[t])
        mass = float(self.ptil[t] @ r)
        d = table.shape[1]
        if mass <= 0.0:
            return np.zeros((d, d))
        second = np.einsum("i,i,ia,ib->ab", self.ptil[t], r, table, table)
        mean = (self.ptil[t] * r) @ table / mass
        return second - mass * np.outer(mean, mean)


def _weighted_cov(p: np.ndarray, table: np.ndarray) -> np.ndarray:
    mu = p @ table
    centered = table - mu
    return np.einsum("i,ia,ib->ab", p, centered, centered)


def _fractional_part(v: np.ndarray, tol: float = 1e-9) -> np.ndarray:
    """Fractional part with near-integer snapping.

    The fractional-part map is discontinuous at the integers, and weight
    tables that are exactly integral in real arithmetic (uniform weights in
    particular) land a rounding error away in floating point; values within
    ``tol`` of an integer are treated as exactly integral.
    """
    r = v - np.floor(v)
    return np.where(np.abs(v - np.round(v)) <= tol, 0.0, r)


@dataclass(frozen=True)
class ChainView:
    """A chain together with the lift of a base functional onto its states.

    ``lift(table, t)`` maps a ``(base_size, d)`` table of functional values
    onto the step-``t`` state set; ``first_step`` is the earliest step at
    which the functional is defined (positive for functionals of an early
    coordinate that does not exist before it is drawn).
    """

    chain: FilterChain
    lift: Callable[[np.ndarray, int], np.ndarray]
    base_size: int
    first_step: int = 0


def _phi_table(phi, m: int) -> np.ndarray:
    """Normalize a functional given as array or callable to an (m, d) table."""
    if isinstance(phi, Functional):
        return phi(np.arange(m))
    table = np.asarray(phi, dtype=float)
    if table.ndim == 1:
        table = table[:, None]
    if table.shape[0] != m:
        raise ValueError(f"functional table has {table.shape[0]} entries, "
                         f"model has {m} states")
    if not np.all(np.isfinite(table)):
        raise ValueError("functional table must be finite")
    return table


def hmm_chain_view(model: FiniteHMM, steps: Optional[int] = None,
                   coordinate: Union[str, int] = "current") -> ChainView:
    """Exact chain for a finite HMM and a chosen functional coordinate.

    ``coordinate="current"`` tracks functionals of the latest state
    (filtering); an integer ``k`` tracks functionals of the step-``k``
    state (smoothing).  States are augmented with the previous state, so
    that the correction weight -- which involves the transition actually
    taken whenever the proposal differs from the transition kernel --
    becomes a function of the current augmented state; smoothing adds the
    anchored coordinate as a third component once it has been drawn.
    """
    T = model.steps if steps is None else int(steps)
    if T > model.steps:
        raise ValueError("steps exceeds the observation sequence length")
    m = model.n_states
    g, q, f, ys = (model.transition, model.proposal, model.emission,
                   model.observations)
    anchor = None if coordinate == "current" else int(coordinate)
    if anchor is not None and not 0 <= anchor <= T:
        raise ValueError("smoothing coordinate outside 0..steps")

    with np.errstate(divide="ignore", invalid="ignore"):
        pair_w = np.where(q > 0, g / np.where(q > 0, q, 1.0), 0.0)
    init_w = np.where(model.initial_proposal > 0,
                      model.initial / np.where(model.initial_proposal > 0,
                                               model.initial_proposal, 1.0),
                      0.0)

    def states_at(t: int) -> list[tuple]:
        # tuples are (cur,), (prev, cur) or (anchor, prev, cur)
        if t == 0:
            return [(x,) for x in range(m)]
        if anchor is None or t <= anchor:
            return [(a, b) for a in range(m) for b in range(m)]
        return [(al, a, b) for al in range(m) for a in range(m)
                for b in range(m)]

    def anchor_of(state: tuple, t: int) -> Optional[int]:
        # value of the anchored coordinate, when already drawn at step t
        if anchor is None or t < anchor:
            return None
        if len(state) == 3:
            return state[0]
        return state[-1]  # the anchored coordinate is the current one

    kernels = []
    weights = [np.array([init_w[s[0]] for s in states_at(0)])]
    for t in range(1, T + 1):
        prev_states, cur_states = states_at(t - 1), states_at(t)
        K = np.zeros((len(prev_states), len(cur_states)))
        u = np.empty(len(cur_states))
        for j, sc in enumerate(cur_states):
            a, b = sc[-2], sc[-1]
            u[j] = f[b, ys[t - 1]] * pair_w[a, b]
        for i, sp in enumerate(prev_states):
            for j, sc in enumerate(cur_states):
                if sc[-2] != sp[-1]:
                    continue
                if len(sc) == 3 and sc[0] != anchor_of(sp, t - 1):
                    continue
                K[i, j] = q[sp[-1], sc[-1]]
        kernels.append(K)
        weights.append(u)

    def lift(table: np.ndarray, t: int) -> np.ndarray:
        coords = ([s[-1] for s in states_at(t)] if anchor is None
                  else [anchor_of(s, t) for s in states_at(t)])
        return table[np.array(coords)]

    initial = np.array([model.initial_proposal[s[0]] for s in states_at(0)])
    chain = FilterChain(initial, kernels, weights)
    return ChainView(chain, lift, m,
                     first_step=0 if anchor is None else anchor)


def marginal_pair_chain_views(pair: MarginalPairModel,
                              steps: Optional[int] = None
                              ) -> tuple[ChainView, ChainView]:
    """Exact chains for the joint filter and its marginalized counterpart.

    Both share the observation sequence of the marginal part; functionals
    are tables over the tracked coordinate, lifted onto joint states, which
    enumerate ``(tracked, nuisance)`` pairs as ``xi * n_lambda + lam``.
    """
    hmm = pair.marginal
    T = hmm.steps if steps is None else int(steps)
    m_x, m_l = pair.n_xi, pair.n_lambda
    pc, qc = pair.conditional_target, pair.conditional_proposal
    with np.errstate(divide="ignore", invalid="ignore"):
        cond_w = np.where(qc > 0, pc / np.where(qc > 0, qc, 1.0), 0.0)
    init_w_xi = np.where(hmm.initial_proposal > 0,
                         hmm.initial / np.where(hmm.initial_proposal > 0,
                                                hmm.initial_proposal, 1.0),
                         0.0)

    size = m_x * m_l
    init = (hmm.initial_proposal[:, None] * qc).reshape(size)
    weights = [(init_w_xi[:, None] * cond_w).reshape(size)]
    kernels = []
    # one mutation row per (xi, lam): the nuisance coordinate is forgotten
    # and redrawn from the conditional proposal at the new tracked state
    step_k = np.einsum("xz,zl->xzl", hmm.transition, qc).reshape(m_x, size)
    K = np.repeat(step_k, m_l, axis=0)
    for t in range(1, T + 1):
        kernels.append(K)
        u = (hmm.emission[:, hmm.observations[t - 1]][:, None]
             * cond_w).reshape(size)
        weights.append(u)
    joint_chain = FilterChain(init, kernels, weights)
    joint_view = ChainView(joint_chain,
                           lambda table, t: np.repeat(table, m_l, axis=0),
                           m_x)
    marginal_view = hmm_chain_view(hmm, steps=T, coordinate="current")
    return joint_view, marginal_view


def _as_view(model, steps, coordinate) -> ChainView:
    if isinstance(model, ChainView):
        return model
    if isinstance(model, FiniteHMM):
        return hmm_chain_view(model, steps, coordinate)
    if isinstance(model, MarginalPairModel):
        return marginal_pair_chain_views(model, steps)[0]
    raise TypeError("expected a finite model or a ChainView, got "
                    f"{type(model).__name__}")


# ---------------------------------------------------------------------------
# variance recursions


@dataclass
class VarianceReport:
    """Per-step exact variance values for one functional on a finite model.

    All entries are ``(d, d)`` symmetric matrices indexed by step.  The
    ``tilde`` arrays are the variances of the plain average over mutated
    particles, ``pre`` those of the self-normalized weighted estimate, and
    ``post`` those of the plain average after selection, under each
    scheme's recursion.  ``residual_term`` is the fractional-part selection
    term of the residual scheme and ``target_variance`` the variance of the
    functional under the step target (the multinomial selection term).
    Steps before ``first_step`` (smoothing functionals of a coordinate not
    yet drawn) are NaN.
    """

    steps: np.ndarray
    dim: int
    tilde_multinomial: np.ndarray
    pre_multinomial: np.ndarray
    post_multinomial: np.ndarray
    tilde_residual: np.ndarray
    pre_residual: np.ndarray
    post_residual: np.ndarray
    residual_term: np.ndarray
    target_variance: np.ndarray
    scheme: str = "both"
    first_step: int = 0

    _FIELDS = ("tilde_multinomial", "pre_multinomial", "post_multinomial",
               "tilde_residual", "pre_residual", "post_residual",
               "residual_term", "target_variance")

    def series(self, name: str) -> np.ndarray:
        """Scalar view of a ``(T+1, 1, 1)`` entry for arity-1 functionals."""
        if self.dim != 1:
            raise ValueError("series view requires an arity-1 functional")
        return getattr(self, name)[:, 0, 0]

    def validate(self, tol: float = 1e-10) -> None:
        """Check the structural identities and the semidefinite ordering.

        Verifies that every matrix is symmetric positive semidefinite, that
        the post-selection variances equal the pre-selection ones plus the
        scheme's selection term, and that the residual selection term lies
        between zero and the target variance in semidefinite order.
        """
        def psd(mat):
            return np.all(np.linalg.eigvalsh((mat + mat.T) / 2) >= -tol)

        for t in range(self.first_step, len(self.steps)):
            for name in self._FIELDS:
                mat = getattr(self, name)[t]
                if not np.allclose(mat, mat.T, atol=tol):
                    raise ValueError(f"{name}[{t}] is not symmetric")
                if not psd(mat):
                    raise ValueError(f"{name}[{t}] is not PSD")
            if not np.allclose(self.post_multinomial[t],
                               self.pre_multinomial[t]
                               + self.target_variance[t], atol=tol):
                raise ValueError(f"multinomial selection identity fails at {t}")
            if not np.allclose(self.post_residual[t],
                               self.pre_residual[t] + self.residual_term[t],
                               atol=tol):
                raise ValueError(f"residual selection identity fails at {t}")
            if not psd(self.target_variance[t] - self.residual_term[t]):
                raise ValueError(
                    f"residual term exceeds target variance at {t}")


def _tilde_variance(chain: FilterChain, t: int, psi: np.ndarray,
                    scheme: str) -> np.ndarray:
    """Variance functional of the mutated, unweighted system at step ``t``.

    Backward pass: each level contributes the mutation's local variance and
    the previous step's selection term, and hands the reweighted,
    recentered composed function down one level.
    """
    d = psi.shape[1]
    acc = np.zeros((d, d))
    cur = psi
    for s in range(t, 0, -1):
        K = chain.kernel(s)
        mean_k = K @ cur
        second = np.einsum("ij,ja,jb->iab", K, cur, cur)
        local = second - np.einsum("ia,ib->iab", mean_k, mean_k)
        acc += np.einsum("i,iab->ab", chain.p[s - 1], local)
        if scheme == "multinomial":
            acc += chain.target_variance(s - 1, mean_k)
        else:
            acc += chain.residual_term(s - 1, mean_k)
        cur = chain.v[s - 1][:, None] * (mean_k
                                         - chain.target_mean(s - 1, mean_k))
    acc += _weighted_cov(chain.ptil[0], cur)
    return acc


def _pre_variance(chain: FilterChain, t: int, table: np.ndarray,
                  scheme: str) -> np.ndarray:
    psi = chain.v[t][:, None] * (table - chain.target_mean(t, table))
    return _tilde_variance(chain, t, psi, scheme)


def recursion_variances(model, phi, steps: Optional[int] = None,
                        scheme: str = "both",
                        coordinate: Union[str, int] = "current"
                        ) -> VarianceReport:
    """Exact per-step estimator variances by the forward recursion.

    Parameters
    ----------
    model : FiniteHMM, MarginalPairModel or ChainView
        Finite model; a marginalizable pair means its joint filter.
    phi : array_like or Functional
        Functional values tabulated on the base states (arity 1 as a flat
        vector, arity ``d`` as an ``(m, d)`` table).
    steps : int, optional
        Number of steps (defaults to the model's observation length).
    scheme : str
        ``"multinomial"``, ``"residual"`` or ``"both"``; the report always
        carries both schemes' fields, the tag records what was requested.
    coordinate : "current" or int
        Which state coordinate the functional reads (an integer requests
        the smoothing functional of that step's state).
    """
    if scheme not in ("multinomial", "residual", "both"):
        raise ValueError(f"unknown scheme {scheme!r}")
    view = _as_view(model, steps, coordinate)
    chain = view.chain
    T = chain.steps
    table = _phi_table(phi, view.base_size)
    d = table.shape[1]
    shape = (T + 1, d, d)
    rep = VarianceReport(
        steps=np.arange(T + 1), dim=d,
        tilde_multinomial=np.full(shape, np.nan),
        pre_multinomial=np.full(shape, np.nan),
        post_multinomial=np.full(shape, np.nan),
        tilde_residual=np.full(shape, np.nan),
        pre_residual=np.full(shape, np.nan),
        post_residual=np.full(shape, np.nan),
        residual_term=np.full(shape, np.nan),
        target_variance=np.full(shape, np.nan),
        scheme=scheme, first_step=view.first_step)

    for t in range(view.first_step, T + 1):
        lifted = view.lift(table, t)
        rep.target_variance[t] = chain.target_variance(t, lifted)
        rep.residual_term[t] = chain.residual_term(t, lifted)
        rep.tilde_multinomial[t] = _tilde_variance(chain, t, lifted,
                                                   "multinomial")
        rep.pre_multinomial[t] = _pre_variance(chain, t, lifted, "multinomial")
        rep.post_multinomial[t] = (rep.pre_multinomial[t]
                                   + rep.target_variance[t])
        rep.tilde_residual[t] = _tilde_variance(chain, t, lifted, "residual")
        rep.pre_residual[t] = _pre_variance(chain, t, lifted, "residual")
        rep.post_residual[t] = rep.pre_residual[t] + rep.residual_term[t]
    return rep


def _maybe_scalar(mat: np.ndarray):
    return float(mat[0, 0]) if mat.shape == (1, 1) else mat


def closed_form_variance(model, phi, t: Optional[int] = None,
                         coordinate: Union[str, int] = "current"):
    """Weighted-estimate variance as the operator-composition sum.

    Independent of the recursion: the variance is accumulated as the sum
    over steps ``k <= t`` of the proposal expectation of the squared
    normalized weight times the squared image of the centered functional
    under the weight-twisted operators composed from step ``k+1`` through
    ``t``.  Equals the multinomial-recursion value.
    """
    view = _as_view(model, t, coordinate)
    chain = view.chain
    t = chain.steps if t is None else int(t)
    if t < view.first_step:
        raise ValueError("functional undefined before its coordinate exists")
    table = view.lift(_phi_table(phi, view.base_size), t)
    cur = table - chain.target_mean(t, table)
    d = cur.shape[1]
    total = np.zeros((d, d))
    for k in range(t, -1, -1):
        total += np.einsum("i,i,ia,ib->ab", chain.ptil[k], chain.v[k] ** 2,
                           cur, cur)
        if k > 0:
            cur = chain.kernel(k) @ (chain.v[k][:, None] * cur)
    return _maybe_scalar(total)


def residual_gap(model, phi, t: Optional[int] = None,
                 coordinate: Union[str, int] = "current"):
    """Exact difference ``V_residual - V_multinomial`` at step ``t``.

    Accumulates, over steps ``k < t``, the residual selection term minus
    the target variance of the composed-operator image of the centered
    functional; the result is negative semidefinite (residual selection
    never increases the asymptotic variance).
    """
    view = _as_view(model, t, coordinate)
    chain = view.chain
    t = chain.steps if t is None else int(t)
    if t < view.first_step:
        raise ValueError("functional undefined before its coordinate exists")
    table = view.lift(_phi_table(phi, view.base_size), t)
    cur = table - chain.target_mean(t, table)
    d = cur.shape[1]
    gap = np.zeros((d, d))
    for k in range(t - 1, -1, -1):
        cur = chain.kernel(k + 1) @ (chain.v[k + 1][:, None] * cur)
        gap += chain.residual_term(k, cur) - chain.target_variance(k, cur)
    return _maybe_scalar(gap)


# ---------------------------------------------------------------------------
# sequential importance sampling


def _sis_variance_chain(view: ChainView, phi, t: int):
    """No-selection variance by weight-tilted forward passes.

    Particles are iid paths from the proposal chain; the estimator variance
    is the proposal expectation of the squared cumulative weight times the
    squared centered functional, over the squared cumulative normalizing
    constant.  Scales are carried in log form so that long weight products
    neither overflow nor underflow.
    """
    chain = view.chain
    if t < view.first_step:
        raise ValueError("functional undefined before its coordinate exists")
    table = view.lift(_phi_table(phi, view.base_size), t)
    centered = table - chain.target_mean(t, table)

    def renorm(vec, log_scale):
        z = vec.sum()
        if z <= 0:
            raise ImpossibleObservationError("zero weight mass in the "
                                             "no-selection pass")
        return vec / z, log_scale + np.log(z)

    sq, log_sq = renorm(chain.initial * chain.step_weights[0] ** 2, 0.0)
    lin, log_lin = renorm(chain.initial * chain.step_weights[0], 0.0)
    for s in range(1, t + 1):
        K = chain.kernel(s)
        sq, log_sq = renorm((sq @ K) * chain.step_weights[s] ** 2, log_sq)
        lin, log_lin = renorm((lin @ K) * chain.step_weights[s], log_lin)
    num = np.einsum("i,ia,ib->ab", sq, centered, centered)
    return _maybe_scalar(num * np.exp(log_sq - 2.0 * log_lin))


def sis_variance(model, phi=None, t: Optional[int] = None,
                 coordinate: Union[str, int] = "current", **quad_opts):
    """No-selection (sequential importance sampling) estimator variance.

    Finite models are evaluated exactly by tilted forward sums; the
    Beta-Bernoulli model by adaptive quadrature of the squared
    posterior-to-instrumental density ratio.  When the proposal equals the
    target at step ``t`` the value reduces to the target variance of the
    functional.
    """
    if isinstance(model, BetaBernoulliModel):
        t = model.steps if t is None else int(t)
        return _BetaVarianceCalculator(model, **quad_opts).sis(t, phi)
    view = _as_view(model, t, coordinate)
    t = view.chain.steps if t is None else int(t)
    return _sis_variance_chain(view, phi, t)


# ---------------------------------------------------------------------------
# weight-twisted operators


@dataclass(frozen=True)
class WeightOperator:
    """One step of the weight-twisted composition.

    ``table[z, z']`` is the mutation probability from ``z`` to ``z'`` times
    the normalized weight at ``z'``; applying the operator to a functional
    table gives the conditional expectation of weight-times-functional as a
    function of the previous state.
    """

    step: int
    table: np.ndarray

    def apply(self, table: np.ndarray) -> np.ndarray:
        return self.table @ np.asarray(table, dtype=float)

    def normalization_gap(self, previous_target: np.ndarray) -> float:
        """Distance from one of the previous-target expectation of the
        operator applied to the unit table (zero on a consistent chain)."""
        ones = np.ones(self.table.shape[1])
        return float(abs(previous_target @ (self.table @ ones) - 1.0))


def weight_operators(model, steps: Optional[int] = None,
                     coordinate: Union[str, int] = "current"
                     ) -> list[WeightOperator]:
    """The weight-twisted operator of every step of a finite model."""
    view = _as_view(model, steps, coordinate)
    chain = view.chain
    return [WeightOperator(t, chain.kernel(t) * chain.v[t][None, :])
            for t in range(1, chain.steps + 1)]


def operator_variation_profile(model, phi, t: Optional[int] = None,
                               coordinate: Union[str, int] = "current"
                               ) -> np.ndarray:
    """Spread of the composed operator images of the centered functional.

    Returns, for ``k = 0..t-1``, the sup-minus-inf spread of the
    composition from step ``k+1`` through ``t`` applied to the functional
    centered at its step-``t`` target mean.  Arity 1 only.
    """
    view = _as_view(model, t, coordinate)
    chain = view.chain
    t = chain.steps if t is None else int(t)
    table = view.lift(_phi_table(phi, view.base_size), t)
    if table.shape[1] != 1:
        raise ValueError("variation profile requires an arity-1 functional")
    cur = table - chain.target_mean(t, table)
    out = np.empty(t)
    for k in range(t - 1, -1, -1):
        cur = chain.kernel(k + 1) @ (chain.v[k + 1][:, None] * cur)
        out[k] = float(cur.max() - cur.min())
    return out


# ---------------------------------------------------------------------------
# contraction and stability


def dobrushin_coefficient(kernel) -> float:
    """Contraction coefficient: half the largest L1 distance between rows.

    Zero when every row is identical (the kernel forgets the past in one
    step), one for a deterministic permutation on two or more states.
    """
    kernel = np.asarray(kernel, dtype=float)
    if kernel.ndim != 2 or np.any(kernel < 0) \
            or np.any(np.abs(kernel.sum(axis=1) - 1.0) > 1e-9):
        raise ValueError("kernel rows must be probability vectors")
    diffs = np.abs(kernel[:, None, :] - kernel[None, :, :]).sum(axis=2)
    return float(0.5 * diffs.max())


@dataclass(frozen=True)
class StabilityParams:
    """Verified constants of a strictly contractive filtering problem.

    ``kernel_ratio`` bounds every column ratio of the transition and
    proposal tables, ``lik_lower``/``lik_upper`` bound the emission table,
    and ``variation`` is the spread of the studied filtering functional.
    """

    kernel_ratio: float
    lik_lower: float
    lik_upper: float
    variation: float

    def __post_init__(self):
        if self.kernel_ratio < 1.0:
            raise ValueError("kernel ratio bound must be at least 1")
        if not 0 < self.lik_lower <= self.lik_upper:
            raise ValueError("likelihood bounds must satisfy "
                             "0 < lower <= upper")

    @property
    def likelihood_contrast(self) -> float:
        return self.lik_upper / self.lik_lower - 1.0

    @property
    def rho(self) -> float:
        return 1.0 - 1.0 / self.kernel_ratio

    @property
    def rho2(self) -> float:
        return 1.0 - 1.0 / self.kernel_ratio ** 2

    @classmethod
    def from_model(cls, model: FiniteHMM,
                   variation: float) -> "StabilityParams":
        """Recompute the constants exhaustively from the model tables."""
        c, f_lo, f_hi = model.stability_constants()
        if not np.isfinite(c):
            raise ValueError("kernel ratio bound is infinite (a column mixes "
                             "zero and nonzero entries)")
        if f_lo <= 0:
            raise ValueError("emission table has zero entries; the "
                             "likelihood lower bound fails")
        return cls(c, f_lo, f_hi, variation)


def _stability_prefactor(params: StabilityParams) -> float:
    if not np.isfinite(params.variation):
        raise ValueError("unbounded functional")
    c, cf = params.kernel_ratio, params.likelihood_contrast
    ratio = params.lik_upper / params.lik_lower
    expo = np.exp(2.0 * params.rho * cf / (1.0 - params.rho2))
    return c ** 4 * ratio ** 2 * expo * params.variation ** 2


def stability_bound(params: StabilityParams, t: int) -> float:
    """Geometric-series upper bound on the weighted-estimate variance.

    Each step ``k <= t`` contributes the prefactor times
    ``rho2 ** (2 (t - k))``; under strict contraction the partial sums
    increase to :func:`stability_bound_limit`, so the bound is uniform in
    time.  Without contraction (``kernel_ratio == 1``) only the current
    step survives.
    """
    pref = _stability_prefactor(params)
    r2 = params.rho2 ** 2
    if r2 == 0.0:
        return float(pref)
    return float(pref * (1.0 - r2 ** (t + 1)) / (1.0 - r2))


def stability_bound_limit(params: StabilityParams) -> float:
    """Limit of :func:`stability_bound` as the step count grows."""
    pref = _stability_prefactor(params)
    return float(pref / (1.0 - params.rho2 ** 2))


def conditional_contraction_profile(model: FiniteHMM, t: int
                                    ) -> tuple[np.ndarray, np.ndarray]:
    """Contraction of the exact state conditionals vs the geometric bound.

    Returns ``(coefficients, bounds)`` indexed by ``k = 0..t-1``: the
    Dobrushin coefficient of the conditional distribution of the step-``t``
    state given the step-``k`` one, and ``(1 - 1/C**2) ** (t - k)`` from
    the recomputed kernel-ratio bound.
    """
    fwd = finite_hmm_forward(model, t)
    c, _, _ = model.stability_constants()
    rho2 = 1.0 - 1.0 / c ** 2
    ks = np.arange(t)
    coeffs = np.array([dobrushin_coefficient(fwd.conditionals[k])
                       for k in ks])
    return coeffs, rho2 ** (t - ks)


def variation_product_check(phi, psi) -> dict:
    """Check the product-variation inequality on finite tables.

    For ``phi >= 0`` with ``sup psi >= 0`` and ``inf psi <= 0``, the spread
    of the pointwise product is at most ``sup phi`` times the spread of
    ``psi``.  Returns a record with both sides, whether the hypotheses
    held, and whether the inequality holds (None when the hypotheses fail,
    in which case nothing is asserted).
    """
    phi = np.asarray(phi, dtype=float)
    psi = np.asarray(psi, dtype=float)
    hypotheses = bool(np.all(phi >= 0) and psi.max() >= 0 and psi.min() <= 0)
    prod = phi * psi
    lhs = float(prod.max() - prod.min())
    rhs = float(phi.max() * (psi.max() - psi.min()))
    return {
        "hypotheses_ok": hypotheses,
        "product_variation": lhs,
        "bound": rhs,
        "holds": bool(lhs <= rhs + 1e-12) if hypotheses else None,
    }


# ---------------------------------------------------------------------------
# fixed-parameter conjugate model: quadrature evaluation


def _as_phi_callable(phi):
    if phi is None:
        return lambda theta: theta
    if isinstance(phi, Functional):
        if phi.dim != 1:
            raise ValueError("quadrature variances support arity 1 only")
        return lambda theta: float(phi(np.atleast_1d(theta))[0, 0])
    if callable(phi):
        return phi
    raise TypeError("phi must be None, a callable or an arity-1 Functional")


class _BetaVarianceCalculator:
    """Quadrature engine for the identity-kernel Beta-Bernoulli variances.

    Every integrand is a ratio of Beta densities times a smooth function;
    integrals run adaptively over (0, 1) with subdivision hints at the
    posterior mode (the integrands concentrate there as the step count
    grows) and at the jump points of the integer part of the one-step
    weight ratio.
    """

    def __init__(self, model: BetaBernoulliModel, epsrel: float = 1e-10,
                 epsabs: float = 1e-15):
        from scipy.special import betaln
        self.model = model
        self.epsrel = epsrel
        self.epsabs = epsabs
        s = np.concatenate([[0], np.cumsum(model.observations)])
        k = np.arange(model.steps + 1)
        self.a = model.alpha + s            # posterior shapes after k obs
        self.b = model.beta + k - s
        self.lbeta = betaln(self.a, self.b)
        self.a0, self.b0 = model.alpha0, model.beta0
        self.lbeta0 = float(betaln(self.a0, self.b0))
        self._floor_cache: dict[int, tuple[np.ndarray, np.ndarray]] = {}
        self._er_cache: dict[int, float] = {}

    # -- log densities ------------------------------------------------------

    def logpdf(self, k: int, theta):
        theta = np.asarray(theta, dtype=float)
        return ((self.a[k] - 1) * np.log(theta)
                + (self.b[k] - 1) * np.log1p(-theta) - self.lbeta[k])

    def logpdf0(self, theta):
        theta = np.asarray(theta, dtype=float)
        return ((self.a0 - 1) * np.log(theta)
                + (self.b0 - 1) * np.log1p(-theta) - self.lbeta0)

    def _mode_hints(self, t: int) -> list[float]:
        a, b = self.a[t], self.b[t]
        mean = a / (a + b)
        sd = np.sqrt(a * b / ((a + b) ** 2 * (a + b + 1)))
        pts = [mean - 20 * sd, mean - 5 * sd, mean, mean + 5 * sd,
               mean + 20 * sd]
        return [float(p) for p in pts if 0.0 < p < 1.0]

    def _quad(self, f, lo: float = 0.0, hi: float = 1.0,
              hints: Sequence[float] = (), scale: float = 0.0) -> float:
        """Adaptive quadrature on ``(lo, hi)`` with subdivision hints.

        ``scale`` is the magnitude of the quantity the result contributes
        to; partial integrals are then allowed an absolute error at that
        scale's relative tolerance rather than chasing digits of a
        negligible piece.
        """
        from scipy.integrate import quad
        pts = sorted(p for p in hints if lo < p < hi)
        eps_abs = max(self.epsabs, abs(scale) * self.epsrel)
        res = quad(f, lo, hi, points=pts or None, limit=200,
                   epsabs=eps_abs, epsrel=self.epsrel, full_output=1)
        if len(res) > 3:
            val, err = res[0], res[1]
            # accept a grumbling integrator whose achieved error is still
            # negligible for the quantity being assembled
            if err > max(eps_abs * 100, abs(val) * self.epsrel * 100,
                         abs(scale) * 1e-8):
                raise QuadratureError(
                    f"quadrature failed (achieved abs error {err:.3e}): "
                    f"{res[-1]}")
        return res[0]

    def posterior_mean_phi(self, t: int, phi) -> float:
        f = lambda th: np.exp(self.logpdf(t, th)) * phi(th)
        return self._quad(f, hints=self._mode_hints(t))

    # -- one-step weight ratio pieces ----------------------------------------

    def _log_weight_ratio(self, k: int, theta):
        """Log of the step-``k`` correction weight: the ``k``-observation
        posterior over its proposal (the ``k-1`` posterior, or the
        instrumental at step 0)."""
        prev = self.logpdf(k - 1, theta) if k >= 1 else self.logpdf0(theta)
        return self.logpdf(k, theta) - prev

    def floor_pieces(self, k: int) -> tuple[np.ndarray, np.ndarray]:
        """Intervals on which the integer part of the step-``k`` weight is
        constant: returns ``(edges, floor value per interval)``."""
        if k in self._floor_cache:
            return self._floor_cache[k]
        from scipy.optimize import brentq
        eps = 1e-12
        grid = np.linspace(eps, 1 - eps, 4097)
        logv = self._log_weight_ratio(k, grid)
        vmax = float(np.exp(logv.max()))
        breaks: list[float] = []
        for j in range(1, int(np.floor(vmax)) + 1):
            target = np.log(j)
            sign = np.sign(logv - target)
            for i in np.nonzero(np.diff(sign) != 0)[0]:
                root = brentq(
                    lambda th: float(self._log_weight_ratio(k, th)) - target,
                    grid[i], grid[i + 1], xtol=1e-15)
                breaks.append(float(root))
        if len(breaks) > 64:
            raise QuadratureError("too many integer crossings in the weight "
                                  "ratio; refusing to subdivide further")
        edges = np.array([0.0] + sorted(breaks) + [1.0])
        mids = 0.5 * (edges[:-1] + edges[1:])
        floors = np.floor(np.exp(self._log_weight_ratio(k, mids)))
        out = (edges, floors)
        self._floor_cache[k] = out
        return out

    def expected_fraction(self, k: int) -> float:
        """Proposal expectation of the fractional part of the step-``k``
        weight, via regularized incomplete Beta sums (no quadrature)."""
        if k in self._er_cache:
            return self._er_cache[k]
        from scipy.special import betainc
        edges, floors = self.floor_pieces(k)
        if k >= 1:
            cdf = betainc(self.a[k - 1], self.b[k - 1], edges)
        else:
            cdf = betainc(self.a0, self.b0, edges)
        val = 1.0 - float(np.sum(floors * np.diff(cdf)))
        self._er_cache[k] = val
        return val

    # -- estimator variances --------------------------------------------------

    def sis(self, t: int, phi=None) -> float:
        """No-selection variance: instrumental expectation of the squared
        posterior-to-instrumental ratio times the squared centered
        functional."""
        phi = _as_phi_callable(phi)
        mean = self.posterior_mean_phi(t, phi)
        f = lambda th: (np.exp(2.0 * self.logpdf(t, th) - self.logpdf0(th))
                        * (phi(th) - mean) ** 2)
        return self._quad(f, hints=self._mode_hints(t))

    def _multinomial_extra(self, t: int, phi, mean: float) -> float:
        """Sum over steps of the early-posterior expectation of the squared
        late-to-early density ratio times the squared centered functional,
        collapsed into one adaptive integral."""
        lb, a, b = self.lbeta, self.a, self.b

        def f(th):
            lth, l1th = np.log(th), np.log1p(-th)
            lp_t = (a[t] - 1) * lth + (b[t] - 1) * l1th - lb[t]
            lp_prev = (a[:t] - 1) * lth + (b[:t] - 1) * l1th - lb[:t]
            return float(np.exp(2.0 * lp_t - lp_prev).sum()
                         * (phi(th) - mean) ** 2)

        return self._quad(f, hints=self._mode_hints(t))

    def _step_log_tables(self, t: int, th: float):
        """Posterior, proposal and weight-ratio logs for steps 1..t at a
        point: returns ``(lp_cur, lp_prop, log_v, log_ratio_to_t)`` as
        length-``t`` vectors indexed by ``k-1``."""
        lth, l1th = np.log(th), np.log1p(-th)
        lp = (self.a[:t + 1] - 1) * lth + (self.b[:t + 1] - 1) * l1th \
            - self.lbeta[:t + 1]
        lp0 = (self.a0 - 1) * lth + (self.b0 - 1) * l1th - self.lbeta0
        lp_prop = np.concatenate([[lp0], lp[:t - 1]])  # proposal of step k-1
        lp_cur = lp[:t]                                # posterior after k-1
        return lp_cur, lp_prop, lp_cur - lp_prop, lp[t] - lp_cur

    _EXACT_STEP_LIMIT = 128

    def _residual_extra(self, t: int, phi, mean: float) -> float:
        """Sum over steps of the fractional-part selection term applied to
        the late-to-early density ratio times the centered functional.

        Up to a moderate number of steps every step is integrated on its
        own, with the integer-part jump points of that step's weight ratio
        as subdivision hints, which reaches the nominal tolerance.  Beyond
        that (long divergence-rate grids) the second moments of all steps
        collapse into one adaptive integral and the first moments into one
        vector-valued quadrature; the jump points are then left to
        adaptive refinement, which is accurate far beyond the rate-fitting
        needs but below the small-step tolerance.
        """
        if t <= self._EXACT_STEP_LIMIT:
            return self._residual_extra_stepwise(t, phi, mean)
        return self._residual_extra_batched(t, phi, mean)

    def _residual_extra_stepwise(self, t: int, phi, mean: float) -> float:
        total = 0.0
        hints = self._mode_hints(t)
        # the smooth multinomial sum bounds every quantity assembled below;
        # partial integrals may err at its relative tolerance
        budget = abs(self._multinomial_extra(t, phi, mean))
        for k in range(1, t + 1):
            er = self.expected_fraction(k - 1)
            if er <= 0.0:
                continue
            edges, floors = self.floor_pieces(k - 1)

            def log_parts(th, k=k):
                lp_cur = self.logpdf(k - 1, th)
                lp_prop = (self.logpdf(k - 2, th) if k >= 2
                           else self.logpdf0(th))
                lp_t = self.logpdf(t, th)
                return lp_cur, lp_prop, lp_t

            # smooth full second moment against the step target
            def full_sq(th):
                lp_cur, lp_prop, lp_t = log_parts(th)
                return float(np.exp(2.0 * lp_t - lp_cur)
                             * (phi(th) - mean) ** 2)

            e_full = self._quad(full_sq, hints=hints, scale=budget)
            # integer-part corrections, integrated piece by piece where the
            # integer part is a constant (the integrand is smooth there)
            e_floor_sq = 0.0
            e_floor_lin = 0.0
            for lo, hi, fl in zip(edges[:-1], edges[1:], floors):
                if fl == 0.0:
                    continue

                def piece_sq(th):
                    lp_cur, lp_prop, lp_t = log_parts(th)
                    return float(np.exp(lp_prop + 2.0 * (lp_t - lp_cur))
                                 * (phi(th) - mean) ** 2)

                def piece_lin(th):
                    lp_cur, lp_prop, lp_t = log_parts(th)
                    return float(np.exp(lp_prop + lp_t - lp_cur)
                                 * (phi(th) - mean))

                e_floor_sq += fl * self._quad(piece_sq, lo, hi, hints=hints,
                                              scale=budget)
                e_floor_lin += fl * self._quad(piece_lin, lo, hi,
                                               hints=hints,
                                               scale=np.sqrt(budget))
            # the first moment against the step target vanishes, leaving
            # minus the integer part; it enters squared
            total += (e_full - e_floor_sq) - e_floor_lin ** 2 / er
        return total

    def _residual_extra_batched(self, t: int, phi, mean: float) -> float:
        from scipy.integrate import quad, quad_vec
        ers = np.array([self.expected_fraction(k - 1)
                        for k in range(1, t + 1)])
        hints = self._mode_hints(t)
        # fractional part = weight minus integer part: the weight part of
        # the second moments is the smooth multinomial sum, the integer
        # parts jump at a point or two per step, all near the posterior
        # bulk; they only need rate-fitting accuracy, so they run with a
        # relaxed target under plain adaptive refinement
        smooth = self._multinomial_extra(t, phi, mean)

        def floor_sq(th):
            lp_cur, lp_prop, log_v, log_r = self._step_log_tables(t, th)
            fl = np.floor(np.exp(log_v))
            return float((np.exp(lp_prop + 2.0 * log_r) * fl).sum()
                         * (phi(th) - mean) ** 2)

        val, err = quad(floor_sq, 0.0, 1.0, points=hints, limit=800,
                        epsabs=max(1e-12, abs(smooth) * 1e-8),
                        epsrel=1e-8, full_output=1)[:2]
        if err > max(abs(smooth) * 1e-4, 1e-8):
            raise QuadratureError(
                f"integer-part quadrature failed (achieved error {err:.3e})")
        total = smooth - val

        def first_vec(th):
            lp_cur, lp_prop, log_v, log_r = self._step_log_tables(t, th)
            fl = np.floor(np.exp(log_v))
            return np.exp(lp_prop + log_r) * fl * (phi(th) - mean)

        floor_lin, err, info = quad_vec(
            first_vec, 0.0, 1.0, points=hints, limit=400,
            epsabs=1e-12, epsrel=1e-8, full_output=True)
        if not info.success and err > 1e-3:
            raise QuadratureError(
                f"vector quadrature failed (achieved error {err:.3e})")
        # the first moment against the step target vanishes, leaving minus
        # the integer part; it enters squared, so its sign is immaterial
        mask = ers > 0.0
        total -= float((floor_lin[mask] ** 2 / ers[mask]).sum())
        return total

    def sir(self, t: int, phi=None, scheme: str = "multinomial") -> float:
        phi = _as_phi_callable(phi)
        mean = self.posterior_mean_phi(t, phi)
        base = self.sis(t, phi)
        if scheme == "multinomial":
            return base + self._multinomial_extra(t, phi, mean)
        if scheme == "residual":
            return base + self._residual_extra(t, phi, mean)
        raise ValueError(f"unsupported scheme {scheme!r}")


def sir_fixed_param_variance(model: BetaBernoulliModel, phi=None,
                             t: Optional[int] = None,
                             scheme: str = "multinomial", **quad_opts):
    """Identity-kernel resampling variance on the conjugate model.

    The weighted-estimate variance equals the no-selection variance plus
    one extra term per step: under multinomial selection the
    early-posterior expectation of the squared late-to-early density ratio
    times the squared centered functional; under residual selection its
    fractional-part analogue.  Exact up to quadrature tolerance.
    """
    t = model.steps if t is None else int(t)
    return _BetaVarianceCalculator(model, **quad_opts).sir(t, phi,
                                                           scheme=scheme)


def posterior_ratio_integrality_gap(model: BetaBernoulliModel, theta: float,
                                    t_max: Optional[int] = None) -> float:
    """Distance of the one-step posterior density ratios at ``theta`` from
    the positive integers.

    The fixed-parameter residual-variance expansion needs this ratio to
    stay away from integers at the concentration point; bundled datasets
    assert a positive gap and regenerate otherwise.
    """
    calc = _BetaVarianceCalculator(model)
    t_max = model.steps if t_max is None else int(t_max)
    if t_max < 1:
        return float("inf")
    ratios = np.exp([calc._log_weight_ratio(k, theta)
                     for k in range(1, t_max + 1)])
    nearest = np.maximum(np.round(ratios), 1.0)
    return float(np.min(np.abs(ratios - nearest)))
