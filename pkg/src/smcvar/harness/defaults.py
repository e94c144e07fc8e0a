"""Bundled demo models with frozen observation sequences.

Each bundled model is small enough for exact variance computation and is
referenced by name from experiment configs (``model: {"name": ...}``).
The observation sequences are frozen literals (see ``_data``) so that every
experiment is byte-reproducible.
"""

from __future__ import annotations

import numpy as np

from ..models import (BetaBernoulliModel, FiniteHMM, LinearGaussianSSM,
                      MarginalPairModel)
from . import _data

__all__ = ["bundled_model", "bundled_names"]


def _bits(s: str) -> np.ndarray:
    return np.frombuffer(s.encode(), dtype=np.uint8) - ord("0")


def two_state_hmm() -> FiniteHMM:
    """Two-state bootstrap chain with informative binary emissions."""
    return FiniteHMM(
        transition=[[0.9, 0.1], [0.2, 0.8]],
        emission=[[0.2, 0.8], [0.7, 0.3]],
        initial=[0.5, 0.5],
        observations=_bits(_data.TWO_STATE_OBS))


def three_state_contractive_hmm() -> FiniteHMM:
    """Three-state chain with kernel-ratio bound 3 and emission contrast 2.

    Every transition column has max/min ratio at most 3 and the emission
    table lies in [1/3, 2/3]; the strict contraction makes the filtering
    variance plateau, which the stability experiment verifies over 200
    steps.
    """
    return FiniteHMM(
        transition=[[0.45, 0.30, 0.25],
                    [0.30, 0.45, 0.25],
                    [0.15, 0.35, 0.50]],
        emission=[[1 / 3, 2 / 3], [0.5, 0.5], [2 / 3, 1 / 3]],
        initial=[1 / 3, 1 / 3, 1 / 3],
        observations=_bits(_data.THREE_STATE_OBS))


def beta_bernoulli() -> BetaBernoulliModel:
    """Conjugate fixed-parameter model with an overdispersed instrumental.

    10^4 Bernoulli draws at an irrational success probability; the
    irrationality keeps the one-step posterior density ratios away from
    the integers at the concentration point, which the residual-variance
    expansion needs.
    """
    return BetaBernoulliModel(
        alpha=2.0, beta=2.0, alpha0=1.0, beta0=1.0,
        observations=_bits(_data.BETA_OBS),
        true_theta=1.0 / np.sqrt(3.0))


def lgssm() -> LinearGaussianSSM:
    """Scalar AR(1) state-space model with unit noise scales."""
    return LinearGaussianSSM(ar=0.9, state_sd=1.0, obs_sd=1.0,
                             initial_mean=0.0, initial_sd=2.0,
                             observations=np.array(_data.LGSSM_OBS))


_CONDITIONAL_TARGET = [[0.6, 0.3, 0.1], [0.2, 0.3, 0.5]]
_CONDITIONAL_PROPOSAL = [[0.3, 0.4, 0.3], [0.4, 0.4, 0.2]]


def marginal_pair(exact_conditionals: bool = False) -> MarginalPairModel:
    """Marginalizable pair on the two-state chain with a 3-value nuisance.

    With ``exact_conditionals`` the nuisance proposal equals its target
    conditional, the branch on which the marginalized filter gains
    nothing; otherwise the proposal is deliberately wrong and the gain is
    strict.
    """
    target = np.array(_CONDITIONAL_TARGET)
    proposal = target if exact_conditionals else np.array(
        _CONDITIONAL_PROPOSAL)
    return MarginalPairModel(two_state_hmm(), target, proposal)


_BUNDLED = {
    "two-state-hmm": two_state_hmm,
    "three-state-contractive": three_state_contractive_hmm,
    "beta-bernoulli": beta_bernoulli,
    "lgssm": lgssm,
    "marginal-pair": lambda: marginal_pair(False),
    "marginal-pair-exact": lambda: marginal_pair(True),
}


def bundled_names() -> list[str]:
    return sorted(_BUNDLED)


def bundled_model(name: str):
    """Instantiate a bundled model by name."""
    try:
        return _BUNDLED[name]()
    except KeyError:
        raise KeyError(f"unknown bundled model {name!r}; available: "
                       f"{', '.join(bundled_names())}") from None
