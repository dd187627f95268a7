"""Linearization about a stationary state and the pointwise stability tests.

The linearized generator splits into a transport part (coefficient
gamma*), a local decay part rho* = mu(., E*) + gamma*_s + M*, and a
finite-rank coupling whose kernel is assembled from the separable terms of
the attack kernel.  For each term k the kernel contributes

    c(y) alpha1_k(y) * g1_k(s) + alpha2_k(y) * g2_k(s),

with g1_k = alpha2_k * ((gamma_E n*)_s + mu_E n*) + alpha2_k' * gamma_E n*
and g2_k = alpha1_k * n*.  The dissipativity margin, the positivity
conditions, and the spectral machinery all consume these samples.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.integrate import cumulative_trapezoid

from .errors import GammaBoundError, SeparabilityError
from .grid import Grid, GridFunction, grid_derivative
from .ingredients import ModelSpec
from .steady import SteadyState, net_reproduction

__all__ = [
    "Linearization",
    "StabilityVerdict",
    "TrivialStabilityResult",
    "build_linearization",
    "dissipativity_margin",
    "positivity_check",
    "trivial_stability_check",
]


@dataclass(frozen=True)
class Linearization:
    """Sampled coefficient data of the linearized generator.

    sigma_star = mu(., E*) + M* is the transport-free part of rho*; the
    exponent of the survival factor pi(s, lambda) is stored as
    pi_exponent0 + lambda * tau, where tau is the cumulative 1/gamma* and
    pi_exponent0 = ln(gamma*(s)/gamma*(0)) + int (mu + M*)/gamma*.  That
    product form is analytically identical to exponentiating the
    cumulative (rho* + lambda)/gamma* but avoids compounding the grid
    derivative gamma*_s into every spectral quadrature.
    """

    state: SteadyState
    gamma_star: GridFunction
    gamma_star_s: GridFunction
    sigma_star: GridFunction
    rho_star: GridFunction
    lambda_weight: GridFunction
    beta_over_gamma0: GridFunction
    c_values: GridFunction
    gamma_E_star: GridFunction
    mu_E_star: GridFunction
    kernel_drift: GridFunction  # (gamma_E n*)_s + mu_E n*
    mu0: float
    alpha1_samples: tuple
    alpha2_samples: tuple
    alpha2_prime_samples: tuple
    u1_weights: tuple  # c * alpha1_k, the first averaging weight per term
    u2_weights: tuple  # alpha2_k, the second averaging weight per term
    g1_terms: tuple
    g2_terms: tuple
    g3_terms: tuple
    tau: GridFunction
    pi_exponent0: GridFunction

    @property
    def grid(self) -> Grid:
        return self.state.grid

    @property
    def n_terms(self) -> int:
        return len(self.g1_terms)

    def _single(self, items):
        if len(items) != 1:
            raise SeparabilityError(
                "strictly separable (single-term) attack kernel required; "
                f"this kernel has {len(items)} terms")
        return items[0]

    @property
    def g1(self) -> GridFunction:
        return self._single(self.g1_terms)

    @property
    def g2(self) -> GridFunction:
        return self._single(self.g2_terms)

    @property
    def g3(self) -> float:
        return self._single(self.g3_terms)


def build_linearization(model: ModelSpec, state: SteadyState) -> Linearization:
    grid = state.grid
    s = grid.nodes
    E = state.E.values
    M = state.M.values
    n = state.n.values

    gamma_star = model.gamma(s, E)
    if np.min(gamma_star) < model.gamma0 - 1e-12:
        raise GammaBoundError("gamma along the stationary environment is below gamma0")
    gamma_star_s = grid_derivative(grid.function(gamma_star)).values
    mu_star = model.mu(s, E)
    sigma = mu_star + M
    rho = sigma + gamma_star_s
    mu0 = float(np.min(sigma))

    gamma_E = model.gamma.d_env(s, E)
    mu_E = model.mu.d_env(s, E)
    drift = grid_derivative(grid.function(gamma_E * n)).values + mu_E * n

    c_vals = model.c(s)
    gE0_n0 = gamma_E[0] * state.n0
    alpha_s0 = np.zeros_like(s)
    alpha1_samples, alpha2_samples, alpha2_prime = [], [], []
    u1_w, u2_w, g1_terms, g2_terms, g3_terms = [], [], [], [], []
    for term in model.alpha.terms:
        a1 = term.alpha1(s)
        a2 = term.alpha2(s)
        a2p = term.alpha2.derivative(s)
        alpha_s0 += a1 * a2[0]
        alpha1_samples.append(grid.function(a1))
        alpha2_samples.append(grid.function(a2))
        alpha2_prime.append(grid.function(a2p))
        u1_w.append(grid.function(c_vals * a1))
        u2_w.append(grid.function(a2))
        g1_terms.append(grid.function(a2 * drift + a2p * gamma_E * n))
        g2_terms.append(grid.function(a1 * n))
        g3_terms.append(float(gE0_n0 * a2[0]))

    lam_weight = (model.beta(s) - gE0_n0 * c_vals * alpha_s0) / gamma_star[0]
    tau = cumulative_trapezoid(1.0 / gamma_star, s, initial=0.0)
    pi_exp0 = (np.log(gamma_star / gamma_star[0])
               + cumulative_trapezoid(sigma / gamma_star, s, initial=0.0))

    return Linearization(
        state=state,
        gamma_star=grid.function(gamma_star),
        gamma_star_s=grid.function(gamma_star_s),
        sigma_star=grid.function(sigma),
        rho_star=grid.function(rho),
        lambda_weight=grid.function(lam_weight),
        beta_over_gamma0=grid.function(model.beta(s) / gamma_star[0]),
        c_values=grid.function(c_vals),
        gamma_E_star=grid.function(gamma_E),
        mu_E_star=grid.function(mu_E),
        kernel_drift=grid.function(drift),
        mu0=mu0,
        alpha1_samples=tuple(alpha1_samples),
        alpha2_samples=tuple(alpha2_samples),
        alpha2_prime_samples=tuple(alpha2_prime),
        u1_weights=tuple(u1_w),
        u2_weights=tuple(u2_w),
        g1_terms=tuple(g1_terms),
        g2_terms=tuple(g2_terms),
        g3_terms=tuple(g3_terms),
        tau=grid.function(tau),
        pi_exponent0=grid.function(pi_exp0),
    )


def kernel_matrix(lin: Linearization) -> np.ndarray:
    """Coupling kernel sampled at node pairs.

    Entry [i, j] is the kernel with the averaging slot at node i and the
    response slot at node j:  sum_k (c alpha1_k)_i (g1_k)_j
    + (alpha2_k)_i (g2_k)_j.  Row i integrated against dy gives the
    coupling strength appearing in the dissipativity bound at s_i; the
    positivity condition asks every entry to be <= 0.
    """
    n = lin.grid.n_nodes
    km = np.zeros((n, n))
    for u1, u2, g1, g2 in zip(lin.u1_weights, lin.u2_weights,
                              lin.g1_terms, lin.g2_terms):
        km += np.outer(u1.values, g1.values) + np.outer(u2.values, g2.values)
    return km


@dataclass(frozen=True)
class StabilityVerdict:
    """Dissipativity margin and positivity hypotheses in one record.

    margin is the infimum over s of the slack in the pointwise
    dissipativity bound; when positive it is also the exponential decay
    rate kappa of the linearized semigroup (norm bounded by exp(-kappa t)).
    A negative margin is reported as-is: it is a growth *bound*, not an
    instability verdict.
    """

    margin: float
    stable_by_dissipativity: bool
    margin_profile: GridFunction
    positivity_pos1: bool
    positivity_pos2: bool
    aeg_hypotheses_met: bool

    def to_dict(self) -> dict:
        return {
            "margin": self.margin,
            "stable_by_dissipativity": self.stable_by_dissipativity,
            "positivity_pos1": self.positivity_pos1,
            "positivity_pos2": self.positivity_pos2,
            "aeg_hypotheses_met": self.aeg_hypotheses_met,
            "s": self.margin_profile.grid.nodes.tolist(),
            "margin_profile": self.margin_profile.values.tolist(),
        }


def _assemble_verdict(lin: Linearization) -> StabilityVerdict:
    grid = lin.grid
    km = kernel_matrix(lin)
    coupling = np.abs(km) @ grid.weights
    boundary_term = np.abs(lin.lambda_weight.values) * lin.gamma_star.values[0]
    profile = lin.sigma_star.values - boundary_term - coupling
    margin = float(np.min(profile))

    tol = 1e-12
    pos1 = bool(np.all(km <= tol))
    pos2 = bool(np.all(lin.lambda_weight.values >= -tol))
    # the kernel is finite rank (hence compact) by construction, so the
    # remaining hypotheses are the positivity pair and mu0 > 0
    aeg = pos1 and pos2 and lin.mu0 > 0
    return StabilityVerdict(margin, margin > 0, grid.function(profile), pos1, pos2, aeg)


def dissipativity_margin(lin: Linearization) -> StabilityVerdict:
    """Pointwise stability bound: mu + M* minus the boundary weight and the
    integrated coupling strength, minimized over the grid."""
    return _assemble_verdict(lin)


def positivity_check(lin: Linearization) -> StabilityVerdict:
    """Positivity of the linearized semigroup: the coupling kernel must be
    nonpositive at every node pair (pos1) and the boundary weight
    nonnegative at every node (pos2)."""
    return _assemble_verdict(lin)


@dataclass(frozen=True)
class TrivialStabilityResult:
    stable: bool
    R0: float

    def to_dict(self) -> dict:
        return {"stable": self.stable, "R0": self.R0}


def trivial_stability_check(model: ModelSpec, grid: Grid) -> TrivialStabilityResult:
    """Stability of the extinct state: mu(s, 0) > beta(s) at every node.

    Also reports the trivial-state net reproduction R(0); the pointwise
    criterion implies R(0) < 1.
    """
    s = grid.nodes
    stable = bool(np.all(model.mu(s, np.zeros_like(s)) > model.beta(s)))
    r0 = net_reproduction(model, grid.zeros(), grid.zeros())
    return TrivialStabilityResult(stable, r0)
