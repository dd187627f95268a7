"""Stationary states of the cannibalism model.

A positive equilibrium satisfies a fixed-point structure: the profile is
an explicit exponential of the feedbacks (E, M), the feedbacks are
integrals of the profile, and the boundary density n(0) is pinned by the
net reproduction condition R = 1.  The solver nests a damped Picard
iteration on (E, M) inside a bisection on n(0).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.integrate import cumulative_trapezoid

from .errors import ConvergenceError, GammaBoundError, NoEquilibriumError
from .grid import Grid, GridFunction
from .ingredients import ModelSpec

__all__ = [
    "SteadyState",
    "feedbacks_from_density",
    "profile_from_feedbacks",
    "net_reproduction",
    "solve_steady",
    "steady_from_arrays",
    "trivial_steady",
]


@dataclass(frozen=True)
class SteadyState:
    """A self-consistent equilibrium with its residual diagnostics.

    residual_fp bounds the sup-norm mismatch between (E, M) and the
    feedbacks recomputed from n; residual_R is |R - 1| (for the trivial
    branch of solve_steady it is |R(0) - 1|).
    """

    n0: float
    n: GridFunction
    E: GridFunction
    M: GridFunction
    residual_fp: float
    residual_R: float

    @property
    def grid(self) -> Grid:
        return self.n.grid

    def to_dict(self) -> dict:
        return {
            "n0": self.n0,
            "residual_fp": self.residual_fp,
            "residual_R": self.residual_R,
            "s": self.grid.nodes.tolist(),
            "n": self.n.values.tolist(),
            "E": self.E.values.tolist(),
            "M": self.M.values.tolist(),
        }


def steady_from_arrays(grid: Grid, n0: float, n, E, M,
                       residual_fp: float = 0.0, residual_R: float = 0.0) -> SteadyState:
    """Rebuild a SteadyState from raw arrays (deserialization helper)."""
    return SteadyState(float(n0), grid.function(n), grid.function(E),
                       grid.function(M), float(residual_fp), float(residual_R))


def feedbacks_from_density(model: ModelSpec, n: GridFunction):
    """Cannibalism feedbacks of a density: energy intake E and extra
    mortality M.

    E(s) integrates c(y) alpha(y, s) n(y) over prey sizes y; M(s)
    integrates alpha(s, y) n(y) over attacker sizes y (note the swapped
    kernel slots).
    """
    g = n.grid
    s, w, nv = g.nodes, g.weights, n.values
    cv = model.c(s)
    E = np.zeros_like(s)
    M = np.zeros_like(s)
    for term in model.alpha.terms:
        a1 = term.alpha1(s)
        a2 = term.alpha2(s)
        E += a2 * float(w @ (cv * a1 * nv))
        M += a1 * float(w @ (a2 * nv))
    return g.function(E), g.function(M)


def _survival_exponent(model: ModelSpec, E: GridFunction, M: GridFunction):
    """gamma samples along (s, E(s)) and the cumulative (mu + M)/gamma."""
    g = E.grid
    s = g.nodes
    gam = model.gamma(s, E.values)
    if np.min(gam) < model.gamma0 - 1e-12:
        raise GammaBoundError(
            f"gamma dropped to {np.min(gam):.6g}, below the declared bound {model.gamma0}")
    expo = cumulative_trapezoid((model.mu(s, E.values) + M.values) / gam, s, initial=0.0)
    return gam, expo


def profile_from_feedbacks(model: ModelSpec, n0: float, E: GridFunction,
                           M: GridFunction) -> GridFunction:
    """Stationary profile for given boundary density and frozen feedbacks:
    n(s) = n0 * gamma(0,E(0))/gamma(s,E(s)) * exp(-int_0^s (mu+M)/gamma)."""
    if n0 < 0:
        raise ValueError("boundary density must be nonnegative")
    gam, expo = _survival_exponent(model, E, M)
    return E.grid.function(n0 * gam[0] / gam * np.exp(-expo))


def net_reproduction(model: ModelSpec, E: GridFunction, M: GridFunction) -> float:
    """Expected lifetime offspring per newborn in the standing environment:
    R = int beta(s)/gamma(s,E(s)) * exp(-int_0^s (mu+M)/gamma) ds."""
    g = E.grid
    gam, expo = _survival_exponent(model, E, M)
    return float(g.weights @ (model.beta(g.nodes) / gam * np.exp(-expo)))


def trivial_steady(model: ModelSpec, grid: Grid) -> SteadyState:
    """The extinct state n = 0 with zero feedbacks and zero residuals."""
    z = grid.zeros()
    return SteadyState(0.0, z, z, z, 0.0, 0.0)


def solve_steady(model: ModelSpec, grid: Grid, n0_bracket, fp_tol: float = 1e-8,
                 fp_damping: float = 0.5, max_iter: int = 500) -> SteadyState:
    """Find an equilibrium with n(0) inside the given bracket.

    Inner loop: damped Picard on the feedbacks, from (E, M) = (0, 0),
    terminating when the undamped fixed-point residual drops below an
    internal tolerance well under fp_tol.  Outer loop: bisection on n(0)
    for F(n0) = R - 1, terminating at |F| < fp_tol.

    The degenerate bracket [0, 0] returns the trivial state (with
    residual_R = |R(0) - 1|).  When F is already below tolerance at both
    ends (no-cannibalism models make R independent of n0), the midpoint is
    returned.  A bracket without a sign change raises NoEquilibriumError.
    """
    lo, hi = float(n0_bracket[0]), float(n0_bracket[1])
    if lo < 0 or hi < lo:
        raise ValueError("bracket must satisfy 0 <= lo <= hi")
    if not 0.0 < fp_damping <= 1.0:
        raise ValueError("damping must lie in (0, 1]")
    if hi == 0.0:
        state = trivial_steady(model, grid)
        rho = abs(net_reproduction(model, state.E, state.M) - 1.0)
        return SteadyState(0.0, state.n, state.E, state.M, 0.0, rho)

    inner_tol = 0.05 * fp_tol  # keeps F-evaluation noise below the outer tolerance

    def solve_inner(n0: float):
        E = grid.zeros()
        M = grid.zeros()
        for _ in range(max_iter):
            n = profile_from_feedbacks(model, n0, E, M)
            Et, Mt = feedbacks_from_density(model, n)
            res = max(np.max(np.abs(Et.values - E.values)),
                      np.max(np.abs(Mt.values - M.values)))
            E = grid.function((1.0 - fp_damping) * E.values + fp_damping * Et.values)
            M = grid.function((1.0 - fp_damping) * M.values + fp_damping * Mt.values)
            if res < inner_tol:
                n = profile_from_feedbacks(model, n0, E, M)
                Ev, Mv = feedbacks_from_density(model, n)
                residual_fp = max(np.max(np.abs(Ev.values - E.values)),
                                  np.max(np.abs(Mv.values - M.values)))
                return n, E, M, residual_fp
        raise ConvergenceError(
            f"feedback iteration did not converge in {max_iter} steps at n0 = {n0:.6g}")

    def eval_F(n0: float):
        sol = solve_inner(n0)
        return net_reproduction(model, sol[1], sol[2]) - 1.0, sol

    def make_state(n0, sol, f_val):
        n, E, M, residual_fp = sol
        return SteadyState(n0, n, E, M, residual_fp, abs(f_val))

    f_lo, sol_lo = eval_F(lo)
    f_hi, sol_hi = eval_F(hi)
    if abs(f_lo) < fp_tol and abs(f_hi) < fp_tol:
        mid = 0.5 * (lo + hi)
        f_mid, sol = eval_F(mid)
        return make_state(mid, sol, f_mid)
    if abs(f_lo) < fp_tol:
        return make_state(lo, sol_lo, f_lo)
    if abs(f_hi) < fp_tol:
        return make_state(hi, sol_hi, f_hi)
    if f_lo * f_hi > 0:
        raise NoEquilibriumError(
            "no positive equilibrium found in bracket: R - 1 has no sign change "
            f"({f_lo:.3g} at {lo:.6g}, {f_hi:.3g} at {hi:.6g})")

    a, fa = lo, f_lo
    b = hi
    for _ in range(200):
        mid = 0.5 * (a + b)
        f_mid, sol = eval_F(mid)
        if abs(f_mid) < fp_tol:
            return make_state(mid, sol, f_mid)
        if fa * f_mid < 0:
            b = mid
        else:
            a, fa = mid, f_mid
    raise ConvergenceError("bisection on the boundary density did not reach tolerance")
