"""Point-spectrum machinery for strictly separable attack kernels.

For a single-term kernel the linearized eigenvalue problem collapses to a
3x3 linear system in (u(0), u1_bar, u2_bar); its determinant K(lambda) is
the characteristic determinant whose real zeros in lambda > -mu0 are
scanned here.  The renewal part alone (transport plus boundary) has the
scalar characteristic function L(lambda) and an explicit resolvent, both
built from the survival factor

    pi(s, lambda) = exp(-int_0^s (rho* + lambda)/gamma* dr).

All inner integrals of the form pi(s) * int_0^s g/(gamma* pi) are
evaluated by a per-cell exponent-difference recurrence, so no tiny pi is
ever divided by another tiny pi.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.integrate import cumulative_trapezoid

from .errors import (ConvergenceError, LambdaDomainError, ModelAssumptionError,
                     PoleError)
from .grid import GridFunction, grid_derivative
from .ingredients import ModelSpec
from .linearization import Linearization
from .steady import SteadyState

__all__ = [
    "CharacteristicSample",
    "RootBracket",
    "SpectralReport",
    "pi_eval",
    "characteristic_K",
    "characteristic_L",
    "l_prime_zero",
    "scan_real_roots_K",
    "build_spectral_report",
    "default_lambda_range",
    "proportional_attack_instability",
    "reproduction_env_derivative",
    "resolvent_AB",
    "reconstruct_eigenfunction",
]


@dataclass(frozen=True)
class CharacteristicSample:
    """K, L, and the nine determinant coefficients at one real lambda."""

    lam: float
    K: float
    a: tuple  # a1..a9
    L: float

    def to_dict(self) -> dict:
        out = {"lambda": self.lam, "K": self.K, "L": self.L}
        out.update({f"a{i + 1}": v for i, v in enumerate(self.a)})
        return out


@dataclass(frozen=True)
class RootBracket:
    root: float
    lo: float
    hi: float
    value: float

    def to_dict(self) -> dict:
        return {"root": self.root, "bracket": [self.lo, self.hi], "value": self.value}


@dataclass(frozen=True)
class SpectralReport:
    samples: tuple
    real_roots_K: tuple
    K0: float
    unstable_by_K0: bool
    L_roots: tuple
    Lprime0: float
    note: str = "real-axis scan only; complex eigenvalues are not examined"

    def to_dict(self) -> dict:
        return {
            "samples": [s.to_dict() for s in self.samples],
            "real_roots_K": [r.to_dict() for r in self.real_roots_K],
            "K0": self.K0,
            "unstable_by_K0": self.unstable_by_K0,
            "L_roots": [r.to_dict() for r in self.L_roots],
            "Lprime0": self.Lprime0,
            "note": self.note,
        }


def _check_domain(lin: Linearization, lam: float):
    if not lam > -lin.mu0:
        raise LambdaDomainError(
            f"lambda = {lam:.6g} outside the validity domain lambda > {-lin.mu0:.6g}")


def _pi_exponent(lin: Linearization, lam: float) -> np.ndarray:
    return lin.pi_exponent0.values + lam * lin.tau.values


def pi_eval(lin: Linearization, lam: float) -> GridFunction:
    """Survival factor pi(s, lambda); pi(0, lambda) = 1."""
    _check_domain(lin, lam)
    return lin.grid.function(np.exp(-_pi_exponent(lin, lam)))


def _weighted_history(lin: Linearization, phi: np.ndarray, gvals: np.ndarray) -> np.ndarray:
    """J(s) = int_0^s exp(phi(r) - phi(s)) g(r)/gamma*(r) dr by trapezoid.

    Equivalent to pi(s) * cumulative(g / (gamma* pi)) but evaluated with
    per-cell exponent differences, which stays finite where pi underflows.
    """
    s = lin.grid.nodes
    gg = gvals / lin.gamma_star.values
    J = np.empty_like(gg)
    J[0] = 0.0
    for i in range(s.size - 1):
        fac = np.exp(phi[i] - phi[i + 1])
        h = s[i + 1] - s[i]
        J[i + 1] = fac * J[i] + 0.5 * h * (fac * gg[i] + gg[i + 1])
    return J


def _det3(m) -> float:
    return float(
        m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
        - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
        + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]))


def _system_matrix(lin: Linearization, lam: float):
    """The 3x3 eigenvalue system in (u(0), u1_bar, u2_bar) plus the pieces
    needed to rebuild an eigenfunction."""
    _check_domain(lin, lam)
    g1 = lin.g1.values
    g2 = lin.g2.values
    g3 = lin.g3
    w = lin.grid.weights
    phi = _pi_exponent(lin, lam)
    pi = np.exp(-phi)
    J1 = _weighted_history(lin, phi, g1)
    J2 = _weighted_history(lin, phi, g2)
    u1w = lin.u1_weights[0].values
    u2w = lin.u2_weights[0].values
    bw = lin.beta_over_gamma0.values
    a1 = -float(w @ (u1w * pi))
    a2 = float(w @ (u1w * J1))
    a3 = float(w @ (u1w * J2))
    a4 = -float(w @ (u2w * pi))
    a5 = float(w @ (u2w * J1))
    a6 = float(w @ (u2w * J2))
    a7 = -float(w @ (bw * pi))
    a8 = float(w @ (bw * J1))
    a9 = float(w @ (bw * J2))
    matrix = ((a1, 1.0 + a2, a3),
              (a4, a5, 1.0 + a6),
              (1.0 + a7, g3 + a8, a9))
    return matrix, (a1, a2, a3, a4, a5, a6, a7, a8, a9), pi, J1, J2


def characteristic_L(lin: Linearization, lam: float) -> float:
    """Characteristic function of the transport-renewal part:
    L(lambda) = Lambda(pi(., lambda)) - 1."""
    pi = pi_eval(lin, lam)
    w = lin.grid.weights
    return float(w @ (lin.lambda_weight.values * pi.values)) - 1.0


def l_prime_zero(lin: Linearization) -> float:
    """Slope of L at lambda = 0; strictly negative at a positive state
    with nontrivial fertility."""
    _check_domain(lin, 0.0)
    pi0 = np.exp(-lin.pi_exponent0.values)
    w = lin.grid.weights
    return -float(w @ (lin.beta_over_gamma0.values * pi0 * lin.tau.values))


def characteristic_K(lin: Linearization, lam: float) -> CharacteristicSample:
    """Characteristic determinant sample at one real lambda > -mu0.

    Requires the strictly separable kernel; the L value at the same lambda
    rides along for reporting.
    """
    matrix, a, pi, _, _ = _system_matrix(lin, lam)
    K = _det3(matrix)
    L = float(lin.grid.weights @ (lin.lambda_weight.values * pi)) - 1.0
    return CharacteristicSample(lam, K, a, L)


def default_lambda_range(lin: Linearization) -> tuple:
    """Scan window: just right of -mu0 up to where K has flattened to 1."""
    if lin.mu0 <= 0:
        raise LambdaDomainError("spectral scan requires inf(mu + M*) > 0")
    hi = 10.0 * float(np.max(lin.rho_star.values)) / float(np.min(lin.gamma_star.values))
    return (-lin.mu0 * 0.999, max(hi, 1.0))


def _bisect(fun, a: float, b: float, fa: float, fb: float, tol: float) -> RootBracket:
    lo0, hi0 = a, b
    for _ in range(200):
        mid = 0.5 * (a + b)
        fm = fun(mid)
        if abs(fm) < tol:
            return RootBracket(mid, lo0, hi0, fm)
        if fa * fm <= 0:
            b, fb = mid, fm
        else:
            a, fa = mid, fm
    raise ConvergenceError("bisection failed to reach the root tolerance")


def _roots_from_samples(fun, xs, ys, root_tol: float):
    roots = []
    for i in range(len(xs) - 1):
        if ys[i] == 0.0:
            roots.append(RootBracket(float(xs[i]), float(xs[i]), float(xs[i]), 0.0))
        elif ys[i] * ys[i + 1] < 0:
            roots.append(_bisect(fun, float(xs[i]), float(xs[i + 1]),
                                 float(ys[i]), float(ys[i + 1]), root_tol))
    if len(ys) and ys[-1] == 0.0:
        roots.append(RootBracket(float(xs[-1]), float(xs[-1]), float(xs[-1]), 0.0))
    return tuple(roots)


def scan_real_roots_K(lin: Linearization, lambda_range, n_scan: int = 200,
                      root_tol: float = 1e-9):
    """Sample K on the range and bisect every sign change.

    Returns (samples, roots) with the roots ascending; each root records
    its bracketing interval and the K value at termination.
    """
    lo, hi = float(lambda_range[0]), float(lambda_range[1])
    _check_domain(lin, lo)
    if n_scan < 2:
        raise ValueError("n_scan must be at least 2")
    lams = np.linspace(lo, hi, n_scan)
    samples = tuple(characteristic_K(lin, lam) for lam in lams)
    kvals = [s.K for s in samples]
    roots = _roots_from_samples(lambda x: characteristic_K(lin, x).K,
                                lams, kvals, root_tol)
    return samples, roots


def build_spectral_report(lin: Linearization, lambda_range=None, n_scan: int = 200,
                          root_tol: float = 1e-9) -> SpectralReport:
    """Full spectral summary: K/L samples, real roots of both, the K(0)
    instability verdict, and L'(0)."""
    if lin.mu0 <= 0:
        raise LambdaDomainError("spectral analysis requires inf(mu + M*) > 0")
    if lambda_range is None:
        lambda_range = default_lambda_range(lin)
    samples, k_roots = scan_real_roots_K(lin, lambda_range, n_scan, root_tol)
    lams = [s.lam for s in samples]
    lvals = [s.L for s in samples]
    l_roots = _roots_from_samples(lambda x: characteristic_L(lin, x),
                                  lams, lvals, root_tol)
    k0 = characteristic_K(lin, 0.0).K
    return SpectralReport(samples, k_roots, k0, k0 < 0, l_roots, l_prime_zero(lin))


def proportional_attack_instability(lin: Linearization, p: float):
    """Pointwise instability test for the proportional-attack special case
    c * alpha1 = p * alpha2 with alpha2(0) = 0.

    Returns (condition_holds, profile).  The profile is the bracketed
    expression whose negativity forces K(0) < 0; the node at s = 0 is
    excluded from the verdict because the preconditions force the profile
    to vanish there identically, and the integral argument only needs
    negativity on s > 0.
    """
    if p <= 0:
        raise ValueError("proportionality factor must be positive")
    u1w = lin.u1_weights[0].values  # single-term access raises for multi-term kernels
    a1 = lin.alpha1_samples[0].values
    a2 = lin.alpha2_samples[0].values
    a2p = lin.alpha2_prime_samples[0].values
    scale = max(1.0, float(np.max(np.abs(u1w))), p * float(np.max(np.abs(a2))))
    if np.max(np.abs(u1w - p * a2)) > 1e-8 * scale:
        raise ModelAssumptionError("kernel does not satisfy c * alpha1 = p * alpha2")
    if abs(a2[0]) > 1e-12 * scale:
        raise ModelAssumptionError("proportional-attack case needs alpha2(0) = 0")

    gE = lin.gamma_E_star.values
    gE_s = grid_derivative(lin.gamma_E_star).values
    gs = lin.gamma_star.values
    profile = (a1 / p + a2p * gE
               + a2 * (gE_s - gE * (lin.gamma_star_s.values + lin.sigma_star.values) / gs
                       + lin.mu_E_star.values))
    condition = bool(np.all(profile[1:] < 0))
    return condition, lin.grid.function(profile)


def reproduction_env_derivative(model: ModelSpec, state: SteadyState, p: float) -> float:
    """Derivative of the age-structured net reproduction in the environment
    direction, for the proportional-attack case with gamma identically 1.

    Positive values mean reproduction improves with more cannibalism
    pressure at the standing environment, the intuitive reading of the
    instability condition.
    """
    if p <= 0:
        raise ValueError("proportionality factor must be positive")
    grid = state.grid
    s = grid.nodes
    E = state.E.values
    zeros = np.zeros_like(s)
    if np.max(np.abs(model.gamma(s, zeros) - 1.0)) > 1e-12 or \
            np.max(np.abs(model.gamma.d_env(s, E))) > 1e-12:
        raise ModelAssumptionError("age-structured form requires gamma identically 1")
    if model.alpha.n_terms != 1:
        raise ModelAssumptionError("strictly separable attack kernel required")
    term = model.alpha.terms[0]
    a1 = term.alpha1(s)
    a2 = term.alpha2(s)
    cv = model.c(s)
    scale = max(1.0, float(np.max(np.abs(cv * a1))), p * float(np.max(np.abs(a2))))
    if np.max(np.abs(cv * a1 - p * a2)) > 1e-8 * scale:
        raise ModelAssumptionError("kernel does not satisfy c * alpha1 = p * alpha2")
    if np.any(a2[1:] <= 0) and np.max(np.abs(a2)) > 0:
        raise ModelAssumptionError("alpha2 must be positive away from s = 0")

    # alpha1/alpha2 where alpha2 vanishes: p/c by the proportionality
    # relation (the 0/0 limit); identically zero kernels contribute nothing
    ratio = np.zeros_like(s)
    if np.max(np.abs(a2)) > 0:
        mask = a2 > 0
        ratio[mask] = a1[mask] / a2[mask]
        safe_c = np.where(cv > 0, cv, np.inf)
        ratio[~mask] = p / safe_c[~mask]

    survival = cumulative_trapezoid(model.mu(s, E) + E * ratio / p, s, initial=0.0)
    pressure = cumulative_trapezoid(model.mu.d_env(s, E) + ratio / p, s, initial=0.0)
    return -float(grid.weights @ (model.beta(s) * np.exp(-survival) * pressure))


def resolvent_AB(lin: Linearization, lam: float, f: GridFunction) -> GridFunction:
    """Solve (lambda - (A + B)) u = f for the transport-renewal part.

    u(s) = u(0) pi(s, lambda) + int_0^s exp{-int_y^s (rho*+lambda)/gamma*}
    f(y)/gamma*(y) dy, with u(0) fixed by the boundary functional; raises
    PoleError at (numerical) zeros of L.
    """
    _check_domain(lin, lam)
    L = characteristic_L(lin, lam)
    if abs(L) < 1e-9:
        raise PoleError(f"lambda = {lam:.6g} is a pole of the resolvent (L = {L:.3g})")
    phi = _pi_exponent(lin, lam)
    pi = np.exp(-phi)
    v = _weighted_history(lin, phi, f.values)
    w = lin.grid.weights
    lam_w = lin.lambda_weight.values
    u0 = float(w @ (lam_w * v)) / (-L)
    return lin.grid.function(u0 * pi + v)


def reconstruct_eigenfunction(lin: Linearization, lam: float):
    """Eigenfunction candidate at a determinant root.

    Takes the null vector (u(0), u1_bar, u2_bar) of the 3x3 system and
    assembles u = u(0) pi - u1_bar J1 - u2_bar J2, normalized to unit L1
    norm with nonnegative mean.  Returns (u, coefficients).
    """
    matrix, _, pi, J1, J2 = _system_matrix(lin, lam)
    m = np.array(matrix)
    _, _, vt = np.linalg.svd(m)
    coeff = vt[-1]
    u = coeff[0] * pi - coeff[1] * J1 - coeff[2] * J2
    norm = float(lin.grid.weights @ np.abs(u))
    if norm > 0:
        u = u / norm
        coeff = coeff / norm
    if float(lin.grid.weights @ u) < 0:
        u, coeff = -u, -coeff
    return lin.grid.function(u), tuple(float(x) for x in coeff)
