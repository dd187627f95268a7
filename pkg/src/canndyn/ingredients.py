"""Model ingredients as parametric rate families with closed-form partials.

The five ingredients -- fertility beta(s), mortality mu(s, E), growth
gamma(s, E), attack kernel alpha(y, s), and prey energetic value c(s) --
are drawn from a fixed, closed set of parametric families.  That keeps the
environment partials mu_E, gamma_E and the kernel derivative D2-alpha
exact: no numerical differentiation enters through the feedback direction.

The attack kernel is a finite sum of separable terms alpha1(y) * alpha2(s)
(prey factor times attacker factor); a single term is the strictly
separable case required by the characteristic-determinant machinery.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np
from scipy import special

from .errors import ConfigError, SelectorError

__all__ = [
    "Rate1D",
    "Rate2D",
    "KernelTerm",
    "AttackKernel",
    "ModelSpec",
    "Violation",
    "ValidationReport",
    "evaluate",
    "validate_model",
    "parse_model_config",
    "model_to_config",
    "dumps_model_config",
]

RATE1D_FAMILIES = ("constant", "exp_decay", "poly_exp", "saturating_ramp")
FEEDBACK_KINDS = ("none", "linear", "saturating")

_PARAM_COUNT = {"constant": 1, "exp_decay": 2, "poly_exp": 3, "saturating_ramp": 3}


@dataclass(frozen=True)
class Rate1D:
    """One-argument rate, bounded on [0, inf) by construction.

    constant:        p0
    exp_decay:       p0 * exp(-p1 s),              p1 >= 0
    poly_exp:        p0 * s^p1 * exp(-p2 s),       p1 = 0 or p1 >= 1, p2 > 0
    saturating_ramp: p0 + p1 * (1 - exp(-p2 s)),   p2 >= 0

    The poly_exp exponent is restricted to 0 or >= 1 so the s-derivative
    stays bounded at s = 0.
    """

    family: str
    params: tuple

    def __post_init__(self):
        if self.family not in RATE1D_FAMILIES:
            raise ValueError(f"unknown rate family {self.family!r}")
        p = tuple(float(v) for v in self.params)
        if len(p) != _PARAM_COUNT[self.family]:
            raise ValueError(
                f"{self.family} takes {_PARAM_COUNT[self.family]} parameters, got {len(p)}")
        if not all(math.isfinite(v) for v in p):
            raise ValueError("non-finite parameter")
        if self.family == "exp_decay" and p[1] < 0:
            raise ValueError("exp_decay needs p1 >= 0")
        if self.family == "poly_exp":
            if not (p[1] == 0.0 or p[1] >= 1.0):
                raise ValueError("poly_exp exponent must be 0 or >= 1")
            if p[2] <= 0:
                raise ValueError("poly_exp needs p2 > 0")
        if self.family == "saturating_ramp" and p[2] < 0:
            raise ValueError("saturating_ramp needs p2 >= 0")
        object.__setattr__(self, "params", p)

    def __call__(self, s):
        s = np.asarray(s, dtype=float)
        p = self.params
        if self.family == "constant":
            out = np.full(s.shape, p[0])
        elif self.family == "exp_decay":
            out = p[0] * np.exp(-p[1] * s)
        elif self.family == "poly_exp":
            out = p[0] * s ** p[1] * np.exp(-p[2] * s)
        else:
            out = p[0] + p[1] * (1.0 - np.exp(-p[2] * s))
        return out if out.ndim else float(out)

    def derivative(self, s):
        """Closed-form d/ds."""
        s = np.asarray(s, dtype=float)
        p = self.params
        if self.family == "constant":
            out = np.zeros(s.shape)
        elif self.family == "exp_decay":
            out = -p[0] * p[1] * np.exp(-p[1] * s)
        elif self.family == "poly_exp":
            if p[1] == 0.0:
                out = -p[0] * p[2] * np.exp(-p[2] * s)
            else:
                out = p[0] * np.exp(-p[2] * s) * (p[1] * s ** (p[1] - 1.0) - p[2] * s ** p[1])
        else:
            out = p[1] * p[2] * np.exp(-p[2] * s)
        return out if out.ndim else float(out)

    def tail_fraction(self, s_max: float) -> float:
        """Fraction of the integral over [0, inf) beyond s_max.

        Returns 1.0 when the integral diverges (truncation unjustified) and
        0.0 for the identically zero rate.
        """
        p = self.params
        if self.family == "constant":
            return 0.0 if p[0] == 0 else 1.0
        if self.family == "exp_decay":
            if p[0] == 0:
                return 0.0
            if p[1] == 0:
                return 1.0
            return float(np.exp(-p[1] * s_max))
        if self.family == "poly_exp":
            if p[0] == 0:
                return 0.0
            return float(special.gammaincc(p[1] + 1.0, p[2] * s_max))
        # saturating_ramp -> p0 + p1 at infinity
        if p[2] == 0 or p[1] == 0:
            return 0.0 if p[0] == 0 else 1.0
        if p[0] + p[1] != 0:
            return 1.0
        return float(np.exp(-p[2] * s_max))


def _fb_value(kind: str, E: np.ndarray) -> np.ndarray:
    if kind == "none":
        return np.zeros_like(E)
    if kind == "linear":
        return E
    return E / (1.0 + E)


def _fb_slope(kind: str, E: np.ndarray) -> np.ndarray:
    if kind == "none":
        return np.zeros_like(E)
    if kind == "linear":
        return np.ones_like(E)
    return 1.0 / (1.0 + E) ** 2


@dataclass(frozen=True)
class Rate2D:
    """Size-dependent base rate plus an additive environment response.

    value(s, E) = base(s) + feedback_coeff * f(E), with f the identity
    (linear), E/(1+E) (saturating), or 0 (none).  The E-partial is exact.
    """

    base: Rate1D
    feedback: str = "none"
    feedback_coeff: float = 0.0

    def __post_init__(self):
        if self.feedback not in FEEDBACK_KINDS:
            raise ValueError(f"unknown feedback kind {self.feedback!r}")
        coeff = float(self.feedback_coeff)
        if not math.isfinite(coeff):
            raise ValueError("non-finite feedback coefficient")
        object.__setattr__(self, "feedback_coeff", coeff)

    def __call__(self, s, E):
        E = np.asarray(E, dtype=float)
        out = self.base(s) + self.feedback_coeff * _fb_value(self.feedback, E)
        return out if np.ndim(out) else float(out)

    def d_env(self, s, E):
        """Exact partial derivative in the environment argument."""
        E = np.asarray(E, dtype=float)
        out = 0.0 * self.base(s) + self.feedback_coeff * _fb_slope(self.feedback, E)
        return out if np.ndim(out) else float(out)


@dataclass(frozen=True)
class KernelTerm:
    """One separable piece alpha1(y) * alpha2(s) of the attack kernel."""

    alpha1: Rate1D  # prey factor: likelihood of being attacked at size y
    alpha2: Rate1D  # attacker factor: attack activity of size-s individuals


@dataclass(frozen=True)
class AttackKernel:
    """alpha(y, s) = sum_k alpha1_k(y) * alpha2_k(s); finite rank by design."""

    terms: tuple

    def __post_init__(self):
        terms = tuple(self.terms)
        if not terms:
            raise ValueError("attack kernel needs at least one term")
        if not all(isinstance(t, KernelTerm) for t in terms):
            raise ValueError("terms must be KernelTerm instances")
        object.__setattr__(self, "terms", terms)

    @property
    def n_terms(self) -> int:
        return len(self.terms)

    def __call__(self, y, s):
        out = sum(t.alpha1(y) * t.alpha2(s) for t in self.terms)
        return out if np.ndim(out) else float(out)

    def d_second(self, y, s):
        """D2-alpha: derivative in the attacker-size argument."""
        out = sum(t.alpha1(y) * t.alpha2.derivative(s) for t in self.terms)
        return out if np.ndim(out) else float(out)


@dataclass(frozen=True)
class ModelSpec:
    """The five model ingredients plus the declared growth-rate floor and
    the truncation length of the size domain."""

    beta: Rate1D
    mu: Rate2D
    gamma: Rate2D
    alpha: AttackKernel
    c: Rate1D
    gamma0: float
    s_max: float

    def __post_init__(self):
        g0 = float(self.gamma0)
        sm = float(self.s_max)
        if not (math.isfinite(g0) and g0 > 0):
            raise ValueError("gamma0 must be a positive finite number")
        if not (math.isfinite(sm) and sm > 0):
            raise ValueError("s_max must be a positive finite number")
        object.__setattr__(self, "gamma0", g0)
        object.__setattr__(self, "s_max", sm)


def evaluate(model: ModelSpec, which: str, s, E=None, derivative: str = "value"):
    """Evaluate an ingredient, or one of its closed-form partials, at a point.

    `which` is one of beta, mu, gamma, alpha, c.  Two-argument rates take
    the environment in `E`; for the attack kernel, `s` is the prey size and
    `E` carries the attacker size.  `derivative` selects value, dE (partial
    in the environment), or d2_second_arg (kernel derivative in the
    attacker-size slot).
    """
    if which in ("beta", "c"):
        if derivative != "value":
            raise SelectorError(f"{which} supports only the value selector")
        rate = model.beta if which == "beta" else model.c
        return rate(s)
    if which in ("mu", "gamma"):
        if E is None:
            raise SelectorError(f"{which} needs the environment argument E")
        rate = model.mu if which == "mu" else model.gamma
        if derivative == "value":
            return rate(s, E)
        if derivative == "dE":
            return rate.d_env(s, E)
        raise SelectorError(f"derivative {derivative!r} unsupported for {which}")
    if which == "alpha":
        if E is None:
            raise SelectorError("alpha needs both sizes: prey in s, attacker in E")
        if derivative == "value":
            return model.alpha(s, E)
        if derivative == "d2_second_arg":
            return model.alpha.d_second(s, E)
        raise SelectorError(f"derivative {derivative!r} unsupported for alpha")
    raise SelectorError(f"unknown ingredient selector {which!r}")


@dataclass(frozen=True)
class Violation:
    ingredient: str
    location: tuple
    value: float

    def to_dict(self) -> dict:
        return {"ingredient": self.ingredient,
                "location": list(self.location),
                "value": self.value}


@dataclass(frozen=True)
class ValidationReport:
    ok: bool
    violations: tuple
    min_gamma: float
    tail_mass: float

    def to_dict(self) -> dict:
        return {"ok": self.ok,
                "violations": [v.to_dict() for v in self.violations],
                "min_gamma": self.min_gamma,
                "tail_mass": self.tail_mass}


def validate_model(model: ModelSpec, e_range=(0.0, 1.0), n_samples: int = 64,
                   tail_tol: float = 1.0) -> ValidationReport:
    """Sample the sign and bound assumptions over [0, s_max] x [E_lo, E_hi].

    tail_mass is the largest analytic tail fraction among beta and the
    prey factors alpha1; by default it is reported but not gated
    (tail_tol = 1.0), since bounded-but-non-integrable ingredients are
    legitimate model inputs.
    """
    e_lo, e_hi = float(e_range[0]), float(e_range[1])
    if e_lo > e_hi:
        raise ValueError("E range must satisfy E_lo <= E_hi")
    if n_samples < 2:
        raise ValueError("n_samples must be at least 2")

    s = np.linspace(0.0, model.s_max, n_samples)
    E = np.linspace(e_lo, e_hi, n_samples)
    tol = 1e-12
    violations = []

    gamma_vals = model.gamma(s[:, None], E[None, :])
    for i, j in zip(*np.nonzero(gamma_vals < model.gamma0 - tol)):
        violations.append(Violation("gamma", (float(s[i]), float(E[j])),
                                    float(gamma_vals[i, j])))
    mu_vals = model.mu(s[:, None], E[None, :])
    for i, j in zip(*np.nonzero(mu_vals < -tol)):
        violations.append(Violation("mu", (float(s[i]), float(E[j])),
                                    float(mu_vals[i, j])))
    for name, rate in (("beta", model.beta), ("c", model.c)):
        vals = rate(s)
        for i in np.nonzero(vals < -tol)[0]:
            violations.append(Violation(name, (float(s[i]),), float(vals[i])))
    alpha_vals = model.alpha(s[:, None], s[None, :])
    for i, j in zip(*np.nonzero(alpha_vals < -tol)):
        violations.append(Violation("alpha", (float(s[i]), float(s[j])),
                                    float(alpha_vals[i, j])))

    tails = [model.beta.tail_fraction(model.s_max)]
    tails += [t.alpha1.tail_fraction(model.s_max) for t in model.alpha.terms]
    tail_mass = float(max(tails))
    ok = not violations and tail_mass <= tail_tol
    return ValidationReport(ok, tuple(violations), float(np.min(gamma_vals)), tail_mass)


# --- configuration documents -------------------------------------------------

_TOP_KEYS = ("beta", "mu", "gamma", "alpha", "c", "gamma0", "s_max")


def _expect_mapping(obj, path, keys):
    if not isinstance(obj, dict):
        raise ConfigError(path, "expected an object")
    for key in obj:
        if key not in keys:
            raise ConfigError(f"{path}.{key}" if path != "$" else key, "unknown key")
    for key in keys:
        if key not in obj:
            raise ConfigError(f"{path}.{key}" if path != "$" else key, "missing required key")


def _number(obj, path) -> float:
    if isinstance(obj, bool) or not isinstance(obj, (int, float)):
        raise ConfigError(path, "expected a number")
    val = float(obj)
    if not math.isfinite(val):
        raise ConfigError(path, "non-finite number")
    return val


def _rate1d(obj, path) -> Rate1D:
    _expect_mapping(obj, path, ("family", "params"))
    family = obj["family"]
    if not isinstance(family, str):
        raise ConfigError(f"{path}.family", "expected a string")
    params = obj["params"]
    if not isinstance(params, list):
        raise ConfigError(f"{path}.params", "expected a list of numbers")
    values = [_number(v, f"{path}.params.{i}") for i, v in enumerate(params)]
    try:
        return Rate1D(family, tuple(values))
    except ValueError as exc:
        raise ConfigError(path, str(exc)) from exc


def _rate2d(obj, path) -> Rate2D:
    _expect_mapping(obj, path, ("base", "feedback", "feedback_coeff"))
    base = _rate1d(obj["base"], f"{path}.base")
    feedback = obj["feedback"]
    if not isinstance(feedback, str):
        raise ConfigError(f"{path}.feedback", "expected a string")
    coeff = _number(obj["feedback_coeff"], f"{path}.feedback_coeff")
    try:
        return Rate2D(base, feedback, coeff)
    except ValueError as exc:
        raise ConfigError(path, str(exc)) from exc


def _kernel(obj, path) -> AttackKernel:
    _expect_mapping(obj, path, ("terms",))
    terms = obj["terms"]
    if not isinstance(terms, list) or not terms:
        raise ConfigError(f"{path}.terms", "expected a non-empty list")
    parsed = []
    for i, term in enumerate(terms):
        tpath = f"{path}.terms.{i}"
        _expect_mapping(term, tpath, ("alpha1", "alpha2"))
        parsed.append(KernelTerm(_rate1d(term["alpha1"], f"{tpath}.alpha1"),
                                 _rate1d(term["alpha2"], f"{tpath}.alpha2")))
    return AttackKernel(tuple(parsed))


def parse_model_config(doc) -> ModelSpec:
    """Parse a configuration document (JSON text or an already-loaded dict).

    Unknown keys are rejected; every error names the dotted path of the
    offending key.
    """
    if isinstance(doc, (str, bytes)):
        try:
            data = json.loads(doc)
        except json.JSONDecodeError as exc:
            raise ConfigError("$", f"invalid JSON: {exc}") from exc
    else:
        data = doc
    _expect_mapping(data, "$", _TOP_KEYS)
    gamma0 = _number(data["gamma0"], "gamma0")
    if gamma0 <= 0:
        raise ConfigError("gamma0", "must be positive")
    s_max = _number(data["s_max"], "s_max")
    if s_max <= 0:
        raise ConfigError("s_max", "must be positive")
    return ModelSpec(
        beta=_rate1d(data["beta"], "beta"),
        mu=_rate2d(data["mu"], "mu"),
        gamma=_rate2d(data["gamma"], "gamma"),
        alpha=_kernel(data["alpha"], "alpha"),
        c=_rate1d(data["c"], "c"),
        gamma0=gamma0,
        s_max=s_max,
    )


def _rate1d_config(rate: Rate1D) -> dict:
    return {"family": rate.family, "params": list(rate.params)}


def _rate2d_config(rate: Rate2D) -> dict:
    return {"base": _rate1d_config(rate.base),
            "feedback": rate.feedback,
            "feedback_coeff": rate.feedback_coeff}


def model_to_config(model: ModelSpec) -> dict:
    return {
        "beta": _rate1d_config(model.beta),
        "mu": _rate2d_config(model.mu),
        "gamma": _rate2d_config(model.gamma),
        "alpha": {"terms": [{"alpha1": _rate1d_config(t.alpha1),
                             "alpha2": _rate1d_config(t.alpha2)}
                            for t in model.alpha.terms]},
        "c": _rate1d_config(model.c),
        "gamma0": model.gamma0,
        "s_max": model.s_max,
    }


def dumps_model_config(model: ModelSpec) -> str:
    return json.dumps(model_to_config(model), sort_keys=True, indent=2)
