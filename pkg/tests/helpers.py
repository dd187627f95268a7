"""Model constructions shared across the test modules."""

import numpy as np

from canndyn import (AttackKernel, KernelTerm, ModelSpec, Rate1D, Rate2D)


def flat(value):
    return Rate1D("constant", (value,))


def no_feedback(base):
    return Rate2D(base, "none", 0.0)


def zero_kernel():
    return AttackKernel((KernelTerm(flat(0.0), flat(0.0)),))


def const_model(beta=0.5, mu=1.0, gamma=1.0, s_max=10.0):
    """Everything constant; gamma independent of s and E."""
    return ModelSpec(flat(beta), no_feedback(flat(mu)), no_feedback(flat(gamma)),
                     zero_kernel(), flat(1.0), gamma0=min(gamma, 0.5), s_max=s_max)


def decay_model(beta0=0.5, b=1.0, mu=0.6, gamma=1.0, s_max=12.0):
    """Exponentially decaying fertility over constant mortality; no cannibalism."""
    return ModelSpec(Rate1D("exp_decay", (beta0, b)), no_feedback(flat(mu)),
                     no_feedback(flat(gamma)), zero_kernel(), flat(1.0),
                     gamma0=0.5, s_max=s_max)


def benchmark_model(beta0=2.0, b=0.5, mu=0.5, attack=0.2, s_max=20.0):
    """Constant attack kernel: feedbacks are scalars, so the equilibrium has
    a one-dimensional closed-form self-consistency in the total population."""
    kernel = AttackKernel((KernelTerm(flat(attack), flat(1.0)),))
    return ModelSpec(Rate1D("exp_decay", (beta0, b)), no_feedback(flat(mu)),
                     no_feedback(flat(1.0)), kernel, flat(1.0),
                     gamma0=0.5, s_max=s_max)


def dissipative_model():
    """Trivial state has margin exactly 0.1 (worst node at s = 0)."""
    kernel = AttackKernel((KernelTerm(Rate1D("exp_decay", (0.3, 1.0)),
                                      Rate1D("poly_exp", (0.3, 1.0, 1.0))),))
    return ModelSpec(Rate1D("exp_decay", (0.5, 1.0)), no_feedback(flat(0.6)),
                     no_feedback(flat(1.0)), kernel, flat(1.0),
                     gamma0=0.5, s_max=12.0)


def unstable_model(beta0=1.023, c0=10.0, p=2.0, q=0.8, a=0.8, m=-0.8):
    """Proportional-attack model with a small unstable positive equilibrium.

    gamma == 1 (age-structured), c * alpha1 = p * alpha2 with
    alpha2(0) = 0, and a strongly beneficial saturating mortality feedback;
    the pointwise instability condition holds at the equilibrium found in
    the bracket [0, 2].
    """
    kernel = AttackKernel((KernelTerm(Rate1D("poly_exp", (p * q / c0, 1.0, a)),
                                      Rate1D("poly_exp", (q, 1.0, a))),))
    return ModelSpec(Rate1D("exp_decay", (beta0, 0.1)),
                     Rate2D(flat(1.0), "saturating", m),
                     no_feedback(flat(1.0)), kernel, flat(c0),
                     gamma0=0.5, s_max=15.0)


UNSTABLE_P = 2.0
UNSTABLE_BRACKET = (0.0, 2.0)


def random_trivial_model(rng):
    """Randomized ingredient set for the trivial-state identities.

    Fertility is kept small against mortality so the determinant has
    flattened to 1 by the default scan ceiling.
    """
    beta = Rate1D("exp_decay", (rng.uniform(0.05, 0.15), rng.uniform(0.3, 1.0)))
    mu = Rate2D(flat(rng.uniform(1.2, 2.0)), "saturating", rng.uniform(-0.3, 0.3))
    gamma = Rate2D(Rate1D("saturating_ramp",
                          (rng.uniform(0.8, 1.1), rng.uniform(0.0, 0.2),
                           rng.uniform(0.3, 1.0))), "none", 0.0)
    kernel = AttackKernel((KernelTerm(
        Rate1D("exp_decay", (rng.uniform(0.2, 1.0), rng.uniform(0.5, 1.5))),
        Rate1D("poly_exp", (rng.uniform(0.2, 1.0), 1.0, rng.uniform(0.5, 1.5)))),))
    c = flat(rng.uniform(0.5, 1.5))
    return ModelSpec(beta, mu, gamma, kernel, c, gamma0=0.5, s_max=12.0)


def transport_model(mu=0.4, s_max=10.0):
    """beta = alpha = 0, constant mortality, unit growth: the density is an
    exact translate n0(s - t) e^(-mu t)."""
    return ModelSpec(flat(0.0), no_feedback(flat(mu)), no_feedback(flat(1.0)),
                     zero_kernel(), flat(1.0), gamma0=0.5, s_max=s_max)


def gaussian(center, width, amplitude=1.0):
    return lambda s: amplitude * np.exp(-((s - center) / width) ** 2)
