"""Shared generators for randomized test instances.

Everything takes an explicit Generator so each test controls its seed.
Scales are kept moderate (S in single digits, h bounded by ~1.5) so
objective magnitudes stay printable and finite-difference tests are
well conditioned.
"""
from __future__ import annotations

import numpy as np

from robustmm import (
    SampleSet,
    SpreadDomain,
    SpreadModel,
    affine,
    alpha_range,
    constant,
    empirical_moments,
    exp_decay,
    worst_case_objective,
    worst_case_objective_grid,
)
from robustmm.policy import _grid_fallback


def rand_samples(rng: np.random.Generator, side: str, n: int | None = None) -> SampleSet:
    if n is None:
        n = int(rng.integers(4, 7))
    return SampleSet(side, tuple(rng.uniform(0.2, 1.5, size=n)))


def rand_function(rng: np.random.Generator):
    k = int(rng.integers(0, 3))
    if k == 0:
        return constant(float(rng.uniform(0.05, 0.6)))
    if k == 1:
        # slope kept small enough to stay positive on any domain used here
        return affine(float(rng.uniform(0.1, 0.5)), float(rng.uniform(-0.05, 0.1)))
    return exp_decay(float(rng.uniform(0.3, 1.2)), float(rng.uniform(0.5, 2.0)))


def rand_instance(rng: np.random.Generator, cert: bool = True, grid_n: int = 33):
    """Random model/domain/samples with the concavity certificate forced
    true or false via the delta budget."""
    buy = rand_samples(rng, "buy")
    sell = rand_samples(rng, "sell")
    sp, sm = empirical_moments(buy), empirical_moments(sell)
    cap = float(np.sqrt(sp.variance * sm.variance))
    if cert:
        delta = float(rng.uniform(0.2, 0.9) * cap)
    else:
        delta = float(cap * rng.uniform(1.1, 1.8))
    model = SpreadModel(
        S=float(rng.uniform(2.0, 8.0)),
        Q=float(rng.uniform(-2.0, 2.0)),
        eta=float(rng.uniform(0.0, 1.0)),
        gamma=float(rng.uniform(0.5, 3.0)),
        f_plus=rand_function(rng),
        f_minus=rand_function(rng),
        h_plus=exp_decay(float(rng.uniform(0.3, 1.2)), float(rng.uniform(0.5, 2.0))),
        h_minus=exp_decay(float(rng.uniform(0.3, 1.2)), float(rng.uniform(0.5, 2.0))),
    )
    domain = SpreadDomain(eps_max=float(rng.uniform(0.4, 1.0)), grid_n=grid_n)
    return model, domain, (sp, sm), delta


def mean_box(summaries, delta, margin_frac: float = 1e-9):
    sp, sm = summaries
    lo_p, hi_p = alpha_range(sp, delta)
    lo_m, hi_m = alpha_range(sm, delta)
    margin = margin_frac * float(np.sqrt(delta)) if delta > 0 else 0.0
    lo = np.array([lo_p + margin, lo_m + margin])
    hi = np.array([hi_p - margin, hi_m - margin])
    return lo, hi


def refined_grid_max(model, domain, summaries, delta, n: int = 201) -> float:
    """Grid-search oracle: exhaustive lattice scan plus the same shrinking
    pattern refinement the solver falls back to."""
    lo, hi = mean_box(summaries, delta)

    def fun(x):
        return worst_case_objective(model, domain, summaries, delta,
                                    float(x[0]), float(x[1]))

    def fun_batch(ap, am):
        return worst_case_objective_grid(model, domain, summaries, delta, ap, am)

    _, best = _grid_fallback(fun_batch, lo, hi, fun, n=n)
    return float(best)


def raw_grid_max(model, domain, summaries, delta, n: int = 201) -> float:
    lo, hi = mean_box(summaries, delta)
    gp = np.linspace(lo[0], hi[0], n)
    gm = np.linspace(lo[1], hi[1], n)
    pp, mm = np.meshgrid(gp, gm, indexing="ij")
    vals = worst_case_objective_grid(model, domain, summaries, delta,
                                     pp.ravel(), mm.ravel())
    return float(vals.max())


def fd_hessian(fun, x: np.ndarray, h: float) -> np.ndarray:
    H = np.zeros((2, 2))
    for i in range(2):
        for j in range(2):
            ei = np.zeros(2)
            ei[i] = h
            ej = np.zeros(2)
            ej[j] = h
            H[i, j] = (fun(x + ei + ej) - fun(x + ei - ej)
                       - fun(x - ei + ej) + fun(x - ei - ej)) / (4.0 * h * h)
    return 0.5 * (H + H.T)
