"""Robust inner problem and the entropy-regularized quoting policy.

The market maker posts half-spreads (eps_plus, eps_minus) drawn from a
density pi on [0, eps_max]^2. With fill sensitivities h and baseline
flows f, cash and inventory bookkeeping give the expected reward at a
spread pair; entropy regularization at temperature gamma makes the
optimal policy a Gibbs density proportional to

    M(eps) = exp{ [ (A - 2 eta C h+) a+ - (B - 2 eta C h-) a-
                    - eta (h+^2 b+ - 2 h+ h- a+ a- + h-^2 b-)
                    + (S + eps+) f+ - (S - eps-) f- - eta C^2 ] / gamma }

where A = (S + eps+) h+, B = (S - eps-) h-, C = Q + f+ - f-, (a, b) are
the first and second moments of the innovations, and the cross term uses
independence of the two sides. The adversary picks the moments inside
per-side transport balls; the worst case pins each second moment at its
envelope and leaves a two-dimensional concave (under a certificate)
maximization of -gamma * integral(M) over a box of means.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace
from functools import cached_property

import numpy as np

from .functions import FunctionSpec
from .moments import EmpiricalSummary, alpha_range, theorem_beta_envelope

_QUADRATURES = ("trapezoid", "midpoint")


class SolverError(RuntimeError):
    """Inner maximization failed to converge; carries the best iterate."""

    def __init__(self, message: str, best: "RobustSolution | None" = None):
        super().__init__(message)
        self.best = best


class DegeneratePolicyError(RuntimeError):
    pass


@dataclass(frozen=True)
class SpreadModel:
    """Market making primitives: mid price S, inventory Q, inventory
    penalty eta, entropy temperature gamma, and the four flow curves."""

    S: float
    Q: float
    eta: float
    gamma: float
    f_plus: FunctionSpec
    f_minus: FunctionSpec
    h_plus: FunctionSpec
    h_minus: FunctionSpec

    def __post_init__(self) -> None:
        for name in ("S", "Q", "eta", "gamma"):
            if not math.isfinite(getattr(self, name)):
                raise ValueError(f"{name} must be finite")
        if self.gamma <= 0:
            raise ValueError("entropy temperature gamma must be positive")
        if self.eta < 0:
            raise ValueError("inventory penalty eta must be nonnegative")


@dataclass(frozen=True)
class SpreadDomain:
    """Tensor-product quadrature over the spread square [0, eps_max]^2."""

    eps_max: float
    grid_n: int = 257
    quadrature: str = "trapezoid"

    def __post_init__(self) -> None:
        if not (math.isfinite(self.eps_max) and self.eps_max > 0):
            raise ValueError("eps_max must be positive")
        if self.grid_n < 16:
            raise ValueError("grid_n must be at least 16")
        if self.quadrature not in _QUADRATURES:
            raise ValueError(f"quadrature must be one of {_QUADRATURES}")

    @cached_property
    def axis_nodes(self) -> np.ndarray:
        if self.quadrature == "trapezoid":
            return np.linspace(0.0, self.eps_max, self.grid_n)
        step = self.eps_max / self.grid_n
        return (np.arange(self.grid_n) + 0.5) * step

    @cached_property
    def axis_weights(self) -> np.ndarray:
        if self.quadrature == "trapezoid":
            step = self.eps_max / (self.grid_n - 1)
            w = np.full(self.grid_n, step)
            w[0] = w[-1] = step / 2.0
            return w
        return np.full(self.grid_n, self.eps_max / self.grid_n)

    @cached_property
    def cell_edges(self) -> tuple[np.ndarray, np.ndarray]:
        """Per-node cells tiling [0, eps_max]; cell lengths equal weights."""
        x = self.axis_nodes
        w = self.axis_weights
        if self.quadrature == "trapezoid":
            lo = np.maximum(x - w / 2.0, 0.0)
            lo[0] = 0.0
            hi = np.minimum(x + w / 2.0, self.eps_max)
            hi[-1] = self.eps_max
            # interior seams must coincide exactly
            lo[1:] = hi[:-1]
            return lo, hi
        step = self.eps_max / self.grid_n
        lo = np.arange(self.grid_n) * step
        return lo, lo + step


def default_domain(model: SpreadModel, grid_n: int = 257, quadrature: str = "trapezoid") -> SpreadDomain:
    """Spread cap at ten percent of the mid price."""
    return SpreadDomain(eps_max=0.1 * model.S, grid_n=grid_n, quadrature=quadrature)


def coefficients(model: SpreadModel, eps_plus, eps_minus):
    """Fill-weighted prices A, B and the flow-adjusted inventory C."""
    a = (model.S + np.asarray(eps_plus, dtype=float)) * model.h_plus(eps_plus)
    b = (model.S - np.asarray(eps_minus, dtype=float)) * model.h_minus(eps_minus)
    c = model.Q + np.asarray(model.f_plus(eps_plus)) - np.asarray(model.f_minus(eps_minus))
    if np.ndim(eps_plus) == 0 and np.ndim(eps_minus) == 0:
        return float(a), float(b), float(c)
    return a, b, c


def log_M(
    model: SpreadModel,
    eps_plus: float,
    eps_minus: float,
    alpha_plus: float,
    alpha_minus: float,
    beta_plus: float,
    beta_minus: float,
) -> float:
    """Log of the unnormalized Gibbs density at one spread pair."""
    a, b, c = coefficients(model, eps_plus, eps_minus)
    hp = float(model.h_plus(eps_plus))
    hm = float(model.h_minus(eps_minus))
    fp = float(model.f_plus(eps_plus))
    fm = float(model.f_minus(eps_minus))
    eta = model.eta
    moment_part = (
        (a - 2.0 * eta * c * hp) * alpha_plus
        - (b - 2.0 * eta * c * hm) * alpha_minus
        - eta
        * (
            hp * hp * beta_plus
            - 2.0 * hp * hm * alpha_plus * alpha_minus
            + hm * hm * beta_minus
        )
    )
    base_part = (
        (model.S + eps_plus) * fp - (model.S - eps_minus) * fm - eta * c * c
    )
    val = (moment_part + base_part) / model.gamma
    if not math.isfinite(val):
        raise ValueError("integrand overflow")
    return val


def validate_model_on_domain(model: SpreadModel, domain: SpreadDomain, points: int = 1025) -> None:
    """f and h must be finite on the spread interval and h nonnegative."""
    eps = np.linspace(0.0, domain.eps_max, max(points, 2 * domain.grid_n))
    for name in ("f_plus", "f_minus", "h_plus", "h_minus"):
        vals = np.asarray(getattr(model, name)(eps), dtype=float)
        if not np.all(np.isfinite(vals)):
            raise ValueError(f"{name} is not finite on [0, eps_max]")
        if name.startswith("h") and np.any(vals < 0):
            raise ValueError(f"{name} must be nonnegative on [0, eps_max]")


class _GridEvaluator:
    """Precomputed per-node constants for the Gibbs exponent on a domain.

    The exponent is affine in (a+, a-, b+, b-) apart from the a+ a-
    cross term, so one pass over the grid caches every coefficient and
    each candidate moment vector costs five fused array operations.
    """

    def __init__(self, model: SpreadModel, domain: SpreadDomain):
        self.model = model
        self.domain = domain
        x = domain.axis_nodes
        fp = np.asarray(model.f_plus(x), dtype=float)
        fm = np.asarray(model.f_minus(x), dtype=float)
        hp = np.asarray(model.h_plus(x), dtype=float)
        hm = np.asarray(model.h_minus(x), dtype=float)
        a = (model.S + x) * hp
        b = (model.S - x) * hm
        eta = model.eta
        c = model.Q + fp[:, None] - fm[None, :]
        self.coef_ap = (a[:, None] - 2.0 * eta * c * hp[:, None]).ravel()
        self.coef_am = (b[None, :] - 2.0 * eta * c * hm[None, :]).ravel()
        self.coef_bp = np.broadcast_to((eta * hp * hp)[:, None], c.shape).ravel()
        self.coef_bm = np.broadcast_to((eta * hm * hm)[None, :], c.shape).ravel()
        self.coef_cross = (2.0 * eta * hp[:, None] * hm[None, :]).ravel()
        base = (
            ((model.S + x) * fp)[:, None]
            - ((model.S - x) * fm)[None, :]
            - eta * c * c
        )
        self.base = base.ravel()
        self.h_all_zero = bool(np.all(hp == 0.0) and np.all(hm == 0.0))
        w = domain.axis_weights
        self.wprod = (w[:, None] * w[None, :]).ravel()
        self.logw = np.log(self.wprod)

    def exponent(self, ap: float, am: float, bp: float, bm: float) -> np.ndarray:
        e = (
            self.coef_ap * ap
            - self.coef_am * am
            - (self.coef_bp * bp - self.coef_cross * (ap * am) + self.coef_bm * bm)
            + self.base
        )
        return e / self.model.gamma

    def log_mass(self, expo: np.ndarray) -> float:
        """log of the weighted integral of exp(exponent), shift-stabilized.

        +inf or nan exponents mean the integrand itself overflowed; -inf
        is a vanishing integrand and is harmless.
        """
        if np.any(np.isnan(expo)) or np.any(np.isposinf(expo)):
            raise ValueError("integrand overflow")
        shifted = expo + self.logw
        m = float(np.max(shifted))
        if m == -math.inf:
            return -math.inf
        return m + math.log(float(np.sum(np.exp(shifted - m))))

    def objective(self, ap: float, am: float, bp: float, bm: float) -> float:
        """-gamma * integral of M over the spread square."""
        lz = self.log_mass(self.exponent(ap, am, bp, bm))
        if lz > 700.0:
            # finite exponent, unrepresentable mass
            raise ValueError("integrand overflow")
        return -self.model.gamma * math.exp(lz)

    def objective_batch(self, ap: np.ndarray, am: np.ndarray, bp: np.ndarray, bm: np.ndarray) -> np.ndarray:
        out = np.empty(len(ap))
        chunk = max(1, 8_000_000 // max(len(self.base), 1))
        for s in range(0, len(ap), chunk):
            e = (
                self.coef_ap[None, :] * ap[s : s + chunk, None]
                - self.coef_am[None, :] * am[s : s + chunk, None]
                - self.coef_bp[None, :] * bp[s : s + chunk, None]
                + self.coef_cross[None, :] * (ap[s : s + chunk] * am[s : s + chunk])[:, None]
                - self.coef_bm[None, :] * bm[s : s + chunk, None]
                + self.base[None, :]
            )
            e /= self.model.gamma
            if np.any(np.isnan(e)) or np.any(np.isposinf(e)):
                raise ValueError("integrand overflow")
            e += self.logw[None, :]
            m = np.max(e, axis=1)
            m_safe = np.where(np.isneginf(m), 0.0, m)
            lz = m_safe + np.log(np.sum(np.exp(e - m_safe[:, None]), axis=1))
            if np.any(lz[~np.isneginf(m)] > 700.0):
                raise ValueError("integrand overflow")
            z = np.exp(lz)
            z = np.where(np.isneginf(m), 0.0, z)
            out[s : s + chunk] = -self.model.gamma * z
        return out


@dataclass(frozen=True)
class RobustSolution:
    """Adversarial moments and the worst-case objective they attain."""

    alpha_star_plus: float
    alpha_star_minus: float
    beta_star_plus: float
    beta_star_minus: float
    objective: float
    concave_certificate: bool
    iterations: int

    def __post_init__(self) -> None:
        if not math.isfinite(self.objective):
            raise ValueError("objective must be finite")


@dataclass(frozen=True)
class SolverOptions:
    tol: float = 1e-9
    max_iter: int = 500


def concavity_check(summaries: tuple[EmpiricalSummary, EmpiricalSummary], delta: float) -> bool:
    """Certificate var+ * var- >= delta^2 under which the inner problem
    (moments eliminated via the envelopes) is concave over the mean box."""
    sp, sm = summaries
    return sp.variance * sm.variance >= delta * delta


def worst_case_objective(
    model: SpreadModel,
    domain: SpreadDomain,
    summaries: tuple[EmpiricalSummary, EmpiricalSummary],
    delta: float,
    alpha_plus: float,
    alpha_minus: float,
) -> float:
    """Objective -gamma * integral(M) with second moments pinned at their
    adversarial envelopes for the given means."""
    ev = _GridEvaluator(model, domain)
    return _envelope_objective(ev, summaries, delta, alpha_plus, alpha_minus)


def _envelope_objective(ev, summaries, delta, ap, am) -> float:
    sp, sm = summaries
    bp = theorem_beta_envelope(sp, delta, ap)
    bm = theorem_beta_envelope(sm, delta, am)
    return ev.objective(ap, am, bp, bm)


def worst_case_objective_grid(
    model: SpreadModel,
    domain: SpreadDomain,
    summaries: tuple[EmpiricalSummary, EmpiricalSummary],
    delta: float,
    alphas_plus: np.ndarray,
    alphas_minus: np.ndarray,
) -> np.ndarray:
    """Vectorized worst_case_objective over paired mean arrays."""
    ev = _GridEvaluator(model, domain)
    return _envelope_objective_batch(ev, summaries, delta, alphas_plus, alphas_minus)


def _envelope_objective_batch(ev, summaries, delta, ap, am) -> np.ndarray:
    sp, sm = summaries
    ap = np.asarray(ap, dtype=float)
    am = np.asarray(am, dtype=float)
    bp = np.array([theorem_beta_envelope(sp, delta, a) for a in ap])
    bm = np.array([theorem_beta_envelope(sm, delta, a) for a in am])
    return ev.objective_batch(ap, am, bp, bm)


def _fd_gradient(fun, x: np.ndarray, lo: np.ndarray, hi: np.ndarray, h: float) -> np.ndarray:
    """Central differences, shrunk one-sidedly at the box faces."""
    g = np.zeros_like(x)
    for i in range(len(x)):
        hp = min(h, hi[i] - x[i])
        hm = min(h, x[i] - lo[i])
        if hp + hm <= 0:
            continue
        xp = x.copy()
        xp[i] += hp
        xm = x.copy()
        xm[i] -= hm
        g[i] = (fun(xp) - fun(xm)) / (hp + hm)
    return g


def _grid_fallback(fun_batch, lo: np.ndarray, hi: np.ndarray, fun, n: int = 201):
    """Exhaustive scan of the mean box plus a shrinking pattern search."""
    gp = np.linspace(lo[0], hi[0], n)
    gm = np.linspace(lo[1], hi[1], n)
    pp, mm = np.meshgrid(gp, gm, indexing="ij")
    vals = fun_batch(pp.ravel(), mm.ravel())
    k = int(np.argmax(vals))
    x = np.array([pp.ravel()[k], mm.ravel()[k]])
    best = float(vals[k])
    step = max(gp[1] - gp[0] if n > 1 else 1.0, gm[1] - gm[0] if n > 1 else 1.0)
    floor = 1e-12 * max(hi[0] - lo[0], hi[1] - lo[1], 1.0)
    while step > floor:
        improved = False
        for d in ((step, 0.0), (-step, 0.0), (0.0, step), (0.0, -step)):
            cand = np.clip(x + d, lo, hi)
            v = fun(cand)
            if v > best + 0.0:
                best = v
                x = cand
                improved = True
        if not improved:
            step *= 0.5
    return x, best


def solve_inner(
    model: SpreadModel,
    domain: SpreadDomain,
    summaries: tuple[EmpiricalSummary, EmpiricalSummary],
    delta: float,
    options: SolverOptions | None = None,
) -> RobustSolution:
    """Maximize the worst-case objective over the box of feasible means.

    Projected gradient ascent with backtracking from the box center;
    when the concavity certificate fails, nine starts on a 3x3 lattice;
    on a line-search stall, an exhaustive 201x201 grid scan with local
    refinement. delta = 0 short-circuits to the empirical moments.
    """
    if delta < 0:
        raise ValueError("negative radius")
    opts = options or SolverOptions()
    validate_model_on_domain(model, domain)
    ev = _GridEvaluator(model, domain)
    sp, sm = summaries
    cert = concavity_check(summaries, delta)

    if delta == 0.0:
        obj = ev.objective(sp.alpha_n, sm.alpha_n, sp.beta_n, sm.beta_n)
        return RobustSolution(
            alpha_star_plus=sp.alpha_n,
            alpha_star_minus=sm.alpha_n,
            beta_star_plus=sp.beta_n,
            beta_star_minus=sm.beta_n,
            objective=obj,
            concave_certificate=cert,
            iterations=0,
        )

    if ev.h_all_zero:
        # moments never enter the integrand; report the empirical means
        bp = theorem_beta_envelope(sp, delta, sp.alpha_n)
        bm = theorem_beta_envelope(sm, delta, sm.alpha_n)
        obj = ev.objective(sp.alpha_n, sm.alpha_n, bp, bm)
        return RobustSolution(
            alpha_star_plus=sp.alpha_n,
            alpha_star_minus=sm.alpha_n,
            beta_star_plus=bp,
            beta_star_minus=bm,
            objective=obj,
            concave_certificate=cert,
            iterations=0,
        )

    root = math.sqrt(delta)
    margin = 1e-9 * root
    lo = np.array([sp.alpha_n - root + margin, sm.alpha_n - root + margin])
    hi = np.array([sp.alpha_n + root - margin, sm.alpha_n + root - margin])

    def fun(x: np.ndarray) -> float:
        return _envelope_objective(ev, summaries, delta, float(x[0]), float(x[1]))

    def fun_batch(ap: np.ndarray, am: np.ndarray) -> np.ndarray:
        return _envelope_objective_batch(ev, summaries, delta, ap, am)

    if cert:
        starts = [0.5 * (lo + hi)]
    else:
        ticks = [np.array([a, b]) for a in (lo[0], 0.5 * (lo[0] + hi[0]), hi[0])
                 for b in (lo[1], 0.5 * (lo[1] + hi[1]), hi[1])]
        starts = ticks

    fd_h = 1e-6 * root
    best_x: np.ndarray | None = None
    best_f = -math.inf
    total_iter = 0
    any_converged = False

    for start in starts:
        x = start.astype(float).copy()
        f = fun(x)
        converged = False
        t_prev: float | None = None
        width = float(np.max(hi - lo))
        coord_steps = [width / 4.0, width / 4.0]

        def polish() -> float:
            """Cyclic per-coordinate line search; the envelope cusps are
            axis-aligned, so this clears the stiff valleys a scalar-step
            gradient move crawls through."""
            nonlocal x, f
            gained = 0.0
            for i in (0, 1):
                s = coord_steps[i]
                for sgn in (1.0, -1.0):
                    while s >= 1e-14 * width:
                        y = x.copy()
                        y[i] = min(max(y[i] + sgn * s, lo[i]), hi[i])
                        if y[i] == x[i]:
                            s *= 0.5
                            continue
                        fy = fun(y)
                        if fy > f:
                            gained += fy - f
                            x, f = y, fy
                            s *= 2.0
                        else:
                            s *= 0.5
                coord_steps[i] = max(s, 1e-13 * width)
            return gained

        for _ in range(opts.max_iter):
            total_iter += 1
            g = _fd_gradient(fun, x, lo, hi, fd_h)
            gnorm = float(np.linalg.norm(g))
            if gnorm * width <= opts.tol * (1.0 + abs(f)):
                converged = True
                break
            t = t_prev if t_prev is not None else width / gnorm
            t = min(t, 4.0 * width / gnorm)
            gain = 0.0
            accepted = False
            for _ in range(70):
                y = np.clip(x + t * g, lo, hi)
                move = y - x
                if float(np.linalg.norm(move)) == 0.0:
                    break
                fy = fun(y)
                if fy > f and fy >= f + 1e-4 * float(g @ move):
                    gain = fy - f
                    x, f = y, fy
                    t_prev = t * 2.0
                    accepted = True
                    break
                t *= 0.5
            gain += polish()
            if not accepted and gain == 0.0:
                x, f = _grid_fallback(fun_batch, lo, hi, fun)
                converged = True
                break
            if gain <= opts.tol * (1.0 + abs(f)):
                converged = True
                break
        if f > best_f:
            best_f = f
            best_x = x
        any_converged = any_converged or converged

    assert best_x is not None
    bp = theorem_beta_envelope(sp, delta, float(best_x[0]))
    bm = theorem_beta_envelope(sm, delta, float(best_x[1]))
    solution = RobustSolution(
        alpha_star_plus=float(best_x[0]),
        alpha_star_minus=float(best_x[1]),
        beta_star_plus=bp,
        beta_star_minus=bm,
        objective=best_f,
        concave_certificate=cert,
        iterations=total_iter,
    )
    if not any_converged:
        raise SolverError(f"inner solver did not converge in {opts.max_iter} iterations", best=solution)
    return solution


@dataclass(frozen=True)
class PolicyGrid:
    """Quoting density on the spread square, tabulated on the domain grid."""

    domain: SpreadDomain
    density: np.ndarray
    normalization_residual: float

    def __post_init__(self) -> None:
        d = np.asarray(self.density, dtype=float)
        n = self.domain.grid_n
        if d.shape != (n, n):
            raise ValueError(f"density must have shape ({n}, {n})")
        if np.any(d < 0) or not np.all(np.isfinite(d)):
            raise ValueError("density must be finite and nonnegative")
        d = d.copy()
        d.flags.writeable = False
        object.__setattr__(self, "density", d)
        w = self.domain.axis_weights
        total = float(np.sum((w[:, None] * w[None, :]) * d))
        if abs(total - 1.0) > 1e-6:
            raise ValueError("density must integrate to one")

    @cached_property
    def _cell_cdf(self) -> np.ndarray:
        w = self.domain.axis_weights
        masses = ((w[:, None] * w[None, :]) * self.density).ravel()
        cdf = np.cumsum(masses)
        return cdf / cdf[-1]

    def cell_masses(self) -> np.ndarray:
        w = self.domain.axis_weights
        return (w[:, None] * w[None, :]) * self.density


def build_policy(model: SpreadModel, domain: SpreadDomain, solution: RobustSolution) -> PolicyGrid:
    """Gibbs density M / integral(M) at the adversarial moments."""
    ev = _GridEvaluator(model, domain)
    expo = ev.exponent(
        solution.alpha_star_plus,
        solution.alpha_star_minus,
        solution.beta_star_plus,
        solution.beta_star_minus,
    )
    if np.any(np.isnan(expo)) or np.any(np.isposinf(expo)):
        raise DegeneratePolicyError("degenerate policy")
    m = float(np.max(expo))
    if not math.isfinite(m):
        raise DegeneratePolicyError("degenerate policy")
    t = np.exp(expo - m)
    mass_shifted = float(np.sum(t * ev.wprod))
    if mass_shifted <= 0 or not math.isfinite(mass_shifted):
        raise DegeneratePolicyError("degenerate policy")
    z = math.exp(m + math.log(mass_shifted))
    if z == 0.0 or not math.isfinite(z):
        raise DegeneratePolicyError("degenerate policy")
    density = (t / mass_shifted).reshape(domain.grid_n, domain.grid_n)
    return PolicyGrid(domain=domain, density=density, normalization_residual=z)


def sample_policy(grid: PolicyGrid, rng, size: int | None = None):
    """Draw spread pairs: inverse-CDF over cell masses, then uniform
    placement within the chosen cell. rng is a seed or a Generator."""
    gen = rng if isinstance(rng, np.random.Generator) else np.random.default_rng(rng)
    n = 1 if size is None else int(size)
    if n < 1:
        raise ValueError("size must be positive")
    cdf = grid._cell_cdf
    u = gen.random(n)
    ux = gen.random(n)
    uy = gen.random(n)
    idx = np.searchsorted(cdf, u, side="left")
    idx = np.minimum(idx, len(cdf) - 1)
    i, j = np.divmod(idx, grid.domain.grid_n)
    lo, hi = grid.domain.cell_edges
    eps_plus = lo[i] + ux * (hi[i] - lo[i])
    eps_minus = lo[j] + uy * (hi[j] - lo[j])
    if size is None:
        return float(eps_plus[0]), float(eps_minus[0])
    return eps_plus, eps_minus


def expected_reward(
    model: SpreadModel,
    grid: PolicyGrid,
    alpha_plus: float,
    alpha_minus: float,
    beta_plus: float,
    beta_minus: float,
) -> float:
    """Quadrature of the per-spread expected reward against the policy.

    The reward at a spread pair equals gamma times the Gibbs exponent, so
    this is the benchmark the episode simulator must reproduce.
    """
    ev = _GridEvaluator(model, grid.domain)
    expo = ev.exponent(alpha_plus, alpha_minus, beta_plus, beta_minus)
    reward = model.gamma * expo
    return float(np.sum(grid.density.ravel() * ev.wprod * reward))
