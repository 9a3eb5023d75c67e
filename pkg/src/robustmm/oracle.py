"""Exact transport distances and brute-force moment searches on the line.

These routines deliberately avoid the closed-form moment envelopes: the
squared 2-Wasserstein distance between discrete measures is computed by
coupling quantile functions over the merged cumulative-weight partition
(exact for the quadratic cost on the line), and extremal moments inside
a transport ball are found by direct search over small atomic measures.
Agreement between the two routes is what the validation suite certifies.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import combinations_with_replacement

import numpy as np

from .moments import SampleSet, empirical_moments

_WEIGHT_TOL = 1e-12

_OBJECTIVES = ("max_mean", "min_mean", "max_second_moment", "min_second_moment")


@dataclass(frozen=True)
class DiscreteMeasure:
    """Finitely supported probability measure on the line."""

    atoms: tuple[float, ...]
    weights: tuple[float, ...]

    def __post_init__(self) -> None:
        atoms = tuple(float(a) for a in self.atoms)
        weights = tuple(float(w) for w in self.weights)
        if len(atoms) != len(weights):
            raise ValueError("atoms and weights must have equal length")
        if len(atoms) == 0:
            raise ValueError("measure needs at least one atom")
        if not all(math.isfinite(a) for a in atoms):
            raise ValueError("atoms must be finite")
        if any(w < 0 for w in weights):
            raise ValueError("weights must be nonnegative")
        if abs(sum(weights) - 1.0) > _WEIGHT_TOL:
            raise ValueError("weights must sum to one")
        object.__setattr__(self, "atoms", atoms)
        object.__setattr__(self, "weights", weights)

    @classmethod
    def from_points(cls, values) -> "DiscreteMeasure":
        """Uniform weights on the given points."""
        values = tuple(float(v) for v in values)
        n = len(values)
        return cls(atoms=values, weights=(1.0 / n,) * n)

    @classmethod
    def from_samples(cls, samples: SampleSet) -> "DiscreteMeasure":
        return cls.from_points(samples.values)

    def mean(self) -> float:
        return float(np.dot(self.weights, self.atoms))

    def second_moment(self) -> float:
        x = np.asarray(self.atoms)
        return float(np.dot(self.weights, x * x))

    def _sorted(self) -> tuple[np.ndarray, np.ndarray]:
        x = np.asarray(self.atoms, dtype=float)
        w = np.asarray(self.weights, dtype=float)
        order = np.argsort(x, kind="stable")
        return x[order], w[order]


def _w2sq_sorted(xp: np.ndarray, cwp: np.ndarray, xq: np.ndarray, cwq: np.ndarray) -> float:
    """Exact squared W2 from sorted atoms and cumulative weights.

    Both quantile functions are constant between consecutive entries of
    the merged cumulative-weight grid, so the integral of the squared
    quantile gap is a finite sum over merged segments.
    """
    ts = np.sort(np.concatenate([cwp, cwq]), kind="stable")
    ip = np.minimum(np.searchsorted(cwp, ts, side="left"), len(xp) - 1)
    iq = np.minimum(np.searchsorted(cwq, ts, side="left"), len(xq) - 1)
    seg = np.diff(ts, prepend=0.0)
    d = xp[ip] - xq[iq]
    return float(np.sum(seg * d * d))


def w2_squared(p: DiscreteMeasure, q: DiscreteMeasure) -> float:
    xp, wp = p._sorted()
    xq, wq = q._sorted()
    return _w2sq_sorted(xp, np.cumsum(wp), xq, np.cumsum(wq))


def w2_distance(p: DiscreteMeasure, q: DiscreteMeasure) -> float:
    """Exact 2-Wasserstein distance between discrete measures on the line."""
    return math.sqrt(max(w2_squared(p, q), 0.0))


def product_w2_squared(
    p1: DiscreteMeasure, q1: DiscreteMeasure, p2: DiscreteMeasure, q2: DiscreteMeasure
) -> float:
    """Squared W2 between product measures p1 x p2 and q1 x q2.

    The squared Euclidean cost separates across coordinates, so the
    product distance is the sum of the marginal squared distances.
    """
    return w2_squared(p1, q1) + w2_squared(p2, q2)


@dataclass(frozen=True)
class SupportSpec:
    """Search space for atomic candidate measures: m atoms inside [lo, hi]."""

    lo: float
    hi: float
    m: int
    grid_points: int = 9

    def __post_init__(self) -> None:
        if not (math.isfinite(self.lo) and math.isfinite(self.hi) and self.lo < self.hi):
            raise ValueError("support interval must be finite with lo < hi")
        if not (1 <= self.m <= 6):
            raise ValueError("atom count m must be between 1 and 6")
        if self.grid_points < 3:
            raise ValueError("grid_points must be at least 3")


def default_support(empirical: DiscreteMeasure, delta: float, m: int | None = None) -> SupportSpec:
    """Wide enough to contain any measure within budget delta.

    Moving a single atom of weight w by more than sqrt(delta / w) already
    exceeds the budget, so padding by the worst case over atoms suffices.
    """
    x = np.asarray(empirical.atoms)
    w = np.asarray(empirical.weights)
    wmin = float(np.min(w[w > 0])) if np.any(w > 0) else 1.0
    pad = math.sqrt(max(delta, 0.0) / wmin) + 1e-6
    if m is None:
        m = min(len(empirical.atoms), 6)
    return SupportSpec(lo=float(np.min(x)) - pad, hi=float(np.max(x)) + pad, m=m)


class _BallSearch:
    """Shared state for extremal-moment searches inside one W2 ball."""

    def __init__(self, empirical: DiscreteMeasure, delta: float):
        xe, we = empirical._sorted()
        self.xe = xe
        self.we = we
        self.cwe = np.cumsum(we)
        self.delta = float(delta)
        self.budget = self.delta * (1.0 + 1e-9) + 1e-15

    def cost(self, x: np.ndarray, w: np.ndarray) -> float:
        order = np.argsort(x, kind="stable")
        return _w2sq_sorted(x[order], np.cumsum(w[order]), self.xe, self.cwe)

    def feasible(self, x: np.ndarray, w: np.ndarray) -> bool:
        return self.cost(x, w) <= self.budget

    def cost_batch_uniform(self, rows: np.ndarray) -> np.ndarray:
        """Costs for many m-atom uniform-weight candidates (rows sorted)."""
        m = rows.shape[1]
        cwr = np.arange(1, m + 1) / m
        ts = np.sort(np.concatenate([cwr, self.cwe]), kind="stable")
        ir = np.minimum(np.searchsorted(cwr, ts, side="left"), m - 1)
        ie = np.minimum(np.searchsorted(self.cwe, ts, side="left"), len(self.xe) - 1)
        seg = np.diff(ts, prepend=0.0)
        d = rows[:, ir] - self.xe[ie][None, :]
        return (d * d) @ seg

    def cost_batch_general(self, rows: np.ndarray, weights: np.ndarray) -> np.ndarray:
        """Costs for candidates with per-row weights (rows sorted rowwise)."""
        k, m = rows.shape
        n = len(self.xe)
        out = np.empty(k)
        chunk = max(1, 4_000_000 // ((m + n) * m))
        for s in range(0, k, chunk):
            x = rows[s : s + chunk]
            cw = np.cumsum(weights[s : s + chunk], axis=1)
            ts = np.sort(np.concatenate([cw, np.broadcast_to(self.cwe, (x.shape[0], n))], axis=1), axis=1)
            ic = np.minimum((cw[:, None, :] < ts[:, :, None]).sum(axis=2), m - 1)
            ie = np.minimum((self.cwe[None, None, :] < ts[:, :, None]).sum(axis=2), n - 1)
            qc = np.take_along_axis(x, ic, axis=1)
            qe = self.xe[ie]
            seg = np.diff(ts, prepend=0.0, axis=1)
            d = qc - qe
            out[s : s + chunk] = np.sum(seg * d * d, axis=1)
        return out


def _objective_values(x: np.ndarray, w: np.ndarray, second: bool) -> float:
    if second:
        return float(np.dot(w, x * x))
    return float(np.dot(w, x))


def _objective_batch(rows: np.ndarray, weights: np.ndarray, second: bool) -> np.ndarray:
    if second:
        return np.sum(weights * rows * rows, axis=1)
    return np.sum(weights * rows, axis=1)


def moment_range_search(
    empirical: DiscreteMeasure,
    delta: float,
    objective: str,
    support: SupportSpec | None = None,
    alpha: float | None = None,
    tol: float = 1e-8,
) -> float:
    """Extremal moment over m-atom measures within squared-W2 budget delta.

    objective is one of max_mean, min_mean, max_second_moment,
    min_second_moment; the second-moment objectives constrain the mean to
    the given alpha. The search runs a grid pass with uniform weights, a
    simplex-grid weight pass (step 0.05) at the best positions, and a
    local descent on atom positions with single-atom, common-translation
    and common-dilation moves, halving the step until it falls below tol.

    Nothing here uses the analytic envelopes, so agreement with them is
    evidence, not tautology.
    """
    if objective not in _OBJECTIVES:
        raise ValueError(f"objective must be one of {_OBJECTIVES}, got {objective!r}")
    if delta < 0:
        raise ValueError("negative radius")
    second = objective in ("max_second_moment", "min_second_moment")
    if second and alpha is None:
        raise ValueError(f"{objective} requires a mean constraint alpha")
    sign = -1.0 if objective.startswith("min") else 1.0
    search = _BallSearch(empirical, delta)
    emp_mean = empirical.mean()

    if second:
        if abs(alpha - emp_mean) > math.sqrt(delta) + 1e-9:
            raise ValueError("no feasible measure")

    if support is None:
        support = default_support(empirical, delta)
    m = support.m

    def repair(x: np.ndarray, w: np.ndarray) -> np.ndarray:
        # mean constraint is restored exactly by a common translation
        if second:
            return x + (alpha - float(np.dot(w, x)))
        return x

    # Always-feasible anchor: the empirical measure itself, translated to
    # meet the mean constraint when one is imposed (cost (alpha-mean)^2).
    anchor_x = search.xe.copy()
    anchor_w = search.we.copy()
    anchor_x = repair(anchor_x, anchor_w)
    best_x, best_w = anchor_x, anchor_w
    best_val = _objective_values(anchor_x, anchor_w, second)

    if delta == 0.0:
        return best_val

    # Pass 1: uniform weights, atom positions on a common grid.
    grid = np.linspace(support.lo, support.hi, support.grid_points)
    rows = np.array(list(combinations_with_replacement(grid, m)), dtype=float)
    wu = np.full(m, 1.0 / m)
    if second:
        rows = rows + (alpha - rows.mean(axis=1))[:, None]
    costs = search.cost_batch_uniform(rows)
    feas = costs <= search.budget
    if np.any(feas):
        vals = _objective_batch(rows[feas], wu[None, :], second)
        k = int(np.argmax(sign * vals))
        if sign * vals[k] > sign * best_val:
            best_val = float(vals[k])
            best_x = rows[feas][k].copy()
            best_w = wu.copy()

    # Pass 2: weight simplex grid (step 0.05) at the best atom positions.
    # Skipped when pass 1 improved nothing: best_x is then the n-atom
    # anchor, not an m-atom candidate, and n can exceed the simplex cap.
    if m > 1 and len(best_x) == m:
        weights = _simplex_grid(m, 20)
        base = np.sort(best_x)
        pos = np.broadcast_to(base, (weights.shape[0], m)).copy()
        if second:
            pos = pos + (alpha - np.sum(weights * pos, axis=1))[:, None]
        costs = search.cost_batch_general(pos, weights)
        feas = costs <= search.budget
        if np.any(feas):
            vals = _objective_batch(pos[feas], weights[feas], second)
            k = int(np.argmax(sign * vals))
            if sign * vals[k] > sign * best_val:
                best_val = float(vals[k])
                best_x = pos[feas][k].copy()
                best_w = weights[feas][k].copy()

    # Pass 3: local descent on positions, run from the best grid candidate
    # and from the anchor. Single-atom moves alone cannot slide along the
    # budget sphere (freeing budget temporarily lowers the objective), so
    # the descent alternates pure phases: common translation to the budget
    # boundary, common dilation about the mean, then single-atom sweeps.
    step0 = (support.hi - support.lo) / max(support.grid_points - 1, 1)

    def descend(x0: np.ndarray, w0: np.ndarray, val0: float) -> float:
        x = np.asarray(x0, dtype=float).copy()
        w = np.asarray(w0, dtype=float).copy()
        best = val0

        def try_step(cand: np.ndarray) -> bool:
            nonlocal x, best
            cand = repair(cand, w)
            val = _objective_values(cand, w, second)
            if sign * val > sign * best + 1e-15 and search.feasible(cand, w):
                best = val
                x = cand
                return True
            return False

        for _ in range(50):
            improved_round = False
            if not second:
                step = step0
                while step >= tol:
                    if try_step(x + step) or try_step(x - step):
                        improved_round = True
                    else:
                        step *= 0.5
            step = step0
            while step >= tol:
                center = alpha if second else float(np.dot(w, x))
                up = center + (1.0 + step) * (x - center)
                down = center + max(1.0 - step, 0.0) * (x - center)
                if try_step(up) or try_step(down):
                    improved_round = True
                else:
                    step *= 0.5
            step = step0
            while step >= tol:
                moved = False
                for i in range(len(x)):
                    for sgn in (1.0, -1.0):
                        cand = x.copy()
                        cand[i] += sgn * step
                        if try_step(cand):
                            moved = True
                if moved:
                    improved_round = True
                else:
                    step *= 0.5
            if not improved_round:
                break
        return best

    anchor_val = _objective_values(anchor_x, anchor_w, second)
    out = descend(anchor_x, anchor_w, anchor_val)
    if not np.array_equal(best_x, anchor_x) or not np.array_equal(best_w, anchor_w):
        out2 = descend(best_x, best_w, best_val)
        if sign * out2 > sign * out:
            out = out2
    return out


_SIMPLEX_CACHE: dict[tuple[int, int], np.ndarray] = {}


def _simplex_grid(m: int, parts: int) -> np.ndarray:
    """All weight vectors with entries k/parts summing to one."""
    key = (m, parts)
    cached = _SIMPLEX_CACHE.get(key)
    if cached is None:
        rows = [
            np.bincount(combo, minlength=m) / parts
            for combo in combinations_with_replacement(range(m), parts)
        ]
        cached = np.array(rows)
        _SIMPLEX_CACHE[key] = cached
    return cached


def min_cost_given_moments(
    empirical: DiscreteMeasure,
    alpha: float,
    beta: float,
    support: SupportSpec | None = None,
    tol: float = 1e-8,
) -> float:
    """Smallest squared W2 to any m-atom measure with mean alpha and
    second moment beta; diagnostic companion to the profile formula.

    Candidates are repaired onto the moment pair by the affine map
    x -> a x + b (a from the variance ratio, b from the mean), then the
    transport cost is minimized by the same local-descent move set as
    moment_range_search.
    """
    if beta < alpha * alpha - 1e-12:
        raise ValueError("no feasible measure")
    if support is None:
        span = max(abs(alpha), math.sqrt(max(beta, 0.0)), 1.0)
        m = min(len(empirical.atoms), 6)
        support = SupportSpec(lo=-4.0 * span, hi=4.0 * span, m=m)
    m = support.m
    target_var = max(beta - alpha * alpha, 0.0)

    def repair(x: np.ndarray, w: np.ndarray) -> np.ndarray | None:
        mu = float(np.dot(w, x))
        var = float(np.dot(w, (x - mu) ** 2))
        if var <= 0:
            if target_var > 1e-15:
                return None
            return np.full_like(x, alpha)
        a = math.sqrt(target_var / var)
        return alpha + a * (x - mu)

    search = _BallSearch(empirical, 0.0)

    best_cost = math.inf
    best_x: np.ndarray | None = None
    best_w: np.ndarray | None = None

    grid = np.linspace(support.lo, support.hi, support.grid_points)
    rows = np.array(list(combinations_with_replacement(grid, m)), dtype=float)
    wu = np.full(m, 1.0 / m)
    candidates = [(row, wu) for row in rows]
    candidates.append((search.xe.copy(), search.we.copy()))
    for x0, w0 in candidates:
        fixed = repair(np.asarray(x0, dtype=float), np.asarray(w0, dtype=float))
        if fixed is None:
            continue
        c = search.cost(fixed, np.asarray(w0, dtype=float))
        if c < best_cost:
            best_cost = c
            best_x = fixed
            best_w = np.asarray(w0, dtype=float)
    if best_x is None:
        raise ValueError("no feasible measure")

    x, w = best_x.copy(), best_w.copy()
    step = (support.hi - support.lo) / max(support.grid_points - 1, 1)
    evals = 0
    while step >= tol and evals < 200_000:
        improved = False
        moves = []
        for i in range(len(x)):
            for sgn in (1.0, -1.0):
                cand = x.copy()
                cand[i] += sgn * step
                moves.append(cand)
        for cand in moves:
            fixed = repair(cand, w)
            if fixed is None:
                continue
            evals += 1
            c = search.cost(fixed, w)
            if c < best_cost - 1e-18:
                best_cost = c
                x = fixed
                improved = True
        if not improved:
            step *= 0.5
    return best_cost


def empirical_measure(samples: SampleSet) -> DiscreteMeasure:
    """Convenience bridge from a sample set to its empirical measure."""
    empirical_moments(samples)  # surfaces the no-samples error consistently
    return DiscreteMeasure.from_samples(samples)
