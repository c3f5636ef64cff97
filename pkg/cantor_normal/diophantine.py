"""Relation systems on consecutive products of rationals.

For c = (c_0, ..., c_{t-1}) the k-th consecutive product sum is
S_k(c) = sum_{j=0}^{t-k} c_j c_{j+1} ... c_{j+k-1}. A RelationSystem asks
for S_k = d on A and S_k != d on B, optionally with progression sums equal
to d/m. The box system asks for S_k = 2t + eps_k for every k = 1..t.
"""
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from typing import List, Optional, Sequence, Tuple
import math

import numpy as np
import pandas as pd
import scipy.linalg
from scipy.optimize import brentq, least_squares, root
from tqdm import tqdm

from cantor_normal.constants import (BOX_MARGIN, BOX_STARTS, DEFAULT_MAX_D, DEFAULT_MAX_H, NEWTON_HALVINGS,
                                     NEWTON_MAX_ITER, NEWTON_TOL, TYPE_I, VARIANTS)
from cantor_normal.sequences import BasicSequence, ConstructionSchedule
from cantor_normal.utils import as_fraction, lcm_all


def consecutive_product_sum(c: Sequence, k: int) -> Fraction:
    c = [as_fraction(cj) for cj in c]
    t = len(c)
    if not 1 <= k <= t:
        raise ValueError("k must lie in [1, %d], got %d." % (t, k))
    total = Fraction(0)
    for j in range(t - k + 1):
        prod = Fraction(1)
        for cj in c[j:j + k]:
            prod *= cj
        total += prod
    return total


def ap_terms(t: int, k: int, m: int, r: int, variant: str) -> List[List[int]]:
    """Index lists of the factors in each term of the progression sum."""
    if variant not in VARIANTS:
        raise ValueError("variant must be one of %s" % (VARIANTS, ))
    if variant == TYPE_I:
        top = (t - k - r) // m
        terms = [list(range(r + j * m, r + j * m + k)) for j in range(top + 1)]
    else:
        top = (t - r - 1) // m - k + 1
        terms = [[r + (j + s) * m for s in range(k)] for j in range(top + 1)]
    if top < 0:
        raise ValueError("Empty range for t=%d, k=%d, m=%d, r=%d (%s)." % (t, k, m, r, variant))
    return terms


def ap_product_sum(c: Sequence, k: int, m: int, r: int, variant: str = TYPE_I) -> Fraction:
    """Type I: sum_j c_{r+jm} ... c_{r+jm+k-1}; type II: sum_j c_{r+jm} c_{r+(j+1)m} ... c_{r+(j+k-1)m}."""
    c = [as_fraction(cj) for cj in c]
    total = Fraction(0)
    for term in ap_terms(len(c), k, m, r, variant):
        prod = Fraction(1)
        for i in term:
            prod *= c[i]
        total += prod
    return total


@dataclass(frozen=True)
class APConstraint:
    k: int
    m: int
    r: int
    variant: str = TYPE_I


class RelationSystem(object):

    def __init__(self, t: int, A: Sequence[int], B: Sequence[int] = None, ap: Sequence[APConstraint] = ()):
        if t < 2:
            raise ValueError("Relation systems need t >= 2.")
        A = sorted(set(A))
        B = sorted(set(range(1, t + 1)) - set(A)) if B is None else sorted(set(B))
        if set(A) & set(B):
            raise ValueError("A and B overlap on %s." % sorted(set(A) & set(B)))
        if set(A) | set(B) != set(range(1, t + 1)):
            raise ValueError("A and B must partition {1, ..., %d}." % t)
        for con in ap:
            ap_terms(t, con.k, con.m, con.r, con.variant)
        self.t = t
        self.A = A
        self.B = B
        self.ap = list(ap)

    @property
    def u(self) -> int:
        """lcm(t, m) over the progression constraints; 1 without any."""
        if not self.ap:
            return 1
        return lcm_all([self.t] + [con.m for con in self.ap])

    def admissible_d(self, d: int) -> bool:
        if d < self.t + 1:
            return False
        if self.ap:
            return d % self.u == 0 and d >= 2 * self.u
        return True

    def __repr__(self):
        return 'RelationSystem(t=%d, A=%s, B=%s, ap=%s)' % (self.t, self.A, self.B, self.ap)


@dataclass(frozen=True)
class Solution:
    c: Tuple[Fraction, ...]
    d: int

    def __post_init__(self):
        object.__setattr__(self, 'c', tuple(as_fraction(cj) for cj in self.c))
        if any(cj <= 0 for cj in self.c):
            raise ValueError("Every c_j must be positive.")

    @property
    def t(self) -> int:
        return len(self.c)

    @property
    def alphas(self) -> List[int]:
        return [cj.numerator for cj in self.c]

    @property
    def betas(self) -> List[int]:
        return [cj.denominator for cj in self.c]

    def __str__(self):
        return '(%s; d=%d)' % (', '.join(str(cj) for cj in self.c), self.d)


@dataclass
class Certificate:
    """Exact value of every relation and whether it holds."""
    rows: List[dict] = field(default_factory=list)
    problems: List[str] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return not self.problems and all(row['passed'] for row in self.rows)

    def values(self) -> List[Fraction]:
        return [row['value'] for row in self.rows]

    def to_frame(self) -> pd.DataFrame:
        df = pd.DataFrame(self.rows, columns=['relation', 'kind', 'value', 'target', 'passed'])
        df['value'] = df['value'].astype(str)
        df['target'] = df['target'].astype(str)
        return df

    def to_dict(self) -> dict:
        return {'passed': self.passed, 'problems': list(self.problems),
                'relations': [{k: (str(v) if isinstance(v, Fraction) else v) for k, v in row.items()}
                              for row in self.rows]}


def verify_solution(system: RelationSystem, sol: Solution) -> Certificate:
    cert = Certificate()
    if sol.t != system.t:
        cert.problems.append('solution has %d coefficients, system has t=%d' % (sol.t, system.t))
        return cert
    if sol.d < system.t + 1:
        cert.problems.append('d=%d is below t+1=%d' % (sol.d, system.t + 1))
    if system.ap and not system.admissible_d(sol.d):
        cert.problems.append('d=%d is not in %d*N_2' % (sol.d, system.u))
    d = Fraction(sol.d)
    for k in range(1, system.t + 1):
        value = consecutive_product_sum(sol.c, k)
        if k in system.A:
            cert.rows.append({'relation': 'S_%d' % k, 'kind': 'A', 'value': value, 'target': d,
                              'passed': value == d})
        else:
            cert.rows.append({'relation': 'S_%d' % k, 'kind': 'B', 'value': value, 'target': d,
                              'passed': value != d})
    for con in system.ap:
        value = ap_product_sum(sol.c, con.k, con.m, con.r, con.variant)
        target = d / con.m
        cert.rows.append({'relation': '%s(k=%d,m=%d,r=%d)' % (con.variant, con.k, con.m, con.r), 'kind': 'AP',
                          'value': value, 'target': target, 'passed': value == target})
    return cert


def rationals_up_to(H: int) -> List[Fraction]:
    """Positive p/q with p, q <= H in Stern-Brocot order (by tree depth, then left to right)."""
    out = []
    level = [(Fraction(1), (0, 1), (1, 0))]
    while level:
        nxt = []
        for value, left, right in level:
            out.append(value)
            for lo, hi in ((left, (value.numerator, value.denominator)),
                           ((value.numerator, value.denominator), right)):
                p, q = lo[0] + hi[0], lo[1] + hi[1]
                if p <= H and q <= H:
                    nxt.append((Fraction(p, q), lo, hi))
        level = nxt
    return out


@dataclass
class SearchResult:
    solution: Optional[Solution]
    certificate: Optional[Certificate]
    max_h: int
    max_d: int
    candidates: int

    @property
    def found(self) -> bool:
        return self.solution is not None

    def report(self) -> str:
        if self.found:
            return 'found %s after %d candidates' % (self.solution, self.candidates)
        return 'no solution with numerators, denominators <= %d and d <= %d (%d candidates)' % (
            self.max_h, self.max_d, self.candidates)


def _search_d(system, d, values, allowed):
    """Depth-first over c_0..c_{t-2}; the product relation fixes c_{t-1} when t is in A."""
    t = system.t
    fixed_last = t in system.A
    candidates = 0
    stack = [()]
    while stack:
        prefix = stack.pop()
        if len(prefix) == t - 1 and fixed_last:
            prod = Fraction(1)
            for cj in prefix:
                prod *= cj
            last = Fraction(d) / prod
            if last not in allowed:
                continue
            tuples = [prefix + (last, )]
        elif len(prefix) == t:
            tuples = [prefix]
        else:
            for v in reversed(values):
                stack.append(prefix + (v, ))
            continue
        for c in tuples:
            candidates += 1
            sol = Solution(c, d)
            cert = verify_solution(system, sol)
            if cert.passed:
                return sol, cert, candidates
    return None, None, candidates


def solve_exact(system: RelationSystem, max_h: int = DEFAULT_MAX_H, max_d: int = DEFAULT_MAX_D,
                workers: int = 1, progress: bool = False) -> SearchResult:
    """First verified solution in (d ascending, Stern-Brocot order) with entries of height <= max_h.

    With workers > 1 the d values are searched concurrently, and the
    smallest d with a solution wins, so the answer does not depend on
    the number of workers.
    """
    values = rationals_up_to(max_h)
    allowed = set(values)
    ds = [d for d in range(system.t + 1, max_d + 1) if system.admissible_d(d)]
    total = 0
    if workers <= 1:
        for d in tqdm(ds, disable=not progress):
            sol, cert, n = _search_d(system, d, values, allowed)
            total += n
            if sol is not None:
                return SearchResult(sol, cert, max_h, max_d, total)
        return SearchResult(None, None, max_h, max_d, total)
    with ThreadPoolExecutor(max_workers=workers) as pool:
        results = list(pool.map(lambda d: _search_d(system, d, values, allowed), ds))
    for sol, cert, n in results:
        total += n
        if sol is not None:
            return SearchResult(sol, cert, max_h, max_d, total)
    return SearchResult(None, None, max_h, max_d, total)


def verify_divisibility(sol: Solution, source, horizon: int) -> List[Tuple[int, int, int]]:
    """(j, n, p_n) for every alpha_j not dividing p_n, n <= horizon.

    `source` is a basic sequence (checked on q_1..q_horizon) or a schedule
    (checked on b_1..b_horizon). The check is made for every j and every n.
    """
    if isinstance(source, ConstructionSchedule):
        values = []
        i = 1
        while i <= horizon and source.has_tuple(i):
            values.append((i, source.tuple_at(i).b))
            i += 1
    elif isinstance(source, BasicSequence):
        values = [(n, source.q_at(n)) for n in range(1, horizon + 1)]
    else:
        raise TypeError("source must be a BasicSequence or a ConstructionSchedule.")
    bad = []
    for n, p in values:
        for j, alpha in enumerate(sol.alphas):
            if p % alpha != 0:
                bad.append((j, n, p))
    return bad


def power_inequality_holds(k: int) -> bool:
    """(2k)^k > 2 k^2 (k + 1)."""
    return (2 * k) ** k > 2 * k * k * (k + 1)


# ---------------------------------------------------------------------------
# Box system


class BoxSystem(object):
    """S_k(c) = 2t + eps_k for k = 1..t, inside [t, t+1] x [1 + 1/(2t), 1 + 1/(t-1)]^{t-1}."""

    def __init__(self, t: int, eps: Sequence[float] = None):
        if t < 3:
            raise ValueError("The box system needs t >= 3.")
        eps = np.zeros(t) if eps is None else np.asarray(eps, dtype=float)
        if eps.shape == ():
            eps = np.full(t, float(eps))
        if eps.shape != (t, ):
            raise ValueError("eps must have %d entries." % t)
        self.t = t
        self.eps = eps
        self.lower = np.concatenate([[t], np.full(t - 1, 1 + 1 / (2 * t))])
        self.upper = np.concatenate([[t + 1], np.full(t - 1, 1 + 1 / (t - 1))])
        self.target = 2 * t + eps

    def start(self) -> np.ndarray:
        return np.concatenate([[self.t + 0.5], np.full(self.t - 1, 1 + 1 / self.t)])

    def project(self, c: np.ndarray) -> np.ndarray:
        return np.clip(c, self.lower, self.upper)

    def in_box(self, c: np.ndarray) -> bool:
        return bool(np.all(c >= self.lower) and np.all(c <= self.upper))

    def window_products(self, c: np.ndarray) -> List[np.ndarray]:
        """W[k-1][j] = c_j ... c_{j+k-1}."""
        t = self.t
        out = [c.copy()]
        for k in range(2, t + 1):
            out.append(out[-1][:t - k + 1] * c[k - 1:])
        return out

    def residual(self, c: np.ndarray) -> np.ndarray:
        return np.array([W.sum() for W in self.window_products(c)]) - self.target

    def jacobian(self, c: np.ndarray) -> np.ndarray:
        """dS_k/dc_i = (sum of the k-windows containing i) / c_i."""
        t = self.t
        J = np.zeros((t, t))
        idx = np.arange(t)
        for k, W in enumerate(self.window_products(c), 1):
            csum = np.concatenate([[0.0], np.cumsum(W)])
            lo = np.maximum(idx - k + 1, 0)
            hi = np.minimum(idx, t - k)
            J[k - 1] = (csum[hi + 1] - csum[lo]) / c
        return J


@dataclass
class BoxBounds:
    """Range allowed for E = sum_{j>=1} (c_j - 1) by two necessary conditions.

    `lower` comes from S_1 and S_t with prod(1 + e_j) <= exp(E); `upper`
    from S_2 - S_1 with every c_j at least 1 + 1/(2t). An empty range
    means no point of the box solves the system.
    """
    lower: float
    upper: float

    @property
    def empty(self) -> bool:
        return self.lower > self.upper + BOX_MARGIN


def box_bounds(system: BoxSystem) -> BoxBounds:
    t = system.t
    eta = system.eps
    lo = 1 + 1 / (2 * t)
    target = 2 * t + eta[t - 1]

    def g(E):
        return (t + 1 + eta[0] - E) * math.exp(E) - target

    e_lo = max((t - 1) / (2 * t), eta[0])
    e_hi = min(1.0, 1 + eta[0])
    if e_lo > e_hi or g(e_hi) < 0:
        lower = math.inf
    elif g(e_lo) >= 0:
        lower = e_lo
    else:
        lower = brentq(g, e_lo, e_hi, xtol=1e-14)
    upper = 1 + 1 / (t - 1) + eta[1] - eta[0] - (t + 1 + eta[0] - lo) / (2 * t)
    return BoxBounds(lower, min(upper, e_hi))


@dataclass
class BoxSolution:
    c: np.ndarray
    residuals: np.ndarray
    converged: bool
    iterations: int
    method: str
    escaped: bool
    message: str
    bounds: Optional[BoxBounds] = None
    outside_root: Optional[np.ndarray] = None

    @property
    def max_residual(self) -> float:
        return float(np.max(np.abs(self.residuals)))

    def to_frame(self) -> pd.DataFrame:
        t = len(self.c)
        return pd.DataFrame({'j': np.arange(t), 'c': self.c, 'k': np.arange(1, t + 1), 'residual': self.residuals})


def _newton(system, tol, max_iter, halvings):
    c = system.start()
    F = system.residual(c)
    norm = np.max(np.abs(F))
    escaped = False
    for it in range(max_iter):
        if norm < tol:
            return c, F, it, escaped, 'converged'
        try:
            step = scipy.linalg.solve(system.jacobian(c), -F)
        except (np.linalg.LinAlgError, ValueError):
            return c, F, it, escaped, 'singular Jacobian'
        lam = 1.0
        for _ in range(halvings + 1):
            raw = c + lam * step
            trial = system.project(raw)
            F_trial = system.residual(trial)
            n_trial = np.max(np.abs(F_trial))
            if n_trial < norm:
                escaped = escaped or not system.in_box(raw)
                c, F, norm = trial, F_trial, n_trial
                break
            lam /= 2
        else:
            return c, F, it, escaped, 'step halving failed to reduce the residual'
    if norm < tol:
        return c, F, max_iter, escaped, 'converged'
    return c, F, max_iter, escaped, 'iteration cap reached'


def _starts(system, first, n_starts, seed):
    yield first
    yield system.start()
    rng = np.random.default_rng(seed)
    for _ in range(n_starts):
        yield system.lower + (system.upper - system.lower) * rng.uniform(size=system.t)


def solve_box(t: int, eps=None, tol: float = NEWTON_TOL, max_iter: int = NEWTON_MAX_ITER,
              halvings: int = NEWTON_HALVINGS, polish: bool = True, n_starts: int = BOX_STARTS,
              seed: int = 0) -> BoxSolution:
    """Damped, box-projected Newton on S_k(c) - 2t - eps_k.

    If Newton stalls, `box_bounds` is checked first. When it rules the box
    out the result is not converged and `outside_root` holds the root found
    without bounds, if any. Otherwise bounded trust-region least squares is
    run from the last Newton iterate, the box center and `n_starts` seeded
    random points of the box. Only a root inside the box counts as converged.
    """
    system = BoxSystem(t, eps)
    c, F, iterations, escaped, message = _newton(system, tol, max_iter, halvings)
    if np.max(np.abs(F)) < tol and system.in_box(c):
        return BoxSolution(c, F, True, iterations, 'newton', escaped, message)
    bounds = box_bounds(system)
    if bounds.empty:
        free = root(system.residual, system.start(), jac=system.jacobian, method='hybr')
        outside = free.x if free.success and np.max(np.abs(system.residual(free.x))) < tol else None
        message = ("no root in the box: sum of c_j - 1 over j >= 1 must be >= %.6f and <= %.6f"
                   % (bounds.lower, bounds.upper))
        return BoxSolution(c, F, False, iterations, 'newton', escaped, message, bounds, outside)
    if polish:
        nfev = 0
        for c0 in _starts(system, c, n_starts, seed):
            res = least_squares(system.residual, c0, jac=system.jacobian, bounds=(system.lower, system.upper),
                                xtol=1e-15, ftol=1e-15, gtol=1e-15, max_nfev=50 * t)
            nfev += int(res.nfev)
            x = system.project(res.x)
            F_ls = system.residual(x)
            if np.max(np.abs(F_ls)) < np.max(np.abs(F)):
                c, F = x, F_ls
            if np.max(np.abs(F)) < tol:
                return BoxSolution(c, F, True, iterations + nfev, 'least_squares', escaped, res.message, bounds)
        message = message + '; least squares from %d starts: residual %.3g' % (n_starts + 2, np.max(np.abs(F)))
    return BoxSolution(c, F, False, iterations, 'newton', escaped, message, bounds)


@dataclass
class Frontier:
    scale: float
    eps_norm: float
    solution: Optional[BoxSolution]


def epsilon_frontier(t: int, direction=None, max_scale: float = 1.0, tol: float = 1e-3,
                     progress: bool = False) -> Frontier:
    """Largest s in [0, max_scale] (by bisection) such that solve_box(t, s * direction) converges.

    Convergence is assumed monotone along the ray. This explores the size
    of the admissible perturbation; it proves nothing.
    """
    direction = np.ones(t) if direction is None else np.asarray(direction, dtype=float)
    unit = np.max(np.abs(direction))
    if unit == 0:
        raise ValueError("direction must be nonzero.")
    base = solve_box(t, np.zeros(t))
    if not base.converged:
        return Frontier(0.0, 0.0, None)
    top = solve_box(t, max_scale * direction)
    if top.converged:
        return Frontier(max_scale, max_scale * unit, top)
    lo, hi, best = 0.0, max_scale, base
    pbar = tqdm(total=int(math.ceil(math.log2(max_scale / tol))) + 1, disable=not progress)
    while hi - lo > tol:
        mid = (lo + hi) / 2
        sol = solve_box(t, mid * direction)
        if sol.converged:
            lo, best = mid, sol
        else:
            hi = mid
        pbar.update(1)
    pbar.close()
    return Frontier(lo, lo * unit, best)
