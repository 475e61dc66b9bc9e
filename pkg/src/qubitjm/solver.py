"""Sum-of-norms minimisation with a certified lower bound.

The problem is ``min_x sum_mu |A_mu x + b_mu|`` where ``mu`` runs over the half
cube ``{mu : mu_1 = +1}`` (``M = 2^{N-1}`` blocks), ``x`` stacks one 3-vector per
odd subset ``|S| >= 3`` and ``A_mu x = sum_S x_S chi_S(mu)``.

Restricted to the half cube the odd characters are an orthogonal basis
(``H^T H = M I``).  So the set of attainable residual fields ``g = Hx + b`` is
exactly the fields whose coefficients on the degree-one characters equal the
Bloch vectors, and the dual feasible set is the span of those ``N`` characters.
Both the reweighted least-squares step and the dual projection therefore reduce
to ``N x N`` systems, whatever the number of free slots.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .hypercube import N_MAX, _check_n, mask_outcome, odd_higher_masks, walsh_hadamard

log = logging.getLogger(__name__)

EPS0 = 1e-2
GAMMA = 0.7
EPS_MIN = 1e-12
MAX_ITERS = 10_000
TOL_REL = 1e-9
IRLS_WARMUP = 100
NEWTON_MAX_SLOTS = 250
NEWTON_EPS = 1e-4


@dataclass(frozen=True, eq=False)
class SumOfNormsProblem:
    """Blocks indexed by half-cube outcomes; variables are the odd ``|S| >= 3`` vectors."""

    n: int
    degree_one: np.ndarray  # (N, 3): the Bloch vectors z_1..z_N

    def __post_init__(self):
        _check_n(self.n, nmax=N_MAX)
        z = np.asarray(self.degree_one, dtype=float).reshape(self.n, 3)
        object.__setattr__(self, "degree_one", z)

    @classmethod
    def from_assemblage(cls, assemblage) -> "SumOfNormsProblem":
        return cls(assemblage.n, assemblage.blochs)

    @property
    def m(self) -> int:
        return 1 << (self.n - 1)

    @property
    def slots(self) -> tuple[int, ...]:
        return odd_higher_masks(self.n)

    @property
    def k(self) -> int:
        return len(self.slots)

    @cached_property
    def _slot_rows(self) -> np.ndarray:
        # chi_S on the half cube depends only on S without index 1
        return np.array([s >> 1 for s in self.slots], dtype=np.int64)

    def block_outcomes(self) -> list[tuple[int, ...]]:
        return [mask_outcome(v << 1, self.n) for v in range(self.m)]

    @cached_property
    def basis(self) -> np.ndarray:
        """``(M, N)`` degree-one characters on the half cube: ``mu_1 (= 1), mu_2, ..., mu_N``."""
        v = np.arange(self.m)
        cols = [np.ones(self.m)] + [1.0 - 2.0 * ((v >> (k - 1)) & 1) for k in range(1, self.n)]
        return np.column_stack(cols)

    @cached_property
    def offsets(self) -> np.ndarray:
        """``b_mu = sum_k z_k mu_k`` for every block."""
        return self.basis @ self.degree_one

    @cached_property
    def scale(self) -> float:
        return float(np.linalg.norm(self.offsets, axis=1).mean())

    def sign_matrix(self) -> np.ndarray:
        """Dense ``(M, K)`` matrix of ``chi_S(mu)``; ``A_mu = sign_matrix()[mu] kron I_3``."""
        v = np.arange(self.m)[:, None]
        t = self._slot_rows[None, :]
        return 1.0 - 2.0 * (np.bitwise_count((v & t).astype(np.uint64)) & 1)

    def zero(self) -> np.ndarray:
        return np.zeros((self.k, 3))

    def _check_x(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float).reshape(-1, 3) if np.size(x) else np.zeros((0, 3))
        if x.shape != (self.k, 3):
            raise ValueError(f"expected {self.k} slot vectors, got {x.shape[0]}")
        return x

    def residuals(self, x) -> np.ndarray:
        x = self._check_x(x)
        if self.k == 0:
            return self.offsets.copy()
        c = np.zeros((self.m, 3))
        c[self._slot_rows] = x
        return self.offsets + walsh_hadamard(c)

    def adjoint(self, y: np.ndarray) -> np.ndarray:
        """``sum_mu A_mu^T y_mu`` as a ``(K, 3)`` array."""
        if self.k == 0:
            return np.zeros((0, 3))
        return walsh_hadamard(np.asarray(y, dtype=float))[self._slot_rows]

    def objective(self, x) -> float:
        return float(np.linalg.norm(self.residuals(x), axis=1).sum())

    def smoothed_objective(self, x, eps: float) -> float:
        r = self.residuals(x)
        return float(np.sqrt((r * r).sum(axis=1) + eps * eps).sum())

    def smoothed_gradient(self, x, eps: float) -> np.ndarray:
        r = self.residuals(x)
        s = np.sqrt((r * r).sum(axis=1) + eps * eps)
        return self.adjoint(r / s[:, None])

    def field_to_x(self, g: np.ndarray) -> np.ndarray:
        """Slot coefficients of a residual field (exact inverse of ``residuals`` on the affine set)."""
        if self.k == 0:
            return np.zeros((0, 3))
        return walsh_hadamard(g)[self._slot_rows] / self.m


@dataclass
class SolveResult:
    x_star: np.ndarray
    primal: float
    dual: float
    iterations: int
    converged: bool
    multipliers: np.ndarray = field(repr=False)
    restarts: int = 0

    @property
    def gap(self) -> float:
        return self.primal - self.dual


def dual_value(problem: SumOfNormsProblem, multipliers: np.ndarray) -> float:
    """Lower bound from ``y_mu = sum_k lambda_k mu_k``, rescaled into the unit balls.

    Any such ``y`` satisfies ``sum_mu A_mu^T y_mu = 0``; uniform rescaling keeps
    that and makes every ``|y_mu| <= 1``, so weak duality applies.
    """
    lam = np.asarray(multipliers, dtype=float).reshape(problem.n, 3)
    y = problem.basis @ lam
    worst = float(np.linalg.norm(y, axis=1).max()) if len(y) else 0.0
    value = float((problem.offsets * y).sum())
    return value / max(1.0, worst)


def project_dual(problem: SumOfNormsProblem, y: np.ndarray) -> np.ndarray:
    """Least-squares projection onto ``{y : sum_mu A_mu^T y_mu = 0}``, returned as multipliers.

    The constraint's orthogonal complement is spanned by orthogonal columns of
    ``basis`` (each of squared norm ``M``), so the normal matrix is ``M I``.
    """
    return problem.basis.T @ np.asarray(y, dtype=float) / problem.m


def active_set_duals(problem: SumOfNormsProblem, g: np.ndarray, thresholds=(1e-3, 1e-5, 1e-7, 1e-9)):
    """Dual candidates that fit ``y_mu = g_mu/|g_mu|`` only on blocks away from zero.

    At a minimiser with vanishing blocks the unit-vector guess is meaningless
    there; the multipliers are instead fitted to the other blocks and the
    vanishing ones take whatever value the fit gives.
    """
    norms = np.linalg.norm(g, axis=1)
    top = norms.max()
    E = problem.basis
    out = []
    for th in thresholds:
        keep = norms > th * top
        if keep.all() or keep.sum() < problem.n:
            continue
        lam, *_ = np.linalg.lstsq(E[keep], g[keep] / norms[keep, None], rcond=None)
        out.append(lam)
    return out


def dual_bound(problem: SumOfNormsProblem, x, epsilon: float = 1e-12) -> float:
    """Weak-duality lower bound on the minimum, built from the residuals at ``x``.

    Unit residuals ``r_mu / max(|r_mu|, epsilon)`` are projected onto the dual
    constraint and rescaled.  Blocks that (nearly) vanish at ``x`` make that
    guess poor, so the active-set fits are tried as well; every candidate is
    dual feasible and the best value is returned.
    """
    r = problem.residuals(x)
    norms = np.linalg.norm(r, axis=1)
    y = r / np.maximum(norms, epsilon)[:, None]
    best = dual_value(problem, project_dual(problem, y))
    if norms.max() > 0:
        for lam in active_set_duals(problem, r):
            best = max(best, dual_value(problem, lam))
    return best


def minimize(problem: SumOfNormsProblem, tol_rel: float = TOL_REL, max_iters: int = MAX_ITERS,
             eps0: float = EPS0, gamma: float = GAMMA, eps_min: float = EPS_MIN,
             warmup: int = IRLS_WARMUP, newton_max_slots: int = NEWTON_MAX_SLOTS) -> SolveResult:
    """Smoothed IRLS (generalised Weiszfeld) from ``x = 0`` with a decreasing smoothing schedule.

    Each IRLS step minimises ``sum_mu |g_mu|^2 / s_mu`` over attainable fields
    ``g`` with ``s_mu = sqrt(|g_mu|^2 + eps^2)`` from the previous iterate; the
    Lagrange multipliers of that step double as a dual candidate.  IRLS stalls
    when residual curvature is strongly anisotropic, so after ``warmup`` steps
    problems with at most ``newton_max_slots`` slots switch to damped Newton on
    the smoothed objective.  Remaining budget goes back to IRLS.
    """
    if tol_rel <= 0:
        raise ValueError("tol_rel must be positive")
    b = problem.offsets
    if problem.k == 0:
        value = float(np.linalg.norm(b, axis=1).sum())
        return SolveResult(problem.zero(), value, value, 0, True, project_dual(problem, _unit(b)))
    if problem.scale == 0.0:
        return SolveResult(problem.zero(), 0.0, 0.0, 0, True, np.zeros((problem.n, 3)))

    state = _State(problem, tol_rel)
    state.offer_field(b.copy())
    irls = _Irls(problem, state, eps0, gamma, eps_min)
    budget = max_iters
    used = irls.run(min(warmup, budget))
    budget -= used
    if not state.done and budget > 0 and problem.k <= newton_max_slots:
        used = _newton(problem, state, max(irls.eps, NEWTON_EPS * problem.scale), eps_min, budget)
        budget -= used
    if not state.done and budget > 0:
        budget -= irls.run(budget)

    x_star = problem.field_to_x(state.best_g)
    primal = problem.objective(x_star)
    return SolveResult(x_star, primal, min(state.best_dual, primal), max_iters - budget,
                       state.done, state.best_lam, irls.restarts)


class _State:
    """Best primal field and best dual multipliers seen so far."""

    def __init__(self, problem: SumOfNormsProblem, tol_rel: float):
        self.problem = problem
        self.tol_rel = tol_rel
        self.best_primal = np.inf
        self.best_g = None
        self.best_dual = -np.inf
        self.best_lam = np.zeros((problem.n, 3))

    def offer_field(self, g: np.ndarray) -> None:
        primal = float(np.linalg.norm(g, axis=1).sum())
        if primal < self.best_primal:
            self.best_primal, self.best_g = primal, g.copy()

    def offer_dual(self, lam: np.ndarray) -> None:
        d = dual_value(self.problem, lam)
        if d > self.best_dual:
            self.best_dual, self.best_lam = d, lam

    @property
    def gap(self) -> float:
        return self.best_primal - self.best_dual

    @property
    def done(self) -> bool:
        return self.gap <= self.tol_rel * max(1.0, self.best_primal)


class _Irls:
    def __init__(self, problem, state, eps0, gamma, eps_min):
        self.problem = problem
        self.state = state
        self.eps0, self.gamma, self.eps_min = eps0, gamma, eps_min
        self.E = problem.basis
        self.target = self.E.T @ problem.offsets
        self.it = 0
        self.stage_start = 0
        self.restarts = 0
        self.last_gap, self.stall = np.inf, 0

    @property
    def eps(self) -> float:
        return self.problem.scale * max(self.eps_min, self.eps0 * self.gamma ** (self.it - self.stage_start))

    def run(self, steps: int) -> int:
        state, E = self.state, self.E
        g = state.best_g.copy()
        for used in range(1, steps + 1):
            self.it += 1
            eps = self.eps
            s = np.sqrt((g * g).sum(axis=1) + eps * eps)
            lam = np.linalg.solve(E.T @ (E * s[:, None]), self.target)
            g = s[:, None] * (E @ lam)
            state.offer_field(g)
            state.offer_dual(lam)
            state.offer_dual(project_dual(self.problem, g / np.maximum(np.linalg.norm(g, axis=1), eps)[:, None]))
            if used % 10 == 0 or used == steps:
                for cand in active_set_duals(self.problem, g):
                    state.offer_dual(cand)
            if state.done:
                return used
            # restart the smoothing schedule when the gap stops shrinking at the floor
            if state.gap < 0.999 * self.last_gap:
                self.last_gap, self.stall = state.gap, 0
            else:
                self.stall += 1
            if self.stall > 200 and eps <= self.problem.scale * self.eps_min * 1.0001:
                self.restarts += 1
                jump = np.log(1e-3 * (1 + 0.1 * self.restarts) / self.eps0) / np.log(self.gamma)
                self.stage_start = self.it - int(jump)
                self.stall = 0
                log.debug("IRLS restart %d at iteration %d, gap %.3e", self.restarts, self.it, state.gap)
        return steps


def _newton(problem: SumOfNormsProblem, state: _State, eps: float, eps_min: float, steps: int) -> int:
    """Damped Newton on ``sum_mu sqrt(|r_mu|^2 + eps^2)``, eps driven down stage by stage.

    The step solves ``(H + damp * W) dx = -grad`` where ``W = sum A^T A / s`` is
    the IRLS majoriser.  ``damp >= 1`` always decreases the smoothed objective;
    the damping shrinks after accepted steps, so near the minimiser the steps
    become plain Newton steps.
    """
    S = problem.sign_matrix()
    k = problem.k
    floor = problem.scale * eps_min
    x = problem.field_to_x(state.best_g)
    f = problem.smoothed_objective(x, eps)
    damp = 1.0
    for used in range(1, steps + 1):
        r = problem.residuals(x)
        norms = np.linalg.norm(r, axis=1)
        s = np.sqrt(norms * norms + eps * eps)
        state.offer_dual(project_dual(problem, r / s[:, None]))
        for cand in active_set_duals(problem, r):
            state.offer_dual(cand)
        if state.done:
            return used
        grad = S.T @ (r / s[:, None])
        unit = r / np.where(norms > 0, norms, 1.0)[:, None]
        radial = unit[:, :, None] * unit[:, None, :]
        # exact PSD split: 1/s across, eps^2/s^3 along the residual
        Q = (np.eye(3)[None] - radial) / s[:, None, None] + (eps * eps / s ** 3)[:, None, None] * radial
        H = np.empty((k, 3, k, 3))
        for a in range(3):
            for c in range(a, 3):
                blk = (S * Q[:, a, c][:, None]).T @ S
                H[:, a, :, c] = blk
                H[:, c, :, a] = blk
        H = H.reshape(3 * k, 3 * k)
        W = np.kron((S / s[:, None]).T @ S, np.eye(3))
        accepted = False
        while damp < 1e8:
            try:
                dx = -np.linalg.solve(H + damp * W, grad.ravel()).reshape(k, 3)
            except np.linalg.LinAlgError:
                damp *= 10.0
                continue
            trial = problem.smoothed_objective(x + dx, eps)
            if trial < f:
                decrement = f - trial
                x, f = x + dx, trial
                state.offer_field(problem.residuals(x))
                damp = max(damp / 4.0, 1e-12)
                accepted = True
                break
            damp *= 4.0
        if not accepted or decrement < 1e-2 * eps:
            if eps <= floor:
                return used
            eps = max(floor, 0.2 * eps)
            f = problem.smoothed_objective(x, eps)
    return steps


def _unit(b: np.ndarray) -> np.ndarray:
    n = np.linalg.norm(b, axis=1)
    return b / np.where(n > 0, n, 1.0)[:, None]
