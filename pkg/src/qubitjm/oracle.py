"""Independent checks: projection-based joint-POVM search and a geometric-median solver.

Neither path uses the Fourier criterion.  The feasibility oracle works on the
``2^N`` effects directly: the marginal and completeness equations form an
affine set, and each effect ``c0 I + c . sigma`` is positive iff ``(c0, c)`` lies
in the Lorentz cone ``c0 >= |c|``.  Both projections are closed form.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .povm import TOL_EQ, TOL_POS, Assemblage, JointPovm, PovmCheck, min_eigenvalues, verify_povm

log = logging.getLogger(__name__)

ORACLE_NMAX = 8


@dataclass
class Feasible:
    joint: JointPovm
    check: PovmCheck
    iterations: int


@dataclass
class InfeasibleEvidence:
    distance: float  # gap between the last iterates of the two sets
    lower_bound: float  # certified distance lower bound; 0 when no certificate was found
    iterations: int
    trace: list[float] = field(default_factory=list, repr=False)

    @property
    def certified(self) -> bool:
        return self.lower_bound > 0


@dataclass
class Undecided:
    distance: float
    iterations: int
    trace: list[float] = field(default_factory=list, repr=False)


def project_lorentz(coords: np.ndarray) -> np.ndarray:
    """Row-wise Euclidean projection onto ``{(c0, c) : c0 >= |c|}``."""
    c0 = coords[:, 0]
    v = coords[:, 1:]
    r = np.linalg.norm(v, axis=1)
    out = coords.copy()
    below = r <= -c0
    out[below] = 0.0
    mid = ~below & (r > c0)
    t = 0.5 * (c0[mid] + r[mid])
    out[mid, 0] = t
    out[mid, 1:] = v[mid] * (t / r[mid])[:, None]
    return out


class _Affine:
    """Marginal and completeness equations ``C E = T``, applied per Pauli coordinate."""

    def __init__(self, assemblage: Assemblage):
        n = assemblage.n
        masks = np.arange(1 << n)
        rows = [np.ones(1 << n)] + [1.0 - ((masks >> i) & 1) for i in range(n)]
        self.C = np.array(rows)
        target = [np.array([1.0, 0, 0, 0])]
        for o in assemblage:
            target.append(o.effect(+1).coords)
        self.T = np.array(target)
        self.pinv = np.linalg.pinv(self.C)
        self.n = n

    def project(self, E: np.ndarray) -> np.ndarray:
        return E - self.pinv @ (self.C @ E - self.T)

    def start(self) -> np.ndarray:
        """Effects with every coefficient beyond degree one set to zero."""
        return self.project(np.zeros((1 << self.n, 4)))

    def certificate(self, gap: np.ndarray, point: np.ndarray) -> float:
        """Distance lower bound from a separating functional, or 0.

        ``W = C^T Lambda`` is constant on the affine set.  Shifting the
        completeness row makes every ``W_mu`` negative semidefinite, so
        ``<W, P> <= 0`` on the cone; a positive value on the affine set then
        separates the two sets.
        """
        lam, *_ = np.linalg.lstsq(self.C.T, gap, rcond=None)
        W = self.C.T @ lam
        top = -min_eigenvalues(-W).min()  # largest eigenvalue over all W_mu
        lam[0, 0] -= top
        W = self.C.T @ lam
        value = float((W * point).sum())
        norm = float(np.linalg.norm(W))
        return value / norm if value > 0 and norm > 0 else 0.0


def feasibility_oracle(assemblage: Assemblage, tol: float = TOL_POS, max_iters: int = 20_000,
                       method: str = "alternating", nmax: int = ORACLE_NMAX,
                       stall_ratio: float = 1e-3, min_distance: float = 1e-6, check_every: int = 25):
    """Search for a joint POVM by projections between the affine set and the cone product.

    Returns :class:`Feasible` with a verified POVM, :class:`InfeasibleEvidence`
    when the distance between the sets settles at a positive value (with a
    certified lower bound when a separating functional is found), or
    :class:`Undecided` when the budget runs out.
    """
    n = assemblage.n
    if n < 1 or n > nmax:
        raise ValueError(f"oracle supports 1 <= N <= {nmax}, got {n}")
    if method not in ("alternating", "averaged"):
        raise ValueError(f"unknown method {method!r}")
    aff = _Affine(assemblage)
    a = aff.start()
    trace: list[float] = []
    for it in range(1, max_iters + 1):
        if min_eigenvalues(a).min() >= -tol:
            joint = JointPovm(n, a.copy())
            check = verify_povm(joint, assemblage, tol_pos=tol, tol_eq=TOL_EQ)
            if check.valid:
                return Feasible(joint, check, it - 1)
        p = project_lorentz(a)
        if method == "alternating":
            a_next = aff.project(p)
        else:
            a_next = aff.project(0.5 * (a + p))
        dist = float(np.linalg.norm(a - p))
        trace.append(dist)
        if it % check_every == 0 and dist > min_distance:
            bound = aff.certificate(a - p, a)
            if bound > 0:
                return InfeasibleEvidence(dist, bound, it, trace)
            half = trace[len(trace) // 2]
            if it >= 8 * check_every and half - dist <= stall_ratio * dist:
                return InfeasibleEvidence(dist, 0.0, it, trace)
        a = a_next
    return Undecided(trace[-1] if trace else 0.0, max_iters, trace)


def weiszfeld_ft(points, tol: float = 1e-12, max_iters: int = 100_000):
    """Point minimising the sum of Euclidean distances to ``points``, and that sum.

    Anchors are tested for optimality first (an anchor is optimal when the pull
    of the other points has norm at most its multiplicity).  Otherwise the
    Vardi-Zhang modification of Weiszfeld's iteration runs until the convexity
    bound ``|grad f(x)| * max_i |p_i - x|`` on ``f(x) - min f`` drops below ``tol``.
    """
    p = np.atleast_2d(np.asarray(points, dtype=float))
    if len(p) == 0:
        raise ValueError("need at least one point")

    def value(x):
        return float(np.linalg.norm(p - x, axis=1).sum())

    scale = max(1.0, float(np.abs(p).max()))
    for k in range(len(p)):
        diff = p - p[k]
        d = np.linalg.norm(diff, axis=1)
        same = d <= 1e-15 * scale
        pull = (diff[~same] / d[~same, None]).sum(axis=0)
        if np.linalg.norm(pull) <= same.sum():
            return p[k].copy(), value(p[k])

    x = p.mean(axis=0)
    for _ in range(max_iters):
        diff = p - x
        d = np.linalg.norm(diff, axis=1)
        hit = d <= 1e-15 * scale
        w = 1.0 / d[~hit]
        grad = -(diff[~hit] * w[:, None]).sum(axis=0)
        gnorm = float(np.linalg.norm(grad))
        if gnorm * d.max() <= tol:
            break
        t = (p[~hit] * w[:, None]).sum(axis=0) / w.sum()
        if hit.any():
            # sitting on an anchor that is not optimal: step off it along -grad
            eta = float(hit.sum())
            lam = min(1.0, eta / gnorm)
            x = (1 - lam) * t + lam * x
        else:
            x = t
    return x, value(x)
