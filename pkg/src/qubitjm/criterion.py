"""Joint-measurability criterion for binary qubit observables.

For an assemblage with Bloch vectors ``z_1..z_N`` the quantity

    min over odd |S| >= 3 vectors of  sum_{mu_1 = +1} | sum_{odd S} z(S) chi_S(mu) |

is at most ``2^{N-1}`` whenever the observables are jointly measurable (any
bias).  For unbiased observables the converse holds too, and the explicit joint
POVM lives in :mod:`construction`.
"""

from __future__ import annotations

import enum
import logging
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .construction import WitnessReport, common_axis, construct_joint, product_joint
from .hypercube import N_MAX, _check_n, as_mask, chi, configuration_set, odd_higher_masks
from .povm import Assemblage, BlochObservable
from .solver import MAX_ITERS, SolveResult, SumOfNormsProblem, minimize

log = logging.getLogger(__name__)

TOL_DECISION = 1e-7

# Four coplanar unbiased observables that are jointly measurable although the
# chain condition below fails for them.
COUNTEREXAMPLE = np.array([
    [0.7, 0.0, 0.0],
    [0.8, 0.4, 0.0],
    [0.3, 0.4, 0.0],
    [0.1, 0.2, 0.0],
])
COUNTEREXAMPLE_CHAIN = 2.01977
COUNTEREXAMPLE_OBJECTIVE = 7.95738


class Verdict(str, enum.Enum):
    JOINTLY_MEASURABLE = "JointlyMeasurable"
    INCOMPATIBLE = "Incompatible"
    NECESSARY_HOLDS = "NecessaryHolds"
    INCONCLUSIVE = "Inconclusive"

    def __str__(self):
        return self.value


@dataclass
class DecisionReport:
    verdict: Verdict
    objective: float
    bound: float
    primal_value: float
    dual_lower_bound: float
    optimal_coefficients: dict[int, np.ndarray] = field(repr=False)
    converged: bool = True
    iterations: int = 0
    witness: WitnessReport | None = field(default=None, repr=False)
    note: str = ""

    @property
    def gap(self) -> float:
        return self.primal_value - self.dual_lower_bound

    @property
    def interval(self) -> tuple[float, float]:
        """Certified bracket ``[dual, primal]`` around the minimum."""
        return (self.dual_lower_bound, self.primal_value)


def objective(assemblage: Assemblage, higher=None) -> float:
    """Sum over the half cube of ``|sum_{odd S} z(S) chi_S(mu)|`` by direct evaluation.

    ``higher`` maps odd subsets with at least three elements to 3-vectors;
    missing subsets count as zero.
    """
    n = assemblage.n
    _check_n(n)
    vec = {1 << i: o.bloch for i, o in enumerate(assemblage)}
    slots = set(odd_higher_masks(n))
    for key, v in (higher or {}).items():
        m = as_mask(key)
        if m not in slots:
            raise ValueError(f"{key!r} is not an odd subset of size >= 3 in [1, {n}]")
        vec[m] = np.asarray(v, dtype=float)
    total = 0.0
    for mu in configuration_set(n):
        acc = np.zeros(3)
        for m, v in vec.items():
            acc += chi(m, mu) * v
        total += float(np.linalg.norm(acc))
    return total


def busch_pair(z1, z2) -> float:
    """``|z1 - z2| + |z1 + z2|``; two unbiased observables are compatible iff this is at most 2."""
    z1 = np.asarray(z1, dtype=float)
    z2 = np.asarray(z2, dtype=float)
    return float(np.linalg.norm(z1 - z2) + np.linalg.norm(z1 + z2))


def triple_points(z1, z2, z3) -> np.ndarray:
    """Anchor points whose Fermat-Torricelli value is the minimised N=3 objective.

    With ``x0 = z1 + z2 + z3`` and ``xi = 2 zi - x0`` the four half-cube norms
    read ``|x_k - w|`` for ``w = -z_123``.
    """
    z = np.array([z1, z2, z3], dtype=float)
    x0 = z.sum(axis=0)
    return np.vstack([x0, 2 * z - x0])


def triple_criterion(z1, z2, z3, method: str = "solver", tol: float = 1e-12) -> float:
    """Minimum over ``z_123`` of the four-term N=3 objective; compatible (unbiased) iff at most 4."""
    if method == "solver":
        return minimize(SumOfNormsProblem(3, np.array([z1, z2, z3], dtype=float))).primal
    if method == "weiszfeld":
        from .oracle import weiszfeld_ft

        return weiszfeld_ft(triple_points(z1, z2, z3), tol=tol)[1]
    raise ValueError(f"unknown method {method!r}")


def chain_value(assemblage: Assemblage) -> float:
    """``|z_1 + z_N| + sum_p |z_p - z_{p+1}|`` in the order given."""
    z = assemblage.blochs
    if len(z) < 2:
        raise ValueError("the chain needs at least two observables")
    return float(np.linalg.norm(z[0] + z[-1]) + np.linalg.norm(np.diff(z, axis=0), axis=1).sum())


def coplanar_chain(assemblage: Assemblage) -> float:
    """Chain value minus ``2 (1 - max |bias|)``; a positive result means the chain condition fails."""
    return chain_value(assemblage) - 2.0 * (1.0 - float(np.abs(assemblage.biases).max()))


def _coefficients(problem: SumOfNormsProblem, x: np.ndarray) -> dict[int, np.ndarray]:
    return {m: x[j].copy() for j, m in enumerate(problem.slots)}


def decide(assemblage: Assemblage, tol: float = TOL_DECISION, tol_rel: float = 1e-9,
           max_iters: int = MAX_ITERS, nmax: int = N_MAX, witness: bool = True) -> DecisionReport:
    """Minimise, compare with ``2^{N-1}``, and certify where possible.

    * dual bound above ``2^{N-1}(1 + tol)``: Incompatible (any bias).
    * primal value within ``2^{N-1}(1 + tol)`` and unbiased: the explicit joint
      POVM is built and checked; JointlyMeasurable only if the check passes.
    * same but biased: NecessaryHolds, unless the Bloch vectors are collinear,
      in which case the observables commute and a product POVM is verified.
    * anything else (bracket straddles the bound, failed witness): Inconclusive.
    """
    n = assemblage.n
    _check_n(n, nmax=nmax)
    bound = float(1 << (n - 1))
    slack = tol * bound
    if n == 1:
        rep = product_joint(assemblage)
        value = float(np.linalg.norm(assemblage.blochs[0]))
        verdict = Verdict.JOINTLY_MEASURABLE if rep.valid else Verdict.INCONCLUSIVE
        return DecisionReport(verdict, value, bound, value, value, {}, witness=rep,
                              note="single observable")

    problem = SumOfNormsProblem.from_assemblage(assemblage)
    res: SolveResult = minimize(problem, tol_rel=tol_rel, max_iters=max_iters)
    coeffs = _coefficients(problem, res.x_star)
    report = DecisionReport(Verdict.INCONCLUSIVE, res.primal, bound, res.primal, res.dual, coeffs,
                            converged=res.converged, iterations=res.iterations)

    if res.dual > bound + slack:
        report.verdict = Verdict.INCOMPATIBLE
        return report
    if res.primal <= bound + slack:
        if assemblage.unbiased:
            if not witness:
                report.verdict = Verdict.JOINTLY_MEASURABLE
                return report
            rep = construct_joint(assemblage, res.x_star)
            report.witness = rep
            if rep.valid:
                report.verdict = Verdict.JOINTLY_MEASURABLE
            else:
                report.note = (f"witness check failed: min eigenvalue {rep.min_effect_eigenvalue:.3e}, "
                               f"marginal residual {rep.marginal_residual:.3e}")
            return report
        if common_axis(assemblage) is not None:
            rep = product_joint(assemblage)
            report.witness = rep
            if rep.valid:
                report.verdict = Verdict.JOINTLY_MEASURABLE
                report.note = "commuting observables, product joint POVM"
                return report
        report.verdict = Verdict.NECESSARY_HOLDS
        report.note = "biased observables: the criterion is only necessary"
        return report
    report.note = (f"bound {bound:g} inside [{res.dual:.12g}, {res.primal:.12g}]"
                   + ("" if res.converged else ", solver did not converge"))
    return report


def noise_family(directions, eta: float, biases=None) -> Assemblage:
    d = np.atleast_2d(np.asarray(directions, dtype=float))
    return Assemblage.from_blochs(eta * d, biases)


@dataclass
class SweepResult:
    eta_star: float
    objective_at_star: float
    gap: float
    flipped: bool  # False when no incompatible point exists in the range
    evaluations: int


def threshold_sweep(directions: Sequence, eta_lo: float = 0.0, eta_hi: float = 1.0,
                    tol_eta: float = 1e-8, **decide_kw) -> SweepResult:
    """Bisection for the noise level where ``eta * directions`` stops being compatible.

    Inconclusive counts as not incompatible, so the returned value sits on the
    compatible side of the flip to within ``tol_eta``.
    """
    d = np.atleast_2d(np.asarray(directions, dtype=float))
    longest = float(np.linalg.norm(d, axis=1).max())
    if longest > 0:
        eta_hi = min(eta_hi, 1.0 / longest)
    if not 0 <= eta_lo <= eta_hi:
        raise ValueError("need 0 <= eta_lo <= eta_hi")
    count = 0

    def incompatible(eta):
        nonlocal count
        count += 1
        rep = decide(noise_family(d, eta), witness=False, **decide_kw)
        return rep.verdict is Verdict.INCOMPATIBLE, rep

    bad, rep = incompatible(eta_hi)
    if not bad:
        return SweepResult(eta_hi, rep.primal_value, rep.gap, False, count)
    lo, hi = eta_lo, eta_hi
    while hi - lo > tol_eta:
        mid = 0.5 * (lo + hi)
        bad, _ = incompatible(mid)
        if bad:
            hi = mid
        else:
            lo = mid
    _, rep = incompatible(lo)
    return SweepResult(lo, rep.primal_value, rep.gap, True, count)


def counterexample_assemblage() -> Assemblage:
    return Assemblage(BlochObservable(0.0, z) for z in COUNTEREXAMPLE)
