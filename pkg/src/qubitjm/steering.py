"""Steering tests through the state-to-POVM map ``sigma -> rho^{-1/2} sigma rho^{-1/2}``.

An assemblage of conditional qubit states admits a local-hidden-state model
exactly when the mapped binary POVMs are jointly measurable, so the criterion
in :mod:`criterion` doubles as a family of steering inequalities.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .criterion import TOL_DECISION, DecisionReport, Verdict, decide
from .povm import TOL_EQ, TOL_POS, Assemblage, BlochObservable, Hermitian2

PINV_CUTOFF = 1e-12


class InconsistentAssemblage(ValueError):
    pass


@dataclass(frozen=True)
class StateAssemblage:
    """Subnormalised states ``sigma_i(+1), sigma_i(-1)`` for each input ``i``."""

    members: tuple[tuple[Hermitian2, Hermitian2], ...]
    tol_pos: float = TOL_POS
    tol_eq: float = TOL_EQ

    def __post_init__(self):
        if not self.members:
            raise InconsistentAssemblage("a state assemblage needs at least one input")
        for i, pair in enumerate(self.members):
            for sign, st in zip((+1, -1), pair):
                if not st.is_psd(self.tol_pos):
                    raise InconsistentAssemblage(
                        f"input {i + 1}, outcome {sign:+d}: state is not positive "
                        f"(min eigenvalue {st.min_eigenvalue():.3e})")

    @classmethod
    def from_coords(cls, pairs: Sequence, **kw) -> "StateAssemblage":
        return cls(tuple((Hermitian2.from_coords(p), Hermitian2.from_coords(m)) for p, m in pairs), **kw)

    @property
    def n(self) -> int:
        return len(self.members)

    def conjugated(self, unitary: np.ndarray) -> "StateAssemblage":
        u = np.asarray(unitary, dtype=complex)
        return StateAssemblage(tuple(
            tuple(Hermitian2.from_matrix(u @ s.to_matrix() @ u.conj().T) for s in pair)
            for pair in self.members), self.tol_pos, self.tol_eq)


def reduced_state(sa: StateAssemblage) -> Hermitian2:
    """The common outcome sum ``sigma_i(+) + sigma_i(-)``; raises if inputs disagree or trace is not 1."""
    sums = np.array([(p + m).coords for p, m in sa.members])
    rho = sums.mean(axis=0)
    dev = float(np.abs(sums - rho).max())
    if dev > sa.tol_eq:
        raise InconsistentAssemblage(f"outcome sums differ across inputs by up to {dev:.3e}")
    tr = 2.0 * rho[0]
    if abs(tr - 1.0) > sa.tol_eq:
        raise InconsistentAssemblage(f"reduced state has trace {tr:.12g}, expected 1")
    return Hermitian2.from_coords(sums[0])


def inverse_sqrt(rho: Hermitian2, cutoff: float = PINV_CUTOFF) -> tuple[np.ndarray, np.ndarray]:
    """Pseudo-inverse square root of a qubit operator and the projector onto its support.

    Eigenvalues ``c0 +- |c|`` have eigenprojectors ``(I +- c.sigma/|c|)/2``.
    """
    if not rho.is_psd(TOL_POS):
        raise InconsistentAssemblage(f"reduced state is not positive (min eigenvalue {rho.min_eigenvalue():.3e})")
    c0, c = rho.c0, rho.vector
    r = float(np.linalg.norm(c))
    axis = c / r if r > 0 else np.array([0.0, 0.0, 1.0])
    root = np.zeros((2, 2), dtype=complex)
    support = np.zeros((2, 2), dtype=complex)
    for sign in (+1, -1):
        lam = c0 + sign * r
        proj = Hermitian2(0.5, *(0.5 * sign * axis)).to_matrix()
        if lam > cutoff:
            root += proj / np.sqrt(lam)
            support += proj
    return root, support


def steering_equivalent(sa: StateAssemblage, cutoff: float = PINV_CUTOFF) -> Assemblage:
    """Binary POVMs ``J_i(+-) = rho^{-1/2} sigma_i(+-) rho^{-1/2}``.

    Off the support of ``rho`` (rank-one case) the mapped effects are completed
    by ``t_i (I - P)`` and ``(1 - t_i)(I - P)``, where ``t_i`` is the weight of
    ``J_i(+)`` on the support.  With rank one every state is proportional to
    ``rho``, so the completed POVMs are trivial, as an LHS model requires.
    Biases within ``tol_eq`` of zero are set to zero.
    """
    rho = reduced_state(sa)
    root, support = inverse_sqrt(rho, cutoff)
    rank = int(round(np.trace(support).real))
    if rank == 0:
        raise InconsistentAssemblage("reduced state vanishes")
    observables = []
    for plus, _minus in sa.members:
        jp = root @ plus.to_matrix() @ root
        if rank == 1:
            t = float(np.trace(jp).real)
            jp = jp + t * (np.eye(2) - support)
        op = Hermitian2.from_matrix(jp)
        bias = 2 * op.c0 - 1
        if abs(bias) <= sa.tol_eq:
            bias = 0.0  # roundoff from the conjugation; keeps unbiased inputs unbiased
        observables.append(BlochObservable(bias, 2 * op.vector, tol=max(sa.tol_pos, 1e-9)))
    return Assemblage(observables)


def steering_decision(sa: StateAssemblage, tol: float = TOL_DECISION, **decide_kw) -> DecisionReport:
    """Criterion applied to the mapped POVMs: Incompatible means steerable."""
    return decide(steering_equivalent(sa), tol=tol, **decide_kw)


def lhs_status(report: DecisionReport) -> str:
    if report.verdict is Verdict.INCOMPATIBLE:
        return "steerable"
    if report.verdict is Verdict.JOINTLY_MEASURABLE:
        return "lhs-model"
    if report.verdict is Verdict.NECESSARY_HOLDS:
        return "no-violation"
    return "undetermined"


def noisy_singlet(directions, visibility: float) -> StateAssemblage:
    """Bob's conditional states when Alice measures ``+-a_i . sigma`` on a Werner state.

    ``sigma_i(+-) = (I -+ v a_i . sigma) / 4``.
    """
    d = np.atleast_2d(np.asarray(directions, dtype=float))
    pairs = [(np.r_[0.25, -0.25 * visibility * a], np.r_[0.25, 0.25 * visibility * a]) for a in d]
    return StateAssemblage.from_coords(pairs)


def from_povms(assemblage: Assemblage, rho: Hermitian2 | None = None) -> StateAssemblage:
    """States ``rho^{1/2} J_i(+-) rho^{1/2}``; with ``rho = I/2`` simply ``J_i(+-)/2``."""
    if rho is None:
        rho = Hermitian2(0.5, 0.0, 0.0, 0.0)
    w, v = np.linalg.eigh(rho.to_matrix())
    half = (v * np.sqrt(np.clip(w, 0, None))) @ v.conj().T
    pairs = []
    for o in assemblage:
        pairs.append(tuple(Hermitian2.from_matrix(half @ o.effect(s).to_matrix() @ half) for s in (+1, -1)))
    return StateAssemblage(tuple(pairs))
