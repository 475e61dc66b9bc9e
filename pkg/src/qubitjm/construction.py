"""Explicit joint POVMs for unbiased binary qubit observables.

Odd Fourier levels carry only vectors (the Bloch vectors plus the free
``|S| >= 3`` slots), even levels carry only scalars.  The even scalars are fixed
by requiring ``1 + sum_even z'(S) chi_S(mu) = |sum_odd z'(S) chi_S(mu)|`` on
every half-cube outcome except the all-plus one, which makes each of those
effects rank one.  That system is ``A x = b`` with the closed-form inverse in
:mod:`hypercube`.  The all-plus effect is then positive exactly when the
norm sum over the half cube is at most ``2^{N-1}``, and the other half of the
cube follows by the reflection ``mu -> -mu``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .hypercube import (apply_A, apply_A_inverse, as_mask, label_orders, odd_higher_masks, popcount,
                        walsh_hadamard)
from .povm import (TOL_EQ, TOL_POS, Assemblage, FourierCoefficients, JointPovm, PovmCheck,
                   marginal_residual, min_eigenvalues, verify_povm)


@dataclass
class WitnessReport:
    joint: JointPovm
    even_scalars: dict[int, float]
    odd_vectors: dict[int, np.ndarray] = field(repr=False)
    min_effect_eigenvalue: float
    marginal_residual: float
    identity_residual: float
    system_residual: float
    min_eigenvalue_half: float  # outcomes with mu_1 = +1
    min_eigenvalue_reflected: float  # outcomes with mu_1 = -1
    check: PovmCheck = field(repr=False)

    @property
    def valid(self) -> bool:
        return self.check.valid


def higher_map(n: int, higher) -> dict[int, np.ndarray]:
    """Normalise the free slot vectors to ``{mask: vector}``.

    Accepts ``None`` (all zero), a ``(K, 3)`` array in slot order, or a mapping
    keyed by anything :func:`hypercube.as_mask` understands.
    """
    slots = odd_higher_masks(n)
    out = {m: np.zeros(3) for m in slots}
    if higher is None:
        return out
    if isinstance(higher, dict):
        for key, vec in higher.items():
            m = as_mask(key)
            if m not in out:
                if m.bit_length() > n or popcount(m) % 2 == 0 or popcount(m) < 3:
                    raise ValueError(f"{key!r} is not an odd subset of size >= 3 in [1, {n}]")
            out[m] = np.asarray(vec, dtype=float).reshape(3)
        return out
    arr = np.asarray(higher, dtype=float).reshape(-1, 3) if np.size(higher) else np.zeros((0, 3))
    if arr.shape[0] != len(slots):
        raise ValueError(f"expected {len(slots)} higher vectors, got {arr.shape[0]}")
    return {m: arr[j].copy() for j, m in enumerate(slots)}


def half_cube_norms(assemblage: Assemblage, higher: dict[int, np.ndarray]) -> np.ndarray:
    """``|sum_odd z'(S) chi_S(mu)|`` for ``mu`` with ``mu_1 = +1``, indexed by ``mask >> 1``."""
    n = assemblage.n
    vec = np.zeros((1 << n, 3))
    for i, o in enumerate(assemblage):
        vec[1 << i] = o.bloch
    for m, v in higher.items():
        vec[m] = v
    field_ = walsh_hadamard(vec)[0::2]  # even masks = half cube, in order mask >> 1
    return np.linalg.norm(field_, axis=1)


def construct_joint(assemblage: Assemblage, higher=None, tol_pos: float = TOL_POS,
                    tol_eq: float = TOL_EQ) -> WitnessReport:
    """Build the joint POVM from the given free slot vectors and verify it.

    The report is returned even when positivity fails; ``valid`` then is False.
    """
    if not assemblage.unbiased:
        raise ValueError("the explicit construction needs unbiased observables")
    n = assemblage.n
    odd = higher_map(n, higher)
    norms = half_cube_norms(assemblage, odd)
    even: dict[int, float] = {}
    system_residual = 0.0
    if n >= 2:
        orders = label_orders(n)
        b = norms[orders.b_masks >> 1] - 1.0
        x = apply_A_inverse(n, b)
        system_residual = float(np.abs(apply_A(n, x) - b).max())
        even = {int(m): float(v) for m, v in zip(orders.x_masks, x)}
    coeffs = FourierCoefficients.from_assemblage(assemblage, higher=odd, even_scalars=even)
    joint = JointPovm.from_fourier(coeffs)
    return _report(joint, assemblage, even, odd, system_residual, tol_pos, tol_eq)


def _report(joint, assemblage, even, odd, system_residual, tol_pos, tol_eq) -> WitnessReport:
    check = verify_povm(joint, assemblage, tol_pos=tol_pos, tol_eq=tol_eq)
    lam = min_eigenvalues(joint.effects)
    return WitnessReport(
        joint=joint, even_scalars=even, odd_vectors=odd,
        min_effect_eigenvalue=check.min_eigenvalue,
        marginal_residual=check.marginal_residual,
        identity_residual=check.identity_residual,
        system_residual=system_residual,
        min_eigenvalue_half=float(lam[0::2].min()),
        min_eigenvalue_reflected=float(lam[1::2].min()),
        check=check,
    )


def check_marginals(witness: JointPovm, assemblage: Assemblage) -> float:
    """Largest bias or Bloch-vector mismatch between the witness marginals and the assemblage."""
    return marginal_residual(witness, assemblage)


def common_axis(assemblage: Assemblage, tol: float = 1e-12):
    """Unit axis shared by all Bloch vectors, or None when they are not collinear."""
    z = assemblage.blochs
    norms = np.linalg.norm(z, axis=1)
    if norms.max() == 0:
        return np.array([0.0, 0.0, 1.0])
    axis = z[np.argmax(norms)] / norms.max()
    off = z - np.outer(z @ axis, axis)
    if np.linalg.norm(off, axis=1).max() > tol:
        return None
    return axis


def product_joint(assemblage: Assemblage, tol_pos: float = TOL_POS,
                  tol_eq: float = TOL_EQ) -> WitnessReport:
    """Product of the effects of mutually commuting observables (collinear Bloch vectors).

    All effects are diagonal in the eigenbasis of ``axis . sigma``, so the
    product of one effect per observable is positive and summing out any
    factor returns the identity on it.  Works for any bias.
    """
    axis = common_axis(assemblage)
    if axis is None:
        raise ValueError("Bloch vectors are not collinear; the effects do not commute")
    n = assemblage.n
    proj = assemblage.blochs @ axis  # signed length along the axis
    masks = np.arange(1 << n)
    up = np.ones(1 << n)
    down = np.ones(1 << n)
    for i, o in enumerate(assemblage):
        sign = 1.0 - 2.0 * ((masks >> i) & 1)
        a = 0.5 * (1 + sign * o.bias)
        c = 0.5 * sign * proj[i]
        up *= a + c
        down *= a - c
    effects = np.column_stack([(up + down) / 2, np.outer((up - down) / 2, axis)])
    joint = JointPovm(n, effects)
    scalars, vectors = joint.fourier()
    even = {int(m): float(scalars[m]) for m in label_orders(n).x_masks} if n >= 2 else {}
    odd = {m: vectors[m] for m in odd_higher_masks(n)}
    return _report(joint, assemblage, even, odd, 0.0, tol_pos, tol_eq)
