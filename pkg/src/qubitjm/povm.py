"""Bloch-picture data model for binary qubit measurements and their joint POVMs.

Every 2x2 Hermitian operator is kept in Pauli coordinates ``(c0, cx, cy, cz)``
meaning ``c0*I + cx*X + cy*Y + cz*Z``.  Its eigenvalues are ``c0 +- |c|`` so
positivity is the Lorentz-cone condition ``c0 >= |c|``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

from .hypercube import (as_mask, mask_outcome, outcome_mask, popcount,
                        validate_outcome, walsh_hadamard)

TOL_POS = 1e-10
TOL_EQ = 1e-10

PAULI = np.array([
    [[1, 0], [0, 1]],
    [[0, 1], [1, 0]],
    [[0, -1j], [1j, 0]],
    [[1, 0], [0, -1]],
], dtype=complex)


class InvalidObservable(ValueError):
    pass


# ---------------------------------------------------------------------------
# Hermitian 2x2 operators

@dataclass(frozen=True)
class Hermitian2:
    c0: float
    cx: float
    cy: float
    cz: float

    @classmethod
    def from_coords(cls, coords: Sequence[float]) -> "Hermitian2":
        c = np.asarray(coords, dtype=float)
        if c.shape != (4,):
            raise ValueError(f"Pauli coordinates need 4 reals, got shape {c.shape}")
        return cls(*map(float, c))

    @classmethod
    def from_matrix(cls, m: np.ndarray) -> "Hermitian2":
        m = np.asarray(m, dtype=complex)
        # tr(P_a P_b) = 2 delta_ab
        return cls(*(0.5 * np.real(np.trace(p @ m)) for p in PAULI))

    @property
    def coords(self) -> np.ndarray:
        return np.array([self.c0, self.cx, self.cy, self.cz])

    @property
    def vector(self) -> np.ndarray:
        return np.array([self.cx, self.cy, self.cz])

    def eigenvalues(self) -> tuple[float, float]:
        r = float(np.linalg.norm(self.vector))
        return self.c0 - r, self.c0 + r

    def min_eigenvalue(self) -> float:
        return self.eigenvalues()[0]

    def is_psd(self, tol: float = TOL_POS) -> bool:
        return self.c0 >= np.linalg.norm(self.vector) - tol

    def to_matrix(self) -> np.ndarray:
        return np.tensordot(self.coords, PAULI, axes=1)

    def trace(self) -> float:
        return 2.0 * self.c0

    def __add__(self, other: "Hermitian2") -> "Hermitian2":
        return Hermitian2.from_coords(self.coords + other.coords)

    def __sub__(self, other: "Hermitian2") -> "Hermitian2":
        return Hermitian2.from_coords(self.coords - other.coords)

    def scaled(self, t: float) -> "Hermitian2":
        return Hermitian2.from_coords(t * self.coords)


IDENTITY = Hermitian2(1.0, 0.0, 0.0, 0.0)


def min_eigenvalues(coords: np.ndarray) -> np.ndarray:
    """Smaller eigenvalue for each row of an ``(..., 4)`` array of Pauli coordinates."""
    coords = np.asarray(coords, dtype=float)
    return coords[..., 0] - np.linalg.norm(coords[..., 1:], axis=-1)


def operator_norm(coords: np.ndarray) -> float:
    """Largest absolute eigenvalue of a Hermitian operator given in Pauli coordinates."""
    coords = np.asarray(coords, dtype=float)
    return float(abs(coords[0]) + np.linalg.norm(coords[1:]))


# ---------------------------------------------------------------------------
# observables and assemblages

@dataclass(frozen=True)
class BlochObservable:
    """Binary qubit POVM ``J(+-) = ((1 +- bias) I +- bloch . sigma) / 2``."""

    bias: float
    bloch: np.ndarray = field(compare=False)
    tol: float = field(default=TOL_POS, compare=False, repr=False)

    def __post_init__(self):
        vec = np.array(self.bloch, dtype=float).reshape(-1)
        if vec.shape != (3,):
            raise InvalidObservable(f"Bloch vector must have 3 components, got {vec.shape[0]}")
        if not np.all(np.isfinite(vec)) or not np.isfinite(self.bias):
            raise InvalidObservable("non-finite bias or Bloch vector")
        vec.setflags(write=False)
        object.__setattr__(self, "bloch", vec)
        object.__setattr__(self, "bias", float(self.bias))
        if abs(self.bias) > 1 + self.tol:
            raise InvalidObservable(f"|bias| = {abs(self.bias)} exceeds 1")
        if np.linalg.norm(vec) > 1 - abs(self.bias) + self.tol:
            raise InvalidObservable(
                f"effects not positive: |bloch| = {np.linalg.norm(vec):.12g} > 1 - |bias| = "
                f"{1 - abs(self.bias):.12g}")

    def __eq__(self, other):
        if not isinstance(other, BlochObservable):
            return NotImplemented
        return self.bias == other.bias and np.array_equal(self.bloch, other.bloch)

    def __hash__(self):
        return hash((self.bias, tuple(self.bloch)))

    @property
    def unbiased(self) -> bool:
        return self.bias == 0.0

    def effect(self, outcome: int) -> Hermitian2:
        if outcome not in (1, -1):
            raise ValueError("outcome must be +1 or -1")
        return Hermitian2(0.5 * (1 + outcome * self.bias), *(0.5 * outcome * self.bloch))

    def scaled(self, eta: float) -> "BlochObservable":
        return BlochObservable(eta * self.bias, eta * self.bloch)


class Assemblage:
    """Ordered, immutable list of binary qubit observables."""

    def __init__(self, observables: Iterable[BlochObservable]):
        obs = tuple(observables)
        if not obs:
            raise ValueError("an assemblage needs at least one observable")
        for o in obs:
            if not isinstance(o, BlochObservable):
                raise TypeError(f"expected BlochObservable, got {type(o).__name__}")
        self._obs = obs

    @classmethod
    def from_blochs(cls, vectors, biases=None) -> "Assemblage":
        vectors = np.atleast_2d(np.asarray(vectors, dtype=float))
        if biases is None:
            biases = np.zeros(len(vectors))
        if len(biases) != len(vectors):
            raise ValueError("biases and Bloch vectors differ in length")
        return cls(BlochObservable(b, v) for b, v in zip(biases, vectors))

    @property
    def observables(self) -> tuple[BlochObservable, ...]:
        return self._obs

    @property
    def n(self) -> int:
        return len(self._obs)

    def __len__(self):
        return len(self._obs)

    def __iter__(self):
        return iter(self._obs)

    def __getitem__(self, i):
        return self._obs[i]

    def __eq__(self, other):
        return isinstance(other, Assemblage) and self._obs == other._obs

    def __repr__(self):
        return f"Assemblage({list(self._obs)!r})"

    @property
    def biases(self) -> np.ndarray:
        return np.array([o.bias for o in self._obs])

    @property
    def blochs(self) -> np.ndarray:
        return np.array([o.bloch for o in self._obs])

    @property
    def unbiased(self) -> bool:
        return all(o.unbiased for o in self._obs)

    def permuted(self, order: Sequence[int]) -> "Assemblage":
        return Assemblage(self._obs[i] for i in order)

    def transformed(self, rotation: np.ndarray) -> "Assemblage":
        return Assemblage.from_blochs(self.blochs @ np.asarray(rotation).T, self.biases)

    def scaled(self, eta: float) -> "Assemblage":
        return Assemblage(o.scaled(eta) for o in self._obs)


# ---------------------------------------------------------------------------
# Fourier representation and joint POVMs

class FourierCoefficients:
    """Scalar and vector Fourier coefficients of a joint POVM, indexed by subset mask.

    ``scalars[S]`` and ``vectors[S]`` are the coefficients of ``chi_S`` in
    ``2^N J(mu) = (sum_S scalars[S] chi_S(mu)) I + (sum_S vectors[S] chi_S(mu)) . sigma``.
    """

    def __init__(self, n: int, scalars: np.ndarray, vectors: np.ndarray, tol: float = TOL_EQ):
        scalars = np.asarray(scalars, dtype=float)
        vectors = np.asarray(vectors, dtype=float)
        if scalars.shape != (1 << n,) or vectors.shape != (1 << n, 3):
            raise ValueError(f"coefficient arrays must have {1 << n} entries")
        if abs(scalars[0] - 1) > tol or np.linalg.norm(vectors[0]) > tol:
            raise ValueError("normalisation requires scalars[{}] = 1 and vectors[{}] = 0")
        self.n = n
        self.scalars = scalars
        self.vectors = vectors

    @classmethod
    def from_maps(cls, n: int, scalars: Mapping | None = None,
                  vectors: Mapping | None = None) -> "FourierCoefficients":
        s = np.zeros(1 << n)
        v = np.zeros((1 << n, 3))
        s[0] = 1.0
        for key, val in (scalars or {}).items():
            m = as_mask(key)
            if m == 0:
                continue
            _check_mask(m, n)
            s[m] = val
        for key, val in (vectors or {}).items():
            m = as_mask(key)
            if m == 0:
                continue
            _check_mask(m, n)
            v[m] = val
        return cls(n, s, v)

    @classmethod
    def from_assemblage(cls, assemblage: Assemblage, higher: Mapping | None = None,
                        even_scalars: Mapping | None = None) -> "FourierCoefficients":
        n = assemblage.n
        scalars = {1 << i: o.bias for i, o in enumerate(assemblage)}
        scalars.update(even_scalars or {})
        vectors = {1 << i: o.bloch for i, o in enumerate(assemblage)}
        vectors.update(higher or {})
        return cls.from_maps(n, scalars, vectors)

    def scalar(self, S) -> float:
        return float(self.scalars[as_mask(S)])

    def vector(self, S) -> np.ndarray:
        return self.vectors[as_mask(S)].copy()


def _check_mask(m: int, n: int) -> None:
    if m.bit_length() > n:
        raise ValueError(f"subset mask {m:b} exceeds N = {n}")


def effect_from_fourier(coeffs: FourierCoefficients, mu: Sequence[int]) -> Hermitian2:
    mu = validate_outcome(mu, coeffs.n)
    m = outcome_mask(mu)
    signs = np.array([-1.0 if popcount(s & m) & 1 else 1.0 for s in range(1 << coeffs.n)])
    scale = 1.0 / (1 << coeffs.n)
    return Hermitian2(scale * float(signs @ coeffs.scalars),
                      *(scale * (signs @ coeffs.vectors)))


class JointPovm:
    """``2^N`` qubit effects, row ``m`` holding the effect of the outcome with ``-1`` at mask ``m``."""

    def __init__(self, n: int, effects: np.ndarray):
        effects = np.asarray(effects, dtype=float)
        if effects.shape != (1 << n, 4):
            raise ValueError(f"expected effects of shape {(1 << n, 4)}, got {effects.shape}")
        self.n = n
        self.effects = effects

    @classmethod
    def from_fourier(cls, coeffs: FourierCoefficients) -> "JointPovm":
        full = np.column_stack([coeffs.scalars, coeffs.vectors])
        return cls(coeffs.n, walsh_hadamard(full) / (1 << coeffs.n))

    @classmethod
    def from_mapping(cls, n: int, effects: Mapping) -> "JointPovm":
        arr = np.full((1 << n, 4), np.nan)
        for mu, op in effects.items():
            coords = op.coords if isinstance(op, Hermitian2) else np.asarray(op, dtype=float)
            arr[outcome_mask(validate_outcome(mu, n))] = coords
        if np.isnan(arr).any():
            raise ValueError("joint POVM is missing outcomes")
        return cls(n, arr)

    def effect(self, mu: Sequence[int]) -> Hermitian2:
        return Hermitian2.from_coords(self.effects[outcome_mask(validate_outcome(mu, self.n))])

    def items(self):
        for m in range(1 << self.n):
            yield mask_outcome(m, self.n), Hermitian2.from_coords(self.effects[m])

    def scaled(self, t: float) -> "JointPovm":
        return JointPovm(self.n, t * self.effects)

    def fourier(self) -> tuple[np.ndarray, np.ndarray]:
        """Invert to (scalars, vectors) Fourier coefficients."""
        full = walsh_hadamard(self.effects)
        return full[:, 0], full[:, 1:]


def marginal(povm: JointPovm, i: int) -> BlochObservable:
    """Observable ``i`` (1-based) obtained by direct summation over the other outcomes."""
    if not 1 <= i <= povm.n:
        raise IndexError(f"measurement index {i} outside [1, {povm.n}]")
    masks = np.arange(1 << povm.n)
    plus = povm.effects[(masks >> (i - 1)) & 1 == 0].sum(axis=0)
    # J_i(+) = ((1 + bias) I + bloch . sigma) / 2
    return BlochObservable(2 * plus[0] - 1, 2 * plus[1:], tol=np.inf)


def marginal_from_fourier(coeffs: FourierCoefficients, i: int) -> BlochObservable:
    if not 1 <= i <= coeffs.n:
        raise IndexError(f"measurement index {i} outside [1, {coeffs.n}]")
    m = 1 << (i - 1)
    return BlochObservable(coeffs.scalars[m], coeffs.vectors[m], tol=np.inf)


@dataclass
class PovmCheck:
    min_eigenvalue: float
    identity_residual: float
    marginal_residual: float
    valid: bool
    tol_pos: float
    tol_eq: float


def marginal_residual(povm: JointPovm, assemblage: Assemblage) -> float:
    if povm.n != assemblage.n:
        raise ValueError(f"POVM has N = {povm.n}, assemblage has N = {assemblage.n}")
    worst = 0.0
    for i, obs in enumerate(assemblage, start=1):
        got = marginal(povm, i)
        worst = max(worst, abs(got.bias - obs.bias), float(np.linalg.norm(got.bloch - obs.bloch)))
    return worst


def verify_povm(povm: JointPovm, reference: Assemblage | None = None,
                tol_pos: float = TOL_POS, tol_eq: float = TOL_EQ) -> PovmCheck:
    """Positivity, completeness and (optionally) marginal checks; never raises on bad input."""
    lam = float(min_eigenvalues(povm.effects).min())
    total = povm.effects.sum(axis=0) - IDENTITY.coords
    ident = operator_norm(total)
    marg = 0.0 if reference is None else marginal_residual(povm, reference)
    valid = lam >= -tol_pos and ident <= tol_eq and marg <= tol_eq
    return PovmCheck(lam, ident, marg, bool(valid), tol_pos, tol_eq)
