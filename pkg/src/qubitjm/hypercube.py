"""Boolean-cube combinatorics for binary qubit joint measurability.

Index sets ``S`` of ``[N] = {1..N}`` are encoded as integer bit masks with bit
``i-1`` standing for index ``i``.  An outcome vector ``mu`` in ``{-1,+1}^N`` is
encoded by the mask of its ``-1`` positions, so that ``chi_S(mu)`` equals
``(-1) ** popcount(S & mask(mu))`` and the full character table is the
Sylvester-ordered Walsh-Hadamard matrix.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from itertools import combinations
from typing import Iterable, Sequence

import numpy as np

N_MAX = 16
DENSE_A_MAX = 12


def _check_n(n: int, lo: int = 1, nmax: int = N_MAX) -> None:
    if not isinstance(n, (int, np.integer)) or n < lo or n > nmax:
        raise ValueError(f"N must be an integer in [{lo}, {nmax}], got {n!r}")


@dataclass(frozen=True, order=False)
class SubsetLabel:
    """A subset of ``{1, ..., N}`` stored as a bit mask."""

    mask: int

    def __post_init__(self):
        if self.mask < 0:
            raise ValueError("subset mask must be non-negative")

    @classmethod
    def of(cls, *indices: int) -> "SubsetLabel":
        mask = 0
        for i in indices:
            if i < 1:
                raise ValueError(f"subset indices start at 1, got {i}")
            mask |= 1 << (i - 1)
        return cls(mask)

    @property
    def indices(self) -> tuple[int, ...]:
        return mask_indices(self.mask)

    def __len__(self) -> int:
        return popcount(self.mask)

    def __contains__(self, i: int) -> bool:
        return i >= 1 and bool(self.mask >> (i - 1) & 1)

    def __str__(self) -> str:
        if not self.mask:
            return "{}"
        return "".join(str(i) if i < 10 else f"({i})" for i in self.indices)

    def max_index(self) -> int:
        return self.mask.bit_length()


def popcount(m: int) -> int:
    return bin(m).count("1")


def mask_indices(mask: int) -> tuple[int, ...]:
    return tuple(i + 1 for i in range(mask.bit_length()) if mask >> i & 1)


def as_mask(S) -> int:
    """Accept a SubsetLabel, an int mask, or an iterable of 1-based indices."""
    if isinstance(S, SubsetLabel):
        return S.mask
    if isinstance(S, (int, np.integer)):
        return int(S)
    return SubsetLabel.of(*S).mask


def label_key(mask: int) -> tuple[int, tuple[int, ...]]:
    """Ascending cardinality, then lexicographic on the sorted indices."""
    return (popcount(mask), mask_indices(mask))


def parse_label(text: str) -> SubsetLabel:
    """Parse labels such as ``"123"``, ``"1,2,3"`` or ``"{1,2,3}"``."""
    body = text.strip().strip("{}()[] ")
    if not body:
        return SubsetLabel(0)
    if "," in body or " " in body:
        parts = [p for p in body.replace(",", " ").split() if p]
        return SubsetLabel.of(*(int(p) for p in parts))
    return SubsetLabel.of(*(int(ch) for ch in body))


# ---------------------------------------------------------------------------
# outcome vectors

def validate_outcome(mu: Sequence[int], n: int | None = None) -> tuple[int, ...]:
    mu = tuple(int(v) for v in mu)
    if n is not None and len(mu) != n:
        raise ValueError(f"outcome vector has length {len(mu)}, expected {n}")
    if any(v not in (-1, 1) for v in mu):
        raise ValueError(f"outcome entries must be +1 or -1, got {mu}")
    return mu


def outcome_mask(mu: Sequence[int]) -> int:
    mask = 0
    for i, v in enumerate(validate_outcome(mu)):
        if v == -1:
            mask |= 1 << i
    return mask


def mask_outcome(mask: int, n: int) -> tuple[int, ...]:
    return tuple(-1 if mask >> i & 1 else 1 for i in range(n))


def chi(S, mu: Sequence[int]) -> int:
    """Character ``chi_S(mu) = prod_{i in S} mu_i``; ``chi_{}`` is identically 1."""
    mu = validate_outcome(mu)
    m = as_mask(S)
    if m.bit_length() > len(mu):
        raise ValueError(f"subset {mask_indices(m)} exceeds outcome length {len(mu)}")
    sign = 1
    for i in mask_indices(m):
        sign *= mu[i - 1]
    return sign


def sum_chi_over_cube(S, n: int) -> int:
    """Direct summation of ``chi_S`` over all of ``{-1,+1}^n``."""
    _check_n(n)
    m = as_mask(S)
    if m.bit_length() > n:
        raise ValueError(f"subset {mask_indices(m)} not contained in [1, {n}]")
    return sum(chi(m, mask_outcome(k, n)) for k in range(1 << n))


# ---------------------------------------------------------------------------
# label orders and configuration set

@dataclass(frozen=True)
class LabelOrders:
    n: int
    x_labels: tuple[SubsetLabel, ...]
    b_labels: tuple[SubsetLabel, ...]

    @property
    def d(self) -> int:
        return len(self.x_labels)

    @property
    def x_masks(self) -> np.ndarray:
        return np.array([s.mask for s in self.x_labels], dtype=np.int64)

    @property
    def b_masks(self) -> np.ndarray:
        return np.array([s.mask for s in self.b_labels], dtype=np.int64)


def d_of(n: int) -> int:
    return (1 << (n - 1)) - 1


def sorted_subsets(elements: Iterable[int], predicate=None) -> list[int]:
    elements = sorted(elements)
    out = []
    for k in range(1, len(elements) + 1):
        for combo in combinations(elements, k):
            m = SubsetLabel.of(*combo).mask
            if predicate is None or predicate(m):
                out.append(m)
    return out


@lru_cache(maxsize=None)
def label_orders(n: int) -> LabelOrders:
    """Ordered even-set labels X and half-cube labels B for the matrix A."""
    _check_n(n)
    x = sorted_subsets(range(1, n + 1), lambda m: popcount(m) % 2 == 0)
    b = sorted_subsets(range(2, n + 1))
    return LabelOrders(n, tuple(SubsetLabel(m) for m in x), tuple(SubsetLabel(m) for m in b))


def configuration_set(n: int) -> list[tuple[int, ...]]:
    """The half cube ``{mu : mu_1 = +1}``: the all-plus vector first, then b-label order."""
    _check_n(n)
    orders = label_orders(n)
    return [mask_outcome(0, n)] + [mask_outcome(s.mask, n) for s in orders.b_labels]


@lru_cache(maxsize=None)
def odd_higher_masks(n: int) -> tuple[int, ...]:
    """Odd subsets with ``|S| >= 3`` in label order: the free Fourier slots."""
    _check_n(n)
    return tuple(m for m in sorted_subsets(range(1, n + 1))
                 if popcount(m) % 2 == 1 and popcount(m) >= 3)


# ---------------------------------------------------------------------------
# the matrix A and its inverse

def popcount_array(a: np.ndarray) -> np.ndarray:
    return np.bitwise_count(np.asarray(a, dtype=np.uint64)).astype(np.int64)


def parity_signs(rows: np.ndarray, cols: np.ndarray) -> np.ndarray:
    """Matrix of ``(-1)^{|r & c|}`` for the given row and column masks."""
    inter = np.bitwise_and.outer(np.asarray(rows, dtype=np.int64), np.asarray(cols, dtype=np.int64))
    return (1 - 2 * (popcount_array(inter) & 1)).astype(np.int64)


def a_entry(n: int, k: int, i: int) -> int:
    """Entry ``A[k, i]`` (0-based) computed on demand."""
    orders = label_orders(n)
    return -1 if popcount(orders.b_labels[k].mask & orders.x_labels[i].mask) & 1 else 1


def build_A(n: int) -> np.ndarray:
    """Dense ``d(N) x d(N)`` matrix with entries ``(-1)^{|B_k & X_i|}``."""
    _check_n(n, lo=2)
    if n > DENSE_A_MAX:
        raise ValueError(f"dense A refused for N > {DENSE_A_MAX}; use apply_A / apply_A_inverse")
    orders = label_orders(n)
    return parity_signs(orders.b_masks, orders.x_masks)


def walsh_hadamard(values: np.ndarray) -> np.ndarray:
    """Unnormalised Walsh-Hadamard transform along axis 0 (length a power of 2).

    ``out[m] = sum_s values[s] * (-1)^{popcount(s & m)}``.
    """
    a = np.array(values, dtype=float, copy=True)
    size = a.shape[0]
    if size & (size - 1):
        raise ValueError("transform length must be a power of two")
    h = 1
    tail = a.shape[1:]
    while h < size:
        v = a.reshape((size // (2 * h), 2, h) + tail)
        top = v[:, 0].copy()
        v[:, 0] += v[:, 1]
        v[:, 1] = top - v[:, 1]
        h *= 2
    return a


def apply_A(n: int, x: np.ndarray) -> np.ndarray:
    """Matrix-free ``A @ x``."""
    _check_n(n, lo=2)
    orders = label_orders(n)
    x = np.asarray(x, dtype=float)
    if x.shape[0] != orders.d:
        raise ValueError(f"expected length {orders.d}, got {x.shape[0]}")
    full = np.zeros((1 << n,) + x.shape[1:])
    full[orders.x_masks] = x
    return walsh_hadamard(full)[orders.b_masks]


def apply_A_inverse(n: int, b: np.ndarray) -> np.ndarray:
    """Solve ``A x = b`` with the closed-form inverse.

    ``x_i = 2^{-(N-1)} * sum_k (A[k, i] - 1) * b_k``, evaluated through one
    Walsh-Hadamard transform instead of a stored matrix.
    """
    _check_n(n)
    b = np.asarray(b, dtype=float)
    d = d_of(n)
    if b.shape[0] != d:
        raise ValueError(f"expected length {d}, got {b.shape[0]}")
    if d == 0:
        return b.copy()
    orders = label_orders(n)
    full = np.zeros((1 << n,) + b.shape[1:])
    full[orders.b_masks] = b
    at_b = walsh_hadamard(full)[orders.x_masks]
    return (at_b - b.sum(axis=0)) / (1 << (n - 1))


def scaled_inverse_int(n: int) -> np.ndarray:
    """``2^{N-1} * A^{-1}`` as an exact integer matrix (``A^T - 1``)."""
    return build_A(n).T - 1
