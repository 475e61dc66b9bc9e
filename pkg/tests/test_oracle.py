import numpy as np
import pytest

from conftest import random_biased, random_unbiased
from qubitjm import criterion as cr
from qubitjm.oracle import (Feasible, InfeasibleEvidence, Undecided, feasibility_oracle,
                            project_lorentz, weiszfeld_ft)
from qubitjm.povm import Assemblage, Hermitian2, verify_povm


# --- oracles for the oracle -----------------------------------------------------

def cone_projection_by_eigh(c):
    """Frobenius projection onto PSD matrices, back in Pauli coordinates."""
    m = Hermitian2.from_coords(c).to_matrix()
    w, v = np.linalg.eigh(m)
    return Hermitian2.from_matrix((v * np.clip(w, 0, None)) @ v.conj().T).coords


def brute_geometric_median_value(points, rng, trials=4000):
    best = min(np.linalg.norm(points - p, axis=1).sum() for p in points)
    centre = points.mean(axis=0)
    for _ in range(trials):
        x = centre + rng.normal(size=points.shape[1]) * points.std()
        best = min(best, np.linalg.norm(points - x, axis=1).sum())
    return best


def xz(eta):
    return Assemblage.from_blochs([[eta, 0, 0], [0, 0, eta]])


# --- projections ------------------------------------------------------------------

def test_lorentz_projection_matches_eigh(rng):
    c = rng.normal(size=(200, 4))
    got = project_lorentz(c)
    for row, g in zip(c, got):
        np.testing.assert_allclose(g, cone_projection_by_eigh(row), atol=1e-12)


# --- feasibility -------------------------------------------------------------------

def test_pair_examples():
    res = feasibility_oracle(xz(0.5))
    assert isinstance(res, Feasible) and res.check.valid
    assert verify_povm(res.joint, xz(0.5)).valid
    res = feasibility_oracle(xz(0.8))
    assert isinstance(res, InfeasibleEvidence)
    assert res.distance > 1e-3 and res.certified


def test_single_measurement():
    res = feasibility_oracle(Assemblage.from_blochs([[0, 0.6, 0.8]]))
    assert isinstance(res, Feasible) and res.iterations == 0


def test_averaged_variant():
    assert isinstance(feasibility_oracle(xz(0.5), method="averaged"), Feasible)
    assert isinstance(feasibility_oracle(xz(0.8), method="averaged"), InfeasibleEvidence)
    with pytest.raises(ValueError):
        feasibility_oracle(xz(0.5), method="dykstra")


def test_certificate_bound_below_true_distance():
    # the set distance cannot exceed the distance between any pair of iterates
    res = feasibility_oracle(xz(0.9))
    assert 0 < res.lower_bound <= res.distance + 1e-12


def test_budget_and_scale_limits():
    res = feasibility_oracle(cr.counterexample_assemblage(), max_iters=1)
    assert isinstance(res, (Undecided, Feasible))
    with pytest.raises(ValueError):
        feasibility_oracle(Assemblage.from_blochs(np.zeros((9, 3))))


def test_counterexample_feasible():
    res = feasibility_oracle(cr.counterexample_assemblage())
    assert isinstance(res, Feasible)


@pytest.mark.parametrize("n", [2, 3])
def test_agrees_with_criterion_small(n, rng):
    for _ in range(15):
        a = random_unbiased(rng, n)
        rep = cr.decide(a, witness=False)
        res = feasibility_oracle(a)
        if isinstance(res, Feasible):
            assert rep.verdict is not cr.Verdict.INCOMPATIBLE
        if isinstance(res, InfeasibleEvidence):
            assert rep.verdict is not cr.Verdict.JOINTLY_MEASURABLE


def test_biased_feasible_implies_necessary(rng):
    for _ in range(15):
        a = random_biased(rng, 2)
        if isinstance(feasibility_oracle(a), Feasible):
            assert cr.decide(a).dual_lower_bound <= 2 * (1 + 1e-7)


# --- Weiszfeld ------------------------------------------------------------------------

def test_weiszfeld_examples():
    p, v = weiszfeld_ft([[1.0, 2.0, 3.0]])
    np.testing.assert_array_equal(p, [1, 2, 3])
    assert v == 0
    a, b = np.array([0.0, 0, 0]), np.array([1.0, 1, 0])
    p, v = weiszfeld_ft([a, b])
    assert v == pytest.approx(np.sqrt(2))
    assert np.linalg.norm(p - a) + np.linalg.norm(p - b) == pytest.approx(np.sqrt(2))
    tri = [[0, 0, 0], [1, 0, 0], [0.5, np.sqrt(3) / 2, 0]]
    p, v = weiszfeld_ft(tri)
    assert v == pytest.approx(np.sqrt(3), abs=1e-10)
    np.testing.assert_allclose(p, [0.5, np.sqrt(3) / 6, 0], atol=1e-8)
    with pytest.raises(ValueError):
        weiszfeld_ft(np.zeros((0, 3)))


def test_weiszfeld_anchor_optimal():
    # obtuse triangle: the 150-degree vertex is the minimiser
    pts = np.array([[0, 0, 0], [1, 0, 0], [np.cos(np.radians(150)), np.sin(np.radians(150)), 0]])
    p, v = weiszfeld_ft(pts)
    np.testing.assert_array_equal(p, pts[0])
    assert v == pytest.approx(2.0)
    # repeated points carry weight
    p, _ = weiszfeld_ft([[0, 0, 0], [0, 0, 0], [1, 0, 0], [0, 1, 0]])
    np.testing.assert_array_equal(p, [0, 0, 0])


def test_weiszfeld_vs_sampling(rng):
    for _ in range(5):
        pts = rng.normal(size=(5, 3))
        _, v = weiszfeld_ft(pts)
        assert v <= brute_geometric_median_value(pts, rng) + 1e-12


def test_weiszfeld_gradient_zero(rng):
    pts = rng.normal(size=(6, 3))
    x, _ = weiszfeld_ft(pts)
    d = pts - x
    g = (d / np.linalg.norm(d, axis=1)[:, None]).sum(axis=0)
    assert np.linalg.norm(g) < 1e-9
