import itertools

import numpy as np
import pytest

from conftest import random_biased, random_directions, random_rotation, random_unbiased
from qubitjm import criterion as cr
from qubitjm.criterion import Verdict
from qubitjm.povm import Assemblage, BlochObservable


# --- oracles -------------------------------------------------------------------

def busch_oracle(z1, z2):
    """Sum of the two half-cube norms written out by hand."""
    return float(np.sqrt(((z1 + z2) ** 2).sum()) + np.sqrt(((z1 - z2) ** 2).sum()))


def orthogonal_triple_value(eta):
    """Anchors eta(1,1,1), eta(1,-1,-1), ... form a regular tetrahedron centred at 0."""
    return 4 * np.sqrt(3) * eta


def homogeneous_threshold(directions):
    """The minimised objective is 1-homogeneous in eta, so the flip sits at bound / value(1)."""
    a = Assemblage.from_blochs(np.asarray(directions, dtype=float))
    return (1 << (a.n - 1)) / cr.decide(a, witness=False).primal_value


def xz(eta):
    return Assemblage.from_blochs([[eta, 0, 0], [0, 0, eta]])


# --- objective ---------------------------------------------------------------------

def test_objective_examples():
    a = Assemblage.from_blochs([[1, 0, 0], [0, 0, 1]])
    assert cr.objective(a) == pytest.approx(2 * np.sqrt(2))
    assert cr.objective(Assemblage.from_blochs(np.zeros((3, 3))), {(1, 2, 3): (0, 0, 0)}) == 0
    rep = cr.decide(cr.counterexample_assemblage())
    assert cr.objective(cr.counterexample_assemblage(), rep.optimal_coefficients) == pytest.approx(7.95738, abs=1e-4)


def test_objective_rejects_bad_slots():
    with pytest.raises(ValueError):
        cr.objective(Assemblage.from_blochs(np.zeros((3, 3))), {(1, 2): (0, 0, 0)})
    with pytest.raises(ValueError):
        cr.objective(Assemblage.from_blochs(np.zeros((3, 3))), {(1, 2, 4): (0, 0, 0)})


def test_objective_matches_brute_force(rng):
    a = random_unbiased(rng, 4)
    higher = {s: rng.normal(size=3) for s in [(1, 2, 3), (1, 2, 4), (1, 3, 4), (2, 3, 4)]}
    total = 0.0
    for tail in itertools.product([1, -1], repeat=3):
        mu = (1,) + tail
        v = sum(mu[i] * a[i].bloch for i in range(4))
        for s, h in higher.items():
            v = v + np.prod([mu[i - 1] for i in s]) * h
        total += np.linalg.norm(v)
    assert cr.objective(a, higher) == pytest.approx(total, rel=1e-13)


def test_zero_higher_upper_bounds_minimum(rng):
    for n in (3, 4, 5):
        a = random_unbiased(rng, n)
        assert cr.decide(a, witness=False).primal_value <= cr.objective(a) + 1e-12


# --- closed forms -------------------------------------------------------------------

def test_busch_examples():
    e = 1 / np.sqrt(2)
    assert cr.busch_pair([e, 0, 0], [0, 0, e]) == pytest.approx(2, abs=1e-15)
    assert cr.busch_pair([0.3, 0.4, 0], [0, 0, 0]) == pytest.approx(1.0)
    assert cr.busch_pair([1, 0, 0], [1, 0, 0]) == 2


def test_n2_reduces_to_busch(rng):
    for _ in range(20):
        a = random_unbiased(rng, 2)
        rep = cr.decide(a, witness=False)
        assert rep.primal_value == pytest.approx(busch_oracle(*a.blochs), rel=1e-15)


def test_triple_orthogonal_boundary():
    eta = 1 / np.sqrt(3)
    z = np.eye(3) * eta
    assert cr.triple_criterion(*z) == pytest.approx(4.0, abs=1e-7)
    assert cr.triple_criterion(*z, method="weiszfeld") == pytest.approx(4.0, abs=1e-7)
    for eta in (0.2, 0.5, 0.9):
        assert cr.triple_criterion(*(np.eye(3) * eta)) == pytest.approx(orthogonal_triple_value(eta), abs=1e-7)


def test_triple_reduces_to_pair(rng):
    for _ in range(5):
        z1, z2 = random_unbiased(rng, 2).blochs
        assert cr.triple_criterion(z1, z2, np.zeros(3)) == pytest.approx(2 * cr.busch_pair(z1, z2), abs=1e-7)
        rep = cr.decide(Assemblage.from_blochs([z1, z2, np.zeros(3)]), witness=False)
        np.testing.assert_allclose(rep.optimal_coefficients[0b111], 0, atol=1e-6)
    assert cr.triple_criterion(*np.zeros((3, 3))) == 0
    with pytest.raises(ValueError):
        cr.triple_criterion(*np.zeros((3, 3)), method="nope")


def test_triple_points_relation(rng):
    z = random_unbiased(rng, 3).blochs
    w = rng.normal(size=3)
    pts = cr.triple_points(*z)
    direct = cr.objective(Assemblage.from_blochs(z), {(1, 2, 3): -w})
    assert np.linalg.norm(pts - w, axis=1).sum() == pytest.approx(direct, rel=1e-13)


# --- decide ---------------------------------------------------------------------------

def test_decide_pair_examples():
    assert cr.decide(xz(0.8)).verdict is Verdict.INCOMPATIBLE
    rep = cr.decide(xz(0.5))
    assert rep.verdict is Verdict.JOINTLY_MEASURABLE
    assert rep.witness.valid
    assert rep.bound == 2


def test_decide_counterexample():
    rep = cr.decide(cr.counterexample_assemblage())
    assert rep.verdict is Verdict.JOINTLY_MEASURABLE
    assert rep.objective == pytest.approx(7.95738, abs=1e-4)
    assert rep.objective < 8
    assert rep.gap <= 1e-5


def test_decide_single():
    rep = cr.decide(Assemblage.from_blochs([[0, 0, 1.0]]))
    assert rep.verdict is Verdict.JOINTLY_MEASURABLE and rep.bound == 1
    rep = cr.decide(Assemblage([BlochObservable(0.4, [0.1, 0.2, 0.3])]))
    assert rep.verdict is Verdict.JOINTLY_MEASURABLE


def test_decide_biased():
    a = Assemblage.from_blochs([[0.3, 0, 0], [0, 0.5, 0]], [0.2, -0.4])
    rep = cr.decide(a)
    assert rep.verdict is Verdict.NECESSARY_HOLDS
    # commuting observables get a product witness
    a = Assemblage.from_blochs([[0.3, 0, 0], [-0.5, 0, 0]], [0.2, -0.4])
    rep = cr.decide(a)
    assert rep.verdict is Verdict.JOINTLY_MEASURABLE and rep.witness.valid
    # strongly biased but far apart: still caught by the necessary condition
    a = Assemblage.from_blochs([[0.85, 0, 0], [0, 0, 0.85]], [0.1, -0.1])
    assert cr.decide(a).verdict is Verdict.INCOMPATIBLE


def test_decide_inconclusive_when_budget_too_small():
    rng = np.random.default_rng(7)
    d = random_directions(rng, 4)
    eta = homogeneous_threshold(d) * (1 + 1e-6)
    a = Assemblage.from_blochs(d * eta)
    assert cr.decide(a).verdict is Verdict.INCOMPATIBLE
    rep = cr.decide(a, max_iters=1)
    assert rep.verdict is Verdict.INCONCLUSIVE
    assert rep.dual_lower_bound <= 8 * (1 + 1e-7) < rep.primal_value
    assert "inside" in rep.note and "did not converge" in rep.note


def test_report_invariants(rng):
    for n in (2, 3, 4, 5):
        for _ in range(5):
            rep = cr.decide(random_unbiased(rng, n))
            assert rep.dual_lower_bound <= rep.primal_value + 1e-12 * rep.bound
            assert rep.gap >= -1e-12 * rep.bound
            if rep.verdict is Verdict.INCOMPATIBLE:
                assert rep.dual_lower_bound > rep.bound
            if rep.verdict is Verdict.JOINTLY_MEASURABLE:
                assert rep.primal_value <= rep.bound * (1 + cr.TOL_DECISION)
                assert rep.witness.valid


# --- invariances -------------------------------------------------------------------------

def test_relabel_sign_rotation_invariance(rng):
    for _ in range(5):
        a = random_unbiased(rng, 4)
        base = cr.decide(a, witness=False).primal_value
        perm = a.permuted(rng.permutation(4))
        flips = rng.choice([-1.0, 1.0], size=4)
        flipped = Assemblage.from_blochs(a.blochs * flips[:, None])
        rotated = a.transformed(random_rotation(rng))
        for b in (perm, flipped, rotated):
            assert cr.decide(b, witness=False).primal_value == pytest.approx(base, abs=1e-7)


def test_linear_scaling(rng):
    a = random_unbiased(rng, 4)
    base = cr.decide(a, witness=False).primal_value
    for eta in (0.25, 0.6):
        assert cr.decide(a.scaled(eta), witness=False).primal_value == pytest.approx(eta * base, rel=1e-8)


# --- chain ---------------------------------------------------------------------------------

def test_chain_examples():
    a = cr.counterexample_assemblage()
    assert cr.chain_value(a) == pytest.approx(2.01977, abs=1e-4)
    assert cr.coplanar_chain(a) > 0
    z = np.array([0.3, 0.4, 0.0])
    assert cr.coplanar_chain(Assemblage.from_blochs([z, z])) == pytest.approx(2 * 0.5 - 2)
    assert cr.coplanar_chain(Assemblage.from_blochs([z] * 5)) == pytest.approx(np.linalg.norm(2 * z) - 2)
    with pytest.raises(ValueError):
        cr.coplanar_chain(Assemblage.from_blochs([z]))


def test_chain_by_hand():
    z = cr.COUNTEREXAMPLE
    by_hand = (np.hypot(0.8, 0.2) + np.hypot(0.1, 0.4) + 0.5 + np.hypot(0.2, 0.2))
    assert cr.chain_value(cr.counterexample_assemblage()) == pytest.approx(by_hand, rel=1e-14)
    assert z.shape == (4, 3)


# --- sweeps ----------------------------------------------------------------------------------

def test_sweep_examples():
    res = cr.threshold_sweep([[1, 0, 0], [0, 0, 1]])
    assert res.eta_star == pytest.approx(1 / np.sqrt(2), abs=1e-6) and res.flipped
    res = cr.threshold_sweep(np.eye(3))
    assert res.eta_star == pytest.approx(1 / np.sqrt(3), abs=1e-6)
    res = cr.threshold_sweep([[1, 0, 0], [1, 0, 0]])
    assert res.eta_star == 1.0 and not res.flipped


def test_sweep_matches_homogeneity(rng):
    for n in (2, 3, 4):
        d = random_directions(rng, n)
        res = cr.threshold_sweep(d)
        ref = homogeneous_threshold(d)
        if ref < 1:
            assert res.eta_star == pytest.approx(ref, abs=1e-6)
        else:
            assert not res.flipped


def test_sweep_rejects_bad_range():
    with pytest.raises(ValueError):
        cr.threshold_sweep([[1, 0, 0]], eta_lo=0.8, eta_hi=0.5)


def test_biased_decisions_never_claim_unproven_sufficiency(rng):
    for _ in range(20):
        a = random_biased(rng, 3)
        rep = cr.decide(a)
        if rep.verdict is Verdict.JOINTLY_MEASURABLE:
            assert rep.witness is not None and rep.witness.valid
