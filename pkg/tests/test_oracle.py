import numpy as np
import pytest

from phaserank.frames import BudgetError, gaussian_frame, special_frame, two_basin_frame
from phaserank.oracle import (
    check_injectivity,
    enumerate_feasible,
    enumerate_solutions,
    grid_argmin_certificate,
)


def test_enumerate_solutions_unique_at_2n_minus_1():
    rng = np.random.default_rng(0)
    A = gaussian_frame(5, 3, seed=rng)
    x0 = rng.standard_normal(3)
    sols = enumerate_solutions(A.entries, np.abs(A.entries @ x0))
    assert sols.exhaustive
    assert len(sols) == 1
    s = sols.solutions[0]
    assert min(np.max(np.abs(s - x0)), np.max(np.abs(s + x0))) < 1e-8


def test_enumerate_solutions_ambiguous_below_2n_minus_1():
    # N = n+1 < 2n-1: a random planted x0 still has a unique fiber, but
    # signals on a bipartition witness cone (u+v with u, v null vectors of
    # complementary row blocks) genuinely collide with u-v
    for seed in range(5):
        A = gaussian_frame(4, 3, seed=seed)
        x0 = np.random.default_rng(seed).standard_normal(3)
        assert len(enumerate_solutions(A.entries, np.abs(A.entries @ x0))) == 1
        res = check_injectivity(A.entries)
        assert not res.injective
        w = res.witness[0]
        sols = enumerate_solutions(A.entries, np.abs(A.entries @ w))
        assert len(sols) >= 2


def test_enumerate_solutions_residual_tol_is_monotone():
    rng = np.random.default_rng(2)
    A = gaussian_frame(6, 3, seed=rng)
    x0 = rng.standard_normal(3)
    b = np.abs(A.entries @ x0) + 1e-5  # slightly inconsistent
    strict = enumerate_solutions(A.entries, b, residual_tol=1e-9)
    loose = enumerate_solutions(A.entries, b, residual_tol=1e-2)
    assert len(strict) <= len(loose)
    assert len(loose) >= 1


def test_enumerate_solutions_guards():
    with pytest.raises(BudgetError):
        enumerate_solutions(np.ones((30, 2)), np.ones(30))
    with pytest.raises(ValueError):
        enumerate_solutions(np.eye(2).astype(complex) * 1j, np.ones(2))
    with pytest.raises(ValueError):
        enumerate_solutions(np.eye(2), np.ones(3))


def test_check_injectivity_verdicts():
    # a generic 2n-1 frame determines every x up to sign: any bipartition
    # puts at least n rows on one side, leaving no null vector
    assert bool(check_injectivity(gaussian_frame(5, 3, seed=0).entries))
    # identity rows alone cannot: flipping one coordinate is invisible
    res = check_injectivity(np.eye(3))
    assert not res.injective
    u, v = res.witness
    assert np.allclose(np.abs(np.eye(3) @ u), np.abs(np.eye(3) @ v), atol=1e-8)
    with pytest.raises(BudgetError):
        check_injectivity(np.ones((30, 2)))


def test_chain_frame_injective_only_off_the_zero_set():
    # the chain construction pins down signals with all entries nonzero,
    # but a zero coordinate decouples the chain and breaks global injectivity
    chain = special_frame("chain", 3, np.ones(3), seed=0)
    res = check_injectivity(chain.entries)
    assert not res.injective
    w0, w1 = res.witness
    assert min(np.min(np.abs(w0)), np.min(np.abs(w1))) < 1e-8
    rng = np.random.default_rng(4)
    for _ in range(5):
        x0 = rng.standard_normal(3)
        x0[np.abs(x0) < 0.1] = 0.5  # keep entries away from zero
        sols = enumerate_solutions(chain.entries, np.abs(chain.entries @ x0))
        assert len(sols) == 1


def test_enumerate_feasible_two_basin_segment():
    A = two_basin_frame()
    b_sq = (A.entries @ np.eye(3)[0]) ** 2
    fam = enumerate_feasible(A.entries, b_sq, grid=61)
    assert fam.dim >= 1
    assert np.any(fam.psd_mask)
    # the grid contains points near both documented endpoints
    def nearest(target):
        best = np.inf
        for th in fam.samples[fam.psd_mask]:
            X = fam.matrix_at(th)
            best = min(best, float(np.linalg.norm(X - target)))
        return best

    rank1 = np.diag([1.0, 0.0, 0.0])
    rank2 = np.diag([0.0, 2.0 / 3.0, 1.0 / 3.0])
    assert nearest(rank1) < 0.2
    assert nearest(rank2) < 0.2
    # every sampled psd point satisfies the constraints
    for th in fam.samples[fam.psd_mask][:10]:
        assert fam.contains(fam.matrix_at(th))


def test_enumerate_feasible_guards():
    with pytest.raises(BudgetError):
        enumerate_feasible(np.ones((4, 5)), np.ones(4))
    A = gaussian_frame(4, 2, seed=3).entries
    with pytest.raises(ValueError):
        enumerate_feasible(A, -np.ones(4) * 1e3)


def test_grid_argmin_certificate():
    assert grid_argmin_certificate(lambda x: float(x @ x), np.zeros(3), 1.0, seed=0)
    assert not grid_argmin_certificate(lambda x: -float(x @ x), np.zeros(3), 1.0, seed=0)


def test_solution_set_json():
    sols = enumerate_solutions(np.eye(2), np.array([1.0, 2.0]))
    doc = sols.to_json()
    assert doc["exhaustive"] is True
    assert len(doc["solutions"]) == len(sols)
