import numpy as np
import pytest

from phaserank.frames import gaussian_frame, qr_standardize, two_basin_frame
from phaserank.lifted import (
    GramCache,
    apply_lift,
    apply_lift_adjoint,
    basin_check,
    feasibility_pocs,
    leading_eigenpair,
    lifted_adm,
    lifted_success,
    matched_beta,
    project_affine,
    psd_clamp,
    psd_sigma_boost,
)


def _standardized(N, n, seed, field="real"):
    A = gaussian_frame(N, n, field=field, seed=seed)
    Q, R = qr_standardize(A)
    return Q, R, A


def test_apply_lift_matches_quadratic_form():
    rng = np.random.default_rng(0)
    A = rng.standard_normal((6, 3))
    X = rng.standard_normal((3, 3))
    X = X + X.T
    direct = np.array([A[i] @ X @ A[i] for i in range(6)])
    assert np.allclose(apply_lift(A, X), direct)


def test_lift_adjoint_identity():
    rng = np.random.default_rng(1)
    A = rng.standard_normal((7, 4))
    X = rng.standard_normal((4, 4))
    X = X + X.T
    y = rng.standard_normal(7)
    lhs = float(apply_lift(A, X) @ y)
    rhs = float(np.sum(apply_lift_adjoint(A, y) * X))
    assert abs(lhs - rhs) < 1e-10 * max(1.0, abs(lhs))


def test_project_affine_feasible_and_idempotent():
    rng = np.random.default_rng(2)
    A = rng.standard_normal((8, 4))
    x0 = rng.standard_normal(4)
    b_sq = (A @ x0) ** 2
    Z = rng.standard_normal((4, 4))
    Z = Z + Z.T
    Y = project_affine(A, Z, b_sq)
    assert np.allclose(apply_lift(A, Y), b_sq, atol=1e-8)
    Y2 = project_affine(A, Y, b_sq)
    assert np.allclose(Y, Y2, atol=1e-8)
    # projection moves orthogonally: Y is the closest feasible point,
    # so any other feasible point is at least as far from Z
    X_feas = np.outer(x0, x0)
    assert np.linalg.norm(Y - Z) <= np.linalg.norm(X_feas - Z) + 1e-9


def test_gram_cache_matches_direct_solve():
    rng = np.random.default_rng(3)
    A = rng.standard_normal((6, 3))
    gram = GramCache(A)
    Z = rng.standard_normal((3, 3))
    Z = Z + Z.T
    b_sq = np.abs(rng.standard_normal(6)) + 0.1
    with_cache = project_affine(A, Z, b_sq, gram=gram)
    without = project_affine(A, Z, b_sq)
    assert np.allclose(with_cache, without, atol=1e-12)


def test_psd_clamp():
    rng = np.random.default_rng(4)
    M = rng.standard_normal((5, 5))
    M = M + M.T
    X = psd_clamp(M)
    assert np.min(np.linalg.eigvalsh(X)) >= -1e-10
    assert np.allclose(psd_clamp(X), X, atol=1e-10)
    # clamp of a psd matrix is itself
    P = M @ M.T
    assert np.allclose(psd_clamp(P), P, atol=1e-8)


def test_psd_sigma_boost_lifts_leading_eigenvalue():
    rng = np.random.default_rng(5)
    M = rng.standard_normal((4, 4))
    M = M + M.T
    beta = 0.5
    X = psd_sigma_boost(M, beta)
    w_in = np.linalg.eigvalsh(M)
    w_out = np.linalg.eigvalsh(X)
    assert abs(w_out[-1] - (max(w_in[-1], 0.0) + 1.0 / beta)) < 1e-10
    assert w_out[0] >= -1e-12
    with pytest.raises(ValueError):
        psd_sigma_boost(M, 0.0)


def test_leading_eigenpair_sign_convention():
    v = np.array([0.6, -0.8])
    X = np.outer(v, v)
    sigma, u = leading_eigenpair(X)
    assert abs(sigma - 1.0) < 1e-12
    assert u[0] > 0  # deterministic sign
    assert np.allclose(np.outer(u, u), X, atol=1e-12)


def test_matched_beta_scaling():
    b_sq = np.array([1.0, 2.0, 3.0])
    beta = matched_beta(b_sq)
    assert abs(beta - 1.0 / (0.5 * 6.0)) < 1e-15
    # scaling b^2 by c scales beta by 1/c
    assert abs(matched_beta(10 * b_sq) - beta / 10) < 1e-15
    with pytest.raises(ValueError):
        matched_beta(np.zeros(3))
    with pytest.raises(ValueError):
        matched_beta(b_sq, boost_fraction=0.0)


def test_lifted_adm_recovers_standardized_instance():
    Q, R, _ = _standardized(9, 4, seed=8)
    rng = np.random.default_rng(9)
    x0 = rng.standard_normal(4)
    y0 = R @ x0
    b_sq = (Q.entries @ y0) ** 2
    rep = lifted_adm(Q, b_sq, beta=matched_beta(b_sq), max_iter=5000, tol=1e-9)
    ok, err = lifted_success(rep.X_final, y0)
    assert ok, "recovery error %.3e" % err
    assert rep.iterations <= 5000
    assert len(rep.residual_trace) == len(rep.sigma1_trace)
    # trace is pinned at sum(b^2) on every iterate of a standardized run
    assert abs(float(np.trace(rep.X_final)) - float(np.sum(b_sq))) < 1e-6 * np.sum(b_sq)


def test_lifted_adm_warns_off_standard_frames():
    A = gaussian_frame(7, 3, seed=10)
    x0 = np.random.default_rng(11).standard_normal(3)
    b_sq = (A.entries @ x0) ** 2
    with pytest.warns(UserWarning):
        lifted_adm(A.entries, b_sq, max_iter=5)


def test_feasibility_pocs_reaches_the_intersection():
    Q, R, _ = _standardized(11, 4, seed=12)
    x0 = np.random.default_rng(13).standard_normal(4)
    y0 = R @ x0
    b_sq = (Q.entries @ y0) ** 2
    rep = feasibility_pocs(Q, b_sq, max_iter=4000, tol=1e-10)
    # the final iterate is psd and nearly feasible
    assert np.min(np.linalg.eigvalsh(rep.X_final)) >= -1e-8
    assert rep.feasibility <= 1e-6 * max(1.0, float(np.max(b_sq)))


def test_basin_check_and_success():
    x0 = np.array([1.0, -1.0, 2.0])
    X = np.outer(x0, x0)
    ok, err = lifted_success(X, x0)
    assert ok and err < 1e-12
    ok, err = lifted_success(X + 0.5 * np.eye(3), x0)
    assert not ok
    # x0 x0^T itself sits exactly on the basin boundary; test strictly
    # inside (damped leading eigenvalue) and strictly outside
    assert basin_check(0.9 * X, x0)
    assert not basin_check(10.0 * np.diag([0.0, 1.0, 0.0]), x0)


def test_lifted_report_serialization(tmp_path):
    Q, R, _ = _standardized(7, 3, seed=14)
    y0 = R @ np.ones(3)
    b_sq = (Q.entries @ y0) ** 2
    rep = lifted_adm(Q, b_sq, beta=matched_beta(b_sq), max_iter=50)
    doc = rep.to_json()
    assert set(doc) >= {"sigma1", "converged", "iterations", "X_final", "residual_trace"}
    p = tmp_path / "trace.csv"
    rep.write_trace_csv(p)
    lines = p.read_text().strip().splitlines()
    assert lines[0].startswith("iter,")
    assert len(lines) == len(rep.residual_trace) + 1


def test_two_basin_frame_has_two_stable_outcomes():
    # eigenvalue ascent from different starts reaches both documented basins
    A = two_basin_frame()
    Q, R = qr_standardize(A.entries)
    x0 = np.eye(3)[0]
    y0 = R @ x0
    b_sq = (Q.entries @ y0) ** 2
    seen = set()
    rng = np.random.default_rng(15)
    for _ in range(40):
        W = rng.standard_normal((3, 3))
        X0 = project_affine(Q.entries, W @ W.T, b_sq)
        rep = lifted_adm(Q, b_sq, beta=5.0, X0=X0, max_iter=3000, tol=1e-10)
        sigma = leading_eigenpair(rep.X_final)[0]
        seen.add(round(sigma, 3))
        if len(seen) >= 2:
            break
    assert len(seen) >= 2, "only reached %s" % seen
