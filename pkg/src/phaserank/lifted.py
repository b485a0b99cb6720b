"""Matrix-space recovery: affine feasibility and leading-eigenvalue ascent.

The lifted model replaces the signal x by X = x x^H and the magnitude
measurements by the linear constraints diag(A X A^H) = b^2.  Recovery is a
search over the intersection of that affine set with the PSD cone, either by
plain alternating projections or by an ADM that maximizes the leading
eigenvalue (which is trace-tight exactly when the frame has orthonormal
columns).
"""

import csv
import json
import warnings
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .frames import Frame, as_matrix, gram_deviation, ORTHONORMALITY_TOL

__all__ = [
    "GramCache",
    "apply_lift",
    "apply_lift_adjoint",
    "project_affine",
    "psd_clamp",
    "psd_sigma_boost",
    "matched_beta",
    "leading_eigenpair",
    "lifted_adm",
    "feasibility_pocs",
    "basin_check",
    "lifted_success",
    "LiftedReport",
]


def _hermitian_part(M):
    return 0.5 * (M + M.conj().T)


def _check_hermitian(X):
    X = np.asarray(X)
    if X.ndim != 2 or X.shape[0] != X.shape[1]:
        raise ValueError("X must be square, got shape %s" % (X.shape,))
    scale = max(1.0, float(np.max(np.abs(X))))
    skew = float(np.max(np.abs(X - X.conj().T)))
    if skew > 1e-10 * scale:
        raise ValueError("X is not Hermitian (skew %.3g)" % skew)
    return X


def apply_lift(A, X, check=True):
    """Forward lifted map: (a_i^T X conj(a_i))_i = diag(A X A^H), real output."""
    M = as_matrix(A)
    if check:
        X = _check_hermitian(X)
    if X.shape[0] != M.shape[1]:
        raise ValueError("X has side %d, frame expects %d" % (X.shape[0], M.shape[1]))
    return np.einsum("ij,jk,ik->i", M, X, M.conj()).real


def apply_lift_adjoint(A, y):
    """Adjoint of the lifted map: sum_i y_i conj(a_i) a_i^T, Hermitian."""
    M = as_matrix(A)
    y = np.asarray(y, dtype=np.float64)
    if y.shape != (M.shape[0],):
        raise ValueError("y must have length N=%d" % M.shape[0])
    W = (M.conj().T * y) @ M
    return _hermitian_part(W)


class GramCache:
    """Factorization of G = |A A^H|^2, reused across affine projections.

    method='auto' tries Cholesky, retries with a diagonal jitter of
    1e-12 tr(G)/N, and falls back to a pseudo-inverse with cutoff
    1e-10 sigma_max.  'pinv' forces the pseudo-inverse; 'cholesky' raises
    instead of falling back.
    """

    def __init__(self, A, method="auto"):
        M = as_matrix(A)
        self.N = M.shape[0]
        G = np.abs(M @ M.conj().T) ** 2
        self.G = G
        self._cho = None
        self._pinv = None
        if method not in ("auto", "cholesky", "pinv"):
            raise ValueError("unknown Gram factorization method %r" % method)
        if method == "pinv":
            self._pinv = np.linalg.pinv(G, rcond=1e-10, hermitian=True)
            return
        try:
            self._cho = scipy.linalg.cho_factor(G)
            return
        except np.linalg.LinAlgError:
            pass
        jitter = 1e-12 * np.trace(G) / self.N
        try:
            self._cho = scipy.linalg.cho_factor(G + jitter * np.eye(self.N))
            return
        except np.linalg.LinAlgError:
            if method == "cholesky":
                raise
        self._pinv = np.linalg.pinv(G, rcond=1e-10, hermitian=True)

    @property
    def used_pinv(self):
        return self._pinv is not None

    def solve(self, y):
        if self._cho is not None:
            return scipy.linalg.cho_solve(self._cho, y)
        return self._pinv @ y


def project_affine(A, Z, b_sq, gram=None, check=True):
    """Orthogonal projection of Z onto {Y Hermitian : diag(A Y A^H) = b^2}."""
    M = as_matrix(A)
    b_sq = np.asarray(b_sq, dtype=np.float64)
    if gram is None:
        gram = GramCache(M)
    if check:
        Z = _check_hermitian(Z)
    resid = b_sq - apply_lift(M, Z, check=False)
    Y = Z + apply_lift_adjoint(M, gram.solve(resid))
    return _hermitian_part(Y)


def _eigh_descending(M):
    w, V = np.linalg.eigh(M)
    order = np.argsort(-w, kind="stable")
    return w[order], V[:, order]


def psd_clamp(M):
    """Nearest PSD matrix: clamp negative eigenvalues to zero."""
    w, V = np.linalg.eigh(_hermitian_part(np.asarray(M)))
    wp = np.clip(w, 0.0, None)
    return _hermitian_part((V * wp) @ V.conj().T)


def _sign_normalize(v):
    # deterministic phase: first component of nontrivial size made real positive
    idx = np.flatnonzero(np.abs(v) > 1e-12 * np.max(np.abs(v)))
    if idx.size == 0:
        return v
    pivot = v[idx[0]]
    if np.iscomplexobj(v):
        return v * (np.conj(pivot) / abs(pivot))
    return v * np.sign(pivot)


def leading_eigenpair(X):
    """(sigma1, v1) with a deterministic sign convention on v1."""
    w, V = _eigh_descending(_hermitian_part(np.asarray(X)))
    return float(w[0]), _sign_normalize(V[:, 0])


def psd_sigma_boost(M, beta):
    """Clamp the negative eigenvalues of M and add 1/beta to the leading one.

    Minimizes -sigma1(X) + (beta/2) ||X - M||_F^2 over PSD X whenever
    sigma1(M) >= 0, which ascent iterates satisfy (the previous boost keeps
    the leading eigenvalue at 1/beta or above).  Below that the exact
    channel optimum would be sigma1(M) + 1/beta, not the clamped 1/beta.
    The output leading eigenvalue is max(sigma1(M), 0) + 1/beta.
    """
    if beta <= 0:
        raise ValueError("beta must be positive")
    M = np.asarray(M)
    if not np.all(np.isfinite(M)):
        raise ValueError("matrix has non-finite entries")
    w, V = _eigh_descending(_hermitian_part(M))
    wc = np.clip(w, 0.0, None)
    wc[0] += 1.0 / beta
    X = (V * wc) @ V.conj().T
    return _hermitian_part(X)


def matched_beta(b_sq, boost_fraction=0.5):
    """Penalty weight whose eigenvalue boost 1/beta is a fraction of sum(b^2).

    For orthonormal columns the trace over the feasible set is pinned at
    sum(b^2), so the boost should sit on that scale: far larger and the X-step
    overshoots into a stall where sigma1 hugs 1/beta, far smaller and ascent
    crawls.  Solving (c b^2, beta/c) is equivalent to (b^2, beta), so this
    choice makes runs scale free.
    """
    total = float(np.sum(np.asarray(b_sq, dtype=np.float64)))
    if total <= 0:
        raise ValueError("sum of squared measurements must be positive")
    if boost_fraction <= 0:
        raise ValueError("boost_fraction must be positive")
    return 1.0 / (boost_fraction * total)


@dataclass
class LiftedReport:
    """Final iterate plus per-iteration diagnostics of a matrix-space run."""

    X_final: np.ndarray
    sigma1: float
    v1: np.ndarray
    residual_trace: np.ndarray
    feasibility_trace: np.ndarray
    sigma1_trace: np.ndarray
    feasibility: float
    converged: bool
    iterations: int

    def to_json(self):
        X = np.asarray(self.X_final)
        doc = {
            "sigma1": self.sigma1,
            "converged": bool(self.converged),
            "iterations": int(self.iterations),
            "feasibility": float(self.feasibility),
            "v1": {"re": np.real(self.v1).tolist(), "im": np.imag(self.v1).tolist()},
            "X_final": {"re": np.real(X).tolist(), "im": np.imag(X).tolist()},
            "residual_trace": np.asarray(self.residual_trace).tolist(),
        }
        return doc

    def write_trace_csv(self, path):
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["iter", "residual", "feasibility", "sigma1"])
            for k in range(len(self.residual_trace)):
                writer.writerow(
                    [k + 1, self.residual_trace[k], self.feasibility_trace[k], self.sigma1_trace[k]]
                )

    def write_json(self, path):
        with open(path, "w") as fh:
            json.dump(self.to_json(), fh)


def _default_x0(M, b_sq, gram):
    n = M.shape[1]
    eps = float(np.sum(b_sq)) / n
    eye = np.eye(n, dtype=M.dtype)
    return project_affine(M, eps * eye, b_sq, gram=gram, check=False)


def _warn_if_not_standardized(A, M):
    std = A.standardized if isinstance(A, Frame) else False
    if not std:
        std = gram_deviation(M) <= ORTHONORMALITY_TOL
    if not std:
        warnings.warn(
            "frame columns are not orthonormal; the trace varies over the "
            "feasible set and eigenvalue ascent may pick the wrong point"
        )


def lifted_adm(A, b_sq, beta=1.0, X0=None, max_iter=1000, tol=1e-9, gram=None):
    """ADM for leading-eigenvalue ascent over the lifted feasible set.

    Splitting min -sigma1(X) s.t. X = Y, diag(A Y A^H) = b^2:
        X <- psd_sigma_boost(Y + lambda/beta, beta)
        Y <- project_affine(X - lambda/beta)
        lambda <- lambda - beta (X - Y)
    Stops when ||X - Y||_F <= tol (1 + ||Y||_F).
    """
    M = as_matrix(A)
    b_sq = np.asarray(b_sq, dtype=np.float64)
    if b_sq.shape != (M.shape[0],):
        raise ValueError("b_sq must have length N=%d" % M.shape[0])
    _warn_if_not_standardized(A, M)
    if gram is None:
        gram = GramCache(M)
    Y = _default_x0(M, b_sq, gram) if X0 is None else _check_hermitian(np.asarray(X0))
    lam = np.zeros_like(Y)
    residual_trace, feas_trace, sig_trace = [], [], []
    converged = False
    X = Y
    for k in range(max_iter):
        X = psd_sigma_boost(Y + lam / beta, beta)
        Y = project_affine(M, X - lam / beta, b_sq, gram=gram, check=False)
        lam = lam - beta * (X - Y)
        gap = float(np.linalg.norm(X - Y))
        feas = float(np.linalg.norm(apply_lift(M, X, check=False) - b_sq))
        residual_trace.append(gap)
        feas_trace.append(feas)
        sig_trace.append(float(np.max(np.linalg.eigvalsh(X))))
        if gap <= tol * (1.0 + float(np.linalg.norm(Y))):
            converged = True
            break
    sigma1, v1 = leading_eigenpair(X)
    feas_final = float(np.linalg.norm(apply_lift(M, X, check=False) - b_sq))
    return LiftedReport(
        X_final=X,
        sigma1=sigma1,
        v1=v1,
        residual_trace=np.array(residual_trace),
        feasibility_trace=np.array(feas_trace),
        sigma1_trace=np.array(sig_trace),
        feasibility=feas_final,
        converged=converged,
        iterations=len(residual_trace),
    )


def feasibility_pocs(A, b_sq, X0=None, max_iter=1000, tol=1e-9, gram=None):
    """Alternating projections between the lifted affine set and the PSD cone.

    Each sweep projects onto the affine set then clamps eigenvalues; stops on
    ||X_{k+1} - X_k||_F <= tol.
    """
    M = as_matrix(A)
    b_sq = np.asarray(b_sq, dtype=np.float64)
    if b_sq.shape != (M.shape[0],):
        raise ValueError("b_sq must have length N=%d" % M.shape[0])
    if gram is None:
        gram = GramCache(M)
    X = _default_x0(M, b_sq, gram) if X0 is None else _check_hermitian(np.asarray(X0))
    residual_trace, feas_trace, sig_trace = [], [], []
    converged = False
    for k in range(max_iter):
        Y = project_affine(M, X, b_sq, gram=gram, check=False)
        w, V = np.linalg.eigh(_hermitian_part(Y))
        Xn = _hermitian_part((V * np.clip(w, 0.0, None)) @ V.conj().T)
        step = float(np.linalg.norm(Xn - X))
        X = Xn
        residual_trace.append(step)
        feas_trace.append(float(np.linalg.norm(apply_lift(M, X, check=False) - b_sq)))
        sig_trace.append(float(np.max(w)) if w.size else 0.0)
        if step <= tol:
            converged = True
            break
    sigma1, v1 = leading_eigenpair(X)
    feas_final = float(np.linalg.norm(apply_lift(M, X, check=False) - b_sq))
    return LiftedReport(
        X_final=X,
        sigma1=sigma1,
        v1=v1,
        residual_trace=np.array(residual_trace),
        feasibility_trace=np.array(feas_trace),
        sigma1_trace=np.array(sig_trace),
        feasibility=feas_final,
        converged=converged,
        iterations=len(residual_trace),
    )


def basin_check(X, x0):
    """Sufficient condition for eigenvalue ascent from X to reach x0 x0^H.

    Returns tr(x0 x0^H v1 v1^H) >= sigma1(X) for the leading eigenvector v1.
    """
    x0 = np.asarray(x0)
    sigma1, v1 = leading_eigenpair(X)
    overlap = float(np.abs(np.vdot(x0, v1)) ** 2)
    return overlap >= sigma1


def lifted_success(X, x0, tol=1e-3):
    """Relative Frobenius test of X against the planted rank-one matrix."""
    x0 = np.asarray(x0)
    scale = float(np.linalg.norm(x0) ** 2)
    if scale == 0:
        raise ValueError("x0 must be nonzero")
    err = float(np.linalg.norm(X - np.outer(x0, x0.conj()))) / scale
    return err <= tol, err
