"""Brute-force oracles for small instances.

Everything here is exhaustive or grid-based and meant as an independent
check on the solvers: enumerate all sign patterns of |A x| = b, decide
injectivity of the magnitude map by a bipartition null-space argument,
sample the lifted feasible set through a explicit affine parametrization,
and certify local minimality on random perturbation grids.
"""

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from .frames import BudgetError, as_matrix

__all__ = [
    "SolutionSet",
    "InjectivityResult",
    "FeasibleFamily",
    "enumerate_solutions",
    "check_injectivity",
    "enumerate_feasible",
    "grid_argmin_certificate",
]


@dataclass
class SolutionSet:
    """All sign-consistent solutions of |A x| = b, deduplicated up to sign."""

    solutions: list
    exhaustive: bool

    def __len__(self):
        return len(self.solutions)

    def to_json(self):
        return {
            "exhaustive": bool(self.exhaustive),
            "solutions": [np.asarray(s).tolist() for s in self.solutions],
        }


@dataclass
class InjectivityResult:
    """Verdict plus, when non-injective, a witness pair with |A x| = |A xh|."""

    injective: bool
    witness: tuple | None = None

    def __bool__(self):
        return self.injective


def _canonical_sign(x):
    idx = np.flatnonzero(np.abs(x) > 1e-9 * max(1e-300, float(np.max(np.abs(x)))))
    if idx.size == 0:
        return x
    return x * np.sign(x[idx[0]])


def enumerate_solutions(A, b, residual_tol=1e-8, budget=22):
    """Solve the least-squares system for every sign pattern s (s_1 = +1).

    A solution is kept when || |A x| - b ||_inf <= residual_tol * ||b||_inf,
    deduplicated up to global sign, and returned in the lexicographic order
    of the accepting sign patterns.  Real frames only.
    """
    M = as_matrix(A)
    if np.iscomplexobj(M):
        raise ValueError("sign-pattern enumeration is defined for real frames only")
    N, n = M.shape
    if N > budget:
        raise BudgetError("N=%d exceeds the sign-enumeration budget %d" % (N, budget))
    b = np.asarray(b, dtype=np.float64)
    if b.shape != (N,):
        raise ValueError("b must have length N=%d" % N)
    pinv = np.linalg.pinv(M)
    b_ref = float(np.max(b)) if np.max(b) > 0 else 1.0
    tol = residual_tol * b_ref
    total = 2 ** (N - 1)
    found = []
    chunk = 1 << 15
    for start in range(0, total, chunk):
        codes = np.arange(start, min(start + chunk, total), dtype=np.int64)
        signs = np.ones((codes.size, N))
        for j in range(1, N):
            signs[:, j] = 1.0 - 2.0 * ((codes >> (j - 1)) & 1)
        rhs = signs * b
        X = rhs @ pinv.T
        resid = np.max(np.abs(np.abs(X @ M.T) - b), axis=1)
        for i in np.flatnonzero(resid <= tol):
            found.append(_canonical_sign(X[i]))
    unique = []
    for x in found:
        scale = max(1e-12, float(np.max(np.abs(x))))
        if not any(np.max(np.abs(x - u)) <= 1e-6 * scale for u in unique):
            unique.append(x)
    return SolutionSet(solutions=unique, exhaustive=True)


def check_injectivity(A, probes=8, seed=0, budget=22):
    """Decide whether |A x| determines x up to sign.

    Non-injectivity is equivalent to a row bipartition whose two blocks both
    have nontrivial null spaces: null vectors u, v give the witness pair
    x = u + v, xh = u - v with |A x| = |A xh| entrywise.  The algebraic scan
    is combined (worst-case) with ``probes`` random planted-signal
    enumeration checks.
    """
    M = as_matrix(A)
    if np.iscomplexobj(M):
        raise ValueError("injectivity scan is defined for real frames only")
    N, n = M.shape
    if N > budget or n > 6:
        raise BudgetError("bipartition scan limited to N <= %d, n <= 6" % budget)
    ref = np.linalg.norm(M, 2)
    s_all = np.linalg.svd(M, compute_uv=False)
    if s_all[-1] <= 1e-10 * ref:
        null = np.linalg.svd(M)[2][-1]
        x = np.ones(n)
        return InjectivityResult(False, (x + null, x - null))

    def null_vector(rows):
        if rows.shape[0] < n:
            if rows.shape[0] == 0:
                v = np.zeros(n)
                v[0] = 1.0
                return v
            _, _, Vh = np.linalg.svd(rows, full_matrices=True)
            return Vh[-1]
        _, s, Vh = np.linalg.svd(rows, full_matrices=True)
        if s[-1] <= 1e-10 * ref:
            return Vh[-1]
        return None

    for code in range(2 ** (N - 1)):
        plus = [0] + [j for j in range(1, N) if not (code >> (j - 1)) & 1]
        minus = [j for j in range(1, N) if (code >> (j - 1)) & 1]
        if not minus:
            continue
        u = null_vector(M[minus])
        if u is None:
            continue
        v = null_vector(M[plus])
        if v is None:
            continue
        return InjectivityResult(False, (u + v, v - u))

    if N <= budget:
        rng = np.random.default_rng(seed)
        for _ in range(probes):
            x = rng.standard_normal(n)
            sols = enumerate_solutions(M, np.abs(M @ x), budget=budget)
            if len(sols) != 1:
                return InjectivityResult(False, (sols.solutions[0], sols.solutions[1]))
    return InjectivityResult(True, None)


def _sym_basis(n):
    mats = []
    for i in range(n):
        E = np.zeros((n, n))
        E[i, i] = 1.0
        mats.append(E)
    for i in range(n):
        for j in range(i + 1, n):
            E = np.zeros((n, n))
            E[i, j] = E[j, i] = 1.0 / math.sqrt(2.0)
            mats.append(E)
    return mats


def _vec_sym(X, basis):
    return np.array([float(np.sum(B * X)) for B in basis])


@dataclass
class FeasibleFamily:
    """Affine parametrization X(theta) = X_p + sum theta_j B_j of the lifted set.

    ``samples`` holds the grid of theta points, with eigenvalues, a PSD mask,
    and the leading eigenvalue at each point; ``maximizers`` are the PSD grid
    points of maximal sigma1 (ties included).
    """

    A: np.ndarray
    b_sq: np.ndarray
    X_particular: np.ndarray
    basis: list
    dim: int
    box_radius: float
    samples: np.ndarray
    eigenvalues: np.ndarray
    psd_mask: np.ndarray
    sigma1: np.ndarray
    maximizers: list = field(default_factory=list)

    def matrix_at(self, theta):
        theta = np.atleast_1d(np.asarray(theta, dtype=np.float64))
        X = self.X_particular.copy()
        for t, B in zip(theta, self.basis):
            X = X + t * B
        return X

    def coords_of(self, X):
        D = X - self.X_particular
        return np.array([float(np.sum(B * D)) for B in self.basis])

    def contains(self, X, tol=1e-8):
        resid = np.einsum("ij,jk,ik->i", self.A, X, self.A) - self.b_sq
        scale = max(1.0, float(np.max(np.abs(self.b_sq))))
        return float(np.max(np.abs(resid))) <= tol * scale

    @staticmethod
    def is_psd(X, tol=1e-9):
        w = np.linalg.eigvalsh(0.5 * (X + X.T))
        scale = max(1.0, float(np.max(np.abs(w))))
        return bool(w[0] >= -tol * scale)


def enumerate_feasible(A, b_sq, grid=41, box_scale=1.0):
    """Grid the affine solution set of diag(A X A^T) = b^2 over symmetric X.

    Real frames with n <= 4 and solution-set dimension <= 3 only; the grid
    box is sized from the trace bound sum(b^2)/lambda_min(A^T A).
    """
    M = as_matrix(A)
    if np.iscomplexobj(M):
        raise ValueError("feasible-set enumeration is defined for real frames only")
    N, n = M.shape
    if n > 4:
        raise BudgetError("feasible-set enumeration limited to n <= 4")
    b_sq = np.asarray(b_sq, dtype=np.float64)
    if b_sq.shape != (N,):
        raise ValueError("b_sq must have length N=%d" % N)
    basis = _sym_basis(n)
    L = np.array([_vec_sym(np.outer(M[i], M[i]), basis) for i in range(N)])
    coeffs, _, _, _ = np.linalg.lstsq(L, b_sq, rcond=None)
    scale = max(1.0, float(np.max(np.abs(b_sq))))
    if np.max(np.abs(L @ coeffs - b_sq)) > 1e-8 * scale:
        raise ValueError("measurements are inconsistent; the affine set is empty")
    X_p = sum(c * B for c, B in zip(coeffs, basis))
    _, s, Vh = np.linalg.svd(L, full_matrices=True)
    rank = int(np.sum(s > 1e-10 * max(s[0], 1e-300)))
    null = Vh[rank:]
    dim = null.shape[0]
    if dim > 3:
        raise BudgetError("affine solution set has dimension %d > 3" % dim)
    dir_basis = [sum(c * B for c, B in zip(row, basis)) for row in null]

    gram_cols = M.T @ M
    lam_min = float(np.min(np.linalg.eigvalsh(gram_cols)))
    if lam_min <= 0:
        raise ValueError("frame must have full column rank")
    radius = box_scale * (float(np.sum(b_sq)) / lam_min + float(np.linalg.norm(X_p)))

    if dim == 0:
        thetas = np.zeros((1, 0))
    else:
        axis = np.linspace(-radius, radius, grid)
        thetas = np.array(list(itertools.product(*([axis] * dim))))
    eigs = np.zeros((thetas.shape[0], n))
    for i, th in enumerate(thetas):
        X = X_p.copy()
        for t, B in zip(th, dir_basis):
            X = X + t * B
        eigs[i] = np.linalg.eigvalsh(X)
    eig_scale = np.maximum(1.0, np.max(np.abs(eigs), axis=1))
    psd = eigs[:, 0] >= -1e-9 * eig_scale
    sigma1 = eigs[:, -1]

    maximizers = []
    if np.any(psd):
        best = np.max(sigma1[psd])
        tie = psd & (sigma1 >= best - 1e-9 * max(1.0, abs(best)))
        maximizers = [thetas[i] for i in np.flatnonzero(tie)]

    return FeasibleFamily(
        A=M,
        b_sq=b_sq,
        X_particular=X_p,
        basis=dir_basis,
        dim=dim,
        box_radius=radius,
        samples=thetas,
        eigenvalues=eigs,
        psd_mask=psd,
        sigma1=sigma1,
        maximizers=maximizers,
    )


def grid_argmin_certificate(objective, center, radius, samples=200, tol=1e-10, seed=0):
    """Certify center as a local minimizer against random ball perturbations.

    Samples directions uniformly on the sphere with radii spread over
    (0, radius]; returns True when objective(center) <= objective(center + d)
    + tol for every sampled d.
    """
    center = np.asarray(center, dtype=np.float64)
    rng = np.random.default_rng(seed)
    f0 = float(objective(center))
    flat = center.ravel()
    for i in range(samples):
        d = rng.standard_normal(flat.shape)
        norm = np.linalg.norm(d)
        if norm == 0:
            continue
        r = radius * (i + 1) / samples
        cand = flat + d * (r / norm)
        if f0 > float(objective(cand.reshape(center.shape))) + tol:
            return False
    return True
