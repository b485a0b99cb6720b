"""Factored-space solvers: work on x (or an n x r factor) instead of X.

The alternating direction iterations here split the magnitude constraint
|A x| = b by introducing z ~ A x and solving the z-block in closed form
row by row.  Variants: the plain vector ADM, its projected form that
eliminates x entirely, and the rank-r factor ADM whose y-block is a boosted
SVD truncation.  Spectral initialization and its diagnostics live here too.
"""

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .frames import as_matrix, gram_deviation, ORTHONORMALITY_TOL
from .operators import as_linear_map

__all__ = [
    "z_update",
    "run_rank1_adm",
    "run_projected_adm",
    "run_rankr_adm",
    "VectorADMResult",
    "RankRADMResult",
    "SpectralInitConfig",
    "SpectralPartition",
    "spectral_init",
    "sign_recovery",
    "recovery_error",
    "outer_product_error",
    "truncated_moment_stats",
    "alternating_phase_fit",
    "fixed_point_gap",
]


def _as_rng(seed):
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def _row_norms(U):
    if U.ndim == 1:
        return np.abs(U)
    return np.sqrt(np.einsum("ij,ij->i", U, U.conj()).real)


def _map_is_complex(op, n):
    return bool(np.iscomplexobj(op.apply(np.zeros(n))))


def z_update(u, b, beta, fallback=None):
    """Closed-form z-block: each row solves min |r_i|=a ( (a-b_i)^2 + beta (a-|u_i|)^2 ).

    Row i of the output points along u_i with norm (b_i + beta |u_i|)/(1+beta).
    Zero rows of u take their direction from the corresponding ``fallback``
    row when given, else from the first coordinate.
    """
    if beta <= 0:
        raise ValueError("beta must be positive")
    u = np.asarray(u)
    b = np.asarray(b, dtype=np.float64)
    if b.shape != (u.shape[0],):
        raise ValueError("b must have length %d" % u.shape[0])
    if np.any(b < 0):
        raise ValueError("b must be nonnegative")
    norms = _row_norms(u)
    alpha = (b + beta * norms) / (1.0 + beta)
    zero = norms <= 0
    if u.ndim == 1:
        direction = np.where(zero, 1.0, u / np.where(zero, 1.0, norms))
        if np.any(zero) and fallback is not None:
            fb = np.asarray(fallback)
            fn = np.abs(fb)
            ok = zero & (fn > 0)
            direction = np.where(ok, fb / np.where(fn > 0, fn, 1.0), direction)
        return direction * alpha
    direction = u / np.where(zero, 1.0, norms)[:, None]
    if np.any(zero):
        default = np.zeros_like(u[0])
        default[0] = 1.0
        for i in np.flatnonzero(zero):
            row = None
            if fallback is not None:
                fb = np.asarray(fallback)[i]
                fn = float(np.linalg.norm(fb))
                if fn > 0:
                    row = fb / fn
            direction[i] = default if row is None else row
    return direction * alpha[:, None]


@dataclass
class VectorADMResult:
    """Final iterates and residual history of a vector ADM run."""

    x: np.ndarray | None
    z: np.ndarray
    lambda_hat: np.ndarray
    residual_trace: np.ndarray
    converged: bool
    iterations: int
    history: dict | None = None


@dataclass
class RankRADMResult:
    x: np.ndarray
    y: np.ndarray
    z: np.ndarray
    lambda_hat: np.ndarray
    residual_trace: np.ndarray
    sigma1_trace: np.ndarray
    converged: bool
    iterations: int


def fixed_point_gap(b, z, lambda_hat, beta):
    """|  ||b||^2 - ||z||^2 - beta^2 ||lambda_hat||^2  |, zero at any fixed point."""
    b = np.asarray(b)
    return abs(
        float(np.linalg.norm(b) ** 2)
        - float(np.linalg.norm(z) ** 2)
        - beta ** 2 * float(np.linalg.norm(lambda_hat) ** 2)
    )


def run_rank1_adm(A, b, beta=0.01, x0_init=None, max_iter=5000, tol=1e-8, seed=None, keep_history=False):
    """Vector ADM for |A x| = b.

        z <- z_update(A x + lambda/beta)
        x <- pinv(A) (z - lambda/beta)
        lambda <- lambda + beta (A x - z)

    Stops when ||  |A x| - b || <= tol ||b||.
    """
    op = as_linear_map(A)
    N, n = op.shape
    b = np.asarray(b, dtype=np.float64)
    if b.shape != (N,):
        raise ValueError("b must have length N=%d" % N)
    complex_field = _map_is_complex(op, n)
    if x0_init is None:
        rng = _as_rng(seed)
        x = rng.standard_normal(n)
        if complex_field:
            x = x + 1j * rng.standard_normal(n)
    else:
        x = np.asarray(x0_init).copy()
        if x.shape != (n,):
            raise ValueError("x0_init must have shape (%d,)" % n)
    lam = np.zeros(N, dtype=complex if (complex_field or np.iscomplexobj(x)) else float)
    b_norm = float(np.linalg.norm(b))
    trace = []
    hist = {"z": [], "lambda_hat": [], "x": []} if keep_history else None
    z = None
    converged = False
    Ax = op.apply(x)
    for _ in range(max_iter):
        u = Ax + lam / beta
        z = z_update(u, b, beta, fallback=z)
        x = op.pinv_apply(z - lam / beta)
        Ax = op.apply(x)
        lam = lam + beta * (Ax - z)
        resid = float(np.linalg.norm(np.abs(Ax) - b))
        trace.append(resid)
        if keep_history:
            hist["z"].append(z.copy())
            hist["lambda_hat"].append(lam.copy() / beta)
            hist["x"].append(x.copy())
        if resid <= tol * b_norm:
            converged = True
            break
    return VectorADMResult(
        x=x,
        z=z,
        lambda_hat=lam / beta,
        residual_trace=np.array(trace),
        converged=converged,
        iterations=len(trace),
        history=hist,
    )


class _ProjectorMap:
    """Orthogonal projector onto range(A), applied through the sensing map."""

    def __init__(self, source):
        if isinstance(source, np.ndarray) and source.ndim == 2 and source.shape[0] == source.shape[1]:
            P = source
            scale = max(1.0, float(np.max(np.abs(P))))
            if np.max(np.abs(P - P.conj().T)) > 1e-10 * scale or np.max(np.abs(P @ P - P)) > 1e-10 * scale:
                raise ValueError("explicit projector must be Hermitian and idempotent to 1e-10")
            self._P = P
            self._op = None
            self.N = P.shape[0]
        else:
            self._P = None
            self._op = as_linear_map(source)
            self.N = self._op.shape[0]

    def apply(self, z):
        if self._P is not None:
            return self._P @ z
        return self._op.apply(self._op.pinv_apply(z))


def run_projected_adm(Q_or_P, b, beta=0.01, z0=None, max_iter=5000, tol=1e-8, seed=None, keep_history=False):
    """x-free form of the vector ADM, driven by the range projector P = A pinv(A).

        z <- z_update(P z + lhat)
        lhat <- (I - P)(lhat - z)

    with lhat = lambda/beta kept orthogonal to range(A) throughout.  Given
    z0 = A x0 this reproduces run_rank1_adm(A, ...) iterate for iterate.
    """
    proj = _ProjectorMap(Q_or_P)
    N = proj.N
    b = np.asarray(b, dtype=np.float64)
    if b.shape != (N,):
        raise ValueError("b must have length N=%d" % N)
    if z0 is None:
        rng = _as_rng(seed)
        z = proj.apply(rng.standard_normal(N))
    else:
        z = np.asarray(z0).copy()
        if z.shape != (N,):
            raise ValueError("z0 must have shape (%d,)" % N)
    lhat = np.zeros(N, dtype=z.dtype if np.iscomplexobj(z) else float)
    b_norm = float(np.linalg.norm(b))
    trace = []
    hist = {"z": [], "lambda_hat": []} if keep_history else None
    converged = False
    Pz = proj.apply(z)
    for _ in range(max_iter):
        u = Pz + lhat
        z = z_update(u, b, beta, fallback=z)
        Pz = proj.apply(z)
        lhat = (lhat - z) + Pz
        resid = float(np.linalg.norm(np.abs(Pz) - b))
        trace.append(resid)
        if keep_history:
            hist["z"].append(z.copy())
            hist["lambda_hat"].append(lhat.copy())
        if resid <= tol * b_norm:
            converged = True
            break
    return VectorADMResult(
        x=None,
        z=z,
        lambda_hat=lhat,
        residual_trace=np.array(trace),
        converged=converged,
        iterations=len(trace),
        history=hist,
    )


def _apply_factor_constraint(y, constraint, complex_field):
    if callable(constraint):
        out = np.asarray(constraint(y))
        if out.shape != y.shape:
            raise ValueError("constraint callable changed the factor shape")
    elif constraint == "real":
        out = y.real
    elif constraint == "nonneg":
        out = np.maximum(y.real, 0.0)
    else:
        raise ValueError("unknown constraint %r" % (constraint,))
    return out.astype(complex) if complex_field and not np.iscomplexobj(out) else out


def run_rankr_adm(Q, b, r, beta=0.01, gamma=0.01, y0=None, max_iter=5000, tol=1e-8, seed=None,
                  constraint=None):
    """Rank-r factor ADM on a frame with orthonormal columns.

    Cycle (z, lambda, y):
        z      <- z_update(Q y + lambda/beta)
        lambda <- lambda + beta (Q y - z)
        y      <- U (S + gamma e1 e1^T) V^H,  U S V^H = svd(Q^H (z - lambda/beta))

    ``constraint`` clamps the factor after each y-update: "nonneg" keeps
    max(Re y, 0), "real" keeps Re y, a callable receives y and returns the
    clamped factor.  Useful when the signal is known nonnegative (diffraction
    imaging); the clamp is exact for r=1 since the columns are orthonormal.

    The recovered signal is the leading left singular vector of the final
    factor, rescaled by a least-squares fit of |Q u1| against b.
    """
    op = as_linear_map(Q)
    if not getattr(op, "standardized", False):
        raise ValueError("rank-r ADM requires orthonormal columns (standardize the frame first)")
    N, n = op.shape
    if not 1 <= r <= n:
        raise ValueError("rank r must be between 1 and n=%d" % n)
    b = np.asarray(b, dtype=np.float64)
    if b.shape != (N,):
        raise ValueError("b must have length N=%d" % N)
    if max_iter < 1:
        raise ValueError("max_iter must be at least 1")
    complex_field = _map_is_complex(op, n)
    if y0 is None:
        rng = _as_rng(seed)
        y = rng.standard_normal((n, r))
        if complex_field:
            y = y + 1j * rng.standard_normal((n, r))
        scale = float(np.linalg.norm(b)) / max(float(np.linalg.norm(y)), 1e-300)
        y = y * scale
    else:
        y = np.asarray(y0).copy()
        if y.ndim == 1:
            y = y[:, None]
        if y.shape != (n, r):
            raise ValueError("y0 must have shape (%d, %d)" % (n, r))
    lam = np.zeros((N, r), dtype=complex if complex_field or np.iscomplexobj(y) else float)
    b_norm = float(np.linalg.norm(b))
    trace, sig_trace = [], []
    converged = False
    z = None
    Qy = op.apply(y)
    for _ in range(max_iter):
        u = Qy + lam / beta
        z = z_update(u, b, beta, fallback=z)
        lam = lam + beta * (Qy - z)
        T = op.apply_adjoint(z - lam / beta)
        U, s, Vh = np.linalg.svd(T, full_matrices=False)
        s_boost = s.copy()
        s_boost[0] += gamma
        y = (U * s_boost) @ Vh
        if constraint is not None:
            y = _apply_factor_constraint(y, constraint, complex_field)
        Qy = op.apply(y)
        resid = float(np.linalg.norm(_row_norms(Qy) - b))
        trace.append(resid)
        sig_trace.append(float(s_boost[0]))
        if resid <= tol * b_norm:
            converged = True
            break
    Uy, sy, _ = np.linalg.svd(y, full_matrices=False)
    if sy[0] <= 0:
        x_dir = np.zeros(n, dtype=y.dtype)
    else:
        x_dir = Uy[:, 0]
    idx = np.flatnonzero(np.abs(x_dir) > 1e-12 * max(float(np.max(np.abs(x_dir))), 1e-300))
    if idx.size:
        pivot = x_dir[idx[0]]
        x_dir = x_dir * (np.conj(pivot) / abs(pivot)) if np.iscomplexobj(x_dir) else x_dir * np.sign(pivot)
    m = np.abs(op.apply(x_dir))
    denom = float(m @ m)
    c = float(m @ b) / denom if denom > 0 else 0.0
    return RankRADMResult(
        x=c * x_dir,
        y=y,
        z=z,
        lambda_hat=lam / beta,
        residual_trace=np.array(trace),
        sigma1_trace=np.array(sig_trace),
        converged=converged,
        iterations=len(trace),
    )


@dataclass(frozen=True)
class SpectralInitConfig:
    """Fractions of sorted measurements used by spectral_init.

    frac_I selects the smallest measurements (singular-vector block);
    frac_II, if None, takes the largest max(n, ceil(N/4)) for sign recovery.
    """

    frac_I: float = 0.375
    frac_II: float | None = None


@dataclass(frozen=True)
class SpectralPartition:
    small: np.ndarray
    large: np.ndarray
    rest: np.ndarray


def spectral_init(A, b, cfg=None):
    """Initial guess from the rows with the smallest normalized measurements.

    Rows are normalized to unit length (b rescaled identically), sorted by
    magnitude; the least right singular vector of the smallest block is the
    initializer since x0 is nearly orthogonal to those rows.  Returns
    (x_min, partition).
    """
    cfg = cfg or SpectralInitConfig()
    M = as_matrix(A)
    N, n = M.shape
    b = np.asarray(b, dtype=np.float64)
    if b.shape != (N,):
        raise ValueError("b must have length N=%d" % N)
    if np.max(b) <= 0:
        raise ValueError("all measurements are zero; nothing to initialize from")
    if not 0.0 < cfg.frac_I < 1.0:
        raise ValueError("frac_I must lie in (0, 1)")
    row_norms = np.linalg.norm(M, axis=1)
    if np.any(row_norms <= 0):
        raise ValueError("frame has a zero row")
    b_hat = b / row_norms
    order = np.argsort(b_hat, kind="stable")
    N_I = max(2, int(round(cfg.frac_I * N)))
    if N_I >= N:
        raise ValueError("frac_I leaves no rows outside the small block")
    if cfg.frac_II is None:
        N_II = min(N - 1, max(n, math.ceil(0.25 * N)))
    else:
        if not 0.0 < cfg.frac_II <= 1.0:
            raise ValueError("frac_II must lie in (0, 1]")
        N_II = max(1, int(round(cfg.frac_II * N)))
    if N_I < n:
        warnings.warn("small block has fewer than n rows; the initializer is weakly determined")
    small = order[:N_I]
    large = order[N - N_II:]
    rest = order[N_I:N - N_II] if N_I <= N - N_II else np.array([], dtype=int)
    A_small = M[small] / row_norms[small][:, None]
    _, _, Vh = np.linalg.svd(A_small, full_matrices=True)
    x_min = np.conj(Vh[-1])
    idx = np.flatnonzero(np.abs(x_min) > 1e-12)
    if idx.size:
        pivot = x_min[idx[0]]
        x_min = x_min * (np.conj(pivot) / abs(pivot)) if np.iscomplexobj(x_min) else x_min * np.sign(pivot)
    return x_min, SpectralPartition(small=small, large=large, rest=rest)


def sign_recovery(A_II, b_II, x_est):
    """Least-squares refit after fixing signs: solve A x = sign(A x_est) * b.

    Zero entries of A_II x_est get sign +1 (reported via a warning).
    """
    M = as_matrix(A_II)
    b_II = np.asarray(b_II, dtype=np.float64)
    x_est = np.asarray(x_est)
    w = M @ x_est
    mags = np.abs(w)
    zero = mags <= 0
    if np.any(zero):
        warnings.warn("sign undefined on %d rows; defaulting to +1" % int(np.sum(zero)))
    phase = np.where(zero, 1.0, w / np.where(zero, 1.0, mags))
    sol, _, rank, _ = np.linalg.lstsq(M, phase * b_II, rcond=None)
    if rank < M.shape[1]:
        raise ValueError("sign-recovery system is rank deficient")
    return sol


def recovery_error(x, x0):
    """Distance up to global phase: sqrt(1 - |<x, x0>|^2) for unit-normalized inputs.

    Equals the spectral norm of the difference of the normalized outer
    products.
    """
    x = np.asarray(x)
    x0 = np.asarray(x0)
    nx, n0 = np.linalg.norm(x), np.linalg.norm(x0)
    if nx == 0 or n0 == 0:
        raise ValueError("recovery error undefined for zero vectors")
    c = abs(np.vdot(x / nx, x0 / n0))
    return math.sqrt(max(0.0, 1.0 - min(1.0, c) ** 2))


def outer_product_error(x, x0):
    """Frobenius distance of the unnormalized outer products ||x x^H - x0 x0^H||_F.

    Unlike recovery_error this is scale sensitive: an iterate pointing the
    right way but at the wrong magnitude still scores badly.  Computed as
    sqrt(||x||^4 + ||x0||^4 - 2 |<x, x0>|^2) without forming the matrices.
    """
    x = np.asarray(x)
    x0 = np.asarray(x0)
    nx2 = float(np.real(np.vdot(x, x)))
    n02 = float(np.real(np.vdot(x0, x0)))
    ip = abs(np.vdot(x, x0))
    return math.sqrt(max(nx2 * nx2 + n02 * n02 - 2.0 * ip * ip, 0.0))


def truncated_moment_stats(A, x0, frac_I):
    """Compare the small-measurement block norm with its Gaussian prediction.

    For a raw i.i.d. standard normal frame and unit x0 (normalized here), the
    statistic ||b_I|| / sqrt(N_I) over the N_I smallest magnitudes approaches
    sqrt(pi/6) (N_I / N).  Returns (statistic, prediction).
    """
    M = as_matrix(A)
    N = M.shape[0]
    if not 0.0 < frac_I <= 1.0:
        raise ValueError("frac_I must lie in (0, 1]")
    x0 = np.asarray(x0, dtype=np.float64)
    n0 = np.linalg.norm(x0)
    if n0 == 0:
        raise ValueError("x0 must be nonzero")
    b = np.abs(M @ (x0 / n0))
    N_I = max(1, int(round(frac_I * N)))
    b_small = np.sort(b)[:N_I]
    stat = float(np.linalg.norm(b_small)) / math.sqrt(N_I)
    pred = math.sqrt(math.pi / 6.0) * (N_I / N)
    return stat, pred


def alternating_phase_fit(A, b, x0_init, max_iter=500, tol=1e-10):
    """Alternate sign assignment and least squares: x <- pinv(A)(sign(A x) * b)."""
    op = as_linear_map(A)
    N, n = op.shape
    b = np.asarray(b, dtype=np.float64)
    x = np.asarray(x0_init).copy()
    if x.shape != (n,):
        raise ValueError("x0_init must have shape (%d,)" % n)
    b_norm = float(np.linalg.norm(b))
    converged = False
    resid = np.inf
    for k in range(max_iter):
        w = op.apply(x)
        mags = np.abs(w)
        phase = np.where(mags > 0, w / np.where(mags > 0, mags, 1.0), 1.0)
        x = op.pinv_apply(phase * b)
        resid = float(np.linalg.norm(np.abs(op.apply(x)) - b))
        if resid <= tol * b_norm:
            converged = True
            break
    return x, converged, resid
