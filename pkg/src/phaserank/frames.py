"""Measurement frames: generation, measurement, and standardization.

A frame is an N x n matrix whose rows are the sensing vectors of the
magnitude-measurement model b_i = |a_i . x|.  This module provides random
and structured frame constructors, the measurement map, QR standardization
(orthonormal columns), and the equal-row-norm standardization fixed point
that makes the diagonal of the row Gram matrix constant.
"""

import hashlib
import json
import math
import warnings
from dataclasses import dataclass
from itertools import combinations

import numpy as np
import scipy.linalg

__all__ = [
    "Frame",
    "MeasurementSet",
    "StandardizationResult",
    "ConvergenceError",
    "BudgetError",
    "as_matrix",
    "gram_deviation",
    "gaussian_frame",
    "bernoulli_frame",
    "special_frame",
    "two_basin_frame",
    "trace_varying_frame",
    "fourier_frame",
    "fourier_pad_shape",
    "fourier_mask",
    "measure",
    "qr_standardize",
    "equal_norm_standardize",
    "check_rank_star",
    "save_frame_txt",
    "load_frame_txt",
]

ORTHONORMALITY_TOL = 1e-10


class ConvergenceError(RuntimeError):
    """A fixed-point iteration failed to converge within its budget."""


class BudgetError(ValueError):
    """A combinatorial check exceeds its enumeration budget."""


def _as_rng(seed):
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def as_matrix(A):
    """Accept a Frame or array-like, return the underlying 2-d ndarray."""
    if isinstance(A, Frame):
        return A.entries
    M = np.asarray(A)
    if M.ndim != 2:
        raise ValueError("frame matrix must be 2-d, got shape %s" % (M.shape,))
    return M


def gram_deviation(A):
    """Max-norm of A^H A - I, the orthonormal-column defect."""
    M = as_matrix(A)
    G = M.conj().T @ M
    return float(np.max(np.abs(G - np.eye(M.shape[1]))))


@dataclass(frozen=True)
class Frame:
    """An N x n sensing matrix with a field tag and a standardized flag.

    ``standardized=True`` asserts orthonormal columns (checked to 1e-10 in
    the max norm on construction).  Entries are treated as immutable.
    """

    entries: np.ndarray
    field: str = "real"
    standardized: bool = False
    label: str = ""

    def __post_init__(self):
        M = np.asarray(self.entries)
        if M.ndim != 2 or M.shape[0] < 1 or M.shape[1] < 1:
            raise ValueError("frame entries must be a nonempty 2-d array")
        if not np.all(np.isfinite(M)):
            raise ValueError("frame entries must be finite")
        if self.field not in ("real", "complex"):
            raise ValueError("field must be 'real' or 'complex'")
        if self.field == "real":
            if np.iscomplexobj(M):
                if np.max(np.abs(M.imag)) > 0:
                    raise ValueError("real frame has complex entries")
                M = M.real
            M = np.ascontiguousarray(M, dtype=np.float64)
        else:
            M = np.ascontiguousarray(M, dtype=np.complex128)
        object.__setattr__(self, "entries", M)
        if self.standardized and gram_deviation(M) > ORTHONORMALITY_TOL:
            raise ValueError("standardized flag set but columns are not orthonormal")

    @property
    def N(self):
        return self.entries.shape[0]

    @property
    def n(self):
        return self.entries.shape[1]

    @property
    def shape(self):
        return self.entries.shape

    @property
    def frame_id(self):
        if self.label:
            return self.label
        h = hashlib.sha1()
        h.update(str(self.shape).encode())
        h.update(self.field.encode())
        h.update(self.entries.tobytes())
        return h.hexdigest()[:12]


@dataclass(frozen=True)
class MeasurementSet:
    """Magnitudes b, their squares, and provenance of one measurement."""

    b: np.ndarray
    b_sq: np.ndarray
    frame_id: str = ""
    ground_truth: np.ndarray | None = None
    snr_db: float | None = None

    def __post_init__(self):
        b = np.asarray(self.b, dtype=np.float64)
        if b.ndim != 1:
            raise ValueError("b must be a vector")
        if np.any(b < 0) or not np.all(np.isfinite(b)):
            raise ValueError("b must be finite and nonnegative")
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "b_sq", np.asarray(self.b_sq, dtype=np.float64))

    def to_json(self):
        doc = {"frame_id": self.frame_id, "b": self.b.tolist()}
        if self.snr_db is not None:
            doc["snr_db"] = float(self.snr_db)
        if self.ground_truth is not None:
            x = np.asarray(self.ground_truth)
            doc["ground_truth"] = {
                "re": np.real(x).tolist(),
                "im": np.imag(x).tolist(),
            }
        return doc

    @classmethod
    def from_json(cls, doc):
        b = np.asarray(doc["b"], dtype=np.float64)
        x = None
        if "ground_truth" in doc:
            gt = doc["ground_truth"]
            re = np.asarray(gt["re"], dtype=np.float64)
            im = np.asarray(gt["im"], dtype=np.float64)
            x = re + 1j * im if np.any(im != 0) else re
        return cls(
            b=b,
            b_sq=b * b,
            frame_id=doc.get("frame_id", ""),
            ground_truth=x,
            snr_db=doc.get("snr_db"),
        )


@dataclass(frozen=True)
class StandardizationResult:
    """Output of the equal-row-norm standardization fixed point.

    D is the positive row weighting with D^{-1/2} A = Q B, Q has orthonormal
    columns, and diag(Q Q^H) is constant n/N at the fixed point.
    ``trace_sequence`` is the monotone diagnostic: the trace of the un-rescaled
    iterates measured against the final weighting; it is nonincreasing.
    """

    D: np.ndarray
    Q: Frame
    B: np.ndarray
    iterations: int
    residual: float
    trace_sequence: np.ndarray
    diag_deviation: float


def gaussian_frame(N, n, field="real", seed=None):
    """I.i.d. standard normal frame (complex: independent real/imag parts)."""
    if N < n or n < 1:
        raise ValueError("need N >= n >= 1, got N=%d n=%d" % (N, n))
    rng = _as_rng(seed)
    M = rng.standard_normal((N, n))
    if field == "complex":
        M = M + 1j * rng.standard_normal((N, n))
    return Frame(M, field=field)


def bernoulli_frame(N, n, seed=None):
    """N distinct rows drawn without replacement from {+1,-1}^n."""
    if n < 1 or N < 1:
        raise ValueError("need N >= 1 and n >= 1")
    if N > 2 ** n:
        raise ValueError("cannot draw %d distinct sign rows in dimension %d" % (N, n))
    rng = _as_rng(seed)
    total = 2 ** n
    if total <= 2 ** 22:
        codes = rng.choice(total, size=N, replace=False)
    else:
        seen = []
        taken = set()
        while len(seen) < N:
            c = int(rng.integers(0, total))
            if c not in taken:
                taken.add(c)
                seen.append(c)
        codes = np.array(seen)
    rows = np.zeros((N, n))
    for j in range(n):
        rows[:, j] = ((codes >> j) & 1) * 2.0 - 1.0
    return Frame(rows, field="real")


def _validate_nonzero_entries(x0, kind):
    scale = np.max(np.abs(x0))
    if scale == 0 or np.any(np.abs(x0) <= 1e-12 * scale):
        raise ValueError("%s frame requires x0 with all entries nonzero" % kind)


def special_frame(kind, n, x0, seed=None):
    """Structured frames with known exact-recovery behavior.

    kind:
      'sign-matched'           n+1 rows: identity plus one row whose entries
                               share the signs of x0 coordinatewise.
      'orthogonal-complement'  n-1 rows orthogonal to x0, one row not
                               orthogonal, Gaussian rows appended to N = n+2.
      'chain'                  identity rows plus e_i + beta_i e_{i+1}
                               (N = 2n-1, beta_i nonzero).
      'chain-complex'          complex variant with two coupling families
                               e_i + beta_i e_{i+1}, e_i + gamma_i e_{i+1},
                               beta_i != gamma_i (N = 3n-2).
    """
    rng = _as_rng(seed)
    x0 = np.asarray(x0)
    if x0.shape != (n,):
        raise ValueError("x0 must have shape (%d,)" % n)

    if kind == "sign-matched":
        if np.iscomplexobj(x0):
            raise ValueError("sign-matched frame requires a real x0")
        _validate_nonzero_entries(x0, kind)
        mags = np.abs(rng.standard_normal(n)) + 0.1
        extra = np.sign(x0) * mags
        rows = np.vstack([np.eye(n), extra])
        return Frame(rows, field="real")

    if kind == "orthogonal-complement":
        if np.iscomplexobj(x0):
            raise ValueError("orthogonal-complement frame requires a real x0")
        nx = np.linalg.norm(x0)
        if nx == 0:
            raise ValueError("x0 must be nonzero")
        xhat = x0 / nx
        # complete x0 to an orthonormal basis; columns 1..n-1 span its complement
        basis, _ = np.linalg.qr(np.column_stack([xhat, rng.standard_normal((n, n - 1))]))
        perp_rows = basis[:, 1:].T
        while True:
            g = rng.standard_normal(n)
            if abs(g @ xhat) / np.linalg.norm(g) >= 0.2:
                break
        fillers = rng.standard_normal((2, n))
        rows = np.vstack([perp_rows, g, fillers])
        return Frame(rows, field="real")

    if kind == "chain":
        _validate_nonzero_entries(x0, kind)
        betas = np.empty(n - 1)
        for i in range(n - 1):
            b = rng.standard_normal()
            while abs(b) < 0.1:
                b = rng.standard_normal()
            betas[i] = b
        rows = np.vstack([np.eye(n)] + [np.eye(n)[i] + betas[i] * np.eye(n)[i + 1] for i in range(n - 1)])
        return Frame(rows, field="real")

    if kind == "chain-complex":
        _validate_nonzero_entries(x0, kind)

        def draw():
            return (rng.standard_normal() + 1j * rng.standard_normal()) / math.sqrt(2)

        betas, gammas = np.empty(n - 1, complex), np.empty(n - 1, complex)
        for i in range(n - 1):
            b = draw()
            while abs(b) < 0.1:
                b = draw()
            g = draw()
            while abs(g) < 0.1 or abs(g - b) < 0.1:
                g = draw()
            betas[i], gammas[i] = b, g
        eye = np.eye(n, dtype=complex)
        rows = [eye]
        rows += [eye[i] + betas[i] * eye[i + 1] for i in range(n - 1)]
        rows += [eye[i] + gammas[i] * eye[i + 1] for i in range(n - 1)]
        return Frame(np.vstack(rows), field="complex")

    raise ValueError("unknown special frame kind %r" % kind)


def two_basin_frame():
    """6 x 3 frame whose leading-eigenvalue landscape has two basins.

    For b = |A e_1| the feasible matrices form the segment
    diag(1-3u, 2u, u), 0 <= u <= 1/3.  The leading eigenvalue has its global
    maximum at the rank-one endpoint u=0 and a second local maximum at the
    rank-two endpoint u=1/3, so eigenvalue ascent from a random start can
    land in either basin.
    """
    r = math.sqrt(1.5)
    s = math.sqrt(3.0)
    rows = [
        [1.0, 1.0, 1.0],
        [1.0, -1.0, -1.0],
        [1.0, r, 0.0],
        [1.0, -r, 0.0],
        [1.0, 0.0, s],
        [1.0, 0.0, -s],
    ]
    return Frame(np.array(rows), field="real")


def trace_varying_frame():
    """4 x 3 frame whose lifted solution set has non-constant trace.

    With x0 = (1,1,1) the affine set {X symmetric : diag(A X A^T) = b^2} is
    two dimensional, the trace varies along both directions, and x0 x0^T is
    its only PSD point.  Eigenvalue ascent on the raw frame chases the trace
    upward and stalls off the feasible set; after column standardization the
    trace is pinned at sum(b^2) and the ascent recovers x0.
    """
    rows = [
        [1.0, 1.0, 0.0],
        [0.0, 1.0, 0.0],
        [0.0, 0.0, 1.0],
        [1.0, 1.0, 2.0],
    ]
    return Frame(np.array(rows), field="real")


def fourier_pad_shape(height, width, oversampling):
    """Padded grid dimensions: each side grows by sqrt(oversampling)."""
    if oversampling < 1.0:
        raise ValueError("oversampling must be >= 1")
    root = math.sqrt(oversampling)
    return math.ceil(height * root), math.ceil(width * root)


def fourier_mask(height, width, illumination="uniform", seed=None):
    """Pointwise illumination pattern: all-ones or unit-modulus random phase."""
    if illumination == "uniform":
        return np.ones((height, width), dtype=complex)
    if illumination == "random-phase":
        rng = _as_rng(seed)
        theta = rng.uniform(0.0, 2.0 * math.pi, size=(height, width))
        return np.exp(1j * theta)
    raise ValueError("unknown illumination %r" % illumination)


def fourier_frame(height, width, oversampling=1.0, illumination="uniform", seed=None, normalized=False):
    """Dense frame of the masked, zero-padded 2-D DFT.

    Row (k,l), column (p,q) holds mask[p,q] * exp(-2i pi (k p / Hp + l q / Wp))
    with the padded grid (Hp, Wp); both index pairs are flattened row-major.
    With ``normalized=True`` the matrix is divided by sqrt(Hp*Wp), which makes
    the columns exactly orthonormal (unit-modulus mask assumed).
    """
    if height < 1 or width < 1:
        raise ValueError("image dimensions must be positive")
    Hp, Wp = fourier_pad_shape(height, width, oversampling)
    mask = fourier_mask(height, width, illumination, seed)
    FH = scipy.linalg.dft(Hp)[:, :height]
    FW = scipy.linalg.dft(Wp)[:, :width]
    dense = np.kron(FH, FW) * mask.ravel()[None, :]
    if normalized:
        dense = dense / math.sqrt(Hp * Wp)
        return Frame(dense, field="complex", standardized=True)
    return Frame(dense, field="complex")


def measure(A, x):
    """Magnitude measurement b = |A x| packaged with its squares."""
    M = as_matrix(A)
    x = np.asarray(x)
    if x.shape != (M.shape[1],):
        raise ValueError("signal has shape %s, frame expects (%d,)" % (x.shape, M.shape[1]))
    b = np.abs(M @ x)
    fid = A.frame_id if isinstance(A, Frame) else ""
    return MeasurementSet(b=b, b_sq=b * b, frame_id=fid, ground_truth=x.copy())


def qr_standardize(A):
    """Economy QR with a positive-diagonal convention: A = Q B.

    Returns (Q, B) with Q a standardized Frame and B upper triangular with
    real positive diagonal.  Requires numerical rank n.
    """
    M = as_matrix(A)
    s = np.linalg.svd(M, compute_uv=False)
    if s[-1] <= 1e-12 * s[0]:
        raise ValueError("frame is numerically rank deficient")
    Q, R = scipy.linalg.qr(M, mode="economic")
    d = np.diag(R).copy()
    phase = np.where(np.abs(d) > 0, d / np.where(np.abs(d) > 0, np.abs(d), 1.0), 1.0)
    Q = Q * phase[None, :]
    R = np.conj(phase)[:, None] * R
    field = "complex" if np.iscomplexobj(M) else "real"
    if field == "real":
        Q, R = Q.real, R.real
    return Frame(Q, field=field, standardized=True), R


def check_rank_star(A, budget=10 ** 6):
    """True iff every n x n row submatrix is nonsingular (and N > n).

    Nonsingularity threshold: smallest singular value above 1e-10 times the
    spectral norm of the full frame.  Enumeration is capped at ``budget``
    submatrices.
    """
    M = as_matrix(A)
    N, n = M.shape
    if N <= n:
        return False
    count = math.comb(N, n)
    if count > budget:
        raise BudgetError("C(%d,%d)=%d exceeds the enumeration budget %d" % (N, n, count, budget))
    ref = np.linalg.norm(M, 2)
    for idx in combinations(range(N), n):
        sub = M[list(idx)]
        smin = np.linalg.svd(sub, compute_uv=False)[-1]
        if smin <= 1e-10 * ref:
            return False
    return True


def equal_norm_standardize(A, tol=1e-10, max_iter=10000, d0=None, assume_rank_star=False):
    """Find the positive diagonal D with D^{-1/2} A = Q B and diag(Q Q^H) = n/N.

    Iterates D <- (N/n) diag(A (A^H D^{-1} A)^{-1} A^H), rescaled each step so
    that sum_i D_ii^{-1} ||a_i||^2 = N, and stops when the entrywise relative
    change max_i |D_ii^{k+1}/D_ii^k - 1| falls below ``tol``.  Raises
    ConvergenceError if the budget runs out.
    """
    M = as_matrix(A)
    N, n = M.shape
    if N <= n:
        raise ValueError("need N > n for equal-row-norm standardization")
    row_sq = np.einsum("ij,ij->i", M, M.conj()).real
    if np.any(row_sq <= 0):
        raise ValueError("frame has a zero row")
    if not assume_rank_star:
        if math.comb(N, n) <= 2000:
            if not check_rank_star(M):
                raise ValueError("frame fails the row-submatrix nonsingularity condition")
        else:
            warnings.warn("row-submatrix nonsingularity assumed (too many submatrices to check)")

    if d0 is None:
        d = np.ones(N)
    else:
        d = np.asarray(d0, dtype=np.float64).copy()
        if d.shape != (N,) or np.any(d <= 0):
            raise ValueError("d0 must be a positive vector of length N")

    def renorm(vec):
        alpha = np.sum(row_sq / vec) / N
        return vec * alpha, alpha

    d, alpha = renorm(d)
    log_scale = math.log(alpha)
    # history of (normalized d, cumulative log rescale) for the monotone trace
    hist_d = [d.copy()]
    hist_ls = [log_scale]

    converged = False
    iterations = 0
    residual = np.inf
    for k in range(max_iter):
        Mg = (M.conj().T * (1.0 / d)) @ M
        try:
            W = np.linalg.solve(Mg, M.conj().T)
        except np.linalg.LinAlgError as exc:
            raise ValueError("weighted Gram matrix is singular") from exc
        diag_next = (N / n) * np.einsum("ij,ji->i", M, W).real
        if np.any(diag_next <= 0):
            raise ValueError("iteration left the positive cone; frame may be degenerate")
        d_next, alpha = renorm(diag_next)
        log_scale += math.log(alpha)
        residual = float(np.max(np.abs(d_next / d - 1.0)))
        d = d_next
        hist_d.append(d.copy())
        hist_ls.append(log_scale)
        iterations = k + 1
        if residual <= tol:
            converged = True
            break
    if not converged:
        raise ConvergenceError(
            "equal-row-norm iteration did not reach tol=%g in %d steps (last change %.3g)"
            % (tol, max_iter, residual)
        )

    Qf, B = qr_standardize(M / np.sqrt(d)[:, None])
    P_diag = np.einsum("ij,ij->i", Qf.entries, Qf.entries.conj()).real
    diag_deviation = float(np.max(np.abs(P_diag - n / N)))

    ls_final = hist_ls[-1]
    d_final = hist_d[-1]
    trace_sequence = np.array(
        [math.exp(ls_final - ls) * float(np.sum(dk / d_final)) for dk, ls in zip(hist_d, hist_ls)]
    )

    return StandardizationResult(
        D=d,
        Q=Qf,
        B=B,
        iterations=iterations,
        residual=residual,
        trace_sequence=trace_sequence,
        diag_deviation=diag_deviation,
    )


def _format_value(v, field):
    if field == "complex":
        c = complex(v)
        return "%.17g%+.17gj" % (c.real, c.imag)
    return "%.17g" % float(np.real(v))


def save_frame_txt(frame, path):
    """Write a frame as text: header 'N n field', then one row per line."""
    if not isinstance(frame, Frame):
        frame = Frame(np.asarray(frame), field="complex" if np.iscomplexobj(frame) else "real")
    lines = ["%d %d %s" % (frame.N, frame.n, frame.field)]
    for row in frame.entries:
        lines.append(" ".join(_format_value(v, frame.field) for v in row))
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def load_frame_txt(path):
    """Read a frame written by save_frame_txt."""
    with open(path) as fh:
        raw = [line.strip() for line in fh if line.strip()]
    if not raw:
        raise ValueError("empty frame file %s" % path)
    head = raw[0].split()
    if len(head) != 3:
        raise ValueError("malformed header %r; expected 'N n field'" % raw[0])
    N, n, field = int(head[0]), int(head[1]), head[2]
    if field not in ("real", "complex"):
        raise ValueError("unknown field tag %r" % field)
    if len(raw) - 1 != N:
        raise ValueError("expected %d rows, found %d" % (N, len(raw) - 1))
    parse = complex if field == "complex" else float
    rows = []
    for line in raw[1:]:
        vals = [parse(tok) for tok in line.split()]
        if len(vals) != n:
            raise ValueError("row has %d entries, expected %d" % (len(vals), n))
        rows.append(vals)
    M = np.array(rows, dtype=complex if field == "complex" else float)
    return Frame(M, field=field)


def save_measurement_json(meas, path):
    with open(path, "w") as fh:
        json.dump(meas.to_json(), fh, indent=1)


def load_measurement_json(path):
    with open(path) as fh:
        doc = json.load(fh)
    return MeasurementSet.from_json(doc)
