"""Linear sensing maps for the factored solvers.

The vector/matrix ADM routines only need four things from a frame: its
shape, A @ X, A^H @ Z, and pinv(A) @ Z.  DenseMap wraps an explicit matrix;
FourierMap applies the masked, zero-padded 2-D DFT with FFTs and agrees with
the dense frame entrywise.
"""

import numpy as np

from .frames import Frame, as_matrix, gram_deviation, fourier_mask, fourier_pad_shape

__all__ = ["DenseMap", "FourierMap", "as_linear_map", "fourier_operator"]


class DenseMap:
    """Sensing map backed by an explicit N x n matrix."""

    def __init__(self, matrix, standardized=None):
        M = as_matrix(matrix)
        self.matrix = M
        self.shape = M.shape
        if standardized is None:
            standardized = gram_deviation(M) <= 1e-10
        self.standardized = bool(standardized)
        self._pinv = None

    def apply(self, X):
        return self.matrix @ X

    def apply_adjoint(self, Z):
        return self.matrix.conj().T @ Z

    def pinv_apply(self, Z):
        if self.standardized:
            return self.apply_adjoint(Z)
        if self._pinv is None:
            s = np.linalg.svd(self.matrix, compute_uv=False)
            if s[-1] <= 1e-12 * s[0]:
                raise ValueError("sensing matrix is numerically rank deficient")
            self._pinv = np.linalg.pinv(self.matrix)
        return self._pinv @ Z


class FourierMap:
    """Masked, zero-padded 2-D DFT applied with FFTs.

    ``normalized=True`` divides by sqrt(Hp*Wp); with a unit-modulus mask the
    columns are then orthonormal, so the adjoint is also the pseudo-inverse.
    """

    def __init__(self, mask, pad_shape, normalized=True):
        mask = np.asarray(mask, dtype=complex)
        if mask.ndim != 2:
            raise ValueError("mask must be a 2-d array")
        self.mask = mask
        self.image_shape = mask.shape
        self.pad_shape = (int(pad_shape[0]), int(pad_shape[1]))
        h, w = mask.shape
        Hp, Wp = self.pad_shape
        if Hp < h or Wp < w:
            raise ValueError("padded grid must contain the image grid")
        self.shape = (Hp * Wp, h * w)
        self._cells = Hp * Wp
        self.normalized = bool(normalized)
        self.scale = 1.0 / np.sqrt(self._cells) if normalized else 1.0
        unit_mask = np.max(np.abs(np.abs(mask) - 1.0)) <= 1e-12
        self.standardized = bool(normalized and unit_mask)

    def apply(self, X):
        X = np.asarray(X, dtype=complex)
        single = X.ndim == 1
        cols = X[:, None] if single else X
        h, w = self.image_shape
        Hp, Wp = self.pad_shape
        r = cols.shape[1]
        padded = np.zeros((Hp, Wp, r), dtype=complex)
        padded[:h, :w, :] = cols.reshape(h, w, r) * self.mask[:, :, None]
        out = np.fft.fft2(padded, axes=(0, 1)) * self.scale
        flat = out.reshape(Hp * Wp, r)
        return flat[:, 0] if single else flat

    def apply_adjoint(self, Z):
        Z = np.asarray(Z, dtype=complex)
        single = Z.ndim == 1
        cols = Z[:, None] if single else Z
        h, w = self.image_shape
        Hp, Wp = self.pad_shape
        r = cols.shape[1]
        grids = cols.reshape(Hp, Wp, r)
        back = np.fft.ifft2(grids, axes=(0, 1)) * (self._cells * self.scale)
        cropped = back[:h, :w, :] * np.conj(self.mask)[:, :, None]
        flat = cropped.reshape(h * w, r)
        return flat[:, 0] if single else flat

    def pinv_apply(self, Z):
        # A^H A = cells * scale^2 * diag(|mask|^2); unit-modulus masks only
        if not self.standardized:
            out = self.apply_adjoint(Z)
            m2 = (np.abs(self.mask.ravel()) ** 2 * self._cells * self.scale ** 2)
            if np.any(m2 <= 0):
                raise ValueError("mask has zero cells; map is rank deficient")
            return out / (m2[:, None] if out.ndim == 2 else m2)
        return self.apply_adjoint(Z)


def fourier_operator(height, width, oversampling=1.0, illumination="uniform", seed=None, normalized=True):
    """FourierMap matching fourier_frame(height, width, ...) up to the scale."""
    mask = fourier_mask(height, width, illumination, seed)
    return FourierMap(mask, fourier_pad_shape(height, width, oversampling), normalized=normalized)


def as_linear_map(A):
    """Wrap a Frame or matrix as a sensing map; pass maps through."""
    if hasattr(A, "apply") and hasattr(A, "apply_adjoint"):
        return A
    if isinstance(A, Frame):
        return DenseMap(A.entries, standardized=True if A.standardized else None)
    return DenseMap(A)
