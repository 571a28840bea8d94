"""Dense complex linear algebra for small operators.

Matrices are plain ``numpy`` arrays of dtype ``complex128``. Every function
here is pure: inputs are never modified and a fresh array is returned.
"""

from __future__ import annotations

from typing import NamedTuple

import numpy as np

from .errors import NoConvergence, NotHermitian, NotPositiveDefinite, Overflow

DEFAULT_TOL = 1e-10
MAX_SWEEPS = 100
# Above this size the cyclic Jacobi sweep is too slow in pure numpy; LAPACK takes over.
JACOBI_MAX_DIM = 128
# exp(700) is still representable in double precision.
MAX_EXP_NORM = 700.0

_EPS = np.finfo(float).eps


class EigenDecomposition(NamedTuple):
    eigenvalues: np.ndarray
    basis: np.ndarray

    def reconstruct(self, fun=None) -> np.ndarray:
        """Return ``basis @ diag(fun(eigenvalues)) @ basis^dagger``."""
        w = self.eigenvalues if fun is None else fun(self.eigenvalues)
        return (self.basis * w) @ self.basis.conj().T


class PosdefResult(NamedTuple):
    is_posdef: bool
    min_eigenvalue: float


def as_matrix(m) -> np.ndarray:
    """Validate ``m`` as a finite square matrix and return a complex copy."""
    arr = np.array(m, dtype=complex)
    if arr.ndim != 2 or arr.shape[0] != arr.shape[1] or arr.shape[0] == 0:
        raise ValueError(f"expected a non-empty square matrix, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError("matrix has non-finite entries")
    return arr


def dagger(m: np.ndarray) -> np.ndarray:
    return np.conj(np.swapaxes(m, -1, -2))


def frobenius(m: np.ndarray) -> float:
    return float(np.linalg.norm(m))


def hermiticity_defect(m) -> float:
    """Frobenius norm of ``m - m^dagger``; zero iff ``m`` is Hermitian."""
    m = np.asarray(m, dtype=complex)
    return float(np.linalg.norm(m - m.conj().T))


def _jacobi(a: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Cyclic complex Jacobi on a Hermitian matrix (overwrites ``a``)."""
    n = a.shape[0]
    q = np.eye(n, dtype=complex)
    scale = np.linalg.norm(a)
    if scale == 0.0 or n == 1:
        return a.diagonal().real.copy(), q
    target = 4 * _EPS * scale
    # Entries this small cannot move the diagonal in double precision.
    negligible = _EPS * _EPS * scale
    rot = np.empty((2, 2), dtype=complex)
    for _ in range(MAX_SWEEPS):
        off = np.linalg.norm(a - np.diag(a.diagonal()))
        if off <= target:
            return a.diagonal().real.copy(), q
        for p in range(n - 1):
            for r in range(p + 1, n):
                apq = a[p, r]
                b = abs(apq)
                if b <= negligible:
                    continue
                phase = apq / b
                app = a[p, p].real
                arr = a[r, r].real
                theta = (arr - app) / (2.0 * b)
                t = 1.0 / (abs(theta) + np.sqrt(theta * theta + 1.0))
                if theta < 0.0:
                    t = -t
                c = 1.0 / np.sqrt(t * t + 1.0)
                s = t * c
                rot[0, 0] = c
                rot[0, 1] = s
                rot[1, 0] = -s * np.conj(phase)
                rot[1, 1] = c * np.conj(phase)
                idx = [p, r]
                a[:, idx] = a[:, idx] @ rot
                a[idx, :] = rot.conj().T @ a[idx, :]
                a[p, r] = a[r, p] = 0.0
                a[p, p] = app - t * b
                a[r, r] = arr + t * b
                q[:, idx] = q[:, idx] @ rot
    raise NoConvergence(f"Jacobi iteration did not converge in {MAX_SWEEPS} sweeps")


def _fix_phases(basis: np.ndarray) -> np.ndarray:
    # First non-negligible component of each eigenvector made real positive.
    out = basis.copy()
    for j in range(out.shape[1]):
        col = out[:, j]
        k = int(np.argmax(np.abs(col) > 1e-12 * np.abs(col).max()))
        out[:, j] = col * (abs(col[k]) / col[k])
    return out


def hermitian_eigen(m, tol: float = DEFAULT_TOL) -> EigenDecomposition:
    """Eigendecomposition of a Hermitian matrix.

    Eigenvalues come back ascending; each eigenvector has its first
    non-negligible component real and positive so that repeated calls on the
    same input give the same basis.

    Raises
    ------
    NotHermitian
        If ``||m - m^dagger||_F > tol``.
    NoConvergence
        If the Jacobi sweeps do not reduce the off-diagonal part to rounding
        level within ``MAX_SWEEPS``.
    """
    m = as_matrix(m)
    defect = hermiticity_defect(m)
    if defect > tol:
        raise NotHermitian(f"hermiticity defect {defect:.3e} exceeds tol {tol:.1e}")
    m = 0.5 * (m + m.conj().T)
    if m.shape[0] > JACOBI_MAX_DIM:
        w, v = np.linalg.eigh(m)
    else:
        w, v = _jacobi(m)
    order = np.argsort(w, kind="stable")
    return EigenDecomposition(w[order], _fix_phases(v[:, order]))


def posdef_check(m, tol: float = DEFAULT_TOL) -> PosdefResult:
    """Return whether the smallest eigenvalue exceeds ``tol``, and that eigenvalue."""
    w = hermitian_eigen(m, tol).eigenvalues
    return PosdefResult(bool(w[0] > tol), float(w[0]))


def sqrt_posdef(m, tol: float = DEFAULT_TOL) -> np.ndarray:
    """Principal square root of a Hermitian positive-definite matrix."""
    dec = hermitian_eigen(m, tol)
    if dec.eigenvalues[0] <= tol:
        raise NotPositiveDefinite(
            f"minimum eigenvalue {dec.eigenvalues[0]:.3e} is not above tol {tol:.1e}"
        )
    r = dec.reconstruct(np.sqrt)
    return 0.5 * (r + r.conj().T)


def inv_hermitian(m, tol: float = 1e-12) -> np.ndarray:
    """Inverse of an invertible Hermitian matrix through its eigenbasis."""
    dec = hermitian_eigen(m, max(tol, DEFAULT_TOL * max(1.0, frobenius(m))))
    smallest = np.abs(dec.eigenvalues).min()
    if smallest <= tol:
        raise np.linalg.LinAlgError(f"matrix is singular to tolerance (|eig| = {smallest:.3e})")
    return dec.reconstruct(lambda w: 1.0 / w)


def spectrum(m) -> np.ndarray:
    """Eigenvalues of a general (possibly non-normal) matrix, sorted by real part."""
    w = np.linalg.eigvals(as_matrix(m))
    return w[np.lexsort((w.imag, w.real))]


_PADE13 = (
    64764752532480000.0, 32382376266240000.0, 7771770303897600.0,
    1187353796428800.0, 129060195264000.0, 10559470521600.0,
    670442572800.0, 33522128640.0, 1323241920.0, 40840800.0,
    960960.0, 16380.0, 182.0, 1.0,
)
_THETA13 = 5.371920351148152


def _expm_pade(m: np.ndarray) -> np.ndarray:
    n = m.shape[0]
    norm1 = np.abs(m).sum(axis=0).max()
    s = max(0, int(np.ceil(np.log2(norm1 / _THETA13)))) if norm1 > 0 else 0
    a = m / 2.0**s
    b = _PADE13
    ident = np.eye(n, dtype=complex)
    a2 = a @ a
    a4 = a2 @ a2
    a6 = a4 @ a2
    u = a @ (a6 @ (b[13] * a6 + b[11] * a4 + b[9] * a2)
             + b[7] * a6 + b[5] * a4 + b[3] * a2 + b[1] * ident)
    v = (a6 @ (b[12] * a6 + b[10] * a4 + b[8] * a2)
         + b[6] * a6 + b[4] * a4 + b[2] * a2 + b[0] * ident)
    r = np.linalg.solve(v - u, v + u)
    for _ in range(s):
        r = r @ r
    return r


def expm(m) -> np.ndarray:
    """Matrix exponential.

    Hermitian and anti-Hermitian inputs go through the eigendecomposition,
    which keeps ``expm`` of an anti-Hermitian matrix unitary to rounding.
    Everything else uses scaling and squaring with the degree-13 diagonal
    Padé approximant.

    Raises ``Overflow`` when the exponent could exceed ``MAX_EXP_NORM``.
    """
    m = as_matrix(m)
    n = m.shape[0]
    if not m.any():
        return np.eye(n, dtype=complex)
    size = frobenius(m)
    structural = 64 * _EPS * size
    if hermiticity_defect(m) <= structural:
        dec = hermitian_eigen(m, tol=np.inf)
        if dec.eigenvalues[-1] > MAX_EXP_NORM:
            raise Overflow(f"largest eigenvalue {dec.eigenvalues[-1]:.3e} exceeds {MAX_EXP_NORM}")
        r = dec.reconstruct(np.exp)
        return 0.5 * (r + r.conj().T)
    if np.linalg.norm(m + m.conj().T) <= structural:
        dec = hermitian_eigen(1j * m, tol=np.inf)
        return dec.reconstruct(lambda w: np.exp(-1j * w))
    norm1 = np.abs(m).sum(axis=0).max()
    if norm1 > MAX_EXP_NORM:
        raise Overflow(f"1-norm {norm1:.3e} exceeds scaling limit {MAX_EXP_NORM}")
    return _expm_pade(m)
