"""The T-product and its derived algebra.

All products are computed in the DFT face domain: transform both operands
along mode 3, multiply matching complex faces, transform back.  This is
equivalent to the block-circulant definition ``fold(bcirc(x) @ matvec(y))``
but costs ``O(n1 n2 m2 n3)`` per face set instead of materializing the
circulant.  ``bcirc`` itself stays in :mod:`textrap.tensor_core` as a capped
test oracle.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ._facemath import fill_conjugate, half_indices
from .errors import DimensionMismatchError, SingularFaceError
from .tensor_core import (
    FaceDomainTensor,
    Tensor3,
    TubalScalar,
    frobenius_norm,
    identity_tensor,
    idft_faces,
)

__all__ = [
    "TProductContext",
    "DEFAULT_CONTEXT",
    "InvertibilityReport",
    "PenroseReport",
    "tprod",
    "ttranspose",
    "tinverse",
    "is_invertible",
    "tscalar_product",
    "is_orthogonal",
    "is_positive_definite",
    "check_moore_penrose",
    "slice_product_entry",
]


@dataclass
class TProductContext:
    """Configuration shared by T-product operations.

    The forward/inverse transforms themselves are delegated to NumPy's FFT
    (correct for arbitrary ``n3``, planned and cached internally), so the
    context carries the remaining knobs: the oracle size cap and the relative
    face-condition threshold below which a tensor is treated as singular.
    ``dft_matrix`` memoizes explicit DFT matrices per ``n3`` for callers that
    want the direct ``O(n3^2)`` transform; reuse never changes results.
    """

    oracle_cap: int | None = None
    invertibility_threshold: float = 1e-12
    _dft_cache: dict = field(default_factory=dict, repr=False)

    def dft_matrix(self, n3: int) -> np.ndarray:
        """Explicit n3 x n3 DFT matrix ``w**(f*j)`` with ``w = exp(-2i pi/n3)``."""
        mat = self._dft_cache.get(n3)
        if mat is None:
            f, j = np.meshgrid(np.arange(n3), np.arange(n3), indexing="ij")
            mat = np.exp(-2j * np.pi * f * j / n3)
            mat.setflags(write=False)
            self._dft_cache[n3] = mat
        return mat


DEFAULT_CONTEXT = TProductContext()


def tprod(x: Tensor3, y: Tensor3) -> Tensor3:
    """T-product of ``x`` (n1 x n2 x n3) and ``y`` (n2 x m2 x n3).

    Parameters
    ----------
    x, y : Tensor3
        Operands with matching inner dimension and matching n3.

    Returns
    -------
    Tensor3
        The n1 x m2 x n3 product, equal to ``fold(bcirc(x) @ matvec_unfold(y))``.
    """
    if x.n2 != y.n1:
        raise DimensionMismatchError(
            f"inner dimensions disagree: {x.dims} * {y.dims}"
        )
    if x.n3 != y.n3:
        raise DimensionMismatchError(f"n3 disagrees: {x.dims} * {y.dims}")
    # real-input FFT computes only the non-redundant faces; the inverse
    # transform is then exactly real by construction
    xf = np.fft.rfft(x.data, axis=2)
    yf = np.fft.rfft(y.data, axis=2)
    zf = np.einsum("ikf,kjf->ijf", xf, yf)
    return Tensor3(np.fft.irfft(zf, n=x.n3, axis=2))


def ttranspose(x: Tensor3) -> Tensor3:
    """Tensor transpose: each frontal slice transposed, slices 2..n3 reversed."""
    d = x.data.transpose(1, 0, 2)
    out = np.empty(d.shape)
    out[:, :, 0] = d[:, :, 0]
    if x.n3 > 1:
        out[:, :, 1:] = d[:, :, :0:-1]
    return Tensor3(out)


def _face_singular_values(a: Tensor3) -> tuple[np.ndarray, np.ndarray]:
    """Per-face singular values: returns (faces, sv) with sv[f] sorted descending."""
    faces = np.fft.fft(a.data, axis=2)
    n3 = a.n3
    sv = np.empty((n3, min(a.n1, a.n2)))
    for f in half_indices(n3):
        sv[f] = np.linalg.svd(faces[:, :, f], compute_uv=False)
        if 0 < f < n3 - f:
            sv[n3 - f] = sv[f]  # conjugate face, same spectrum
    return faces, sv


@dataclass(frozen=True)
class InvertibilityReport:
    """Per-face conditioning summary behind an invertibility decision."""

    invertible: bool
    threshold: float
    face_min_sv: np.ndarray
    face_max_sv: np.ndarray

    @property
    def ratio(self) -> float:
        """Smallest singular value over largest, across all faces."""
        top = float(np.max(self.face_max_sv))
        return float(np.min(self.face_min_sv)) / top if top > 0 else 0.0

    @property
    def face_conds(self) -> np.ndarray:
        """Condition estimate per face (inf where a face is exactly singular)."""
        with np.errstate(divide="ignore"):
            return np.where(
                self.face_min_sv > 0, self.face_max_sv / self.face_min_sv, np.inf
            )

    def __bool__(self) -> bool:
        return self.invertible


def is_invertible(
    a: Tensor3,
    threshold: float | None = None,
    context: TProductContext = DEFAULT_CONTEXT,
) -> InvertibilityReport:
    """Decide invertibility from the DFT faces.

    ``a`` is invertible exactly when every DFT face is nonsingular; the
    numerical test is that the smallest singular value across all faces,
    relative to the largest, exceeds ``threshold`` (default from context,
    1e-12).  The report carries per-face extremal singular values and is
    truthy iff invertible.
    """
    if a.n1 != a.n2:
        raise DimensionMismatchError(f"invertibility needs square slices, got {a.dims}")
    if threshold is None:
        threshold = context.invertibility_threshold
    _, sv = _face_singular_values(a)
    face_min = sv[:, -1].copy()
    face_max = sv[:, 0].copy()
    top = float(np.max(face_max))
    ok = top > 0 and float(np.min(face_min)) / top > threshold
    return InvertibilityReport(bool(ok), float(threshold), face_min, face_max)


def tinverse(
    a: Tensor3,
    threshold: float | None = None,
    context: TProductContext = DEFAULT_CONTEXT,
) -> Tensor3:
    """T-product inverse via per-face matrix inversion.

    Raises
    ------
    SingularFaceError
        If some face's smallest singular value falls at or below
        ``threshold`` times the largest singular value over all faces.
        The error carries the offending face index and condition estimate.
    """
    if a.n1 != a.n2:
        raise DimensionMismatchError(f"tinverse needs square slices, got {a.dims}")
    if threshold is None:
        threshold = context.invertibility_threshold
    faces, sv = _face_singular_values(a)
    top = float(np.max(sv[:, 0]))
    worst = int(np.argmin(sv[:, -1]))
    if sv[worst, -1] <= threshold * top:
        smin = sv[worst, -1]
        cond = float(sv[worst, 0] / smin) if smin > 0 else np.inf
        raise SingularFaceError(
            f"face {worst} is singular to working precision "
            f"(min sv {smin:.3e}, global max sv {top:.3e})",
            face_index=worst,
            cond=cond,
        )
    out = np.empty_like(faces)
    for f in half_indices(a.n3):
        out[:, :, f] = np.linalg.inv(faces[:, :, f])
    fill_conjugate(out)
    return idft_faces(FaceDomainTensor(out))


def tscalar_product(x: Tensor3, y: Tensor3) -> TubalScalar:
    """T-scalar product of lateral slices: ``ttranspose(x) * y`` as a tube.

    For ``x = y`` the first frontal entry equals ``frobenius_norm(x)**2``.
    """
    if x.n2 != 1 or y.n2 != 1:
        raise DimensionMismatchError(
            f"t-scalar product needs n1 x 1 x n3 operands, got {x.dims} and {y.dims}"
        )
    if x.dims != y.dims:
        raise DimensionMismatchError(f"operands differ in dims: {x.dims} vs {y.dims}")
    return TubalScalar(tprod(ttranspose(x), y).data)


def is_orthogonal(q: Tensor3, tol: float = 1e-8) -> bool:
    """True iff ``q^T * q`` and ``q * q^T`` both equal the identity within tol."""
    if q.n1 != q.n2:
        raise DimensionMismatchError(f"orthogonality needs square slices, got {q.dims}")
    eye = identity_tensor(q.n1, q.n3)
    qt = ttranspose(q)
    return (
        frobenius_norm(tprod(qt, q) - eye) <= tol
        and frobenius_norm(tprod(q, qt) - eye) <= tol
    )


def is_positive_definite(
    a: Tensor3,
    mode: str = "face",
    *,
    semi: bool = False,
    tol: float = 1e-12,
    samples: int = 64,
    rng=None,
) -> bool:
    """Positive (semi-)definiteness of the quadratic form ``(x^T * a * x)`` first entry.

    Parameters
    ----------
    a : Tensor3
        Square-sliced tensor, not assumed symmetric.
    mode : {"face", "sample"}
        "face" is the decision procedure: the Hermitian part of every DFT
        face must be positive definite (the form equals a nonnegative mix
        ``(1/n3) * sum_f conj(xhat_f)^H H_f xhat_f`` over conjugate-symmetric
        face vectors, so the face Hermitian parts govern its sign exactly).
        "sample" is the falsifier: evaluates the form on ``samples`` random
        nonzero unit-norm tensors and reports a violation by returning False.
    semi : bool
        Test positive semi-definiteness instead of strict definiteness.
        The boundary is resolved at relative tolerance ``tol``: strict
        requires eigenvalues (or sampled form values) above ``+tol * scale``,
        semi requires them above ``-tol * scale``.
    """
    if a.n1 != a.n2:
        raise DimensionMismatchError(f"definiteness needs square slices, got {a.dims}")
    if mode == "face":
        faces = np.fft.fft(a.data, axis=2)
        eig_min = np.inf
        scale = 0.0
        for f in half_indices(a.n3):
            h = faces[:, :, f]
            w = np.linalg.eigvalsh(0.5 * (h + h.conj().T))
            eig_min = min(eig_min, float(w[0]))
            scale = max(scale, float(np.max(np.abs(w))))
        if semi:
            return eig_min >= -tol * scale
        return eig_min > tol * scale
    if mode == "sample":
        gen = rng if isinstance(rng, np.random.Generator) else np.random.default_rng(rng)
        scale = frobenius_norm(a)
        for _ in range(samples):
            vec = gen.standard_normal((a.n1, 1, a.n3))
            norm = np.linalg.norm(vec)
            if norm == 0.0:
                continue
            x = Tensor3(vec / norm)
            form = float(tprod(tprod(ttranspose(x), a), x).data[0, 0, 0])
            if semi:
                if form < -tol * scale:
                    return False
            elif form <= tol * scale:
                return False
        return True
    raise ValueError(f"mode must be 'face' or 'sample', got {mode!r}")


@dataclass(frozen=True)
class PenroseReport:
    """Residuals of the four Moore-Penrose axioms for a candidate inverse."""

    residuals: tuple[float, float, float, float]
    tol: float

    @property
    def passed(self) -> bool:
        return max(self.residuals) <= self.tol

    def __bool__(self) -> bool:
        return self.passed


def check_moore_penrose(a: Tensor3, x: Tensor3, tol: float = 1e-8) -> PenroseReport:
    """Residuals of the four axioms that define the Moore-Penrose inverse.

    Checks, in order: ``a*x*a = a``, ``x*a*x = x``, ``(a*x)^T = a*x``,
    ``(x*a)^T = x*a``.  ``x`` must have the transposed dims of ``a``.
    """
    if x.dims != (a.n2, a.n1, a.n3):
        raise DimensionMismatchError(
            f"candidate inverse must have dims {(a.n2, a.n1, a.n3)}, got {x.dims}"
        )
    ax = tprod(a, x)
    xa = tprod(x, a)
    residuals = (
        frobenius_norm(tprod(ax, a) - a),
        frobenius_norm(tprod(xa, x) - x),
        frobenius_norm(ttranspose(ax) - ax),
        frobenius_norm(ttranspose(xa) - xa),
    )
    return PenroseReport(residuals, tol)


def slice_product_entry(a: Tensor3, b: Tensor3, i: int, j: int) -> TubalScalar:
    """Tube ``(i, j)`` of ``ttranspose(a) * b`` via the lateral-slice identity.

    Equals ``tscalar_product(a[:, i, :], b[:, j, :])`` without forming the
    full product.  Indices are 0-based.
    """
    if a.dims != b.dims:
        raise DimensionMismatchError(f"operands differ in dims: {a.dims} vs {b.dims}")
    if not (0 <= i < a.n2 and 0 <= j < b.n2):
        raise IndexError(f"lateral indices ({i}, {j}) out of range for n2 = {a.n2}")
    return tscalar_product(a.lateral_slice(i), b.lateral_slice(j))
