"""Tensor SVD, truncation, tubal rank, and minimum-norm least squares.

The decomposition works one DFT face at a time: each complex face gets an
ordinary SVD, the per-face factors are transformed back along mode 3, and
``a = u * s * v^T`` holds under the T-product.  Factors are kept in economy
form: ``u`` is n1 x r x n3, ``s`` is r x r x n3 and F-diagonal, ``v`` is
n2 x r x n3, with ``r = min(n1, n2)`` in the full case.  Column slices of
``u`` and ``v`` are orthonormal under the T-scalar product; ``u`` and ``v``
are orthogonal tensors outright whenever they are square.

Only faces ``0 .. n3 // 2`` are decomposed; the remaining faces are filled
by conjugate symmetry, which makes the inverse transform real by
construction instead of merely in expectation.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ._facemath import fill_conjugate, half_indices
from .errors import DimensionMismatchError, FaceSvdError
from .tensor_core import (
    FaceDomainTensor,
    Tensor3,
    TubalScalar,
    frobenius_norm,
    identity_tensor,
    idft_faces,
    read_tns3,
    write_tns3,
)
from .tproduct_algebra import tprod, ttranspose

__all__ = [
    "TsvdFactors",
    "tsvd",
    "ttsvd",
    "truncated_expansion",
    "tls_solve",
    "tubal_rank",
    "save_factors",
    "load_factors",
    "PINV_RCOND",
]

#: relative cutoff for pseudo-inverting singular values, per face:
#: entries at or below PINV_RCOND * (largest singular value of that face)
#: map to zero
PINV_RCOND = 1e-13


@dataclass(frozen=True)
class TsvdFactors:
    """Factors of a (possibly truncated) tensor SVD.

    Attributes
    ----------
    u, s, v : Tensor3
        ``u`` is n1 x r x n3, ``s`` is r x r x n3 F-diagonal with
        nonincreasing diagonal tubes, ``v`` is n2 x r x n3.
    r : int
        Number of retained singular triplets.
    face_singular_values : numpy.ndarray
        Shape (n3, r); row f holds the retained singular values of DFT
        face f, sorted descending.
    """

    u: Tensor3
    s: Tensor3
    v: Tensor3
    r: int
    face_singular_values: np.ndarray

    def reconstruction(self) -> Tensor3:
        """``u * s * v^T`` under the T-product."""
        return tprod(tprod(self.u, self.s), ttranspose(self.v))

    def orthogonality_residual(self) -> float:
        """Worst deviation of the factors from orthonormal columns.

        Measures ``u^T * u - I`` and ``v^T * v - I`` always, and the
        two-sided products as well when the factor is square.
        """
        residuals = []
        for q in (self.u, self.v):
            qt = ttranspose(q)
            eye = identity_tensor(q.n2, q.n3)
            residuals.append(frobenius_norm(tprod(qt, q) - eye))
            if q.n1 == q.n2:
                residuals.append(frobenius_norm(tprod(q, qt) - eye))
        return max(residuals)

    def f_diagonality_residual(self) -> float:
        """Largest off-diagonal magnitude over the frontal slices of ``s``."""
        off = self.s.data.copy()
        idx = np.arange(self.r)
        off[idx, idx, :] = 0.0
        return float(np.max(np.abs(off))) if off.size else 0.0


def _face_svd(face: np.ndarray, f: int):
    try:
        return np.linalg.svd(face, full_matrices=False)
    except np.linalg.LinAlgError as exc:
        raise FaceSvdError(f"SVD failed on face {f}: {exc}", face_index=f) from exc


def tsvd(a: Tensor3) -> TsvdFactors:
    """Full tensor SVD: ``a = u * s * v^T`` with r = min(n1, n2) triplets."""
    n1, n2, n3 = a.dims
    r = min(n1, n2)
    faces = np.fft.fft(a.data, axis=2)
    uf = np.empty((n1, r, n3), dtype=np.complex128)
    vf = np.empty((n2, r, n3), dtype=np.complex128)
    sv = np.empty((n3, r))
    for f in half_indices(n3):
        mu, sig, vh = _face_svd(faces[:, :, f], f)
        uf[:, :, f] = mu
        vf[:, :, f] = vh.conj().T
        sv[f] = sig
        if 0 < f < n3 - f:
            sv[n3 - f] = sig  # conjugate face shares the spectrum
    fill_conjugate(uf)
    fill_conjugate(vf)
    sfaces = np.zeros((r, r, n3), dtype=np.complex128)
    sfaces[np.arange(r), np.arange(r), :] = sv.T
    return TsvdFactors(
        u=idft_faces(FaceDomainTensor(uf)),
        s=idft_faces(FaceDomainTensor(sfaces)),
        v=idft_faces(FaceDomainTensor(vf)),
        r=r,
        face_singular_values=sv,
    )


def _truncate(factors: TsvdFactors, k: int) -> TsvdFactors:
    return TsvdFactors(
        u=Tensor3(factors.u.data[:, :k, :]),
        s=Tensor3(factors.s.data[:k, :k, :]),
        v=Tensor3(factors.v.data[:, :k, :]),
        r=k,
        face_singular_values=factors.face_singular_values[:, :k].copy(),
    )


def _pseudo_invert_diagonal(sv: np.ndarray) -> np.ndarray:
    """Per-face reciprocal of singular values with the relative cutoff.

    ``sv`` has shape (n3, k), row f sorted descending.  Entries at or below
    ``PINV_RCOND`` times the face maximum are mapped to zero, matching the
    pinv-over-inv choice for rank-deficient faces.
    """
    cutoff = PINV_RCOND * sv[:, :1]
    out = np.zeros_like(sv)
    keep = sv > cutoff
    out[keep] = 1.0 / sv[keep]
    return out


def ttsvd(a: Tensor3, k: int) -> tuple[TsvdFactors, Tensor3]:
    """Truncated tensor SVD plus the rank-k Moore-Penrose approximation.

    Keeps the leading ``k`` singular triplets of every face and returns
    ``(factors, mp_inverse)`` with ``mp_inverse = v_k * s_k^+ * u_k^T``,
    where the F-diagonal ``s_k^+`` pseudo-inverts each face's diagonal.
    At ``k = min(n1, n2)`` on a full-tubal-rank tensor, ``mp_inverse``
    satisfies all four Moore-Penrose axioms.
    """
    n1, n2, _ = a.dims
    if not 1 <= k <= min(n1, n2):
        raise DimensionMismatchError(
            f"truncation index k = {k} outside 1 .. {min(n1, n2)} for dims {a.dims}"
        )
    full = tsvd(a)
    factors = _truncate(full, k)
    inv_sv = _pseudo_invert_diagonal(factors.face_singular_values)
    sdag_faces = np.zeros((k, k, a.n3), dtype=np.complex128)
    sdag_faces[np.arange(k), np.arange(k), :] = inv_sv.T
    sdag = idft_faces(FaceDomainTensor(sdag_faces))
    mp_inverse = tprod(tprod(factors.v, sdag), ttranspose(factors.u))
    return factors, mp_inverse


def truncated_expansion(factors: TsvdFactors) -> list[tuple[Tensor3, TubalScalar, Tensor3]]:
    """Expansion of the factors as r triplets ``(u_j, d_j, v_j)``.

    ``u_j`` and ``v_j`` are lateral slices, ``d_j = s(j, j, :)`` the j-th
    singular tube; ``sum_j u_j * d_j * v_j^T`` reproduces the factor
    product.
    """
    return [
        (factors.u.lateral_slice(j), factors.s.tube(j, j), factors.v.lateral_slice(j))
        for j in range(factors.r)
    ]


def tls_solve(a: Tensor3, b: Tensor3) -> Tensor3:
    """Minimum-norm least-squares solution of ``a * x = b``.

    Returns ``a^+ * b`` computed facewise: every DFT face of the result is
    the matrix pseudoinverse of the corresponding face of ``a`` applied to
    the face of ``b``.  Among all ``x`` minimizing ``frobenius_norm(a*x - b)``
    this solution has the smallest Frobenius norm.
    """
    if a.n1 != b.n1 or a.n3 != b.n3:
        raise DimensionMismatchError(f"tls_solve shapes disagree: {a.dims} vs {b.dims}")
    afaces = np.fft.fft(a.data, axis=2)
    bfaces = np.fft.fft(b.data, axis=2)
    out = np.empty((a.n2, b.n2, a.n3), dtype=np.complex128)
    for f in half_indices(a.n3):
        out[:, :, f] = np.linalg.pinv(afaces[:, :, f], rcond=PINV_RCOND) @ bfaces[:, :, f]
    fill_conjugate(out)
    return idft_faces(FaceDomainTensor(out))


def tubal_rank(a: Tensor3, tol: float = 1e-10) -> int:
    """Number of singular tubes exceeding ``tol`` relative to the largest.

    Counts indices j with ``max_f sigma_j(f) > tol * max_f sigma_1(f)``.
    """
    sv = tsvd(a).face_singular_values
    top = float(np.max(sv[:, 0])) if sv.size else 0.0
    return int(np.sum(np.max(sv, axis=0) > tol * top))


def save_factors(factors: TsvdFactors, prefix, tol: float | None = None) -> dict:
    """Write factors as three TNS3 files plus a JSON sidecar.

    Files are ``{prefix}_u.tns3``, ``{prefix}_s.tns3``, ``{prefix}_v.tns3``
    and ``{prefix}_tsvd.json``; returns the mapping of part name to path.
    """
    prefix = Path(prefix)
    prefix.parent.mkdir(parents=True, exist_ok=True)
    paths = {
        "u": prefix.with_name(prefix.name + "_u.tns3"),
        "s": prefix.with_name(prefix.name + "_s.tns3"),
        "v": prefix.with_name(prefix.name + "_v.tns3"),
        "sidecar": prefix.with_name(prefix.name + "_tsvd.json"),
    }
    write_tns3(factors.u, paths["u"])
    write_tns3(factors.s, paths["s"])
    write_tns3(factors.v, paths["v"])
    sidecar = {
        "r": factors.r,
        "tol": tol,
        "face_singular_values": factors.face_singular_values.tolist(),
    }
    paths["sidecar"].write_text(json.dumps(sidecar, indent=2), encoding="utf-8")
    return {name: str(path) for name, path in paths.items()}


def load_factors(prefix) -> TsvdFactors:
    """Read factors written by :func:`save_factors`."""
    prefix = Path(prefix)
    sidecar = json.loads(
        prefix.with_name(prefix.name + "_tsvd.json").read_text(encoding="utf-8")
    )
    return TsvdFactors(
        u=read_tns3(prefix.with_name(prefix.name + "_u.tns3")),
        s=read_tns3(prefix.with_name(prefix.name + "_s.tns3")),
        v=read_tns3(prefix.with_name(prefix.name + "_v.tns3")),
        r=int(sidecar["r"]),
        face_singular_values=np.asarray(sidecar["face_singular_values"], dtype=float),
    )
