"""Reduced-rank extrapolation on the truncated-TSVD sequence.

For an ill-posed ``a * x = b`` the truncated pseudoinverse solutions

    S_k = sum_{j<=k} v_j * delta_j,    delta_j = d_j^+ * u_j^T * b,

form a sequence whose early terms are regularized and whose late terms are
noise-dominated.  Applying the reduced-rank transform to that sequence has
closed-form coefficients: with Theta_j = delta_j^T * delta_j,

    beta_i = inv(Theta_{i+1}) * Theta_{k+1},

from which gamma and alpha follow by the usual normalization, and
``T_k = sum_j DS_j * alpha_j``.  The residual norm and the relative-change
ratio eta are available from Theta traces without forming the residual.

``b`` may have any second dimension s (s = n2 of ``a`` in the square
setting); deltas are 1 x s x n3 and coefficients live in s x s x n3.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from ._facemath import half_indices
from .errors import (
    DimensionMismatchError,
    InsufficientSequenceError,
    NumericalConsistencyError,
)
from .extrapolation import gamma_to_alpha
from .stack_products import star
from .tensor_core import (
    FaceDomainTensor,
    Stack4,
    Tensor3,
    frobenius_norm,
    identity_tensor,
    idft_faces,
)
from .tproduct_algebra import tinverse, tprod, ttranspose
from .tsvd import TsvdFactors, _pseudo_invert_diagonal, tsvd

__all__ = [
    "TtsvdSequenceState",
    "SolverReport",
    "DEFAULT_THETA_SHIFT",
    "build_sequence",
    "closed_form_beta",
    "trre_tsvd_step",
    "residual_norm",
    "eta_ratio",
    "solve",
]

#: absolute epsilon added to each Theta before inversion (the shift is per
#: tensor, one scaled identity, and is on by default; pass shift=None to
#: require exactly invertible Theta)
DEFAULT_THETA_SHIFT = 1e-10


@dataclass(frozen=True)
class TtsvdSequenceState:
    """TTSVD partial-sum sequence with its extrapolation intermediates.

    ``deltas[j]``, ``thetas[j]`` and ``sdeltas[j]`` belong to retained term
    j+1 (1-based); terms whose delta vanished are dropped and the sequence
    reindexed, with the surviving original indices in ``kept_indices``.
    ``partial_sums`` has one extra leading entry, S_0 = 0.
    """

    factors: TsvdFactors
    deltas: list
    thetas: list
    sdeltas: list
    partial_sums: list
    kept_indices: tuple

    @property
    def count(self) -> int:
        """Number of usable sequence terms (after the drop rule)."""
        return len(self.deltas)


def build_sequence(a: Tensor3, b: Tensor3, k_max: int | None = None) -> TtsvdSequenceState:
    """Build the TTSVD sequence state for ``a * x = b``.

    One full decomposition of ``a`` is computed up front and sliced per
    term; the partial sums telescope over a single factor set, so this is
    equivalent to truncating at every k separately.  Terms with an exactly
    zero delta (for example beyond the tubal rank, where the pseudo-inverted
    singular tube vanishes) are dropped and the sequence reindexed.
    """
    n1, n2, n3 = a.dims
    if b.n1 != n1 or b.n3 != n3:
        raise DimensionMismatchError(f"right-hand side dims {b.dims} do not match {a.dims}")
    r = min(n1, n2)
    limit = r if k_max is None else min(int(k_max), r)
    if limit < 1:
        raise DimensionMismatchError(f"k_max = {k_max} leaves no usable terms")
    s = b.n2
    factors = tsvd(a)
    inv_sv = _pseudo_invert_diagonal(factors.face_singular_values)
    deltas, thetas, sdeltas, kept = [], [], [], []
    for j in range(limit):
        dj_faces = inv_sv[:, j].astype(np.complex128).reshape(1, 1, n3)
        dj_dag = idft_faces(FaceDomainTensor(dj_faces))
        uj = factors.u.lateral_slice(j)
        delta = tprod(tprod(dj_dag, ttranspose(uj)), b)
        if delta.dims != (1, s, n3):
            raise NumericalConsistencyError(
                f"delta term has dims {delta.dims}, expected {(1, s, n3)}"
            )
        if frobenius_norm(delta) == 0.0:
            continue
        deltas.append(delta)
        thetas.append(tprod(ttranspose(delta), delta))
        sdeltas.append(tprod(factors.v.lateral_slice(j), delta))
        kept.append(j + 1)
    partial_sums = [Tensor3(np.zeros((n2, s, n3)))]
    for ds in sdeltas:
        partial_sums.append(partial_sums[-1] + ds)
    return TtsvdSequenceState(
        factors=factors,
        deltas=deltas,
        thetas=thetas,
        sdeltas=sdeltas,
        partial_sums=partial_sums,
        kept_indices=tuple(kept),
    )


def _checked_inverse(theta: Tensor3, shift: float | None) -> Tensor3:
    eye = identity_tensor(theta.n1, theta.n3)
    shifted = theta if not shift else theta + float(shift) * eye
    inv = tinverse(shifted)
    # left and right T-product inverses coincide for square tensors; assert
    # commutation as a structural sanity check (tolerance scales with the
    # conditioning proxy |theta| |inv|)
    drift = frobenius_norm(tprod(shifted, inv) - tprod(inv, shifted))
    limit = 1e-8 * (1.0 + frobenius_norm(shifted) * frobenius_norm(inv))
    if drift > limit:
        raise NumericalConsistencyError(
            f"left/right inverse mismatch {drift:.3e} exceeds {limit:.3e}"
        )
    return inv


def closed_form_beta(thetas, k: int, shift: float | None = DEFAULT_THETA_SHIFT) -> Stack4:
    """Closed-form coefficients ``beta_i = inv(Theta_{i+1}) * Theta_{k+1}``.

    ``thetas`` lists Theta_1, Theta_2, ... (0-based storage); ``k+1`` of
    them are consumed.  Each inverse is taken after adding ``shift`` times
    the identity (disable with ``shift=None`` to require exact
    invertibility, in which case singular Theta raises).
    """
    if k < 1 or len(thetas) < k + 1:
        raise InsufficientSequenceError(
            f"closed-form beta at width {k} needs {k + 1} theta terms, have {len(thetas)}"
        )
    last = thetas[k]
    return Stack4(tprod(_checked_inverse(thetas[i], shift), last) for i in range(k))


def trre_tsvd_step(
    state: TtsvdSequenceState,
    k: int,
    shift: float | None = DEFAULT_THETA_SHIFT,
) -> tuple[Tensor3, Stack4, Stack4]:
    """One reduced-rank step on the TTSVD sequence: returns (T_k, gamma, alpha).

    beta comes from the closed form; gamma normalizes by ``inv(sum beta + I)``
    with the final slice taken as ``I - sum gamma`` so the telescoped alpha
    is exactly consistent; ``T_k = sum_j DS_j * alpha_j`` (the S_0 term
    vanishes because S_0 = 0).
    """
    if state.count < k + 1:
        raise InsufficientSequenceError(
            f"step k={k} needs k+1={k + 1} sequence terms, state has {state.count}"
        )
    beta = closed_form_beta(state.thetas, k, shift)
    s = beta.dims[0]
    n3 = beta.dims[2]
    eye = identity_tensor(s, n3)
    total = eye
    for bi in beta:
        total = total + bi
    inv_total = tinverse(total)
    gammas = [tprod(bi, inv_total) for bi in beta]
    tail = eye
    for g in gammas:
        tail = tail - g
    gammas.append(tail)
    gamma = Stack4(gammas)
    alpha = gamma_to_alpha(gamma)
    t_k = star(Stack4(state.sdeltas[:k]), alpha)
    return t_k, gamma, alpha


def _first_slice_trace(t: Tensor3) -> float:
    return float(np.trace(t.data[:, :, 0]))


def residual_norm(thetas, gamma: Stack4, k: int, tol: float = 1e-10) -> float:
    """Residual norm from the trace identity ``|R|^2 = tr((Theta_k * gamma_{k-1})_1)``.

    A slightly negative trace within ``-tol`` is clamped to zero; anything
    more negative means the inputs are inconsistent and raises.
    """
    if k < 1 or len(thetas) < k:
        raise InsufficientSequenceError(f"residual norm at k={k} needs Theta_{k}")
    if gamma.count < k:
        raise DimensionMismatchError(f"gamma holds {gamma.count} slices, need >= {k}")
    tr = _first_slice_trace(tprod(thetas[k - 1], gamma[k - 1]))
    if tr < -tol:
        raise NumericalConsistencyError(
            f"residual trace {tr:.3e} is negative beyond -{tol:.1e}"
        )
    return float(np.sqrt(max(tr, 0.0)))


def eta_ratio(
    state: TtsvdSequenceState,
    t_k: Tensor3,
    t_k1: Tensor3,
    alphas_k: Stack4,
    alphas_k1: Stack4,
) -> float:
    """Relative change ``|T_{k+1} - T_k| / |T_k|`` from Theta traces.

    ``alphas_k`` and ``alphas_k1`` are the alpha stacks of the consecutive
    steps (k and k+1 slices).  Both norms are evaluated through the
    quadratic-form identities ``|T|^2 = sum_j tr((alpha_{j-1}^T * Theta_j *
    alpha_{j-1})_1)`` and its difference analogue, never by expanding the
    extrapolants.
    """
    k = alphas_k.count
    if alphas_k1.count != k + 1:
        raise DimensionMismatchError(
            f"alpha stacks must have consecutive widths, got {k} and {alphas_k1.count}"
        )
    if len(state.thetas) < k + 1:
        raise InsufficientSequenceError(f"eta at width {k} needs {k + 1} theta terms")
    if frobenius_norm(t_k) == 0.0:
        raise NumericalConsistencyError("eta undefined: previous extrapolant has zero norm")

    def quad(theta: Tensor3, left: Tensor3, right: Tensor3) -> float:
        return _first_slice_trace(tprod(tprod(ttranspose(left), theta), right))

    num_sq = quad(state.thetas[k], alphas_k1[k], alphas_k1[k])
    den_sq = 0.0
    for j in range(k):
        diff = alphas_k1[j] - alphas_k[j]
        num_sq += quad(state.thetas[j], diff, diff)
        den_sq += quad(state.thetas[j], alphas_k[j], alphas_k[j])
    guard = 1e-10 * max(1.0, frobenius_norm(t_k) ** 2, frobenius_norm(t_k1) ** 2)
    if num_sq < -guard or den_sq < -guard:
        raise NumericalConsistencyError(
            f"eta traces came out negative (num {num_sq:.3e}, den {den_sq:.3e})"
        )
    den_sq = max(den_sq, 0.0)
    if den_sq == 0.0:
        raise NumericalConsistencyError("eta undefined: trace norm of T_k is zero")
    return float(np.sqrt(max(num_sq, 0.0) / den_sq))


@dataclass
class SolverReport:
    """Per-iteration history of a reduced-rank TTSVD solve.

    All per-k lists have one entry per recorded k (the k = 1 row is the
    plain first partial sum, recorded for diagnostics with null residual
    and eta).  ``stop_reason`` is "tolerance" when ``min(residual, eta)``
    fell below the threshold, else "k_max".
    """

    tol_eps: float
    ks: list = field(default_factory=list)
    residual_norms: list = field(default_factory=list)
    eta_ratios: list = field(default_factory=list)
    t_norms: list = field(default_factory=list)
    errors: list = field(default_factory=list)
    timings: list = field(default_factory=list)
    stop_reason: str = ""
    t_k: Tensor3 | None = None

    @property
    def iterations(self) -> int:
        return len(self.ks)

    @property
    def final_k(self) -> int:
        return self.ks[-1] if self.ks else 0

    def as_dict(self) -> dict:
        out = {
            "tol_eps": self.tol_eps,
            "iterations": self.iterations,
            "final_k": self.final_k,
            "stop_reason": self.stop_reason,
            "ks": list(self.ks),
            "residual_norms": list(self.residual_norms),
            "eta_ratios": list(self.eta_ratios),
            "t_norms": list(self.t_norms),
            "timings": list(self.timings),
        }
        if any(e is not None for e in self.errors):
            out["relative_errors"] = list(self.errors)
        return out


def solve(
    a: Tensor3,
    b: Tensor3,
    tol_eps: float = 1e-8,
    k_max: int | None = None,
    shift: float | None = DEFAULT_THETA_SHIFT,
    x_true: Tensor3 | None = None,
) -> SolverReport:
    """Run the reduced-rank TTSVD solver with both stopping criteria.

    Starting from ``T_1 = S_1``, iterates k = 2, 3, ... computing the
    extrapolant, its residual norm, and the relative change from the
    previous extrapolant; continues while ``min(residual, eta) >= tol_eps``
    and terms remain, then reports the full history.  ``x_true``, when
    supplied, adds a relative-error column.
    """
    state = build_sequence(a, b, k_max)
    if state.count == 0:
        raise InsufficientSequenceError(
            "right-hand side produced no usable sequence terms (every delta vanished)"
        )
    report = SolverReport(tol_eps=float(tol_eps))

    def record(k, t, res, eta, started):
        report.ks.append(k)
        report.residual_norms.append(res)
        report.eta_ratios.append(eta)
        report.t_norms.append(frobenius_norm(t))
        if x_true is not None:
            scale = frobenius_norm(x_true)
            err = frobenius_norm(t - x_true) / scale if scale > 0 else frobenius_norm(t)
            report.errors.append(err)
        else:
            report.errors.append(None)
        report.timings.append(time.perf_counter() - started)

    started = time.perf_counter()
    t_prev = state.partial_sums[1]
    s = t_prev.n2
    alphas_prev = Stack4([identity_tensor(s, t_prev.n3)])
    record(1, t_prev, None, None, started)
    report.t_k = t_prev
    report.stop_reason = "k_max"
    for k in range(2, state.count):
        started = time.perf_counter()
        t_k, gamma, alpha = trre_tsvd_step(state, k, shift)
        res = residual_norm(state.thetas, gamma, k)
        eta = eta_ratio(state, t_prev, t_k, alphas_prev, alpha)
        record(k, t_k, res, eta, started)
        report.t_k = t_k
        t_prev, alphas_prev = t_k, alpha
        if min(res, eta) < tol_eps:
            report.stop_reason = "tolerance"
            break
    return report
