"""Projection basis construction.

Three routes produce the biorthonormal pair (V, W) used by the
structure-preserving reduction:

* POD: truncated SVDs of state and gradient ("force") snapshot matrices,
  then a change of basis enforcing W^T V = I.
* H2-interpolatory ("h2eps"): tangential interpolation of the transfer
  function of the linearized model at shifts iterated to the mirrored
  reduced poles, the small-signal-optimal choice.
* Hybrid: orthonormalized concatenation of a POD pair and an h2eps pair.
"""

import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as spla

from .errors import (LinearizationError, OrientationError, RankError,
                     ShiftError, StructureError)
from .integrate import simulate
from .phcore import WeightedMetric

BIORTH_TOL = 1e-10
RANK_TOL = 1e-12
HYBRID_RANK_TOL = 1e-10
COND_LIMIT = 1e12


class SnapshotSet:
    """Snapshot matrices collected along one trajectory.

    X holds states, F the energy gradients, and G (when a quadratic split is
    configured) the nonlinear remainders grad h = grad H - Q x, all stored
    column-per-sample.  Singular values are computed lazily and cached.
    """

    def __init__(self, times, x, f, g=None):
        self.times = np.asarray(times, dtype=float)
        self.X = np.asarray(x, dtype=float)
        self.F = np.asarray(f, dtype=float)
        self.G = None if g is None else np.asarray(g, dtype=float)
        if self.X.shape != self.F.shape:
            raise StructureError("X and F snapshot shapes differ")
        if self.G is not None and self.G.shape != self.X.shape:
            raise StructureError("G snapshot shape differs from X")
        for m in (self.X, self.F) + (() if self.G is None else (self.G,)):
            if not np.isfinite(m).all():
                raise StructureError("snapshot matrix contains non-finite values")
        self._svals = {}

    @property
    def n_snapshots(self):
        return self.X.shape[1]

    def singular_values(self, which="X"):
        if which not in self._svals:
            m = getattr(self, which)
            if m is None:
                raise RankError("no G snapshots collected (no split configured)")
            self._svals[which] = np.linalg.svd(m, compute_uv=False)
        return self._svals[which]


def collect_snapshots(sys, input_fn, t_span, cfg, stride=1, split_q=None):
    """Simulate the system and subsample states and gradients every `stride`
    steps.  When the system (or the caller) provides a quadratic-split matrix
    Q, the remainder snapshots G = F - Q X are filled in as well."""
    if stride < 1:
        raise ValueError("stride must be >= 1")
    traj = simulate(sys, input_fn, t_span, cfg)
    keep = np.arange(0, traj.times.size, stride)
    x = traj.states[keep].T.copy()
    f = np.column_stack([sys.grad_h(traj.states[k]) for k in keep])
    q = split_q if split_q is not None else sys.split_q
    g = None
    if q is not None:
        g = f - WeightedMetric(q).apply(x)
    return SnapshotSet(traj.times[keep], x, f, g)


def pod_basis(s, r):
    """Leading r left singular vectors of a snapshot matrix.

    Returns (U_r, sigma) with all singular values.  Raises RankError when r
    exceeds the numerical rank (sigma_r / sigma_1 < 1e-12).
    """
    s = np.asarray(s, dtype=float)
    if r < 1 or r > min(s.shape):
        raise RankError(f"r={r} outside 1..min{s.shape}")
    u, sig, _ = np.linalg.svd(s, full_matrices=False)
    if sig[0] == 0.0 or sig[r - 1] / sig[0] < RANK_TOL:
        raise RankError(
            f"r={r} exceeds the numerical rank of the snapshot matrix "
            f"(sigma_r/sigma_1 = {0.0 if sig[0] == 0.0 else sig[r-1]/sig[0]:.2e}); "
            "choose a smaller r")
    return u[:, :r].copy(), sig


@dataclass(frozen=True)
class ReductionBasis:
    """Biorthonormal pair (V, W) with W^T V = I and provenance metadata."""

    V: np.ndarray
    W: np.ndarray
    provenance: str
    sigma_min: float = np.nan  # smallest singular value of W0^T V0 before correction

    def __post_init__(self):
        v = np.asarray(self.V, dtype=float)
        w = np.asarray(self.W, dtype=float)
        if v.shape != w.shape or v.ndim != 2:
            raise StructureError("V and W must share an (n, r) shape")
        defect = np.linalg.norm(w.T @ v - np.eye(v.shape[1]))
        if defect > BIORTH_TOL:
            raise OrientationError(
                f"biorthonormality defect {defect:.2e} exceeds {BIORTH_TOL:g}")
        for name, a in (("V", v), ("W", w)):
            a = a.copy()
            a.setflags(write=False)
            object.__setattr__(self, name, a)

    @property
    def r(self):
        return self.V.shape[1]

    @property
    def n(self):
        return self.V.shape[0]


def _refine_biorth(v, w):
    """Multiply W by (W^T V)^{-T} until W^T V = I to roundoff (at most a few
    passes; each reduces the defect by ~ eps * cond)."""
    for _ in range(4):
        m = w.T @ v
        if np.linalg.norm(m - np.eye(m.shape[0])) <= 0.5 * BIORTH_TOL:
            break
        # W <- W M^{-T}:  X M^T = W  <=>  M X^T = W^T
        w = np.linalg.solve(m, w.T).T
    return w


def biorthonormalize(v0, w0, provenance="custom"):
    """Change basis W0 -> W = W0 (W0^T V0)^{-T} so that W^T V0 = I.

    Fails with OrientationError when the subspaces are nearly orthogonal
    (condition of W0^T V0 above 1e12), which violates the generic-orientation
    assumption behind the oblique projector.
    """
    v0 = np.asarray(v0, dtype=float)
    w0 = np.asarray(w0, dtype=float)
    m = w0.T @ v0
    sig = np.linalg.svd(m, compute_uv=False)
    if sig[-1] == 0.0 or sig[0] / sig[-1] > COND_LIMIT:
        raise OrientationError(
            "trial and test subspaces are numerically orthogonal "
            f"(cond(W^T V) = {np.inf if sig[-1] == 0 else sig[0]/sig[-1]:.2e})")
    w = np.linalg.solve(m, w0.T).T  # W0 M^{-T}
    w = _refine_biorth(v0, w)
    return ReductionBasis(V=v0, W=w, provenance=provenance,
                          sigma_min=float(sig[-1]))


def q_orthonormalize(v0, metric):
    """Return V = V0 R^{-1} with V0^T Q V0 = R^T R, so V^T Q V = I.

    A second Cholesky pass removes the roundoff left by ill-conditioned V0.
    """
    v = np.asarray(v0, dtype=float)
    for _ in range(2):
        gram = v.T @ metric.apply(v)
        gram = 0.5 * (gram + gram.T)
        try:
            l = np.linalg.cholesky(gram)
        except np.linalg.LinAlgError as exc:
            raise RankError("columns are Q-rank deficient; cannot "
                            "Q-orthonormalize") from exc
        v = spla.solve_triangular(l, v.T, lower=True).T
    return v


def pod_ph_bases(snapshots, r):
    """POD bases: V from state snapshots, W from gradient snapshots, then the
    biorthonormal change of basis."""
    v, _ = pod_basis(snapshots.X, r)
    w, _ = pod_basis(snapshots.F, r)
    basis = biorthonormalize(v, w, provenance="pod")
    return basis


@dataclass(frozen=True)
class LinearPhModel:
    """Linear port-Hamiltonian model xdot = (J - R) Q x + B u, y = B^T Q x,
    with Q the (SPD) energy Hessian wrapped in a WeightedMetric."""

    J: np.ndarray
    R: np.ndarray
    B: np.ndarray
    metric: WeightedMetric

    @property
    def n(self):
        return self.J.shape[0]

    @property
    def m_in(self):
        return self.B.shape[1]

    @property
    def drift(self):
        return self.J - self.R


def linearize(sys, fd_step=1e-6):
    """Small-signal model at the origin: Q = Hessian of H at 0, symmetrized
    and verified SPD.  Falls back to central differences of grad_h when no
    Hessian callback is available."""
    x0 = np.zeros(sys.n)
    if sys.hess_h is not None:
        q = np.asarray(sys.hess_h(x0), dtype=float)
    else:
        q = np.empty((sys.n, sys.n))
        for k in range(sys.n):
            e = np.zeros(sys.n)
            e[k] = fd_step
            q[:, k] = (sys.grad_h(x0 + e) - sys.grad_h(x0 - e)) / (2.0 * fd_step)
    q = 0.5 * (q + q.T)
    try:
        metric = WeightedMetric(q)
    except StructureError as exc:
        raise LinearizationError(
            "Hessian at the origin is not positive definite; the equilibrium "
            "is not a strict energy minimum") from exc
    return LinearPhModel(J=sys.J, R=sys.R, B=sys.B, metric=metric)


def transfer_eval(lin, s):
    """Transfer function G(s) = B^T (s Q^{-1} - (J - R))^{-1} B, evaluated in
    the push-through form B^T Q (s I - (J - R) Q)^{-1} B to avoid Q^{-1}."""
    n = lin.n
    m = lin.drift @ lin.metric.mat
    try:
        sol = np.linalg.solve(s * np.eye(n) - m, lin.B)
    except np.linalg.LinAlgError as exc:
        raise ShiftError(f"shift s={s} is a pole of the transfer function") from exc
    return lin.B.T @ lin.metric.apply(sol)


def _solve_shifted(m, b_rhs, s):
    n = m.shape[0]
    try:
        return np.linalg.solve(s * np.eye(n, dtype=complex) - m, b_rhs)
    except np.linalg.LinAlgError as exc:
        raise ShiftError(f"shifted system singular at sigma={s}") from exc


def interpolatory_basis(lin, shifts, directions):
    """Tangential interpolation basis: columns spanning
    (sigma_i I - (J - R) Q)^{-1} B b_i, realified pairwise.

    Shifts must be closed under conjugation with conjugate directions;
    a conjugate pair (v, conj(v)) is replaced by (Re v, Im v) so all
    downstream algebra stays real.
    """
    shifts = np.asarray(shifts, dtype=complex)
    directions = np.asarray(directions, dtype=complex)
    if directions.ndim == 1:
        directions = directions[:, None]
    r = shifts.size
    if directions.shape != (r, lin.m_in):
        raise ShiftError(f"need {r} tangent directions of size {lin.m_in}")

    m = lin.drift @ lin.metric.mat
    cols = np.zeros((lin.n, r))
    used = np.zeros(r, dtype=bool)
    for i in range(r):
        if used[i]:
            continue
        s, b = shifts[i], directions[i]
        scale = max(1.0, abs(s))
        v = _solve_shifted(m, lin.B @ b, s)
        if abs(s.imag) <= 1e-12 * scale:
            # real shift: the direction may carry a complex phase; keep the
            # larger real/imag part (same 1-d real span)
            re, im = np.real(v), np.imag(v)
            cols[:, i] = re if np.linalg.norm(re) >= np.linalg.norm(im) else im
            used[i] = True
            continue
        mate = None
        for k in range(i + 1, r):
            if used[k]:
                continue
            if abs(shifts[k] - np.conj(s)) <= 1e-8 * scale:
                mate = k
                break
        if mate is None:
            raise ShiftError(f"shift {s} has no conjugate partner in the set")
        if np.linalg.norm(directions[mate] - np.conj(b)) > 1e-6 * max(1.0, np.linalg.norm(b)):
            raise ShiftError(f"directions for the conjugate pair at {s} do not match")
        cols[:, i] = np.real(v)
        cols[:, mate] = np.imag(v)
        used[i] = used[mate] = True

    sig = np.linalg.svd(cols, compute_uv=False)
    if sig[-1] == 0.0 or sig[-1] / sig[0] < RANK_TOL:
        raise RankError("interpolation basis lost rank after realification "
                        "(degenerate shifts or directions)")
    return cols


@dataclass
class IterationLog:
    """Convergence record of the interpolatory fixed-point iteration."""

    converged: bool = False
    warning: bool = False
    n_iter: int = 0
    changes: list = field(default_factory=list)
    final_change: float = np.nan
    shifts: np.ndarray = None
    qr_defects: list = field(default_factory=list)


def _sorted_shifts(sigma):
    order = np.lexsort((sigma.imag, sigma.real))
    return sigma[order]


def _default_shift_init(lin, r, n_power_iter=30):
    """Log-spaced real shifts between the extreme eigenvalue magnitudes of
    (J - R) Q estimated by forward/inverse power iteration; directions cycle
    the identity columns.  Deterministic."""
    m = lin.drift @ lin.metric.mat
    v = np.ones(lin.n) / np.sqrt(lin.n)
    hi = 1.0
    for _ in range(n_power_iter):
        w = m @ v
        hi = np.linalg.norm(w)
        if hi == 0.0:
            break
        v = w / hi
    try:
        lu = spla.lu_factor(m)
        v = np.ones(lin.n) / np.sqrt(lin.n)
        inv_norm = 1.0
        for _ in range(n_power_iter):
            w = spla.lu_solve(lu, v)
            inv_norm = np.linalg.norm(w)
            v = w / inv_norm
        lo = 1.0 / inv_norm
    except (spla.LinAlgError, ValueError):
        lo = hi * 1e-6
    hi = max(hi, lo * (1.0 + 1e-12))
    shifts = np.logspace(np.log10(lo), np.log10(hi), r).astype(complex)
    directions = np.zeros((r, lin.m_in), dtype=complex)
    for i in range(r):
        directions[i, i % lin.m_in] = 1.0
    return shifts, directions


def _h2_bases_at(lin, shifts, directions):
    vt = interpolatory_basis(lin, shifts, directions)
    v = q_orthonormalize(vt, lin.metric)
    w = lin.metric.apply(v)
    return v, w


def h2eps_ph_bases(lin, r, max_iter=100, shift_tol=1e-6, shifts0=None,
                   directions0=None):
    """Interpolatory bases iterated to the H2 first-order conditions.

    Each sweep builds the tangential interpolation basis at the current
    shifts, Q-orthonormalizes it (so the reduced Hessian is the identity),
    takes W = Q V, projects the structure matrices and re-centers the shifts
    at the mirrored eigenvalues of the reduced drift with directions from its
    left eigenvectors.  Convergence is measured as the relative l2 change of
    the (Re, Im)-sorted shift vector.  On non-convergence the best iterate is
    used and flagged in the log.
    """
    if shifts0 is None:
        shifts, directions = _default_shift_init(lin, r)
    else:
        shifts = np.asarray(shifts0, dtype=complex)
        directions = (np.asarray(directions0, dtype=complex)
                      if directions0 is not None
                      else _default_shift_init(lin, r)[1])

    log = IterationLog()
    best = (np.inf, shifts, directions)
    for it in range(max_iter):
        v, w = _h2_bases_at(lin, shifts, directions)
        log.qr_defects.append(
            float(np.linalg.norm(v.T @ lin.metric.apply(v) - np.eye(r))))
        jr = w.T @ lin.J @ w
        rr = w.T @ lin.R @ w
        br = w.T @ lin.B
        ar = 0.5 * (jr - jr.T) - 0.5 * (rr + rr.T)
        lam, vl = spla.eig(ar, left=True, right=False)
        z = np.conj(vl)  # rows z_i^T satisfy z_i^T A_r = lam_i z_i^T
        # mirrored eigenvalues; reflect any unstable real part so shifts stay
        # in the open right half-plane (off the spectrum)
        new_shifts = np.abs(lam.real) - 1j * lam.imag
        new_dirs = (br.T @ z).T  # row i = B_r^T z_i
        change = np.linalg.norm(_sorted_shifts(new_shifts) - _sorted_shifts(shifts))
        denom = max(np.linalg.norm(_sorted_shifts(shifts)), 1e-300)
        change /= denom
        log.changes.append(float(change))
        shifts, directions = new_shifts, new_dirs
        if change < best[0]:
            best = (change, shifts, directions)
        if change < shift_tol:
            log.converged = True
            break
    log.n_iter = len(log.changes)
    log.final_change = log.changes[-1] if log.changes else np.nan
    if not log.converged:
        log.warning = True
        warnings.warn(f"h2eps iteration did not converge in {max_iter} sweeps "
                      f"(best shift change {best[0]:.2e}); using best iterate",
                      stacklevel=2)
        shifts, directions = best[1], best[2]

    v, w = _h2_bases_at(lin, shifts, directions)
    log.shifts = shifts
    basis = ReductionBasis(V=v, W=w, provenance="h2eps",
                           sigma_min=float(np.linalg.svd(w.T @ v, compute_uv=False)[-1]))
    return basis, log


def _orth_truncated(cols, tol):
    u, sig, _ = np.linalg.svd(cols, full_matrices=False)
    if sig[0] == 0.0:
        raise RankError("concatenated basis is zero")
    rank = int(np.sum(sig / sig[0] > tol))
    return u[:, :rank], rank


def hybrid_bases(pod, h2):
    """Concatenate a POD pair and an h2eps pair, orthonormalize each stack
    and re-biorthonormalize.  Overlapping subspaces are truncated to the
    numerical rank with a warning; the achieved dimension is basis.r."""
    if pod.n != h2.n:
        raise StructureError("bases live in different state dimensions")
    r_target = pod.r + h2.r
    v, rank_v = _orth_truncated(np.hstack([pod.V, h2.V]), HYBRID_RANK_TOL)
    w, rank_w = _orth_truncated(np.hstack([pod.W, h2.W]), HYBRID_RANK_TOL)
    r_eff = min(rank_v, rank_w)
    if r_eff < r_target:
        warnings.warn(
            f"hybrid basis rank {r_eff} < requested {r_target}; "
            "subspaces overlap and the basis was truncated", stacklevel=2)
    basis = biorthonormalize(v[:, :r_eff], w[:, :r_eff], provenance="hybrid")
    return basis
