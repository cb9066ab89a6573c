"""Core data model: nonlinear port-Hamiltonian systems, weighted metrics,
trajectories, and structural validation.

A system is ``xdot = (J - R) grad H(x) + B u``, ``y = B^T grad H(x)`` with
skew-symmetric J, symmetric positive-semidefinite R and energy H >= 0.  All
types are immutable after construction and callbacks are expected to be pure,
so concurrent read-only use is safe.
"""

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
import scipy.linalg as spla

from .errors import EvaluationError, StructureError

# Structural tolerances, surfaced in StructureReport rather than applied
# silently.
SKEW_TOL = 1e-12
SYM_TOL = 1e-12
PSD_EIG_FLOOR = 1e-10


def _as_matrix(a, name):
    a = np.asarray(a, dtype=float)
    if a.ndim != 2:
        raise StructureError(f"{name} must be a 2-d array, got shape {a.shape}")
    return a


class WeightedMetric:
    """Inner product <x, z>_Q = x^T Q z for a symmetric positive-definite Q.

    Q may be passed as a dense (n, n) array or as a 1-d array of diagonal
    entries (fast path; the ladder Hessian at the origin is diagonal).  The
    Cholesky factor L with Q = L L^T is computed at construction, which also
    certifies positive definiteness.
    """

    def __init__(self, q):
        q = np.asarray(q, dtype=float)
        if q.ndim == 1:
            if np.any(q <= 0.0):
                raise StructureError("diagonal metric requires positive entries")
            self.diag = q.copy()
            self.n = q.size
            self._sqrt_diag = np.sqrt(q)
        elif q.ndim == 2:
            if q.shape[0] != q.shape[1]:
                raise StructureError(f"metric matrix must be square, got {q.shape}")
            if not np.allclose(q, q.T, rtol=0.0, atol=1e-12 * max(1.0, abs(q).max())):
                raise StructureError("metric matrix must be symmetric")
            self.diag = None
            self.n = q.shape[0]
            self._dense = 0.5 * (q + q.T)
            try:
                self._chol = np.linalg.cholesky(self._dense)
            except np.linalg.LinAlgError as exc:
                raise StructureError("metric matrix is not positive definite") from exc
        else:
            raise StructureError("metric must be 1-d (diagonal) or 2-d")

    @classmethod
    def identity(cls, n):
        return cls(np.ones(n))

    @property
    def mat(self):
        """Dense Q."""
        if self.diag is not None:
            return np.diag(self.diag)
        return self._dense

    def apply(self, x):
        """Q @ x (works for vectors and matrices)."""
        if self.diag is not None:
            x = np.asarray(x, dtype=float)
            if x.ndim == 1:
                return self.diag * x
            return self.diag[:, None] * x
        return self._dense @ x

    def solve(self, rhs):
        """Q^{-1} @ rhs."""
        if self.diag is not None:
            rhs = np.asarray(rhs, dtype=float)
            if rhs.ndim == 1:
                return rhs / self.diag
            return rhs / self.diag[:, None]
        y = spla.cho_solve((self._chol, True), rhs)
        return y

    def lt_mul(self, x):
        """L^T @ x, mapping to coordinates where the metric is Euclidean."""
        if self.diag is not None:
            x = np.asarray(x, dtype=float)
            if x.ndim == 1:
                return self._sqrt_diag * x
            return self._sqrt_diag[:, None] * x
        return self._chol.T @ x

    def l_solve(self, b):
        """L^{-1} @ b."""
        if self.diag is not None:
            b = np.asarray(b, dtype=float)
            if b.ndim == 1:
                return b / self._sqrt_diag
            return b / self._sqrt_diag[:, None]
        return spla.solve_triangular(self._chol, np.asarray(b, dtype=float),
                                     lower=True)

    def lt_inv_t_mul_from_right(self, m):
        """M @ L^{-T} for a matrix M."""
        if self.diag is not None:
            return np.asarray(m, dtype=float) / self._sqrt_diag[None, :]
        # X = M L^{-T}  <=>  L X^T = M^T
        xt = spla.solve_triangular(self._chol, np.asarray(m, dtype=float).T,
                                   lower=True)
        return xt.T

    def norm(self, x):
        """||x||_Q = sqrt(x^T Q x)."""
        return float(np.linalg.norm(self.lt_mul(np.asarray(x, dtype=float))))

    def inner(self, x, z):
        return float(np.dot(self.lt_mul(x), self.lt_mul(z)))

    def op_norm(self, m):
        """||M||_Q = largest singular value of L^T M L^{-T}."""
        w = self.lt_inv_t_mul_from_right(self.lt_mul(np.asarray(m, dtype=float)))
        return float(np.linalg.norm(w, 2))

    def log_norm(self, a):
        """Largest eigenvalue of the Q-symmetrized part of the linear map A.

        Equals the exact logarithmic Lipschitz constant of x -> A x in the
        Q geometry: lambda_max(sym(L^T A L^{-T})).
        """
        w = self.lt_inv_t_mul_from_right(self.lt_mul(np.asarray(a, dtype=float)))
        return float(np.linalg.eigvalsh(0.5 * (w + w.T)).max())


def q_norm(metric, x):
    """||x||_Q."""
    return metric.norm(x)


def q_op_norm(metric, m):
    """Q-weighted operator norm of the matrix M."""
    return metric.op_norm(m)


@dataclass(frozen=True)
class NlphSystem:
    """Full-order nonlinear port-Hamiltonian model.

    Parameters
    ----------
    n, m_in : int
        State and port dimensions.
    J, R : (n, n) arrays
        Structure (skew) and dissipation (PSD) matrices.
    B : (n, m_in) array
        Port matrix.
    hamiltonian, grad_h : callables
        Energy x -> H(x) >= 0 and its gradient x -> (n,) array.
    hess_h : callable, optional
        x -> (n, n) Hessian; enables linearization and analytic Newton
        Jacobians.
    grad_components : callable, optional
        ``(x, idx) -> values`` returning the entries at ``idx`` of the
        gradient of the nonlinear remainder h = H - 1/2 x^T Q x for the
        model's native split matrix ``split_q``.  Cost must be O(len(idx)).
    split_q : array, optional
        Native quadratic-split matrix (1-d diagonal or dense), normally the
        Hessian at the origin.
    split_h : callable, optional
        Stable evaluation of the remainder h(x) for the native split.
    component_bandwidth : int, optional
        Declared dependency stencil half-width of ``grad_components``
        (0 = each component reads only its own state entry).
    """

    n: int
    m_in: int
    J: np.ndarray
    R: np.ndarray
    B: np.ndarray
    hamiltonian: callable
    grad_h: callable
    hess_h: callable = None
    grad_components: callable = None
    split_q: np.ndarray = None
    split_h: callable = None
    component_bandwidth: int = None
    name: str = ""

    def __post_init__(self):
        j = _as_matrix(self.J, "J")
        r = _as_matrix(self.R, "R")
        b = _as_matrix(self.B, "B")
        if j.shape != (self.n, self.n):
            raise StructureError(f"J has shape {j.shape}, expected {(self.n, self.n)}")
        if r.shape != (self.n, self.n):
            raise StructureError(f"R has shape {r.shape}, expected {(self.n, self.n)}")
        if b.shape != (self.n, self.m_in):
            raise StructureError(f"B has shape {b.shape}, expected {(self.n, self.m_in)}")
        for name, a in (("J", j), ("R", r), ("B", b)):
            a.setflags(write=False)
            object.__setattr__(self, name, a)

    @cached_property
    def drift(self):
        """J - R, cached (read-only)."""
        a = self.J - self.R
        a.setflags(write=False)
        return a


@dataclass(frozen=True)
class Trajectory:
    """Fixed-grid simulation record: states, outputs, and applied inputs."""

    times: np.ndarray
    states: np.ndarray
    outputs: np.ndarray
    inputs: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.times, dtype=float)
        if t.ndim != 1 or t.size < 1:
            raise StructureError("times must be a non-empty 1-d array")
        if np.any(np.diff(t) <= 0.0):
            raise StructureError("times must be strictly increasing")
        for name in ("times", "states", "outputs", "inputs"):
            a = np.asarray(getattr(self, name), dtype=float)
            if not np.isfinite(a).all():
                raise StructureError(f"trajectory field {name} contains non-finite values")
            a.setflags(write=False)
            object.__setattr__(self, name, a)
        if self.states.shape[0] != t.size:
            raise StructureError("states row count must match times")

    @property
    def n_steps(self):
        return self.times.size - 1


@dataclass(frozen=True)
class StructureReport:
    """Outcome of validate_structure with the raw defect numbers."""

    skew_defect: float
    sym_defect: float
    min_eig_r: float
    r_norm: float
    dims_ok: bool
    passed: bool
    messages: tuple

    def __str__(self):
        status = "PASS" if self.passed else "FAIL"
        lines = [f"structure check: {status}",
                 f"  skew defect ||J+J^T||/||J||      : {self.skew_defect:.3e}",
                 f"  symmetry defect ||R-R^T||/||R||  : {self.sym_defect:.3e}",
                 f"  most negative eigenvalue of R    : {self.min_eig_r:.3e}",
                 f"  dimensions consistent            : {self.dims_ok}"]
        lines += [f"  note: {m}" for m in self.messages]
        return "\n".join(lines)


def validate_structure(sys):
    """Check J skewness, R symmetry/positive semidefiniteness and dimensions.

    Defects are relative: ||J + J^T|| / ||J|| (zero for J = 0), similarly for
    R; the PSD check allows eigenvalues down to -1e-10 * ||R||.
    """
    j, r, b = sys.J, sys.R, sys.B
    msgs = []
    dims_ok = (j.shape == (sys.n, sys.n) and r.shape == (sys.n, sys.n)
               and b.shape == (sys.n, sys.m_in))

    jn = np.linalg.norm(j)
    skew_defect = float(np.linalg.norm(j + j.T) / jn) if jn > 0.0 else 0.0

    rn = np.linalg.norm(r)
    sym_defect = float(np.linalg.norm(r - r.T) / rn) if rn > 0.0 else 0.0
    r_2norm = float(np.linalg.norm(r, 2)) if rn > 0.0 else 0.0
    if rn > 0.0:
        min_eig = float(np.linalg.eigvalsh(0.5 * (r + r.T)).min())
    else:
        min_eig = 0.0

    passed = dims_ok and skew_defect <= SKEW_TOL and sym_defect <= SYM_TOL \
        and min_eig >= -PSD_EIG_FLOOR * max(r_2norm, 1e-300)
    if skew_defect > SKEW_TOL:
        msgs.append(f"J is not skew-symmetric (defect {skew_defect:.2e})")
    if sym_defect > SYM_TOL:
        msgs.append(f"R is not symmetric (defect {sym_defect:.2e})")
    if rn > 0.0 and min_eig < -PSD_EIG_FLOOR * r_2norm:
        msgs.append(f"R has negative eigenvalue {min_eig:.2e}")
    if not dims_ok:
        msgs.append("matrix dimensions are inconsistent")
    return StructureReport(skew_defect, sym_defect, min_eig, r_2norm,
                           dims_ok, passed, tuple(msgs))


def eval_dynamics(sys, x, u):
    """Right-hand side (J - R) grad H(x) + B u."""
    g = sys.grad_h(x)
    if not np.isfinite(g).all():
        raise EvaluationError("gradient of H is non-finite", state=np.array(x))
    return sys.drift @ g + sys.B @ u


def eval_output(sys, x):
    """Port output y = B^T grad H(x)."""
    g = sys.grad_h(x)
    if not np.isfinite(g).all():
        raise EvaluationError("gradient of H is non-finite", state=np.array(x))
    return sys.B.T @ g


def dissipation_margin(traj, sys):
    """Worst-case supplied-minus-stored energy balance along a trajectory.

    Returns min over grid times t1 of  integral_0^t1 y^T u dt - (H(x(t1)) -
    H(x(0))), with the work integral evaluated by the composite trapezoid
    rule.  A passive system keeps this nonnegative up to integration error.
    """
    power = np.einsum("ij,ij->i", traj.outputs, traj.inputs)
    dt = np.diff(traj.times)
    work = np.concatenate(([0.0], np.cumsum(0.5 * dt * (power[1:] + power[:-1]))))
    energy = np.array([sys.hamiltonian(x) for x in traj.states])
    return float(np.min(work - (energy - energy[0])))
