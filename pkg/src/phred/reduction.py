"""Structure-preserving Petrov-Galerkin reduction and error metrics.

Projecting with a biorthonormal pair (V, W) gives J_r = W^T J W (skew),
R_r = W^T R W (PSD) and the reduced Hamiltonian H_r(x_r) = H(V x_r), so the
reduced model is again port-Hamiltonian: stable and passive by construction.
Roundoff-scale structure violations are removed by explicit
(skew-)symmetrization so the invariants are exactly testable.
"""

from dataclasses import dataclass

import numpy as np

from .errors import ComparisonError, StructureError
from .integrate import simulate
from .phcore import NlphSystem


def skew_part(m):
    return 0.5 * (m - m.T)


def sym_part(m):
    return 0.5 * (m + m.T)


@dataclass(frozen=True)
class ReducedSystem:
    """Reduced port-Hamiltonian model plus the lift back to full state.

    ``grad_reduced`` evaluates the reduced energy gradient (exact lifted form
    V^T grad H(V x_r), or the sparse interpolatory form for DEIM variants);
    ``lift`` is V.  ``provenance`` chains the basis origin with the gradient
    evaluation kind, e.g. "pod+exact" or "pod+deim".
    """

    r: int
    J_r: np.ndarray
    R_r: np.ndarray
    B_r: np.ndarray
    grad_reduced: callable
    hamiltonian_reduced: callable
    lift: np.ndarray
    provenance: str
    basis: object = None
    hess_reduced: callable = None

    def to_system(self):
        """View the reduced model as an NlphSystem (same contracts apply:
        validate_structure, simulate, dissipation_margin, ...)."""
        return NlphSystem(n=self.r, m_in=self.B_r.shape[1],
                          J=self.J_r, R=self.R_r, B=self.B_r,
                          hamiltonian=self.hamiltonian_reduced,
                          grad_h=self.grad_reduced, hess_h=self.hess_reduced,
                          name=f"reduced[{self.provenance}]")


def project_ph(sys, basis):
    """Reduce ``sys`` with the biorthonormal pair in ``basis``.

    The reduced gradient lifts to full dimension per evaluation
    (V^T grad H(V x_r)); use the DEIM pipeline to avoid that cost.
    """
    v, w = basis.V, basis.W
    if v.shape[0] != sys.n:
        raise StructureError(f"basis is {v.shape[0]}-dimensional, system is {sys.n}")
    j_r = skew_part(w.T @ sys.J @ w)
    r_r = sym_part(w.T @ sys.R @ w)
    b_r = w.T @ sys.B

    def grad_reduced(x_r):
        return v.T @ sys.grad_h(v @ x_r)

    def hamiltonian_reduced(x_r):
        return sys.hamiltonian(v @ x_r)

    hess_reduced = None
    if sys.hess_h is not None:
        def hess_reduced(x_r):
            return v.T @ (sys.hess_h(v @ x_r) @ v)

    return ReducedSystem(r=basis.r, J_r=j_r, R_r=r_r, B_r=b_r,
                         grad_reduced=grad_reduced,
                         hamiltonian_reduced=hamiltonian_reduced,
                         lift=v, provenance=f"{basis.provenance}+exact",
                         basis=basis, hess_reduced=hess_reduced)


def init_reduced_state(basis, x0):
    """Reduced initial condition x_r(0) = W^T x(0).

    This choice annihilates the initial-condition term of the a-priori error
    bound: W^T (x0 - V W^T x0) = 0.
    """
    return basis.W.T @ np.asarray(x0, dtype=float)


def simulate_reduced(red, input_fn, t_span, cfg, x_r0=None):
    """Integrate the reduced dynamics; outputs are y_r = B_r^T grad H_r."""
    if x_r0 is None:
        x_r0 = np.zeros(red.r)
    return simulate(red.to_system(), input_fn, t_span, cfg, x0=x_r0)


@dataclass(frozen=True)
class ErrorMetrics:
    """Reduced-vs-full trajectory errors.

    Average relative errors are sum-normalized ratios
    (sum_k ||e(t_k)||) / (sum_k ||ref(t_k)||), which stay well defined when
    the reference passes through zero; L2 errors are trapezoid integrals of
    the squared pointwise norms (state errors in the Q norm).
    """

    avg_rel_output_error: float
    avg_rel_state_error: float
    output_error_series: np.ndarray
    state_error_series: np.ndarray
    l2_output_error: float
    l2_state_error_q: float


def error_metrics(full, red, basis, metric):
    """Compare a full trajectory with a reduced one on the same grid."""
    if full.times.shape != red.times.shape or not np.allclose(
            full.times, red.times, rtol=0.0, atol=1e-12):
        raise ComparisonError("trajectories live on different time grids")
    lifted = red.states @ basis.V.T
    diff = full.states - lifted
    state_err = np.array([metric.norm(row) for row in diff])
    state_ref = np.array([metric.norm(row) for row in full.states])
    out_err = np.linalg.norm(full.outputs - red.outputs, axis=1)
    out_ref = np.linalg.norm(full.outputs, axis=1)

    def _ratio(err, ref):
        denom = ref.sum()
        return float(err.sum() / denom) if denom > 0.0 else 0.0

    return ErrorMetrics(
        avg_rel_output_error=_ratio(out_err, out_ref),
        avg_rel_state_error=_ratio(state_err, state_ref),
        output_error_series=out_err,
        state_error_series=state_err,
        l2_output_error=float(np.trapz(out_err**2, full.times)),
        l2_state_error_q=float(np.trapz(state_err**2, full.times)),
    )
