"""Structure-preserving discrete empirical interpolation.

Plain DEIM applied to the energy gradient destroys the port-Hamiltonian form.
The variant implemented here first splits the energy into a quadratic part
and a nonlinear remainder, H(x) = 1/2 x^T Q x + h(x), and interpolates only
grad h through the oblique projector P = U (E^T U)^{-1} E^T built on a
Q-orthonormal mode basis U.  The surrogate energy
Hhat(x) = 1/2 x^T Q x + h(P^T x) is again a genuine Hamiltonian, so the
reduced model stays port-Hamiltonian while each gradient evaluation touches
only the m interpolation components.
"""

import warnings
from dataclasses import dataclass

import numpy as np
import scipy.linalg as spla

from .basis import ReductionBasis, _refine_biorth, pod_basis, q_orthonormalize
from .errors import RankError, StructureError
from .phcore import WeightedMetric
from .reduction import ReducedSystem, skew_part, sym_part

COND_LIMIT = 1e12


@dataclass(frozen=True)
class HamiltonianSplit:
    """Quadratic/nonlinear energy split for a fixed SPD matrix Q.

    ``grad_h_components(x, idx)`` must return the entries of grad h at
    ``idx`` reading only the declared stencil of x; the dense fallback used
    for models without native components costs O(n) per call.
    """

    metric: WeightedMetric
    h: callable
    grad_h_full: callable
    grad_h_components: callable
    native: bool


def build_split(sys, q=None):
    """Assemble the split callbacks for ``sys``.

    Q defaults to the model's native split matrix (the Hessian at the
    origin).  When the requested Q matches the native one, the model's
    sparse component callbacks are used; otherwise a dense fallback is
    installed with a performance warning.
    """
    if q is None:
        q = sys.split_q
        if q is None:
            if sys.hess_h is None:
                raise StructureError("no split matrix available: pass q or "
                                     "provide hess_h")
            q = sys.hess_h(np.zeros(sys.n))
    metric = q if isinstance(q, WeightedMetric) else WeightedMetric(q)

    native = False
    if sys.grad_components is not None and sys.split_q is not None:
        native = np.allclose(WeightedMetric(sys.split_q).mat, metric.mat,
                             rtol=1e-12, atol=0.0)

    if native:
        h = sys.split_h
        grad_h_full = lambda x: sys.grad_components(x, np.arange(sys.n))
        grad_h_components = sys.grad_components
    else:
        if sys.grad_components is not None:
            warnings.warn("split matrix differs from the model's native one; "
                          "falling back to dense gradient evaluation",
                          stacklevel=2)

        def h(x):
            return float(sys.hamiltonian(x) - 0.5 * np.dot(x, metric.apply(x)))

        def grad_h_full(x):
            return sys.grad_h(x) - metric.apply(x)

        def grad_h_components(x, idx):
            return grad_h_full(x)[np.asarray(idx, dtype=int)]

    return HamiltonianSplit(metric=metric, h=h, grad_h_full=grad_h_full,
                            grad_h_components=grad_h_components, native=native)


def deim_indices(u):
    """Greedy interpolation indices for the columns of U.

    Start at the largest-magnitude entry of the first column; each later
    column is interpolated on the current index set and the next index is
    the largest-magnitude residual entry (smallest index wins ties, which is
    numpy's argmax convention).  Indices are 0-based.
    """
    u = np.asarray(u, dtype=float)
    n, m = u.shape
    idx = np.empty(m, dtype=int)
    idx[0] = int(np.argmax(np.abs(u[:, 0])))
    if np.abs(u[idx[0], 0]) == 0.0:
        raise RankError("first basis column is zero")
    for ell in range(1, m):
        sub = u[idx[:ell], :ell]
        try:
            c = np.linalg.solve(sub, u[idx[:ell], ell])
        except np.linalg.LinAlgError as exc:
            raise RankError(f"index selection failed at step {ell + 1}: "
                            "sampled basis block is singular") from exc
        resid = u[:, ell] - u[:, :ell] @ c
        pick = int(np.argmax(np.abs(resid)))
        if np.abs(resid[pick]) <= 1e-13 * max(1.0, np.abs(u[:, ell]).max()):
            raise RankError(f"index selection failed at step {ell + 1}: "
                            "residual vanished (basis numerically rank deficient)")
        idx[ell] = pick
    return idx


class DeimModel:
    """Interpolatory projector P = U (E^T U)^{-1} E^T with its index set.

    The m x m sample block E^T U is LU-factored once; ``growth`` records
    ||(E^T U)^{-1}||_2, the classical growth diagnostic of the greedy
    selection.
    """

    def __init__(self, u, indices, metric):
        self.U = np.asarray(u, dtype=float)
        self.indices = np.asarray(indices, dtype=int)
        self.metric = metric
        n, m = self.U.shape
        if len(np.unique(self.indices)) != m:
            raise RankError("interpolation indices are not distinct")
        if self.indices.min() < 0 or self.indices.max() >= n:
            raise RankError("interpolation index out of range")
        etu = self.U[self.indices, :]
        sig = np.linalg.svd(etu, compute_uv=False)
        if sig[-1] == 0.0 or sig[0] / sig[-1] > COND_LIMIT:
            raise RankError(
                f"sample block E^T U has condition "
                f"{np.inf if sig[-1] == 0 else sig[0]/sig[-1]:.2e}; "
                "the interpolation dimension m is too aggressive")
        self.growth = float(1.0 / sig[-1])
        self._lu = spla.lu_factor(etu)

    @property
    def n(self):
        return self.U.shape[0]

    @property
    def m(self):
        return self.U.shape[1]

    def coefficients(self, values_at_indices):
        """(E^T U)^{-1} v for sampled values v."""
        return spla.lu_solve(self._lu, np.asarray(values_at_indices, dtype=float))

    def project(self, values_at_indices):
        """P f from the m sampled entries of f."""
        return self.U @ self.coefficients(values_at_indices)

    def project_full(self, f):
        """P f from a dense f (samples it at the interpolation indices)."""
        return self.project(np.asarray(f, dtype=float)[self.indices])

    def sample_coefficients(self, x):
        """(U^T E)^{-1} U^T x: the nonzero entries of P^T x."""
        return spla.lu_solve(self._lu, self.U.T @ np.asarray(x, dtype=float),
                             trans=1)

    def project_t(self, x):
        """P^T x, supported on the interpolation indices only."""
        out = np.zeros(self.n)
        out[self.indices] = self.sample_coefficients(x)
        return out

    def p_norm_q(self):
        """||P||_Q, exact: with L^T U orthonormal this is
        ||(E^T U)^{-1} E^T L^{-T}||_2."""
        e = np.zeros((self.n, self.m))
        e[self.indices, np.arange(self.m)] = 1.0
        et_linv_t = self.metric.l_solve(e).T
        z = spla.lu_solve(self._lu, et_linv_t)
        return float(np.linalg.norm(z, 2))


def deim_project(model, values_at_indices):
    """DEIM reconstruction U (E^T U)^{-1} v from sampled values; exact for
    any f in span(U)."""
    return model.project(values_at_indices)


def deim_basis_from_snapshots(g, m, metric):
    """Truncated SVD of the remainder snapshots, Q-orthonormalized, with the
    greedy index selection and the factored sample block."""
    u0, _ = pod_basis(g, m)
    u = q_orthonormalize(u0, metric)
    indices = deim_indices(u)
    return DeimModel(u, indices, metric)


def deim_hamiltonian(split, model, x):
    """Surrogate energy Hhat(x) = 1/2 x^T Q x + h(P^T x)."""
    x = np.asarray(x, dtype=float)
    quad = 0.5 * float(np.dot(x, split.metric.apply(x)))
    return quad + split.h(model.project_t(x))


class EvalCounter:
    """Instrumentation: gradient calls and nonlinear components touched."""

    __slots__ = ("calls", "components")

    def __init__(self):
        self.calls = 0
        self.components = 0


@dataclass(frozen=True)
class DeimReducedSystem(ReducedSystem):
    """Reduced system whose gradient uses the interpolatory surrogate.

    grad Hhat_r(x_r) = x_r + D g(K x_r) where K maps x_r to the m nonzero
    entries of P^T V x_r, g evaluates the m needed components of grad h on
    that sparse lift, and D = V^T U (E^T U)^{-1} (= K^T) combines them back.
    Both maps are precomputed, so stepping cost is independent of n.
    """

    deim: DeimModel = None
    split: HamiltonianSplit = None
    sample_map: np.ndarray = None
    combine_map: np.ndarray = None
    counter: EvalCounter = None


def _renormalize_to_metric(bas, metric):
    """Rescale a biorthonormal pair so V^T Q V = I while keeping W^T V = I
    and both spans (V -> V L^{-T}, W -> W L)."""
    gram = bas.V.T @ metric.apply(bas.V)
    l = np.linalg.cholesky(0.5 * (gram + gram.T))
    v = spla.solve_triangular(l, bas.V.T, lower=True).T
    w = bas.W @ l
    w = _refine_biorth(v, w)
    return ReductionBasis(V=v, W=w, provenance=bas.provenance,
                          sigma_min=bas.sigma_min)


def pod_deim_ph(sys, snapshots, r, m, metric=None, bases=None, deim_model=None):
    """Build the DEIM-reduced port-Hamiltonian model.

    Parameters
    ----------
    sys : NlphSystem
    snapshots : SnapshotSet
        Must carry remainder snapshots G unless ``deim_model`` is supplied.
    r, m : int
        Reduction and interpolation dimensions.
    metric : array or WeightedMetric, optional
        Split matrix Q; defaults to the model's native one (Hessian at 0).
    bases : ReductionBasis, optional
        Reuse existing (e.g. interpolatory) bases instead of the POD pair;
        they are renormalized to V^T Q V = I.
    deim_model : DeimModel, optional
        Reuse a prebuilt interpolation model instead of the G-snapshot SVD.
    """
    split = build_split(sys, metric)
    q = split.metric

    if bases is None:
        v0, _ = pod_basis(snapshots.X, r)
        v = q_orthonormalize(v0, q)
        w0, _ = pod_basis(snapshots.F, r)
        mat = v.T @ w0
        sig = np.linalg.svd(mat, compute_uv=False)
        if sig[-1] == 0.0 or sig[0] / sig[-1] > COND_LIMIT:
            raise RankError("state and gradient POD subspaces are numerically "
                            "orthogonal; cannot enforce V^T W = I")
        w = _refine_biorth(v, np.linalg.solve(mat.T, w0.T).T)
        bas = ReductionBasis(V=v, W=w, provenance="pod",
                             sigma_min=float(sig[-1]))
    else:
        bas = _renormalize_to_metric(bases, q)

    if deim_model is None:
        if snapshots is None or snapshots.G is None:
            raise RankError("no remainder snapshots available: collect them "
                            "with a configured split or pass deim_model")
        deim_model = deim_basis_from_snapshots(snapshots.G, m, q)
    if deim_model.n != sys.n:
        raise StructureError("DEIM model dimension does not match the system")

    v, w = bas.V, bas.W
    j_r = skew_part(w.T @ sys.J @ w)
    r_r = sym_part(w.T @ sys.R @ w)
    b_r = w.T @ sys.B

    # K: x_r -> nonzero entries of P^T V x_r,  D = K^T combines components
    k_map = spla.lu_solve(deim_model._lu, deim_model.U.T @ v, trans=1)
    d_map = k_map.T
    idx = deim_model.indices
    counter = EvalCounter()
    n = sys.n

    def grad_reduced(x_r):
        c = k_map @ x_r
        lift = np.zeros(n)
        lift[idx] = c
        vals = split.grad_h_components(lift, idx)
        counter.calls += 1
        counter.components += idx.size
        return x_r + d_map @ vals

    def hamiltonian_reduced(x_r):
        return deim_hamiltonian(split, deim_model, v @ x_r)

    return DeimReducedSystem(r=bas.r, J_r=j_r, R_r=r_r, B_r=b_r,
                             grad_reduced=grad_reduced,
                             hamiltonian_reduced=hamiltonian_reduced,
                             lift=v, provenance=f"{bas.provenance}+deim",
                             basis=bas, hess_reduced=None,
                             deim=deim_model, split=split,
                             sample_map=k_map, combine_map=d_map,
                             counter=counter)
