"""Computable a-priori error bounds.

Two bound families are implemented: the projection-error bound for the
structure-preserving reduced model (integrated state and output errors in
terms of the optimal subspace residuals), and the interpolation-error bound
comparing the exact-gradient reduced model with its DEIM surrogate.  Both
need Lipschitz and logarithmic-Lipschitz constants in a weighted geometry;
since the underlying suprema range over all of state space, only sampled
estimates are computable for nonlinear maps, and every constant is labeled
with the method that produced it.
"""

import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as spla

from .errors import ComparisonError, EstimationError, PhredError
from .special import exp_rem2

LIPSCHITZ_METHODS = ("sampled-pairs", "hessian-sup", "exact-linear")
ALPHA_SWITCH = 1e-12  # below this |alpha| the alpha -> 0 limit formulas apply


@dataclass(frozen=True)
class LipschitzEstimate:
    """A (possibly one-sided) Lipschitz constant estimate.

    Sampled estimates are suprema over finite sets, hence lower bounds of the
    true constant; the exact-linear method is exact for linear maps.
    """

    value: float
    method: str
    sample_count: int
    is_lower_bound: bool


def _check_method(method):
    if method not in LIPSCHITZ_METHODS:
        raise EstimationError(f"unknown method {method!r}, expected one of "
                              f"{LIPSCHITZ_METHODS}")


def lipschitz(f, metric, samples=None, method="sampled-pairs", jacobian=None,
              linear_map=None):
    """Estimate L_Q[F] = sup ||F(u) - F(v)||_Q / ||u - v||_Q.

    samples: pairs (u, v) for "sampled-pairs"; points for "hessian-sup"
    (with the Jacobian callback); ignored for "exact-linear" (pass the
    matrix as linear_map).
    """
    _check_method(method)
    if method == "exact-linear":
        if linear_map is None:
            raise EstimationError("exact-linear needs the linear map matrix")
        return LipschitzEstimate(metric.op_norm(linear_map), method, 0, False)
    if method == "hessian-sup":
        if jacobian is None:
            raise EstimationError("hessian-sup needs a jacobian callback")
        pts = list(samples) if samples is not None else []
        if not pts:
            raise EstimationError("empty sample set")
        val = max(metric.op_norm(jacobian(np.asarray(x, dtype=float)))
                  for x in pts)
        return LipschitzEstimate(val, method, len(pts), True)
    pairs = list(samples) if samples is not None else []
    if not pairs:
        raise EstimationError("empty sample set")
    best = 0.0
    used = 0
    for u, v in pairs:
        u = np.asarray(u, dtype=float)
        v = np.asarray(v, dtype=float)
        denom = metric.norm(u - v)
        if denom == 0.0:
            continue
        used += 1
        best = max(best, metric.norm(f(u) - f(v)) / denom)
    if used == 0:
        raise EstimationError("all sample pairs are degenerate (u == v)")
    return LipschitzEstimate(best, "sampled-pairs", used, True)


def log_lipschitz(f, metric, samples=None, method="sampled-pairs",
                  jacobian=None, linear_map=None):
    """Estimate the one-sided constant
    cal-L_Q[F] = sup <u - v, F(u) - F(v)>_Q / ||u - v||_Q^2 (may be negative).
    """
    _check_method(method)
    if method == "exact-linear":
        if linear_map is None:
            raise EstimationError("exact-linear needs the linear map matrix")
        return LipschitzEstimate(metric.log_norm(linear_map), method, 0, False)
    if method == "hessian-sup":
        if jacobian is None:
            raise EstimationError("hessian-sup needs a jacobian callback")
        pts = list(samples) if samples is not None else []
        if not pts:
            raise EstimationError("empty sample set")
        val = max(metric.log_norm(jacobian(np.asarray(x, dtype=float)))
                  for x in pts)
        return LipschitzEstimate(val, method, len(pts), True)
    pairs = list(samples) if samples is not None else []
    if not pairs:
        raise EstimationError("empty sample set")
    best = -np.inf
    used = 0
    for u, v in pairs:
        u = np.asarray(u, dtype=float)
        v = np.asarray(v, dtype=float)
        d = u - v
        denom = metric.norm(d) ** 2
        if denom == 0.0:
            continue
        used += 1
        best = max(best, metric.inner(d, f(u) - f(v)) / denom)
    if used == 0:
        raise EstimationError("all sample pairs are degenerate (u == v)")
    return LipschitzEstimate(best, "sampled-pairs", used, True)


def sample_cloud(states, n_jitter=10, jitter_rel=0.01, rng=None):
    """Snapshot states plus jittered copies (Gaussian, relative to the
    trajectory amplitude), the default population for sup estimates."""
    states = np.asarray(states, dtype=float)
    if rng is None:
        rng = np.random.default_rng(0)
    amp = np.abs(states).max()
    scale = jitter_rel * (amp if amp > 0.0 else 1.0)
    copies = [states]
    for _ in range(n_jitter):
        copies.append(states + rng.normal(scale=scale, size=states.shape))
    return np.vstack(copies)


def random_pairs(cloud, n_pairs, rng):
    idx = rng.integers(0, cloud.shape[0], size=(int(n_pairs), 2))
    return [(cloud[i], cloud[j]) for i, j in idx if i != j]


def c_alpha(alpha, t):
    """integral_0^t e^{2 alpha tau} d tau, with the alpha -> 0 limit t."""
    if abs(alpha) < ALPHA_SWITCH:
        return float(t)
    with np.errstate(over="ignore"):
        val = float(np.expm1(2.0 * alpha * t) / (2.0 * alpha))
    return val if np.isfinite(val) else np.inf


def big_c_alpha(alpha, t):
    """integral_0^t c_alpha(tau) d tau = (e^{2 alpha t} - 1 - 2 alpha t) /
    (2 alpha)^2, with the alpha -> 0 limit t^2/2."""
    if abs(alpha) < ALPHA_SWITCH:
        return float(0.5 * t * t)
    with np.errstate(over="ignore"):
        val = float(exp_rem2(2.0 * alpha * t) / (2.0 * alpha) ** 2)
    return val if np.isfinite(val) else np.inf


def _trapz_sq_norms(vals, times, metric):
    sq = np.array([metric.norm(v) ** 2 for v in vals])
    return float(np.trapz(sq, times))


def _truncate(traj_times, horizon):
    if horizon is None:
        return traj_times.size
    t_end = traj_times[0] + horizon
    return int(np.searchsorted(traj_times, t_end + 1e-12 * max(1.0, abs(t_end)),
                               side="right"))


@dataclass(frozen=True)
class BoundReport:
    """Projection-error bound with every ingredient exposed.

    eps_x_sq / eps_f_sq are the integrated squared optimal residuals of the
    state and of the energy gradient; the bounds dominate the integrated
    squared state error (Q norm) and output error on [0, T].
    """

    T: float
    eps_x_sq: float
    eps_f_sq: float
    ic_dev_sq: float
    alpha: float
    beta: float
    gamma: float
    delta: float
    lip_f: float
    c_alpha_t: float
    big_c_alpha_t: float
    c_x: float
    c_f: float
    c_0: float
    c_x_out: float
    c_f_out: float
    c_0_out: float
    state_bound: float
    output_bound: float
    measured_state_err_sq: float
    measured_output_err_sq: float
    methods: dict = field(default_factory=dict)


def projection_bound_report(sys, basis, metric, full_traj, red_traj, T=None,
                            method="hessian-sup", n_jitter=10,
                            jitter_rel=0.01, n_pairs=1000, seed=0):
    """Evaluate the a-priori projection bound against measured errors.

    The basis is renormalized internally to the bound's hypothesis
    (V^T Q V = I, V^T W = I); spans, the oblique projector and the lifted
    trajectory are unchanged, only the reduced coordinates are rescaled.
    Nonlinear Lipschitz constants are sampled over the trajectory states
    plus jittered copies; "exact-linear" treats grad H as the constant
    Hessian map (exact for quadratic energies).
    """
    if full_traj.times.shape != red_traj.times.shape or not np.allclose(
            full_traj.times, red_traj.times, rtol=0.0, atol=1e-12):
        raise ComparisonError("full and reduced trajectories use different grids")
    _check_method(method)

    k_end = _truncate(full_traj.times, T)
    times = full_traj.times[:k_end]
    horizon = float(times[-1] - times[0])
    xs = full_traj.states[:k_end]
    ys = full_traj.outputs[:k_end]
    xrs = red_traj.states[:k_end]
    yrs = red_traj.outputs[:k_end]

    # renormalize: V' = V L^{-T}, W' = W L, x_r' = L^T x_r
    gram = basis.V.T @ metric.apply(basis.V)
    l = np.linalg.cholesky(0.5 * (gram + gram.T))
    v = np.linalg.solve(l, basis.V.T).T
    w = basis.W @ l
    xrs_n = xrs @ l  # rows x_r(t)^T L = (L^T x_r)^T

    proj = v @ w.T  # oblique projector, basis independent
    drift = sys.J - sys.R

    from .basis import q_orthonormalize  # local import to avoid a cycle
    v_orth = q_orthonormalize(basis.V, metric)
    w_orth = q_orthonormalize(basis.W, metric)
    pi_v = v_orth @ (metric.apply(v_orth)).T
    pi_w = w_orth @ (metric.apply(w_orth)).T

    grads = np.array([sys.grad_h(x) for x in xs])
    eps_x_sq = _trapz_sq_norms(xs - xs @ pi_v.T, times, metric)
    eps_f_sq = _trapz_sq_norms(grads - grads @ pi_w.T, times, metric)
    ic_dev_sq = float(np.linalg.norm(w.T @ xs[0] - xrs_n[0]) ** 2)

    methods = {}
    if method == "exact-linear":
        hess0 = np.asarray(sys.hess_h(np.zeros(sys.n)), dtype=float)
        lip_f = lipschitz(None, metric, method="exact-linear",
                          linear_map=hess0)
        alpha_est = log_lipschitz(None, metric, method="exact-linear",
                                  linear_map=proj @ drift @ proj.T @ hess0)
    else:
        rng = np.random.default_rng(seed)
        cloud = sample_cloud(xs, n_jitter=n_jitter, jitter_rel=jitter_rel,
                             rng=rng)
        composite = lambda x: proj @ (drift @ (proj.T @ sys.grad_h(x)))
        if method == "hessian-sup":
            if sys.hess_h is None:
                raise EstimationError("hessian-sup needs hess_h on the system")
            lip_f = lipschitz(sys.grad_h, metric, samples=cloud,
                              method="hessian-sup", jacobian=sys.hess_h)
            comp_jac = lambda x: proj @ drift @ proj.T @ sys.hess_h(x)
            alpha_est = log_lipschitz(composite, metric, samples=cloud,
                                      method="hessian-sup", jacobian=comp_jac)
        else:
            pairs = random_pairs(cloud, n_pairs, rng)
            lip_f = lipschitz(sys.grad_h, metric, samples=pairs)
            alpha_est = log_lipschitz(composite, metric, samples=pairs)
    methods["lip_f"] = lip_f.method
    methods["alpha"] = alpha_est.method

    alpha = alpha_est.value
    lf = lip_f.value
    norm_p = metric.op_norm(proj)
    norm_pt = metric.op_norm(proj.T)
    beta = metric.op_norm(proj @ drift) * norm_pt
    gamma = lf * norm_p
    btqb = sys.B.T @ metric.solve(sys.B)
    delta = 2.0 * float(np.linalg.norm(btqb, 2)) * norm_pt**2
    for name in ("beta", "gamma", "delta"):
        methods[name] = "exact-norms"

    ca = c_alpha(alpha, horizon)
    cca = big_c_alpha(alpha, horizon)
    with np.errstate(over="ignore", invalid="ignore"):
        c_x = (2.0 * beta * gamma) ** 2 * cca + 2.0 * norm_p**2
        c_f = (2.0 * beta) ** 2 * cca
        c_0 = 2.0 * ca
        c_x_out = delta * lf**2 * c_x
        c_f_out = delta * (1.0 + lf**2 * c_f)
        c_0_out = delta * lf**2 * c_0
        state_bound = c_x * eps_x_sq + c_f * eps_f_sq + c_0 * ic_dev_sq
        output_bound = c_x_out * eps_x_sq + c_f_out * eps_f_sq + c_0_out * ic_dev_sq
    state_bound = float(state_bound) if np.isfinite(state_bound) else np.inf
    output_bound = float(output_bound) if np.isfinite(output_bound) else np.inf

    lifted = xrs @ basis.V.T
    measured_state = _trapz_sq_norms(xs - lifted, times, metric)
    measured_output = float(np.trapz(np.linalg.norm(ys - yrs, axis=1) ** 2, times))

    return BoundReport(T=horizon, eps_x_sq=eps_x_sq, eps_f_sq=eps_f_sq,
                       ic_dev_sq=ic_dev_sq, alpha=alpha, beta=beta,
                       gamma=gamma, delta=delta, lip_f=lf, c_alpha_t=ca,
                       big_c_alpha_t=cca, c_x=float(c_x), c_f=float(c_f),
                       c_0=float(c_0), c_x_out=float(c_x_out),
                       c_f_out=float(c_f_out), c_0_out=float(c_0_out),
                       state_bound=state_bound, output_bound=output_bound,
                       measured_state_err_sq=measured_state,
                       measured_output_err_sq=measured_output,
                       methods=methods)


@dataclass(frozen=True)
class DeimLemmaReport:
    """Per-sample interpolation bound ||f - P f||_Q <= ||P||_Q * best error."""

    p_norm_q: float
    growth: float
    bounds: np.ndarray
    measured: np.ndarray


def deim_lemma_bound(model, metric, f_samples):
    """Check the interpolation-error lemma on each sample.

    The bound multiplies ||P||_Q with the best Q-norm approximation error
    from span(U); the measured error must never exceed it (hard assertion up
    to roundoff).
    """
    p_norm = model.p_norm_q()
    u = model.U
    bounds = []
    measured = []
    for f in np.atleast_2d(np.asarray(f_samples, dtype=float)):
        best = metric.norm(f - u @ (u.T @ metric.apply(f)))
        meas = metric.norm(f - model.project_full(f))
        bounds.append(p_norm * best)
        measured.append(meas)
    bounds = np.asarray(bounds)
    measured = np.asarray(measured)
    slack = 1e-9 * (1.0 + bounds)
    if np.any(measured > bounds + slack):
        k = int(np.argmax(measured - bounds))
        raise PhredError(
            f"DEIM lemma violated on sample {k}: measured {measured[k]:.6e} "
            f"> bound {bounds[k]:.6e}")
    return DeimLemmaReport(p_norm_q=p_norm, growth=model.growth,
                           bounds=bounds, measured=measured)


@dataclass(frozen=True)
class DeimBoundReport:
    """Pointwise-in-time bound on the DEIM-induced reduced state/output gap."""

    times: np.ndarray
    eps_h: float
    alpha: float
    beta: float
    gamma: float
    delta: float
    rho_min: float
    state_bound: np.ndarray
    output_bound: np.ndarray
    measured_state: np.ndarray
    measured_output: np.ndarray
    state_violations: int
    output_violations: int
    methods: dict = field(default_factory=dict)


def deim_reduction_bound(sys, red, split, deim_model, traj_exact, traj_deim,
                         method="hessian-sup", n_jitter=10, jitter_rel=0.01,
                         n_pairs=1000, seed=0):
    """Bound the gap between the exact-gradient reduced trajectory and the
    DEIM-reduced one sharing the same basis and grid.

    eps_h is the largest sampled interpolation defect of grad h along the
    lifted exact-reduced trajectory; the one-sided constant of the DEIM
    nonlinearity, shifted by the reduced dissipation floor, controls the
    growth rate.  Violations of the bound (possible when the sampled
    constants undershoot the true suprema) are counted, not raised.
    """
    if traj_exact.times.shape != traj_deim.times.shape or not np.allclose(
            traj_exact.times, traj_deim.times, rtol=0.0, atol=1e-12):
        raise ComparisonError("reduced trajectories use different grids")
    _check_method(method)
    if method == "exact-linear":
        raise EstimationError("the DEIM bound has no exact-linear branch "
                              "(the interpolated map is nonlinear)")

    metric = split.metric
    v = red.lift
    times = traj_exact.times
    rel_t = times - times[0]
    lifted = traj_exact.states @ v.T

    def deim_grad_h(xi):
        # P grad h(P^T xi), evaluated through the m interpolation components
        zt = deim_model.project_t(xi)
        vals = split.grad_h_components(zt, deim_model.indices)
        return deim_model.project(vals)

    defects = np.array([metric.norm(split.grad_h_full(xi) - deim_grad_h(xi))
                        for xi in lifted])
    eps_h = float(defects.max())

    proj = v @ red.basis.W.T
    drift = sys.J - sys.R
    pap = proj @ drift @ proj.T
    composite = lambda xi: pap @ deim_grad_h(xi)

    rng = np.random.default_rng(seed)
    cloud = sample_cloud(lifted, n_jitter=n_jitter, jitter_rel=jitter_rel,
                         rng=rng)
    methods = {}
    if method == "hessian-sup":
        if sys.hess_h is None:
            raise EstimationError("hessian-sup needs hess_h on the system")
        q_dense = metric.mat
        # dense P^T (constant) for the chain-rule jacobian P hess_h(P^T xi) P^T
        pt_dense = np.zeros((sys.n, sys.n))
        pt_dense[deim_model.indices, :] = spla.lu_solve(
            deim_model._lu, deim_model.U.T, trans=1)

        def deim_jac(xi):
            zt = deim_model.project_t(xi)
            hz = np.asarray(sys.hess_h(zt), dtype=float) - q_dense
            rows = spla.lu_solve(deim_model._lu, hz[deim_model.indices, :] @ pt_dense)
            return deim_model.U @ rows

        lip_g = lipschitz(None, metric, samples=cloud, method="hessian-sup",
                          jacobian=deim_jac)
        alpha_log = log_lipschitz(None, metric, samples=cloud,
                                  method="hessian-sup",
                                  jacobian=lambda xi: pap @ deim_jac(xi))
    else:
        pairs = random_pairs(cloud, n_pairs, rng)
        lip_g = lipschitz(deim_grad_h, metric, samples=pairs)
        alpha_log = log_lipschitz(composite, metric, samples=pairs)
    methods["lip_deim"] = lip_g.method
    methods["alpha"] = alpha_log.method

    rho_min = float(np.linalg.eigvalsh(red.R_r).min())
    alpha = alpha_log.value - rho_min
    beta = metric.op_norm(pap)
    gamma = 1.0 + lip_g.value
    delta = float(np.linalg.norm(sys.B, 2) * np.linalg.norm(proj, 2))

    with np.errstate(over="ignore", invalid="ignore"):
        if abs(alpha) < ALPHA_SWITCH:
            growth = rel_t.copy()
        else:
            growth = np.expm1(alpha * rel_t) / alpha
        state_bound = beta * growth * eps_h
        output_bound = delta * (1.0 + beta * gamma * growth) * eps_h
    state_bound = np.where(np.isfinite(state_bound), state_bound, np.inf)
    output_bound = np.where(np.isfinite(output_bound), output_bound, np.inf)

    measured_state = np.linalg.norm(traj_exact.states - traj_deim.states, axis=1)
    measured_output = np.linalg.norm(traj_exact.outputs - traj_deim.outputs,
                                     axis=1)
    sl = 1e-9 * (1.0 + state_bound)
    state_viol = int(np.sum(measured_state > state_bound + sl))
    out_viol = int(np.sum(measured_output > output_bound + 1e-9 * (1.0 + output_bound)))
    if state_viol or out_viol:
        warnings.warn("DEIM reduction bound violated at "
                      f"{state_viol}/{out_viol} grid points (state/output); "
                      "the sampled Lipschitz constants likely undersample the "
                      "suprema", stacklevel=2)

    return DeimBoundReport(times=times, eps_h=eps_h, alpha=alpha, beta=beta,
                           gamma=gamma, delta=delta, rho_min=rho_min,
                           state_bound=state_bound, output_bound=output_bound,
                           measured_state=measured_state,
                           measured_output=measured_output,
                           state_violations=state_viol,
                           output_violations=out_viol, methods=methods)
