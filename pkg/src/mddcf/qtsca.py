"""Iterative convex-approximation solver for the SE maximization problem.

The sum-of-ratios objective is handled with the quadratic transform (auxiliary
variables z with the closed-form update z* = sqrt(A)/B), the per-subcarrier
QoS constraints with successively re-linearized quotient minorants, and each
resulting concave subproblem with an in-repo augmented-Lagrangian projected
gradient method. Subproblems are solved in amplitude coordinates q = sqrt(p):
the objective and constraints stay concave, the gradient singularity of
sqrt(p) at zero disappears, and the per-node budgets become Euclidean balls
with a closed-form projection.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .beamforming import EquivalentGains
from .config import NetworkConfig
from .rates import (PowerAllocation, check_nonnegative, dl_denominator,
                    dl_signal_amplitude, sinr_dl_all, sinr_ul_all,
                    spectral_efficiency, ul_denominator, zero_allocation)


class Infeasible(RuntimeError):
    """QoS thresholds cannot be met under the power budgets."""

    def __init__(self, worst_slack: float):
        self.worst_slack = worst_slack
        super().__init__(f"infeasible instance, worst QoS slack {worst_slack:.3e}")


class InnerNonConvergence(RuntimeError):
    def __init__(self, iterations: int, residual: float):
        self.iterations = iterations
        self.residual = residual
        super().__init__(f"inner solver hit {iterations} iterations with "
                         f"constraint violation {residual:.3e}")


@dataclass
class SolverOptions:
    outer_tol: float = 1e-4        # relative objective improvement stop
    max_outer: int = 30
    inner_tol: float = 1e-7        # accepted surrogate-constraint violation
    max_inner: int = 5000          # projected-gradient iteration budget per subproblem
    penalty_growth: float = 10.0   # augmented-Lagrangian penalty escalation
    init_rounds: int = 8           # re-linearization rounds in the feasibility phase
    init_iters: int = 400          # subgradient steps per feasibility round

    def __post_init__(self):
        if min(self.outer_tol, self.inner_tol, self.penalty_growth) <= 0:
            raise ValueError("tolerances and penalty growth must be positive")
        if self.max_outer < 1 or self.max_inner < 1:
            raise ValueError("iteration caps must be >= 1")


@dataclass
class QtScaState:
    p: PowerAllocation
    z_dl: np.ndarray               # (D, M)
    z_ul: np.ndarray               # (D, Mbar)
    varpi_dl: np.ndarray           # (D, M) expansion points
    psi_dl: np.ndarray             # (D, M)
    varpi_ul: np.ndarray           # (D, Mbar)
    psi_ul: np.ndarray             # (D, Mbar)
    t: int = 0
    objective_trace: list = field(default_factory=list)


def sca_surrogate(varpi_t: float, psi_t: float, varpi: float, psi: float) -> float:
    """Linear minorant of the quotient varpi^2/psi, tight at the expansion point."""
    if varpi_t <= 0.0 or psi_t <= 0.0:
        raise ValueError("surrogate expansion point must be strictly positive")
    ratio = varpi_t / psi_t
    return 2.0 * ratio * varpi - ratio**2 * psi


def qt_update_z(gains: EquivalentGains, channels, config: NetworkConfig,
                p: PowerAllocation):
    """Closed-form auxiliary update z* = sqrt(A)/B for every DL and UL ratio."""
    check_nonnegative(p)
    sqrt_a_dl = dl_signal_amplitude(gains, p.p_dl)                      # (D, M)
    b_dl = dl_denominator(p.p_ul, channels.beta_ms_ms, config)          # (D,)
    z_dl = sqrt_a_dl / b_dl[:, None]
    L = config.L
    b_ul = ul_denominator(gains, p.p_dl, channels.beta_ap_ap, config)   # (D, Mbar)
    z_ul = np.sqrt(p.p_ul) * L / b_ul
    return z_dl, z_ul


def qt_objective_value(gains: EquivalentGains, channels, config: NetworkConfig,
                       p: PowerAllocation, z_dl: np.ndarray, z_ul: np.ndarray) -> float:
    """Transformed objective sum ln(1 + 2 z sqrt(A) - z^2 B), un-normalized."""
    sqrt_a_dl = dl_signal_amplitude(gains, p.p_dl)
    b_dl = dl_denominator(p.p_ul, channels.beta_ms_ms, config)[:, None]
    u_dl = 1.0 + 2.0 * z_dl * sqrt_a_dl - z_dl**2 * b_dl
    b_ul = ul_denominator(gains, p.p_dl, channels.beta_ap_ap, config)
    u_ul = 1.0 + 2.0 * z_ul * np.sqrt(p.p_ul) * config.L - z_ul**2 * b_ul
    if np.any(u_dl <= 0.0) or np.any(u_ul <= 0.0):
        return -np.inf
    return float(np.log(u_dl).sum() + np.log(u_ul).sum())


# ---------------------------------------------------------------------------
# Instance view shared by the feasibility phase and the subproblem solver
# ---------------------------------------------------------------------------

class _Problem:
    def __init__(self, gains: EquivalentGains, channels, config: NetworkConfig):
        self.config = config
        self.omega = gains.omega                   # (L, D, M)
        self.upsilon = gains.upsilon               # (L, D, Mbar)
        self.beta_ms = channels.beta_ms_ms
        self.beta_ap = channels.beta_ap_ap
        self.L = config.L
        # chi = 0 makes the QoS constraint vacuous; its SCA surrogate would not
        # be (it fails at p = 0 by the noise term), so the family is dropped.
        self.gamma_dl = np.expm1(config.chi_dl / config.M) if config.chi_dl > 0 else None
        self.gamma_ul = np.expm1(config.chi_ul / config.Mbar) if config.chi_ul > 0 else None

    # q = sqrt(p) coordinates -------------------------------------------------
    def sqrt_a_dl(self, q_dl):
        return np.einsum("ldm,ldm->dm", q_dl, self.omega)

    def b_dl(self, q_ul):
        return dl_denominator(q_ul**2, self.beta_ms, self.config)

    def b_ul(self, q_dl):
        return ul_denominator_from_power(self.upsilon, q_dl**2, self.beta_ap, self.config)

    def grad_combo(self, q_dl, q_ul, a_sig, a_bdl, a_qul, a_bul):
        """Gradient of sum(a_sig*sqrtA) + sum(a_bdl*B_dl) + sum(a_qul*q_ul) + sum(a_bul*B_ul).

        a_sig: (D, M); a_bdl: (D,); a_qul, a_bul: (D, Mbar). Returns (g_dl, g_ul).
        """
        cfg = self.config
        g_dl = a_sig[None, :, :] * self.omega
        mu = np.einsum("dm,ldm->l", a_bul, self.upsilon)
        t_ap = cfg.xi_si_ap * mu + (cfg.xi_iai / cfg.M_sum) * (self.beta_ap @ mu)
        g_dl = g_dl + 2.0 * q_dl * t_ap[:, None, None]
        s_ms = cfg.xi_si_ms * a_bdl + (cfg.xi_imi / cfg.M_sum) * (self.beta_ms @ a_bdl)
        g_ul = a_qul + 2.0 * q_ul * s_ms[:, None]
        return g_dl, g_ul

    def project(self, q_dl, q_ul):
        """Exact projection onto {q >= 0, per-node sum q^2 <= budget}."""
        q_dl = np.maximum(q_dl, 0.0)
        q_ul = np.maximum(q_ul, 0.0)
        q_dl = _ball_cap(q_dl.reshape(self.config.L, -1), self.config.P_l).reshape(q_dl.shape)
        q_ul = _ball_cap(q_ul, self.config.P_d)
        return q_dl, q_ul

    # surrogate QoS constraints (positive value = satisfied) ------------------
    def constraints_dl(self, q_dl, q_ul, r_dl):
        return 2.0 * r_dl * self.sqrt_a_dl(q_dl) - r_dl**2 * self.b_dl(q_ul)[:, None] \
            - self.gamma_dl

    def constraints_ul(self, q_dl, q_ul, sq_ul, v_ul):
        return 2.0 * sq_ul * self.L * q_ul - v_ul * self.b_ul(q_dl) - self.gamma_ul

    def true_sinr(self, q_dl, q_ul):
        pa = PowerAllocation(p_dl=q_dl**2, p_ul=q_ul**2)
        dl = sinr_dl_all_from(self.omega, pa, self.beta_ms, self.config)
        ul = sinr_ul_all_from(self.upsilon, pa, self.beta_ap, self.config)
        return dl, ul


def ul_denominator_from_power(upsilon, p_dl, beta_ap, config):
    dl_sum = p_dl.sum(axis=(1, 2))
    noise = config.xi_si_ap * dl_sum + (config.xi_iai / config.M_sum) * (beta_ap @ dl_sum) \
        + config.sigma2
    return np.einsum("ldm,l->dm", upsilon, noise)


def sinr_dl_all_from(omega, pa, beta_ms, config):
    num = np.einsum("ldm,ldm->dm", np.sqrt(pa.p_dl), omega) ** 2
    return num / dl_denominator(pa.p_ul, beta_ms, config)[:, None]


def sinr_ul_all_from(upsilon, pa, beta_ap, config):
    return pa.p_ul * config.L**2 / ul_denominator_from_power(upsilon, pa.p_dl, beta_ap, config)


def _ball_cap(rows: np.ndarray, budget: float) -> np.ndarray:
    """Scale each row into the ball sum(row^2) <= budget, never overshooting."""
    norms2 = (rows**2).sum(axis=1)
    over = norms2 > budget
    if np.any(over):
        rows = rows.copy()
        scale = np.sqrt(budget / norms2[over])
        rows[over] *= scale[:, None]
        # float rounding can leave a 1-ulp excess; nudge down until exact
        for _ in range(4):
            norms2 = (rows**2).sum(axis=1)
            bad = norms2 > budget
            if not np.any(bad):
                break
            rows[bad] *= 1.0 - 1e-15
    return rows


def _simplex_cap(block: np.ndarray, budget: float) -> np.ndarray:
    """Projection of a flat block onto {p >= 0, sum p <= budget}."""
    x = np.maximum(block, 0.0)
    total = x.sum()
    if total <= budget:
        return x
    # Euclidean projection onto the capped simplex via sorted thresholding
    u = np.sort(x)[::-1]
    css = np.cumsum(u) - budget
    idx = np.arange(1, x.size + 1)
    rho = np.nonzero(u - css / idx > 0)[0][-1]
    tau = css[rho] / (rho + 1.0)
    return np.maximum(x - tau, 0.0)


def _project_power(p_dl, p_ul, config: NetworkConfig):
    p_dl = np.stack([_simplex_cap(p_dl[l].ravel(), config.P_l).reshape(p_dl[l].shape)
                     for l in range(config.L)])
    p_ul = np.stack([_simplex_cap(p_ul[d], config.P_d) for d in range(config.D)])
    return p_dl, p_ul


class _Expansion:
    """Surrogate coefficients r = varpi_t/psi_t per constraint family."""

    def __init__(self, prob: _Problem, p_dl=None, p_ul=None):
        self.r_dl = self.sq_ul = self.v_ul = None
        if p_dl is None:
            # Algorithm start: all expansion points at (1, 1)
            cfg = prob.config
            if prob.gamma_dl is not None:
                self.r_dl = np.ones((cfg.D, cfg.M))
            if prob.gamma_ul is not None:
                self.sq_ul = np.ones((cfg.D, cfg.Mbar))
                self.v_ul = np.ones((cfg.D, cfg.Mbar))
            return
        q_dl, q_ul = np.sqrt(p_dl), np.sqrt(p_ul)
        if prob.gamma_dl is not None:
            varpi = np.maximum(prob.sqrt_a_dl(q_dl), 1e-30)
            psi = prob.b_dl(q_ul)[:, None]
            self.r_dl = varpi / psi
        if prob.gamma_ul is not None:
            varpi = np.maximum(p_ul * prob.L**2, 1e-60)
            psi = prob.b_ul(q_dl)
            self.sq_ul = np.sqrt(varpi) / psi
            self.v_ul = varpi / psi**2


def _slacks(prob: _Problem, exp: _Expansion, p_dl, p_ul):
    """Surrogate QoS slack per constraint; empty arrays for dropped families."""
    q_dl, q_ul = np.sqrt(p_dl), np.sqrt(p_ul)
    s_dl = (prob.constraints_dl(q_dl, q_ul, exp.r_dl).ravel()
            if exp.r_dl is not None else np.zeros(0))
    s_ul = (prob.constraints_ul(q_dl, q_ul, exp.sq_ul, exp.v_ul).ravel()
            if exp.sq_ul is not None else np.zeros(0))
    return s_dl, s_ul


def _true_feasible(prob: _Problem, p_dl, p_ul) -> bool:
    dl, ul = prob.true_sinr(np.sqrt(p_dl), np.sqrt(p_ul))
    if prob.gamma_dl is not None and np.any(dl < prob.gamma_dl):
        return False
    if prob.gamma_ul is not None and np.any(ul < prob.gamma_ul):
        return False
    return True


_INIT_SCALES = (0.5, 1.0, 0.25, 0.1, 0.04, 0.015, 0.005, 0.002, 0.0005)


def _true_min_slack(prob: _Problem, p_dl, p_ul) -> float:
    dl, ul = prob.true_sinr(np.sqrt(p_dl), np.sqrt(p_ul))
    slack = np.inf
    if prob.gamma_dl is not None:
        slack = min(slack, float(dl.min() - prob.gamma_dl))
    if prob.gamma_ul is not None:
        slack = min(slack, float(ul.min() - prob.gamma_ul))
    return slack


def init_feasible(gains: EquivalentGains, channels, config: NetworkConfig,
                  options: Optional[SolverOptions] = None) -> PowerAllocation:
    """Starting point satisfying budgets and all per-subcarrier QoS constraints.

    The dominant feasibility trade is scalar (DL power raises the UL noise
    floor via residual self/cross interference, and vice versa), so uniform
    allocations over a grid of DL/UL budget fractions are screened against
    the true per-subcarrier thresholds first. When no scaled point passes,
    the clipped-slack maximization problem is ascended over the budget set,
    starting at the algorithm's (1,1) surrogate expansion and re-linearizing
    at the incumbent between rounds. Returns a point with all slacks zero
    when one is found; raises Infeasible when the slacks stall below
    tolerance.
    """
    opts = options or SolverOptions()
    prob = _Problem(gains, channels, config)
    if prob.gamma_dl is None and prob.gamma_ul is None:
        return zero_allocation(config)

    def uniform(f_dl, f_ul):
        p_dl = np.full((config.L, config.D, config.M),
                       f_dl * config.P_l / (config.D * config.M))
        p_ul = np.full((config.D, config.Mbar), f_ul * config.P_d / config.Mbar)
        return p_dl, p_ul

    best_slack = -np.inf
    best_point = uniform(0.5, 0.5)
    for f_dl in _INIT_SCALES:
        for f_ul in _INIT_SCALES:
            p_dl, p_ul = uniform(f_dl, f_ul)
            slack = _true_min_slack(prob, p_dl, p_ul)
            if slack >= 0.0:
                return PowerAllocation(p_dl=p_dl, p_ul=p_ul)
            if slack > best_slack:
                best_slack, best_point = slack, (p_dl, p_ul)

    p_dl, p_ul = best_point
    worst = -np.inf
    # the surrogate stays a valid global minorant at any positive expansion
    # point; flooring keeps its gradient alive when an iterate hits zero power
    floor_dl = 1e-8 * config.P_l / (config.D * config.M)
    floor_ul = 1e-8 * config.P_d / config.Mbar
    for rnd in range(opts.init_rounds):
        if rnd == 0:
            exp = _Expansion(prob)
        else:
            exp = _Expansion(prob, np.maximum(p_dl, floor_dl),
                             np.maximum(p_ul, floor_ul))
        p_dl, p_ul, worst = _slack_ascent(prob, exp, p_dl, p_ul, opts.init_iters)
        if _true_feasible(prob, p_dl, p_ul):
            return PowerAllocation(p_dl=p_dl, p_ul=p_ul)
    raise Infeasible(worst)


def _slack_ascent(prob: _Problem, exp: _Expansion, p_dl, p_ul, iters: int):
    """Projected subgradient ascent on sum(min(0, slack)) over the budget set."""
    cfg = prob.config

    def value(pd, pu):
        s_dl, s_ul = _slacks(prob, exp, pd, pu)
        return float(np.minimum(s_dl, 0.0).sum() + np.minimum(s_ul, 0.0).sum())

    def subgrad(pd, pu):
        q_dl, q_ul = np.sqrt(pd), np.sqrt(pu)
        a_sig = np.zeros((cfg.D, cfg.M))
        a_bdl = np.zeros(cfg.D)
        a_qul_sqrt = np.zeros((cfg.D, cfg.Mbar))   # coefficient on sqrt(p_ul)
        a_bul = np.zeros((cfg.D, cfg.Mbar))
        if exp.r_dl is not None:
            viol = prob.constraints_dl(q_dl, q_ul, exp.r_dl) < 0.0
            a_sig = np.where(viol, 2.0 * exp.r_dl, 0.0)
            a_bdl = -(np.where(viol, exp.r_dl**2, 0.0)).sum(axis=1)
        if exp.sq_ul is not None:
            viol = prob.constraints_ul(q_dl, q_ul, exp.sq_ul, exp.v_ul) < 0.0
            a_qul_sqrt = np.where(viol, 2.0 * exp.sq_ul * prob.L, 0.0)
            a_bul = -np.where(viol, exp.v_ul, 0.0)
        # chain rule to p coordinates: d sqrt(p)/dp = 1/(2 sqrt(p))
        g_dl = a_sig[None] * prob.omega / (2.0 * np.maximum(q_dl, 1e-12))
        mu = np.einsum("dm,ldm->l", a_bul, prob.upsilon)
        t_ap = cfg.xi_si_ap * mu + (cfg.xi_iai / cfg.M_sum) * (prob.beta_ap @ mu)
        g_dl = g_dl + t_ap[:, None, None]
        s_ms = cfg.xi_si_ms * a_bdl + (cfg.xi_imi / cfg.M_sum) * (prob.beta_ms @ a_bdl)
        g_ul = a_qul_sqrt / (2.0 * np.maximum(q_ul, 1e-12)) + s_ms[:, None]
        return g_dl, g_ul

    best = value(p_dl, p_ul)
    best_p = (p_dl, p_ul)
    cur_dl, cur_ul = p_dl, p_ul
    for k in range(iters):
        f = value(cur_dl, cur_ul)
        if f >= 0.0:
            return cur_dl, cur_ul, 0.0
        g_dl, g_ul = subgrad(cur_dl, cur_ul)
        gnorm2 = float((g_dl**2).sum() + (g_ul**2).sum())
        if gnorm2 <= 0.0:
            break
        # Polyak step toward the zero-slack target, capped for stability
        step = min(-f / gnorm2, 0.5 * max(cfg.P_l, cfg.P_d) / np.sqrt(gnorm2))
        cur_dl, cur_ul = _project_power(cur_dl + step * g_dl, cur_ul + step * g_ul, cfg)
        f_new = value(cur_dl, cur_ul)
        if f_new > best:
            best, best_p = f_new, (cur_dl, cur_ul)
    return best_p[0], best_p[1], best


# ---------------------------------------------------------------------------
# Convex subproblem: maximize the transformed objective at fixed z subject to
# budgets and the re-linearized QoS surrogates (augmented Lagrangian +
# projected gradient with Armijo backtracking, in amplitude coordinates).
# ---------------------------------------------------------------------------

class _Subproblem:
    def __init__(self, prob: _Problem, exp: _Expansion, z_dl, z_ul):
        self.prob = prob
        self.exp = exp
        self.z_dl = z_dl
        self.z_ul = z_ul

    def pieces(self, q_dl, q_ul):
        prob = self.prob
        u_dl = 1.0 + 2.0 * self.z_dl * prob.sqrt_a_dl(q_dl) \
            - self.z_dl**2 * prob.b_dl(q_ul)[:, None]
        u_ul = 1.0 + 2.0 * self.z_ul * prob.L * q_ul - self.z_ul**2 * prob.b_ul(q_dl)
        c_dl = (prob.constraints_dl(q_dl, q_ul, self.exp.r_dl)
                if self.exp.r_dl is not None else None)
        c_ul = (prob.constraints_ul(q_dl, q_ul, self.exp.sq_ul, self.exp.v_ul)
                if self.exp.sq_ul is not None else None)
        return u_dl, u_ul, c_dl, c_ul

    def objective(self, u_dl, u_ul):
        if np.any(u_dl <= 0.0) or np.any(u_ul <= 0.0):
            return -np.inf
        return float(np.log(u_dl).sum() + np.log(u_ul).sum())

    def al_value(self, u_dl, u_ul, c_dl, c_ul, lam_dl, lam_ul, rho):
        g = self.objective(u_dl, u_ul)
        if not np.isfinite(g):
            return np.inf
        f = -g
        for c, lam in ((c_dl, lam_dl), (c_ul, lam_ul)):
            if c is None:
                continue
            y = np.maximum(0.0, lam - rho * c)
            f += float((y**2 - lam**2).sum()) / (2.0 * rho)
        return f

    def al_grad(self, q_dl, q_ul, u_dl, u_ul, c_dl, c_ul, lam_dl, lam_ul, rho):
        a_sig = 2.0 * self.z_dl / u_dl
        a_bdl = -(self.z_dl**2 / u_dl)
        a_qul = 2.0 * self.prob.L * self.z_ul / u_ul
        a_bul = -(self.z_ul**2 / u_ul)
        if c_dl is not None:
            y = np.maximum(0.0, lam_dl - rho * c_dl)
            a_sig = a_sig + 2.0 * self.exp.r_dl * y
            a_bdl = a_bdl - self.exp.r_dl**2 * y
        if c_ul is not None:
            y = np.maximum(0.0, lam_ul - rho * c_ul)
            a_qul = a_qul + 2.0 * self.prob.L * self.exp.sq_ul * y
            a_bul = a_bul - self.exp.v_ul * y
        g_dl, g_ul = self.prob.grad_combo(q_dl, q_ul, a_sig, a_bdl.sum(axis=1),
                                          a_qul, a_bul)
        return -g_dl, -g_ul


def sca_subproblem(gains: EquivalentGains, channels, config: NetworkConfig,
                   p_t: PowerAllocation, z, options: Optional[SolverOptions] = None,
                   warm=None) -> PowerAllocation:
    """One convex power update at fixed z, expansion points taken from p_t.

    ``warm`` optionally carries the multiplier state of the previous outer
    iteration (a dict, mutated in place); the QoS duals barely move between
    outer passes, so reusing them saves most of the augmented-Lagrangian
    stages.
    """
    opts = options or SolverOptions()
    check_nonnegative(p_t)
    prob = _Problem(gains, channels, config)
    z_dl, z_ul = z
    exp = _Expansion(prob, p_t.p_dl, p_t.p_ul)
    sub = _Subproblem(prob, exp, z_dl, z_ul)

    q_dl, q_ul = prob.project(np.sqrt(p_t.p_dl), np.sqrt(p_t.p_ul))
    warm = warm if warm is not None else {}
    lam_dl = warm.get("lam_dl", np.zeros_like(z_dl))
    lam_ul = warm.get("lam_ul", np.zeros_like(z_ul))
    rho = warm.get("rho", 10.0)
    step = 1.0
    total_iters = 0
    accepted_total = 0
    prev_viol = np.inf

    for stage in range(24):
        q_dl, q_ul, used, accepted, step = _pgd_stage(
            sub, q_dl, q_ul, lam_dl, lam_ul, rho,
            max_iters=min(400, opts.max_inner - total_iters), step0=step)
        total_iters += used
        accepted_total += accepted
        _, _, c_dl, c_ul = sub.pieces(q_dl, q_ul)
        viol = 0.0
        if c_dl is not None:
            lam_dl = np.maximum(0.0, lam_dl - rho * c_dl)
            viol = max(viol, float(np.maximum(0.0, -c_dl).max()))
        if c_ul is not None:
            lam_ul = np.maximum(0.0, lam_ul - rho * c_ul)
            viol = max(viol, float(np.maximum(0.0, -c_ul).max()))
        if viol <= opts.inner_tol:
            break
        if viol > 0.25 * prev_viol:
            rho *= opts.penalty_growth
        prev_viol = viol
        if total_iters >= opts.max_inner:
            raise InnerNonConvergence(total_iters, viol)

    warm["lam_dl"], warm["lam_ul"], warm["rho"] = lam_dl, lam_ul, rho
    if accepted_total == 0:
        return p_t.copy()
    cand = PowerAllocation(p_dl=q_dl**2, p_ul=q_ul**2)
    # monotone-ascent guard: p_t is feasible for its own expansion, so keep it
    # whenever the inexact inner solve failed to improve the fixed-z objective
    if qt_objective_value(gains, channels, config, cand, z_dl, z_ul) < \
            qt_objective_value(gains, channels, config, p_t, z_dl, z_ul):
        return p_t.copy()
    return cand


def _pgd_stage(sub: _Subproblem, q_dl, q_ul, lam_dl, lam_ul, rho, max_iters,
               step0: float = 1.0):
    """Minimize the augmented Lagrangian at fixed multipliers."""
    prob = sub.prob
    u_dl, u_ul, c_dl, c_ul = sub.pieces(q_dl, q_ul)
    f = sub.al_value(u_dl, u_ul, c_dl, c_ul, lam_dl, lam_ul, rho)
    step = step0
    used = 0
    accepted = 0
    stalled = 0
    while used < max_iters:
        used += 1
        g_dl, g_ul = sub.al_grad(q_dl, q_ul, u_dl, u_ul, c_dl, c_ul, lam_dl, lam_ul, rho)
        moved = False
        for _ in range(60):
            nd, nu = prob.project(q_dl - step * g_dl, q_ul - step * g_ul)
            d_dl, d_ul = nd - q_dl, nu - q_ul
            descent = float((g_dl * d_dl).sum() + (g_ul * d_ul).sum())
            if descent >= 0.0:
                break
            u_dl_new, u_ul_new, c_dl_new, c_ul_new = sub.pieces(nd, nu)
            f_new = sub.al_value(u_dl_new, u_ul_new, c_dl_new, c_ul_new,
                                 lam_dl, lam_ul, rho)
            if f_new <= f + 1e-4 * descent:
                stalled = stalled + 1 if -descent <= 1e-9 * (1.0 + abs(f)) else 0
                q_dl, q_ul = nd, nu
                u_dl, u_ul, c_dl, c_ul = u_dl_new, u_ul_new, c_dl_new, c_ul_new
                f = f_new
                step *= 1.5
                moved = True
                accepted += 1
                break
            step *= 0.5
            if step < 1e-18:
                break
        if not moved or stalled >= 2:
            break
    return q_dl, q_ul, used, accepted, max(step, 1e-18)


def qt_sca_solve(gains: EquivalentGains, channels, config: NetworkConfig,
                 options: Optional[SolverOptions] = None):
    """Alternating z / power updates until the SE objective stops improving.

    Returns (PowerAllocation, objective_trace) where the trace holds the
    per-subcarrier-normalized SE after initialization and after every outer
    iteration; it is non-decreasing up to the inner solver's tolerance.
    """
    opts = options or SolverOptions()
    config.validate()
    p = init_feasible(gains, channels, config, opts)
    obj = spectral_efficiency(gains, p, channels, config)
    trace = [obj]
    warm = {}
    for _ in range(opts.max_outer):
        z = qt_update_z(gains, channels, config, p)
        p_new = sca_subproblem(gains, channels, config, p, z, opts, warm=warm)
        obj_new = spectral_efficiency(gains, p_new, channels, config)
        if obj_new < obj:
            p_new, obj_new = p, obj
        trace.append(obj_new)
        improved = (obj_new - obj) / max(abs(obj), 1e-12)
        p, obj = p_new, obj_new
        if improved < opts.outer_tol:
            break
    return p, np.array(trace)
