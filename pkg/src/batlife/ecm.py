"""Second-order equivalent-circuit identification from voltage relaxation.

After charging ends the terminal voltage approaches the open-circuit
voltage from below as two polarization branches decay:

    U(t) = ocv - I*r_e*exp(-t/(r_e*c_e)) - I*r_c*exp(-t/(r_c*c_c)),   t > 0
    U(0) = ocv - I*(r_o + r_e + r_c)

where I is the CV-phase cutoff current, which flows only at the instant
t = 0. The five parameters other than r_o are identified from the t > 0
samples by damped Gauss-Newton least squares over log-resistances and
log-time-constants (positivity for free; capacitances follow as tau/r),
boxed to keep the problem well posed under noise. r_o then follows from
the t = 0 sample:

    r_o = |U(0) - ocv| / I - r_e - r_c      (clamped at zero)

Two-exponential fits are multimodal, so the solver runs a small
deterministic multi-start and keeps the lowest-residual solution. Branch
labels are canonical: the 'e' branch carries the smaller time constant.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .dataset import RelaxationCurve
from .errors import InsufficientDataError, ValidationError

MIN_FIT_SAMPLES = 6

# Near-degenerate branches (a time constant well below the sampling interval
# leaves only a few samples carrying that branch's signal) converge slowly
# along the flat valley; ~400 damped iterations are observed worst case.
MAX_ITERATIONS = 1000
RESIDUAL_REL_TOL = 1e-10
STEP_NORM_TOL = 1e-12

# Amplitude fractions assigned to the fast branch across the multi-start.
_START_SPLITS = (0.3, 0.5, 0.7, 0.9)


@dataclass(frozen=True)
class EcmParams:
    """The six circuit quantities (ohms, farads, volts)."""

    ocv: float
    r_o: float
    r_e: float
    c_e: float
    r_c: float
    c_c: float

    def __post_init__(self):
        if min(self.r_e, self.c_e, self.r_c, self.c_c) <= 0:
            raise ValidationError("polarization resistances and capacitances must be positive")
        if self.r_o < 0:
            raise ValidationError("ohmic resistance cannot be negative")
        if self.tau_e > self.tau_c:
            raise ValidationError(
                "branch labels are canonical: tau_e must not exceed tau_c "
                f"(got {self.tau_e:.6g} > {self.tau_c:.6g})"
            )

    @property
    def tau_e(self) -> float:
        return self.r_e * self.c_e

    @property
    def tau_c(self) -> float:
        return self.r_c * self.c_c

    def as_array(self) -> np.ndarray:
        return np.array([self.ocv, self.r_o, self.r_e, self.c_e, self.r_c, self.c_c])

    @staticmethod
    def names() -> tuple[str, ...]:
        return ("ocv", "r_o", "r_e", "c_e", "r_c", "c_c")


def canonical_branches(r_e, c_e, r_c, c_c):
    """Order the two RC branches so the first has the smaller time constant."""
    if r_e * c_e <= r_c * c_c:
        return r_e, c_e, r_c, c_c
    return r_c, c_c, r_e, c_e


@dataclass(frozen=True)
class FitReport:
    params: EcmParams
    residual_rms_v: float
    iterations: int
    converged: bool
    ro_clamped: bool = False

    def __post_init__(self):
        if self.residual_rms_v < 0:
            raise ValidationError("residual RMS cannot be negative")


def predict_relaxation(params: EcmParams, cutoff_current_a: float, times_s) -> np.ndarray:
    """Evaluate the relaxation model at the given times (seconds)."""
    t = np.asarray(times_s, dtype=float)
    if np.any(t < 0):
        raise ValidationError("relaxation times must be non-negative")
    current = cutoff_current_a
    u = (
        params.ocv
        - current * params.r_e * np.exp(-t / params.tau_e)
        - current * params.r_c * np.exp(-t / params.tau_c)
    )
    return np.where(t == 0.0, u - current * params.r_o, u)


def _model_positive_times(theta: np.ndarray, t: np.ndarray, current: float) -> np.ndarray:
    ocv, log_re, log_taue, log_rc, log_tauc = theta
    r_e, tau_e, r_c, tau_c = np.exp([log_re, log_taue, log_rc, log_tauc])
    return (
        ocv
        - current * r_e * np.exp(-t / tau_e)
        - current * r_c * np.exp(-t / tau_c)
    )


def _jacobian_positive_times(theta: np.ndarray, t: np.ndarray, current: float) -> np.ndarray:
    """Analytic Jacobian of the t > 0 model wrt (ocv, log r_e, log tau_e, log r_c, log tau_c)."""
    _, log_re, log_taue, log_rc, log_tauc = theta
    r_e, tau_e, r_c, tau_c = np.exp([log_re, log_taue, log_rc, log_tauc])
    decay_e = np.exp(-t / tau_e)
    decay_c = np.exp(-t / tau_c)
    jac = np.empty((t.size, 5))
    jac[:, 0] = 1.0
    jac[:, 1] = -current * r_e * decay_e
    jac[:, 2] = -current * r_e * decay_e * (t / tau_e)
    jac[:, 3] = -current * r_c * decay_c
    jac[:, 4] = -current * r_c * decay_c * (t / tau_c)
    return jac


def _fit_bounds(curve: RelaxationCurve, tight: bool) -> tuple[np.ndarray, np.ndarray]:
    """Box constraints for the two-exponential fit.

    The tight box makes the problem well posed under noise: without it,
    multi-exponential fits admit phantom solutions (a huge amplitude paired
    with a time constant far below the sampling interval leaves almost no
    trace on the sampled residual yet absorbs single-sample noise and
    destroys the recovered parameters). Amplitudes are capped by the
    observed relaxation span and time constants confined near the
    observation window. The wide box admits sub-interval time constants and
    is trusted only when the fit interpolates the data exactly.
    """
    t = curve.times_s
    v = curve.voltages_v
    positive = t > 0
    t_pos = t[positive]
    v_pos = v[positive]
    current = curve.cutoff_current_a
    span = max(float(v_pos.max() - v_pos.min()), 1e-4)
    if tight:
        r_hi = 3.0 * span / current
        tau_lo = t_pos[0] / 2.0
        tau_hi = 2.0 * t_pos[-1]
    else:
        r_hi = 1e3 * span / current
        tau_lo = t_pos[0] / 50.0
        tau_hi = 20.0 * t_pos[-1]
    lower = np.array([v.min() - 0.05, math.log(1e-9), math.log(tau_lo),
                      math.log(1e-9), math.log(tau_lo)])
    upper = np.array([v.max() + 0.3, math.log(r_hi), math.log(tau_hi),
                      math.log(r_hi), math.log(tau_hi)])
    return lower, upper


def _damped_gauss_newton(theta0, t, v, current, max_iters, lower, upper):
    """Projected Levenberg-style damped Gauss-Newton.

    Returns (theta, cost, iters, converged). Candidate steps are clipped
    onto the feasible box; non-finite trial costs simply reject the step,
    so floating-point overflow in a wild trial is silenced.
    """
    theta = np.clip(np.asarray(theta0, dtype=float), lower, upper)
    residual = _model_positive_times(theta, t, current) - v
    cost = float(residual @ residual)
    damping = 1e-3
    iterations = 0
    converged = False
    stagnant = 0
    with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
        while iterations < max_iters:
            iterations += 1
            jac = _jacobian_positive_times(theta, t, current)
            grad = jac.T @ residual
            hess = jac.T @ jac
            diag = np.diag(hess).copy()
            diag[diag <= 0.0] = 1.0
            for _ in range(25):
                try:
                    step = np.linalg.solve(hess + damping * np.diag(diag), -grad)
                except np.linalg.LinAlgError:
                    damping *= 4.0
                    continue
                candidate = np.clip(theta + step, lower, upper)
                cand_residual = _model_positive_times(candidate, t, current) - v
                cand_cost = float(cand_residual @ cand_residual)
                if np.isfinite(cand_cost) and cand_cost <= cost:
                    break
                damping *= 4.0
            else:
                converged = True  # damping exhausted: no descent left in the box
                break
            moved = candidate - theta
            theta, residual = candidate, cand_residual
            improvement = cost - cand_cost
            cost = cand_cost
            damping = max(damping / 3.0, 1e-12)
            if improvement <= RESIDUAL_REL_TOL * max(cost, 1e-300):
                converged = True
                break
            if float(np.linalg.norm(moved)) <= STEP_NORM_TOL:
                converged = True
                break
            # Noise-floor crawling: many consecutive marginal relative
            # improvements polish nothing but burn the iteration budget.
            stagnant = stagnant + 1 if improvement <= 1e-7 * cost else 0
            if stagnant >= 6:
                converged = True
                break
    return theta, cost, iterations, converged


def initial_guesses(curve: RelaxationCurve) -> list[np.ndarray]:
    """Deterministic multi-start initializations for the t > 0 fit.

    The asymptote seeds ocv, the first-sample gap seeds the total
    polarization amplitude (split between branches), and the time constants
    are seeded from a log-spaced grid spanning the observation window.
    """
    t = curve.times_s
    v = curve.voltages_v
    positive = t > 0
    t_pos = t[positive]
    v_pos = v[positive]
    current = curve.cutoff_current_a
    ocv0 = float(v_pos[-1])
    amplitude = max(ocv0 - float(v_pos[0]), 1e-6)
    grid = np.geomspace(t_pos[0], t_pos[-1], 4)
    tau_pairs = [(grid[0], grid[2]), (grid[1], grid[3]), (grid[0], grid[3]), (grid[1], grid[2])]
    guesses = []
    for split, (tau_e, tau_c) in zip(_START_SPLITS, tau_pairs):
        r_e = max(split * amplitude / current, 1e-9)
        r_c = max((1.0 - split) * amplitude / current, 1e-9)
        guesses.append(np.array([
            ocv0,
            math.log(r_e), math.log(tau_e),
            math.log(r_c), math.log(tau_c),
        ]))
    return guesses


def _multistart(curve: RelaxationCurve, max_iters: int, tight: bool):
    t = curve.times_s
    positive = t > 0
    t_pos = t[positive]
    v_pos = curve.voltages_v[positive]
    lower, upper = _fit_bounds(curve, tight)
    best = None
    for theta0 in initial_guesses(curve):
        result = _damped_gauss_newton(
            theta0, t_pos, v_pos, curve.cutoff_current_a, max_iters, lower, upper
        )
        if best is None or result[1] < best[1]:
            best = result
    return best


# Residual RMS below which a fit interpolates the data exactly (no noise
# left to exploit), so the wide-box solution is trustworthy.
EXACT_RESIDUAL_V = 1e-9


def fit(curve: RelaxationCurve, max_iters: int = MAX_ITERATIONS) -> FitReport:
    """Identify the six circuit parameters from one relaxation transient.

    Requires at least 6 samples (t = 0 plus five t > 0 points for the
    five-parameter nonlinear fit). The tight-box solution is preferred;
    when it cannot interpolate the data exactly, a wide-box pass runs and
    replaces it only by interpolating exactly itself (noiseless data whose
    time constants fall outside the tight box). Never raises on slow
    convergence: best-effort parameters come back with ``converged=False``.
    """
    if curve.n_samples < MIN_FIT_SAMPLES:
        raise InsufficientDataError(
            f"ECM fit needs at least {MIN_FIT_SAMPLES} relaxation samples, "
            f"got {curve.n_samples}"
        )
    t = curve.times_s
    v = curve.voltages_v
    current = curve.cutoff_current_a
    positive = t > 0
    t_pos = t[positive]

    exact_cost = t_pos.size * EXACT_RESIDUAL_V**2
    best = _multistart(curve, max_iters, tight=True)
    if best[1] > exact_cost:
        wide = _multistart(curve, max_iters, tight=False)
        if wide[1] <= exact_cost:
            best = wide

    theta, cost, iterations, converged = best
    ocv = float(theta[0])
    r_e, tau_e, r_c, tau_c = np.exp(theta[1:])
    c_e = tau_e / r_e
    c_c = tau_c / r_c
    r_e, c_e, r_c, c_c = canonical_branches(r_e, c_e, r_c, c_c)

    v0 = float(v[t == 0.0][0])
    r_o = abs(v0 - ocv) / current - r_e - r_c
    ro_clamped = r_o < 0.0
    r_o = max(r_o, 0.0)

    params = EcmParams(ocv=ocv, r_o=r_o, r_e=r_e, c_e=c_e, r_c=r_c, c_c=c_c)
    residual_rms = math.sqrt(cost / t_pos.size)
    return FitReport(
        params=params,
        residual_rms_v=residual_rms,
        iterations=iterations,
        converged=converged,
        ro_clamped=ro_clamped,
    )
