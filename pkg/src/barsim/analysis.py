"""Analytical rates for buffer-aided relay selection.

Covers the exponential-integral special function, the effective SNR
densities of the winning links under weighted max-link selection, the
nonlinear flow-balance solver for the optimal weights, closed-form
i.i.d. Rayleigh rates, and their low/high-SNR asymptotics.
"""

import math
from dataclasses import dataclass

import mpmath
import numpy as np
from scipy import integrate, special

from .channel import FadingModel

__all__ = [
    "EULER_MASCHERONI",
    "QuadratureError",
    "MuSolverError",
    "EffectiveDensityContext",
    "MuSolverResult",
    "exp_integral_e1",
    "exp_scaled_e1",
    "expected_log_rate",
    "iid_max_rate_quadrature",
    "solve_mu_star",
    "max_rate_analytical",
    "conv_rate_quadrature",
    "closed_form_rate_ba_iid_rayleigh",
    "closed_form_rate_conv_iid_rayleigh",
    "low_snr_ratio",
    "high_snr_gap",
    "asymptotic_rates",
]

EULER_MASCHERONI = 0.5772156649015329

LN2 = math.log(2.0)

# largest M for which the alternating binomial sums are evaluated; the
# working precision below is sized for this range
_MAX_RELAYS_CLOSED_FORM = 64


class QuadratureError(RuntimeError):
    """Adaptive quadrature failed to reach the requested accuracy."""

    def __init__(self, message, error_estimate=None):
        super().__init__(message)
        self.error_estimate = error_estimate


class MuSolverError(RuntimeError):
    """Newton iteration on the flow-balance system did not converge."""

    def __init__(self, message, last_iterate=None, residual_norm=None):
        super().__init__(message)
        self.last_iterate = last_iterate
        self.residual_norm = residual_norm


def exp_integral_e1(x: float) -> float:
    """First-order exponential integral E1(x) = int_1^inf e^{-xt}/t dt."""
    if not (np.isfinite(x) and x > 0):
        raise ValueError(f"E1 requires x > 0, got {x}")
    return float(special.exp1(x))


def exp_scaled_e1(x: float) -> float:
    """Fused product e^x * E1(x), stable for large x.

    Direct evaluation overflows near x ~ 700; for x >= 50 a continued
    fraction (modified Lentz) is used instead.
    """
    if not (np.isfinite(x) and x > 0):
        raise ValueError(f"requires x > 0, got {x}")
    if x < 50.0:
        return float(np.exp(x) * special.exp1(x))
    # e^x E1(x) = 1 / (x + 1 - 1/(x + 3 - 4/(x + 5 - 9/(...))))
    tiny = 1e-300
    b = x + 1.0
    c = 1.0 / tiny
    d = 1.0 / b
    h = d
    for n in range(1, 200):
        a = -(n * n)
        b += 2.0
        d = b + a * d
        if abs(d) < tiny:
            d = tiny
        c = b + a / c
        if abs(c) < tiny:
            c = tiny
        d = 1.0 / d
        delta = c * d
        h *= delta
        if abs(delta - 1.0) < 1e-15:
            break
    return h


def _rayleigh_pdf(x, mean):
    return np.exp(-x / mean) / mean


def _rayleigh_cdf(x, mean):
    return -np.expm1(-x / mean)


def _cdf_warped(log1p_x, exponent, mean):
    """CDF of an exponential link evaluated at (1+x)^exponent - 1.

    Works in log space: the power can overflow double precision long
    before the CDF distinguishes from 1.
    """
    t = exponent * log1p_x
    if t > 700.0 or (t > 0 and math.expm1(t) / mean > 40.0):
        return 1.0
    return -math.expm1(-math.expm1(t) / mean)


@dataclass(frozen=True)
class EffectiveDensityContext:
    """Fading model plus selection weights; evaluates the densities of
    the winning-link SNRs under weighted max-link selection."""

    model: FadingModel
    mu: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "mu", np.asarray(self.mu, dtype=float))
        if self.mu.shape != (self.model.num_relays,):
            raise ValueError("mu must have one weight per relay")
        if not np.all((self.mu > 0) & (self.mu < 1)):
            raise ValueError("weights must lie strictly inside (0, 1)")

    def pdf_source(self, x: float, k: int) -> float:
        """Density of the k-th source link SNR restricted to slots where
        mu_k * C_Sk wins the weighted argmax."""
        if x <= 0:
            return 0.0
        lx = math.log1p(x)
        mu = self.mu
        out = _rayleigh_pdf(x, self.model.avg_snr_sr[k])
        out *= _cdf_warped(lx, mu[k] / (1.0 - mu[k]), self.model.avg_snr_rd[k])
        for j in range(self.model.num_relays):
            if j == k:
                continue
            out *= _cdf_warped(lx, mu[k] / mu[j], self.model.avg_snr_sr[j])
            out *= _cdf_warped(lx, mu[k] / (1.0 - mu[j]), self.model.avg_snr_rd[j])
        return out

    def pdf_relay(self, x: float, k: int) -> float:
        """Density of the k-th relay-to-destination link SNR restricted
        to slots where (1 - mu_k) * C_kD wins the weighted argmax."""
        if x <= 0:
            return 0.0
        lx = math.log1p(x)
        nu = 1.0 - self.mu[k]
        out = _rayleigh_pdf(x, self.model.avg_snr_rd[k])
        out *= _cdf_warped(lx, nu / self.mu[k], self.model.avg_snr_sr[k])
        for j in range(self.model.num_relays):
            if j == k:
                continue
            out *= _cdf_warped(lx, nu / self.mu[j], self.model.avg_snr_sr[j])
            out *= _cdf_warped(lx, nu / (1.0 - self.mu[j]), self.model.avg_snr_rd[j])
        return out

    def tail_scale(self) -> float:
        """Largest per-link average SNR; sets the quadrature truncation."""
        return float(max(self.model.avg_snr_sr.max(), self.model.avg_snr_rd.max()))


def expected_log_rate(density, tail_scale: float, abs_tol: float = 1e-8) -> float:
    """int_0^inf log2(1+x) * density(x) dx by adaptive quadrature.

    The domain is truncated where the exponential tail mass is below
    1e-12 of the lead density (upper limit ~ 40 * tail_scale).
    """
    upper = max(40.0 * tail_scale, 50.0)
    val, err = integrate.quad(
        lambda x: math.log1p(x) / LN2 * density(x),
        0.0,
        upper,
        epsabs=abs_tol * 1e-2,
        epsrel=1e-10,
        limit=400,
    )
    if err > abs_tol:
        raise QuadratureError(
            f"quadrature error estimate {err:.3e} exceeds tolerance {abs_tol:.3e}",
            error_estimate=err,
        )
    return val


def iid_max_rate_quadrature(num_relays: int, avg_snr: float) -> float:
    """Max rate for i.i.d. links via the max-order-statistic density:
    M * int log2(1+x) f(x) F(x)^{2M-1} dx."""
    m = num_relays
    density = lambda x: _rayleigh_pdf(x, avg_snr) * _rayleigh_cdf(x, avg_snr) ** (2 * m - 1)
    return m * expected_log_rate(density, tail_scale=avg_snr)


@dataclass(frozen=True)
class MuSolverResult:
    mu_star: np.ndarray
    residual_norm: float
    iterations: int


def _flow_residuals(ctx: EffectiveDensityContext) -> np.ndarray:
    """Per-relay imbalance: expected winning source rate minus expected
    winning relay rate."""
    m = ctx.model.num_relays
    scale = ctx.tail_scale()
    res = np.empty(m)
    for k in range(m):
        rate_src = expected_log_rate(lambda x: ctx.pdf_source(x, k), scale)
        rate_rel = expected_log_rate(lambda x: ctx.pdf_relay(x, k), scale)
        res[k] = rate_src - rate_rel
    return res


def solve_mu_star(
    model: FadingModel,
    tolerance: float = 1e-8,
    max_iterations: int = 100,
) -> MuSolverResult:
    """Solve the M-equation flow-balance system for the optimal weights.

    Damped Newton with a central-difference Jacobian, started from the
    symmetric point mu = 1/2 (the exact solution for i.i.d. links).
    Iterates are projected into (0, 1); the warp exponents diverge at the
    boundary.
    """
    m = model.num_relays
    mu = np.full(m, 0.5)
    eps = 1e-4
    fd_step = 1e-4

    def residual(vec):
        return _flow_residuals(EffectiveDensityContext(model=model, mu=vec))

    res = residual(mu)
    norm = float(np.max(np.abs(res)))
    for it in range(1, max_iterations + 1):
        if norm <= tolerance:
            return MuSolverResult(mu_star=mu, residual_norm=norm, iterations=it - 1)
        jac = np.empty((m, m))
        for j in range(m):
            hi = mu.copy()
            lo = mu.copy()
            hi[j] = min(hi[j] + fd_step, 1.0 - eps)
            lo[j] = max(lo[j] - fd_step, eps)
            jac[:, j] = (residual(hi) - residual(lo)) / (hi[j] - lo[j])
        try:
            step = np.linalg.solve(jac, -res)
        except np.linalg.LinAlgError as exc:
            raise MuSolverError(
                f"singular Jacobian at iteration {it}", last_iterate=mu, residual_norm=norm
            ) from exc
        damping = 1.0
        for _ in range(20):
            trial = np.clip(mu + damping * step, eps, 1.0 - eps)
            trial_res = residual(trial)
            trial_norm = float(np.max(np.abs(trial_res)))
            if trial_norm < norm:
                break
            damping *= 0.5
        else:
            raise MuSolverError(
                f"line search stalled at iteration {it} with residual {norm:.3e}",
                last_iterate=mu,
                residual_norm=norm,
            )
        mu, res, norm = trial, trial_res, trial_norm
    if norm <= tolerance:
        return MuSolverResult(mu_star=mu, residual_norm=norm, iterations=max_iterations)
    raise MuSolverError(
        f"no convergence after {max_iterations} iterations (residual {norm:.3e})",
        last_iterate=mu,
        residual_norm=norm,
    )


def max_rate_analytical(model: FadingModel, mu_star: np.ndarray) -> float:
    """Maximum average rate: sum over relays of the expected winning
    relay-to-destination rate at the balanced weights."""
    ctx = EffectiveDensityContext(model=model, mu=np.asarray(mu_star, dtype=float))
    scale = ctx.tail_scale()
    return sum(
        expected_log_rate(lambda x, kk=k: ctx.pdf_relay(x, kk), scale)
        for k in range(model.num_relays)
    )


def conv_rate_quadrature(model: FadingModel) -> float:
    """Conventional best-bottleneck rate by quadrature.

    The per-relay bottleneck SNR min(gamma_Sk, gamma_kD) is exponential
    with harmonic-mean parameter; the protocol rate is half the expected
    log of the max over relays.
    """
    means = 1.0 / (1.0 / model.avg_snr_sr + 1.0 / model.avg_snr_rd)

    def density(x):
        pdfs = np.exp(-x / means) / means
        cdfs = -np.expm1(-x / means)
        total = 0.0
        for k in range(model.num_relays):
            prod = pdfs[k]
            for j in range(model.num_relays):
                if j != k:
                    prod *= cdfs[j]
            total += prod
        return total

    return 0.5 * expected_log_rate(density, tail_scale=float(means.max()))


def _working_precision(num_relays: int):
    # the alternating binomial sum cancels ~ 2M * log10(2) digits
    return mpmath.workdps(30 + int(0.7 * num_relays) + num_relays)


def closed_form_rate_ba_iid_rayleigh(num_relays: int, avg_snr: float) -> float:
    """Closed-form max rate for i.i.d. Rayleigh links:
    M * sum_k C(2M-1,k) (-1)^k / ((1+k) ln 2) e^{(1+k)/snr} E1((1+k)/snr).

    Evaluated in extended precision; the alternating sum cancels
    catastrophically in doubles for larger M.
    """
    _check_closed_form_args(num_relays, avg_snr)
    m = num_relays
    with _working_precision(m):
        snr = mpmath.mpf(avg_snr)
        total = mpmath.mpf(0)
        for k in range(2 * m):
            c = (1 + k) / snr
            term = mpmath.binomial(2 * m - 1, k) * (-1) ** k / (1 + k)
            total += term * mpmath.exp(c) * mpmath.e1(c)
        return float(m * total / mpmath.ln(2))


def closed_form_rate_conv_iid_rayleigh(num_relays: int, avg_snr: float) -> float:
    """Closed-form conventional rate for i.i.d. Rayleigh links:
    (M/2) * sum_k C(M-1,k) (-1)^k / ((1+k) ln 2) e^{2(1+k)/snr} E1(2(1+k)/snr)."""
    _check_closed_form_args(num_relays, avg_snr)
    m = num_relays
    with _working_precision(m):
        snr = mpmath.mpf(avg_snr)
        total = mpmath.mpf(0)
        for k in range(m):
            c = 2 * (1 + k) / snr
            term = mpmath.binomial(m - 1, k) * (-1) ** k / (1 + k)
            total += term * mpmath.exp(c) * mpmath.e1(c)
        return float(m * total / (2 * mpmath.ln(2)))


def _check_closed_form_args(num_relays, avg_snr):
    if num_relays < 1:
        raise ValueError("num_relays must be >= 1")
    if num_relays > _MAX_RELAYS_CLOSED_FORM:
        raise ValueError(f"closed forms supported up to M={_MAX_RELAYS_CLOSED_FORM}")
    if not (np.isfinite(avg_snr) and avg_snr > 0):
        raise ValueError("avg_snr must be positive and finite")


def _harmonic(n: int) -> float:
    return float(sum(1.0 / k for k in range(1, n + 1)))


def low_snr_ratio(num_relays: int) -> float:
    """Low-SNR rate ratio buffer-aided / conventional:
    2 * H(2M) / H(M); equals 3 at M=1 and tends to 2 as M grows."""
    if num_relays < 1:
        raise ValueError("num_relays must be >= 1")
    return 2.0 * _harmonic(2 * num_relays) / _harmonic(num_relays)


def _alternating_log_sum(n: int):
    """sum_k C(n,k) (-1)^k log2(1+k) / (1+k) in extended precision."""
    with mpmath.workdps(30 + n):
        total = mpmath.mpf(0)
        for k in range(n + 1):
            total += mpmath.binomial(n, k) * (-1) ** k * mpmath.log(1 + k, 2) / (1 + k)
        return total


def high_snr_gap(num_relays: int) -> float:
    """High-SNR rate gap (bits/symbol) buffer-aided minus conventional;
    equals 1 at M=1 and tends to 1/2 as M grows."""
    m = num_relays
    if m < 1:
        raise ValueError("num_relays must be >= 1")
    with mpmath.workdps(40 + 2 * m):
        gap = (
            mpmath.mpf(1) / 2
            + mpmath.mpf(m) / 2 * _alternating_log_sum(m - 1)
            - m * _alternating_log_sum(2 * m - 1)
        )
        return float(gap)


def asymptotic_rates(num_relays: int, avg_snr: float, regime: str, protocol: str) -> float:
    """Low/high-SNR rate approximations for both protocols.

    Low SNR: rate ~ snr * H(2M) / (2 ln 2) (buffer-aided) or
    snr * H(M) / (4 ln 2) (conventional). High SNR: the shared
    (ln snr - K_EM)/(2 ln 2) term minus protocol-specific constants.
    """
    m = num_relays
    if m < 1 or not (np.isfinite(avg_snr) and avg_snr > 0):
        raise ValueError("require num_relays >= 1 and avg_snr > 0")
    if regime == "low":
        if protocol == "buffer_aided":
            return avg_snr * _harmonic(2 * m) / (2.0 * LN2)
        if protocol == "conventional":
            return avg_snr * _harmonic(m) / (4.0 * LN2)
    elif regime == "high":
        lead = (math.log(avg_snr) - EULER_MASCHERONI) / (2.0 * LN2)
        if protocol == "buffer_aided":
            return lead - m * float(_alternating_log_sum(2 * m - 1))
        if protocol == "conventional":
            return lead - m / 2.0 * float(_alternating_log_sum(m - 1)) - 0.5
    raise ValueError(f"unknown regime/protocol: {regime!r}, {protocol!r}")
