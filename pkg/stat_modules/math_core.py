#!/usr/bin/env python3
# ────────────────────────────────────────────────────────────────────────────────
# Statistical Math Core: math_core.py
#
# Random variates and log-densities used by the sampler:
# Beta, Gamma, truncated Gamma (three-strategy cascade), linear density,
# Poisson, plus the seedable RNG contract.
#
# Requires: numpy, scipy
# ────────────────────────────────────────────────────────────────────────────────

import logging
import math
from dataclasses import dataclass
from typing import Tuple

import numpy as np
from scipy.special import betaln, gammainc, gammaincc, gammainccinv, gammaincinv, gammaln, xlog1py, xlogy

from stat_modules.errors import DegenerateTruncationError

logger = logging.getLogger(__name__)

# Numerical stability for log/exp
EPS = 1e-12

RNG_NAME    = "PCG64"
RNG_VERSION = 1

# Truncated-gamma cascade tuning
REJECTION_MAX_TRIES = 100
LINEAR_MAX_TRIES    = 100_000
LINEAR_LOGSPAN      = 1.0     # intervals whose log-density varies less than this go straight to the linear sampler
LINEAR_MAX_SLOPE    = 0.999

STRATEGY_REJECTION = "rejection"
STRATEGY_INVERSE   = "inverse_cdf"
STRATEGY_LINEAR    = "linear"


# ─── RNG contract ─────────────────────────────────────────────────────────────
def make_rng(seed: int) -> np.random.Generator:
    """
    Named, versioned 64-bit generator.
    Args:
        seed (int): non-negative seed
    Returns:
        np.random.Generator backed by PCG64
    """
    return np.random.Generator(np.random.PCG64(int(seed)))


def chain_seed(master_seed: int, k: int) -> int:
    """Seed for chain (or cell) k: master_seed + k."""
    return int(master_seed) + int(k)


# ─── Truncation interval ──────────────────────────────────────────────────────
@dataclass(frozen=True)
class TruncInterval:
    """Open interval (lo, hi) with 0 ≤ lo < hi ≤ +∞."""
    lo: float = 0.0
    hi: float = math.inf

    def __post_init__(self):
        if math.isnan(self.lo) or math.isnan(self.hi):
            raise ValueError("TruncInterval bounds must not be NaN")
        if not (0.0 <= self.lo < self.hi):
            raise ValueError(f"invalid truncation interval ({self.lo}, {self.hi})")

    @property
    def bounded(self) -> bool:
        return math.isfinite(self.hi)

    def contains(self, y: float) -> bool:
        return self.lo < y < self.hi


# ─── Beta / Gamma / Poisson variates ──────────────────────────────────────────
def sample_gamma(alpha: float, beta: float, rng: np.random.Generator) -> float:
    """Gamma(shape=alpha, rate=beta)."""
    if alpha <= 0 or beta <= 0:
        raise ValueError(f"gamma parameters must be positive (alpha={alpha}, beta={beta})")
    return float(rng.standard_gamma(alpha)) / beta


def sample_beta(a: float, b: float, rng: np.random.Generator) -> float:
    """
    Beta(a, b) as z = x / (x + y) with x ~ Gamma(a), y ~ Gamma(b).
    Args:
        a, b (float): positive shapes
    Returns:
        float in the open interval (0, 1)
    """
    if a <= 0 or b <= 0:
        raise ValueError(f"beta shapes must be positive (a={a}, b={b})")
    x = float(rng.standard_gamma(a))
    y = float(rng.standard_gamma(b))
    if x + y == 0.0:
        # both underflowed; only possible for minute shapes
        return 0.5
    z = x / (x + y)
    return min(max(z, np.nextafter(0.0, 1.0)), np.nextafter(1.0, 0.0))


def sample_poisson(mu: float, rng: np.random.Generator) -> int:
    """Poisson(mu); mu = 0 returns 0."""
    if not math.isfinite(mu) or mu < 0:
        raise ValueError(f"Poisson mean must be finite and non-negative (got {mu})")
    if mu == 0:
        return 0
    return int(rng.poisson(mu))


# ─── Linear distribution ──────────────────────────────────────────────────────
def linear_inverse_cdf(u: float, c: float) -> float:
    """
    Inverse CDF of f(x) = (1 + c x) / 2 on [-1, 1]:
        (sqrt(c² - 2c + 4cu + 1) - 1) / c
    c = 0 is the uniform case.
    """
    if abs(c) > 1:
        raise ValueError(f"linear slope must satisfy |c| <= 1 (got {c})")
    if abs(c) < 1e-12:
        return 2.0 * u - 1.0
    disc = c * c - 2.0 * c + 4.0 * c * u + 1.0
    x = (math.sqrt(max(disc, 0.0)) - 1.0) / c
    return min(max(x, -1.0), 1.0)


def sample_linear(c: float, rng: np.random.Generator) -> float:
    """Draw from the linear density (1 + c x) / 2 on [-1, 1]."""
    return linear_inverse_cdf(float(rng.random()), c)


def linear_pdf(x: float, c: float) -> float:
    if x < -1 or x > 1:
        return 0.0
    return 0.5 * (1.0 + c * x)


# ─── Log-densities ────────────────────────────────────────────────────────────
def log_beta_pdf(x: float, a: float, b: float) -> float:
    if not (0.0 < x < 1.0):
        return -math.inf
    return float(xlogy(a - 1.0, x) + xlog1py(b - 1.0, -x) - betaln(a, b))


def log_gamma_pdf(x: float, alpha: float, beta: float) -> float:
    """Gamma(shape alpha, rate beta) log-density; -inf outside (0, ∞)."""
    if not (x > 0.0) or math.isinf(x):
        return -math.inf
    return float(alpha * math.log(beta) + xlogy(alpha - 1.0, x) - beta * x - gammaln(alpha))


def interval_mass(alpha: float, beta: float, lo: float, hi: float) -> Tuple[float, bool]:
    """
    Probability of (lo, hi) under Gamma(alpha, beta).
    Uses the complementary incomplete gamma when the interval sits right of the
    mode, where the regularized P saturates at 1.
    Returns:
        (mass, upper_tail)
    """
    upper = beta * lo >= max(alpha - 1.0, 0.0)
    if upper:
        q_lo = float(gammaincc(alpha, beta * lo))
        q_hi = 0.0 if math.isinf(hi) else float(gammaincc(alpha, beta * hi))
        return q_lo - q_hi, True
    p_lo = float(gammainc(alpha, beta * lo))
    p_hi = 1.0 if math.isinf(hi) else float(gammainc(alpha, beta * hi))
    return p_hi - p_lo, False


def log_trunc_gamma_pdf(x: float, alpha: float, beta: float, iv: TruncInterval) -> float:
    """Gamma log-density renormalized to (iv.lo, iv.hi)."""
    if not iv.contains(x):
        return -math.inf
    mass, _ = interval_mass(alpha, beta, iv.lo, iv.hi)
    if mass <= 0.0:
        return -math.inf
    return log_gamma_pdf(x, alpha, beta) - math.log(mass)


# ─── Truncated gamma sampler ──────────────────────────────────────────────────
def _log_kernel(y: float, alpha: float, beta: float) -> float:
    return float(xlogy(alpha - 1.0, y)) - beta * y


def _log_span(alpha: float, beta: float, lo: float, hi: float) -> float:
    """max - min of the unnormalized log-density over [lo, hi]."""
    ends = (_log_kernel(lo, alpha, beta), _log_kernel(hi, alpha, beta))
    top = max(ends)
    if alpha > 1.0:
        mode = (alpha - 1.0) / beta
        if lo < mode < hi:
            top = _log_kernel(mode, alpha, beta)
    return top - min(ends)


def _sample_by_rejection(alpha, beta, iv, rng):
    for _ in range(REJECTION_MAX_TRIES):
        y = float(rng.standard_gamma(alpha)) / beta
        if iv.contains(y):
            return y
    return None


def _sample_by_inverse_cdf(alpha, beta, iv, rng):
    mass, upper = interval_mass(alpha, beta, iv.lo, iv.hi)
    if not (mass > 0.0) or not math.isfinite(mass):
        return None
    u = float(rng.random())
    with np.errstate(all="ignore"):
        if upper:
            target = float(gammaincc(alpha, beta * iv.lo)) - u * mass
            y = float(gammainccinv(alpha, target)) / beta
        else:
            target = float(gammainc(alpha, beta * iv.lo)) + u * mass
            y = float(gammaincinv(alpha, target)) / beta
    if math.isfinite(y) and iv.contains(y):
        return y
    return None


def _sample_by_linear(alpha, beta, iv, rng):
    """
    Rejection from the linear density mapped onto (lo, hi), slope set by the
    gamma density at the two bounds. Envelope: g(y) ≤ g_max and
    (1 + c x) ≥ 1 - |c|.
    """
    lo, hi = iv.lo, iv.hi
    if not iv.bounded:
        raise DegenerateTruncationError(
            f"linear fallback needs a bounded interval (alpha={alpha}, beta={beta}, lo={lo})")
    if lo == 0.0 and alpha < 1.0:
        raise DegenerateTruncationError("unbounded density at 0 with shape < 1")
    l_lo = _log_kernel(lo, alpha, beta)
    l_hi = _log_kernel(hi, alpha, beta)
    l_max = max(l_lo, l_hi)
    if alpha > 1.0:
        mode = (alpha - 1.0) / beta
        if lo < mode < hi:
            l_max = _log_kernel(mode, alpha, beta)
    if not math.isfinite(l_max):
        raise DegenerateTruncationError(f"no finite density on ({lo}, {hi})")
    diff = l_hi - l_lo
    c = math.tanh(diff / 2.0) if math.isfinite(diff) else math.copysign(1.0, diff)
    c = max(-LINEAR_MAX_SLOPE, min(LINEAR_MAX_SLOPE, c))
    floor = 1.0 - abs(c)
    half = 0.5 * (hi - lo)
    for _ in range(LINEAR_MAX_TRIES):
        x = sample_linear(c, rng)
        y = lo + (x + 1.0) * half
        if not iv.contains(y):
            continue
        accept = math.exp(_log_kernel(y, alpha, beta) - l_max) * floor / (1.0 + c * x)
        if float(rng.random()) < accept:
            return y
    raise DegenerateTruncationError(
        f"linear rejection exhausted {LINEAR_MAX_TRIES} tries on ({lo}, {hi})")


def draw_truncated_gamma(alpha: float, beta: float, iv: TruncInterval,
                         rng: np.random.Generator, threshold: float = 0.1) -> Tuple[float, str]:
    """
    Sample TruncGamma_(lo,hi)(alpha, beta) and report the strategy that produced it.

    Cascade:
      1. plain gamma rejection when P(lo < Y < hi) ≥ threshold
      2. inverse-CDF through the (complementary) incomplete gamma inverse
      3. linear-density rejection for bounded intervals

    Step 2 is skipped when the log-density varies by less than LINEAR_LOGSPAN
    across a bounded interval: there the incomplete-gamma difference cancels
    to a few digits, and the nearly flat density is what the linear sampler
    handles exactly. Gamma(5, 1) on (5.0, 5.01) goes straight to step 3.
    Returns:
        (value, strategy)
    """
    if alpha <= 0 or beta <= 0:
        raise ValueError(f"gamma parameters must be positive (alpha={alpha}, beta={beta})")
    mass, _ = interval_mass(alpha, beta, iv.lo, iv.hi)
    if mass >= threshold:
        y = _sample_by_rejection(alpha, beta, iv, rng)
        if y is not None:
            return y, STRATEGY_REJECTION
    narrow = iv.bounded and _log_span(alpha, beta, iv.lo, iv.hi) < LINEAR_LOGSPAN
    if not narrow:
        y = _sample_by_inverse_cdf(alpha, beta, iv, rng)
        if y is not None:
            return y, STRATEGY_INVERSE
        logger.debug("inverse CDF failed for alpha=%g beta=%g on (%g, %g)", alpha, beta, iv.lo, iv.hi)
    return _sample_by_linear(alpha, beta, iv, rng), STRATEGY_LINEAR


def sample_truncated_gamma(alpha: float, beta: float, iv: TruncInterval,
                           rng: np.random.Generator, threshold: float = 0.1) -> float:
    return draw_truncated_gamma(alpha, beta, iv, rng, threshold)[0]


# ─── Entropy ──────────────────────────────────────────────────────────────────
def entropy(p, base: float = math.e) -> float:
    """
    Shannon entropy -Σ p_k log_base p_k with 0·log 0 = 0.
    Args:
        p (array-like): probability vector
        base (float): logarithm base
    Returns:
        float
    """
    p = np.asarray(p, dtype=float)
    return float(-np.sum(xlogy(p, p)) / math.log(base))
