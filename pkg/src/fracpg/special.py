"""Mittag-Leffler evaluation on the real axis and fractional-ODE references.

The two-parameter Mittag-Leffler function is evaluated by whichever of two
complementary representations can *certify* a relative accuracy of 1e-10:

* the algebraic large-negative-argument expansion, truncated where its terms
  are jointly smallest.  Its error certificate is the size of the first two
  omitted terms (two, so that an accidental near-zero of a reciprocal gamma
  factor cannot fake a tiny bound) plus, for orders above 2/3, the envelope
  ``(2/a) * exp(|z|**(1/a) * cos(pi/a))`` of the exponentially small
  oscillatory contribution, which was measured against integral
  representations and is absent on the negative axis below order 2/3;
* the defining power series.  In floating point its accuracy is limited by
  cancellation whose size is exactly the largest term, ``~exp(|z|**(1/a))``;
  once that costs more than a couple of digits the summation runs in `mpmath`
  with the working precision sized from that exponent.  Reciprocal-gamma
  coefficient tables are cached per ``(order, shift, precision)`` — the
  convolution reference below evaluates thousands of nearby arguments — and
  the precision is quantized so that nearby arguments share one table.

Failure to certify raises ``NumericError`` instead of returning digits that
are not there.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Dict, List, Tuple

import mpmath as mp
import numpy as np
from scipy import integrate
from scipy.special import gammaln, rgamma

from .errors import NumericError
from .sources import Constant, TimeSource, source_values

__all__ = ["MittagLefflerParams", "mittag_leffler", "ode_reference"]

_TARGET = 1e-11  # internal certification target (the public promise is 1e-10)
_MAX_DPS = 1500
_OVERFLOW_EXP = 690.0  # ln of the largest representable double, with margin
_DOUBLE_CANCEL = 4.0  # largest-term exponent still safe in double precision

# cached mpmath reciprocal-gamma tables: (alpha, beta, dps) -> coefficients
_COEFFS: Dict[Tuple[float, float, int], List] = {}


@dataclass(frozen=True)
class MittagLefflerParams:
    """Order and shift of the two-parameter Mittag-Leffler function."""

    alpha: float
    beta: float

    def __post_init__(self) -> None:
        if not (np.isfinite(self.alpha) and self.alpha > 0.0):
            raise ValueError(f"order must be positive, got {self.alpha}")
        if not np.isfinite(self.beta):
            raise ValueError(f"shift must be finite, got {self.beta}")


def _asymptotic_negative(alpha: float, beta: float, z: float):
    """Algebraic tail sum with an honest error certificate, or ``None``.

    Returns ``(value, error_bound)``; the bound covers truncation (first two
    omitted terms) and the exponentially small contribution for alpha > 2/3.
    """
    terms: List[float] = []
    sizes: List[float] = []
    pair_floor = math.inf
    zk = 1.0
    for k in range(1, 400):
        zk /= z
        if zk == 0.0:
            break
        term = -zk * rgamma(beta - k * alpha)
        if not math.isfinite(term):
            break
        terms.append(term)
        sizes.append(abs(term))
        if len(sizes) >= 2:
            pair = max(sizes[-1], sizes[-2])
            pair_floor = min(pair_floor, pair)
            if pair > 1e8 * pair_floor:
                break
    n = len(terms)
    if n == 0:
        return None
    if n < 3:
        value = math.fsum(terms)
        bound = min(sizes)
    else:
        # truncate where the two following terms are jointly smallest
        bounds = [sizes[m] + sizes[m + 1] for m in range(1, n - 1)]
        best = min(range(len(bounds)), key=bounds.__getitem__)
        value = math.fsum(terms[: best + 1])
        bound = bounds[best]
    if alpha > 2.0 / 3.0:
        exponent = abs(z) ** (1.0 / alpha) * math.cos(math.pi / alpha)
        bound += (2.0 / alpha) * math.exp(exponent)
    return value, bound


def _series_negative_double(alpha: float, beta: float, z: float) -> float:
    """Power series for modestly negative z, exactly summed term list."""
    terms = [float(rgamma(beta))]
    power = 1.0
    for k in range(1, 20000):
        power *= z
        term = power * rgamma(alpha * k + beta)
        terms.append(term)
        if abs(term) <= 1e-30 and alpha * k + beta > 2.0:
            return math.fsum(terms)
    raise NumericError("power series did not converge in double precision")


def _series_positive(alpha: float, beta: float, z: float) -> float:
    """Power series for z > 0: all terms positive, summed from log sizes."""
    log_z = math.log(z)
    total = 0.0
    log_peak = -math.inf
    for k in range(200000):
        log_term = k * log_z - gammaln(alpha * k + beta)
        log_peak = max(log_peak, log_term)
        total += math.exp(log_term)
        if log_term < log_peak - 45.0 and alpha * k + beta > 2.0:
            return total
    raise NumericError("power series did not converge in double precision")


def _coeff_table(alpha: float, beta: float, dps: int, n: int) -> List:
    """Reciprocal-gamma coefficients 1/Gamma(alpha*k + beta), k = 0..n-1."""
    table = _COEFFS.setdefault((alpha, beta, dps), [])
    if len(table) < n:
        with mp.workdps(dps):
            a = mp.mpf(alpha)
            b = mp.mpf(beta)
            for k in range(len(table), n):
                table.append(mp.rgamma(a * k + b))
    return table


def _series_boosted(alpha: float, beta: float, z: float, cancel_exp: float) -> float:
    """Power series in mpmath with precision sized to beat the cancellation."""
    digits = int(cancel_exp * 0.4343) + 1
    if digits + 30 > _MAX_DPS:
        raise NumericError(
            f"Mittag-Leffler at order {alpha}, argument {z} would need "
            f"~{digits + 30} digits; refusing rather than return noise"
        )
    # quantize so that nearby arguments reuse one coefficient table
    dps = 60 * math.ceil((digits + 30) / 60)
    hard_cap = 400 + int(8.0 * cancel_exp / alpha)
    coeffs = _coeff_table(alpha, beta, dps, min(hard_cap, 512))
    with mp.workdps(dps):
        zz = mp.mpf(z)
        total = mp.mpf(0)
        power = mp.mpf(1)
        floor = mp.mpf(10) ** (-dps)
        for k in range(hard_cap):
            if k == len(coeffs):
                coeffs = _coeff_table(alpha, beta, dps, min(hard_cap, k + 512))
            term = power * coeffs[k]
            total += term
            power *= zz
            if k > 4 and abs(term) < floor * max(1, abs(total)):
                return float(total)
    raise NumericError("boosted power series did not converge")


def mittag_leffler(params: MittagLefflerParams, z: float) -> float:
    """Two-parameter Mittag-Leffler function E(z) to 1e-10 relative accuracy.

    Supported range: order in [0.1, 1], shift in (0, 4), real ``z <= 5``.
    Arguments outside raise ``ValueError``; arguments whose value cannot be
    certified (or represented) in double precision raise ``NumericError``.
    """
    alpha, beta = params.alpha, params.beta
    if not 0.1 <= alpha <= 1.0:
        raise ValueError(f"supported order range is [0.1, 1], got {alpha}")
    if not 0.0 < beta < 4.0:
        raise ValueError(f"supported shift range is (0, 4), got {beta}")
    if not np.isfinite(z) or z > 5.0:
        raise ValueError(f"argument must be a real number <= 5, got {z}")
    if z == 0.0:
        return float(rgamma(beta))
    if alpha == 1.0:
        if beta == 1.0:
            return math.exp(z)
        if beta == 2.0:
            return math.expm1(z) / z
        # other shifts fall through to the generic machinery
    if z > 0.0:
        if z ** (1.0 / alpha) > _OVERFLOW_EXP:
            raise NumericError(
                f"E(z) overflows double precision for order {alpha} at z={z}"
            )
        return _series_positive(alpha, beta, z)
    if z <= -1.5:
        attempt = _asymptotic_negative(alpha, beta, z)
        if attempt is not None:
            value, bound = attempt
            if bound <= _TARGET * abs(value):
                return value
    cancel_exp = abs(z) ** (1.0 / alpha)
    if cancel_exp <= _DOUBLE_CANCEL:
        return _series_negative_double(alpha, beta, z)
    return _series_boosted(alpha, beta, z, cancel_exp)


def _convolution_reference(
    alpha: float, lam: float, source: TimeSource, t: float, tol: float
) -> float:
    """Adaptive convolution of the relaxation kernel against the source.

    The solution operator is ``u(t) = int_0^t k(s) f(t-s) ds`` with kernel
    ``k(s) = s^(alpha-1) E(-lam*s^alpha)`` at shift ``alpha``.  The algebraic
    factor ``s^(alpha-1)`` goes into the quadrature's own algebraic-weight
    rule; the Mittag-Leffler factor is bounded and continuous at zero.
    """
    kernel_shift = MittagLefflerParams(alpha, alpha)

    def smooth_part(s: float) -> float:
        return mittag_leffler(kernel_shift, -lam * s**alpha) * float(
            source_values(source, t - s)
        )

    value, abserr = integrate.quad(
        smooth_part,
        0.0,
        t,
        weight="alg",
        wvar=(alpha - 1.0, 0.0),
        epsabs=tol * max(t**alpha, 1e-3),
        epsrel=tol,
        limit=300,
    )
    if abserr > 10.0 * tol * max(abs(value), t**alpha):
        raise NumericError(
            f"convolution reference did not reach tolerance {tol} at t={t} "
            f"(estimated error {abserr:.2e})"
        )
    return value


def _classical_reference(lam: float, source: TimeSource, t: float, tol: float) -> float:
    """Order-one limit: integrating-factor solution of u' + lam*u = f."""
    if isinstance(source, Constant):
        if lam == 0.0:
            return source.value * t
        return source.value * (-math.expm1(-lam * t)) / lam
    value, abserr = integrate.quad(
        lambda s: math.exp(-lam * (t - s)) * float(source_values(source, s)),
        0.0,
        t,
        epsabs=tol,
        epsrel=tol,
        limit=200,
    )
    if abserr > 10.0 * tol * max(abs(value), 1e-6):
        raise NumericError("classical reference quadrature failed")
    return value


def ode_reference(
    alpha: float,
    lam: float,
    source: TimeSource,
    t: float,
    tol: float = 1e-10,
) -> float:
    """High-accuracy solution of ``D^alpha u + lam*u = f, u(0) = 0`` at time t.

    Constant sources use the closed form ``c * t^alpha * E(-lam t^alpha)`` at
    shift ``alpha + 1``; other catalog sources go through the adaptive
    convolution.  ``alpha = 1`` is a test-only classical shim.
    """
    if lam < 0.0 or not np.isfinite(lam):
        raise ValueError(f"decay coefficient must be nonnegative, got {lam}")
    if t < 0.0:
        raise ValueError(f"time must be nonnegative, got {t}")
    if t == 0.0:
        return 0.0
    if alpha == 1.0:
        return _classical_reference(lam, source, t, tol)
    if not 0.1 <= alpha < 1.0:
        raise ValueError(f"supported order range is [0.1, 1], got {alpha}")
    if isinstance(source, Constant):
        shifted = MittagLefflerParams(alpha, alpha + 1.0)
        return source.value * t**alpha * mittag_leffler(shifted, -lam * t**alpha)
    return _convolution_reference(alpha, lam, source, t, tol)
