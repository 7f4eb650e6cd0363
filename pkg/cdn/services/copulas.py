"""
Copula factor kernels in signed log space.

Two families are supported: the n-ary Clayton copula and the bivariate
single-parameter normal copula. For every subset of the scope (a bitmask or
an iterable of scope positions) each kernel returns the logarithm of the
mixed partial derivative, and of its derivative in the copula parameter.

Inputs are batched: arguments have shape (rows, arity) or (arity,), results
are SignedLog values with one entry per row.
"""

import logging
import math

import numpy as np
from scipy.special import logsumexp

from .errors import InvalidMask, InvalidSpec, ParamOutOfDomain, UnsupportedArity
from .margins import (
    bivariate_normal_cdf, std_normal_log_cdf, std_normal_log_pdf, std_normal_quantile,
    LOG_SQRT_2PI,
)

logger = logging.getLogger(__name__)

CLAYTON = 'clayton'
NORMAL_PAIR = 'normal_pair'
KINDS = (CLAYTON, NORMAL_PAIR)

# Smallest Clayton parameter evaluated during learning
CLAYTON_THETA_FLOOR = 1e-6


class SignedLog:
    """
    A real number stored as (ln|x|, sign); sign is 0 exactly when ln|x| = -inf.

    Both fields are numpy arrays of the same shape, so one SignedLog can hold
    a whole batch of values.
    """

    __slots__ = ('log_abs', 'sign')

    def __init__(self, log_abs, sign=None):
        log_abs = np.asarray(log_abs, dtype=float)
        if sign is None:
            sign = np.ones(log_abs.shape)
        log_abs, sign = np.broadcast_arrays(log_abs, np.sign(np.asarray(sign, dtype=float)))
        zero = (sign == 0) | (log_abs == -np.inf) | np.isnan(log_abs)
        self.log_abs = np.where(zero, -np.inf, log_abs)
        self.sign = np.where(zero, 0.0, sign)

    @classmethod
    def from_value(cls, value):
        value = np.asarray(value, dtype=float)
        with np.errstate(divide='ignore'):
            return cls(np.log(np.abs(value)), np.sign(value))

    @classmethod
    def ones(cls, shape):
        return cls(np.zeros(shape))

    @classmethod
    def zeros(cls, shape):
        return cls(np.full(shape, -np.inf), np.zeros(shape))

    @classmethod
    def sum(cls, terms):
        """Signed log-sum-exp over a sequence of SignedLog values."""
        terms = list(terms)
        if not terms:
            raise ValueError('cannot sum an empty sequence of SignedLog values')
        if len(terms) == 1:
            return terms[0]
        logs = np.stack([t.log_abs for t in terms])
        signs = np.stack([t.sign for t in terms])
        with np.errstate(divide='ignore', invalid='ignore'):
            out, sgn = logsumexp(logs, axis=0, b=signs, return_sign=True)
        return cls(out, sgn)

    @property
    def shape(self):
        return self.log_abs.shape

    def value(self):
        return self.sign * np.exp(self.log_abs)

    def is_zero(self):
        return bool(np.all(self.sign == 0))

    def __mul__(self, other):
        if not isinstance(other, SignedLog):
            return NotImplemented
        return SignedLog(self.log_abs + other.log_abs, self.sign * other.sign)

    def __truediv__(self, other):
        if not isinstance(other, SignedLog):
            return NotImplemented
        with np.errstate(invalid='ignore'):
            return SignedLog(self.log_abs - other.log_abs, self.sign * other.sign)

    def __add__(self, other):
        if not isinstance(other, SignedLog):
            return NotImplemented
        return SignedLog.sum([self, other])

    def __neg__(self):
        return SignedLog(self.log_abs, -self.sign)

    def __getitem__(self, index):
        return SignedLog(self.log_abs[index], self.sign[index])

    def __repr__(self):
        return f'SignedLog(log_abs={self.log_abs!r}, sign={self.sign!r})'


def mask_positions(mask, arity):
    """Scope positions selected by a bitmask or an iterable of positions."""
    if isinstance(mask, (int, np.integer)):
        if mask < 0 or mask >> arity:
            raise InvalidMask(f'mask {mask:#b} does not fit a scope of {arity} variables')
        return tuple(p for p in range(arity) if mask >> p & 1)
    positions = tuple(sorted(set(int(p) for p in mask)))
    if positions and (positions[0] < 0 or positions[-1] >= arity):
        raise InvalidMask(f'mask {positions} does not fit a scope of {arity} variables')
    return positions


def _as_rows(args, arity):
    args = np.asarray(args, dtype=float)
    single = args.ndim == 1
    rows = np.atleast_2d(args)
    if rows.shape[-1] != arity:
        raise InvalidSpec(f'expected {arity} arguments per row, got {rows.shape[-1]}')
    return rows, single


def _shaped(result, single):
    return result[0] if single else result


# --- Clayton ---

class ClaytonCopula:
    """C(u) = (Σ u_i^-θ - n + 1)^(-1/θ), θ > 0."""

    kind = CLAYTON

    def __init__(self, theta, arity=2):
        if arity < 2:
            raise UnsupportedArity(f'clayton copula needs arity >= 2, got {arity}')
        if not (np.isfinite(theta) and theta > 0):
            raise ParamOutOfDomain(f'clayton theta must be in (0, inf), got {theta}')
        self.theta = float(theta)
        self.arity = int(arity)

    def cdf(self, u):
        return clayton_log_partial(self, u, 0).value()


def _clayton_log_s(theta, log_u):
    """ln(Σ u_i^-θ - n + 1), pulling out the largest term."""
    t = -theta * log_u
    top = np.argmax(t, axis=1)
    t_max = t[np.arange(t.shape[0]), top]
    ratio = np.exp(t - t_max[:, None]) * -np.expm1(-t)
    ratio[np.arange(t.shape[0]), top] = 0.0
    return t_max + np.log1p(ratio.sum(axis=1)), t


def _clayton_parts(c, u, mask):
    rows, single = _as_rows(u, c.arity)
    positions = mask_positions(mask, c.arity)
    if positions and np.any(rows[:, positions] >= 1.0):
        raise InvalidMask(f'cannot differentiate clayton factor at a marginalised coordinate {positions}')
    with np.errstate(divide='ignore'):
        log_u = np.log(rows)
    log_s, t = _clayton_log_s(c.theta, log_u)
    m = len(positions)
    theta = c.theta
    log_value = (
        sum(math.log1p(k * theta) for k in range(1, m))
        - (1.0 + theta) * log_u[:, positions].sum(axis=1)
        - (1.0 / theta + m) * log_s
    )
    return rows, single, positions, log_u, log_s, t, log_value


def clayton_log_partial(c, u, diff_mask):
    """ln ∂C/∂a for the scope subset a; an empty mask gives ln C(u)."""
    _, single, _, _, _, _, log_value = _clayton_parts(c, u, diff_mask)
    return _shaped(SignedLog(log_value), single)


def clayton_log_param_partial(c, u, diff_mask):
    """∂/∂θ of ∂C/∂a, as (∂C/∂a) · ∂/∂θ ln(∂C/∂a)."""
    _, single, positions, log_u, log_s, t, log_value = _clayton_parts(c, u, diff_mask)
    theta = c.theta
    m = len(positions)
    weights = np.exp(t - log_s[:, None])
    term = (
        sum(k / (1.0 + k * theta) for k in range(1, m))
        - log_u[:, positions].sum(axis=1)
        + log_s / theta ** 2
        + (1.0 / theta + m) * (log_u * weights).sum(axis=1)
    )
    with np.errstate(divide='ignore'):
        result = SignedLog(log_value + np.log(np.abs(term)), np.sign(term))
    return _shaped(result, single)


# --- Bivariate normal ---

class NormalPairCopula:
    """Bivariate normal copula with correlation rho, arguments on the probit scale."""

    kind = NORMAL_PAIR
    arity = 2

    def __init__(self, rho):
        if not (np.isfinite(rho) and -1.0 < rho < 1.0):
            raise ParamOutOfDomain(f'normal_pair rho must be in (-1, 1), got {rho}')
        self.rho = float(rho)

    def cdf(self, v):
        return normal_pair_log_partial(self, probit(v), 0).value()


def probit(v):
    """w = Φ⁻¹(v) with v = 1 mapped to +inf."""
    v = np.asarray(v, dtype=float)
    with np.errstate(divide='ignore'):
        return np.where(v >= 1.0, np.inf, std_normal_quantile(np.minimum(v, 1.0)))


def _normal_log_density(rho, w1, w2):
    s2 = 1.0 - rho * rho
    quad = (w1 * w1 - 2.0 * rho * w1 * w2 + w2 * w2) / (2.0 * s2)
    return -2.0 * LOG_SQRT_2PI - 0.5 * np.log(s2) - quad


def _normal_parts(c, w, mask):
    rows, single = _as_rows(w, 2)
    positions = mask_positions(mask, 2)
    if positions and np.any(rows[:, positions] == np.inf):
        raise InvalidMask(f'cannot differentiate normal factor at a marginalised coordinate {positions}')
    return rows, single, positions


def normal_pair_log_partial(c, w, diff_mask):
    """ln of ∂Φ₂/∂a at probit-scale arguments w."""
    rows, single, positions = _normal_parts(c, w, diff_mask)
    rho = c.rho
    w1, w2 = rows[:, 0], rows[:, 1]
    if not positions:
        with np.errstate(divide='ignore'):
            log_value = np.log(bivariate_normal_cdf(w1, w2, rho))
    elif len(positions) == 1:
        i = positions[0]
        wi, wj = rows[:, i], rows[:, 1 - i]
        log_value = std_normal_log_pdf(wi) + std_normal_log_cdf((wj - rho * wi) / np.sqrt(1.0 - rho * rho))
    else:
        log_value = _normal_log_density(rho, w1, w2)
    return _shaped(SignedLog(log_value), single)


def normal_pair_log_param_partial(c, w, diff_mask):
    """∂/∂ρ of ∂Φ₂/∂a via the Plackett identity ∂Φ₂/∂ρ = f(w₁, w₂; ρ)."""
    rows, single, positions = _normal_parts(c, w, diff_mask)
    rho = c.rho
    s2 = 1.0 - rho * rho
    marginalised = np.any(rows == np.inf, axis=1)
    safe = np.where(np.isinf(rows), 0.0, rows)
    w1, w2 = safe[:, 0], safe[:, 1]
    log_f = _normal_log_density(rho, w1, w2)
    if not positions:
        coef = np.ones(w1.shape)
    elif len(positions) == 1:
        i = positions[0]
        wi, wj = safe[:, i], safe[:, 1 - i]
        coef = (rho * wj - wi) / s2
    else:
        coef = (rho * w1 - w2) * (rho * w2 - w1) / s2 ** 2 + rho / s2
    coef = np.where(marginalised, 0.0, coef)
    with np.errstate(divide='ignore'):
        result = SignedLog(log_f + np.log(np.abs(coef)), np.sign(coef))
    return _shaped(result, single)


# --- Domains and factor-level evaluation on the copula scale ---

def param_domain(kind, arity):
    """Open interval of admissible parameters for a factor kind and arity."""
    if kind == CLAYTON:
        if arity < 2:
            raise UnsupportedArity(f'clayton factors need arity >= 2, got {arity}')
        return (0.0, math.inf)
    if kind == NORMAL_PAIR:
        if arity != 2:
            raise UnsupportedArity(f'normal_pair factors have arity 2, got {arity}')
        return (-1.0, 1.0)
    raise InvalidSpec(f'unknown copula kind {kind!r}')


def in_domain(kind, arity, param):
    lo, hi = param_domain(kind, arity)
    return bool(np.isfinite(param) and lo < param < hi)


def make_copula(kind, param, arity):
    if kind == CLAYTON:
        return ClaytonCopula(param, arity)
    if kind == NORMAL_PAIR:
        if arity != 2:
            raise UnsupportedArity(f'normal_pair factors have arity 2, got {arity}')
        return NormalPairCopula(param)
    raise InvalidSpec(f'unknown copula kind {kind!r}')


def factor_log_partial(kind, param, v, diff_mask, wrt_param=False):
    """
    Partial derivative of a factor on the copula scale v (not the probit scale).

    Normal factors are evaluated at w = Φ⁻¹(v) and multiplied by dw/dv for
    every differentiated slot, so the same v-scale contract holds for both
    families and for models that mix them.
    """
    v = np.asarray(v, dtype=float)
    arity = v.shape[-1]
    copula = make_copula(kind, param, arity)
    if kind == CLAYTON:
        kernel = clayton_log_param_partial if wrt_param else clayton_log_partial
        return kernel(copula, v, diff_mask)

    w = probit(v)
    kernel = normal_pair_log_param_partial if wrt_param else normal_pair_log_partial
    result = kernel(copula, w, diff_mask)
    positions = mask_positions(diff_mask, arity)
    if not positions:
        return result
    w_rows = np.atleast_2d(w)
    chain = np.sum(std_normal_log_pdf(w_rows[:, positions]), axis=1)
    if v.ndim == 1:
        chain = chain[0]
    return SignedLog(result.log_abs - chain, result.sign)


def draw_param(kind, rng):
    """Random parameter: Clayton via Kendall's τ ~ U(0, 0.5), normal ρ ~ U(0, 1)."""
    if kind == CLAYTON:
        tau = rng.uniform(0.0, 0.5)
        return 2.0 * tau / (1.0 - tau)
    if kind == NORMAL_PAIR:
        return rng.uniform(0.0, 1.0)
    raise InvalidSpec(f'unknown copula kind {kind!r}')


def kendall_tau(kind, param):
    """Population Kendall's τ of a bivariate factor."""
    if kind == CLAYTON:
        return param / (param + 2.0)
    return 2.0 / math.pi * math.asin(param)
