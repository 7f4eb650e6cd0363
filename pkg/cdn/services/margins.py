"""
Univariate margins and standard normal kernels.

Margins map data onto copula coordinates u = F(x). Normal margins are the
continuous family used throughout; discrete margins (finite consecutive integer
support) feed the finite-difference probability mass function.

All kernels accept scalars or numpy arrays and broadcast.
"""

import logging

import numpy as np
from scipy import special

from .errors import DegenerateSample, OutOfSupport, OutOfUnitInterval, ParamOutOfDomain

logger = logging.getLogger(__name__)

# Copula coordinates of finite points stay inside [U_CLAMP, 1 - U_CLAMP]
U_CLAMP = 1e-15

LOG_SQRT_2PI = 0.5 * np.log(2.0 * np.pi)
TWO_PI = 2.0 * np.pi

# 20-point Gauss-Legendre rule on [-1, 1], negative half (the rule is symmetric)
_GL_NODES = np.array([
    -0.9931285991850949, -0.9639719272779138, -0.9122344282513259,
    -0.8391169718222188, -0.7463319064601508, -0.6360536807265150,
    -0.5108670019508271, -0.3737060887154196, -0.2277858511416451,
    -0.07652652113349733,
])
_GL_WEIGHTS = np.array([
    0.01761400713915212, 0.04060142980038694, 0.06267204833410906,
    0.08327674157670475, 0.1019301198172404, 0.1181945319615184,
    0.1316886384491766, 0.1420961093183821, 0.1491729864726037,
    0.1527533871307259,
])


# --- Standard normal kernel ---

def std_normal_pdf(x):
    x = np.asarray(x, dtype=float)
    return np.exp(-0.5 * x * x - LOG_SQRT_2PI)


def std_normal_log_pdf(x):
    x = np.asarray(x, dtype=float)
    return -0.5 * x * x - LOG_SQRT_2PI


def std_normal_cdf(x):
    return special.ndtr(np.asarray(x, dtype=float))


def std_normal_log_cdf(x):
    return special.log_ndtr(np.asarray(x, dtype=float))


def std_normal_quantile(p):
    return special.ndtri(np.asarray(p, dtype=float))


def bivariate_normal_cdf(h, k, rho):
    """
    P(X <= h, Y <= k) for a standard bivariate normal with correlation rho.

    Drezner/Genz reduction with a fixed 20-point Gauss-Legendre rule,
    vectorised over the points for a single correlation. Infinite limits
    follow the extended-real convention: +inf marginalises, -inf gives 0.
    """
    h, k = np.broadcast_arrays(np.asarray(h, dtype=float), np.asarray(k, dtype=float))
    rho = float(rho)
    out = np.zeros(h.shape)

    h_inf = h == np.inf
    k_inf = k == np.inf
    zero = (h == -np.inf) | (k == -np.inf)

    only_k = h_inf & ~zero
    only_h = k_inf & ~h_inf & ~zero
    out[only_k] = std_normal_cdf(k[only_k])
    out[only_h] = std_normal_cdf(h[only_h])

    finite = ~(h_inf | k_inf | zero)
    if np.any(finite):
        out[finite] = _bvn_finite(h[finite], k[finite], rho)
    return np.clip(out, 0.0, 1.0)


def _bvn_finite(sh, sk, r):
    h = -sh
    k = -sk
    hk = h * k

    if abs(r) < 0.925:
        hs = (h * h + k * k) / 2.0
        asr = np.arcsin(r)
        sn_lo = np.sin(asr * (_GL_NODES + 1.0) / 2.0)
        sn_hi = np.sin(asr * (-_GL_NODES + 1.0) / 2.0)
        total = np.zeros(h.shape)
        for sn in (sn_lo, sn_hi):
            total += np.sum(
                _GL_WEIGHTS * np.exp((sn * hk[:, None] - hs[:, None]) / (1.0 - sn * sn)),
                axis=1,
            )
        return total * asr / (2.0 * TWO_PI) + std_normal_cdf(-h) * std_normal_cdf(-k)

    if r < 0:
        k = -k
        hk = -hk

    bvn = np.zeros(h.shape)
    if abs(r) < 1.0:
        as_ = (1.0 - r) * (1.0 + r)
        a = np.sqrt(as_)
        bs = (h - k) ** 2
        c = (4.0 - hk) / 8.0
        d = (12.0 - hk) / 16.0
        bvn = a * np.exp(-(bs / as_ + hk) / 2.0) * (
            1.0 - c * (bs - as_) * (1.0 - d * bs / 5.0) / 3.0 + c * d * as_ * as_ / 5.0
        )
        b = np.sqrt(bs)
        with np.errstate(over='ignore', invalid='ignore'):
            tail = (
                np.exp(-hk / 2.0) * np.sqrt(TWO_PI) * std_normal_cdf(-b / a) * b
                * (1.0 - c * bs * (1.0 - d * bs / 5.0) / 3.0)
            )
        bvn = bvn - np.where(hk > -160.0, tail, 0.0)

        a = a / 2.0
        cc = c[:, None]
        dd = d[:, None]
        bsc = bs[:, None]
        hkc = hk[:, None]
        with np.errstate(divide='ignore', over='ignore', invalid='ignore'):
            xs = (a * (_GL_NODES + 1.0)) ** 2
            rs = np.sqrt(1.0 - xs)
            bvn = bvn + np.sum(
                a * _GL_WEIGHTS * (
                    np.exp(-bsc / (2.0 * xs) - hkc / (1.0 + rs)) / rs
                    - np.exp(-(bsc / xs + hkc) / 2.0) * (1.0 + cc * xs * (1.0 + dd * xs))
                ),
                axis=1,
            )
            xs = as_ * (-_GL_NODES + 1.0) ** 2 / 4.0
            rs = np.sqrt(1.0 - xs)
            bvn = bvn + np.sum(
                a * _GL_WEIGHTS * np.exp(-(bsc / xs + hkc) / 2.0) * (
                    np.exp(-hkc * (1.0 - rs) / (2.0 * (1.0 + rs))) / rs
                    - (1.0 + cc * xs * (1.0 + dd * xs))
                ),
                axis=1,
            )
        bvn = -bvn / TWO_PI

    if r > 0:
        bvn = bvn + std_normal_cdf(-np.maximum(h, k))
    else:
        bvn = -bvn + np.maximum(0.0, std_normal_cdf(-h) - std_normal_cdf(-k))
    return bvn


def probit_chain_term(v):
    """dΦ⁻¹/dv = 1 / φ(Φ⁻¹(v)); overflows to +inf at the far tails."""
    return np.exp(log_probit_chain_term(v))


def log_probit_chain_term(v):
    v = np.asarray(v, dtype=float)
    if np.any((v <= 0.0) | (v >= 1.0)) or np.any(np.isnan(v)):
        raise OutOfUnitInterval(f'probit chain term needs v in (0, 1), got {v!r}')
    w = std_normal_quantile(v)
    return LOG_SQRT_2PI + 0.5 * w * w


# --- Margins ---

class NormalMargin:
    """Normal margin N(mu, sigma²)."""

    kind = 'normal'

    def __init__(self, mu=0.0, sigma=1.0):
        if not np.isfinite(mu) or not (np.isfinite(sigma) and sigma > 0):
            raise ParamOutOfDomain(f'normal margin needs finite mu and sigma > 0, got ({mu}, {sigma})')
        self.mu = float(mu)
        self.sigma = float(sigma)

    def cdf(self, x):
        return std_normal_cdf((np.asarray(x, dtype=float) - self.mu) / self.sigma)

    def pdf(self, x):
        return np.exp(self.log_pdf(x))

    def log_pdf(self, x):
        z = (np.asarray(x, dtype=float) - self.mu) / self.sigma
        return std_normal_log_pdf(z) - np.log(self.sigma)

    def quantile(self, p):
        return self.mu + self.sigma * std_normal_quantile(p)

    def sample(self, rng, size):
        return rng.normal(self.mu, self.sigma, size=size)

    def to_dict(self):
        return {'type': 'normal', 'mu': self.mu, 'sigma': self.sigma}

    def __eq__(self, other):
        return isinstance(other, NormalMargin) and (self.mu, self.sigma) == (other.mu, other.sigma)

    def __repr__(self):
        return f'NormalMargin(mu={self.mu!r}, sigma={self.sigma!r})'


class DiscreteMargin:
    """Margin on the integers support_min .. support_min + len(pmf) - 1."""

    kind = 'discrete'

    def __init__(self, support_min, pmf):
        pmf = np.asarray(pmf, dtype=float)
        if pmf.ndim != 1 or pmf.size == 0 or np.any(pmf < 0) or abs(pmf.sum() - 1.0) > 1e-9:
            raise ParamOutOfDomain(f'discrete margin needs a probability vector, got {pmf!r}')
        self.support_min = int(support_min)
        self.pmf = pmf / pmf.sum()
        self._cdf = np.minimum(np.cumsum(self.pmf), 1.0)
        self._cdf[-1] = 1.0

    @property
    def support_max(self):
        return self.support_min + self.pmf.size - 1

    def support(self):
        return np.arange(self.support_min, self.support_max + 1)

    def in_support(self, x):
        x = np.asarray(x)
        return (x >= self.support_min) & (x <= self.support_max) & (x == np.round(x))

    def cdf(self, x):
        x = np.floor(np.asarray(x, dtype=float))
        idx = np.clip(x - self.support_min, -1, self.pmf.size - 1).astype(int)
        return np.where(idx < 0, 0.0, self._cdf[np.maximum(idx, 0)])

    def pmf_at(self, x):
        x = np.asarray(x)
        if not np.all(self.in_support(x)):
            raise OutOfSupport(f'{x!r} outside support {self.support_min}..{self.support_max}')
        return self.pmf[(x - self.support_min).astype(int)]

    def quantile(self, p):
        idx = np.searchsorted(self._cdf, np.asarray(p, dtype=float), side='left')
        return self.support_min + np.minimum(idx, self.pmf.size - 1)

    def sample(self, rng, size):
        return self.quantile(rng.random(size))

    def to_dict(self):
        return {'type': 'discrete', 'support_min': self.support_min, 'pmf': self.pmf.tolist()}

    def __repr__(self):
        return f'DiscreteMargin(support_min={self.support_min}, pmf={self.pmf.tolist()!r})'


def margin_from_dict(data):
    if data.get('type') == 'discrete':
        return DiscreteMargin(data['support_min'], data['pmf'])
    return NormalMargin(data.get('mu', 0.0), data.get('sigma', 1.0))


def fit_mle(samples):
    """
    Maximum-likelihood normal margin: sample mean and 1/m standard deviation.

    Raises DegenerateSample for fewer than two values or zero spread.
    """
    values = np.asarray(samples, dtype=float).ravel()
    if values.size < 2:
        raise DegenerateSample(f'need at least 2 samples to fit a margin, got {values.size}')
    sigma = float(values.std())
    if not sigma > 0:
        raise DegenerateSample('all samples are equal; the margin has zero variance')
    return NormalMargin(float(values.mean()), sigma)


def to_copula_coord(margin, x):
    """u = F(x) in the extended reals: +inf -> 1, -inf -> 0."""
    return margin.cdf(x)


def clamped_copula_coord(margin, x):
    """
    Copula coordinate used by inference: finite points are clamped into
    [U_CLAMP, 1 - U_CLAMP], +inf stays exactly 1 (marginalised).
    """
    x = np.asarray(x, dtype=float)
    u = np.clip(to_copula_coord(margin, x), U_CLAMP, 1.0 - U_CLAMP)
    return np.where(x == np.inf, 1.0, u)


def power_coord(u, d):
    """v = u^d clamped like u; u = 1 (marginalised) stays exactly 1."""
    u = np.asarray(u, dtype=float)
    return np.where(u >= 1.0, 1.0, np.clip(u ** d, U_CLAMP, 1.0 - U_CLAMP))
