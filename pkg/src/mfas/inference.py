"""MCMC fitting of GP hyperparameters.

Hyperparameters are sampled in log space, ``theta = [log amplitude,
log beta_1..d, log nugget]``, with random-walk Metropolis. The chain is
condensed into a single hyperparameter vector by the coordinate-wise
median of the post-burn-in samples.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg.lapack import dpotrf, dtrtrs

from .gp_core import JITTER_MAX, JITTER_START, CondensedGP, Hyperparameters, TrainingSet

LOG_2PI = math.log(2.0 * math.pi)


class MCMCError(RuntimeError):
    """Raised when a chain never accepts a proposal."""


@dataclass(frozen=True)
class PriorSpec:
    """Independent Gaussian priors on each log-hyperparameter.

    An infinite scale makes that coordinate's prior flat.
    """

    loc: np.ndarray
    scale: np.ndarray

    def __post_init__(self):
        loc = np.asarray(self.loc, dtype=float).ravel()
        scale = np.asarray(self.scale, dtype=float).ravel()
        if loc.shape != scale.shape:
            raise ValueError("loc and scale must have the same length")
        if loc.size < 3:
            raise ValueError("need at least amplitude, one length scale and nugget")
        if np.any(~(scale > 0)):
            raise ValueError("prior scales must be positive")
        object.__setattr__(self, "loc", loc)
        object.__setattr__(self, "scale", scale)

    @classmethod
    def default(cls, dim: int) -> "PriorSpec":
        loc = np.concatenate([[0.0], np.zeros(dim), [-3.0]])
        scale = np.concatenate([[1.0], np.full(dim, 1.5), [1.0]])
        return cls(loc, scale)

    @classmethod
    def flat(cls, dim: int) -> "PriorSpec":
        return cls(np.zeros(dim + 2), np.full(dim + 2, np.inf))

    @property
    def dim(self) -> int:
        return self.loc.size - 2

    def log_density(self, theta: np.ndarray) -> float:
        finite = np.isfinite(self.scale)
        if not np.any(finite):
            return 0.0
        z = (theta[finite] - self.loc[finite]) / self.scale[finite]
        return float(-0.5 * np.sum(z * z) - np.sum(np.log(self.scale[finite])) - 0.5 * LOG_2PI * z.size)


@dataclass(frozen=True)
class ChainConfig:
    """Sampler settings.

    ``adapt_steps`` proposals are spent tuning the step scales before the
    recorded chain starts; those samples are thrown away.
    """

    length: int = 2000
    burn_in_fraction: float = 0.5
    adapt_steps: int = 500
    adapt_block: int = 50
    initial_step: float = 0.3
    seed: int = 0

    def __post_init__(self):
        if self.length < 100:
            raise ValueError(f"chain length must be >= 100, got {self.length}")
        if not 0.0 <= self.burn_in_fraction < 1.0:
            raise ValueError("burn_in_fraction must be in [0, 1)")
        if self.adapt_steps < 0 or self.adapt_block < 1:
            raise ValueError("invalid adaptation settings")

    def with_seed(self, seed: int) -> "ChainConfig":
        return ChainConfig(
            self.length, self.burn_in_fraction, self.adapt_steps, self.adapt_block, self.initial_step, int(seed)
        )


@dataclass
class Chain:
    samples: np.ndarray
    accept_count: int
    burn_in_fraction: float = 0.5
    step_scales: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        self.samples = np.atleast_2d(np.asarray(self.samples, dtype=float))
        if self.samples.shape[0] < 1:
            raise ValueError("chain must hold at least one sample")
        if not 0 <= self.accept_count <= self.samples.shape[0]:
            raise ValueError("accept_count out of range")
        if not 0.0 <= self.burn_in_fraction < 1.0:
            raise ValueError("burn_in_fraction must be in [0, 1)")

    @property
    def retained(self) -> np.ndarray:
        start = int(math.floor(self.samples.shape[0] * self.burn_in_fraction))
        return self.samples[start:]

    @property
    def acceptance_rate(self) -> float:
        return self.accept_count / self.samples.shape[0]


class _LogPosterior:
    """Log-posterior for repeated evaluation on one training set.

    Calls LAPACK directly; the numpy/scipy wrappers dominate the cost at the
    matrix sizes seen here.
    """

    def __init__(self, train: TrainingSet, prior: PriorSpec):
        if prior.dim != train.dim:
            raise ValueError(f"prior is for dimension {prior.dim}, data has {train.dim}")
        X = train.inputs
        self.sqdiff = (X[:, None, :] - X[None, :, :]) ** 2
        self.y = train.outputs.copy()
        self.n = len(train)
        self.diag = np.diag_indices(self.n)
        finite = np.isfinite(prior.scale)
        self.prior_mask = finite
        self.prior_loc = prior.loc[finite]
        self.prior_inv_scale = 1.0 / prior.scale[finite]
        self.prior_const = float(-np.sum(np.log(prior.scale[finite])) - 0.5 * LOG_2PI * finite.sum())
        self.prior_all_flat = not finite.any()
        self.custom_prior = None if type(prior) is PriorSpec else prior

    def log_prior(self, theta: np.ndarray) -> float:
        if self.custom_prior is not None:
            return self.custom_prior.log_density(theta)
        if self.prior_all_flat:
            return 0.0
        z = (theta[self.prior_mask] - self.prior_loc) * self.prior_inv_scale
        return -0.5 * float(z @ z) + self.prior_const

    def loglik(self, amplitude: float, beta: np.ndarray, nugget: float) -> float:
        s2 = amplitude * amplitude
        K = np.exp(-(self.sqdiff @ beta))
        K *= s2
        K[self.diag] += nugget * nugget
        rel = JITTER_START
        while rel <= JITTER_MAX * (1 + 1e-9):
            Kj = K.copy()
            Kj[self.diag] += rel * s2
            L, info = dpotrf(Kj, lower=1, clean=0, overwrite_a=1)
            if info == 0:
                break
            rel *= 10.0
        else:
            return -math.inf
        z, info = dtrtrs(L, self.y, lower=1)
        if info != 0:
            return -math.inf
        logdet = 2.0 * float(np.sum(np.log(L[self.diag])))
        value = -0.5 * float(z @ z) - 0.5 * logdet - 0.5 * self.n * LOG_2PI
        return value if math.isfinite(value) else -math.inf

    def __call__(self, theta: np.ndarray) -> float:
        if max(abs(float(theta.max())), abs(float(theta.min()))) > 30:
            return -math.inf
        with np.errstate(over="ignore", under="ignore"):
            ll = self.loglik(math.exp(theta[0]), np.exp(theta[1:-1]), math.exp(theta[-1]))
        if ll == -math.inf:
            return ll
        return ll + self.log_prior(theta)


def log_posterior(train: TrainingSet, hyper: Hyperparameters, prior: PriorSpec) -> float:
    """Gaussian marginal log-likelihood of ``train`` plus the log-prior of ``hyper``.

    Returns ``-inf`` when the covariance cannot be factorized.
    """
    post = _LogPosterior(train, prior)
    theta = hyper.to_log()
    prior_part = prior.log_density(theta) if np.all(np.isfinite(theta)) else _prior_with_zero_nugget(prior, theta)
    ll = post.loglik(hyper.amplitude, hyper.inv_length_scales, hyper.nugget)
    if ll == -math.inf or prior_part == -math.inf:
        return -math.inf
    return ll + prior_part


def _prior_with_zero_nugget(prior: PriorSpec, theta: np.ndarray) -> float:
    # log(0) nugget only has support under a flat prior on that coordinate
    if np.isfinite(prior.scale[-1]):
        return -math.inf
    return prior.log_density(np.where(np.isfinite(theta), theta, 0.0))


def metropolis_accept(lp_current: float, lp_proposed: float, u: float) -> bool:
    """Accept when ``u < min(1, exp(lp_proposed - lp_current))``."""
    if lp_proposed == -math.inf:
        return False
    if lp_current == -math.inf:
        return True
    return math.log(u) < lp_proposed - lp_current if u > 0 else True


def acceptance_probability(lp_current: float, lp_proposed: float) -> float:
    if lp_proposed == -math.inf:
        return 0.0
    if lp_current == -math.inf:
        return 1.0
    return min(1.0, math.exp(min(lp_proposed - lp_current, 0.0)))


def run_chain(
    train: TrainingSet,
    prior: PriorSpec | None = None,
    config: ChainConfig | None = None,
    start: np.ndarray | None = None,
) -> Chain:
    """Random-walk Metropolis over the log-hyperparameters.

    Step scales are tuned in blocks toward a 25-40% acceptance rate during an
    adaptation phase, then frozen for the recorded chain.
    """
    prior = prior or PriorSpec.default(train.dim)
    config = config or ChainConfig()
    target = _LogPosterior(train, prior)
    rng = np.random.default_rng(config.seed)

    p = prior.loc.size
    theta = np.array(prior.loc if start is None else start, dtype=float)
    lp = target(theta)
    step = np.full(p, config.initial_step)

    def advance(theta, lp):
        proposal = theta + step * rng.standard_normal(p)
        lp_new = target(proposal)
        if metropolis_accept(lp, lp_new, rng.random()):
            return proposal, lp_new, True
        return theta, lp, False

    n_blocks = config.adapt_steps // config.adapt_block
    for _ in range(n_blocks):
        accepted = 0
        for _ in range(config.adapt_block):
            theta, lp, ok = advance(theta, lp)
            accepted += ok
        rate = accepted / config.adapt_block
        if rate < 0.25:
            step *= 0.6
        elif rate > 0.40:
            step *= 1.5
        np.clip(step, 1e-3, 3.0, out=step)

    samples = np.empty((config.length, p))
    accept_count = 0
    for i in range(config.length):
        theta, lp, ok = advance(theta, lp)
        accept_count += ok
        samples[i] = theta

    if accept_count == 0:
        raise MCMCError(
            f"no proposal accepted in {config.length} steps (step scales {step}); "
            "try a smaller initial_step or more adaptation"
        )
    return Chain(samples, accept_count, config.burn_in_fraction, step.copy())


def chain_median(chain: Chain) -> np.ndarray:
    """Coordinate-wise median of the retained (post-burn-in) samples."""
    retained = chain.retained
    if retained.shape[0] == 0:
        raise ValueError("no samples left after burn-in")
    return np.median(retained, axis=0)


def condense(chain: Chain) -> Hyperparameters:
    """Collapse a chain to one hyperparameter vector (median, back from log space)."""
    return Hyperparameters.from_log(chain_median(chain))


def fit_gp(
    train: TrainingSet,
    prior: PriorSpec | None = None,
    config: ChainConfig | None = None,
    interpolate: bool = False,
) -> CondensedGP:
    chain = run_chain(train, prior, config)
    return CondensedGP(condense(chain), train, interpolate=interpolate)
