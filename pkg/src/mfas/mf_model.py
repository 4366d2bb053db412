"""Two-fidelity Kennedy-O'Hagan model: y(x) = eta(x) + delta(x).

``eta`` is a GP over the low-fidelity runs and ``delta`` a GP over the
high-fidelity residuals ``y - mean_eta``. Both GPs work on outputs that
share one affine standardization, so their standard deviations are
directly comparable; everything returned to callers is in raw output units.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .gp_core import CondensedGP, TrainingSet, kernel_matrix
from .inference import ChainConfig, PriorSpec, condense, run_chain


class FidelityLevel(str, enum.Enum):
    LOW = "low"
    HIGH = "high"


@dataclass(frozen=True)
class OutputScaling:
    shift: float = 0.0
    scale: float = 1.0

    @classmethod
    def fit(cls, *values: np.ndarray) -> "OutputScaling":
        v = np.concatenate([np.ravel(x) for x in values])
        std = float(np.std(v))
        return cls(float(np.mean(v)), std if std > 0 else 1.0)

    def forward(self, y):
        return (np.asarray(y, dtype=float) - self.shift) / self.scale

    def inverse(self, y):
        return np.asarray(y, dtype=float) * self.scale + self.shift


@dataclass(frozen=True)
class MultiFidelityModel:
    """Low-fidelity GP, discrepancy GP, and the shared output scaling.

    ``eta.train`` holds the standardized low-fidelity data; ``delta.train``
    holds the standardized residuals at the high-fidelity inputs.
    """

    eta: CondensedGP
    delta: CondensedGP
    scaling: OutputScaling = OutputScaling()

    def __post_init__(self):
        if self.eta.dim != self.delta.dim:
            raise ValueError(f"eta has dimension {self.eta.dim}, delta {self.delta.dim}")

    @property
    def dim(self) -> int:
        return self.eta.dim

    @property
    def n_eta(self) -> int:
        return len(self.eta)

    @property
    def n_y(self) -> int:
        return len(self.delta)

    def predict_many(self, X) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
        """Vectorized :func:`predict_mf` over the rows of X."""
        m_eta, v_eta = self.eta.predict_many(X)
        m_delta, v_delta = self.delta.predict_many(X)
        s2 = self.scaling.scale**2
        mean = self.scaling.inverse(m_eta + m_delta)
        v_eta = v_eta * s2
        v_delta = v_delta * s2
        return mean, v_eta + v_delta, v_eta, v_delta

    def believer_many(self, X_eval, X_bel, level: FidelityLevel) -> np.ndarray:
        """Vectorized :func:`believer_variance`; row i of X_bel is the believer for row i of X_eval."""
        level = FidelityLevel(level)
        _, v_eta = self.eta.predict_many(X_eval)
        _, v_delta = self.delta.predict_many(X_eval)
        if level is FidelityLevel.LOW:
            v_eta = self.eta.augmented_variance(X_eval, X_bel)
        else:
            v_delta = self.delta.augmented_variance(X_eval, X_bel)
        s2 = self.scaling.scale**2
        return v_eta * s2 + v_delta * s2


def discrepancy_targets(eta: CondensedGP, d_y: TrainingSet, scaling: OutputScaling) -> np.ndarray:
    """Standardized high-fidelity outputs minus eta's mean at the same inputs."""
    m_eta, _ = eta.predict_many(d_y.inputs)
    return scaling.forward(d_y.outputs) - m_eta


def fit_mf(
    d_eta: TrainingSet,
    d_y: TrainingSet,
    prior: PriorSpec | None = None,
    chain_config: ChainConfig | None = None,
) -> MultiFidelityModel:
    """Two-stage fit: eta on the low-fidelity data, then delta on the residuals.

    Args:
        d_eta: low-fidelity runs (raw outputs), at least two.
        d_y: high-fidelity runs (raw outputs), at least one.
        prior: prior for both GPs; defaults to :meth:`PriorSpec.default`.
        chain_config: MCMC settings. Its seed is split into two independent
            streams, one per GP.
    """
    if len(d_y) < 1:
        raise ValueError("need at least one high-fidelity point")
    if len(d_eta) < 2:
        raise ValueError("need at least two low-fidelity points")
    if d_eta.dim != d_y.dim:
        raise ValueError(f"low-fidelity dimension {d_eta.dim} != high-fidelity dimension {d_y.dim}")
    prior = prior or PriorSpec.default(d_eta.dim)
    chain_config = chain_config or ChainConfig()
    seed_eta, seed_delta = np.random.SeedSequence(chain_config.seed).generate_state(2)

    scaling = OutputScaling.fit(d_eta.outputs, d_y.outputs)
    eta_train = TrainingSet(d_eta.inputs, scaling.forward(d_eta.outputs))
    eta_chain = run_chain(eta_train, prior, chain_config.with_seed(seed_eta))
    eta = CondensedGP(condense(eta_chain), eta_train)

    delta_train = TrainingSet(d_y.inputs, discrepancy_targets(eta, d_y, scaling))
    delta_chain = run_chain(delta_train, prior, chain_config.with_seed(seed_delta))
    delta = CondensedGP(condense(delta_chain), delta_train)
    return MultiFidelityModel(eta, delta, scaling)


def predict_mf(model: MultiFidelityModel, x_star) -> tuple[float, float, float, float]:
    """Composed prediction at one point.

    Returns:
        (mean, var_total, var_eta, var_delta) in raw output units, with
        ``var_total = var_eta + var_delta``.
    """
    x = np.atleast_1d(np.asarray(x_star, dtype=float)).reshape(1, -1)
    return tuple(float(a[0]) for a in model.predict_many(x))


def assemble_blocked(model: MultiFidelityModel) -> np.ndarray:
    """Block covariance over (high-fidelity residuals, eta at HF inputs, LF runs).

    Layout::

        [[K_y, 0,      0   ],
         [0,   K_u,    K_uw],
         [0,   K_uw^T, K_w ]]

    ``K_y`` uses the discrepancy kernel on the HF inputs; the other blocks use
    the low-fidelity kernel. Diagonal blocks carry their GP's nugget. Values are
    in standardized output units.
    """
    x_hf = model.delta.train.inputs
    z_lf = model.eta.train.inputs
    h_d, h_e = model.delta.hyper, model.eta.hyper
    K_y = kernel_matrix(x_hf, x_hf, h_d) + h_d.nugget**2 * np.eye(len(x_hf))
    K_u = kernel_matrix(x_hf, x_hf, h_e) + h_e.nugget**2 * np.eye(len(x_hf))
    K_w = kernel_matrix(z_lf, z_lf, h_e) + h_e.nugget**2 * np.eye(len(z_lf))
    K_uw = kernel_matrix(x_hf, z_lf, h_e)
    n_y, n_w = len(x_hf), len(z_lf)
    zeros_y = np.zeros((n_y, n_y))
    K = np.block(
        [
            [K_y, zeros_y, np.zeros((n_y, n_w))],
            [zeros_y, K_u, K_uw],
            [np.zeros((n_w, n_y)), K_uw.T, K_w],
        ]
    )
    return 0.5 * (K + K.T)


def believer_variance(model: MultiFidelityModel, x_eval, x_bel, level: FidelityLevel) -> float:
    """Total variance at ``x_eval`` after a hypothetical run at ``x_bel``.

    The believer is appended to eta's inputs for a low-fidelity run and to
    delta's inputs for a high-fidelity run. Hyperparameters are held fixed
    and the other GP is untouched.
    """
    x_eval = np.atleast_1d(np.asarray(x_eval, dtype=float)).reshape(1, -1)
    x_bel = np.atleast_1d(np.asarray(x_bel, dtype=float)).reshape(1, -1)
    return float(model.believer_many(x_eval, x_bel, level)[0])
