"""Training objectives, the candidate-distance metric, and the optimizer.

Three objectives over T latent samples: the plain conditional-VAE bound
(mean NLL + KL), the best-of-many bound (min NLL + KL), and the
diversity-sensitive variant that additionally rewards the minimum pairwise
distance among the T decoded candidates, hinged at a cap so diversity cannot
dominate likelihood:

    total = min(nll) + kl - lambda_div * min(min_pairwise_distance, delta_clip)

All loss functions accept either Tensors (training, differentiable) or plain
floats; LossBreakdown always records plain floats alongside the live total.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .net import tape as T
from .net.model import PAD_ID, DistributionSeq, LatentGaussian, ModelParameters
from .net.tape import ShapeError, Tensor

NLL_FLOOR = 1e-12
_NORM_GUARD = 1e-24  # keeps sqrt differentiable when two steps coincide


class ConfigError(ValueError):
    pass


class NaNError(FloatingPointError):
    """A non-finite gradient aborted the optimizer step."""


@dataclass
class SamplerConfig:
    T_train: int = 2
    T_infer: int = 100
    lambda_div: float = 1.0
    delta_clip: float = 1.0

    def __post_init__(self) -> None:
        if self.T_train < 1:
            raise ConfigError("T_train must be >= 1")
        if self.T_infer < 1:
            raise ConfigError("T_infer must be >= 1")
        if self.lambda_div < 0 or self.delta_clip <= 0:
            raise ConfigError("lambda_div must be >= 0 and delta_clip > 0")


@dataclass
class LossBreakdown:
    nll_per_sample: list[float]
    kl: float
    diversity_term: float
    total: Tensor | float

    @property
    def total_value(self) -> float:
        return float(self.total)

    def as_dict(self) -> dict:
        return {
            "nll_per_sample": self.nll_per_sample,
            "kl": self.kl,
            "diversity_term": self.diversity_term,
            "total": self.total_value,
        }


def kl_std_normal(q: LatentGaussian) -> Tensor:
    """Closed-form KL(q || N(0, I)) for a diagonal Gaussian: always >= 0."""
    var = T.exp(q.log_var)
    inner = var + q.mu * q.mu - 1.0 - q.log_var
    return T.tsum(inner) * 0.5


def nll(dist: DistributionSeq, y_ids) -> Tensor:
    """Sum of -log p(token) over the teacher-forced steps, _eos_ included.

    Probabilities are floored at 1e-12 so degenerate predictions stay finite.
    """
    y_ids = np.asarray(y_ids, dtype=np.int64)
    if len(dist) != len(y_ids):
        raise ShapeError(f"distribution has {len(dist)} steps, target has {len(y_ids)}")
    picked = [T.clamp_min(dist.probs[t][0, int(y_ids[t])], NLL_FLOOR)
              for t in range(len(y_ids))]
    total = T.log(picked[0])
    for p in picked[1:]:
        total = total + T.log(p)
    return -total


def _mean(values):
    total = values[0]
    for v in values[1:]:
        total = total + v
    return total / len(values)


def cvae_loss(nlls, kl) -> LossBreakdown:
    """Monte-Carlo conditional-VAE bound: mean NLL over samples plus KL."""
    total = _mean(list(nlls)) + kl
    return LossBreakdown([float(v) for v in nlls], float(kl), 0.0, total)


def bms_loss(nlls, kl) -> LossBreakdown:
    """Best-of-many bound: only the best sample pays the reconstruction bill."""
    best = min(nlls, key=float)
    total = best + kl
    return LossBreakdown([float(v) for v in nlls], float(kl), 0.0, total)


def _pad_step(vocab_size: int) -> np.ndarray:
    step = np.zeros((1, vocab_size))
    step[0, PAD_ID] = 1.0
    return step


def candidate_distance(a: DistributionSeq, b: DistributionSeq) -> Tensor:
    """Mean per-step Euclidean distance, padding the shorter candidate.

    The shorter sequence is extended with point mass on the PAD token up to
    max(len(a), len(b)); the summed step distances are divided by that
    maximum length.  For one-hot steps this equals the Wasserstein distance
    between the point-mass distributions.
    """
    if not len(a) and not len(b):
        return Tensor(0.0)
    steps_a = list(a.probs)
    steps_b = list(b.probs)
    vocab = (steps_a[0] if steps_a else steps_b[0]).data.shape[-1]
    max_len = max(len(steps_a), len(steps_b))
    pad = _pad_step(vocab)
    total = None
    for t in range(max_len):
        sa = steps_a[t] if t < len(steps_a) else pad
        sb = steps_b[t] if t < len(steps_b) else pad
        diff = sa - sb if isinstance(sa, Tensor) or isinstance(sb, Tensor) else Tensor(sa - sb)
        sq = T.tsum(diff * diff)
        d = T.sqrt(T.clamp_min(sq, _NORM_GUARD))
        total = d if total is None else total + d
    return total / max_len


def token_sequence_distance(a_ids, b_ids) -> float:
    """candidate_distance specialized to hard (one-hot) token sequences."""
    a_ids = list(a_ids)
    b_ids = list(b_ids)
    if not a_ids and not b_ids:
        return 0.0
    max_len = max(len(a_ids), len(b_ids))
    mismatches = 0
    for t in range(max_len):
        ta = a_ids[t] if t < len(a_ids) else PAD_ID
        tb = b_ids[t] if t < len(b_ids) else PAD_ID
        if ta != tb:
            mismatches += 1
    return float(np.sqrt(2.0) * mismatches / max_len)


def ds_bms_loss(nlls, kl, dists, cfg: SamplerConfig) -> LossBreakdown:
    """Best-of-many bound minus the hinged minimum pairwise candidate distance.

    dists must cover all i<j pairs of the T decoded candidates, computed on
    the soft per-step distributions so the term stays differentiable.
    """
    nlls = list(nlls)
    if len(nlls) < 2:
        raise ConfigError("the diversity-sensitive objective needs T >= 2 samples")
    expected_pairs = len(nlls) * (len(nlls) - 1) // 2
    dists = list(dists)
    if len(dists) != expected_pairs:
        raise ShapeError(f"expected {expected_pairs} pairwise distances, got {len(dists)}")
    best = min(nlls, key=float)
    min_dist = min(dists, key=float)
    if float(min_dist) > cfg.delta_clip:
        hinged: Tensor | float = cfg.delta_clip
    else:
        hinged = min_dist
    diversity = cfg.lambda_div * hinged
    total = best + kl - diversity
    return LossBreakdown([float(v) for v in nlls], float(kl), float(diversity), total)


@dataclass
class AdamState:
    """Adaptive-moment state; created lazily on the first step."""

    t: int = 0
    m: dict[str, np.ndarray] = field(default_factory=dict)
    v: dict[str, np.ndarray] = field(default_factory=dict)


def optimize_step(params: ModelParameters, grads: dict[str, np.ndarray],
                  state: AdamState, lr: float = 1e-3,
                  betas: tuple[float, float] = (0.9, 0.999), eps: float = 1e-8,
                  weight_decay: float = 0.0) -> ModelParameters:
    """One Adam update with bias correction and decoupled weight decay.

    Raises NaNError (leaving parameters and state untouched) if any gradient
    entry is non-finite.
    """
    for name, g in grads.items():
        if not np.all(np.isfinite(g)):
            raise NaNError(f"non-finite gradient in {name}")
    b1, b2 = betas
    state.t += 1
    t = state.t
    for name in params.names:
        g = grads[name]
        if name not in state.m:
            state.m[name] = np.zeros_like(g)
            state.v[name] = np.zeros_like(g)
        m = state.m[name]
        v = state.v[name]
        m *= b1
        m += (1 - b1) * g
        v *= b2
        v += (1 - b2) * g * g
        m_hat = m / (1 - b1 ** t)
        v_hat = v / (1 - b2 ** t)
        data = params[name].data
        if weight_decay:
            data -= lr * weight_decay * data
        data -= lr * m_hat / (np.sqrt(v_hat) + eps)
    return params
