"""Task rewards and the real/hindsight reward weighting.

Real rewards are multiplied by ``lambda_r`` and hindsight rewards by
``lambda_h`` before they are stored. The weighting counters hindsight bias
when it makes hindsight rewards numerically larger than real ones, which
means ``lambda_r > lambda_h`` for non-positive rewards and
``lambda_r < lambda_h`` for non-negative rewards.
"""
from __future__ import annotations

import enum
import logging
from dataclasses import dataclass

import numpy as np

from .envs import goal_distance
from .errors import ConfigError

log = logging.getLogger(__name__)


class RewardKind(str, enum.Enum):
    BINARY_NEGATIVE = "binary_negative"  # -1 on failure, 0 on success
    BINARY_POSITIVE = "binary_positive"  # 0 on failure, +1 on success
    SHAPED = "shaped"                    # negative euclidean distance

    @property
    def nonpositive(self) -> bool:
        return self is not RewardKind.BINARY_POSITIVE

    @property
    def best(self) -> float:
        return 1.0 if self is RewardKind.BINARY_POSITIVE else 0.0


class Classification(str, enum.Enum):
    ARCHER = "archer"
    VANILLA = "vanilla"
    ANTI_ARCHER = "anti_archer"


@dataclass(frozen=True)
class TradeOff:
    lambda_r: float = 1.0
    lambda_h: float = 1.0

    def __post_init__(self):
        if not (self.lambda_r > 0 and self.lambda_h > 0):
            raise ConfigError(
                f"trade-off weights must be positive, got {self.lambda_r}, {self.lambda_h}")


def base_reward(kind, achieved, goal, tolerance: float):
    """Unweighted reward for reaching ``achieved`` when ``goal`` was asked for.

    Works elementwise over leading batch axes; a scalar comes back for
    single vectors.
    """
    kind = RewardKind(kind)
    if tolerance <= 0:
        raise ValueError("tolerance must be positive")
    dist = goal_distance(achieved, goal)
    if kind is RewardKind.SHAPED:
        r = -dist
    else:
        success = dist <= tolerance
        r = success.astype(np.float64) - (1.0 if kind is RewardKind.BINARY_NEGATIVE else 0.0)
    return float(r) if np.ndim(r) == 0 else r


def weighted_reward(tradeoff: TradeOff, is_hindsight, base):
    weight = np.where(is_hindsight, tradeoff.lambda_h, tradeoff.lambda_r)
    out = weight * base
    return float(out) if np.ndim(out) == 0 else out


def validate_tradeoff(kind, tradeoff: TradeOff) -> Classification:
    """Classify a weighting as ARCHER, vanilla HER, or bias-amplifying."""
    kind = RewardKind(kind)
    lr, lh = tradeoff.lambda_r, tradeoff.lambda_h
    if not (lr > 0 and lh > 0):
        raise ConfigError("trade-off weights must be positive")
    if lr == 1.0 and lh == 1.0:
        return Classification.VANILLA
    if (kind.nonpositive and lr > lh) or (not kind.nonpositive and lr < lh):
        return Classification.ARCHER
    log.warning("trade-off (%s, %s) with %s rewards makes hindsight rewards smaller "
                "than real ones", lr, lh, kind.value)
    return Classification.ANTI_ARCHER
