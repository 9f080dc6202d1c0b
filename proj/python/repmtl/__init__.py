"""Penalized shared-representation multi-task and transfer learning."""

from ._core import (
    Error,
    NoRankDetected,
    NonConvergence,
    RankDeficient,
    default_gamma,
    default_lambda,
    estimate_r,
    extrinsic_mean,
    loss,
    orthonormalize,
    procrustes_align,
    projector_distance_frobenius,
    projector_distance_spectral,
    prox_l2,
    rank_profile,
    restricted_fit,
    rl_mtl,
    rl_tl,
    simulate,
    single_task_fit,
)

__all__ = [name for name in dir() if not name.startswith("_")]
