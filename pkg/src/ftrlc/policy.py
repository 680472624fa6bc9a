"""Disturbance-action policy parameters and the feasible-set projection."""

from dataclasses import dataclass

import numpy as np

from . import _kernels
from .errors import DimensionMismatch

MEMBERSHIP_TOL = 1e-9


@dataclass(frozen=True)
class PolicyParams:
    """p policy blocks stacked as an array of shape (p, d_u, d_x)."""

    blocks: np.ndarray

    def __post_init__(self):
        arr = np.ascontiguousarray(np.asarray(self.blocks, dtype=float))
        if arr.ndim != 3:
            raise DimensionMismatch(
                f"blocks must be (p, d_u, d_x), got shape {arr.shape}")
        if arr.shape[0] < 1:
            raise DimensionMismatch("policy memory p must be >= 1")
        object.__setattr__(self, "blocks", arr)

    @classmethod
    def zeros(cls, p, d_u, d_x):
        return cls(np.zeros((p, d_u, d_x)))

    @property
    def p(self):
        return self.blocks.shape[0]

    @property
    def d_u(self):
        return self.blocks.shape[1]

    @property
    def d_x(self):
        return self.blocks.shape[2]

    @property
    def augmented(self):
        """Flat d_u x (p * d_x) view [M^[1] | M^[2] | ... | M^[p]]; its
        Frobenius norm equals the block-wise root sum of squares."""
        return np.hstack(list(self.blocks))

    def norm(self):
        return float(np.linalg.norm(self.blocks))


@dataclass(frozen=True)
class FeasibleSet:
    """{ M : sum_j ||M^[j]||_F <= kappa_M } for p blocks."""

    kappa_M: float
    p: int

    def __post_init__(self):
        if self.kappa_M <= 0:
            raise ValueError("kappa_M must be positive")
        if self.p < 1:
            raise ValueError("p must be >= 1")

    def contains(self, M):
        return block_norm_sum(M) <= self.kappa_M + MEMBERSHIP_TOL


def _blocks_of(M):
    return M.blocks if isinstance(M, PolicyParams) else np.asarray(M, dtype=float)


def block_norm_sum(M):
    """sum_j ||M^[j]||_F."""
    blocks = _blocks_of(M)
    return float(sum(np.linalg.norm(b) for b in blocks))


def action(M, K, x, window):
    """u_t = K x_t + sum_j M^[j] w_{t-j} over the zero-padded window."""
    blocks = _blocks_of(M)
    p, d_u, d_x = blocks.shape
    K = np.asarray(K, dtype=float)
    x = np.asarray(x, dtype=float)
    if K.shape != (d_u, d_x):
        raise DimensionMismatch(f"K must be {(d_u, d_x)}, got {K.shape}")
    if x.shape != (d_x,):
        raise DimensionMismatch(f"x must be ({d_x},), got {x.shape}")
    win = window.as_array() if hasattr(window, "as_array") else np.asarray(window, dtype=float)
    if win.shape != (p, d_x):
        raise DimensionMismatch(f"window must be {(p, d_x)}, got {win.shape}")
    u = K @ x
    for j in range(p):
        u = u + blocks[j] @ win[j]
    return u


def project(M, feasible):
    """Euclidean (Frobenius) projection onto the feasible set."""
    blocks = _blocks_of(M)
    if blocks.shape[0] != feasible.p:
        raise DimensionMismatch(
            f"policy has {blocks.shape[0]} blocks, set expects {feasible.p}")
    out = _kernels.project_blocks(np.ascontiguousarray(blocks), feasible.kappa_M)
    return PolicyParams(out) if isinstance(M, PolicyParams) else out
