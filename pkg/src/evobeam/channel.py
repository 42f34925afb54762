"""User direction trajectories and synthetic CSI snapshots.

The channel model is narrowband line of sight: each snapshot is
y_r = sum_k s_{k,r} a(theta_k) + n_r with unit-variance circular complex
Gaussian symbols and white circular Gaussian noise. SNR is per element
relative to a single unit-power source. All randomness flows from explicit
seeds.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Union

import numpy as np

from .arrays import ArrayGeometry, DoASet, steering_matrix
from .errors import ValidationError

DEFAULT_SNAPSHOTS = 200
DEFAULT_ANGLE_BOUNDS = (5.0, 175.0)

# Inward offset used to keep clamped angles pairwise distinct.
_SEPARATION_EPS = 1e-6


@dataclass(frozen=True)
class RandomWalkDrift:
    """Per-user Gaussian angle increments, clamped to the angle bounds."""

    sigma_deg_per_step: float

    def __post_init__(self):
        if self.sigma_deg_per_step < 0 or not math.isfinite(self.sigma_deg_per_step):
            raise ValidationError("sigma_deg_per_step must be >= 0")


@dataclass(frozen=True)
class ScriptedDrift:
    """Fully scheduled trajectory: one angle list per step, played verbatim."""

    waypoints: tuple

    def __post_init__(self):
        object.__setattr__(
            self,
            "waypoints",
            tuple(tuple(float(a) for a in w) for w in self.waypoints),
        )


DriftModel = Union[RandomWalkDrift, ScriptedDrift]


@dataclass(frozen=True)
class TrajectoryConfig:
    num_steps: int
    initial_angles: DoASet
    drift: DriftModel
    angle_bounds: tuple = DEFAULT_ANGLE_BOUNDS
    seed: int = 0

    def __post_init__(self):
        if self.num_steps < 1:
            raise ValidationError("num_steps must be >= 1")
        lo, hi = self.angle_bounds
        if not (0.0 < lo < hi < 180.0):
            raise ValidationError(f"angle_bounds {self.angle_bounds} must satisfy 0 < lo < hi < 180")
        for a in self.initial_angles.angles_deg:
            if not (lo <= a <= hi):
                raise ValidationError(f"initial angle {a} outside bounds {self.angle_bounds}")
        if isinstance(self.drift, ScriptedDrift):
            if len(self.drift.waypoints) != self.num_steps:
                raise ValidationError(
                    f"scripted drift has {len(self.drift.waypoints)} waypoints "
                    f"for {self.num_steps} steps"
                )
            for w in self.drift.waypoints:
                DoASet(w)  # each step must be a valid direction set
                if len(w) != len(self.initial_angles):
                    raise ValidationError("waypoint source count differs from initial_angles")
            if self.drift.waypoints[0] != self.initial_angles.angles_deg:
                raise ValidationError("first waypoint must equal initial_angles")
        elif not isinstance(self.drift, RandomWalkDrift):
            raise ValidationError(f"unknown drift model {self.drift!r}")


@dataclass(frozen=True)
class CsiSnapshotBatch:
    """R snapshots of array outputs plus the ground truth that produced them.

    true_angles are carried for scoring only; estimators receive the
    snapshots (or their covariance), never this field.
    """

    snapshots: np.ndarray
    snr_db: float
    true_angles: DoASet
    seed: int

    def __post_init__(self):
        snaps = np.asarray(self.snapshots, dtype=complex)
        if snaps.ndim != 2 or snaps.shape[0] < 1:
            raise ValidationError("snapshots must be a nonempty R x N matrix")
        snaps.setflags(write=False)
        object.__setattr__(self, "snapshots", snaps)
        if not math.isfinite(self.snr_db):
            raise ValidationError("snr_db must be finite")

    @property
    def num_snapshots(self) -> int:
        return self.snapshots.shape[0]


def generate_trajectory(config: TrajectoryConfig) -> list:
    """DoA sets for steps 0 .. T-1; step 0 equals initial_angles."""
    if isinstance(config.drift, ScriptedDrift):
        return [DoASet(w) for w in config.drift.waypoints]
    lo, hi = config.angle_bounds
    sigma = config.drift.sigma_deg_per_step
    rng = np.random.default_rng(config.seed)
    angles = np.asarray(config.initial_angles.angles_deg, dtype=float)
    out = [config.initial_angles]
    for _ in range(1, config.num_steps):
        angles = np.clip(angles + rng.normal(0.0, sigma, angles.shape[0]), lo, hi)
        angles = np.asarray(_separate(angles.tolist(), lo, hi), dtype=float)
        out.append(DoASet(tuple(angles.tolist())))
    return out


def _separate(angles, lo, hi):
    """Break exact ties (bound pile-ups) by deterministic inward nudges."""
    mid = (lo + hi) / 2
    taken = set()
    result = []
    for a in angles:
        v, k = a, 0
        while v in taken:
            k += 1
            v = a - k * _SEPARATION_EPS if a >= mid else a + k * _SEPARATION_EPS
        taken.add(v)
        result.append(v)
    return result


def synthesize_csi(
    geometry: ArrayGeometry,
    doas: DoASet,
    snr_db: float,
    num_snapshots: int = DEFAULT_SNAPSHOTS,
    seed: int = 0,
) -> CsiSnapshotBatch:
    """Simulate R array-output snapshots for the given directions.

    Args:
        geometry: receiving array.
        doas: true source directions.
        snr_db: per-element SNR against one unit-power source.
        num_snapshots: R, number of snapshots to draw.
        seed: generator seed; equal seeds give bit-identical batches.
    """
    if num_snapshots < 1:
        raise ValidationError("num_snapshots must be >= 1")
    if not math.isfinite(snr_db):
        raise ValidationError("snr_db must be finite")
    rng = np.random.default_rng(seed)
    k = len(doas)
    r = int(num_snapshots)
    s = steering_matrix(geometry, doas.angles_deg)
    symbols = (rng.standard_normal((r, k)) + 1j * rng.standard_normal((r, k))) / np.sqrt(2)
    noise_var = 10.0 ** (-snr_db / 10.0)
    noise = np.sqrt(noise_var / 2) * (
        rng.standard_normal((r, geometry.num_elements))
        + 1j * rng.standard_normal((r, geometry.num_elements))
    )
    snapshots = symbols @ s.T + noise
    return CsiSnapshotBatch(snapshots=snapshots, snr_db=float(snr_db), true_angles=doas, seed=int(seed))
