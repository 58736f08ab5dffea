"""Diffusion-tensor algebra and analytic homogenization.

Tensors are plain ``numpy`` arrays of shape ``(d, d)`` with ``d`` in {2, 3};
:func:`sym_tensor` validates and normalizes user input.  Rotations follow the
passive convention ``z = T x``, so a tensor given in layer-aligned coordinates
maps to global coordinates as ``T Q T^T``.
"""
from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass

import numpy as np

TAU = 2.0 * math.pi


def sym_tensor(entries) -> np.ndarray:
    """Return a validated symmetric positive definite tensor.

    ``entries`` may be a square matrix or a length-2/3 vector of diagonal
    values.
    """
    a = np.array(entries, dtype=float)
    if a.ndim == 1:
        a = np.diag(a)
    if a.ndim != 2 or a.shape[0] != a.shape[1] or a.shape[0] not in (2, 3):
        raise ValueError(f"expected a 2x2 or 3x3 tensor, got shape {a.shape}")
    if not np.allclose(a, a.T, rtol=1e-12, atol=0.0):
        raise ValueError("tensor is not symmetric")
    a = 0.5 * (a + a.T)
    if np.linalg.eigvalsh(a)[0] <= 0.0:
        raise ValueError("tensor is not positive definite")
    return a


def is_diagonal(a: np.ndarray) -> bool:
    return not np.any(a - np.diag(np.diag(a)))


@dataclass(frozen=True)
class Rotation2:
    """Planar rotation by ``phi`` in [0, 2*pi)."""

    phi: float

    def __post_init__(self):
        if not 0.0 <= self.phi < TAU:
            raise ValueError(f"phi={self.phi} outside [0, 2*pi)")


@dataclass(frozen=True)
class Rotation3:
    """Euler-angle rotation: alpha about x3, beta about the new x1, gamma
    about the new x3."""

    alpha: float
    beta: float
    gamma: float

    def __post_init__(self):
        if not 0.0 <= self.alpha < TAU:
            raise ValueError(f"alpha={self.alpha} outside [0, 2*pi)")
        if not 0.0 <= self.beta <= math.pi:
            raise ValueError(f"beta={self.beta} outside [0, pi]")
        if not 0.0 <= self.gamma < TAU:
            raise ValueError(f"gamma={self.gamma} outside [0, 2*pi)")


def _r3(psi):
    c, s = np.cos(psi), np.sin(psi)
    z, o = np.zeros_like(c), np.ones_like(c)
    return np.stack([np.stack([c, s, z], -1),
                     np.stack([-s, c, z], -1),
                     np.stack([z, z, o], -1)], -2)


def _r1(beta):
    c, s = np.cos(beta), np.sin(beta)
    z, o = np.zeros_like(c), np.ones_like(c)
    return np.stack([np.stack([o, z, z], -1),
                     np.stack([z, c, s], -1),
                     np.stack([z, -s, c], -1)], -2)


def rotation_matrices_2d(phi) -> np.ndarray:
    """Stack of 2x2 rotation matrices for an array of angles."""
    phi = np.asarray(phi, dtype=float)
    c, s = np.cos(phi), np.sin(phi)
    return np.stack([np.stack([c, s], -1), np.stack([-s, c], -1)], -2)


def rotation_matrices_3d(alpha, beta, gamma) -> np.ndarray:
    """Stack of ``R3(gamma) @ R1(beta) @ R3(alpha)``."""
    alpha, beta, gamma = (np.asarray(v, dtype=float) for v in (alpha, beta, gamma))
    return _r3(gamma) @ _r1(beta) @ _r3(alpha)


def rotation_matrix(rot: Rotation2 | Rotation3) -> np.ndarray:
    if isinstance(rot, Rotation2):
        return rotation_matrices_2d(rot.phi)
    if isinstance(rot, Rotation3):
        return rotation_matrices_3d(rot.alpha, rot.beta, rot.gamma)
    raise TypeError(f"not a rotation: {rot!r}")


def rotate_tensor(t: np.ndarray, q: np.ndarray) -> np.ndarray:
    """Return ``T Q T^T``.  Broadcasts over leading axes of ``t``."""
    t = np.asarray(t, dtype=float)
    q = np.asarray(q, dtype=float)
    if t.shape[-2:] != q.shape[-2:] or t.shape[-1] != t.shape[-2]:
        raise ValueError(f"dimension mismatch: T {t.shape[-2:]} vs Q {q.shape[-2:]}")
    out = t @ q @ np.swapaxes(t, -1, -2)
    return 0.5 * (out + np.swapaxes(out, -1, -2))


def _angle_2d(u):
    return np.mod(TAU * u, TAU)


def _angles_3d(u):
    u = np.asarray(u, dtype=float)
    alpha = np.mod(TAU * u[..., 0], TAU)
    beta = np.arccos(np.clip(1.0 - 2.0 * u[..., 1], -1.0, 1.0))
    gamma = np.mod(TAU * u[..., 2], TAU)
    return alpha, beta, gamma


def sample_rotation_2d(rng: np.random.Generator) -> Rotation2:
    """Haar-uniform planar rotation."""
    return Rotation2(float(_angle_2d(rng.random())))


def sample_rotation_3d(rng: np.random.Generator) -> Rotation3:
    """Haar-uniform rotation in Euler angles.

    alpha and gamma are uniform; beta has density sin(beta)/2 and is drawn by
    inverting its CDF, beta = arccos(1 - 2u).  Consumes three deviates in the
    order alpha, beta, gamma.
    """
    a, b, g = _angles_3d(rng.random(3))
    return Rotation3(float(a), float(b), float(g))


def sample_rotation_matrices(rng: np.random.Generator, dim: int, count: int) -> np.ndarray:
    """``count`` Haar-uniform rotation matrices.

    Draws the same deviate stream as ``count`` successive calls of
    :func:`sample_rotation_2d` / :func:`sample_rotation_3d`.
    """
    if dim == 2:
        return rotation_matrices_2d(_angle_2d(rng.random(count)))
    if dim == 3:
        return rotation_matrices_3d(*_angles_3d(rng.random((count, 3))))
    raise ValueError(f"dim must be 2 or 3, got {dim}")


def harmonic_mean_profile(segments) -> float:
    """Effective diffusivity of a 1D piecewise-constant profile.

    ``segments`` is a sequence of ``(length, diffusivity)`` pairs.
    """
    segments = list(segments)
    if not segments:
        raise ValueError("empty profile")
    total = 0.0
    resistance = 0.0
    for length, d in segments:
        if length <= 0 or d <= 0:
            raise ValueError(f"segment ({length}, {d}) must have positive length and diffusivity")
        total += length
        resistance += length / d
    return total / resistance


@dataclass(frozen=True)
class LayeredMedium:
    """Two perfectly layered phases.

    Phase 1 (``d_plus``, thickness ``thickness_plus``) is the aqueous phase;
    phase 2 (``d_minus``) is the lipid phase whose tensor is divided by the
    partition coefficient before homogenizing.  Thicknesses may be absolute
    or volume fractions.  ``normal_axis`` is the 0-based axis normal to the
    layers.
    """

    thickness_plus: float
    thickness_minus: float
    d_plus: np.ndarray
    d_minus: np.ndarray
    partition_coefficient: float = 1.0
    normal_axis: int = 1

    def __post_init__(self):
        if self.thickness_plus <= 0 or self.thickness_minus <= 0:
            raise ValueError("layer thicknesses must be positive")
        if self.partition_coefficient <= 0:
            raise ValueError("partition coefficient must be positive")
        dp, dm = sym_tensor(self.d_plus), sym_tensor(self.d_minus)
        if dp.shape != dm.shape:
            raise ValueError("phase tensors have different dimensions")
        if not (is_diagonal(dp) and is_diagonal(dm)):
            raise ValueError("layered closed form requires diagonal phase tensors")
        if not 0 <= self.normal_axis < dp.shape[0]:
            raise ValueError(f"normal_axis {self.normal_axis} out of range")
        object.__setattr__(self, "d_plus", dp)
        object.__setattr__(self, "d_minus", dm)

    @classmethod
    def from_fractions(cls, p1, d1, d2, partition_coefficient=1.0, normal_axis=1):
        return cls(p1, 1.0 - p1, d1, d2, partition_coefficient, normal_axis)


def layered_effective_tensor(m: LayeredMedium) -> np.ndarray:
    """Closed-form effective tensor of a perfectly layered medium.

    Tangential entries are thickness-weighted arithmetic means, the normal
    entry is the thickness-weighted harmonic mean.
    """
    ap, am = m.thickness_plus, m.thickness_minus
    dp = np.diag(m.d_plus)
    dm = np.diag(m.d_minus) / m.partition_coefficient
    eff = (ap * dp + am * dm) / (ap + am)
    k = m.normal_axis
    eff[k] = harmonic_mean_profile([(ap, dp[k]), (am, dm[k])])
    return np.diag(eff)


@dataclass(frozen=True)
class TwoPhaseCoefficients:
    """Coefficients of the two-phase problem with a partition jump
    ``v1 = K_p v2`` on the interface."""

    d1: np.ndarray
    d2: np.ndarray
    r1: float = 0.0
    r2: float = 0.0
    f1: float = 0.0
    f2: float = 0.0
    partition_coefficient: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "d1", sym_tensor(self.d1))
        object.__setattr__(self, "d2", sym_tensor(self.d2))
        if self.r1 < 0 or self.r2 < 0:
            raise ValueError("reaction rates must be non-negative")


@dataclass(frozen=True)
class SingleFieldCoefficients:
    """Region coefficients of ``sigma u_t - div(d grad u) + r u = f``."""

    d: np.ndarray
    sigma: float = 1.0
    r: float = 0.0
    f: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "d", sym_tensor(self.d))
        if self.sigma <= 0:
            raise ValueError("sigma must be positive")
        if self.r < 0:
            raise ValueError("reaction rate must be non-negative")


def transform_partition(c: TwoPhaseCoefficients):
    """Remove the interface jump by substituting ``u = K_p v2`` in phase 2.

    Returns ``(region1, region2)`` coefficient records of the continuous
    single-field problem.
    """
    kp = c.partition_coefficient
    if not kp > 0:
        raise ValueError(f"partition coefficient must be positive, got {kp}")
    region1 = SingleFieldCoefficients(c.d1, 1.0, c.r1, c.f1)
    region2 = SingleFieldCoefficients(c.d2 / kp, 1.0 / kp, c.r2 / kp, c.f2)
    return region1, region2


def inverse_transform_partition(region1, region2, partition_coefficient) -> TwoPhaseCoefficients:
    kp = partition_coefficient
    if not kp > 0:
        raise ValueError(f"partition coefficient must be positive, got {kp}")
    return TwoPhaseCoefficients(region1.d, region2.d * kp, region1.r, region2.r * kp,
                                region1.f, region2.f, kp)


def trial_seed(master_seed: int, trial_index: int) -> int:
    """64-bit seed derived from ``(master_seed, trial_index)`` by hashing.

    Depends only on the pair, so trials may run in any order or process.
    """
    key = f"effdiff-trial:{int(master_seed)}:{int(trial_index)}".encode()
    return int.from_bytes(hashlib.blake2b(key, digest_size=8).digest(), "little")
