"""Complex PML modification of the physical coefficients (d = 2).

Inside the absorbing annulus the diffusion matrix becomes H K H^T with
K = diag(beta/alpha, alpha/beta) in the radial/tangential eigenbasis and the
refractive coefficient becomes alpha * beta.  Outside the annulus the
physical coefficients pass through unchanged.

Only the 2-D construction is computed.  For reference, the 3-D variant uses
K = diag(beta^2/alpha, alpha, alpha) with the spherical rotation matrix and
n -> alpha * beta^2; requests for d != 2 are rejected at runtime.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .cutoffs import CutoffPoly, RadialProfile, pml_sigma_alpha_beta


@dataclass(frozen=True)
class PmlProfile:
    """PML ramp geometry: ramp rises over [r1, r2] to height `scale`."""

    r1: float = 4.52
    r2: float = 5.0
    scale: float = 3.0
    cutoff: CutoffPoly = field(init=False, compare=False)
    ramp: RadialProfile = field(init=False, compare=False)

    def __post_init__(self):
        if not self.r1 < self.r2:
            raise ValueError("PML requires r1 < r2")
        if self.scale <= 0:
            raise ValueError("PML scale must be positive")
        object.__setattr__(self, "cutoff", CutoffPoly(3))
        object.__setattr__(
            self, "ramp", RadialProfile("pml", self.r1, self.r2, self.scale)
        )

    def sigma_alpha_beta(self, r):
        return pml_sigma_alpha_beta(self.ramp, r)


@dataclass(frozen=True)
class PmlCoefficients:
    """Coefficient pair (a_pml, n_pml) at one point."""

    a_pml: np.ndarray  # (2, 2) complex symmetric
    n_pml: complex


def pml_coefficients_at(profile: PmlProfile, a_phys, n_phys, x, d: int = 2):
    """Vectorized PML coefficients at points x of shape (M, 2).

    a_phys: (M, 2, 2) real/complex, n_phys: (M,).  Returns complex arrays
    (M, 2, 2) and (M,).  The scaled-region matrix is assembled from its
    radial/tangential eigenstructure, which avoids explicit trigonometry in
    the rotation H (and is insensitive to the polar-angle branch).
    """
    if d != 2:
        raise NotImplementedError("only the 2-D PML is computed")
    x = np.asarray(x, dtype=float)
    a = np.array(np.broadcast_to(a_phys, (x.shape[0], 2, 2)), dtype=complex)
    n = np.array(np.broadcast_to(n_phys, (x.shape[0],)), dtype=complex)
    r = np.hypot(x[:, 0], x[:, 1])
    scaled = r > profile.r1
    if np.any(scaled):
        rs = r[scaled]
        _, alpha, beta = profile.sigma_alpha_beta(rs)
        er = x[scaled] / rs[:, None]
        et = np.stack([-er[:, 1], er[:, 0]], axis=1)
        lam_r = (beta / alpha)[:, None, None]
        lam_t = (alpha / beta)[:, None, None]
        a[scaled] = lam_r * er[:, :, None] * er[:, None, :] + lam_t * et[:, :, None] * et[:, None, :]
        n[scaled] = alpha * beta
    return a, n


def pml_coefficients(profile: PmlProfile, a_phys, n_phys, x, d: int = 2) -> PmlCoefficients:
    """PML coefficients at a single point (see `pml_coefficients_at`)."""
    a, n = pml_coefficients_at(
        profile, np.asarray(a_phys)[None], np.asarray([n_phys]), np.asarray(x)[None], d
    )
    return PmlCoefficients(a_pml=a[0], n_pml=complex(n[0]))


def pml_positivity_margin(profile: PmlProfile, samples: int, seed: int = 0) -> float:
    """min Re(zeta^H (H K H^T) zeta) over sampled radii and unit complex zeta.

    Sampled radii cover [r1, r2 + 1]; a strictly positive return certifies
    the coercivity of the real part of the scaled diffusion matrix on the
    sample.
    """
    if samples < 1:
        raise ValueError("need at least one sample")
    rng = np.random.default_rng(seed)
    r = rng.uniform(profile.r1, profile.r2 + 1.0, samples)
    theta = rng.uniform(0.0, 2.0 * np.pi, samples)
    x = np.stack([r * np.cos(theta), r * np.sin(theta)], axis=1)
    zeta = rng.normal(size=(samples, 2)) + 1j * rng.normal(size=(samples, 2))
    zeta /= np.linalg.norm(zeta, axis=1)[:, None]
    a, _ = pml_coefficients_at(
        profile, np.eye(2), np.ones(samples), x
    )
    quad = np.einsum("mi,mij,mj->m", zeta.conj(), a, zeta)
    return float(np.min(quad.real))
