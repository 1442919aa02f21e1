"""Radial cutoff functions and PML stretching.

Everything here is a piecewise polynomial in the scaled radial variable
t = (r - inner) / (outer - inner): the three cutoff polynomials of
smoothness class C^1, C^2, C^3, the four named radial profiles built from
them (the PML ramp, the two source/far-field blending profiles and the
field-fluctuation envelope), and the complex PML stretching coefficients
sigma, alpha, beta derived from the ramp.

All evaluators accept scalars or numpy arrays and are pure.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

# Monotone [0,1] -> [0,1] polynomials with vanishing derivatives at both
# endpoints up to the smoothness class.  Coefficients ascending in degree,
# exact integers.
_CUT_COEFFS = {
    1: np.array([0.0, 0.0, 3.0, -2.0]),                        # 3t^2 - 2t^3
    2: np.array([0.0, 0.0, 0.0, 10.0, -15.0, 6.0]),            # 10t^3 - 15t^4 + 6t^5
    3: np.array([0.0, 0.0, 0.0, 0.0, 35.0, -84.0, 70.0, -20.0]),  # 35t^4 - ... - 20t^7
}


def _polyder_table(coeffs: np.ndarray, max_order: int) -> list[np.ndarray]:
    table = [coeffs]
    for _ in range(max_order):
        table.append(np.polynomial.polynomial.polyder(table[-1]))
    return table


@dataclass(frozen=True)
class CutoffPoly:
    """Polynomial cutoff of smoothness class ``order`` in {1, 2, 3}."""

    order: int
    _derivs: list[np.ndarray] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.order not in _CUT_COEFFS:
            raise ValueError(f"cutoff order must be 1, 2 or 3, got {self.order}")
        object.__setattr__(
            self, "_derivs", _polyder_table(_CUT_COEFFS[self.order], self.order + 1)
        )

    def value(self, r):
        """Evaluate the cutoff: 0 for r <= 0, the polynomial on [0,1], 1 for r >= 1."""
        r = np.asarray(r, dtype=float)
        out = np.polynomial.polynomial.polyval(np.clip(r, 0.0, 1.0), self._derivs[0])
        # clamp away any rounding excursions outside [0,1]
        out = np.clip(out, 0.0, 1.0)
        return out if out.ndim else float(out)

    def deriv(self, r, order: int = 1):
        """Analytic derivative of the piecewise polynomial.

        Only derivatives up to ``self.order + 1`` are stored; beyond that the
        piecewise derivative is not defined at the knots and we refuse.
        """
        if not 1 <= order <= self.order + 1:
            raise ValueError(
                f"derivative order {order} not available for C^{self.order} cutoff"
            )
        r = np.asarray(r, dtype=float)
        inside = (r > 0.0) & (r < 1.0)
        vals = np.polynomial.polynomial.polyval(r, self._derivs[order])
        out = np.where(inside, vals, 0.0)
        return out if out.ndim else float(out)


def cutoff_eval(poly: CutoffPoly, r) -> float:
    """Clamped cutoff polynomial value in [0, 1]; total on the reals."""
    return poly.value(r)


def cutoff_deriv(poly: CutoffPoly, r, order: int = 1) -> float:
    """Exact derivative of the cutoff; rejects orders beyond the stored table."""
    return poly.deriv(r, order)


# Smoothness class used for each profile kind.
_PROFILE_ORDER = {"pml": 3, "alt": 2, "ffp": 2, "fluc": 1}
# Orientation: +1 profiles rise from 0 to 1 (or to `scale`), -1 fall from 1 to 0.
_PROFILE_SIGN = {"pml": +1, "alt": -1, "ffp": +1, "fluc": -1}


@dataclass(frozen=True)
class RadialProfile:
    """Radial composition of a cutoff polynomial over [inner_radius, outer_radius].

    kind 'pml'  : 0 below inner, rising to `scale` above outer,
    kind 'ffp'  : 0 below inner, rising to 1 above outer,
    kind 'alt'  : 1 below inner, falling to 0 above outer,
    kind 'fluc' : 1 below inner, falling to 0 above outer (C^1 only).
    """

    kind: str
    inner_radius: float
    outer_radius: float
    scale: float = 1.0
    cutoff: CutoffPoly = field(init=False, compare=False)

    def __post_init__(self):
        if self.kind not in _PROFILE_ORDER:
            raise ValueError(f"unknown profile kind {self.kind!r}")
        if not self.inner_radius < self.outer_radius:
            raise ValueError("inner_radius must be < outer_radius")
        if self.kind != "pml" and self.scale != 1.0:
            raise ValueError("scale is only meaningful for the pml kind")
        if self.scale <= 0.0:
            raise ValueError("scale must be positive")
        object.__setattr__(self, "cutoff", CutoffPoly(_PROFILE_ORDER[self.kind]))

    @property
    def width(self) -> float:
        return self.outer_radius - self.inner_radius

    def _t(self, r):
        return (np.asarray(r, dtype=float) - self.inner_radius) / self.width

    def value(self, r):
        c = self.cutoff.value(self._t(r))
        if _PROFILE_SIGN[self.kind] < 0:
            return 1.0 - c
        return self.scale * c if self.kind == "pml" else c

    def deriv(self, r, order: int = 1):
        c = self.cutoff.deriv(self._t(r), order) / self.width**order
        sgn = _PROFILE_SIGN[self.kind]
        return (self.scale if self.kind == "pml" else 1.0) * sgn * c


def pml_sigma_alpha_beta(profile: RadialProfile, r):
    """PML stretching coefficients at radius r.

    sigma(r) = (r * phi(r))' = phi(r) + r * phi'(r), alpha = 1 + i sigma,
    beta = 1 + i phi, with phi the pml ramp.  Below the ramp all three
    reduce to (0, 1, 1).
    """
    if profile.kind != "pml":
        raise ValueError("pml_sigma_alpha_beta requires a pml-kind profile")
    r = np.asarray(r, dtype=float)
    phi = profile.value(r)
    sigma = phi + r * profile.deriv(r, 1)
    alpha = 1.0 + 1j * sigma
    beta = 1.0 + 1j * phi
    if r.ndim:
        return sigma, alpha, beta
    return float(sigma), complex(alpha), complex(beta)


def radial_profile_eval(profile: RadialProfile, x):
    """Value, gradient and Laplacian of the radial profile at 2-D point(s) x.

    Uses the radial formulas grad = phi'(r) * x/r and
    lap = phi''(r) + phi'(r)/r (d = 2).  At r = 0 all shipped profiles are
    constant, so gradient and Laplacian are returned as 0 there.
    """
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    pts = x[None, :] if single else x
    r = np.hypot(pts[:, 0], pts[:, 1])
    val = profile.value(r)
    d1 = profile.deriv(r, 1)
    d2 = profile.deriv(r, 2)
    safe_r = np.where(r > 0.0, r, 1.0)
    grad = d1[:, None] * pts / safe_r[:, None]
    lap = d2 + d1 / safe_r
    zero = r == 0.0
    grad[zero] = 0.0
    lap = np.where(zero, 0.0, lap)
    if single:
        return float(val[0]), grad[0], float(lap[0])
    return val, grad, lap


# Shipped geometry of the experiments: the obstacle sits inside radius 1.25,
# the field fluctuation fades over [3, 3.5], the plane-wave source annulus is
# [3.5, 4], the far-field extraction annulus [4, 4.5], the PML ramp [4.52, 5].
R_FLUC_START = 3.0
R_FLUC_END = 3.5
R_SOURCE_END = 4.0
R_FFP_END = 4.5
R_PML_START = 4.52
R_PML_END = 5.0
PML_SCALE = 3.0

#: radii where some shipped profile is only piecewise smooth; meshes align
#: element rings with these so quadrature never straddles a knot.
CUTOFF_KNOT_RADII = (
    R_FLUC_START,
    R_FLUC_END,
    R_SOURCE_END,
    R_FFP_END,
    R_PML_START,
    R_PML_END,
)


def default_pml_profile(r1: float = R_PML_START, r2: float = R_PML_END,
                        scale: float = PML_SCALE) -> RadialProfile:
    return RadialProfile("pml", r1, r2, scale)


def default_alt_profile() -> RadialProfile:
    return RadialProfile("alt", R_FLUC_END, R_SOURCE_END)


def default_ffp_profile() -> RadialProfile:
    return RadialProfile("ffp", R_SOURCE_END, R_FFP_END)


def default_fluc_profile() -> RadialProfile:
    return RadialProfile("fluc", R_FLUC_START, R_FLUC_END)
