"""Affine random coefficient fields for the scattering problem.

The refractive-index field is n(x, y) = n0 + xi_n * sum_j y_j psi_j(x) with
psi_j(x) = j^{-q} sin(j pi x1) sin(j pi x2) fluc(x), truncated to s terms,
and the matrix field A(x, y) = A0 + xi_A * sum_j y_j Psi_j(x) (shipped
experiments keep A = I).  Parameters y_j are i.i.d. uniform on [-1/2, 1/2].
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .cutoffs import RadialProfile, default_fluc_profile


@dataclass(frozen=True)
class ParamVector:
    """Truncated parameter vector y in [-1/2, 1/2]^s."""

    values: np.ndarray

    def __post_init__(self):
        vals = np.atleast_1d(np.asarray(self.values, dtype=float))
        if vals.ndim != 1:
            raise ValueError("parameter vector must be one-dimensional")
        if vals.size and (np.min(vals) < -0.5 or np.max(vals) > 0.5):
            raise ValueError("parameter components must lie in [-1/2, 1/2]")
        object.__setattr__(self, "values", vals)

    @property
    def s(self) -> int:
        return self.values.size

    @staticmethod
    def zeros(s: int) -> "ParamVector":
        return ParamVector(np.zeros(s))


def truncate(y_full: ParamVector, s: int) -> ParamVector:
    """Keep the first s entries; dropped entries are implicitly zero."""
    if s > y_full.s:
        raise ValueError(f"cannot truncate to {s} > {y_full.s} components")
    return ParamVector(y_full.values[:s].copy())


@dataclass(frozen=True)
class DecaySequence:
    """The fluctuation-size sequence b_j = j^{-q} and its summability label p."""

    q: float = 3.0
    p: float = 1.0 / 3.0

    def __post_init__(self):
        if self.q <= 1.0:
            raise ValueError("decay exponent q must exceed 1")

    def b(self, j) -> np.ndarray:
        return np.asarray(j, dtype=float) ** (-self.q)


@dataclass(frozen=True)
class AdmissibilitySums:
    """Partial sums of the admissibility bounds plus integral tail bounds."""

    sum_inf: float
    sum_nontrap: float
    tail_inf: float
    tail_nontrap: float

    @property
    def upper_inf(self) -> float:
        return self.sum_inf + self.tail_inf

    @property
    def upper_nontrap(self) -> float:
        return self.sum_nontrap + self.tail_nontrap


@dataclass(frozen=True)
class RandomFieldSpec:
    """Parameters of the affine coefficient fields.

    a_fluctuations optionally holds matrix-valued fluctuation callables
    x -> (2, 2) for synthetic tests of the matrix field; shipped experiments
    use none (A identically I).
    """

    n0: float = 1.0
    xi_n: float = 0.8319
    q: float = 3.0
    fluc_profile: RadialProfile = field(default_factory=default_fluc_profile)
    xi_A: float = 0.0
    a_fluctuations: tuple | None = None

    def __post_init__(self):
        if self.xi_n < 0 or self.xi_A < 0:
            raise ValueError("scaling parameters must be nonnegative")
        if self.q <= 1.0:
            raise ValueError("decay exponent q must exceed 1")
        # positivity admissibility: xi_n * sum_j ||psi_j||_inf <= n0,min.
        # ||psi_j||_inf <= j^{-q}, and sum_j j^{-q} <= zeta(q) bounded by
        # 1 + integral comparison.
        zeta_upper = 1.0 + 1.0 / (self.q - 1.0)
        bound = self.xi_n * min(zeta_upper, _zeta_partial_upper(self.q))
        if bound > self.n0 + 1e-12:
            raise ValueError(
                f"positivity admissibility violated: xi_n * sum ||psi_j|| "
                f"<= {bound:.6g} exceeds n0 = {self.n0}"
            )

    def decay(self) -> DecaySequence:
        return DecaySequence(q=self.q)


def _zeta_partial_upper(q: float, terms: int = 256) -> float:
    j = np.arange(1, terms + 1, dtype=float)
    return float(np.sum(j**-q)) + terms ** (1.0 - q) / (q - 1.0)


def psi_j(spec: RandomFieldSpec, j: int, x) -> np.ndarray:
    """Scalar fluctuation psi_j(x) = j^{-q} sin(j pi x1) sin(j pi x2) fluc(x)."""
    x = np.asarray(x, dtype=float)
    pts = x[None, :] if x.ndim == 1 else x
    env = spec.fluc_profile.value(np.hypot(pts[:, 0], pts[:, 1]))
    vals = (
        j ** (-spec.q)
        * np.sin(j * np.pi * pts[:, 0])
        * np.sin(j * np.pi * pts[:, 1])
        * env
    )
    return float(vals[0]) if x.ndim == 1 else vals


def sample_n(spec: RandomFieldSpec, y: ParamVector, x):
    """Refractive-index field n(x, y) truncated to the dimension of y."""
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    pts = x[None, :] if single else x
    acc = np.full(pts.shape[0], spec.n0, dtype=float)
    if spec.xi_n > 0 and y.s:
        env = spec.fluc_profile.value(np.hypot(pts[:, 0], pts[:, 1]))
        fluct = np.zeros(pts.shape[0])
        for j, yj in enumerate(y.values, start=1):
            if yj == 0.0:
                continue
            fluct += (
                yj
                * j ** (-spec.q)
                * np.sin(j * np.pi * pts[:, 0])
                * np.sin(j * np.pi * pts[:, 1])
            )
        acc += spec.xi_n * fluct * env
    return float(acc[0]) if single else acc


def sample_A(spec: RandomFieldSpec, y: ParamVector, x):
    """Matrix field A(x, y); identity plus optional synthetic fluctuations."""
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    pts = x[None, :] if single else x
    out = np.broadcast_to(np.eye(2), (pts.shape[0], 2, 2)).copy()
    if spec.xi_A > 0 and spec.a_fluctuations:
        for j, psi in enumerate(spec.a_fluctuations):
            if j >= y.s or y.values[j] == 0.0:
                continue
            out += spec.xi_A * y.values[j] * np.asarray([psi(p) for p in pts])
    return out[0] if single else out


def admissibility_sums(q: float, j_max: int) -> AdmissibilitySums:
    """Partial sums sum_j j^{-q} and sum_j j^{-q} (7 j pi + 22) up to j_max.

    The second sum is the nontrapping bound for the shipped fluctuations
    (support radius 3.5, envelope gradient bound 3).  Integral-comparison
    tails are returned alongside so sum + tail is a rigorous upper bound on
    the infinite series.
    """
    if j_max < 1:
        raise ValueError("j_max must be at least 1")
    j = np.arange(1, j_max + 1, dtype=float)
    pows = j**-q
    sum_inf = float(np.sum(pows))
    sum_nontrap = float(np.sum(pows * (7.0 * j * np.pi + 22.0)))
    tail_inf = j_max ** (1.0 - q) / (q - 1.0)
    if q > 2.0:
        tail_nontrap = 7.0 * np.pi * j_max ** (2.0 - q) / (q - 2.0) + 22.0 * tail_inf
    else:
        tail_nontrap = math.inf
    return AdmissibilitySums(sum_inf, sum_nontrap, tail_inf, tail_nontrap)
