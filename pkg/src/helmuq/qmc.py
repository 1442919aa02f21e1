"""Randomly shifted rank-1 lattice rules with CBC-constructed generators.

The construction minimizes the shift-averaged worst-case error in the
weighted unanchored Sobolev space,

    e^2(z) = sum_{emptyset != u} gamma_u (1/N) sum_{i=1}^N
             prod_{j in u} B2({i z_j / N}),    B2(x) = x^2 - x + 1/6,

under POD weights gamma_u = Gamma_{|u|} prod_{j in u} beta~_j with
Gamma_l = (l!)^{2/(1+lambda)} and beta~_j = (beta_j / sqrt(theta))^{2/(1+lambda)},
theta(lambda) = 2 zeta(2 lambda) / (2 pi^2)^lambda.  The sum over subsets is
evaluated with the order-recursion q_{d,l}(i) = q_{d-1,l}(i)
+ beta~_d B2({i z_d/N}) q_{d-1,l-1}(i), an O(s^2 N) computation.

Point counts are powers of two; candidate components are the odd residues
(all coprime with N) and already-used components are excluded so the
low-dimensional projections never coincide.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import zeta as _riemann_zeta


def kernel_b2(x):
    """Bernoulli polynomial B2 on [0,1): the shift-averaged lattice kernel."""
    x = np.asarray(x, float)
    return x * x - x + 1.0 / 6.0


@dataclass(frozen=True)
class PodWeights:
    """Product-and-order-dependent weight family."""

    lam: float
    beta: np.ndarray

    def __post_init__(self):
        if not 0.5 < self.lam <= 1.0:
            raise ValueError("lambda must lie in (1/2, 1]")
        beta = np.asarray(self.beta, float)
        if beta.ndim != 1 or beta.size == 0:
            raise ValueError("beta must be a non-empty sequence")
        if np.any(beta <= 0) or np.any(np.diff(beta) > 1e-15):
            raise ValueError("beta must be positive and nonincreasing")
        object.__setattr__(self, "beta", beta)

    @staticmethod
    def shipped(s: int, lam: float = 1.0 / 1.8, q: float = 3.0) -> "PodWeights":
        """Defaults of the experiments: beta_j = j^{-q}, lambda = 1/1.8."""
        j = np.arange(1, s + 1, dtype=float)
        return PodWeights(lam=lam, beta=j**-q)

    @property
    def s_max(self) -> int:
        return self.beta.size

    @property
    def theta(self) -> float:
        """theta(lambda) = 2 zeta(2 lambda) / (2 pi^2)^lambda."""
        return 2.0 * float(_riemann_zeta(2.0 * self.lam)) / (2.0 * np.pi**2) ** self.lam

    @property
    def beta_tilde(self) -> np.ndarray:
        return (self.beta / math.sqrt(self.theta)) ** (2.0 / (1.0 + self.lam))

    def gamma_order(self, ell: int) -> float:
        return float(math.factorial(ell)) ** (2.0 / (1.0 + self.lam))

    def gamma_set(self, subset) -> float:
        """gamma_u for an explicit subset of 1-based coordinate indices."""
        subset = list(subset)
        out = self.gamma_order(len(subset))
        for j in subset:
            out *= self.beta_tilde[j - 1]
        return out

    def weight_hash(self) -> str:
        h = hashlib.sha256()
        h.update(np.float64(self.lam).tobytes())
        h.update(self.beta.astype(np.float64).tobytes())
        return h.hexdigest()[:12]


@dataclass(frozen=True)
class LatticeRule:
    """Rank-1 lattice: points {i z / N}, i = 1..N, randomly shiftable."""

    z: np.ndarray
    n_points: int

    def __post_init__(self):
        z = np.asarray(self.z, np.int64)
        if z.ndim != 1 or z.size == 0:
            raise ValueError("generating vector must be non-empty")
        if np.any(z < 1) or np.any(z >= self.n_points):
            raise ValueError("components must lie in [1, N-1]")
        if any(math.gcd(int(c), self.n_points) != 1 for c in z):
            raise ValueError("components must be coprime with N")
        if len(set(z.tolist())) != z.size:
            raise ValueError("components must be distinct")
        object.__setattr__(self, "z", z)

    @property
    def s(self) -> int:
        return self.z.size

    def truncated(self, s: int) -> "LatticeRule":
        if s > self.s:
            raise ValueError("cannot extend a generating vector")
        return LatticeRule(self.z[:s].copy(), self.n_points)

    def embedded_at(self, n_small: int) -> "LatticeRule":
        """The same generating vector used with a smaller power-of-two N.

        The n_small-point set is the subset of every (N/n_small)-th point of
        this rule, i.e. the rule with components z mod n_small (which may
        repeat; repeats are tolerated here since the vector was constructed
        repeat-free at the largest N).
        """
        if n_small > self.n_points or n_small & (n_small - 1):
            raise ValueError("embedded N must be a power of two not exceeding N")
        rule = object.__new__(LatticeRule)
        object.__setattr__(rule, "z", self.z % n_small)
        object.__setattr__(rule, "n_points", n_small)
        return rule

    def save_text(self, path) -> None:
        with open(path, "w") as f:
            f.write(f"{self.n_points} {self.s}\n")
            f.write(" ".join(str(int(c)) for c in self.z) + "\n")

    @staticmethod
    def load_text(path) -> "LatticeRule":
        with open(path) as f:
            n, s = map(int, f.readline().split())
            z = np.array(f.readline().split(), np.int64)
        if z.size != s:
            raise ValueError("generating-vector file is inconsistent")
        return LatticeRule(z, n)


def vector_cache_name(n: int, s: int, weights: PodWeights) -> str:
    return f"lattice_N{n}_s{s}_lam{weights.lam:.6f}_{weights.weight_hash()}.txt"


def _kernel_rows(z: np.ndarray, n: int) -> np.ndarray:
    """B2({i z_j / N}) for i = 1..N, for each component of z: shape (s, N)."""
    i = np.arange(1, n + 1, dtype=np.int64)
    frac = (np.outer(np.asarray(z, np.int64), i) % n) / float(n)
    return kernel_b2(frac)


def worst_case_error_sq(z, n: int, weights: PodWeights) -> float:
    """Shift-averaged squared worst-case error of the lattice under POD weights."""
    z = np.asarray(z, np.int64)
    d = z.size
    if d > weights.s_max:
        raise ValueError("weights cover fewer dimensions than z")
    rows = _kernel_rows(z, n)
    bt = weights.beta_tilde
    q = np.zeros((d + 1, n))
    q[0] = 1.0
    for dd in range(1, d + 1):
        contrib = bt[dd - 1] * rows[dd - 1]
        for ell in range(min(dd, d), 0, -1):
            q[ell] += contrib * q[ell - 1]
    gammas = np.array([weights.gamma_order(ell) for ell in range(d + 1)])
    return float(np.sum(gammas[1:] * q[1:].mean(axis=1)))


def worst_case_error_sq_direct(z, n: int, weights: PodWeights) -> float:
    """Brute-force subset sum; exponential in s, for cross-checking only."""
    from itertools import combinations

    z = np.asarray(z, np.int64)
    rows = _kernel_rows(z, n)
    total = 0.0
    for size in range(1, z.size + 1):
        for subset in combinations(range(z.size), size):
            prod = np.ones(n)
            for j in subset:
                prod = prod * rows[j]
            total += weights.gamma_set([j + 1 for j in subset]) * prod.mean()
    return float(total)


def cbc_construct(s: int, n: int, weights: PodWeights) -> LatticeRule:
    """Component-by-component minimizer of the shift-averaged error.

    Candidates are odd residues in [1, N-1] not chosen before; ties go to the
    smallest candidate.  All one-dimensional projections are equivalent, so
    z_1 = 1.
    """
    if n < 8 or n & (n - 1):
        raise ValueError("N must be a power of two, at least 8")
    if s < 1:
        raise ValueError("dimension must be positive")
    if s > n // 4:
        raise ValueError("s exceeds phi(N)/2: distinct components unattainable")
    if s > weights.s_max:
        raise ValueError("weights cover fewer dimensions than requested")
    candidates = np.arange(1, n, 2, dtype=np.int64)
    cand_rows = _kernel_rows(candidates, n)          # (N/2, N)
    bt = weights.beta_tilde
    gammas = np.array([weights.gamma_order(ell) for ell in range(s + 1)])

    z: list[int] = []
    q = np.zeros((s + 1, n))
    q[0] = 1.0
    used = np.zeros(candidates.size, bool)
    for d in range(1, s + 1):
        # minimizing e^2(z_1..z_{d-1}, c) over c only needs the new cross term
        g = gammas[1:d + 1] @ q[:d]
        scores = cand_rows @ g
        scores[used] = np.inf
        # near-exact ties (symmetry-equivalent candidates) go to the smallest
        best = np.min(scores)
        tol = 1e-12 * max(abs(best), np.mean(np.abs(scores[~used])))
        pick = int(np.flatnonzero(scores <= best + tol)[0])
        used[pick] = True
        z.append(int(candidates[pick]))
        contrib = bt[d - 1] * cand_rows[pick]
        for ell in range(d, 0, -1):
            q[ell] += contrib * q[ell - 1]
    return LatticeRule(np.array(z, np.int64), n)


def shifted_points(rule: LatticeRule, shift: np.ndarray) -> np.ndarray:
    """The N shifted points {i z / N + shift} - 1/2, rows in [-1/2, 1/2)^s."""
    shift = np.asarray(shift, float)
    if shift.shape != (rule.s,):
        raise ValueError("shift dimension mismatch")
    if np.any(shift < 0) or np.any(shift >= 1):
        raise ValueError("shift components must lie in [0, 1)")
    i = np.arange(1, rule.n_points + 1, dtype=np.int64)
    frac = (np.outer(i, rule.z) % rule.n_points) / float(rule.n_points)
    return (frac + shift) % 1.0 - 0.5


#: shifts are drawn in this many dimensions and truncated, so the same seed
#: yields nested shifts for every s up to the cap (and the same shifts for
#: every N)
SHIFT_DIM_CAP = 64


def draw_shifts(l_shifts: int, s: int, seed: int) -> np.ndarray:
    """L independent uniform shifts from per-shift substreams of `seed`."""
    children = np.random.SeedSequence(seed).spawn(l_shifts)
    dim = max(s, SHIFT_DIM_CAP)
    out = np.empty((l_shifts, s))
    for ell, child in enumerate(children):
        out[ell] = np.random.default_rng(child).random(dim)[:s]
    return out


class IntegrandError(RuntimeError):
    def __init__(self, shift_index: int, point_index: int, y: np.ndarray, cause):
        super().__init__(
            f"integrand failed at shift {shift_index}, point {point_index}: {cause}")
        self.shift_index = shift_index
        self.point_index = point_index
        self.y = y
        self.cause = cause


@dataclass
class ShiftedEstimate:
    """Mean over L shift-averages and the per-component standard error."""

    mean: np.ndarray
    standard_error: np.ndarray
    shift_averages: np.ndarray   # (L, dim) Q_{s,N,Delta_l}
    n_points: int
    s: int
    l_shifts: int
    seed: int


def qmc_estimate(rule: LatticeRule, l_shifts: int, seed: int, integrand,
                 map_fn=map) -> ShiftedEstimate:
    """Randomly shifted lattice estimate of E[integrand].

    integrand: y (s,) -> scalar or 1-D array (complex allowed).  `map_fn`
    must preserve input order (the builtin map, Pool.imap, ...); results are
    reduced in a fixed order so the estimate is bit-stable for a fixed seed
    regardless of how evaluations are scheduled.
    """
    if l_shifts < 2:
        raise ValueError("need at least two random shifts")
    shifts = draw_shifts(l_shifts, rule.s, seed)
    points = np.concatenate([shifted_points(rule, sh) for sh in shifts])
    n = rule.n_points
    values = None
    it = map_fn(integrand, list(points))
    for flat_idx in range(l_shifts * n):
        try:
            v = np.atleast_1d(np.asarray(next(it)))
        except StopIteration:
            raise RuntimeError("integrand iterator ended early")
        except Exception as exc:
            ell, i = divmod(flat_idx, n)
            raise IntegrandError(ell, i, points[flat_idx], exc) from exc
        if values is None:
            values = np.empty((l_shifts * n, v.size), complex)
        values[flat_idx] = v
    values = values.reshape(l_shifts, n, -1)
    q_ell = values.mean(axis=1)
    # centred accumulation: deterministic integrands give exactly zero spread
    dev = q_ell - q_ell[0]
    dev_mean = dev.mean(axis=0)
    mean = q_ell[0] + dev_mean
    stderr = np.sqrt(
        np.sum(np.abs(dev - dev_mean) ** 2, axis=0) / (l_shifts * (l_shifts - 1)))
    return ShiftedEstimate(mean=mean, standard_error=stderr, shift_averages=q_ell,
                           n_points=n, s=rule.s, l_shifts=l_shifts, seed=seed)
