"""Characteristic-function machinery for shell sums of IID amplitudes.

The random variable under study is S = sum_n sum_{k<=K_n} a_n X_{n,k}
with shell multiplicities K_n (sup-norm shell counts) and plateau
heights a_n = r_n^(-A).  Everything here works in the log domain:
ln |phi_S(t)|^-1 accumulates shell by shell, a factor with |phi| = 0
contributes +inf explicitly.

Generic constants are never hard-coded: decay exponents, concentration
constants and the Bernstein defect constant are fitted outputs carried
in the report objects together with their residuals.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.integrate import quad
from scipy.special import zeta as hurwitz_zeta
from scipy.stats import norm

from .errors import ValidationError
from .model import UNIFORM01, AmplitudeDistribution, InteractionPotential


# ---------------------------------------------------------------------------
# Shell weights
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ShellWeights:
    """Finite list of (n, K_n, a_n) with certified beyond-truncation tails.

    K_n is the exact sup-norm shell count (2 r_n + 1)^d - (2 r_{n-1} + 1)^d
    and a_n = r_n^(-A) is nonincreasing.
    """

    d: int
    A: float
    ups: float
    indices: np.ndarray
    counts: np.ndarray
    amps: np.ndarray

    def __post_init__(self):
        if np.any(np.diff(self.amps) > 1e-15):
            raise ValidationError("shell amplitudes must be nonincreasing")
        if np.any(self.counts < 1):
            raise ValidationError("shell counts must be >= 1")

    @classmethod
    def from_model(cls, d: int, A: float, ups: float = 1.0, n_max: int = 64) -> "ShellWeights":
        if n_max < 1:
            raise ValidationError("n_max must be >= 1")
        pot = InteractionPotential.piecewise(A=A, ups=ups)
        radii = np.array([pot.plateau_radius(k) for k in range(n_max + 1)], dtype=float)
        counts = (2 * radii[1:] + 1) ** d - (2 * radii[:-1] + 1) ** d
        amps = radii[1:] ** (-A)
        return cls(
            d=d,
            A=float(A),
            ups=float(ups),
            indices=np.arange(1, n_max + 1),
            counts=counts,
            amps=amps,
        )

    @property
    def n_max(self) -> int:
        return int(self.indices[-1])

    def subrange(self, lo: int, hi: int) -> "ShellWeights":
        """Shells with lo <= n <= hi."""
        if lo > hi:
            raise ValidationError(f"empty shell range: M={lo} > N={hi}")
        mask = (self.indices >= lo) & (self.indices <= hi)
        if not mask.any():
            raise ValidationError(f"no shells in range [{lo}, {hi}]")
        return ShellWeights(
            d=self.d,
            A=self.A,
            ups=self.ups,
            indices=self.indices[mask],
            counts=self.counts[mask],
            amps=self.amps[mask],
        )

    def dropped_quadratic_tail(self) -> float:
        """sum_{n > n_max} K_n a_n^2, certified upper bound.

        Used for the shell-product truncation report: each dropped
        factor obeys |1 - phi^K| <= K (|mean| a|t| + raw2 a^2 t^2 / 2).
        """
        return _shell_weight_tail(self.d, self.A, self.ups, self.n_max, power=2.0)

    def dropped_linear_tail(self) -> float:
        """sum_{n > n_max} K_n a_n, certified upper bound."""
        return _shell_weight_tail(self.d, self.A, self.ups, self.n_max, power=1.0)


def _shell_weight_tail(d: int, A: float, ups: float, n_from: int, power: float) -> float:
    """Upper bound on sum_{n > n_from} K_n a_n^power.

    For ups = 1 the shells are spheres and the sum is an exact
    Hurwitz-zeta expression; otherwise an explicit long partial sum plus
    a crude but certified integral remainder.
    """
    expo = power * A
    if expo <= d:
        raise ValidationError("shell tail diverges: power * A must exceed d")
    if ups == 1.0:
        total = 0.0
        for j in range(1, d + 1, 2):
            coeff = 2.0 * math.comb(d, j) * 2.0 ** (d - j)
            total += coeff * float(hurwitz_zeta(expo - d + j, n_from + 1))
        return total
    pot = InteractionPotential.piecewise(A=A, ups=ups)
    big = max(4 * n_from, 4000)
    radii = np.array([pot.plateau_radius(k) for k in range(n_from, big + 1)], dtype=float)
    counts = (2 * radii[1:] + 1) ** d - (2 * radii[:-1] + 1) ** d
    head = float(np.sum(counts * radii[1:] ** (-expo)))
    # every site of shell n sits at |x| <= r_n, so its weight r_n^(-expo)
    # is at most |x|^(-expo): the sphere-weighted power tail dominates
    r_big = radii[-1]
    tail = 0.0
    for j in range(1, d + 1, 2):
        coeff = 2.0 * math.comb(d, j) * 2.0 ** (d - j)
        tail += coeff * float(hurwitz_zeta(expo - d + j, r_big + 1))
    return head + tail


# ---------------------------------------------------------------------------
# Exact shell products
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CharFunGrid:
    """phi sampled on a grid with its log-inverse-modulus curve."""

    t_values: np.ndarray
    values: np.ndarray
    log_inv_modulus: np.ndarray


@dataclass(frozen=True)
class ShellProductResult:
    grid: CharFunGrid
    truncation_bound: np.ndarray


def shell_log_inv_modulus(dist: AmplitudeDistribution, weights: ShellWeights, t) -> np.ndarray:
    """ln |phi_S(t)|^-1 = sum_n K_n ln |phi_X(a_n t)|^-1, vectorized in t."""
    t = np.atleast_1d(np.asarray(t, dtype=float))
    # chunk over t so huge shell lists stay within memory
    chunk = max(1, int(2e7) // max(1, len(weights.amps)))
    out = np.empty(len(t))
    for lo in range(0, len(t), chunk):
        part = t[lo : lo + chunk]
        args = np.outer(part, weights.amps)
        lv = dist.log_inv_modulus(args.ravel()).reshape(args.shape)
        out[lo : lo + chunk] = lv @ weights.counts
    return out


def shell_product(
    dist: AmplitudeDistribution, weights: ShellWeights, t_values
) -> ShellProductResult:
    """Exact finite product phi_S(t) = prod_n phi_X(a_n t)^{K_n}.

    Accumulates the modulus in the log domain to avoid underflow; the
    phase accumulates separately.  The truncation bound sums
    K_n (|mean| a_n |t| + raw2 a_n^2 t^2 / 2) over the dropped shells.
    """
    t = np.atleast_1d(np.asarray(t_values, dtype=float))
    args = np.outer(t, weights.amps)
    phi = dist.char_fun(args.ravel()).reshape(args.shape)
    linv = dist.log_inv_modulus(args.ravel()).reshape(args.shape)
    log_inv = linv @ weights.counts
    phase = np.angle(phi) @ weights.counts
    with np.errstate(over="ignore"):
        values = np.exp(-log_inv) * (np.cos(phase) + 1j * np.sin(phase))
    quad_tail = weights.dropped_quadratic_tail()
    lin_tail = weights.dropped_linear_tail() if dist.mean != 0.0 else 0.0
    trunc = (
        abs(dist.mean) * lin_tail * np.abs(t)
        + 0.5 * dist.raw_second * quad_tail * t**2
    )
    grid = CharFunGrid(t_values=t, values=values, log_inv_modulus=log_inv)
    return ShellProductResult(grid=grid, truncation_bound=trunc)


@dataclass(frozen=True)
class DecayFit:
    """Least-squares slope of ln ln|phi_S|^-1 against ln t."""

    slope: float
    intercept: float
    residual: float
    t_values: np.ndarray
    log_inv_modulus: np.ndarray


def fit_decay_exponent(
    dist: AmplitudeDistribution,
    d: int,
    A: float,
    ups: float = 1.0,
    t_lo: float = 1e2,
    t_hi: float = 1e6,
    points: int = 25,
    n_max: Optional[int] = None,
) -> DecayFit:
    """Fitted decay exponent of ln |phi_S(t)|^-1 ~ c t^(d/A).

    The shell truncation is chosen so the smallest shell argument is
    deep inside the quadratic regime at t_hi.
    """
    t0 = dist.t0_certified
    if n_max is None:
        n_cut = (t_hi / t0) ** (1.0 / (ups * A))
        n_max = int(min(max(8 * n_cut, 64), 2_000_000))
    weights = ShellWeights.from_model(d=d, A=A, ups=ups, n_max=n_max)
    t = np.logspace(math.log10(t_lo), math.log10(t_hi), points)
    log_inv = shell_log_inv_modulus(dist, weights, t)
    mask = np.isfinite(log_inv) & (log_inv > 0)
    x = np.log(t[mask])
    y = np.log(log_inv[mask])
    slope, intercept = np.polyfit(x, y, 1)
    residual = float(np.sqrt(np.mean((y - (slope * x + intercept)) ** 2)))
    return DecayFit(
        slope=float(slope),
        intercept=float(intercept),
        residual=residual,
        t_values=t,
        log_inv_modulus=log_inv,
    )


# ---------------------------------------------------------------------------
# Taylor remainder and the quadratic log-bound
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class TaylorCheck:
    lhs: float
    rhs: float
    holds: bool


def taylor_remainder_check(n: int, s: float, tol: float = 1e-12) -> TaylorCheck:
    """|e^{is} - sum_{k<=n} (is)^k / k!| against |s|^{n+1} / (n+1)!."""
    if n < 1:
        raise ValidationError("order n must be >= 1")
    partial = 0j
    term = 1.0 + 0j
    for k in range(n + 1):
        if k > 0:
            term *= 1j * s / k
        partial += term
    lhs = abs(np.exp(1j * s) - partial)
    rhs = abs(s) ** (n + 1) / math.factorial(n + 1)
    return TaylorCheck(lhs=float(lhs), rhs=float(rhs), holds=bool(lhs <= rhs + tol))


def quadratic_log_bound(dist: AmplitudeDistribution, t: float) -> tuple:
    """(bound_applies, lower) for ln |phi(t)|^-1 >= sigma^2 t^2 / 4.

    The bound is certified for |t| <= min(sigma^2/m3, (3/5) sigma^(1/2))
    with centered moments; modulus is translation invariant, so the
    uncentered closed forms verify it directly.
    """
    if dist.var == 0.0:
        raise ValidationError("degenerate distribution: zero variance")
    applies = abs(t) <= dist.t0_certified
    lower = 0.25 * dist.var * t * t
    return bool(applies), float(lower)


# ---------------------------------------------------------------------------
# Head/tail split of the log-sum
# ---------------------------------------------------------------------------


def head_shell_count(weights: ShellWeights, t: float, t0: float) -> int:
    """Threshold index: 0 when every shell argument is already <= t0,
    otherwise the smallest n with a_n |t| <= t0."""
    args = weights.amps * abs(t)
    inside = args <= t0
    if inside.all():
        return 0
    if not inside.any():
        return int(weights.indices[-1]) + 1
    first = int(np.argmax(inside))
    return int(weights.indices[first])


@dataclass(frozen=True)
class TailBoundReport:
    """Head/tail split of the log-inverse-modulus.

    head_sum + tail_sum equals the full truncated log-sum; every tail
    factor is certified by the quadratic floor.
    """

    n_head: int
    head_sum: float
    tail_sum: float
    quadratic_floor: float
    holds: bool
    empty_tail: bool
    t: float
    t0: float


def tail_bound_S2(
    dist: AmplitudeDistribution,
    weights: ShellWeights,
    t: float,
    t0: Optional[float] = None,
) -> TailBoundReport:
    """S2(t) = sum_{n > N_t} K_n ln|phi_X(a_n t)|^-1 with certification.

    Every tail factor sits in the certified quadratic regime, so
    S2 >= (sigma^2/4) t^2 sum_{n > N_t} K_n a_n^2.
    """
    if t0 is None:
        t0 = dist.t0_certified
    if t0 <= 0 or t0 > dist.t0_certified + 1e-12:
        raise ValidationError(
            f"t0={t0:g} outside the certified quadratic regime "
            f"(max {dist.t0_certified:g})"
        )
    n_head = head_shell_count(weights, t, t0)
    mask = weights.indices > n_head
    head = float(
        np.dot(weights.counts[~mask], dist.log_inv_modulus(weights.amps[~mask] * abs(t)))
    ) if (~mask).any() else 0.0
    if not mask.any():
        return TailBoundReport(
            n_head=n_head, head_sum=head, tail_sum=0.0, quadratic_floor=0.0,
            holds=True, empty_tail=True, t=float(t), t0=float(t0),
        )
    amps = weights.amps[mask]
    counts = weights.counts[mask]
    lv = dist.log_inv_modulus(amps * abs(t))
    tail = float(np.dot(counts, lv))
    floor = 0.25 * dist.var * t * t * float(np.dot(counts, amps**2))
    return TailBoundReport(
        n_head=n_head,
        head_sum=head,
        tail_sum=tail,
        quadratic_floor=floor,
        holds=bool(tail + 1e-12 >= floor),
        empty_tail=False,
        t=float(t),
        t0=float(t0),
    )


@dataclass(frozen=True)
class PartialLogReport:
    value: float
    all_in_regime: bool
    skipped_shells: int


def partial_log_bound(
    dist: AmplitudeDistribution,
    weights: ShellWeights,
    M: int,
    N: int,
    t: float,
    t0: Optional[float] = None,
) -> PartialLogReport:
    """Exact sum_{n=M}^{N} K_n ln|phi_X(a_n t)|^-1.

    When some leading factors fall outside the quadratic regime
    (a_n |t| > t0) the sum restricts to the factors that are inside,
    and the report says how many were skipped.
    """
    if M > N:
        raise ValidationError(f"empty shell range: M={M} > N={N}")
    if t0 is None:
        t0 = dist.t0_certified
    sub = weights.subrange(M, N)
    in_regime = sub.amps * abs(t) <= t0
    lv = dist.log_inv_modulus(sub.amps * abs(t))
    value = float(np.dot(sub.counts[in_regime], lv[in_regime]))
    return PartialLogReport(
        value=value,
        all_in_regime=bool(in_regime.all()),
        skipped_shells=int((~in_regime).sum()),
    )


def quadratic_cap(dist: AmplitudeDistribution, weights: ShellWeights, n: int) -> float:
    """T_n = t0 / a_n: largest |t| keeping shell n in the quadratic regime."""
    idx = np.searchsorted(weights.indices, n)
    if idx >= len(weights.indices) or weights.indices[idx] != n:
        raise ValidationError(f"shell {n} not present")
    return dist.t0_certified / float(weights.amps[idx])


# ---------------------------------------------------------------------------
# Smoothed indicator and the concentration bound
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SmoothedIndicator:
    """Gaussian-mollified window majorizing the indicator of [-eps, eps].

    chi(x) = C_a * (1_{[-4 eps, 4 eps]} * g_{a eps})(x) where g is the
    centered Gaussian density.  The calibration constant
    C_a = 1 / (Phi(3/a) + Phi(5/a) - 1) is exactly what makes
    chi >= 1 on [-eps, eps] for every eps (the convolution scales).
    Fourier side: |chi_hat(t)| = 2 C_a |sin(4 eps t)/t| exp(-sigma^2 t^2/2),
    majorized by 2 C_a min(4 eps, 1/|t|) exp(-sigma^2 t^2/2).
    """

    eps: float
    a: float = 1.2

    def __post_init__(self):
        if self.eps <= 0:
            raise ValidationError("eps must be positive")
        if self.a <= 0:
            raise ValidationError("width multiplier a must be positive")

    @property
    def sigma(self) -> float:
        return self.a * self.eps

    @property
    def calibration(self) -> float:
        m = norm.cdf(3.0 / self.a) + norm.cdf(5.0 / self.a) - 1.0
        return 1.0 / m

    def chi(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        s = self.sigma
        val = norm.cdf((4 * self.eps - x) / s) - norm.cdf((-4 * self.eps - x) / s)
        return self.calibration * val

    def fourier_abs(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        with np.errstate(divide="ignore", invalid="ignore"):
            osc = np.where(t == 0.0, 4 * self.eps, np.abs(np.sin(4 * self.eps * t)) / np.abs(t))
        return 2.0 * self.calibration * osc * np.exp(-0.5 * self.sigma**2 * t**2)

    def fourier_majorant(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        with np.errstate(divide="ignore"):
            cap = np.where(t == 0.0, 4 * self.eps, np.minimum(4 * self.eps, 1.0 / np.abs(t)))
        return 2.0 * self.calibration * cap * np.exp(-0.5 * self.sigma**2 * t**2)


@dataclass(frozen=True)
class ConcentrationReport:
    """Certified upper bound for P{Y + S_{M,N} in I_eps}."""

    near_integral: float
    far_integral: float
    tail_integral: float
    bound: float
    eps: float
    center: float
    threshold: float
    t_eps: float
    t_cap_low: float
    t_cap_high: float
    cap_condition_ok: bool

    @property
    def J1(self) -> float:
        return self.near_integral + self.far_integral

    @property
    def J2(self) -> float:
        return self.tail_integral


def concentration_bound(
    dist: AmplitudeDistribution,
    weights: ShellWeights,
    M: int,
    N: int,
    center: float,
    eps: float,
    t0: Optional[float] = None,
    theta: float = 0.5,
    a: float = 1.2,
) -> ConcentrationReport:
    """Upper bound on the measure of [center-eps, center+eps] under S_{M,N}.

    Parseval with the smoothed indicator: the bound is
    (1/2pi) * int |chi_hat(t)| |phi_{S_{M,N}}(t)| dt, split at T_M and
    at T_eps = eps^-1 ln^2 eps^-1.  The integrand uses the exact shell
    product modulus; beyond T_eps only the Gaussian envelope survives
    (|phi| <= 1).  A shifted center multiplies chi_hat by a unimodular
    factor, so the bound is center-free while the exact measure is not.
    """
    if dist.var == 0.0:
        raise ValidationError("degenerate distribution: zero variance")
    if theta <= 0:
        raise ValidationError("theta must be positive")
    sub = weights.subrange(M, N)
    # a_N^(1/(1+theta)); for unit plateau growth this is N^(-A/(1+theta))
    threshold = float(sub.amps[-1]) ** (1.0 / (1.0 + theta))
    if eps < threshold:
        raise ValidationError(
            f"interval half-width {eps:g} is below the validity threshold "
            f"{threshold:g} = N^(-A/(1+theta)) for N={int(sub.indices[-1])}, "
            f"theta={theta:g}"
        )
    if t0 is None:
        t0 = dist.t0_certified

    window = SmoothedIndicator(eps=eps, a=a)
    t_eps = (1.0 / eps) * math.log(1.0 / eps) ** 2 if eps < 1.0 else 1.0 / eps
    t_cap_low = t0 / float(sub.amps[0])  # T_M
    t_cap_high = t0 / float(sub.amps[-1])  # T_N

    def integrand(t: float) -> float:
        lv = shell_log_inv_modulus(dist, sub, t)[0]
        mod = math.exp(-lv) if np.isfinite(lv) else 0.0
        return float(window.fourier_majorant(t)) * mod

    def chunked_quad(lo: float, hi: float) -> float:
        """Piecewise adaptive quadrature; the error estimates are added
        so the result stays an upper bound."""
        total = 0.0
        edges = np.linspace(lo, hi, max(2, int(math.ceil((hi - lo) / 40.0)) + 1))
        for a, b in zip(edges[:-1], edges[1:]):
            val, err = quad(integrand, a, b, limit=150)
            total += val + abs(err)
        return total

    split = min(t_cap_low, t_eps)
    near = chunked_quad(0.0, split)
    far = chunked_quad(split, t_eps) if t_eps > split else 0.0
    near = 2.0 * near / (2.0 * math.pi)
    far = 2.0 * far / (2.0 * math.pi)

    # Gaussian envelope beyond T_eps; |phi| <= 1 and min(4 eps, 1/t) <= 1/T_eps
    sigma = window.sigma
    gauss_tail = math.sqrt(2 * math.pi) / sigma * float(norm.sf(sigma * t_eps))
    j2 = (2.0 * window.calibration / (2.0 * math.pi)) * min(4 * eps, 1.0 / t_eps) * gauss_tail * 2.0

    return ConcentrationReport(
        near_integral=near,
        far_integral=far,
        tail_integral=j2,
        bound=near + far + j2,
        eps=float(eps),
        center=float(center),
        threshold=float(threshold),
        t_eps=float(t_eps),
        t_cap_low=float(t_cap_low),
        t_cap_high=float(t_cap_high),
        cap_condition_ok=bool(t_eps <= t_cap_high),
    )


# ---------------------------------------------------------------------------
# Cramer ripple bound
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CramerReport:
    applicable: bool
    reason: str
    head_count: int
    bound: float
    exact_head_sum: float
    holds: bool


def cramer_argument_floor(dist: AmplitudeDistribution, zeta: float) -> Optional[float]:
    """Smallest s* with sup_{|s| >= s*} |phi(s)| <= zeta, or None.

    uniform01 has |phi(s)| <= 2/|s| (Rajchman), so s* = 2/zeta; the
    Bernoulli laws have limsup |phi| = 1 and never satisfy the
    condition.
    """
    if dist.kind == UNIFORM01:
        return 2.0 / zeta
    return None


def cramer_ripple_bound(
    dist: AmplitudeDistribution,
    zeta: float,
    weights: ShellWeights,
    t: float,
) -> CramerReport:
    """Head-sum floor ln(zeta^-1) * (number of factors with |phi| <= zeta).

    Counts shells whose argument a_n |t| clears the distribution's
    zeta-region; each such factor contributes at least ln(zeta^-1), so
    the exact head sum dominates the returned bound whenever it
    applies.
    """
    if not 0.0 < zeta < 1.0:
        raise ValidationError("zeta must lie in (0, 1)")
    s_star = cramer_argument_floor(dist, zeta)
    if s_star is None:
        return CramerReport(
            applicable=False,
            reason=f"{dist.kind} violates Cramer's condition (limsup |phi| = 1)",
            head_count=0,
            bound=0.0,
            exact_head_sum=0.0,
            holds=True,
        )
    args = weights.amps * abs(t)
    mask = args >= s_star
    count = int(weights.counts[mask].sum())
    if count == 0:
        return CramerReport(
            applicable=True, reason="no head factors at this t", head_count=0,
            bound=0.0, exact_head_sum=0.0, holds=True,
        )
    # per-argument certificate: every counted factor must clear zeta
    mods = np.abs(dist.char_fun(args[mask]))
    if np.any(mods > zeta + 1e-12):
        return CramerReport(
            applicable=False,
            reason="an evaluated head factor exceeds zeta",
            head_count=count,
            bound=0.0,
            exact_head_sum=0.0,
            holds=True,
        )
    bound = math.log(1.0 / zeta) * count
    exact = float(np.dot(weights.counts[mask], dist.log_inv_modulus(args[mask])))
    return CramerReport(
        applicable=True,
        reason="",
        head_count=count,
        bound=bound,
        exact_head_sum=exact,
        holds=bool(exact + 1e-12 >= bound),
    )


# ---------------------------------------------------------------------------
# Polya-Szego summation limit
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class RadiiSpec:
    """Monotone radius sequence r_n with counting exponent lam."""

    kind: str  # "integers" | "floor_power"
    ups: float = 1.0

    @property
    def lam(self) -> float:
        return 1.0 if self.kind == "integers" else 1.0 / self.ups

    def values_up_to(self, t: float) -> np.ndarray:
        if self.kind == "integers":
            return np.arange(1, int(math.floor(t)) + 1, dtype=float)
        pot = InteractionPotential.piecewise(A=1.0, ups=self.ups)
        ks = []
        k = 1
        while pot.plateau_radius(k) <= t:
            ks.append(pot.plateau_radius(k))
            k += 1
        return np.array(ks, dtype=float)


@dataclass(frozen=True)
class PolyaSzegoReport:
    t_values: np.ndarray
    lhs: np.ndarray
    rhs: float
    rhs_cut_error: float
    final_gap: float


def polya_szego_limit(
    f: Callable[[np.ndarray], np.ndarray],
    radii: RadiiSpec,
    t_values: Sequence[float],
    c: float = 1.0,
    rhs_points: int = 4_000_000,
    rhs_cut: float = 1e-3,
) -> PolyaSzegoReport:
    """Empirical means (1/N_t) sum_{r_n <= t} f(r_n / t) against the
    regular-variation integral int_0^{c^lam} f(s^{1/lam}) ds.

    The integral is a vectorized midpoint rule on [cut, c^lam] with a
    declared remainder bound cut * sup|f| on the head; good enough for
    bounded Riemann-integrable f including highly oscillatory ones.
    """
    lam = radii.lam
    t_arr = np.asarray(list(t_values), dtype=float)
    lhs = np.empty_like(t_arr)
    for i, t in enumerate(t_arr):
        rs = radii.values_up_to(t)
        if len(rs) == 0:
            raise ValidationError(f"no radii at or below t={t}")
        ratios = rs / t
        ratios = ratios[ratios <= c]
        try:
            vals = np.asarray(f(ratios), dtype=float)
        except Exception as exc:
            raise ValidationError(f"f not evaluable on (0, {c}]: {exc}") from exc
        lhs[i] = float(np.sum(vals)) / len(rs)

    upper = c**lam
    cut = min(rhs_cut, upper / 8.0)
    grid = np.linspace(cut, upper, rhs_points, endpoint=False)
    mids = grid + (upper - cut) / rhs_points / 2.0
    vals = np.asarray(f(mids ** (1.0 / lam)), dtype=float)
    rhs = float(np.mean(vals) * (upper - cut))
    # head segment (0, cut]: midpoint estimate, declared worst-case error
    head_pts = max(10_000, rhs_points // 40)
    head_grid = np.linspace(0.0, cut, head_pts, endpoint=False) + cut / head_pts / 2.0
    head_vals = np.asarray(f(head_grid ** (1.0 / lam)), dtype=float)
    rhs += float(np.mean(head_vals) * cut)
    sup_probe = max(float(np.max(np.abs(head_vals))), float(np.max(np.abs(vals))))
    cut_err = 2.0 * cut * max(sup_probe, 1.0)
    return PolyaSzegoReport(
        t_values=t_arr,
        lhs=lhs,
        rhs=rhs,
        rhs_cut_error=float(cut_err),
        final_gap=float(abs(lhs[-1] - rhs)),
    )


# ---------------------------------------------------------------------------
# Bernstein approximation for weakly dependent terms
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class BernsteinSequence:
    """Centered term sequence with conditional-moment deviation bounds.

    ``iid`` terms use a centered amplitude law; ``markov_pm1`` is a
    stationary two-state +-1 chain with flip probability q, whose
    conditional mean deviates by |1 - 2q| from zero.
    """

    kind: str  # "iid" | "markov_pm1"
    n: int
    dist: Optional[AmplitudeDistribution] = None
    flip_prob: Optional[float] = None

    def __post_init__(self):
        if self.n < 1:
            raise ValidationError("need at least one term")
        if self.kind == "iid":
            if self.dist is None:
                raise ValidationError("iid sequence needs a distribution")
            if self.dist.var == 0.0:
                raise ValidationError("degenerate terms")
        elif self.kind == "markov_pm1":
            if self.flip_prob is None or not 0.0 < self.flip_prob < 1.0:
                raise ValidationError("markov_pm1 needs flip probability in (0, 1)")
        else:
            raise ValidationError(f"unknown sequence kind {self.kind!r}")

    @property
    def sigma2(self) -> float:
        return self.dist.var if self.kind == "iid" else 1.0

    @property
    def rho(self) -> float:
        return 0.0 if self.kind == "iid" else 1.0 - 2.0 * self.flip_prob

    @property
    def variance_of_sum(self) -> float:
        """B_n = E S_n^2, exact (stationary autocovariance rho^|i-j|)."""
        n, rho, s2 = self.n, self.rho, self.sigma2
        if rho == 0.0:
            return n * s2
        m = np.arange(1, n)
        return s2 * (n + 2.0 * float(np.sum((n - m) * rho**m)))

    @property
    def alpha_k(self) -> float:
        return 0.0 if self.kind == "iid" else abs(self.rho)

    @property
    def beta_k(self) -> float:
        return 0.0

    @property
    def c_k(self) -> float:
        return self.dist.abs_third_centered if self.kind == "iid" else 1.0

    def centered_char(self, s) -> np.ndarray:
        """phi of one centered term at argument s."""
        if self.kind == "iid":
            return np.exp(-1j * np.asarray(s) * self.dist.mean) * self.dist.char_fun(s)
        return np.cos(np.asarray(s, dtype=float)) + 0j

    def exact_char(self, t) -> np.ndarray:
        """phi_n(t) = E exp(i t S_n / sqrt(B_n)), exact (product / transfer)."""
        t = np.atleast_1d(np.asarray(t, dtype=float))
        theta = t / math.sqrt(self.variance_of_sum)
        if self.kind == "iid":
            return self.centered_char(theta) ** self.n
        q = self.flip_prob
        out = np.empty(len(t), dtype=complex)
        trans = np.array([[1 - q, q], [q, 1 - q]])
        for i, th in enumerate(theta):
            phase = np.array([np.exp(1j * th), np.exp(-1j * th)])
            v = 0.5 * phase
            for _ in range(self.n - 1):
                v = (v @ trans) * phase
            out[i] = v.sum()
        return out

    def enumerated_char(self, t) -> np.ndarray:
        """2^n path enumeration of phi_n (oracle, markov only, n <= 20)."""
        if self.kind != "markov_pm1":
            raise ValidationError("enumeration oracle is for the markov chain")
        if self.n > 20:
            raise ValidationError("n too large for exact enumeration; use exact_char")
        t = np.atleast_1d(np.asarray(t, dtype=float))
        theta = t / math.sqrt(self.variance_of_sum)
        q = self.flip_prob
        idx = np.arange(1 << self.n)
        bits = (idx[:, None] >> np.arange(self.n)) & 1
        states = 2.0 * bits - 1.0
        flips = np.sum(states[:, 1:] != states[:, :-1], axis=1)
        probs = 0.5 * q**flips * (1 - q) ** (self.n - 1 - flips)
        sums = states.sum(axis=1)
        return np.array([np.sum(probs * np.exp(1j * th * sums)) for th in theta])


@dataclass(frozen=True)
class BernsteinReport:
    t_values: np.ndarray
    phi: np.ndarray
    psi: np.ndarray
    eta_sum: float
    defect_constant: float
    sup_gap: float
    holds: bool


def bernstein_approximation(
    seq: BernsteinSequence, T: float = 1.0, points: int = 201
) -> BernsteinReport:
    """Quadratic product Psi_n(t) = prod_k (1 - sigma_k^2 t^2 / (2 B_n))
    against the exact phi_n, with the per-term defect budget.

    The defect constant C_T is calibrated, not assumed: it is the
    smallest constant making the single-term expansion
    |E(e^{itY_k} | past) - (1 - sigma_k^2 t^2 / (2 B_n))| <=
    C_T (alpha_k B_n^-1/2 + beta_k B_n^-1 + c_k B_n^-3/2) valid on
    |t| <= T, maximized over conditioning states.  The reported bound
    sup |phi_n - Psi_n| <= sum eta_k then holds by the telescoping
    recurrence as long as every Psi factor stays in [-1, 1].
    """
    t = np.linspace(-T, T, points)
    B = seq.variance_of_sum
    theta = t / math.sqrt(B)
    quad_factor = 1.0 - seq.sigma2 * t**2 / (2.0 * B)
    if np.any(np.abs(quad_factor) > 1.0 + 1e-12):
        raise ValidationError("Psi factor leaves [-1, 1]; shrink T")
    psi = quad_factor**seq.n

    denom = (
        seq.alpha_k / math.sqrt(B) + seq.beta_k / B + seq.c_k / B**1.5
    )
    if denom <= 0:
        raise ValidationError("zero defect budget")
    if seq.kind == "iid":
        defect = np.abs(seq.centered_char(theta) - quad_factor)
    else:
        q = seq.flip_prob
        cond_plus = (1 - q) * np.exp(1j * theta) + q * np.exp(-1j * theta)
        uncond = np.cos(theta)
        defect = np.maximum(np.abs(cond_plus - quad_factor), np.abs(uncond - quad_factor))
    c_t = float(np.max(defect) / denom)
    eta_sum = seq.n * c_t * denom

    phi = seq.exact_char(t)
    gap = float(np.max(np.abs(phi - psi)))
    return BernsteinReport(
        t_values=t,
        phi=phi,
        psi=psi,
        eta_sum=float(eta_sum),
        defect_constant=c_t,
        sup_gap=gap,
        holds=bool(gap <= eta_sum + 1e-12),
    )
