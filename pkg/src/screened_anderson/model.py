"""Interaction potential, amplitude laws, field samples, cumulative potential.

The single-scatterer profile u(r) is piecewise constant: it takes the
value r_k^(-A) on [r_k, r_{k+1}) with plateau radii r_k = floor(k^ups).
Below the first plateau (r < r_1 = 1, i.e. only at the origin of Z^d)
the first plateau is extended, so u(0) = 1 and the self-term of the
cumulative potential V(x) = sum_y u(|y-x|) w_y exists and u stays
bounded by 1.  A smooth power-law profile max(r,1)^(-A) is available
for comparison runs.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Iterable, Mapping, Optional

import numpy as np
from scipy.special import zeta as hurwitz_zeta

from .errors import ValidationError
from .lattice import Site, sup_dist

PIECEWISE = "piecewise_constant"
SMOOTH = "smooth_power"


@dataclass(frozen=True)
class InteractionPotential:
    """Screening profile u(r) >= 0, nonincreasing, summable for A > d."""

    kind: str
    A: float
    ups: float = 1.0

    def __post_init__(self):
        if self.kind not in (PIECEWISE, SMOOTH):
            raise ValidationError(f"unknown potential kind {self.kind!r}")
        if self.A <= 0:
            raise ValidationError("decay exponent A must be positive")
        if self.kind == PIECEWISE and self.ups < 1.0:
            raise ValidationError("plateau exponent ups must be >= 1")

    @classmethod
    def piecewise(cls, A: float, ups: float = 1.0) -> "InteractionPotential":
        return cls(kind=PIECEWISE, A=float(A), ups=float(ups))

    @classmethod
    def smooth(cls, A: float) -> "InteractionPotential":
        return cls(kind=SMOOTH, A=float(A))

    def plateau_radius(self, k: int) -> int:
        """r_k = floor(k^ups); r_0 = 0."""
        if k <= 0:
            return 0
        if float(self.ups).is_integer():
            return k ** int(self.ups)
        # 1e-12 guard against floor(8.000000000000002) style float noise
        return int(math.floor(k ** self.ups + 1e-12))

    def plateau_index(self, r: float) -> int:
        """The k with r in [r_k, r_{k+1}); 0 when r < r_1."""
        if r < 0:
            raise ValidationError("radius must be >= 0")
        if r < self.plateau_radius(1):
            return 0
        k = max(1, int(r ** (1.0 / self.ups)))
        while self.plateau_radius(k + 1) <= r:
            k += 1
        while self.plateau_radius(k) > r:
            k -= 1
        return k

    def amplitude(self, n: int) -> float:
        """Plateau height a_n = r_n^(-A)."""
        if n < 1:
            raise ValidationError("plateau amplitude defined for n >= 1")
        return float(self.plateau_radius(n)) ** (-self.A)

    def value(self, r: float) -> float:
        """u(r); the first plateau extends down to r = 0."""
        if r < 0:
            raise ValidationError("radius must be >= 0")
        if self.kind == SMOOTH:
            return max(float(r), 1.0) ** (-self.A)
        k = self.plateau_index(r)
        if k == 0:
            return float(self.plateau_radius(1)) ** (-self.A)
        return float(self.plateau_radius(k)) ** (-self.A)

    def value_table(self, max_r: int) -> np.ndarray:
        """u at integer distances 0..max_r (vectorized assembly helper)."""
        return np.array([self.value(r) for r in range(max_r + 1)])


def eval_interaction(pot: InteractionPotential, r: float) -> float:
    """Interaction profile u(r) at a nonnegative radius."""
    return pot.value(r)


# ---------------------------------------------------------------------------
# Amplitude distributions
# ---------------------------------------------------------------------------

BERNOULLI_SYM = "bernoulli_sym"
BERNOULLI_P = "bernoulli_p"
UNIFORM01 = "uniform01"


@dataclass(frozen=True)
class AmplitudeDistribution:
    """IID scatterer amplitude law with support in [-1, 1].

    Carries closed-form characteristic function and the raw/centered
    moments used by the quadratic log-bound machinery.
    """

    kind: str
    p: Optional[float] = None

    def __post_init__(self):
        if self.kind not in (BERNOULLI_SYM, BERNOULLI_P, UNIFORM01):
            raise ValidationError(f"unknown amplitude distribution {self.kind!r}")
        if self.kind == BERNOULLI_P:
            if self.p is None or not 0.0 < self.p < 1.0:
                raise ValidationError("bernoulli_p needs p in (0, 1)")
        elif self.p is not None:
            raise ValidationError(f"{self.kind} takes no parameter")

    @classmethod
    def bernoulli_sym(cls) -> "AmplitudeDistribution":
        return cls(kind=BERNOULLI_SYM)

    @classmethod
    def bernoulli_p(cls, p: float) -> "AmplitudeDistribution":
        return cls(kind=BERNOULLI_P, p=float(p))

    @classmethod
    def uniform01(cls) -> "AmplitudeDistribution":
        return cls(kind=UNIFORM01)

    # --- moments -----------------------------------------------------------

    @property
    def mean(self) -> float:
        return {BERNOULLI_SYM: 0.0, BERNOULLI_P: self.p, UNIFORM01: 0.5}[self.kind]

    @property
    def raw_second(self) -> float:
        """E w^2 (uncentered)."""
        return {BERNOULLI_SYM: 1.0, BERNOULLI_P: self.p, UNIFORM01: 1.0 / 3.0}[self.kind]

    @property
    def raw_abs_third(self) -> float:
        """E |w|^3 (uncentered)."""
        return {BERNOULLI_SYM: 1.0, BERNOULLI_P: self.p, UNIFORM01: 0.25}[self.kind]

    @property
    def var(self) -> float:
        """Centered second moment."""
        if self.kind == BERNOULLI_SYM:
            return 1.0
        if self.kind == BERNOULLI_P:
            return self.p * (1.0 - self.p)
        return 1.0 / 12.0

    @property
    def abs_third_centered(self) -> float:
        """Centered E |w - Ew|^3."""
        if self.kind == BERNOULLI_SYM:
            return 1.0
        if self.kind == BERNOULLI_P:
            q = 1.0 - self.p
            return self.p * q * (self.p**2 + q**2)
        return 1.0 / 32.0

    @property
    def support(self) -> tuple:
        if self.kind == BERNOULLI_SYM:
            return (-1.0, 1.0)
        return (0.0, 1.0)

    @property
    def nonnegative(self) -> bool:
        return self.support[0] >= 0.0

    @property
    def t0_certified(self) -> float:
        """Largest |t| where the quadratic lower bound is certified.

        min(sigma^2/m3, (3/5) sigma^(1/2)) with centered moments; inside
        this range ln|phi(t)|^-1 >= sigma^2 t^2 / 4.
        """
        s2 = self.var
        m3 = self.abs_third_centered
        return min(s2 / m3, 0.6 * s2**0.25)

    # --- characteristic function -------------------------------------------

    def char_fun(self, t):
        """E exp(itw), vectorized over t."""
        scalar = np.ndim(t) == 0
        t = np.atleast_1d(np.asarray(t, dtype=float))
        if self.kind == BERNOULLI_SYM:
            out = np.cos(t) + 0j
        elif self.kind == BERNOULLI_P:
            out = (1.0 - self.p) + self.p * np.exp(1j * t)
        else:
            out = np.ones_like(t, dtype=complex)
            nz = t != 0
            out[nz] = (np.exp(1j * t[nz]) - 1.0) / (1j * t[nz])
        return complex(out[0]) if scalar else out

    def log_inv_modulus(self, t):
        """ln |phi(t)|^-1, vectorized, accurate near t = 0, +inf at zeros.

        Uses 1 - |phi|^2 identities so small arguments do not lose
        precision to cancellation.
        """
        scalar = np.ndim(t) == 0
        t = np.atleast_1d(np.asarray(t, dtype=float))
        with np.errstate(divide="ignore", invalid="ignore"):
            if self.kind == BERNOULLI_SYM:
                # |cos t| = sqrt(1 - sin^2 t); -log via log1p for accuracy
                s2 = np.sin(t) ** 2
                out = -0.5 * np.log1p(-s2)
                out = np.where(s2 >= 1.0, np.inf, out)
            elif self.kind == BERNOULLI_P:
                # |phi|^2 = 1 - 4p(1-p) sin^2(t/2)
                w = 4.0 * self.p * (1.0 - self.p) * np.sin(t / 2.0) ** 2
                out = -0.5 * np.log1p(-w)
                out = np.where(w >= 1.0, np.inf, out)
            else:
                # |phi| = |sin(t/2) / (t/2)|
                x = np.abs(t) / 2.0
                small = x < 1e-4
                out = np.empty_like(x)
                xs = x[small]
                out[small] = xs**2 / 6.0 + xs**4 / 180.0
                xl = x[~small]
                ratio = np.abs(np.sin(xl) / xl)
                out[~small] = np.where(ratio > 0, -np.log(ratio), np.inf)
        return float(out[0]) if scalar else out

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        """IID draws; one uniform consumed per site in all three laws."""
        u = rng.random(size)
        if self.kind == BERNOULLI_SYM:
            return np.where(u < 0.5, -1.0, 1.0)
        if self.kind == BERNOULLI_P:
            return (u < self.p).astype(float)
        return u

    def to_dict(self) -> dict:
        d = {"kind": self.kind}
        if self.p is not None:
            d["p"] = self.p
        return d

    @classmethod
    def from_dict(cls, d: Mapping) -> "AmplitudeDistribution":
        return cls(kind=d["kind"], p=d.get("p"))


def single_char_fun(dist: AmplitudeDistribution, t: float) -> complex:
    """Closed-form characteristic function of one amplitude."""
    return dist.char_fun(t)


# ---------------------------------------------------------------------------
# Field samples
# ---------------------------------------------------------------------------

BG_ZERO = "frozen_zero"
BG_VALUE = "frozen_value"
BG_SUP = "sup_support"
BG_UNDEFINED = "undefined"


@dataclass(frozen=True)
class Background:
    """Rule assigning amplitudes to every site outside the explicit domain."""

    kind: str
    value: Optional[float] = None

    @classmethod
    def zero(cls) -> "Background":
        return cls(kind=BG_ZERO)

    @classmethod
    def frozen(cls, value: float) -> "Background":
        return cls(kind=BG_VALUE, value=float(value))

    @classmethod
    def sup_support(cls) -> "Background":
        return cls(kind=BG_SUP)

    @classmethod
    def undefined(cls) -> "Background":
        return cls(kind=BG_UNDEFINED)


@dataclass(frozen=True, eq=False)
class FieldSample:
    """Finite assignment of amplitudes plus a background rule.

    Deterministic configurations use the same container; ``dist`` is
    optional and only needed to resolve a sup-of-support background or
    to certify monotonicity of the plus-modification.
    """

    values: dict
    background: Background
    dist: Optional[AmplitudeDistribution] = None
    monotone_guarantee: Optional[bool] = None

    def background_value(self) -> float:
        bg = self.background
        if bg.kind == BG_ZERO:
            return 0.0
        if bg.kind == BG_VALUE:
            return bg.value
        if bg.kind == BG_SUP:
            if self.dist is None:
                raise ValidationError("sup_support background needs a distribution")
            return self.dist.support[1]
        raise ValidationError("field value requested outside the explicit domain "
                              "with an undefined background")

    def value_at(self, site: Site) -> float:
        v = self.values.get(tuple(site))
        if v is not None:
            return v
        return self.background_value()

    def values_for(self, sites: Iterable[Site]) -> np.ndarray:
        return np.array([self.value_at(s) for s in sites])

    @property
    def domain(self) -> frozenset:
        return frozenset(self.values.keys())

    def to_json(self) -> str:
        """Lossless JSON form; site coords map to amplitude values."""
        payload = {
            "values": sorted(
                ([list(site), v] for site, v in self.values.items()),
            ),
            "background": {"kind": self.background.kind, "value": self.background.value},
            "dist": self.dist.to_dict() if self.dist is not None else None,
            "monotone_guarantee": self.monotone_guarantee,
        }
        return json.dumps(payload, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "FieldSample":
        payload = json.loads(text)
        values = {tuple(int(c) for c in site): float(v) for site, v in payload["values"]}
        bg = payload["background"]
        dist = payload.get("dist")
        return cls(
            values=values,
            background=Background(kind=bg["kind"], value=bg["value"]),
            dist=AmplitudeDistribution.from_dict(dist) if dist else None,
            monotone_guarantee=payload.get("monotone_guarantee"),
        )


def sample_field(
    dist: AmplitudeDistribution,
    region: Iterable[Site],
    rng: np.random.Generator,
    background: Background = Background.zero(),
) -> FieldSample:
    """IID sample on a finite region; sites are drawn in sorted order."""
    sites = sorted(tuple(s) for s in region)
    draws = dist.sample(rng, len(sites))
    return FieldSample(values=dict(zip(sites, draws.tolist())), background=background, dist=dist)


def plus_modification(field: FieldSample, ball_plus) -> FieldSample:
    """Upper configuration: equal to the field inside ``ball_plus``,
    equal to sup of the support outside.

    For nonnegative-support distributions V(x, w) <= V(x, w+) pointwise;
    ``monotone_guarantee`` is False (warning flag) when the support has
    a negative part.
    """
    if field.dist is None:
        raise ValidationError("plus modification needs the amplitude distribution")
    inside = {}
    for site in ball_plus.sites():
        if site not in field.values:
            raise ValidationError("field must be explicit on the plus-ball")
        inside[site] = field.values[site]
    return FieldSample(
        values=inside,
        background=Background.sup_support(),
        dist=field.dist,
        monotone_guarantee=field.dist.nonnegative,
    )


# ---------------------------------------------------------------------------
# Radial interaction sums (exact, with certified tails)
# ---------------------------------------------------------------------------


def _sphere_power_tail(dim: int, expo: float, radius: int) -> float:
    """sum_{s > radius} [(2s+1)^d - (2s-1)^d] * s^(-expo), exact via
    Hurwitz zeta on the odd-power binomial expansion.  Needs expo > d."""
    if expo <= dim:
        raise ValidationError("tail sum diverges unless the exponent exceeds d")
    total = 0.0
    for j in range(1, dim + 1, 2):
        coeff = 2.0 * math.comb(dim, j) * 2.0 ** (dim - j)
        total += coeff * float(hurwitz_zeta(expo - dim + j, radius + 1))
    return total


def _plateau_site_counts(pot: InteractionPotential, dim: int, lo: int, hi: int):
    """Per-plateau site counts for radii in [lo, hi] (inclusive).

    Yields (plateau_index k, height r_k^(-A), number of sites with
    |x| in [max(r_k, lo), min(r_{k+1}-1, hi)]).
    """
    if lo > hi:
        return
    k = max(1, pot.plateau_index(lo))
    while True:
        rk = pot.plateau_radius(k)
        rk1 = pot.plateau_radius(k + 1)
        a = max(rk, lo)
        b = min(rk1 - 1, hi)
        if a <= b:
            count = (2 * b + 1) ** dim - (2 * a - 1) ** dim
            yield k, float(rk) ** (-pot.A), count
        if rk1 > hi:
            return
        k += 1


def radial_interaction_sum(pot: InteractionPotential, dim: int, r_max: int) -> float:
    """sum of u(|x|) over 0 < |x| <= r_max, exact."""
    if r_max < 1:
        return 0.0
    if pot.kind == SMOOTH:
        s = np.arange(1, r_max + 1, dtype=float)
        counts = (2 * s + 1) ** dim - (2 * s - 1) ** dim
        return float(np.sum(counts * np.maximum(s, 1.0) ** (-pot.A)))
    return sum(h * c for _, h, c in _plateau_site_counts(pot, dim, 1, r_max))


def radial_interaction_tail(pot: InteractionPotential, dim: int, r_max: int) -> float:
    """Upper bound on sum of u(|x|) over |x| > r_max for |amplitudes| <= 1.

    Exact plateau sums out to a large radius, then a certified analytic
    remainder: beyond R the plateau containing s starts at
    r_k >= (s^(1/ups) - 1)^ups, so u(s) <= c(R) s^(-A) with an explicit
    constant, and the sphere-weighted power tail has a closed form.
    Requires A > d.
    """
    if pot.A <= dim:
        raise ValidationError("tail bound requires A > d")
    big = max(4 * r_max, 10_000)
    if pot.kind == SMOOTH:
        s = np.arange(r_max + 1, big + 1, dtype=float)
        counts = (2 * s + 1) ** dim - (2 * s - 1) ** dim
        head = float(np.sum(counts * s ** (-pot.A)))
        return head + _sphere_power_tail(dim, pot.A, big)
    head = sum(h * c for _, h, c in _plateau_site_counts(pot, dim, r_max + 1, big))
    # for s > big the plateau start satisfies r_k >= s (1 - s^{-1/ups})^ups - 1,
    # so u(s) <= slack * s^(-A) with the floor loss folded into the constant
    base = (1.0 - big ** (-1.0 / pot.ups)) ** pot.ups - 1.0 / big
    slack = base ** (-pot.A)
    return head + slack * _sphere_power_tail(dim, pot.A, big)


def default_truncation_radius(
    pot: InteractionPotential, dim: int, tol: float = 1e-8, cap: int = 1 << 26
) -> int:
    """Smallest power-of-two radius whose tail bound is below ``tol``."""
    r = 16
    while radial_interaction_tail(pot, dim, r) > tol:
        r *= 2
        if r > cap:
            raise ValidationError(
                f"no truncation radius below {cap} reaches tail {tol:g}; "
                "A is too close to d"
            )
    return r


# ---------------------------------------------------------------------------
# Cumulative potential
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CumulativePotential:
    """V on a finite target set plus a bound on the truncated tail."""

    values: dict
    tail_error: float

    def vector(self, sites: Iterable[Site]) -> np.ndarray:
        return np.array([self.values[tuple(s)] for s in sites])


def interaction_weights(
    pot: InteractionPotential,
    targets: Iterable[Site],
    sources: Iterable[Site],
    r_max: int,
) -> np.ndarray:
    """Matrix W[i, j] = u(|source_j - target_i|), zero beyond r_max.

    The workhorse for vectorized Monte Carlo: V = W @ amplitudes.
    """
    tg = np.asarray(list(targets), dtype=int)
    src = np.asarray(list(sources), dtype=int)
    if tg.ndim == 1:
        tg = tg[:, None]
    if src.ndim == 1:
        src = src[:, None]
    dist = np.max(np.abs(tg[:, None, :] - src[None, :, :]), axis=2)
    table = pot.value_table(int(dist.max()))
    w = table[dist]
    w[dist > r_max] = 0.0
    return w


def resolve_truncation_radius(
    pot: InteractionPotential,
    field: FieldSample,
    targets: list,
    r_max: Optional[int],
) -> int:
    """Default truncation: cover the explicit domain exactly when the
    background is frozen zero, otherwise push the tail bound below 1e-8."""
    if r_max is not None:
        return int(r_max)
    dim = len(targets[0])
    if field.background.kind == BG_ZERO:
        r = 1
        for t in targets:
            for y in field.values:
                d = sup_dist(t, y)
                if d > r:
                    r = d
        return r
    return default_truncation_radius(pot, dim)


def cumulative_potential(
    pot: InteractionPotential,
    field: FieldSample,
    targets: Iterable[Site],
    r_max: Optional[int] = None,
) -> CumulativePotential:
    """V(x) = sum over |y - x| <= r_max of u(|y - x|) w_y, self-term included.

    With a frozen-zero background the default r_max just covers the
    explicit domain and the truncation is exact; any other background
    requires an explicit r_max (or accepts the default tuned so the
    reported tail bound stays below 1e-8).
    """
    targets = [tuple(t) for t in targets]
    if not targets:
        raise ValidationError("no target sites")
    dim = len(targets[0])
    dom_sites = sorted(field.values.keys())

    r_max = resolve_truncation_radius(pot, field, targets, r_max)
    if r_max < pot.plateau_radius(1):
        raise ValidationError("r_max must be at least the first plateau radius")

    if field.background.kind == BG_UNDEFINED:
        # Coverage is exact by counting: B_{r_max}(t) has (2 r_max + 1)^d sites.
        needed = (2 * r_max + 1) ** dim
        for t in targets:
            have = sum(1 for y in dom_sites if sup_dist(y, t) <= r_max)
            if have != needed:
                raise ValidationError(
                    f"target {t} needs the field on its radius-{r_max} neighborhood "
                    "but the background is undefined"
                )

    bval = 0.0 if field.background.kind == BG_UNDEFINED else field.background_value()

    # Explicit part relative to the background, plus constant background shell.
    in_range = [y for y in dom_sites if any(sup_dist(y, t) <= r_max for t in targets)]
    if in_range:
        w = interaction_weights(pot, targets, in_range, r_max)
        explicit_vals = np.array([field.values[y] for y in in_range])
        base = w @ (explicit_vals - bval)
    else:
        base = np.zeros(len(targets))
    if bval != 0.0:
        shell_sum = radial_interaction_sum(pot, dim, r_max) + pot.value(0.0)
        base = base + bval * shell_sum

    # Tail bound: sup of |field| beyond r_max times the radial tail.
    sup_beyond = abs(bval) if field.background.kind != BG_UNDEFINED else 1.0
    for y in dom_sites:
        if all(sup_dist(y, t) > r_max for t in targets):
            sup_beyond = max(sup_beyond, abs(field.values[y]))
    tail = sup_beyond * radial_interaction_tail(pot, dim, r_max) if sup_beyond else 0.0

    return CumulativePotential(
        values={t: float(v) for t, v in zip(targets, base)},
        tail_error=float(tail),
    )
