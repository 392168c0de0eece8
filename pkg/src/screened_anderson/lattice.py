"""Finite geometry on Z^d under the sup-norm.

Balls, shells, annuli and boundaries used by every other module.  Site
enumeration is lexicographic, so index <-> site maps are reproducible
bit-for-bit across runs.  All containers are immutable after
construction and safe to share between concurrent workers.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from functools import lru_cache
from typing import Iterable, Sequence

from .errors import ValidationError

# A site is a tuple of ints, one entry per dimension.
Site = tuple


def sup_dist(x: Site, y: Site) -> int:
    """Sup-norm distance between two sites of equal dimension."""
    if len(x) != len(y):
        raise ValidationError(f"dimension mismatch: {len(x)}-vector vs {len(y)}-vector")
    return max(abs(a - b) for a, b in zip(x, y))


def sup_norm(x: Site) -> int:
    return max(abs(a) for a in x)


def dist_to_set(x: Site, sites: Iterable[Site]) -> int:
    """Minimal sup-norm distance from ``x`` to a nonempty set of sites."""
    best = None
    for y in sites:
        d = sup_dist(x, y)
        if best is None or d < best:
            best = d
            if best == 0:
                break
    if best is None:
        raise ValidationError("dist_to_set: empty site set")
    return best


@dataclass(frozen=True)
class Ball:
    """Sup-norm ball B_L(center) with (2L+1)^d sites."""

    center: Site
    radius: int
    dim: int

    def __post_init__(self):
        if self.dim < 1:
            raise ValidationError("ball dimension must be >= 1")
        if len(self.center) != self.dim:
            raise ValidationError(
                f"dimension mismatch: center has {len(self.center)} coords, dim={self.dim}"
            )
        if any(int(c) != c for c in self.center):
            raise ValidationError("ball center must have integer coordinates")
        if self.radius < 0:
            raise ValidationError("ball radius must be >= 0")

    @classmethod
    def at(cls, center: Sequence[int], radius: int) -> "Ball":
        center = tuple(int(c) for c in center)
        return cls(center=center, radius=int(radius), dim=len(center))

    @classmethod
    def origin(cls, dim: int, radius: int) -> "Ball":
        return cls(center=(0,) * dim, radius=int(radius), dim=dim)

    @property
    def site_count(self) -> int:
        return (2 * self.radius + 1) ** self.dim

    def sites(self) -> tuple:
        return enumerate_ball(self)

    def __contains__(self, site: Site) -> bool:
        return sup_dist(site, self.center) <= self.radius

    def distance_range(self, site: Site) -> tuple:
        """(min, max) sup-norm distance from ``site`` to this ball.

        Closed forms for the sup-norm: coordinates decouple, so the
        nearest point clamps each coordinate and the farthest point
        pushes each coordinate to the opposite face.
        """
        if len(site) != self.dim:
            raise ValidationError("dimension mismatch in distance_range")
        dmin = 0
        for a, c in zip(site, self.center):
            gap = abs(a - c) - self.radius
            if gap > dmin:
                dmin = gap
        dmax = sup_dist(site, self.center) + self.radius
        return dmin, dmax


@lru_cache(maxsize=None)
def enumerate_ball(ball: Ball) -> tuple:
    """All sites of the ball in lexicographic order.

    Returns exactly (2L+1)^d distinct sites; the ordering is the
    deterministic index <-> site bijection used by matrix assembly.
    """
    ranges = [range(c - ball.radius, c + ball.radius + 1) for c in ball.center]
    return tuple(itertools.product(*ranges))


def inner_boundary(ball: Ball) -> frozenset:
    """Sites of the ball having a nearest neighbor outside the ball.

    Under the sup-norm these are exactly the sites at distance
    ``radius`` from the center.  A radius-0 ball has no
    interior/boundary split and is rejected.
    """
    if ball.radius < 1:
        raise ValidationError("inner boundary undefined for a radius-0 ball")
    return frozenset(
        s for s in enumerate_ball(ball) if sup_dist(s, ball.center) == ball.radius
    )


@dataclass(frozen=True)
class Shell:
    """Sites with sup-norm distance to the center in (inner, outer]."""

    index: int
    inner: int
    outer: int
    sites: tuple
    amplitude: float

    @property
    def count(self) -> int:
        return len(self.sites)


@dataclass(frozen=True)
class Annulus:
    """B_outer(center) minus B_inner(center)."""

    center: Site
    inner: int
    outer: int

    def __post_init__(self):
        if not 0 <= self.inner < self.outer:
            raise ValidationError("annulus needs 0 <= inner < outer")

    def sites(self) -> tuple:
        outer_ball = Ball.at(self.center, self.outer)
        return tuple(
            s
            for s in enumerate_ball(outer_ball)
            if sup_dist(s, self.center) > self.inner
        )


def shell_decomposition(center: Site, potential, n_max: int) -> list:
    """Shells of the potential's plateau radii around ``center``.

    Shell n collects sites at distance in (r_{n-1}, r_n] where
    r_k is the potential's k-th plateau radius; its amplitude is
    r_n^(-A).  The shells partition {x : 0 < |x - center| <= r_{n_max}}.
    """
    if n_max < 1:
        raise ValidationError("n_max must be >= 1")
    dim = len(center)
    radii = [potential.plateau_radius(n) for n in range(n_max + 1)]
    outer_ball = Ball.at(center, radii[n_max])
    buckets: dict = {n: [] for n in range(1, n_max + 1)}
    for s in enumerate_ball(outer_ball):
        d = sup_dist(s, center)
        if d == 0:
            continue
        # r is strictly increasing, so a binary search locates the shell.
        lo, hi = 1, n_max
        while lo < hi:
            mid = (lo + hi) // 2
            if d <= radii[mid]:
                hi = mid
            else:
                lo = mid + 1
        buckets[lo].append(s)
    shells = []
    for n in range(1, n_max + 1):
        shells.append(
            Shell(
                index=n,
                inner=radii[n - 1],
                outer=radii[n],
                sites=tuple(buckets[n]),
                amplitude=float(radii[n]) ** (-potential.A),
            )
        )
    return shells


def sphere_count(dim: int, radius: int) -> int:
    """Number of sites at exact sup-norm distance ``radius``."""
    if radius < 0:
        raise ValidationError("radius must be >= 0")
    if radius == 0:
        return 1
    return (2 * radius + 1) ** dim - (2 * radius - 1) ** dim
