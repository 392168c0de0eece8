"""Frozen-bath Wegner experiment: eigenvalue concentration near one energy.

Only the amplitudes in the annulus between L and R_L = L^tau are
randomized; everything inside the box and beyond the annulus stays
frozen.  The measured quantity is P{dist(spectrum, E) <= eps_L} with
eps_L = R_L^(-A/(1+theta)), compared against the absorbed-constant form
C |B| eps_L^beta, beta = 1 - (1+theta)/tau.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from ..errors import ValidationError
from ..lattice import Annulus, Ball, enumerate_ball
from ..model import (
    BERNOULLI_P,
    BERNOULLI_SYM,
    AmplitudeDistribution,
    FieldSample,
    InteractionPotential,
    cumulative_potential,
    interaction_weights,
)
from ..rng import batch_bounds, stream
from ..spectral import kinetic_matrix
from ._stats import Z95, wilson_interval


@dataclass(frozen=True)
class WegnerConfig:
    L: int
    tau: float
    theta: float
    energy: float
    trials: int
    dist: AmplitudeDistribution
    A: float
    d: int
    g: float
    ups: float = 1.0

    def __post_init__(self):
        if self.tau <= 1.0:
            raise ValidationError("tau must exceed 1")
        if not 0.0 < self.theta < self.tau - 1.0:
            raise ValidationError("theta must lie in (0, tau - 1)")
        if self.L < 1:
            raise ValidationError("L must be >= 1")
        if self.R_L <= self.L:
            raise ValidationError("annulus is empty: R_L <= L")
        if self.trials < 100:
            raise ValidationError("need at least 100 trials")

    @property
    def R_L(self) -> int:
        return int(math.floor(self.L**self.tau + 1e-9))

    @property
    def eps_L(self) -> float:
        return float(self.R_L) ** (-self.A / (1.0 + self.theta))

    @property
    def beta(self) -> float:
        return 1.0 - (1.0 + self.theta) / self.tau

    @property
    def potential(self) -> InteractionPotential:
        return InteractionPotential.piecewise(A=self.A, ups=self.ups)

    @property
    def box(self) -> Ball:
        return Ball.origin(self.d, self.L)

    @property
    def annulus(self) -> Annulus:
        return Annulus(center=(0,) * self.d, inner=self.L, outer=self.R_L)

    def to_dict(self) -> dict:
        return {
            "L": self.L, "tau": self.tau, "theta": self.theta, "energy": self.energy,
            "trials": self.trials, "dist": self.dist.to_dict(), "A": self.A,
            "d": self.d, "g": self.g, "ups": self.ups,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "WegnerConfig":
        d = dict(d)
        d["dist"] = AmplitudeDistribution.from_dict(d["dist"])
        return cls(**d)


@dataclass(frozen=True)
class WegnerReport:
    successes: int
    trials: int
    p_hat: float
    ci_low: float
    ci_high: float
    eps_L: float
    beta: float
    ball_size: int
    implied_constant: float
    bound: Optional[float]
    passed: Optional[bool]
    energy: float


def _frozen_potential_and_weights(cfg: WegnerConfig, frozen_background: FieldSample):
    """Potential of the frozen part (annulus zeroed) and annulus weights."""
    box_sites = enumerate_ball(cfg.box)
    ann_sites = cfg.annulus.sites()
    r_max = cfg.R_L + cfg.L + 1
    zeroed = dict(frozen_background.values)
    for s in ann_sites:
        zeroed[s] = 0.0
    base_field = FieldSample(
        values=zeroed,
        background=frozen_background.background,
        dist=frozen_background.dist,
    )
    cum = cumulative_potential(cfg.potential, base_field, box_sites, r_max=r_max)
    v_frozen = cum.vector(box_sites)
    w_ann = interaction_weights(cfg.potential, box_sites, ann_sites, r_max=r_max)
    return v_frozen, w_ann, ann_sites


def _spectra_for_amplitudes(cfg: WegnerConfig, v_frozen, w_ann, omegas) -> np.ndarray:
    base = kinetic_matrix(cfg.box)
    n = base.shape[0]
    v = v_frozen[None, :] + omegas @ w_ann.T
    hs = np.broadcast_to(base, (omegas.shape[0], n, n)).copy()
    idx = np.arange(n)
    hs[:, idx, idx] += cfg.g * v
    return np.linalg.eigvalsh(hs)


def wegner_experiment(
    cfg: WegnerConfig,
    frozen_background: FieldSample,
    master_seed: int,
    fit_constant: Optional[float] = None,
    z: float = Z95,
) -> WegnerReport:
    """Monte Carlo estimate of P{dist(spectrum, E) <= eps_L}.

    The implied constant p_upper / (|B| eps_L^beta) is always reported;
    when a fitted constant is supplied the pass verdict compares the
    CI upper bound against C |B| eps_L^beta.
    """
    v_frozen, w_ann, ann_sites = _frozen_potential_and_weights(cfg, frozen_background)
    successes = 0
    for index, lo, hi in batch_bounds(cfg.trials):
        rng = stream(master_seed, "wegner", index)
        omegas = cfg.dist.sample(rng, (hi - lo) * len(ann_sites)).reshape(
            hi - lo, len(ann_sites)
        )
        spectra = _spectra_for_amplitudes(cfg, v_frozen, w_ann, omegas)
        dists = np.min(np.abs(spectra - cfg.energy), axis=1)
        successes += int(np.sum(dists <= cfg.eps_L))
    p_hat = successes / cfg.trials
    lo_ci, hi_ci = wilson_interval(successes, cfg.trials, z=z)
    scale = cfg.box.site_count * cfg.eps_L**cfg.beta
    bound = fit_constant * scale if fit_constant is not None else None
    return WegnerReport(
        successes=successes,
        trials=cfg.trials,
        p_hat=p_hat,
        ci_low=lo_ci,
        ci_high=hi_ci,
        eps_L=cfg.eps_L,
        beta=cfg.beta,
        ball_size=cfg.box.site_count,
        implied_constant=hi_ci / scale,
        bound=bound,
        passed=(hi_ci <= bound) if bound is not None else None,
        energy=cfg.energy,
    )


def wegner_exact(cfg: WegnerConfig, frozen_background: FieldSample) -> float:
    """Exact P{dist(spectrum, E) <= eps_L} by annulus enumeration.

    Bernoulli laws only; the annulus is capped at 2^20 configurations.
    """
    ann_sites = cfg.annulus.sites()
    m = len(ann_sites)
    if m > 20:
        raise ValidationError(f"annulus has {m} sites; enumeration capped at 20")
    if cfg.dist.kind == BERNOULLI_SYM:
        levels = (-1.0, 1.0)
        probs = (0.5, 0.5)
    elif cfg.dist.kind == BERNOULLI_P:
        levels = (0.0, 1.0)
        probs = (1.0 - cfg.dist.p, cfg.dist.p)
    else:
        raise ValidationError("exact enumeration needs a Bernoulli law")
    v_frozen, w_ann, _ = _frozen_potential_and_weights(cfg, frozen_background)
    idx = np.arange(1 << m)
    bits = (idx[:, None] >> np.arange(m)) & 1
    omegas = np.where(bits == 0, levels[0], levels[1]).astype(float)
    weights = np.prod(np.where(bits == 0, probs[0], probs[1]), axis=1)
    total = 0.0
    for lo in range(0, len(idx), 4096):
        sl = slice(lo, lo + 4096)
        spectra = _spectra_for_amplitudes(cfg, v_frozen, w_ann, omegas[sl])
        dists = np.min(np.abs(spectra - cfg.energy), axis=1)
        total += float(np.sum(weights[sl][dists <= cfg.eps_L]))
    return total


def fit_wegner_constant(reports) -> float:
    """Smallest constant dominating every report's CI upper bound."""
    reports = list(reports)
    if not reports:
        raise ValidationError("no reports to fit")
    return max(r.implied_constant for r in reports)
