"""Fixed-energy multiscale analysis: predicates, probes, scale recursion.

A box is non-singular (NS) at (E, eps) when every Green kernel from the
inner third to the inner boundary stays below eps; non-resonant (NR) at
(E, gamma) when the spectrum keeps distance gamma from E.  The stable
variants fix the configuration on B_{L^tau} and ask the property to
survive arbitrary exterior amplitudes: exact for SNR (the definition
prescribes the zero exterior) and probe-certified for SNS (extreme
exteriors plus random draws; a "true" is a certificate, not a proof,
and is recorded as such in every report).
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from ..errors import ValidationError
from ..lattice import Ball, enumerate_ball, inner_boundary, sup_dist
from ..model import (
    AmplitudeDistribution,
    FieldSample,
    InteractionPotential,
    interaction_weights,
)
from ..rng import batch_bounds, stream
from ..spectral import SpectralDecomposition, kinetic_matrix
from ._stats import Z95, wilson_interval


def ns_predicate(dec: SpectralDecomposition, energy: float, eps: float) -> bool:
    """Non-singularity: max Green kernel inner-third -> boundary <= eps.

    The inner region is the ball of radius floor(L/3); an energy on the
    spectrum counts as singular rather than raising.
    """
    if dec.spectral_distance(energy) <= 1e-12:
        return False
    box = dec.box
    core = Ball.at(box.center, box.radius // 3)
    core_idx = [dec.index_of(s) for s in enumerate_ball(core)]
    bdry_idx = [dec.index_of(s) for s in inner_boundary(box)]
    weights = dec.eigenvectors / (dec.eigenvalues - energy)[None, :]
    gram = dec.eigenvectors[core_idx] @ weights[bdry_idx].T
    return bool(np.max(np.abs(gram)) <= eps)


def nr_predicate(dec: SpectralDecomposition, energy: float, gamma: float) -> bool:
    """Non-resonance: dist(spectrum, E) >= gamma."""
    return bool(dec.spectral_distance(energy) >= gamma)


# ---------------------------------------------------------------------------
# Probe geometry
# ---------------------------------------------------------------------------


@dataclass(eq=False)
class BoxProbe:
    """Precomputed geometry for repeated NS/NR evaluations on one box.

    The random interior lives on B_{R_int}(center); probes overwrite
    the annulus out to B_{R_ext}(center) and the world beyond R_ext is
    frozen to zero (truncation, reported by callers at desk scale).
    """

    box: Ball
    pot: InteractionPotential
    g: float
    r_int: int
    r_ext: int

    def __post_init__(self):
        if self.r_int < self.box.radius:
            raise ValidationError("interior radius must contain the box")
        if self.r_ext < self.r_int:
            raise ValidationError("exterior radius must contain the interior")
        self.sites = enumerate_ball(self.box)
        self.n = len(self.sites)
        center = self.box.center
        self.int_sites = tuple(
            s for s in enumerate_ball(Ball.at(center, self.r_int))
        )
        self.ext_sites = tuple(
            s
            for s in enumerate_ball(Ball.at(center, self.r_ext))
            if sup_dist(s, center) > self.r_int
        )
        r_max = self.r_ext + self.box.radius + 1
        self.w_int = interaction_weights(self.pot, self.sites, self.int_sites, r_max)
        self.w_ext = (
            interaction_weights(self.pot, self.sites, self.ext_sites, r_max)
            if self.ext_sites
            else np.zeros((self.n, 0))
        )
        self.kinetic = kinetic_matrix(self.box)
        core = Ball.at(center, self.box.radius // 3)
        index = {s: i for i, s in enumerate(self.sites)}
        self.core_idx = np.array([index[s] for s in enumerate_ball(core)])
        self.bdry_idx = np.array(sorted(index[s] for s in inner_boundary(self.box)))

    def hamiltonian(self, omega_int: np.ndarray, omega_ext: Optional[np.ndarray]) -> np.ndarray:
        v = self.w_int @ omega_int
        if omega_ext is not None and len(self.ext_sites):
            v = v + self.w_ext @ omega_ext
        h = self.kinetic.copy()
        di = np.arange(self.n)
        h[di, di] += self.g * v
        return h

    def ns(self, h: np.ndarray, energy: float, eps: float) -> bool:
        vals, vecs = np.linalg.eigh(h)
        if np.min(np.abs(vals - energy)) <= 1e-12:
            return False
        weights = vecs / (vals - energy)[None, :]
        gram = vecs[self.core_idx] @ weights[self.bdry_idx].T
        return bool(np.max(np.abs(gram)) <= eps)

    def nr(self, h: np.ndarray, energy: float, gamma: float) -> bool:
        vals = np.linalg.eigvalsh(h)
        return bool(np.min(np.abs(vals - energy)) >= gamma)


@dataclass(frozen=True)
class SnsProbeReport:
    holds_on_probes: bool
    mode: str
    certificates: tuple
    exact: bool


def interior_amplitudes(probe: BoxProbe, interior_field: FieldSample) -> np.ndarray:
    """Amplitude vector on the probe's interior; the field must cover it."""
    missing = [s for s in probe.int_sites if s not in interior_field.values]
    if missing:
        raise ValidationError(
            f"interior configuration must cover B_{probe.r_int}; "
            f"missing {len(missing)} sites, e.g. {missing[0]}"
        )
    return np.array([interior_field.values[s] for s in probe.int_sites])


def sns_probe(
    probe: BoxProbe,
    energy: float,
    threshold: float,
    interior_field: FieldSample,
    dist: AmplitudeDistribution,
    mode: str = "SNS",
    m_ext: int = 2,
    master_seed: int = 0,
    probe_index: int = 0,
) -> SnsProbeReport:
    """Stability probe for a fixed interior configuration.

    SNR mode is exact: it evaluates NR with the zero exterior, which is
    what the definition prescribes.  SNS mode evaluates NS under the
    all-min and all-max exteriors plus ``m_ext`` random draws; any
    failure settles the verdict, a clean sweep is a certificate only.
    """
    omega_int = interior_amplitudes(probe, interior_field)
    if mode == "SNR":
        h = probe.hamiltonian(omega_int, None)
        ok = probe.nr(h, energy, threshold)
        return SnsProbeReport(
            holds_on_probes=ok, mode=mode, certificates=(("zero_exterior", ok),), exact=True
        )
    if mode != "SNS":
        raise ValidationError(f"unknown probe mode {mode!r}")
    lo, hi = dist.support
    n_ext = len(probe.ext_sites)
    probes = [("all_min", np.full(n_ext, lo)), ("all_max", np.full(n_ext, hi))]
    if m_ext > 0:
        rng = stream(master_seed, "sns-ext", probe_index)
        draws = dist.sample(rng, m_ext * n_ext).reshape(m_ext, n_ext)
        probes += [(f"random_{j}", draws[j]) for j in range(m_ext)]
    certificates = []
    holds = True
    for name, omega_ext in probes:
        h = probe.hamiltonian(omega_int, omega_ext)
        ok = probe.ns(h, energy, threshold)
        certificates.append((name, ok))
        if not ok:
            holds = False
            break
    return SnsProbeReport(
        holds_on_probes=holds, mode=mode, certificates=tuple(certificates), exact=False
    )


# ---------------------------------------------------------------------------
# Parameters and scale recursion
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class MSAParams:
    """Scaling exponents with the admissibility constraint set."""

    A: float
    d: int
    b: float
    tau: float
    alpha: float
    S: int
    theta: float
    m: float
    L0: int

    def violations(self) -> list:
        bad = []
        if self.A <= self.d:
            bad.append(f"A > d required: A={self.A} <= d={self.d}")
        if self.b <= self.d:
            bad.append(f"b > d required: b={self.b} <= d={self.d}")
        if self.tau <= 1.0:
            bad.append(f"tau > 1 required: tau={self.tau}")
        if self.tau <= self.b / (self.A - self.d):
            bad.append(
                f"tau > b/(A-d) required: tau={self.tau} <= "
                f"{self.b / (self.A - self.d):g}"
            )
        if self.alpha <= self.tau:
            bad.append(f"alpha > tau required: alpha={self.alpha} <= tau={self.tau}")
        denom = self.b - self.alpha * self.d
        if denom <= 0:
            bad.append(
                f"S bound undefined: b - alpha*d = {denom:g} <= 0 "
                "(need b > alpha*d)"
            )
        else:
            s_min = self.b * self.alpha / denom
            if self.S <= s_min:
                bad.append(f"S > b*alpha/(b - alpha*d) required: S={self.S} <= {s_min:g}")
        if not 0.0 < self.theta < 1.0:
            bad.append(f"theta in (0,1) required: theta={self.theta}")
        if self.m < 1.0:
            bad.append(f"m >= 1 required: m={self.m}")
        if self.L0 < 2:
            bad.append(f"L0 >= 2 required: L0={self.L0}")
        return bad

    def validate(self) -> None:
        bad = self.violations()
        if bad:
            raise ValidationError("parameter set rejected: " + "; ".join(bad))

    def scale_length(self, k: int) -> int:
        L = self.L0
        for _ in range(k):
            L = int(math.floor(L**self.alpha))
        return L

    def mass(self, k: int) -> float:
        """m_k = (1 + L_k^(-1/8)) m, decreasing toward m."""
        return (1.0 + self.scale_length(k) ** (-0.125)) * self.m

    def resonance_eps(self, k: int) -> float:
        """eps_k = 4 L_k^(-tau A + theta)."""
        return 4.0 * float(self.scale_length(k)) ** (-self.tau * self.A + self.theta)

    def ns_eps(self, k: int) -> float:
        """Green-kernel threshold e^(-m_k L_k) at scale k."""
        return math.exp(-self.mass(k) * self.scale_length(k))

    def centers_count(self, k: int) -> float:
        """Y_{k+1} = L_k^(alpha - 1)."""
        return float(self.scale_length(k)) ** (self.alpha - 1.0)

    def conditioning_radius(self, k: int) -> int:
        return int(math.ceil(self.scale_length(k) ** self.tau))

    def to_dict(self) -> dict:
        return {
            "A": self.A, "d": self.d, "b": self.b, "tau": self.tau,
            "alpha": self.alpha, "S": self.S, "theta": self.theta,
            "m": self.m, "L0": self.L0,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "MSAParams":
        return cls(**d)


def admissible_centers(params: MSAParams, k: int) -> list:
    """Lattice of pitch L_k inside B_{L_{k+1}}(0): the deterministic,
    finite center set used by the cluster statistic."""
    Lk = params.scale_length(k)
    Lk1 = params.scale_length(k + 1)
    reach = Lk1 // Lk
    axes = [range(-reach, reach + 1)] * params.d
    out = []
    for z in itertools.product(*axes):
        c = tuple(Lk * zi for zi in z)
        if max(abs(ci) for ci in c) <= Lk1:
            out.append(c)
    return out


def max_distant_subset(centers: Sequence, flags: Sequence[bool], min_dist: float) -> int:
    """Largest set of flagged centers with pairwise sup-distance > min_dist."""
    bad = [c for c, f in zip(centers, flags) if f]
    best = 0
    for r in range(len(bad), 0, -1):
        for combo in itertools.combinations(bad, r):
            if all(
                sup_dist(a, bb) > min_dist for a, bb in itertools.combinations(combo, 2)
            ):
                best = r
                break
        if best:
            break
    return best


@dataclass(frozen=True)
class CondSNSCheck:
    samples: int
    hypotheses_held: int
    conclusion_violations: int


@dataclass(frozen=True)
class ScaleReport:
    k: int
    length: int
    trials: int
    failures: int
    p_hat: float
    ci_low: float
    ci_high: float
    target: float
    snr_failures: int
    cluster_exceedances: int
    bound_from_prev: Optional[float]
    bound_from_prev_factorial: Optional[float]
    cluster_size_counts: dict
    cond_sns: Optional[CondSNSCheck]
    ns_threshold: float


def msa_run(
    params: MSAParams,
    k_max: int,
    trials: int,
    energy: float,
    dist: AmplitudeDistribution,
    g: float,
    master_seed: int,
    m_ext: int = 2,
    ups: float = 1.0,
    ext_width: Optional[int] = None,
    z: float = Z95,
) -> list:
    """Monte Carlo estimates of p_k = P{B_{L_k} is not (E, m_k)-SNS}.

    Per scale the report carries the empirical estimate with its Wilson
    interval, the target L_k^(-b), the non-resonance and cluster
    breakdowns, and for k >= 1 the recursion bound computed from the
    previous scale's estimate in both prefactor variants:
    0.5 L_k^(-b) + C_d Y_k^((S+1)d) p_{k-1}^(S+1)  and the factorial
    form Y_k^(S+1) / (S+1)! p_{k-1}^(S+1).  C_d is the explicit count
    of (S+1)-subsets of admissible centers actually enumerated.
    """
    params.validate()
    if k_max < 0:
        raise ValidationError("k_max must be >= 0")
    pot = InteractionPotential.piecewise(A=params.A, ups=ups)
    reports = []
    prev_p = None
    for k in range(k_max + 1):
        Lk = params.scale_length(k)
        Rk = params.conditioning_radius(k)
        width = ext_width if ext_width is not None else 2 * Lk + 4
        box = Ball.origin(params.d, Lk)
        sub_geometry = None
        if k >= 1:
            Lkm = params.scale_length(k - 1)
            Rkm = params.conditioning_radius(k - 1)
            centers = admissible_centers(params, k - 1)
            region_radius = max(Rk, Lk + Rkm) + width
            sub_geometry = (Lkm, Rkm, centers)
        else:
            region_radius = Rk + width
        probe = BoxProbe(box=box, pot=pot, g=g, r_int=Rk, r_ext=region_radius)
        sub_probes = {}
        if sub_geometry:
            Lkm, Rkm, centers = sub_geometry
            for c in centers:
                sub_probes[c] = BoxProbe(
                    box=Ball.at(c, Lkm), pot=pot, g=g, r_int=Rkm, r_ext=region_radius
                )

        region = enumerate_ball(Ball.origin(params.d, region_radius))
        region_index = {s: i for i, s in enumerate(region)}
        ns_eps = params.ns_eps(k)

        failures = 0
        snr_failures = 0
        cluster_exceed = 0
        cluster_counts: dict = {}
        hyp_held = 0
        concl_bad = 0

        def eval_sns(bp: BoxProbe, omega_region: np.ndarray, eps: float, trial_key: int) -> bool:
            om_int = omega_region[[region_index[s] for s in bp.int_sites]]
            lo_s, hi_s = dist.support
            n_ext = len(bp.ext_sites)
            probes = [np.full(n_ext, lo_s), np.full(n_ext, hi_s)]
            if m_ext > 0:
                rng = stream(master_seed, "msa-ext", trial_key)
                draws = dist.sample(rng, m_ext * n_ext).reshape(m_ext, n_ext)
                probes += list(draws)
            for om_ext in probes:
                if not bp.ns(bp.hamiltonian(om_int, om_ext), energy, eps):
                    return False
            return True

        for index, lo, hi in batch_bounds(trials):
            rng = stream(master_seed, f"msa-scale-{k}", index)
            omegas = dist.sample(rng, (hi - lo) * len(region)).reshape(hi - lo, len(region))
            for j in range(hi - lo):
                trial = lo + j
                om = omegas[j]
                sns_ok = eval_sns(probe, om, ns_eps, trial_key=trial * 1000 + k)
                if not sns_ok:
                    failures += 1
                if k >= 1:
                    Lkm, Rkm, centers = sub_geometry
                    gamma = params.resonance_eps(k - 1)
                    om_int = om[[region_index[s] for s in probe.int_sites]]
                    snr_ok = probe.nr(probe.hamiltonian(om_int, None), energy, gamma)
                    if not snr_ok:
                        snr_failures += 1
                    sub_eps = params.ns_eps(k - 1)
                    flags = []
                    for ci, c in enumerate(centers):
                        ok = eval_sns(
                            sub_probes[c], om, sub_eps,
                            trial_key=trial * 1000 + 100 + ci,
                        )
                        flags.append(not ok)
                    s_stat = max_distant_subset(
                        centers, flags, 2.0 * Lkm**params.tau
                    )
                    cluster_counts[s_stat] = cluster_counts.get(s_stat, 0) + 1
                    if s_stat > params.S:
                        cluster_exceed += 1
                    hyp = snr_ok and s_stat <= params.S
                    if hyp:
                        hyp_held += 1
                        # conclusion at the plain (E, m) threshold
                        concl = eval_sns(
                            probe, om, math.exp(-params.m * Lk),
                            trial_key=trial * 1000 + 999,
                        )
                        if not concl:
                            concl_bad += 1

        p_hat = failures / trials
        lo_ci, hi_ci = wilson_interval(failures, trials, z=z)
        bound = bound_fact = None
        if k >= 1 and prev_p is not None:
            Y = params.centers_count(k - 1)
            n_centers = len(sub_geometry[2])
            c_d = math.comb(n_centers, params.S + 1)
            bound = 0.5 * float(Lk) ** (-params.b) + c_d * Y ** (
                (params.S + 1) * params.d
            ) * prev_p ** (params.S + 1)
            bound_fact = 0.5 * float(Lk) ** (-params.b) + Y ** (params.S + 1) / math.factorial(
                params.S + 1
            ) * prev_p ** (params.S + 1)
        reports.append(
            ScaleReport(
                k=k,
                length=Lk,
                trials=trials,
                failures=failures,
                p_hat=p_hat,
                ci_low=lo_ci,
                ci_high=hi_ci,
                target=float(Lk) ** (-params.b),
                snr_failures=snr_failures,
                cluster_exceedances=cluster_exceed,
                bound_from_prev=bound,
                bound_from_prev_factorial=bound_fact,
                cluster_size_counts=cluster_counts,
                cond_sns=(
                    CondSNSCheck(
                        samples=trials,
                        hypotheses_held=hyp_held,
                        conclusion_violations=concl_bad,
                    )
                    if k >= 1
                    else None
                ),
                ns_threshold=ns_eps,
            )
        )
        prev_p = p_hat
    return reports
