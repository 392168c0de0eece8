"""Acceptance gate: one test per quantitative criterion.

Each test prints a single PASS/FAIL line (visible with ``pytest -s``)
and asserts the criterion at its stated tolerance.  Tolerances are
pinned here, not configurable.
"""

import math
import time

import numpy as np
import pytest

from screened_anderson.charfun import (
    BernsteinSequence,
    RadiiSpec,
    ShellWeights,
    bernstein_approximation,
    concentration_bound,
    fit_decay_exponent,
    polya_szego_limit,
    quadratic_log_bound,
    taylor_remainder_check,
)
from screened_anderson.experiments import (
    Z99,
    MSAParams,
    ThinTailConfig,
    WegnerConfig,
    fit_wegner_constant,
    ils_thin_exact,
    ils_thin_tail,
    msa_run,
    wegner_exact,
    wegner_experiment,
)
from screened_anderson.lattice import Ball, enumerate_ball
from screened_anderson.model import (
    AmplitudeDistribution,
    Background,
    FieldSample,
    InteractionPotential,
    sample_field,
)
from screened_anderson.rng import stream
from screened_anderson.spectral import (
    assemble_hamiltonian,
    efc_profile,
    eigensystem,
    plateau_decompose,
)

BS = AmplitudeDistribution.bernoulli_sym()
BP = AmplitudeDistribution.bernoulli_p(0.5)
U01 = AmplitudeDistribution.uniform01()


def verdict(number: int, name: str, ok: bool, detail: str) -> None:
    print(f"ACCEPTANCE {number:02d} {'PASS' if ok else 'FAIL'} - {name}: {detail}")
    assert ok, f"criterion {number} ({name}): {detail}"


def test_c01_charfun_decay_exponent():
    start = time.time()
    fit2 = fit_decay_exponent(BS, d=1, A=2.0, ups=1.0, t_lo=1e2, t_hi=1e6, points=25)
    fit4 = fit_decay_exponent(BS, d=1, A=4.0, ups=1.0, t_lo=1e2, t_hi=1e6, points=25)
    elapsed = time.time() - start
    ok = 0.45 <= fit2.slope <= 0.55 and 0.20 <= fit4.slope <= 0.30 and elapsed < 60.0
    verdict(1, "char-function decay exponent", ok,
            f"A=2 slope {fit2.slope:.4f} (target 0.50+-0.05), "
            f"A=4 slope {fit4.slope:.4f} (target 0.25+-0.05), {elapsed:.1f}s")


def test_c02_quadratic_log_bound():
    violations = 0
    for dist in (BS, BP, U01):
        ts = np.linspace(-dist.t0_certified, dist.t0_certified, 1000)
        lower = 0.25 * dist.var * ts**2
        actual = dist.log_inv_modulus(ts)
        violations += int(np.sum(actual < lower - 1e-12))
        applies, _ = quadratic_log_bound(dist, float(ts[-1]))
        assert applies
    verdict(2, "quadratic log-bound", violations == 0,
            f"3 laws x 1000 grid points, {violations} violations")


def test_c03_taylor_remainder():
    rng = np.random.default_rng(314159)
    violations = 0
    for _ in range(10_000):
        n = int(rng.integers(1, 9))
        s = float(rng.uniform(-20, 20))
        if not taylor_remainder_check(n, s).holds:
            violations += 1
    verdict(3, "Taylor remainder", violations == 0,
            f"10^4 random (n <= 8, |s| <= 20), {violations} violations")


def test_c04_concentration_bound_vs_enumeration():
    start = time.time()
    instances = [
        (BS, 2.0, 1, 4),
        (BS, 2.0, 2, 6),
        (BS, 3.0, 1, 8),
        (BP, 2.0, 1, 5),
    ]
    worst_margin = math.inf
    checked = 0
    for dist, A, M, N in instances:
        weights = ShellWeights.from_model(d=1, A=A, ups=1.0, n_max=N)
        sub = weights.subrange(M, N)
        site_w = np.repeat(sub.amps, sub.counts.astype(int))
        m = len(site_w)
        assert (1 << m) <= (1 << 20)
        idx = np.arange(1 << m)
        bits = (idx[:, None] >> np.arange(m)) & 1
        if dist.kind == "bernoulli_sym":
            values = (2.0 * bits - 1.0) @ site_w
            probs = np.full(len(idx), 0.5**m)
        else:
            values = bits.astype(float) @ site_w
            probs = np.prod(np.where(bits == 1, dist.p, 1 - dist.p), axis=1)
        theta = 0.5
        threshold = float(sub.amps[-1]) ** (1.0 / (1.0 + theta))
        rng = np.random.default_rng(271828)
        for _ in range(50):
            eps = threshold * (1.0 + 2.0 * rng.random())
            center = rng.uniform(values.min() - 0.2, values.max() + 0.2)
            rep = concentration_bound(dist, weights, M, N, center, eps, theta=theta)
            exact = float(np.sum(probs[np.abs(values - center) <= eps]))
            worst_margin = min(worst_margin, rep.bound - exact)
            checked += 1
    elapsed = time.time() - start
    ok = worst_margin >= -1e-10 and elapsed < 300.0
    verdict(4, "concentration bound vs enumeration", ok,
            f"{checked} intervals over {len(instances)} instances, "
            f"worst bound-exact margin {worst_margin:.4f}, {elapsed:.1f}s")


def test_c05_plateau_decomposition():
    pot = InteractionPotential.piecewise(A=3.0, ups=2.0)
    rng = np.random.default_rng(5050)
    worst_shift = 0.0
    worst_vec = 0.0
    count = 0
    g = 2.0
    while count < 100:
        L = int(rng.integers(1, 3))
        box = Ball.origin(1, L)
        field = sample_field(U01, Ball.origin(1, 60).sites(), stream(606, "c05", count))
        ext = [s for s in Ball.origin(1, 60).sites() if s not in box]
        dec = plateau_decompose(box, pot, field, g, ext)
        candidates = [s for s in dec.plateau_sites if dec.plateau_weights[s] > 0]
        site = candidates[int(rng.integers(0, len(candidates)))]
        a = dec.plateau_weights[site]
        delta = float(rng.uniform(0, 1)) - field.values[site]
        bumped = dict(field.values)
        bumped[site] += delta
        e1 = eigensystem(dec.hamiltonian)
        e2 = eigensystem(
            assemble_hamiltonian(box, pot, FieldSample(bumped, Background.zero()), g, r_max=62)
        )
        worst_shift = max(worst_shift,
                          float(np.max(np.abs(e2.eigenvalues - e1.eigenvalues - g * a * delta))))
        signs = np.sign(np.sum(e2.eigenvectors * e1.eigenvectors, axis=0))
        worst_vec = max(worst_vec,
                        float(np.max(np.abs(e2.eigenvectors * signs - e1.eigenvectors))))
        count += 1
    ok = worst_shift < 1e-9 and worst_vec < 1e-9
    verdict(5, "plateau decomposition", ok,
            f"100 triples: worst shift error {worst_shift:.2e}, "
            f"worst eigenvector mismatch {worst_vec:.2e} (tolerance 1e-9)")


def test_c06_wegner_oracle_equivalence():
    frozen = FieldSample(values={}, background=Background.zero())
    energies = np.linspace(0.2, 3.8, 10)
    contained = 0
    reports = []
    for energy in energies:
        cfg = WegnerConfig(L=2, tau=2.0, theta=0.5, energy=float(energy), trials=10_000,
                           dist=BS, A=2.0, d=1, g=1.0)
        assert len(cfg.annulus.sites()) <= 18
        exact = wegner_exact(cfg, frozen)
        rep = wegner_experiment(cfg, frozen, master_seed=2026, z=Z99)
        reports.append(rep)
        if rep.ci_low <= exact <= rep.ci_high:
            contained += 1
    c_fit = fit_wegner_constant(reports)
    dominated = all(
        r.p_hat <= c_fit * r.ball_size * r.eps_L**r.beta + 1e-12 for r in reports
    )
    ok = contained == 10 and dominated
    verdict(6, "Wegner oracle equivalence", ok,
            f"{contained}/10 energies inside Wilson 99% CI, "
            f"fitted C={c_fit:.4g}, absorbed-constant bound dominated: {dominated}")


def test_c07_thin_tail_ils():
    start = time.time()
    exact_cfg = ThinTailConfig(L0=4, theta=0.5, kappa=0.5, dist=BP, trials=100,
                               A=2.0, d=1, r_cov=8)
    ex = ils_thin_exact(exact_cfg)
    chain_ok = (
        ex.chain_holds
        and ex.p_all_quiet == pytest.approx(ex.quiet_formula, abs=1e-12)
        and ex.p_event <= ex.p_min_v_below + 1e-12
    )
    log_p = []
    for L0 in (4, 6, 8):
        cfg = ThinTailConfig(L0=L0, theta=0.5, kappa=0.5, dist=BP, trials=100_000,
                             A=2.0, d=1)
        rep = ils_thin_tail(cfg, master_seed=404)
        assert rep.implication_violations == 0 and rep.rayleigh_violations == 0
        log_p.append(math.log(rep.p_hat))
    steps = [b - a for a, b in zip(log_p, log_p[1:])]
    monotone = all(s <= -0.15 for s in steps) and (log_p[-1] - log_p[0]) <= -0.6
    elapsed = time.time() - start
    ok = chain_ok and monotone and elapsed < 300.0
    verdict(7, "thin-tail ILS", ok,
            f"exact chain holds: {chain_ok}; ln P = "
            f"{', '.join(f'{v:.2f}' for v in log_p)} at L0=4,6,8; {elapsed:.1f}s")


def test_c08_msa_scale_step():
    params = MSAParams(A=3.0, d=1, b=1.2, tau=1.05, alpha=1.1, S=14,
                       theta=0.5, m=1.0, L0=6)
    params.validate()
    reports = msa_run(params, k_max=1, trials=1200, energy=0.0, dist=BS, g=500.0,
                      master_seed=77)
    r1 = reports[1]
    bound_ok = r1.ci_high <= r1.bound_from_prev
    cond_ok = (r1.cond_sns.samples >= 1000
               and r1.cond_sns.conclusion_violations == 0)
    ok = bound_ok and cond_ok
    verdict(8, "MSA scale step", ok,
            f"p1 CI high {r1.ci_high:.4g} <= recursion bound {r1.bound_from_prev:.4g}; "
            f"cond-SNS: {r1.cond_sns.conclusion_violations} counterexamples in "
            f"{r1.cond_sns.samples} samples")


def test_c09_polya_szego_limit():
    ones = polya_szego_limit(lambda s: np.ones_like(s), RadiiSpec("integers"), [1e4])
    ident = polya_szego_limit(lambda s: s, RadiiSpec("integers"), [1e4])
    wintner = polya_szego_limit(
        lambda s: np.log(np.maximum(np.cos(1.0 / np.asarray(s, dtype=float)), 0.5)),
        RadiiSpec("integers"), [1e5],
    )
    ok = (
        abs(ones.lhs[-1] - ones.rhs) < 1e-3
        and abs(ones.rhs - 1.0) < 1e-6
        and abs(ident.lhs[-1] - 0.5) < 1e-3
        and abs(ident.rhs - 0.5) < 1e-4
        and abs(wintner.lhs[-1] - wintner.rhs) < 1e-2
    )
    verdict(9, "Polya-Szego limit", ok,
            f"f=1 gap {abs(ones.lhs[-1]-ones.rhs):.2e}, "
            f"f=s gap {abs(ident.lhs[-1]-0.5):.2e} (tol 1e-3), "
            f"Wintner gap {abs(wintner.lhs[-1]-wintner.rhs):.2e} (tol 1e-2)")


def test_c10_bernstein_approximation():
    indep = bernstein_approximation(BernsteinSequence(kind="iid", n=12, dist=BS), T=1.0)
    markov_seq = BernsteinSequence(kind="markov_pm1", n=12, flip_prob=0.4)
    enum_gap = float(np.max(np.abs(
        markov_seq.exact_char(np.linspace(-1, 1, 41))
        - markov_seq.enumerated_char(np.linspace(-1, 1, 41))
    )))
    markov = bernstein_approximation(markov_seq, T=1.0)
    ok = indep.holds and markov.holds and enum_gap < 1e-12
    verdict(10, "Bernstein approximation", ok,
            f"independent: gap {indep.sup_gap:.4g} <= budget {indep.eta_sum:.4g}; "
            f"markov n=12: gap {markov.sup_gap:.4g} <= budget {markov.eta_sum:.4g} "
            f"(C_T={markov.defect_constant:.3g}), enumeration agreement {enum_gap:.1e}")


def test_c11_efc_decay():
    profile = efc_profile(
        Ball.origin(1, 12), InteractionPotential.piecewise(2.0), BS,
        g=50.0, separations=[2, 6, 10], trials=1000, master_seed=99,
    )
    nonincreasing = profile[2] >= profile[6] >= profile[10]
    ratio = profile[10] / profile[2]
    ok = nonincreasing and ratio < 0.1
    verdict(11, "EFC decay sanity", ok,
            f"EFC(0,r) = {profile[2]:.3e}, {profile[6]:.3e}, {profile[10]:.3e} "
            f"at r=2,6,10; ratio r=10/r=2 is {ratio:.2e} (< 0.1)")
