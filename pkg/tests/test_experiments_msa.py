import math

import numpy as np
import pytest

from screened_anderson.errors import ValidationError
from screened_anderson.experiments import (
    BoxProbe,
    MSAParams,
    admissible_centers,
    interior_amplitudes,
    max_distant_subset,
    msa_run,
    nr_predicate,
    ns_predicate,
    sns_probe,
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
from screened_anderson.spectral import assemble_hamiltonian, eigensystem, plateau_decompose

BS = AmplitudeDistribution.bernoulli_sym()
POT = InteractionPotential.piecewise(2.0)
ZEROS = FieldSample(values={}, background=Background.zero())

GOOD = MSAParams(A=3.0, d=1, b=1.2, tau=1.05, alpha=1.1, S=14, theta=0.5, m=1.0, L0=6)


class TestParams:
    def test_rejection_negative_denominator(self):
        p = MSAParams(A=3, d=1, b=1.2, tau=1.5, alpha=2.0, S=3, theta=0.5, m=1.0, L0=6)
        bad = p.violations()
        assert any("b - alpha*d" in v for v in bad)
        with pytest.raises(ValidationError):
            p.validate()

    def test_rejection_chain_example(self):
        # tau = 0.5 violates tau > 1 even though tau > b/(A-d) = 0.4
        p = MSAParams(A=6, d=1, b=2, tau=0.5, alpha=2.0, S=19, theta=0.5, m=1.0, L0=6)
        assert any("tau > 1" in v for v in p.violations())
        # alpha = 2 makes the S denominator vanish
        p = MSAParams(A=6, d=1, b=2, tau=1.5, alpha=2.0, S=19, theta=0.5, m=1.0, L0=6)
        assert any("b - alpha*d" in v for v in p.violations())
        # alpha = 1.8 requires S > 18; 19 accepted, 18 rejected
        ok = MSAParams(A=6, d=1, b=2, tau=1.5, alpha=1.8, S=19, theta=0.5, m=1.0, L0=6)
        assert ok.violations() == []
        p = MSAParams(A=6, d=1, b=2, tau=1.5, alpha=1.8, S=18, theta=0.5, m=1.0, L0=6)
        assert any("S >" in v for v in p.violations())

    def test_derived_sequences(self):
        assert GOOD.violations() == []
        assert GOOD.scale_length(1) == math.floor(6**1.1) == 7
        assert GOOD.mass(0) == pytest.approx((1 + 6**-0.125) * 1.0)
        assert GOOD.resonance_eps(0) == pytest.approx(4.0 * 6.0 ** (-1.05 * 3.0 + 0.5))
        assert GOOD.centers_count(0) == pytest.approx(6.0**0.1)
        assert GOOD.conditioning_radius(0) == math.ceil(6**1.05)

    def test_round_trip(self):
        assert MSAParams.from_dict(GOOD.to_dict()) == GOOD


class TestPredicates:
    def _free_dec(self, L):
        ham = assemble_hamiltonian(Ball.origin(1, L), POT, ZEROS, 1.0, r_max=1)
        return eigensystem(ham)

    def test_nr_examples(self):
        dec = self._free_dec(1)
        # gamma = 0 always true
        assert nr_predicate(dec, 123.4, 0.0)
        # exact eigenvalue fails any positive gamma
        assert not nr_predicate(dec, 2.0, 1e-9)
        # d=1, L=1, V=0, E=0: distance 2 - sqrt(2) >= 0.5
        assert nr_predicate(dec, 0.0, 0.5)
        assert dec.spectral_distance(0.0) == pytest.approx(2 - math.sqrt(2))

    def test_ns_resonant_energy_is_singular(self):
        dec = self._free_dec(3)
        assert not ns_predicate(dec, float(dec.eigenvalues[0]), 1e6)

    def test_ns_core_is_center_for_L3(self):
        # floor(3/3) = 1: the core ball has 3 sites in d=1
        dec = self._free_dec(3)
        energy = float(dec.eigenvalues[0]) - 5.0
        core = Ball.at(dec.box.center, dec.box.radius // 3)
        assert core.radius == 1

    def test_combes_thomas_regime(self):
        # far below the spectrum the kernel is tiny: frozen instance
        field = sample_field(BS, Ball.origin(1, 30).sites(), stream(123, "ct", 0))
        ham = assemble_hamiltonian(Ball.origin(1, 9), POT, field, 10.0)
        dec = eigensystem(ham)
        energy = float(dec.eigenvalues[0]) - 10.0
        assert ns_predicate(dec, energy, 1e-3)
        assert not ns_predicate(dec, energy, 1e-12)

    def test_monotonicity_in_thresholds(self):
        field = sample_field(BS, Ball.origin(1, 20).sites(), stream(7, "mono", 0))
        ham = assemble_hamiltonian(Ball.origin(1, 6), POT, field, 2.0)
        dec = eigensystem(ham)
        rng = np.random.default_rng(2)
        for _ in range(20):
            energy = float(rng.uniform(-2, 7))
            eps_small, eps_big = sorted(rng.uniform(1e-6, 10.0, 2))
            if ns_predicate(dec, energy, eps_small):
                assert ns_predicate(dec, energy, eps_big)
            g_small, g_big = sorted(rng.uniform(1e-6, 3.0, 2))
            if nr_predicate(dec, energy, g_big):
                assert nr_predicate(dec, energy, g_small)


class TestSnsProbe:
    def _probe(self, L=4, r_int=6, r_ext=12, g=1.0):
        return BoxProbe(box=Ball.origin(1, L), pot=POT, g=g, r_int=r_int, r_ext=r_ext)

    def _interior(self, probe, value=0.0):
        return FieldSample(
            values={s: value for s in enumerate_ball(Ball.origin(1, probe.r_int))},
            background=Background.zero(),
        )

    def test_snr_zero_interior_reduces_to_free_spectrum(self):
        probe = self._probe()
        interior = self._interior(probe, 0.0)
        free = eigensystem(assemble_hamiltonian(probe.box, POT, ZEROS, 1.0, r_max=1))
        gap = float(free.eigenvalues[0]) / 2.0
        rep = sns_probe(probe, free.eigenvalues[0] - gap, gap * 0.9, interior, BS, mode="SNR")
        assert rep.exact and rep.holds_on_probes
        rep2 = sns_probe(probe, float(free.eigenvalues[0]), 1e-6, interior, BS, mode="SNR")
        assert not rep2.holds_on_probes

    def test_extremes_only_budget(self):
        probe = self._probe(g=30.0)
        interior = FieldSample(
            values={s: v for s, v in zip(
                enumerate_ball(Ball.origin(1, probe.r_int)),
                BS.sample(stream(3, "int", 0), 13),
            )},
            background=Background.zero(),
        )
        rep = sns_probe(probe, -5.0, 1e-4, interior, BS, mode="SNS", m_ext=0)
        names = [name for name, _ in rep.certificates]
        assert set(names) <= {"all_min", "all_max"}

    def test_missing_interior_coverage_rejected(self):
        probe = self._probe()
        small = FieldSample(values={(0,): 1.0}, background=Background.zero())
        with pytest.raises(ValidationError) as err:
            interior_amplitudes(probe, small)
        assert "must cover" in str(err.value)

    def test_plateau_only_exterior_leaves_h_tilde_invariant(self):
        # exterior entirely on one plateau: probes move xi, never H-tilde
        pot = InteractionPotential.piecewise(A=3.0, ups=2.0)
        box = Ball.origin(1, 2)
        plateau_zone = [s for s in enumerate_ball(Ball.origin(1, 45))
                        if 38 <= abs(s[0]) <= 42]
        rng_vals = BS.sample(stream(11, "pl", 0), len(plateau_zone))
        checksums = set()
        for fill in (-1.0, 1.0, None):
            values = {s: (fill if fill is not None else float(v))
                      for s, v in zip(plateau_zone, rng_vals)}
            field = FieldSample(values=values, background=Background.zero())
            dec = plateau_decompose(box, pot, field, 1.0, plateau_zone)
            assert set(dec.plateau_sites) == set(plateau_zone)
            checksums.add(dec.h_tilde_checksum())
        assert len(checksums) == 1


class TestClusterStatistic:
    def test_max_distant_subset(self):
        centers = [(-6,), (0,), (6,)]
        # pairwise gaps are 6, 6, 12
        assert max_distant_subset(centers, [True, True, True], 5.0) == 3
        assert max_distant_subset(centers, [True, True, True], 7.0) == 2
        assert max_distant_subset(centers, [True, True, False], 7.0) == 1
        assert max_distant_subset(centers, [True, True, True], 13.0) == 1
        assert max_distant_subset(centers, [False, False, False], 1.0) == 0

    def test_admissible_centers(self):
        assert admissible_centers(GOOD, 0) == [(-6,), (0,), (6,)]


class TestMsaRun:
    def test_rejects_bad_params(self):
        bad = MSAParams(A=3, d=1, b=1.2, tau=1.5, alpha=2.0, S=3, theta=0.5, m=1.0, L0=6)
        with pytest.raises(ValidationError):
            msa_run(bad, 0, 10, 0.0, BS, 1.0, 1)

    def test_strong_disorder_recursion(self):
        reps = msa_run(GOOD, k_max=1, trials=250, energy=0.0, dist=BS, g=500.0,
                       master_seed=77)
        assert [r.k for r in reps] == [0, 1]
        r1 = reps[1]
        assert r1.bound_from_prev is not None
        assert r1.ci_high <= r1.bound_from_prev
        assert r1.cond_sns.conclusion_violations == 0
        assert r1.bound_from_prev >= 0.5 * r1.length ** (-GOOD.b)

    def test_weak_disorder_exercises_failure_paths(self):
        # small coupling: failures and breakdowns appear without crashes
        reps = msa_run(GOOD, k_max=1, trials=60, energy=2.0, dist=BS, g=0.5,
                       master_seed=5)
        r1 = reps[1]
        assert 0 <= r1.failures <= 60
        assert sum(r1.cluster_size_counts.values()) == 60
        assert r1.cond_sns.hypotheses_held <= 60

    def test_determinism(self):
        a = msa_run(GOOD, k_max=0, trials=100, energy=0.0, dist=BS, g=500.0, master_seed=13)
        b = msa_run(GOOD, k_max=0, trials=100, energy=0.0, dist=BS, g=500.0, master_seed=13)
        assert a[0].failures == b[0].failures
        assert a[0].p_hat == b[0].p_hat


class TestProbePredicateConsistency:
    def test_box_probe_matches_public_predicates(self):
        # the vectorized probe internals and the public predicates must
        # agree verdict-for-verdict on the same Hamiltonian
        probe = BoxProbe(box=Ball.origin(1, 4), pot=POT, g=2.0, r_int=6, r_ext=12)
        rng = np.random.default_rng(17)
        region = enumerate_ball(Ball.origin(1, 12))
        for trial in range(15):
            om = BS.sample(stream(55, "consistency", trial), len(region))
            field = FieldSample(
                values={s: float(v) for s, v in zip(region, om)},
                background=Background.zero(),
            )
            om_int = np.array([field.values[s] for s in probe.int_sites])
            om_ext = np.array([field.values[s] for s in probe.ext_sites])
            h = probe.hamiltonian(om_int, om_ext)
            ham = assemble_hamiltonian(probe.box, POT, field, 2.0, r_max=16)
            assert np.allclose(h, ham.matrix, atol=1e-12)
            dec = eigensystem(ham)
            for _ in range(3):
                energy = float(rng.uniform(-2, 8))
                eps = float(rng.uniform(1e-4, 1.0))
                gamma = float(rng.uniform(1e-4, 1.0))
                assert probe.ns(h, energy, eps) == ns_predicate(dec, energy, eps)
                assert probe.nr(h, energy, gamma) == nr_predicate(dec, energy, gamma)
