"""Reproducible batch front-end.

One subcommand per experiment family.  Every run resolves its config
(JSON file overridden by explicit flags), executes with counter-based
streams keyed off the master seed, and writes a self-describing report:
a CSV table with stable columns, the canonical JSON document embedding
the resolved config, and a PNG figure alongside (disable with
--no-plot).  Exit codes: 0 success, 2 config validation failure,
3 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__, report
from .charfun import (
    RadiiSpec,
    ShellWeights,
    concentration_bound,
    fit_decay_exponent,
    polya_szego_limit,
    shell_product,
    taylor_remainder_check,
)
from .errors import NumericalError, ValidationError
from .experiments import (
    MSAParams,
    StrongDisorderConfig,
    ThinTailConfig,
    WegnerConfig,
    fit_wegner_constant,
    ils_strong_disorder,
    ils_thin_tail,
    msa_run,
    wegner_exact,
    wegner_experiment,
)
from .lattice import Ball, enumerate_ball
from .model import (
    AmplitudeDistribution,
    Background,
    FieldSample,
    InteractionPotential,
    sample_field,
)
from .rng import stream
from .spectral import (
    assemble_hamiltonian,
    dos_histogram,
    efc_profile,
    eigensystem,
    plateau_decompose,
)

THREADS_ENV = "SCREENED_ANDERSON_THREADS"


def _write_table(args, path, header, rows) -> None:
    """CSV summary table; suppressed when --format json is selected
    (the canonical JSON report is always written)."""
    if args.format == "csv":
        report.write_csv(path, header, rows)


def parallel_map(fn, items, threads: int):
    """Order-preserving map; results are keyed by input index, so the
    worker count never changes the output."""
    if threads <= 1 or len(items) <= 1:
        return [fn(it) for it in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


def _resolve_dist(cfg: dict, args) -> AmplitudeDistribution:
    """Explicit --dist flag wins; else the config's "dist" object; else
    the symmetric Bernoulli default."""
    if args.dist is not None:
        name = args.dist.replace("-", "_")
        if name == "bernoulli_p":
            if args.p is None:
                raise ValidationError("--dist bernoulli-p needs --p")
            return AmplitudeDistribution.bernoulli_p(args.p)
        return AmplitudeDistribution(kind=name)
    spec = cfg.get("dist")
    if spec is None:
        return AmplitudeDistribution.bernoulli_sym()
    if isinstance(spec, dict):
        return AmplitudeDistribution.from_dict(spec)
    raise ValidationError('config "dist" must be an object like {"kind": ..., "p": ...}')


def _load_config(args) -> dict:
    if args.config is None:
        return {}
    path = Path(args.config)
    if not path.exists():
        raise ValidationError(f"config file not found: {path}")
    try:
        cfg = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ValidationError(f"malformed config {path}: {exc}") from exc
    if not isinstance(cfg, dict):
        raise ValidationError("config must be a JSON object")
    return cfg


def _resolve(cfg: dict, args, fields: dict) -> dict:
    """Merge config-file values with flags; explicit flags win."""
    out = {}
    for name, default in fields.items():
        flag = getattr(args, name, None)
        if flag is not None:
            out[name] = flag
        elif name in cfg:
            out[name] = cfg[name]
        else:
            out[name] = default
    missing = [k for k, v in out.items() if v is None]
    if missing:
        raise ValidationError(f"missing required parameters: {', '.join(missing)}")
    return out


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------


def cmd_charfun(args, out: Path, threads: int) -> int:
    raw = _load_config(args)
    cfg = _resolve(raw, args, {
        "d": 1, "A": 2.0, "ups": 1.0, "tmin": 1e2, "tmax": 1e6, "points": 25,
        "n_max": 0,
    })
    dist = _resolve_dist(raw, args)
    n_max = int(cfg["n_max"]) or None
    fit = fit_decay_exponent(
        dist, d=int(cfg["d"]), A=cfg["A"], ups=cfg["ups"],
        t_lo=cfg["tmin"], t_hi=cfg["tmax"], points=int(cfg["points"]), n_max=n_max,
    )
    weights = ShellWeights.from_model(
        d=int(cfg["d"]), A=cfg["A"], ups=cfg["ups"],
        n_max=n_max or 2048,
    )
    prod = shell_product(dist, weights, fit.t_values)
    rows = [
        (t, v.real, v.imag, li)
        for t, v, li in zip(fit.t_values, prod.grid.values, fit.log_inv_modulus)
    ]
    _write_table(args, out / "charfun.csv", ["t", "re_phi", "im_phi", "log_inv_modulus"], rows)
    doc = report.run_meta("charfun", {**cfg, "dist": dist.to_dict()}, args.seed)
    doc["fit"] = {
        "slope": fit.slope, "intercept": fit.intercept, "residual": fit.residual,
        "target": cfg["d"] / cfg["A"],
    }
    report.write_json(out / "charfun.json", doc)
    if args.plot:
        report.fig_charfun(
            out / "charfun.png", fit.t_values, fit.log_inv_modulus,
            fit.slope, fit.intercept,
            f"shell product decay, d={cfg['d']} A={cfg['A']} (target {cfg['d']/cfg['A']:.3f})",
        )
    print(f"charfun: fitted decay exponent {fit.slope:.4f} (target {cfg['d']/cfg['A']:.4f})")
    return 0


def cmd_concentration(args, out: Path, threads: int) -> int:
    raw = _load_config(args)
    cfg = _resolve(raw, args, {
        "d": 1, "A": 2.0, "ups": 1.0, "M": 1, "N": 4, "center": 0.0,
        "theta": 0.5, "sweep": 8,
    })
    dist = _resolve_dist(raw, args)
    weights = ShellWeights.from_model(d=int(cfg["d"]), A=cfg["A"], ups=cfg["ups"],
                                      n_max=int(cfg["N"]))
    threshold = float(weights.subrange(int(cfg["M"]), int(cfg["N"])).amps[-1]) ** (
        1.0 / (1.0 + cfg["theta"])
    )
    eps_values = threshold * np.linspace(1.0, 4.0, int(cfg["sweep"]))

    def one(eps):
        return concentration_bound(
            dist, weights, int(cfg["M"]), int(cfg["N"]), cfg["center"], float(eps),
            theta=cfg["theta"],
        )
    reports = parallel_map(one, list(eps_values), threads)
    rows = [
        (r.eps, r.J1, r.J2, r.bound, r.threshold, r.t_eps)
        for r in reports
    ]
    _write_table(
        args, out / "concentration.csv",
        ["eps", "j1", "j2", "bound", "threshold", "t_eps"], rows,
    )
    doc = report.run_meta("concentration", {**cfg, "dist": dist.to_dict()}, args.seed)
    doc["bounds"] = [
        {"eps": r.eps, "j1": r.J1, "j2": r.J2, "bound": r.bound} for r in reports
    ]
    report.write_json(out / "concentration.json", doc)
    if args.plot:
        report.fig_decay_curve(
            out / "concentration.png", eps_values, [r.bound for r in reports],
            "interval half-width eps", "certified bound",
            f"concentration bound, M={cfg['M']} N={cfg['N']}", logy=False,
        )
    print(f"concentration: {len(reports)} bounds, threshold eps >= {threshold:.4g}")
    return 0


def cmd_dos(args, out: Path, threads: int) -> int:
    raw = _load_config(args)
    cfg = _resolve(raw, args, {
        "d": 1, "L": 6, "A": 2.0, "ups": 1.0, "g": 1.0, "trials": 2000, "bins": 40,
    })
    dist = _resolve_dist(raw, args)
    rep = dos_histogram(
        Ball.origin(int(cfg["d"]), int(cfg["L"])),
        InteractionPotential.piecewise(cfg["A"], cfg["ups"]),
        dist, cfg["g"], int(cfg["trials"]), int(cfg["bins"]),
        master_seed=args.seed,
    )
    rows = list(zip(rep.bin_edges[:-1], rep.bin_edges[1:], rep.density))
    _write_table(args, out / "dos.csv", ["bin_lo", "bin_hi", "density"], rows)
    doc = report.run_meta("dos", {**cfg, "dist": dist.to_dict()}, args.seed)
    doc["normalization"] = rep.normalization
    doc["smoothness"] = rep.smoothness
    report.write_json(out / "dos.json", doc)
    if args.plot:
        report.fig_dos(out / "dos.png", rep.bin_edges, rep.density,
                       f"DoS, d={cfg['d']} L={cfg['L']} g={cfg['g']}")
    print(f"dos: {rep.eigenvalue_count} eigenvalues, normalization {rep.normalization:.6f}")
    return 0


def cmd_decompose(args, out: Path, threads: int) -> int:
    raw = _load_config(args)
    cfg = _resolve(raw, args, {
        "d": 1, "L": 2, "A": 3.0, "ups": 2.0, "g": 1.0, "ext_radius": 60,
    })
    dist = _resolve_dist(raw, args)
    pot = InteractionPotential.piecewise(cfg["A"], cfg["ups"])
    box = Ball.origin(int(cfg["d"]), int(cfg["L"]))
    region = enumerate_ball(Ball.origin(int(cfg["d"]), int(cfg["ext_radius"])))
    field = sample_field(dist, region, stream(args.seed, "decompose", 0))
    exterior = [s for s in region if s not in box]
    dec = plateau_decompose(box, pot, field, cfg["g"], exterior)
    ham = dec.hamiltonian
    spec_full = eigensystem(ham)
    rows = [(list(s), dec.plateau_weights[s]) for s in dec.plateau_sites]
    _write_table(args, out / "decompose.csv", ["site", "weight"], rows)
    shifted_spectrum = np.linalg.eigvalsh(dec.h_tilde) + dec.xi
    _write_table(
        args, out / "decompose_spectrum.csv",
        ["index", "eigenvalue", "h_tilde_eigenvalue_plus_xi"],
        [(i, float(a), float(b))
         for i, (a, b) in enumerate(zip(spec_full.eigenvalues, shifted_spectrum))],
    )
    doc = report.run_meta("decompose", {**cfg, "dist": dist.to_dict()}, args.seed)
    doc["xi"] = dec.xi
    doc["plateau_sites"] = [list(s) for s in dec.plateau_sites]
    doc["h_tilde_sha256"] = dec.h_tilde_checksum()
    doc["reconstruction_defect"] = dec.reconstruction_defect()
    doc["spectrum"] = spec_full.eigenvalues.tolist()
    report.write_json(out / "decompose.json", doc)
    if args.plot:
        report.fig_spectrum_shift(
            out / "decompose.png", spec_full.eigenvalues, shifted_spectrum, dec.xi,
            f"plateau split, {len(dec.plateau_sites)} plateau sites",
        )
    print(
        f"decompose: xi={dec.xi:.6g}, {len(dec.plateau_sites)} plateau sites, "
        f"defect {dec.reconstruction_defect():.2e}"
    )
    return 0


def cmd_wegner(args, out: Path, threads: int) -> int:
    raw = _load_config(args)
    cfg = _resolve(raw, args, {
        "L": 2, "tau": 2.0, "theta": 0.5, "A": 2.0, "d": 1, "g": 1.0,
        "trials": 10000, "energies": "1.0,2.0,3.0",
    })
    dist = _resolve_dist(raw, args)
    energies = [float(e) for e in str(cfg["energies"]).split(",") if e]
    if not energies:
        raise ValidationError("no energies given")

    def one(energy):
        wcfg = WegnerConfig(
            L=int(cfg["L"]), tau=cfg["tau"], theta=cfg["theta"], energy=energy,
            trials=int(cfg["trials"]), dist=dist, A=cfg["A"], d=int(cfg["d"]),
            g=cfg["g"],
        )
        frozen = FieldSample(values={}, background=Background.zero())
        return wegner_experiment(wcfg, frozen, master_seed=args.seed)

    reports = parallel_map(one, energies, threads)
    c_fit = fit_wegner_constant(reports)
    rows = []
    for energy, r in zip(energies, reports):
        bound = c_fit * r.ball_size * r.eps_L**r.beta
        rows.append((energy, r.p_hat, r.ci_low, r.ci_high, r.eps_L, r.beta, bound,
                     r.ci_high <= bound))
    _write_table(
        args, out / "wegner.csv",
        ["energy", "p_hat", "ci_low", "ci_high", "eps_L", "beta", "bound", "passed"],
        rows,
    )
    doc = report.run_meta("wegner", {**cfg, "dist": dist.to_dict()}, args.seed)
    doc["fitted_constant"] = c_fit
    doc["rows"] = [dict(zip(
        ["energy", "p_hat", "ci_low", "ci_high", "eps_L", "beta", "bound", "passed"], row))
        for row in rows]
    report.write_json(out / "wegner.json", doc)
    if args.plot:
        report.fig_probability_bars(
            out / "wegner.png", [f"{e:g}" for e in energies],
            [r.p_hat for r in reports],
            [row[6] for row in rows],
            f"frozen-bath Wegner, L={cfg['L']} tau={cfg['tau']}", "fitted bound",
        )
    print(f"wegner: {len(energies)} energies, fitted constant {c_fit:.4g}")
    return 0


def cmd_ils_thin(args, out: Path, threads: int) -> int:
    raw = _load_config(args)
    cfg = _resolve(raw, args, {
        "L0s": "4,6,8", "theta": 0.5, "kappa": 0.5, "A": 2.0, "d": 1,
        "g": 1.0, "trials": 20000,
    })
    dist = _resolve_dist(raw, args)
    l0s = [int(v) for v in str(cfg["L0s"]).split(",") if v]

    def one(L0):
        tcfg = ThinTailConfig(
            L0=L0, theta=cfg["theta"], kappa=cfg["kappa"], dist=dist,
            trials=int(cfg["trials"]), A=cfg["A"], d=int(cfg["d"]), g=cfg["g"],
        )
        return ils_thin_tail(tcfg, master_seed=args.seed)

    reports = parallel_map(one, l0s, threads)
    rows = [
        (L0, r.p_hat, r.ci_low, r.ci_high, r.threshold, r.chain_bound,
         r.implied_c_theta, r.implication_violations, r.rayleigh_violations)
        for L0, r in zip(l0s, reports)
    ]
    _write_table(
        args, out / "ils_thin.csv",
        ["L0", "p_hat", "ci_low", "ci_high", "threshold", "chain_bound",
         "implied_c_theta", "implication_violations", "rayleigh_violations"],
        rows,
    )
    doc = report.run_meta("ils-thin", {**cfg, "dist": dist.to_dict()}, args.seed)
    doc["rows"] = [dict(zip(
        ["L0", "p_hat", "ci_low", "ci_high", "threshold", "chain_bound",
         "implied_c_theta", "implication_violations", "rayleigh_violations"], row))
        for row in rows]
    report.write_json(out / "ils_thin.json", doc)
    if args.plot:
        report.fig_decay_curve(
            out / "ils_thin.png", l0s, [max(r.p_hat, 1e-12) for r in reports],
            "L0", "P{E0 <= L0^-theta}", "thin-tail ILS decay",
        )
    print("ils-thin: " + ", ".join(f"L0={L0}: p={r.p_hat:.4g}" for L0, r in zip(l0s, reports)))
    return 0


def cmd_ils_strong(args, out: Path, threads: int) -> int:
    raw = _load_config(args)
    cfg = _resolve(raw, args, {
        "L0": 4, "eps": 1.0, "kappa": 0.5, "A": 2.0, "d": 1, "trials": 2000,
        "b": 0.0, "tau": 0.0,
    })
    dist = _resolve_dist(raw, args)
    b = cfg["b"] or None
    tau = cfg["tau"] or None
    scfg = StrongDisorderConfig(
        L0=int(cfg["L0"]), eps=cfg["eps"], kappa=cfg["kappa"], dist=dist,
        A=cfg["A"], d=int(cfg["d"]), trials=int(cfg["trials"]), b=b, tau=tau,
    )
    rep = ils_strong_disorder(scfg, master_seed=args.seed)
    rows = list(zip(rep.energies, rep.p_per_energy))
    _write_table(args, out / "ils_strong.csv", ["energy", "p_hat"], rows)
    doc = report.run_meta("ils-strong", {**cfg, "dist": dist.to_dict()}, args.seed)
    doc["g"] = rep.g
    doc["delta"] = rep.delta
    doc["sup_p"] = rep.sup_p
    doc["sup_ci_high"] = rep.sup_ci_high
    doc["target"] = rep.target
    doc["grid_spacing"] = rep.grid_spacing
    doc["reduction_violations"] = rep.reduction_violations
    report.write_json(out / "ils_strong.json", doc)
    if args.plot:
        report.fig_probability_bars(
            out / "ils_strong.png",
            [f"{e:.2f}" for e in rep.energies[:: max(1, len(rep.energies) // 40)]],
            rep.p_per_energy[:: max(1, len(rep.energies) // 40)],
            rep.target, f"strong-disorder ILS, g={rep.g:.3g}", "target",
        )
    print(f"ils-strong: sup_E p = {rep.sup_p:.4g} target {rep.target:.4g} "
          f"violations {rep.reduction_violations}")
    return 0


def cmd_msa(args, out: Path, threads: int) -> int:
    raw = _load_config(args)
    cfg = _resolve(raw, args, {
        "A": 3.0, "d": 1, "b": 1.2, "tau": 1.05, "alpha": 1.1, "S": 14,
        "theta": 0.5, "m": 1.0, "L0": 6, "k_max": 1, "trials": 400,
        "energy": 0.0, "g": 500.0, "m_ext": 2,
    })
    dist = _resolve_dist(raw, args)
    params = MSAParams(
        A=cfg["A"], d=int(cfg["d"]), b=cfg["b"], tau=cfg["tau"], alpha=cfg["alpha"],
        S=int(cfg["S"]), theta=cfg["theta"], m=cfg["m"], L0=int(cfg["L0"]),
    )
    reports = msa_run(
        params, k_max=int(cfg["k_max"]), trials=int(cfg["trials"]),
        energy=cfg["energy"], dist=dist, g=cfg["g"], master_seed=args.seed,
        m_ext=int(cfg["m_ext"]),
    )
    header = ["k", "L", "trials", "failures", "p_hat", "ci_low", "ci_high",
              "target", "snr_failures", "cluster_exceedances", "bound_from_prev",
              "bound_from_prev_factorial"]
    rows = [
        (r.k, r.length, r.trials, r.failures, r.p_hat, r.ci_low, r.ci_high,
         r.target, r.snr_failures, r.cluster_exceedances,
         r.bound_from_prev if r.bound_from_prev is not None else "",
         r.bound_from_prev_factorial if r.bound_from_prev_factorial is not None else "")
        for r in reports
    ]
    _write_table(args, out / "msa.csv", header, rows)
    doc = report.run_meta("msa", {**cfg, "dist": dist.to_dict()}, args.seed)
    doc["scales"] = []
    for r in reports:
        doc["scales"].append({
            "k": r.k, "L": r.length, "p_hat": r.p_hat, "ci": [r.ci_low, r.ci_high],
            "target": r.target, "snr_failures": r.snr_failures,
            "cluster_exceedances": r.cluster_exceedances,
            "bound_from_prev": r.bound_from_prev,
            "bound_from_prev_factorial": r.bound_from_prev_factorial,
            "cluster_size_counts": {str(k): v for k, v in r.cluster_size_counts.items()},
            "cond_sns": (
                {"samples": r.cond_sns.samples,
                 "hypotheses_held": r.cond_sns.hypotheses_held,
                 "conclusion_violations": r.cond_sns.conclusion_violations}
                if r.cond_sns else None),
            "ns_threshold": r.ns_threshold,
        })
    report.write_json(out / "msa.json", doc)
    if args.plot:
        report.fig_probability_bars(
            out / "msa.png", [f"k={r.k}" for r in reports],
            [r.p_hat for r in reports], [r.target for r in reports],
            "MSA scale recursion", "target L_k^-b",
        )
    for r in reports:
        print(f"msa: k={r.k} L={r.length} p={r.p_hat:.4g} (ci_high {r.ci_high:.4g}) "
              f"target {r.target:.4g}")
    return 0


def cmd_efc(args, out: Path, threads: int) -> int:
    raw = _load_config(args)
    cfg = _resolve(raw, args, {
        "d": 1, "L": 12, "A": 2.0, "ups": 1.0, "g": 50.0,
        "separations": "2,6,10", "trials": 1000,
    })
    dist = _resolve_dist(raw, args)
    seps = [int(v) for v in str(cfg["separations"]).split(",") if v]
    profile = efc_profile(
        Ball.origin(int(cfg["d"]), int(cfg["L"])),
        InteractionPotential.piecewise(cfg["A"], cfg["ups"]),
        dist, cfg["g"], seps, int(cfg["trials"]), master_seed=args.seed,
    )
    rows = [(r, profile[r]) for r in seps]
    _write_table(args, out / "efc.csv", ["separation", "efc"], rows)
    doc = report.run_meta("efc", {**cfg, "dist": dist.to_dict()}, args.seed)
    doc["profile"] = {str(r): profile[r] for r in seps}
    report.write_json(out / "efc.json", doc)
    if args.plot:
        report.fig_decay_curve(
            out / "efc.png", seps, [profile[r] for r in seps],
            "separation r", "mean EFC(0, r)",
            f"eigenfunction correlator decay, g={cfg['g']}",
        )
    print("efc: " + ", ".join(f"r={r}: {profile[r]:.4g}" for r in seps))
    return 0


def cmd_selftest(args, out: Path, threads: int) -> int:
    """Fast oracle suite: exact enumerations against closed forms."""
    checks = []

    two = (2 * 3 + 1) ** 2 - (2 * 2 + 1) ** 2
    sh = ShellWeights.from_model(d=2, A=3.0, ups=1.0, n_max=3)
    checks.append(("shell counts d=2", int(sh.counts[-1]) == two))

    tc = taylor_remainder_check(1, math.pi)
    checks.append(("taylor remainder", tc.holds and abs(tc.lhs - math.sqrt(4 + math.pi**2)) < 1e-12))

    dist = AmplitudeDistribution.bernoulli_sym()
    wcfg = WegnerConfig(L=2, tau=2.0, theta=0.5, energy=2.0, trials=400,
                        dist=dist, A=2.0, d=1, g=1.0)
    frozen = FieldSample(values={}, background=Background.zero())
    exact = wegner_exact(wcfg, frozen)
    mc = wegner_experiment(wcfg, frozen, master_seed=args.seed)
    checks.append(("wegner exact vs MC", mc.ci_low <= exact <= mc.ci_high))

    box = Ball.origin(1, 1)
    ham = assemble_hamiltonian(box, InteractionPotential.piecewise(2.0), frozen, 1.0, r_max=1)
    dec = eigensystem(ham)
    target = np.array([2 - math.sqrt(2), 2.0, 2 + math.sqrt(2)])
    checks.append(("free spectrum d=1 L=1", bool(np.allclose(dec.eigenvalues, target))))

    rep = polya_szego_limit(lambda s: s, RadiiSpec("integers"), [10_000.0])
    checks.append(("polya-szego f=s", abs(rep.lhs[-1] - 0.5) < 1e-3 and abs(rep.rhs - 0.5) < 1e-4))

    failed = 0
    for name, ok in checks:
        print(f"selftest {'PASS' if ok else 'FAIL'}: {name}")
        if not ok:
            failed += 1
    if failed:
        raise NumericalError(f"{failed} selftest checks failed")
    return 0


COMMANDS = {
    "charfun": cmd_charfun,
    "concentration": cmd_concentration,
    "dos": cmd_dos,
    "decompose": cmd_decompose,
    "wegner": cmd_wegner,
    "ils-thin": cmd_ils_thin,
    "ils-strong": cmd_ils_strong,
    "msa": cmd_msa,
    "efc": cmd_efc,
    "selftest": cmd_selftest,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="screened-anderson",
        description="Desk-scale laboratory for polynomially screened Anderson models",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", type=str, default=None, help="JSON config file")
        p.add_argument("--seed", type=int, default=0, help="64-bit master seed")
        p.add_argument("--out", type=str, default="out", help="output directory")
        p.add_argument("--format", choices=("csv", "json"), default="csv",
                       help="table format (JSON report is always written)")
        p.add_argument("--threads", type=int, default=None,
                       help=f"worker threads (env {THREADS_ENV} overrides default 1)")
        p.add_argument("--plot", dest="plot", action="store_true", default=True)
        p.add_argument("--no-plot", dest="plot", action="store_false")
        p.add_argument("--dist", type=str, default=None,
                       choices=("bernoulli-sym", "bernoulli-p", "uniform01"))
        p.add_argument("--p", type=float, default=None, help="bernoulli-p parameter")

    float_flags = {
        "charfun": ["A", "ups", "tmin", "tmax"],
        "concentration": ["A", "ups", "center", "theta"],
        "dos": ["A", "ups", "g"],
        "decompose": ["A", "ups", "g"],
        "wegner": ["tau", "theta", "A", "g"],
        "ils-thin": ["theta", "kappa", "A", "g"],
        "ils-strong": ["eps", "kappa", "A", "b", "tau"],
        "msa": ["A", "b", "tau", "alpha", "theta", "m", "energy", "g"],
        "efc": ["A", "ups", "g"],
        "selftest": [],
    }
    int_flags = {
        "charfun": ["d", "points", "n_max"],
        "concentration": ["d", "M", "N", "sweep"],
        "dos": ["d", "L", "trials", "bins"],
        "decompose": ["d", "L", "ext_radius"],
        "wegner": ["L", "d", "trials"],
        "ils-thin": ["d", "trials"],
        "ils-strong": ["L0", "d", "trials"],
        "msa": ["d", "S", "L0", "k_max", "trials", "m_ext"],
        "efc": ["d", "L", "trials"],
        "selftest": [],
    }
    str_flags = {
        "wegner": ["energies"],
        "ils-thin": ["L0s"],
        "efc": ["separations"],
    }
    for name in COMMANDS:
        p = sub.add_parser(name)
        common(p)
        for f in float_flags.get(name, []):
            p.add_argument(f"--{f.replace('_', '-')}", dest=f, type=float, default=None)
        for f in int_flags.get(name, []):
            p.add_argument(f"--{f.replace('_', '-')}", dest=f, type=int, default=None)
        for f in str_flags.get(name, []):
            p.add_argument(f"--{f.replace('_', '-')}", dest=f, type=str, default=None)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    threads = args.threads
    if threads is None:
        raw = os.environ.get(THREADS_ENV, "1")
        try:
            threads = int(raw)
        except ValueError:
            print(f"config error: {THREADS_ENV}={raw!r} is not an integer", file=sys.stderr)
            return 2
    try:
        if args.command == "selftest":
            return COMMANDS[args.command](args, Path("."), threads)
        out = report.ensure_out_dir(args.out)
        return COMMANDS[args.command](args, out, threads)
    except ValidationError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
