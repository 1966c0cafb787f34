"""Command-line front end.

    uavcomp run <scenario|config.toml> [--seed N] [--trials N] [--out DIR]
                [--set key.path=value ...] [--threads N]
    uavcomp run verify [--criteria 1,2,...]

Exit codes: 0 success, 1 configuration error, 2 runtime or numeric failure,
3 a verification tolerance was not met.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import platform
import sys
import time
from importlib import metadata
from pathlib import Path

import numpy as np

from . import acceptance
from . import analytic as an
from . import config as cf
from . import formation as fm
from . import montecarlo as mc
from . import tracking as tr
from .errors import ConfigError, UavCompError

log = logging.getLogger("uavcomp")

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME, EXIT_TOLERANCE = 0, 1, 2, 3


def package_version() -> str:
    try:
        return metadata.version("artifact")
    except metadata.PackageNotFoundError:  # running from a source tree
        from . import __version__

        return __version__


def _fmt(x) -> str:
    return f"{float(x) + 0.0:.9g}"  # + 0.0 turns -0.0 into 0.0


def _write_rows(path: Path, header, rows) -> Path:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        w.writerows(rows)
    return path


# ---------------------------------------------------------------------------
# Scenario runners; each returns the list of files written


def run_formation(cfg: dict, out: Path) -> list[Path]:
    sc = cf.formation_scenario(cfg)
    params, init, cell = fm.case_study(sc)
    res = fm.simulate_formation(params, init, sc.t_end, sc.dt, noise=sc.noise, seed=sc.seed,
                                stride=int(cfg["formation"]["stride"]))
    if not res.completed:
        raise UavCompError(res.message)
    traj = out / "formation_trajectory.csv"
    res.write_csv(traj)
    rows = []
    for k, t in enumerate(res.times):
        for i in range(params.n_followers):
            rows.append([_fmt(t), i + 1, *map(_fmt, res.xi_x[k, i]), *map(_fmt, res.xi_v[k, i]),
                         _fmt(res.err_pos_norm[k]), _fmt(res.err_vel_norm[k])])
    fig = _write_rows(out / "fig4_errors.csv",
                      ["t", "follower", "ex", "ey", "ez", "evx", "evy", "evz", "err_pos_norm", "err_vel_norm"], rows)
    ratio = float(res.err_vel_norm[-1] / res.err_vel_norm[0])
    log.info("formation: terminal/initial velocity-error ratio %.4g", ratio)
    return [traj, fig]


def run_tracking(cfg: dict, out: Path) -> list[Path]:
    sc = cf.tracking_scenario(cfg)
    params, imp, target, init = tr.tracking_case_study(sc)
    res = tr.simulate_tracking(params, imp, target, init, sc.t_end, sc.dt, bounds=tr.CASE_BOUNDS,
                               stride=int(cfg["tracking"]["stride"]))
    if not res.completed:
        raise UavCompError(res.message)
    traj = out / "tracking_trajectory.csv"
    res.write_csv(traj)
    imp_csv = out / "tracking_impulses.csv"
    res.write_impulse_csv(imp_csv)
    rows = []
    for k, t in enumerate(res.times):
        for a in range(res.zeta_x.shape[1]):
            rows.append([_fmt(t), a, "leader" if a == 0 else "follower", *map(_fmt, res.zeta_x[k, a]),
                         *map(_fmt, res.zeta_v[k, a]), int(res.impulse_flags[k])])
    fig = _write_rows(out / "fig5_errors.csv",
                      ["t", "agent_id", "role", "zx", "zy", "zz", "zvx", "zvy", "zvz", "impulse"], rows)
    rep = tr.theorem2_check(params, imp, tr.CASE_BOUNDS)
    summary = out / "theorem2.txt"
    summary.write_text(rep.summary() + "\n", encoding="utf-8")
    log.info("tracking: %s", rep.summary().replace("\n", "; "))
    return [traj, imp_csv, fig, summary]


def _mc_rows_coverage(cfg, samples_by_alpha, density_per_km2, schemes):
    rows = []
    m = cfg["network"]["m"]
    for alpha, smp in samples_by_alpha.items():
        for s in schemes:
            ests = mc.coverage_from_sir(smp.sir(s), mc.db_to_linear(cfg["montecarlo"]["gamma_db"]))
            for gdb, e in zip(cfg["montecarlo"]["gamma_db"], ests):
                rows.append((s, alpha, density_per_km2 * 1e-6, m, gdb, e))
    return rows


def _analytic_net(cfg, alpha, density_per_km2, mcc: mc.McConfig):
    net = cf.network_params(cfg, alpha=alpha, density_per_km2=density_per_km2)
    if net.outer_radius is None:
        # compare like with like: truncate interference at the sampling radius
        net = an.NetworkParams(net.density, net.alpha, net.fading, net.height_law,
                               mcc.region_radius * mcc.edge_factor, net.comp_size)
    return net


def _analytic_mix(cfg, net):
    if cfg["analytic"]["model"] == "unconditional":
        return an.unconditional_mixture(net)
    return an.conditional_mixture(net)


def run_coverage(cfg: dict, out: Path, *, tag: str = "fig7_coverage") -> list[Path]:
    mcc = cf.mc_config(cfg, scheme=mc.PROPOSED)
    alphas = [float(a) for a in cfg["montecarlo"]["alphas"]]
    dens = float(cfg["network"]["density_per_km2"])
    batch = mc.simulate_alphas(mcc, alphas, (mc.PROPOSED,))
    res = out / "coverage.csv"
    mc.write_coverage_csv(res, _mc_rows_coverage(cfg, batch, dens, (mc.PROPOSED,)))
    g = mc.db_to_linear(cfg["montecarlo"]["gamma_db"])
    rows = []
    for alpha in alphas:
        a_cov = _analytic_mix(cfg, _analytic_net(cfg, alpha, dens, mcc)).coverage(g)
        ests = mc.coverage_from_sir(batch[alpha].sir(mc.PROPOSED), g)
        for gdb, gl, ac, e in zip(cfg["montecarlo"]["gamma_db"], g, np.atleast_1d(a_cov), ests):
            rows.append([_fmt(alpha), _fmt(dens), _fmt(gdb), _fmt(gl), _fmt(ac), _fmt(e.value), _fmt(e.std_err), e.trials_used])
    fig = _write_rows(out / f"{tag}.csv",
                      ["alpha", "lambda_per_km2", "gamma_db", "gamma_linear", "analytic", "monte_carlo", "std_err", "trials"], rows)
    return [res, fig]


def run_rate(cfg: dict, out: Path) -> list[Path]:
    mcc0 = cf.mc_config(cfg, scheme=mc.PROPOSED)
    alphas = [float(a) for a in cfg["montecarlo"]["alphas"]]
    m = cfg["network"]["m"]
    rate_rows, fig_rows = [], []
    for dens in [float(d) for d in cfg["montecarlo"]["densities_per_km2"]]:
        mcc = cf.mc_config(cfg, density_per_km2=dens, scheme=mc.PROPOSED)
        batch = mc.simulate_alphas(mcc, alphas, (mc.PROPOSED,))
        for alpha in alphas:
            est = mc.rate_from_sir(batch[alpha].sir(mc.PROPOSED))
            net = _analytic_net(cfg, alpha, dens, mcc0)
            if cfg["analytic"]["model"] == "unconditional":
                a_rate = an.ergodic_rate(net, cfg["analytic"]["rate_form"], model="unconditional")
            else:
                a_rate = an.conditional_mixture(net).rate()
            rate_rows.append((mc.PROPOSED, alpha, dens * 1e-6, m, est))
            fig_rows.append([_fmt(alpha), _fmt(dens), _fmt(a_rate), _fmt(est.value), _fmt(est.std_err), est.trials_used])
    res = out / "rate.csv"
    mc.write_rate_csv(res, rate_rows)
    fig = _write_rows(out / "fig7_rate.csv",
                      ["alpha", "lambda_per_km2", "analytic_nats", "monte_carlo_nats", "std_err", "trials"], fig_rows)
    return [res, fig]


def run_compare(cfg: dict, out: Path) -> list[Path]:
    schemes = tuple(cfg["montecarlo"]["schemes"])
    alphas = [float(a) for a in cfg["montecarlo"]["alphas"]]
    dens = float(cfg["network"]["density_per_km2"])
    mcc = cf.mc_config(cfg, scheme=schemes[0])
    batch = mc.simulate_alphas(mcc, alphas, schemes)
    rows = _mc_rows_coverage(cfg, batch, dens, schemes)
    res = out / "compare.csv"
    mc.write_coverage_csv(res, rows)
    fig = _write_rows(out / "fig8_compare.csv", ["scheme", "alpha", "gamma_db", "coverage", "std_err", "trials"],
                      [[s, _fmt(a), _fmt(gdb), _fmt(e.value), _fmt(e.std_err), e.trials_used] for s, a, _, _, gdb, e in rows])
    return [res, fig]


def run_pdfcheck(cfg: dict, out: Path) -> list[Path]:
    alpha = float(cfg["montecarlo"]["alphas"][0])
    dens = float(cfg["network"]["density_per_km2"])
    mcc = cf.mc_config(cfg, alpha=alpha, scheme=mc.PROPOSED)
    smp = mc.simulate(mcc)
    S, I = smp.signal[mc.PROPOSED], smp.interference[mc.PROPOSED]
    mix = _analytic_mix(cfg, _analytic_net(cfg, alpha, dens, mcc))
    bins = int(cfg["montecarlo"]["pdf_bins"])
    rows, ks = [], {}
    for name, x, cdf in (("S", S, mix.signal_cdf), ("I", I, mix.interference_cdf), ("SIR", S / I, mix.sir_cdf)):
        lo, hi = np.quantile(x, [0.001, 0.999])
        h = mc.empirical_pdf(x, bins, range=(lo, hi), log_bins=True)
        model = np.diff(cdf(h.edges)) / np.diff(h.edges)
        for c, l, r, d, md in zip(h.centers, h.edges[:-1], h.edges[1:], h.density, model):
            rows.append([name, _fmt(l), _fmt(r), _fmt(c), _fmt(d), _fmt(md)])
        ks[name] = acceptance.ks_upper_bound(x, cdf, n_grid=600 if name == "SIR" else 1500)
    fig = _write_rows(out / "fig6_pdfs.csv", ["quantity", "bin_lo", "bin_hi", "bin_center", "empirical_pdf", "model_pdf"], rows)
    ks_file = out / "fig6_ks.csv"
    _write_rows(ks_file, ["quantity", "ks_upper_bound", "trials"], [[k, _fmt(v), len(S)] for k, v in ks.items()])
    log.info("pdfcheck KS bounds: %s", {k: round(v, 4) for k, v in ks.items()})
    return [fig, ks_file]


def run_fig7(cfg: dict, out: Path) -> list[Path]:
    sub = dict(cfg)
    sub["montecarlo"] = dict(cfg["montecarlo"], alphas=[a for a in cfg["montecarlo"]["alphas"] if float(a) in (2.4, 2.8)] or cfg["montecarlo"]["alphas"])
    return run_coverage(sub, out) + run_rate(cfg, out)


RUNNERS = {
    "formation": run_formation,
    "tracking": run_tracking,
    "coverage": run_coverage,
    "rate": run_rate,
    "compare": run_compare,
    "pdfcheck": run_pdfcheck,
    "fig7": run_fig7,
}


def write_manifest(out: Path, cfg: dict, files, wall: float, extra=None) -> Path:
    man = {
        "scenario": cfg["scenario"],
        "seed": cfg["seed"],
        "version": package_version(),
        "config_sha256": cf.config_hash(cfg),
        "resolved_config": cfg,
        "wall_time_s": round(wall, 3),
        "python": platform.python_version(),
        "numpy": np.__version__,
        "outputs": [p.name for p in files],
    }
    if extra:
        man.update(extra)
    path = out / "manifest.json"
    path.write_text(json.dumps(man, indent=2, sort_keys=True, default=str) + "\n", encoding="utf-8")
    return path


def _overrides(args) -> list[str]:
    ov = list(args.set or [])
    if args.seed is not None:
        ov.append(f"seed={args.seed}")
    if args.trials is not None:
        ov.append(f"montecarlo.trials={args.trials}")
    if args.threads is not None:
        ov.append(f"montecarlo.threads={args.threads}")
    if args.out is not None:
        ov.append(f"out={json.dumps(str(args.out))}")
    return ov


def cmd_verify(args) -> int:
    selected = None
    if args.criteria:
        selected = {int(x) for x in args.criteria.split(",") if x.strip()}
    t0 = time.perf_counter()
    results = acceptance.run_all(selected, log=print)
    out = Path(args.out) if args.out else None
    if out:
        out.mkdir(parents=True, exist_ok=True)
        (out / "verify.json").write_text(json.dumps(
            [{"criterion": r.number, "title": r.title, "passed": r.passed, "clauses": r.clauses,
              "details": r.details, "seconds": r.seconds} for r in results],
            indent=2, default=lambda o: o.tolist() if hasattr(o, "tolist") else str(o)) + "\n", encoding="utf-8")
    n_pass = sum(r.passed for r in results)
    print(f"{n_pass}/{len(results)} criteria passed in {time.perf_counter() - t0:.1f}s")
    return EXIT_OK if n_pass == len(results) else EXIT_TOLERANCE


def cmd_run(args) -> int:
    if args.target == "verify":
        return cmd_verify(args)
    cfg = cf.load_config(args.target, _overrides(args))
    out = Path(cfg["out"])
    out.mkdir(parents=True, exist_ok=True)
    t0 = time.perf_counter()
    files = RUNNERS[cfg["scenario"]](cfg, out)
    man = write_manifest(out, cfg, files, time.perf_counter() - t0)
    for p in files + [man]:
        print(p)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="uavcomp", description="UAV CoMP coverage, rate and swarm-control experiments")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", help="run a scenario (preset name, figure alias or TOML path) or 'verify'")
    run.add_argument("target", help=f"one of {sorted(cf.PRESETS)}, {sorted(cf.FIGURE_ALIASES)}, 'verify', or a TOML file")
    run.add_argument("--seed", type=int)
    run.add_argument("--trials", type=int)
    run.add_argument("--out")
    run.add_argument("--set", action="append", metavar="KEY=VALUE", help="override a config key (repeatable)")
    run.add_argument("--threads", type=int)
    run.add_argument("--criteria", help="verify only: comma-separated criterion numbers")
    run.add_argument("-v", "--verbose", action="store_true", default=argparse.SUPPRESS)
    run.set_defaults(func=cmd_run)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (UavCompError, ArithmeticError, FloatingPointError, RuntimeError, ValueError) as exc:
        print(f"runtime failure: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
