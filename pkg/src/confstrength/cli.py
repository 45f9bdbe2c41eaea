"""Command-line interface: generate / estimate / grid / oracle-check.

Exit codes: 0 success, 1 usage error, 2 numerical failure.
"""

from __future__ import annotations

import argparse
import os
import sys

import numpy as np

from . import estimators, limits, models
from .dataio import fmt, read_dataset_matrix, write_csv_rows, write_dataset_matrix
from .errors import ConfstrengthError, InvalidInput
from .harness import GRID_COLUMNS, SUMMARY_COLUMNS, ExperimentGrid, run_grid, summarize

__all__ = ["main", "cli_main", "parse_config"]


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"error: {message}", file=sys.stderr)
        raise SystemExit(1)


def parse_config(path: str) -> ExperimentGrid:
    """Flat key = value config; list values comma-separated; '#' comments."""
    raw: dict[str, str] = {}
    with open(path) as fh:
        for line in fh:
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise InvalidInput(f"bad config line: {line!r}")
            key, value = line.split("=", 1)
            raw[key.strip()] = value.strip()

    def ints(key, default):
        return tuple(int(v) for v in raw[key].split(",")) if key in raw else default

    def floats(key, default):
        return tuple(float(v) for v in raw[key].split(",")) if key in raw else default

    def boolean(key, default):
        return raw[key].lower() in ("1", "true", "yes") if key in raw else default

    threads = int(raw.get("threads", os.environ.get("THREADS", "1")))
    beta_lo = float(raw.get("sigma_beta_min", 0.0))
    beta_hi = float(raw.get("sigma_beta_max", 3.0))
    return ExperimentGrid(
        d_values=ints("d_values", (100, 250, 500, 1000)),
        gamma_values=floats("gamma_values", (0.1, 0.3, 0.5, 0.7, 0.9)),
        gamma_tilde=float(raw.get("gamma_tilde", 1.2)),
        c=float(raw.get("c", str(1.0 / 3.0))),
        zeta_mode=raw.get("zeta_mode", "uniform"),
        zeta_fixed=float(raw.get("zeta_fixed", 0.5)),
        sigma_beta_range=(beta_lo, beta_hi),
        replicates=int(raw.get("replicates", 25)),
        master_seed=int(raw.get("master_seed", 0)),
        theta_cap=float(raw.get("theta_cap", 100.0)),
        include_population=boolean("include_population", False),
        threads=threads,
        stable_runtime=boolean("stable_runtime", True),
    )


def _cmd_generate(args) -> int:
    rng = np.random.default_rng(args.seed)
    n = args.n if args.n is not None else int(round(args.d / args.gamma))
    model = models.build_model(
        args.d, args.gamma_tilde, args.c, args.zeta,
        args.sigma_beta2, args.sigma_eps2, rng,
    )
    data = models.draw_observations(model, n, rng)
    truth = models.ground_truth(model)
    p = args.out_prefix
    write_dataset_matrix(p + ".x.csv", data.X, args.d, n)
    write_dataset_matrix(p + ".y.csv", data.Y, args.d, n)
    write_dataset_matrix(p + ".mixing.csv", model.mixing, args.d, n)
    write_dataset_matrix(p + ".alpha.csv", model.alpha, args.d, n)
    write_dataset_matrix(p + ".beta.csv", model.beta, args.d, n)
    write_csv_rows(
        p + ".truth.csv",
        ["zeta_true", "tau_pop", "theta_true", "sigma_stat2", "sigma_alpha2",
         "sigma_beta2", "sigma_eps2"],
        [[truth.zeta, truth.tau_pop, truth.theta_true, truth.sigma_stat2,
          model.sigma_alpha2, model.sigma_beta2, model.sigma_eps2]],
    )
    print(f"wrote {p}.x.csv {p}.y.csv {p}.mixing.csv {p}.alpha.csv "
          f"{p}.beta.csv {p}.truth.csv")
    return 0


ESTIMATE_COLUMNS = [
    "d", "n", "gamma",
    "tau_plugin", "theta_plugin", "zeta_plugin",
    "tau_rmt", "theta_rmt", "zeta_rmt", "zeta_tcorr",
    "S", "degenerate_flag", "root_found_rmt",
]


def _cmd_estimate(args) -> int:
    X, _ = read_dataset_matrix(args.x)
    Y, _ = read_dataset_matrix(args.y)
    X = np.atleast_2d(X)
    Y = np.ravel(Y)
    cfg = estimators.EstimatorConfig(theta_cap=args.theta_cap)
    ds = estimators.DatasetCache(X, Y)
    est = estimators.estimate_all(X, Y, config=cfg, cache=ds)
    row = [
        ds.d, ds.n, ds.gamma,
        est["plugin"].tau, est["plugin"].theta, est["plugin"].zeta,
        est["rmt"].tau, est["rmt"].theta, est["rmt"].zeta,
        est["tau_corrected"].zeta,
        ds.S,
        any(e.degenerate for e in est.values()),
        est["rmt"].diagnostics.root_found,
    ]
    print(",".join(ESTIMATE_COLUMNS))
    print(",".join(fmt(v) for v in row))
    return 0


def _cmd_grid(args) -> int:
    grid = parse_config(args.config)
    rows = run_grid(grid)
    write_csv_rows(args.out, GRID_COLUMNS, [r.as_list() for r in rows])
    summary_path = (
        args.out[:-4] + ".summary.csv" if args.out.endswith(".csv")
        else args.out + ".summary.csv"
    )
    write_csv_rows(summary_path, SUMMARY_COLUMNS, summarize(rows))
    print(f"wrote {args.out} and {summary_path}")
    if any(r.error for r in rows):
        bad = sum(1 for r in rows if r.error)
        print(f"warning: {bad} replicate(s) failed; see the error column",
              file=sys.stderr)
        return 2
    return 0


def _oracle_suites(d: int, seed: int, tol: float):
    """(name, |error|, tolerance) triples comparing oracles with empirical runs."""
    rng = np.random.default_rng(seed)
    c, gamma, gamma_tilde, theta_star = 1.0 / 3.0, 0.5, 1.2, 1.0
    results = []

    # MP moments against exact closed forms
    mass = limits.LimitSpectrum.marchenko_pastur(c).expect(lambda lam: 1.0 + 0.0 * lam)
    results.append(("mp_mass", abs(mass - 1.0), 1e-8))
    results.append(("mp_inverse_mean",
                    abs(limits.mp_moment(c, 0.0, 1) - 1.0 / (1.0 - c)), 1e-8))

    # empirical population derivative vs f_pop_limit on a diagonal MP model
    eigs = models.sample_mp_eigenvalues(d, c, rng)
    sigma_beta2 = 1.0
    sigma_alpha2 = theta_star * sigma_beta2
    beta_stat = (
        np.sqrt(sigma_beta2) * rng.standard_normal(d)
        + np.sqrt(sigma_alpha2 / eigs) * rng.standard_normal(d)
    )
    pop = estimators.PopulationCache(np.diag(eigs), beta_stat)
    nu = limits.LimitSpectrum.marchenko_pastur(c)
    worst = max(
        abs(pop.derivative(t) - limits.f_pop_limit(t, theta_star, nu))
        for t in (0.5, 1.0, 2.0)
    )
    results.append(("f_pop_limit", worst, tol))

    # empirical plug-in derivative vs f_plugin_limit with an empirical mu proxy
    model = models.build_model(d, gamma_tilde, c, 0.0, sigma_beta2, 1.0, rng)
    model.alpha = np.sqrt(sigma_alpha2) * rng.standard_normal(model.l)
    model.sigma_alpha2 = sigma_alpha2
    n = int(round(d / gamma))
    data = models.draw_observations(model, n, rng)
    ds = estimators.DatasetCache(data.X, data.Y)
    mu = limits.LimitSpectrum.from_eigenvalues(ds.eigs)
    worst = max(
        abs(ds.logprob_plugin(t)[1]
            - limits.f_plugin_limit(t, theta_star, gamma, gamma_tilde, mu))
        for t in (0.5, 1.0, 2.0)
    )
    results.append(("f_plugin_limit", worst, tol))

    # mixed traces at Sigma = I (Sigma^+ = I)
    G = rng.standard_normal((d, n))
    cov = (G @ G.T) / n
    ev = np.linalg.eigvalsh(0.5 * (cov + cov.T))
    mu_id = limits.LimitSpectrum.marchenko_pastur(gamma)
    t1, t2 = limits.mixed_trace_limits(1.0, gamma, mu_id)
    emp1 = float(np.mean(ev / (ev + 1.0)))
    emp2 = float(np.mean(ev / (ev + 1.0) ** 2))
    results.append(("mixed_trace_k1", abs(emp1 - t1), tol))
    results.append(("mixed_trace_k2", abs(emp2 - t2), tol))
    return results


def _cmd_oracle_check(args) -> int:
    results = _oracle_suites(args.d, args.seed, args.tol)
    ok = True
    for name, err, tol in results:
        status = "PASS" if err <= tol else "FAIL"
        ok = ok and err <= tol
        print(f"{status} {name}: |error|={err:.3e} tol={tol:.3e}")
    return 0 if ok else 2


def build_parser() -> _Parser:
    parser = _Parser(prog="confstrength")
    sub = parser.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="emit one model + dataset to files")
    g.add_argument("--d", type=int, required=True)
    g.add_argument("--n", type=int, default=None)
    g.add_argument("--gamma", type=float, default=0.5)
    g.add_argument("--gamma-tilde", dest="gamma_tilde", type=float, default=1.2)
    g.add_argument("--c", type=float, default=1.0 / 3.0)
    g.add_argument("--zeta", type=float, default=0.5)
    g.add_argument("--sigma-beta2", dest="sigma_beta2", type=float, default=1.0)
    g.add_argument("--sigma-eps2", dest="sigma_eps2", type=float, default=1.0)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out-prefix", dest="out_prefix", required=True)
    g.set_defaults(func=_cmd_generate)

    e = sub.add_parser("estimate", help="estimate confounding strength from files")
    e.add_argument("--x", required=True)
    e.add_argument("--y", required=True)
    e.add_argument("--theta-cap", dest="theta_cap", type=float, default=100.0)
    e.set_defaults(func=_cmd_estimate)

    r = sub.add_parser("grid", help="run a (d, gamma) sweep from a config file")
    r.add_argument("--config", required=True)
    r.add_argument("--out", required=True)
    r.set_defaults(func=_cmd_grid)

    o = sub.add_parser("oracle-check", help="compare estimators with limit oracles")
    o.add_argument("--tol", type=float, default=0.05)
    o.add_argument("--d", type=int, default=2000)
    o.add_argument("--seed", type=int, default=1)
    o.set_defaults(func=_cmd_oracle_check)
    return parser


def cli_main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except ConfstrengthError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 2
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def main() -> None:
    raise SystemExit(cli_main())


if __name__ == "__main__":
    main()
