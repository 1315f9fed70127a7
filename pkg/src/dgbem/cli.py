"""Batch front end: ``dgbem {solve,converge,coercivity,theory,selftest}``.

Runs are described by a JSON config (see README for the schema). Tables are
written as CSV with a fixed header. Exit codes: 0 ok, 1 usage or config
error, 2 a study assertion failed, 3 numerical failure.
"""
import argparse
import json
import logging
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .bem import BoundarySpace
from .coupling import SolveError, assemble_coupled, check_lambda_mean, solve, write_solution
from .dg import DGSpace, PenaltyConfig
from .manufactured import CaseError, ERROR_KEYS, exact_errors, make_dipole_case
from .mesh import GEOMETRIES, MeshError, write_mesh
from .verify import (COERCIVITY_BOUND, COERCIVITY_TOL, EIGEN_RESIDUAL_TOL, coercivity_spectrum, lemma34_check,
                     mesh_family, pf_constant, reference_inverse_constant, relative_variation,
                     run_convergence_study, trace_constant, write_csv)

log = logging.getLogger("dgbem")

EXIT_OK, EXIT_USAGE, EXIT_ASSERT, EXIT_NUMERIC = 0, 1, 2, 3
STUDIES = ("solve", "converge", "coercivity", "theory", "selftest")
EPSILONS = (0.05, 0.1, 0.25)


class ConfigError(ValueError):
    pass


class StudyFailure(AssertionError):
    pass


@dataclass
class RunConfig:
    geometry: object = "square"
    k: int = 1
    xi: int = -1
    sigma: float = 20.0
    levels: int = 4
    coarse_subdivisions: int = 1
    case: dict = field(default_factory=dict)
    study: str = "solve"
    out: str = "out"
    seed: int = 0
    sigmas: list = None
    samples: int = 100

    @classmethod
    def from_dict(cls, d):
        known = set(cls.__dataclass_fields__)
        unknown = sorted(set(d) - known)
        if unknown:
            raise ConfigError(f"unknown config field(s): {', '.join(unknown)}")
        cfg = cls(**d)
        cfg.validate()
        return cfg

    def validate(self):
        def need(ok, name, msg):
            if not ok:
                raise ConfigError(f"invalid field '{name}': {msg} (got {getattr(self, name)!r})")

        g = self.geometry
        need(g in GEOMETRIES if isinstance(g, str) else isinstance(g, list) and len(g) >= 3, "geometry",
             f"must be one of {sorted(GEOMETRIES)} or a list of [x, y] vertices")
        need(isinstance(self.k, int) and self.k in (1, 2, 3), "k", "must be 1, 2 or 3")
        need(isinstance(self.xi, int) and self.xi in (-1, 0, 1), "xi", "must be -1, 0 or 1")
        need(isinstance(self.sigma, (int, float)) and self.sigma > 0, "sigma", "must be a positive number")
        need(isinstance(self.levels, int) and self.levels >= 1, "levels", "must be an integer >= 1")
        need(isinstance(self.coarse_subdivisions, int) and self.coarse_subdivisions >= 0, "coarse_subdivisions",
             "must be a nonnegative integer")
        need(self.study in STUDIES, "study", f"must be one of {STUDIES}")
        need(isinstance(self.case, dict), "case", "must be an object")
        need(isinstance(self.seed, int), "seed", "must be an integer")
        need(isinstance(self.samples, int) and self.samples >= 1, "samples", "must be a positive integer")
        if self.sigmas is not None:
            need(isinstance(self.sigmas, list) and self.sigmas and all(
                isinstance(s, (int, float)) and s > 0 for s in self.sigmas), "sigmas", "must be a list of positive numbers")
        allowed = {"x0", "d", "interior", "degree", "offset", "cutoff_radius"}
        extra = sorted(set(self.case) - allowed)
        if extra:
            raise ConfigError(f"invalid field 'case': unknown key(s) {', '.join(extra)}")

    def make_case(self):
        try:
            return make_dipole_case(self.geometry, **self.case)
        except (CaseError, MeshError, TypeError) as exc:
            raise ConfigError(f"invalid field 'case': {exc}") from None


def load_config(path, overrides=None):
    data = {}
    if path:
        try:
            with open(path) as fh:
                data = json.load(fh)
        except OSError as exc:
            raise ConfigError(f"cannot read config: {exc}") from None
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config is not valid JSON: {exc}") from None
        if not isinstance(data, dict):
            raise ConfigError("config must be a JSON object")
    data.update({k: v for k, v in (overrides or {}).items() if v is not None})
    return RunConfig.from_dict(data)


def _map(fn, items, threads):
    """Ordered map; results are collected in submission order whatever the thread count."""
    if threads <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


# -- studies -------------------------------------------------------------------

def run_solve(cfg, out, threads):
    case = cfg.make_case()
    mesh = mesh_family(case.polygon, cfg.levels, cfg.coarse_subdivisions)[-1]
    space = DGSpace(mesh, cfg.k)
    bs = BoundarySpace.from_mesh(mesh, cfg.k)
    system = assemble_coupled(mesh, space, bs, PenaltyConfig(cfg.xi, float(cfg.sigma)), case.problem_data(bs))
    sol = solve(system)
    write_mesh(mesh, os.path.join(out, "mesh.txt"))
    write_solution(sol, os.path.join(out, "solution.txt"))
    errs = exact_errors(case, sol)
    row = {"level": cfg.levels - 1, "h": mesh.h_max, "dofs": system.n_u + system.n_lam, "c_h": sol.c_h,
           "residual_u": sol.residual_u, "residual_lambda": sol.residual_lam,
           "lambda_mean": check_lambda_mean(sol)}
    row.update(errs)
    write_csv(os.path.join(out, "errors.csv"), [row])
    failures = []
    if max(sol.residual_u, sol.residual_lam) > 1e-10:
        failures.append(f"relative residual {max(sol.residual_u, sol.residual_lam):.2e} > 1e-10")
    if row["lambda_mean"] > 1e-10 * max(1.0, np.abs(system.rhs_u).sum()):
        failures.append(f"lambda mean identity violated ({row['lambda_mean']:.2e})")
    return failures


def run_converge(cfg, out, threads):
    case = cfg.make_case()
    rows = run_convergence_study(case, cfg.levels, cfg.k, cfg.xi, cfg.sigma, cfg.coarse_subdivisions)
    cols = ["level", "h", "dofs", *ERROR_KEYS, "quasi_ratio", *(f"eoc_{k}" for k in ERROR_KEYS)]
    write_csv(os.path.join(out, "convergence.csv"), rows, cols)
    h1 = [r["h1"] for r in rows]
    if not all(np.isfinite(h1)):
        raise SolveError("non-finite errors")
    if any(b >= a for a, b in zip(h1, h1[1:])):
        return ["broken H1 error is not monotonically decreasing"]
    return []


def run_coercivity(cfg, out, threads):
    sigmas = cfg.sigmas or [cfg.sigma]
    meshes = mesh_family(cfg.geometry, cfg.levels, cfg.coarse_subdivisions)
    jobs = [(s, lev, m) for s in sigmas for lev, m in enumerate(meshes)]
    reports = _map(lambda j: coercivity_spectrum(j[2], cfg.k, cfg.xi, j[0], j[1]), jobs, threads)
    rows = [{"sigma": r.sigma, "xi": r.xi, "k": r.k, "level": r.level, "dofs": r.n_dofs,
             "min_quotient": r.min_quotient, "residual": r.residual} for r in reports]
    write_csv(os.path.join(out, "spectrum.csv"), rows)
    failures = [f"sigma={r.sigma:g} level={r.level}: quotient {r.min_quotient:.4f} < "
                f"{COERCIVITY_BOUND - COERCIVITY_TOL}" for r in reports if not r.coercive]
    failures += [f"sigma={r.sigma:g} level={r.level}: eigen-residual {r.residual:.1e}"
                 for r in reports if r.residual > EIGEN_RESIDUAL_TOL]
    return failures


def run_theory(cfg, out, threads):
    meshes = mesh_family(cfg.geometry, cfg.levels, cfg.coarse_subdivisions)
    rows, failures = [], []
    for name, fn in (("C_star", trace_constant), ("C_PF", pf_constant)):
        vals = _map(lambda m: fn(m, cfg.k), meshes, threads)
        rows += [{"constant": name, "k": cfg.k, "s": "", "level": lev, "value": v} for lev, v in enumerate(vals)]
        if len(vals) > 1 and relative_variation(vals) >= 0.1:
            failures.append(f"{name} varies by {relative_variation(vals):.1%} across levels")
    for k in range(1, 4):
        for eps in EPSILONS:
            s = 0.5 - eps
            c0 = reference_inverse_constant(s, k)
            c1 = reference_inverse_constant(s, k, 1)
            rows.append({"constant": "C_ref", "k": k, "s": s, "level": "", "value": c0})
            if abs(c1 - c0) >= 0.05 * c0:
                failures.append(f"reference constant k={k} s={s} not converged")
    res = lemma34_check(meshes[0], cfg.k, 0.4, cfg.samples, cfg.seed)
    rows.append({"constant": "lemma_ratio_max", "k": cfg.k, "s": 0.4, "level": 0, "value": res.max_ratio})
    if not res.holds:
        failures.append(f"edge ratio {res.max_ratio:.4f} exceeds reference constant {res.constant:.4f}")
    write_csv(os.path.join(out, "constants.csv"), rows, ["constant", "k", "s", "level", "value"])
    return failures


def run_selftest(cfg, out, threads):
    """Quick end-to-end checks of exact identities on small meshes."""
    from .selftest import run_checks
    results = run_checks()
    write_csv(os.path.join(out, "selftest.csv"), [{"check": n, "passed": int(ok), "detail": d} for n, ok, d in results])
    return [f"{n}: {d}" for n, ok, d in results if not ok]


RUNNERS = {"solve": run_solve, "converge": run_converge, "coercivity": run_coercivity, "theory": run_theory,
           "selftest": run_selftest}


# -- entry point ---------------------------------------------------------------

class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def build_parser():
    p = _Parser(prog="dgbem", description="IPDG/BEM coupling for the 2D Laplace transmission problem.")
    p.add_argument("study", choices=STUDIES, help="study kind (overrides the config's 'study')")
    p.add_argument("--config", metavar="PATH", help="JSON run configuration")
    p.add_argument("--out", metavar="DIR", help="output directory (overrides the config's 'out')")
    p.add_argument("--deterministic", action="store_true", help="single-threaded run with fixed seed")
    p.add_argument("--threads", type=int, default=1, metavar="N", help="worker threads for independent cases")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    if args.threads < 1:
        print("dgbem: error: --threads must be >= 1", file=sys.stderr)
        return EXIT_USAGE
    try:
        cfg = load_config(args.config, {"study": args.study, "out": args.out})
    except ConfigError as exc:
        print(f"dgbem: config error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    threads = 1 if args.deterministic else args.threads
    try:
        os.makedirs(cfg.out, exist_ok=True)
    except OSError as exc:
        print(f"dgbem: cannot create output directory: {exc}", file=sys.stderr)
        return EXIT_USAGE
    t0 = time.perf_counter()
    try:
        failures = RUNNERS[cfg.study](cfg, cfg.out, threads)
    except ConfigError as exc:
        print(f"dgbem: config error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (SolveError, np.linalg.LinAlgError, RuntimeError, FloatingPointError) as exc:
        print(f"dgbem: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    log.info("%s finished in %.1f s", cfg.study, time.perf_counter() - t0)
    if failures:
        for f in failures:
            print(f"dgbem: assertion failed: {f}", file=sys.stderr)
        return EXIT_ASSERT
    print(f"dgbem {cfg.study}: ok ({cfg.out})")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
