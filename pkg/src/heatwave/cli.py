"""Command-line harness: solves, condition tables, scaling and convergence.

Subcommands
-----------
solve        one end-to-end heat solve, report iterations / kappa / errors
condition    kappa_2(K_X S-hat) over an (N_t, N_x) grid (exact inverses)
scaling      strong or weak scaling sweep over worker counts
convergence  joint (J, K) refinement study of the L2 error at final time

Config precedence: command-line flags > --config file (flat key=value lines)
> defaults.  All records echo the full configuration; CSV uses '.' decimals
and no thousands separators.  Exit codes: 0 success, 2 tolerance failure in
--check mode, 1 error.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
import time

import numpy as np

from .problems import PROBLEMS
from .solver import (SolveConfig, solve_heat, assemble_system,
                     lanczos_condition, measure_error)

#: Reference condition numbers for --check mode, keyed by (N_t, N_x).
REFERENCE_KAPPA = {
    (65, 49): 6.34,
    (257, 961): 7.55,
    (1025, 961): 8.15,
    (65, 3969): 6.14,
}

#: Largest spatial problem the sparse-LU exact inverses are allowed to touch.
EXACT_NX_CAP = 70000

_DEFAULTS = dict(dim=2, time_level="6", space_level="4", alpha=0.3,
                 epsilon=1e-6, vcycles=2, smooth=3, workers="1",
                 exact_inverses=False, format="csv", out="-", problem="decaying",
                 check=False, tolerance=0.15, seed=0, levels=3,
                 scaling="strong")


def _parse_int_list(s):
    return [int(tok) for tok in str(s).split(",") if tok != ""]


def build_parser():
    p = argparse.ArgumentParser(prog="heatwave", description=__doc__,
                                formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = p.add_subparsers(dest="mode", required=True)
    for mode in ("solve", "condition", "scaling", "convergence"):
        sp = sub.add_parser(mode)
        sp.add_argument("--dim", type=int, choices=(1, 2, 3),
                        default=argparse.SUPPRESS)
        sp.add_argument("--time-level", dest="time_level",
                        default=argparse.SUPPRESS,
                        help="temporal level J (comma list allowed)")
        sp.add_argument("--space-level", dest="space_level",
                        default=argparse.SUPPRESS,
                        help="spatial level K (comma list allowed)")
        sp.add_argument("--alpha", type=float, default=argparse.SUPPRESS,
                        help="reaction weight in the C_j blocks (default 0.3)")
        sp.add_argument("--epsilon", type=float, default=argparse.SUPPRESS)
        sp.add_argument("--vcycles", type=int, default=argparse.SUPPRESS)
        sp.add_argument("--smooth", type=int, default=argparse.SUPPRESS)
        sp.add_argument("--workers", default=argparse.SUPPRESS,
                        help="worker count (comma list for scaling mode)")
        sp.add_argument("--exact-inverses", dest="exact_inverses",
                        action="store_true", default=argparse.SUPPRESS)
        sp.add_argument("--format", choices=("csv", "json"),
                        default=argparse.SUPPRESS)
        sp.add_argument("--out", default=argparse.SUPPRESS,
                        help="output path ('-' for stdout)")
        sp.add_argument("--config", default=None,
                        help="flat key=value config file")
        sp.add_argument("--problem", choices=tuple(PROBLEMS),
                        default=argparse.SUPPRESS)
        sp.add_argument("--check", action="store_true",
                        default=argparse.SUPPRESS,
                        help="exit 2 when results miss their tolerance")
        sp.add_argument("--tolerance", type=float, default=argparse.SUPPRESS)
        sp.add_argument("--seed", type=int, default=argparse.SUPPRESS)
        if mode == "condition":
            sp.add_argument("--alpha-sweep", dest="alpha_sweep", default=None,
                            help="comma list of alpha values (sub-mode)")
        if mode == "scaling":
            sp.add_argument("--scaling", choices=("strong", "weak"),
                            default=argparse.SUPPRESS)
        if mode == "convergence":
            sp.add_argument("--levels", type=int, default=argparse.SUPPRESS,
                            help="number of joint refinements")
    return p


def load_config_file(path):
    out = {}
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            key, _, value = line.partition("=")
            out[key.strip().replace("-", "_")] = value.strip()
    return out


_BOOL_KEYS = {"exact_inverses", "check"}
_INT_KEYS = {"dim", "vcycles", "smooth", "seed", "levels"}
_FLOAT_KEYS = {"alpha", "epsilon", "tolerance"}


def merge_config(cli_ns):
    cfg = dict(_DEFAULTS)
    path = getattr(cli_ns, "config", None)
    if path:
        for k, v in load_config_file(path).items():
            if k in _BOOL_KEYS:
                cfg[k] = v.lower() in ("1", "true", "yes", "on")
            elif k in _INT_KEYS:
                cfg[k] = int(v)
            elif k in _FLOAT_KEYS:
                cfg[k] = float(v)
            else:
                cfg[k] = v
    for k, v in vars(cli_ns).items():
        if k in ("mode", "config"):
            continue
        cfg[k] = v
    cfg["mode"] = cli_ns.mode
    return cfg


def config_echo(cfg):
    keys = ("mode", "dim", "time_level", "space_level", "workers", "alpha",
            "epsilon", "vcycles", "smooth", "exact_inverses", "problem", "seed")
    return {k: cfg[k] for k in keys if k in cfg}


def solve_config(cfg, workers=1):
    return SolveConfig(alpha=cfg["alpha"], epsilon=cfg["epsilon"],
                       vcycles=cfg["vcycles"], smooth=cfg["smooth"],
                       workers=workers, exact_inverses=cfg["exact_inverses"])


def emit(records, cfg, stream):
    if not records:
        return
    if cfg["format"] == "json":
        json.dump(records, stream, indent=2, default=str)
        stream.write("\n")
    else:
        writer = csv.DictWriter(stream, fieldnames=list(records[0].keys()))
        writer.writeheader()
        writer.writerows(records)


def run_solve(cfg):
    J = _parse_int_list(cfg["time_level"])[0]
    K = _parse_int_list(cfg["space_level"])[0]
    workers = _parse_int_list(cfg["workers"])[0]
    problem = PROBLEMS[cfg["problem"]](cfg["dim"])
    t0 = time.perf_counter()
    result, solution = solve_heat(problem, J, K, solve_config(cfg, workers))
    elapsed = time.perf_counter() - t0
    rec = {"P": workers, "N_t": 2 ** J + 1,
           "N_x": solution.mesh.n_interior,
           "N = N_t N_x": (2 ** J + 1) * solution.mesh.n_interior,
           "its": result.iterations, "time (s)": round(elapsed, 2),
           "time/it (s)": round(elapsed / max(result.iterations, 1), 2),
           "CPU-hrs": round(workers * elapsed / 3600, 4),
           "kappa_estimate": (round(result.kappa_estimate, 3)
                              if result.kappa_estimate else ""),
           "algebraic_error": f"{solution.algebraic_error:.3e}"}
    if problem.exact_solution is not None:
        rec["l2_error_at_T"] = f"{measure_error(solution, problem.exact_solution, 1.0):.6e}"
    rec.update(config_echo(cfg))
    return [rec], 0


def run_condition_table(cfg):
    Js = _parse_int_list(cfg["time_level"])
    Ks = _parse_int_list(cfg["space_level"])
    alphas = ([float(a) for a in str(cfg["alpha_sweep"]).split(",")]
              if cfg.get("alpha_sweep") else [cfg["alpha"]])
    problem = PROBLEMS[cfg["problem"]](cfg["dim"])
    cfg = dict(cfg, exact_inverses=True)   # direct solves back this mode
    records, failures = [], []
    for K in Ks:
        for J in Js:
            n_t = 2 ** J + 1
            n_x = (2 ** K - 1) ** cfg["dim"]
            for alpha in alphas:
                rec = {"N_t": n_t, "N_x": n_x}
                if n_x > EXACT_NX_CAP:
                    rec["kappa2"] = "skipped"
                    rec["lanczos_iterations"] = ""
                else:
                    c = solve_config(cfg)
                    c.alpha = alpha
                    asm = assemble_system(problem, J, K, c)
                    kappa, its = lanczos_condition(asm.S, asm.K_X,
                                                   seed=cfg["seed"])
                    rec["kappa2"] = round(kappa, 3)
                    rec["lanczos_iterations"] = its
                    ref = REFERENCE_KAPPA.get((n_t, n_x))
                    if cfg["check"] and ref is not None and len(alphas) == 1:
                        if abs(kappa - ref) > cfg["tolerance"]:
                            failures.append((n_t, n_x, kappa, ref))
                rec.update(config_echo(cfg))
                rec["alpha"] = alpha
                records.append(rec)
    for (n_t, n_x, kappa, ref) in failures:
        print(f"check failed: kappa({n_t}, {n_x}) = {kappa:.3f}, "
              f"reference {ref} +- {cfg['tolerance']}", file=sys.stderr)
    return records, (2 if failures else 0)


def run_scaling_bench(cfg):
    Js = _parse_int_list(cfg["time_level"])
    K = _parse_int_list(cfg["space_level"])[0]
    workers = _parse_int_list(cfg["workers"])
    problem = PROBLEMS[cfg["problem"]](cfg["dim"])
    records = []
    its_seen = []
    for i, P in enumerate(workers):
        J = Js[0] if cfg["scaling"] == "strong" else Js[0] + i
        try:
            t0 = time.perf_counter()
            result, solution = solve_heat(problem, J, K, solve_config(cfg, P))
            elapsed = time.perf_counter() - t0
        except MemoryError:
            records.append({"P": P, "N_t": 2 ** J + 1, "N_x": "",
                            "N = N_t N_x": "", "its": "out of memory",
                            "time (s)": "", "time/it (s)": "", "CPU-hrs": "",
                            **config_echo(cfg)})
            continue
        n_x = solution.mesh.n_interior
        its_seen.append(result.iterations)
        records.append({"P": P, "N_t": 2 ** J + 1, "N_x": n_x,
                        "N = N_t N_x": (2 ** J + 1) * n_x,
                        "its": result.iterations,
                        "time (s)": round(elapsed, 2),
                        "time/it (s)": round(elapsed / max(result.iterations, 1), 3),
                        "CPU-hrs": round(P * elapsed / 3600, 4),
                        **config_echo(cfg)})
    return records, 0


def run_convergence(cfg):
    J0 = _parse_int_list(cfg["time_level"])[0]
    K0 = _parse_int_list(cfg["space_level"])[0]
    problem = PROBLEMS[cfg["problem"]](cfg["dim"])
    if problem.exact_solution is None:
        raise ValueError("convergence mode needs a problem with an exact solution")
    records, errors = [], []
    for step in range(cfg["levels"]):
        J, K = J0 + step, K0 + step
        result, solution = solve_heat(problem, J, K, solve_config(cfg))
        err = measure_error(solution, problem.exact_solution, 1.0)
        rate = (np.log2(errors[-1] / err) if errors and err > 0 else "")
        errors.append(err)
        records.append({"h": 2.0 ** -K, "L2-error-at-T": f"{err:.6e}",
                        "rate": (round(rate, 3) if rate != "" else ""),
                        "J": J, "K": K, "its": result.iterations,
                        **config_echo(cfg)})
    code = 0
    if cfg["check"]:
        rates = [r["rate"] for r in records if r["rate"] != ""]
        if not rates or min(rates[-2:]) < 1.7:
            print(f"check failed: observed rates {rates} below 1.7",
                  file=sys.stderr)
            code = 2
    return records, code


def main(argv=None):
    args = build_parser().parse_args(argv)
    cfg = merge_config(args)
    runners = {"solve": run_solve, "condition": run_condition_table,
               "scaling": run_scaling_bench, "convergence": run_convergence}
    try:
        records, code = runners[cfg["mode"]](cfg)
    except Exception as exc:   # noqa: BLE001 - the CLI boundary
        print(f"error: {exc}", file=sys.stderr)
        return 1
    if cfg["out"] == "-":
        emit(records, cfg, sys.stdout)
    else:
        with open(cfg["out"], "w", newline="") as fh:
            emit(records, cfg, fh)
    return code


if __name__ == "__main__":
    sys.exit(main())
