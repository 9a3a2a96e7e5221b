"""Command-line entry point: fit, cv, simulate, bench, prescreen, oracle-check.

Every subcommand writes its outputs plus a manifest.json into --out, so a
run directory is self-describing and re-runnable. Exit codes: 0 success
(fit: converged), 1 usage or input error, 2 fit hit max_iter without
converging (outputs still written) or a requested certificate failed.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
import time
from dataclasses import asdict
from pathlib import Path

import numpy as np

from . import __version__, bench, detect, moments, oracle, tuning
from ._backend import available as available_backends
from .solver import SolverConfig


class _Parser(argparse.ArgumentParser):
    # usage errors exit 1; argparse's default of 2 is reserved for
    # nonconvergence in this tool's exit-code contract
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        sys.exit(1)


def _sha256(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return "sha256:" + h.hexdigest()


def _write_manifest(out_dir: Path, subcommand: str, args: argparse.Namespace,
                    inputs: dict, outputs: list[str], wall: float,
                    extra: dict | None = None):
    manifest = {
        "tool": "sparsehess",
        "version": __version__,
        "subcommand": subcommand,
        "parameters": {
            k: v for k, v in sorted(vars(args).items()) if k != "func"
        },
        "inputs": {name: _sha256(Path(p)) for name, p in inputs.items()},
        "outputs": outputs,
        "wall_time_s": wall,
    }
    if extra:
        manifest.update(extra)
    with open(out_dir / "manifest.json", "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, default=str)
        fh.write("\n")


def _write_matrix_csv(path: Path, M, names):
    np.savetxt(path, M, fmt="%.17g", delimiter=",",
               header=",".join(names), comments="")


def _read_matrix_csv(path: Path):
    M = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    return np.ascontiguousarray(M, dtype=np.float64)


def _load_dataset(args) -> moments.DataSet:
    layout = moments.ColumnLayout(
        response=args.response, response_index=args.response_index
    )
    data = moments.load_csv(args.data, layout)
    if getattr(args, "standardize", False):
        data = moments.standardize(data)
    return data


def _out_dir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _solver_config(args, lam: float = 1.0) -> SolverConfig:
    return SolverConfig(
        lam=lam, rho=args.rho, tau_scale=args.tau_scale, tol=args.tol,
        max_iter=args.max_iter,
    )


def _add_data_flags(sp):
    sp.add_argument("--data", required=True, help="input CSV with one header row")
    sp.add_argument("--response", default="y",
                    help="response column name (default: y)")
    sp.add_argument("--response-index", type=int, default=None,
                    help="response column position, 1-based (wins over --response)")
    sp.add_argument("--standardize", action="store_true",
                    help="scale columns to unit variance after centering")


def _add_solver_flags(sp):
    sp.add_argument("--rho", type=float, default=1.0,
                    help="augmented-Lagrangian parameter (default: 1.0)")
    sp.add_argument("--tol", type=float, default=1e-3,
                    help="stopping threshold on the residuals (default: 1e-3)")
    sp.add_argument("--max-iter", type=int, default=10000)
    sp.add_argument("--tau-scale", type=float, default=1.01,
                    help="multiplier on lambda_max(S)^2 for the proximal weight")
    sp.add_argument("--backend", choices=available_backends(), default=None,
                    help="inner-loop implementation (default: compiled if built)")


def _add_cv_flags(sp):
    sp.add_argument("--folds", type=int, default=10)
    sp.add_argument("--grid-size", type=int, default=20)
    sp.add_argument("--span", type=float, default=100.0,
                    help="ratio largest/smallest penalty on the grid")


def _support_payload(est: detect.PsiEstimate):
    payload = []
    for i, j in est.support:
        entry = {"i": i, "j": j, "value": float(est.Psi_hat[i - 1, j - 1])}
        if est.names:
            entry["vars"] = [est.names[i - 1], est.names[j - 1]]
        payload.append(entry)
    return payload


def cmd_fit(args) -> int:
    if (args.lam is None) == (not args.cv):
        print("fit: exactly one of --lambda or --cv is required",
              file=sys.stderr)
        return 1
    if args.cv and args.seed is None:
        print("fit: --seed is required with --cv", file=sys.stderr)
        return 1
    t0 = time.perf_counter()
    data = _load_dataset(args)
    out = _out_dir(args)
    cfg = _solver_config(args, lam=args.lam if args.lam is not None else 1.0)
    result = detect.fit_pipeline(
        data, cfg,
        cv_seed=args.seed if args.cv else None, cv_folds=args.folds,
        grid_size=args.grid_size, span=args.span, screen=args.screen,
        backend=args.backend,
    )
    est = result.estimate
    names = est.names or tuple(f"x{j+1}" for j in range(est.Psi_hat.shape[0]))
    _write_matrix_csv(out / "psi.csv", est.Psi_hat, names)
    phi_full = result.report.state.Phi
    if result.screen is not None:
        phi_full = detect._embed(phi_full, result.screen.kept, data.p)
    _write_matrix_csv(out / "phi.csv", phi_full, names)
    with open(out / "support.json", "w", encoding="utf-8") as fh:
        json.dump(_support_payload(est), fh, indent=2)
        fh.write("\n")
    outputs = ["psi.csv", "phi.csv", "support.json"]
    extra = {
        "lambda": result.lam,
        "converged": result.report.converged,
        "iterations": result.report.state.n_iter,
        "backend": result.report.backend,
    }
    if result.cv is not None:
        _write_cv_json(out, result.cv, result.path)
        outputs.append("cv.json")
    if result.screen is not None:
        _write_screen_json(out, result.screen)
        outputs.append("screen.json")
    _write_manifest(out, "fit", args, {"data": args.data}, outputs,
                    time.perf_counter() - t0, extra)
    return 0 if result.report.converged else 2


def _write_cv_json(out: Path, cv: tuning.CvResult, path):
    payload = {
        "lambdas": cv.lambdas.tolist(),
        "fold_losses": cv.fold_losses.tolist(),
        "mean_loss": cv.mean_loss.tolist(),
        "se_loss": cv.se_loss.tolist(),
        "selected": cv.selected,
        "selected_index": cv.selected_index,
        "failed_folds": list(cv.failed_folds),
        "rule": cv.rule,
    }
    if path is not None:
        payload["anchor"] = path.anchor
    with open(out / "cv.json", "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2)
        fh.write("\n")


def _write_screen_json(out: Path, screen: detect.ScreenReport):
    with open(out / "screen.json", "w", encoding="utf-8") as fh:
        json.dump(
            {"kept": list(screen.kept), "keep": screen.keep,
             "scores": screen.scores.tolist()},
            fh, indent=2,
        )
        fh.write("\n")


def cmd_cv(args) -> int:
    t0 = time.perf_counter()
    data = _load_dataset(args)
    out = _out_dir(args)
    mo = moments.compute_moments(data)
    path = tuning.lambda_path(mo, data.n, grid_size=args.grid_size,
                              span=args.span)
    cfg = _solver_config(args)
    cv = tuning.cv_select(data, path, args.folds, args.seed, cfg,
                          backend=args.backend)
    _write_cv_json(out, cv, path)
    _write_manifest(out, "cv", args, {"data": args.data}, ["cv.json"],
                    time.perf_counter() - t0,
                    {"selected": cv.selected})
    return 0


def cmd_simulate(args) -> int:
    t0 = time.perf_counter()
    out = _out_dir(args)
    design = bench.DesignSpec(n=args.n, p=args.p, rho=args.rho,
                              seed=args.seed)
    model = bench.ModelSpec(model_id=args.model, noise_sd=args.sigma)
    if args.p < model.min_p:
        print(f"simulate: model {args.model} requires p >= {model.min_p}",
              file=sys.stderr)
        return 1
    X = bench.sample_design(design)
    y = bench.gen_response(X, model, args.seed)
    header = ",".join(["y"] + [f"x{j+1}" for j in range(args.p)])
    np.savetxt(out / "data.csv", np.column_stack([y, X]), fmt="%.17g",
               delimiter=",", header=header, comments="")
    with open(out / "truth.json", "w", encoding="utf-8") as fh:
        json.dump(
            {"model": args.model, "pairs": sorted(model.truth),
             "n": args.n, "p": args.p, "rho": args.rho,
             "sigma": args.sigma, "seed": args.seed},
            fh, indent=2,
        )
        fh.write("\n")
    _write_manifest(out, "simulate", args, {}, ["data.csv", "truth.json"],
                    time.perf_counter() - t0)
    return 0


def _load_grid(path: Path):
    with open(path, encoding="utf-8") as fh:
        raw = json.load(fh)
    cells = raw["cells"] if isinstance(raw, dict) else raw
    if not isinstance(cells, list) or not cells:
        raise ValueError("grid file must hold a non-empty list of cells")
    required = {"model", "n", "p", "rho", "sigma"}
    for k, cell in enumerate(cells):
        if not isinstance(cell, dict) or not required <= set(cell):
            raise ValueError(
                f"grid cell {k} must be an object with keys {sorted(required)}"
            )
    return cells


def cmd_bench(args) -> int:
    if args.reps < 1:
        print("bench: --reps must be >= 1", file=sys.stderr)
        return 1
    t0 = time.perf_counter()
    try:
        cells = _load_grid(Path(args.grid))
    except (OSError, ValueError, KeyError, json.JSONDecodeError) as exc:
        print(f"bench: bad grid file: {exc}", file=sys.stderr)
        return 1
    out = _out_dir(args)
    cfg = _solver_config(args)
    rows = []
    archives = []
    for cell in cells:
        design = bench.DesignSpec(n=int(cell["n"]), p=int(cell["p"]),
                                  rho=float(cell["rho"]), seed=args.seed)
        model = bench.ModelSpec(model_id=int(cell["model"]),
                                noise_sd=float(cell["sigma"]))
        report = bench.run_experiment(
            design, model, args.reps, cfg, cv_folds=args.folds,
            grid_size=args.grid_size, span=args.span,
            screen=cell.get("screen"), backend=args.backend,
            n_jobs=args.jobs,
        )
        rows.append({
            "model": cell["model"], "rho": cell["rho"],
            "sigma": cell["sigma"], "n": cell["n"], "p": cell["p"],
            "method": "admm", "reps": args.reps,
            "failures": report.failures,
            "tpr": "NA" if report.tpr is None else f"{report.tpr:.6f}",
            "tpr_se": "NA" if report.tpr_se is None else f"{report.tpr_se:.6f}",
            "fpr": f"{report.fpr:.8f}",
            "fpr_se": f"{report.fpr_se:.8f}",
            "time_mean": f"{report.time_mean:.4f}",
            "time_sd": f"{report.time_sd:.4f}",
        })
        archives.append({"cell": cell,
                         "records": [asdict(r) for r in report.records]})
    columns = ["model", "rho", "sigma", "n", "p", "method", "reps",
               "failures", "tpr", "tpr_se", "fpr", "fpr_se", "time_mean",
               "time_sd"]
    with open(out / "results.csv", "w", encoding="utf-8") as fh:
        fh.write(",".join(columns) + "\n")
        for row in rows:
            fh.write(",".join(str(row[c]) for c in columns) + "\n")
    with open(out / "records.json", "w", encoding="utf-8") as fh:
        json.dump(archives, fh, indent=2, default=str)
        fh.write("\n")
    _write_manifest(out, "bench", args, {"grid": args.grid},
                    ["results.csv", "records.json"],
                    time.perf_counter() - t0)
    return 0


def cmd_prescreen(args) -> int:
    t0 = time.perf_counter()
    data = _load_dataset(args)
    out = _out_dir(args)
    report = detect.prescreen(data, args.keep)
    _write_screen_json(out, report)
    _write_manifest(out, "prescreen", args, {"data": args.data},
                    ["screen.json"], time.perf_counter() - t0)
    return 0


def cmd_oracle_check(args) -> int:
    t0 = time.perf_counter()
    data = _load_dataset(args)
    psi = _read_matrix_csv(Path(args.psi))
    mo = moments.compute_moments(data)
    if psi.shape != (mo.p, mo.p):
        print(
            f"oracle-check: matrix is {psi.shape}, data has p={mo.p}",
            file=sys.stderr,
        )
        return 1
    cert = oracle.kkt_check(psi, mo, args.lam, args.cert_tol)
    payload = asdict(cert)
    print(json.dumps(payload, indent=2))
    if args.out:
        out = _out_dir(args)
        with open(out / "certificate.json", "w", encoding="utf-8") as fh:
            json.dump(payload, fh, indent=2)
            fh.write("\n")
        _write_manifest(out, "oracle-check", args,
                        {"data": args.data, "psi": args.psi},
                        ["certificate.json"], time.perf_counter() - t0)
    return 0 if cert.passed else 2


def build_parser() -> _Parser:
    parser = _Parser(prog="sparsehess",
                     description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version",
                        version=f"sparsehess {__version__}")
    sub = parser.add_subparsers(dest="subcommand", required=True)

    fit = sub.add_parser("fit", parents=[], help="estimate and extract support")
    _add_data_flags(fit)
    _add_solver_flags(fit)
    _add_cv_flags(fit)
    fit.add_argument("--lambda", dest="lam", type=float, default=None,
                     help="fixed penalty level")
    fit.add_argument("--cv", action="store_true",
                     help="choose the penalty by cross-validation")
    fit.add_argument("--screen", type=int, default=None,
                     help="pre-screen to this many columns first")
    fit.add_argument("--seed", type=int, default=None,
                     help="fold shuffle seed (required with --cv)")
    fit.add_argument("--out", required=True)
    fit.set_defaults(func=cmd_fit)

    cv = sub.add_parser("cv", help="cross-validate the penalty only")
    _add_data_flags(cv)
    _add_solver_flags(cv)
    _add_cv_flags(cv)
    cv.add_argument("--seed", type=int, required=True)
    cv.add_argument("--out", required=True)
    cv.set_defaults(func=cmd_cv)

    sim = sub.add_parser("simulate", help="write synthetic benchmark data")
    sim.add_argument("--model", type=int, required=True, choices=range(1, 10))
    sim.add_argument("--n", type=int, required=True)
    sim.add_argument("--p", type=int, required=True)
    sim.add_argument("--rho", type=float, default=0.0,
                     help="design AR(1) correlation (0 = identity)")
    sim.add_argument("--sigma", type=float, required=True,
                     help="noise standard deviation")
    sim.add_argument("--seed", type=int, required=True)
    sim.add_argument("--out", required=True)
    sim.set_defaults(func=cmd_simulate)

    bn = sub.add_parser("bench", help="run a simulation grid")
    bn.add_argument("--grid", required=True, help="JSON grid of cells")
    bn.add_argument("--reps", type=int, required=True)
    bn.add_argument("--seed", type=int, required=True)
    bn.add_argument("--jobs", type=int, default=1,
                    help="parallel replications (default: 1)")
    _add_solver_flags(bn)
    _add_cv_flags(bn)
    bn.add_argument("--out", required=True)
    bn.set_defaults(func=cmd_bench)

    ps = sub.add_parser("prescreen", help="rank and keep columns by the plug-in screen")
    _add_data_flags(ps)
    ps.add_argument("--keep", type=int, required=True)
    ps.add_argument("--out", required=True)
    ps.set_defaults(func=cmd_prescreen)

    oc = sub.add_parser("oracle-check", help="KKT-certify an estimate")
    _add_data_flags(oc)
    oc.add_argument("--psi", required=True, help="matrix CSV to certify")
    oc.add_argument("--lambda", dest="lam", type=float, required=True)
    oc.add_argument("--cert-tol", type=float, default=1e-6,
                    help="certificate tolerance (default: 1e-6)")
    oc.add_argument("--out", default=None,
                    help="also write certificate.json and manifest here")
    oc.set_defaults(func=cmd_oracle_check)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (moments.DataError, ValueError, OSError) as exc:
        print(f"sparsehess {args.subcommand}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
