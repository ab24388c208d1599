"""Command-line pipeline: sample, run, train-surrogate, identify, aor,
compare, and report, driven by a problem-definition JSON file.

Exit codes: 0 success, 2 configuration or usage error, 3 model failure
threshold exceeded, 4 no unified shape found, 5 nominal point outside the
design space.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import shutil
import sys
import time
from pathlib import Path

import numpy as np

from . import analysis, identify, models, surrogate
from .errors import DesignSpaceError, NoUnifiedShape, NopOutsideSpace
from .problem import DesignProblem, LabeledCloud, classify
from .sampling import sobol

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_MODEL_FAILURES = 3
EXIT_NO_UNIFIED_SHAPE = 4
EXIT_NOP_OUTSIDE = 5

METHOD_NAMES = {"tolerance": "tolerance", "rs": "resolution_support",
                "comb": "combinatorial"}


def _row_hash(row: np.ndarray) -> str:
    text = ",".join(f"{v:.17g}" for v in row)
    return hashlib.sha256(text.encode()).hexdigest()


def _load_problem(args) -> DesignProblem:
    path = Path(args.problem)
    if not path.exists():
        raise DesignSpaceError(f"problem file {path} does not exist")
    return DesignProblem.from_json(path)


def _outdir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _read_samples(path: Path, problem: DesignProblem) -> np.ndarray:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        rows = [row for row in reader if row]
    if header != problem.decision_names:
        raise DesignSpaceError(
            f"sample columns {header} do not match decisions {problem.decision_names}")
    return np.asarray(rows, dtype=float) if rows else np.empty((0, problem.dim))


def _generate_samples(problem: DesignProblem, sp_override: int | None,
                      skip_first: bool) -> np.ndarray:
    sp = sp_override if sp_override is not None else int(problem.sampling.get("sp", 9))
    skip = int(problem.sampling.get("skip", 0)) + (1 if skip_first else 0)
    return sobol(problem.dim, problem.bounds, sp, skip=skip).inputs


def cmd_sample(args) -> int:
    problem = _load_problem(args)
    out = _outdir(args)
    inputs = _generate_samples(problem, args.sp, args.skip_first)
    path = out / "samples.csv"
    header = ",".join(problem.decision_names)
    np.savetxt(path, inputs, delimiter=",", header=header, comments="", fmt="%.17g")
    print(f"wrote {len(inputs)} samples to {path}")
    return EXIT_OK


def cmd_run(args) -> int:
    problem = _load_problem(args)
    out = _outdir(args)
    samples_path = out / "samples.csv"
    if samples_path.exists():
        decisions = _read_samples(samples_path, problem)
    else:
        decisions = _generate_samples(problem, args.sp, args.skip_first)

    model = models.bind_model(problem)
    kpi_order = [model.kpi_names.index(k) for k in problem.kpi_names]

    cloud_path = out / "cloud.csv"
    cached: dict[str, np.ndarray] = {}
    if cloud_path.exists():
        try:
            prev = LabeledCloud.from_csv(cloud_path, problem)
            for dec, kpi in zip(prev.decisions, prev.kpis):
                cached[_row_hash(dec)] = kpi
        except DesignSpaceError:
            pass  # stale cloud from another problem; recompute

    hashes = [_row_hash(row) for row in decisions]
    todo = [i for i, h in enumerate(hashes) if h not in cached]
    kpis = np.full((len(decisions), len(problem.kpi_names)), np.nan)
    for i, h in enumerate(hashes):
        if h in cached:
            kpis[i] = cached[h]

    failures: list[tuple[int, str]] = []
    if todo:
        raw, fail = model.evaluate(decisions[todo], workers=args.workers)
        for local, msg in fail:
            failures.append((todo[local], msg))
        kpis[todo] = raw[:, kpi_order]

    failed_rows = sorted({i for i, _ in failures})
    ok = np.ones(len(decisions), dtype=bool)
    ok[failed_rows] = False
    ok &= np.all(np.isfinite(kpis), axis=1)

    cloud = classify(decisions[ok], kpis[ok], problem)
    cloud.to_csv(cloud_path)

    failures_path = out / "failures.csv"
    if failures:
        with open(failures_path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(problem.decision_names + ["error"])
            for i, msg in failures:
                writer.writerow([f"{v:.17g}" for v in decisions[i]] + [msg])
    elif failures_path.exists():
        failures_path.unlink()

    print(f"evaluated {len(todo)} of {len(decisions)} rows "
          f"({len(decisions) - len(todo)} cached, {len(failures)} failed); "
          f"{cloud.n_sat} satisfied / {cloud.n_vio} violated -> {cloud_path}")
    if len(decisions) and len(failures) / len(decisions) > args.max_failure_fraction:
        print(f"error: failure fraction {len(failures) / len(decisions):.1%} exceeds "
              f"{args.max_failure_fraction:.1%}", file=sys.stderr)
        return EXIT_MODEL_FAILURES
    return EXIT_OK


def _train_surrogate(cloud: LabeledCloud, args, out: Path):
    config = surrogate.TrainConfig(
        hidden=tuple(int(h) for h in args.hidden.split(",")),
        epochs=args.epochs,
        learning_rate=args.lr,
        split=args.split,
        seed=args.seed,
    )
    model, report = surrogate.train(cloud.decisions, cloud.kpis, config)
    model.save(out / "surrogate.json")
    (out / "surrogate_report.json").write_text(
        json.dumps(report.to_dict(), indent=2, sort_keys=True) + "\n")
    return model, report


def cmd_train_surrogate(args) -> int:
    problem = _load_problem(args)
    out = _outdir(args)
    cloud = LabeledCloud.from_csv(out / "cloud.csv", problem)
    _, report = _train_surrogate(cloud, args, out)
    for name, tr, te in zip(problem.kpi_names, report.train_mpe, report.test_mpe):
        print(f"{name}: train MPE {tr:.3f}% / test MPE {te:.3f}% "
              f"({report.n_train} train, {report.n_test} test rows)")
    print(f"wrote {out / 'surrogate.json'}")
    return EXIT_OK


def _get_interpolator(cloud: LabeledCloud, args, out: Path):
    if args.interpolator == "linear":
        return surrogate.LinearInterpolator(cloud.decisions, cloud.kpis)
    model_path = out / "surrogate.json"
    if model_path.exists():
        return surrogate.MlpModel.load(model_path)
    print("no trained surrogate found; training one now", file=sys.stderr)
    model, _ = _train_surrogate(cloud, args, out)
    return model


def cmd_identify(args) -> int:
    problem = _load_problem(args)
    out = _outdir(args)
    cloud = LabeledCloud.from_csv(out / "cloud.csv", problem)
    method = METHOD_NAMES[args.method]
    started = time.perf_counter()

    search_kwargs = {"delta_tol": args.delta_tol, "iter_max": args.iter_max}
    if args.method == "tolerance":
        result = identify.identify_tolerance(cloud, step=args.step, cap=args.cap,
                                             **search_kwargs)
    else:
        interp = _get_interpolator(cloud, args, out)
        if args.method == "rs":
            result = identify.identify_resolution_support(
                cloud, interp, start_power=args.start_power,
                power_cap=args.power_cap, **search_kwargs)
        else:
            result = identify.identify_combinatorial(
                cloud, interp, v_max_pct=args.v_max, start_power=args.start_power,
                power_cap=args.power_cap, **search_kwargs)
        if args.verify_extras:
            model = models.bind_model(problem)
            kpi_order = [model.kpi_names.index(k) for k in problem.kpi_names]
            result.audit = identify.audit_extras(
                result, lambda dec: model.evaluate(dec, workers=args.workers)[0][:, kpi_order],
                seed=args.seed)

    result.timings["total_s"] = time.perf_counter() - started
    path = out / f"dsp_{method}.json"
    result.to_json(path)

    print(f"method            : {method}")
    print(f"regions           : {result.n_regions}")
    print(f"alpha radius      : {result.alpha_radius:.6g} (normalized)")
    print(f"violations in DSp : {result.n_violations}")
    print(f"extra points      : {0 if result.extra_power is None else 2**result.extra_power}")
    print(f"satisfied points  : {result.n_shape_points}")
    print(f"space size        : {result.size_physical:.6g} {result.size_unit} "
          f"({result.size_normalized:.6g} normalized)")
    print(f"computation time  : {result.timings['total_s']:.2f} s")
    if result.audit:
        print(f"extras audit      : {result.audit}")
    print(f"wrote {path}")
    return EXIT_OK


def _parse_nop(text: str, problem: DesignProblem) -> np.ndarray:
    values = np.asarray([float(v) for v in text.split(",")])
    if len(values) != problem.dim:
        raise DesignSpaceError(
            f"NOP {text!r} has {len(values)} values, expected {problem.dim}")
    return values


def _load_space(args, out: Path) -> identify.DesignSpaceResult:
    path = Path(args.dsp) if args.dsp else out / "dsp_tolerance.json"
    if not path.exists():
        raise DesignSpaceError(f"design-space file {path} does not exist")
    return identify.DesignSpaceResult.from_json(path)


def cmd_aor(args) -> int:
    problem = _load_problem(args)
    out = _outdir(args)
    space = _load_space(args, out)
    cloud = LabeledCloud.from_csv(out / "cloud.csv", problem)
    nop = _parse_nop(args.nop, problem)
    report = analysis.find_aor(space, nop, delta_tol=args.delta_tol,
                               iter_max=args.iter_max, cloud=cloud)
    tag = args.tag or "nop"
    path = out / f"aor_{tag}.json"
    report.to_json(path)
    print(analysis.format_aor_report(report, problem.decision_units))
    print(f"wrote {path}")
    return EXIT_OK


def cmd_compare(args) -> int:
    problem = _load_problem(args)
    out = _outdir(args)
    space = _load_space(args, out)
    cloud = LabeledCloud.from_csv(out / "cloud.csv", problem)
    nop_a = _parse_nop(args.nop_a, problem)
    nop_b = _parse_nop(args.nop_b, problem)
    cmp = analysis.compare_nops(space, nop_a, nop_b, cloud=cloud,
                                delta_tol=args.delta_tol, iter_max=args.iter_max)
    path = out / "compare.json"
    cmp.to_json(path)
    print(analysis.format_comparison(cmp, problem.decision_units))
    print(f"wrote {path}")
    return EXIT_OK


def cmd_report(args) -> int:
    problem = _load_problem(args)
    out = _outdir(args)
    problem_copy = out / "problem.json"
    if Path(args.problem).resolve() != problem_copy.resolve():
        shutil.copyfile(args.problem, problem_copy)
    config_hash = hashlib.sha256(
        json.dumps(problem.to_dict(), sort_keys=True).encode()).hexdigest()

    artifacts: dict = {}
    for key, name in [("samples", "samples.csv"), ("cloud", "cloud.csv"),
                      ("failures", "failures.csv"), ("surrogate", "surrogate.json"),
                      ("surrogate_report", "surrogate_report.json"),
                      ("compare", "compare.json")]:
        if (out / name).exists():
            artifacts[key] = name
    dsp = {m: f"dsp_{m}.json" for m in METHOD_NAMES.values()
           if (out / f"dsp_{m}.json").exists()}
    if dsp:
        artifacts["dsp"] = dsp
    aors = sorted(p.name for p in out.glob("aor_*.json"))
    if aors:
        artifacts["aor"] = aors

    manifest = {
        "schema": "designspace.manifest/1",
        "config_hash": config_hash,
        "problem": "problem.json",
        "artifacts": artifacts,
    }
    path = out / "manifest.json"
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    print(f"wrote {path} ({sum(1 for _ in artifacts)} artifact groups)")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="designspace",
        description="Design-space identification and flexibility analysis")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--problem", required=True, help="problem definition JSON")
    common.add_argument("--out", default="out", help="output directory")
    common.add_argument("--seed", type=int, default=0, help="seed for stochastic steps")
    common.add_argument("--workers", type=int, default=1, help="parallel model evaluations")
    common.add_argument("--verify-extras", action="store_true",
                        help="re-simulate an audit sample of predicted extra points")

    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("sample", parents=[common], help="generate the Sobol sample batch")
    p.add_argument("--sp", type=int, default=None, help="override 2^sp sample count")
    p.add_argument("--skip-first", action="store_true",
                   help="skip the initial all-zeros Sobol point")
    p.set_defaults(func=cmd_sample)

    p = sub.add_parser("run", parents=[common],
                       help="evaluate the model over the samples and classify")
    p.add_argument("--sp", type=int, default=None)
    p.add_argument("--skip-first", action="store_true")
    p.add_argument("--max-failure-fraction", type=float, default=0.1)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("train-surrogate", parents=[common],
                       help="fit the neural-network interpolator to the cloud")
    p.add_argument("--hidden", default="64,64,64")
    p.add_argument("--epochs", type=int, default=5000)
    p.add_argument("--lr", type=float, default=1e-4)
    p.add_argument("--split", type=float, default=0.8)
    p.set_defaults(func=cmd_train_surrogate)

    p = sub.add_parser("identify", parents=[common], help="identify the design space")
    p.add_argument("--method", choices=sorted(METHOD_NAMES), required=True)
    p.add_argument("--v-max", type=float, default=0.25,
                   help="violation tolerance for the combinatorial method (%%)")
    p.add_argument("--step", type=float, default=0.25,
                   help="tolerance grid step for the tolerance method (%%)")
    p.add_argument("--cap", type=float, default=5.0,
                   help="tolerance grid cap for the tolerance method (%%)")
    p.add_argument("--start-power", type=int, default=10)
    p.add_argument("--power-cap", type=int, default=16)
    p.add_argument("--interpolator", choices=["ann", "linear"], default="ann")
    p.add_argument("--delta-tol", type=float, default=1e-3)
    p.add_argument("--iter-max", type=int, default=50)
    p.add_argument("--hidden", default="64,64,64")
    p.add_argument("--epochs", type=int, default=5000)
    p.add_argument("--lr", type=float, default=1e-4)
    p.add_argument("--split", type=float, default=0.8)
    p.set_defaults(func=cmd_identify)

    p = sub.add_parser("aor", parents=[common],
                       help="acceptable operating region around a nominal point")
    p.add_argument("--dsp", default=None, help="design-space JSON (default dsp_tolerance.json)")
    p.add_argument("--nop", required=True, help="comma-separated decision values")
    p.add_argument("--tag", default=None, help="suffix for the output file name")
    p.add_argument("--delta-tol", type=float, default=1e-3)
    p.add_argument("--iter-max", type=int, default=40)
    p.set_defaults(func=cmd_aor)

    p = sub.add_parser("compare", parents=[common], help="compare two nominal points")
    p.add_argument("--dsp", default=None)
    p.add_argument("--nop-a", required=True)
    p.add_argument("--nop-b", required=True)
    p.add_argument("--delta-tol", type=float, default=1e-3)
    p.add_argument("--iter-max", type=int, default=40)
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("report", parents=[common],
                       help="bundle artifacts into a manifest for plotting")
    p.set_defaults(func=cmd_report)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except NoUnifiedShape as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NO_UNIFIED_SHAPE
    except NopOutsideSpace as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NOP_OUTSIDE
    except DesignSpaceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
