"""Command-line interface: fit, simulate, classify, bandwidth.

Input data is long-form CSV with header ``subject_id,time,value``; label
files are ``subject_id,label``.  All numeric output is written with 17
significant digits so files are reproducible byte for byte and round-trip
without loss.  Exit codes: 0 ok, 1 usage error, 2 input error,
3 computation error.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

import numpy as np

from .classify import cv_select_k, evaluate_split
from .data import LongitudinalDataset
from .errors import DpcaError, SingleClass
from .fit import DpcaConfig, fit_dpca
from .fpca import estimate_mean_and_derivative, pooled_scatter, raw_covariances
from .simlab import SimDesign, run_benchmark
from .smoothing import (
    Kernel,
    LocalFitSpec,
    bandwidth_candidates,
    bandwidth_candidates_2d,
    gcv_scores_1d,
    gcv_scores_2d,
)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_INPUT = 2
EXIT_COMPUTE = 3


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse defaults to exit code 2
        raise _UsageError(message)


class InputError(Exception):
    pass


def _fmt(x) -> str:
    return format(float(x), ".17g")


def read_long_csv(path: str) -> LongitudinalDataset:
    """Parse subject_id,time,value CSV into a dataset (file order kept)."""
    subjects: dict[str, list[tuple[float, float]]] = {}
    try:
        handle = open(path, newline="")
    except OSError as exc:
        raise InputError(f"cannot open {path}: {exc}") from exc
    with handle:
        reader = csv.reader(handle)
        header = next(reader, None)
        if header is None:
            raise InputError(f"{path}: empty file")
        cols = [c.strip().lower() for c in header]
        if cols[:3] != ["subject_id", "time", "value"]:
            raise InputError(f"{path}:1: expected header subject_id,time,value")
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) < 3:
                raise InputError(f"{path}:{lineno}: expected 3 fields, got {len(row)}")
            sid = row[0].strip()
            try:
                t = float(row[1])
                v = float(row[2])
            except ValueError as exc:
                raise InputError(f"{path}:{lineno}: non-numeric time or value") from exc
            subjects.setdefault(sid, []).append((t, v))
    if not subjects:
        raise InputError(f"{path}: no observations")
    ids, times, values = [], [], []
    for sid, obs in subjects.items():
        obs.sort(key=lambda p: p[0])
        t = np.array([p[0] for p in obs])
        v = np.array([p[1] for p in obs])
        if t.size > 1 and np.any(np.diff(t) <= 0):
            raise InputError(f"{path}: subject {sid} has duplicate observation times")
        ids.append(sid)
        times.append(t)
        values.append(v)
    return LongitudinalDataset(times, values, subject_ids=ids)


def read_labels_csv(path: str) -> dict[str, int]:
    try:
        handle = open(path, newline="")
    except OSError as exc:
        raise InputError(f"cannot open {path}: {exc}") from exc
    labels: dict[str, int] = {}
    with handle:
        reader = csv.reader(handle)
        header = next(reader, None)
        if header is None:
            raise InputError(f"{path}: empty file")
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) < 2:
                raise InputError(f"{path}:{lineno}: expected 2 fields")
            try:
                labels[row[0].strip()] = int(float(row[1]))
            except ValueError as exc:
                raise InputError(f"{path}:{lineno}: non-numeric label") from exc
    return labels


def read_scores_csv(path: str) -> tuple[list[str], np.ndarray]:
    """Feature matrix CSV: subject_id followed by numeric feature columns."""
    try:
        handle = open(path, newline="")
    except OSError as exc:
        raise InputError(f"cannot open {path}: {exc}") from exc
    ids: list[str] = []
    rows: list[list[float]] = []
    with handle:
        reader = csv.reader(handle)
        header = next(reader, None)
        if header is None:
            raise InputError(f"{path}: empty file")
        width = None
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            ids.append(row[0].strip())
            try:
                vals = [float(c) for c in row[1:]]
            except ValueError as exc:
                raise InputError(f"{path}:{lineno}: non-numeric feature") from exc
            if width is None:
                width = len(vals)
            elif len(vals) != width:
                raise InputError(f"{path}:{lineno}: ragged feature row")
            rows.append(vals)
    if not rows:
        raise InputError(f"{path}: no feature rows")
    return ids, np.asarray(rows)


def _write_csv(path: Path, header: list[str], rows) -> None:
    with open(path, "w", newline="") as handle:
        handle.write(",".join(header) + "\n")
        for row in rows:
            handle.write(",".join(_fmt(c) if isinstance(c, (int, float, np.floating)) else str(c) for c in row))
            handle.write("\n")


def _config_from_args(args) -> DpcaConfig:
    def bw(text):
        return "auto" if text == "auto" else float(text)

    return DpcaConfig(
        grid_size=args.grid,
        kernel=Kernel(args.kernel),
        bandwidth_mean=bw(args.h_mu),
        bandwidth_cov=bw(args.h_cov),
        fve_threshold=args.fve,
        max_components=args.max_components,
    )


def cmd_fit(args) -> int:
    data = read_long_csv(args.input)
    config = _config_from_args(args)
    fit = fit_dpca(data, config)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)

    (out / "fit.json").write_text(fit.to_json(indent=1, sort_keys=True))

    grid = fit.grid
    _write_csv(
        out / "mean_derivative.csv",
        ["time", "mean", "mean_derivative"],
        zip(grid, fit.mean.values, fit.mean_deriv.values),
    )

    k_traj = fit.traj_scores.shape[1]
    k_deriv = fit.deriv_scores.shape[1]
    header = (
        ["time"]
        + [f"trajectory_{k+1}" for k in range(k_traj)]
        + [f"derivative_{k+1}" for k in range(k_deriv)]
    )
    rows = np.column_stack(
        [grid, fit.traj_eig.eigenfunctions[:, :k_traj], fit.deriv_eig.eigenfunctions[:, :k_deriv]]
    )
    _write_csv(out / "eigenfunctions.csv", header, rows)

    header = (
        ["subject_id"]
        + [f"fpc_{k+1}" for k in range(k_traj)]
        + [f"dpc_{k+1}" for k in range(k_deriv)]
    )
    rows = [
        [sid, *fit.traj_scores[i], *fit.deriv_scores[i]]
        for i, sid in enumerate(fit.subject_ids)
    ]
    _write_csv(out / "scores.csv", header, rows)

    k_use = args.K if args.K is not None else fit.selected_k_dpca
    if not 1 <= k_use <= k_deriv:
        raise DpcaError(f"requested K={k_use} outside the {k_deriv} computed components")
    recon = fit.reconstruct(k_use, "dpca")
    rows = [
        [sid, t, v]
        for i, sid in enumerate(fit.subject_ids)
        for t, v in zip(grid, recon[i])
    ]
    _write_csv(out / "reconstructions.csv", ["subject_id", "time", "value"], rows)
    print(
        f"fit: {data.n_subjects} subjects, sigma2={fit.sigma2:.6g}, "
        f"h_mu={fit.bandwidth_mean:.6g}, h_cov={fit.bandwidth_cov:.6g}, "
        f"K_dpca={fit.selected_k_dpca}, K_fpca={fit.selected_k_fpca} -> {out}"
    )
    return EXIT_OK


def cmd_simulate(args) -> int:
    if args.replicates < 1:
        raise _UsageError("--replicates must be >= 1")
    design = SimDesign(variant=args.design, n_subjects=args.n, sigma=args.sigma)
    report = run_benchmark(
        design,
        replicates=args.replicates,
        threads=args.threads,
        seed=args.seed,
        grid_size=args.grid,
        fve_threshold=args.fve,
    )
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "rmise.csv").write_text(report.to_csv())
    (out / "rmise.json").write_text(report.to_json())
    n_failed = len(report.failures)
    print(f"simulate: design {args.design}, {args.replicates} replicates -> {out}")
    if n_failed:
        for line in report.failures:
            print(f"  failure: {line}", file=sys.stderr)
        if n_failed > 0.1 * args.replicates:
            print(f"error: {n_failed} replicate failures", file=sys.stderr)
            return EXIT_COMPUTE
    return EXIT_OK


def cmd_classify(args) -> int:
    labels_by_id = read_labels_csv(args.labels)
    feature_sets: dict[str, np.ndarray] = {}
    if args.scores:
        ids, mat = read_scores_csv(args.scores)
        feature_sets["SCORES"] = mat
    else:
        data = read_long_csv(args.input)
        fit = fit_dpca(data, _config_from_args(args))
        ids = fit.subject_ids
        feature_sets["FPC"] = fit.traj_scores
        feature_sets["DPC"] = fit.deriv_scores
    missing = [sid for sid in ids if sid not in labels_by_id]
    if missing:
        raise InputError(f"labels missing for subjects: {', '.join(missing[:5])}")
    labels = np.array([labels_by_id[sid] for sid in ids])
    if np.unique(labels).size < 2:
        raise SingleClass("labels contain a single class")
    if not 0 < args.train_size < len(labels):
        raise _UsageError(
            f"--train-size {args.train_size} must be between 1 and {len(labels) - 1}"
        )

    k_max = args.K if args.K is not None else 8
    rows = []
    selections = {}
    for name, mat in sorted(feature_sets.items()):
        ks = list(range(1, min(k_max, mat.shape[1]) + 1))
        for k in ks:
            mean_err, sd_err = evaluate_split(
                mat, labels, k, train_size=args.train_size,
                repeats=args.repeats, seed=args.seed,
            )
            rows.append([name, str(k), mean_err, sd_err])
        k_cv = cv_select_k(mat, labels, ks, seed=args.seed)
        mean_err, sd_err = evaluate_split(
            mat, labels, k_cv, train_size=args.train_size,
            repeats=args.repeats, seed=args.seed,
        )
        rows.append([name, "CV", mean_err, sd_err])
        selections[name] = k_cv

    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    _write_csv(out / "classification.csv", ["method", "K", "mean_err", "sd_err"], rows)
    payload = {
        "rows": [
            {"method": m, "K": k, "mean_err": a, "sd_err": b} for m, k, a, b in rows
        ],
        "cv_selected_k": selections,
        "train_size": args.train_size,
        "repeats": args.repeats,
        "seed": args.seed,
    }
    (out / "classification.json").write_text(json.dumps(payload, indent=1, sort_keys=True))
    print(f"classify: {len(labels)} subjects -> {out}")
    return EXIT_OK


def cmd_bandwidth(args) -> int:
    data = read_long_csv(args.input)
    kernel = Kernel(args.kernel)
    scatter = pooled_scatter(data)
    lines = ["target,bandwidth,gcv"]
    cands = bandwidth_candidates(scatter.x, 2)
    scores = gcv_scores_1d(scatter, LocalFitSpec(2, 0, kernel=kernel), cands)
    for h, score in zip(cands, scores):
        lines.append(f"mean,{_fmt(h)},{_fmt(score)}")
    grid = np.linspace(data.domain[0], data.domain[1], args.grid)
    mean, _ = estimate_mean_and_derivative(
        data, float(cands[int(np.argmin(scores))]), kernel, grid
    )
    try:
        raw = raw_covariances(data, mean)
        cands2 = bandwidth_candidates_2d(raw.s, raw.t, 1)
        for h, score in zip(cands2, gcv_scores_2d(raw, 1, kernel, cands2)):
            lines.append(f"covariance,{_fmt(h)},{_fmt(score)}")
    except DpcaError:
        pass
    print("\n".join(lines))
    return EXIT_OK


def build_parser() -> _Parser:
    parser = _Parser(prog="dpca", description="Derivative principal component analysis")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, needs_input=True):
        if needs_input:
            p.add_argument("--input", required=True, help="long-form CSV subject_id,time,value")
        p.add_argument("--out-dir", default="dpca_out", help="output directory")
        p.add_argument("--grid", type=int, default=51, help="evaluation grid size")
        p.add_argument("--kernel", choices=["gaussian", "epanechnikov"], default="gaussian")
        p.add_argument("--h-mu", default="auto", help="mean bandwidth or 'auto'")
        p.add_argument("--h-cov", default="auto", help="covariance bandwidth or 'auto'")
        p.add_argument("--fve", type=float, default=0.9, help="FVE threshold in (0, 1]")
        p.add_argument("--K", type=int, default=None, help="fixed number of components")
        p.add_argument("--max-components", type=int, default=10)
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--threads", type=int, default=1)

    p_fit = sub.add_parser("fit", help="fit the model and export artifacts")
    common(p_fit)
    p_fit.set_defaults(func=cmd_fit)

    p_sim = sub.add_parser("simulate", help="run a Monte Carlo benchmark")
    common(p_sim, needs_input=False)
    p_sim.add_argument("--design", choices=["A", "B"], required=True)
    p_sim.add_argument("--sigma", type=float, default=1.0)
    p_sim.add_argument("--n", type=int, default=200, help="subjects per replicate")
    p_sim.add_argument("--replicates", type=int, default=50)
    p_sim.set_defaults(func=cmd_simulate)

    p_cls = sub.add_parser("classify", help="logistic classification on scores")
    common(p_cls, needs_input=False)
    p_cls.add_argument("--input", help="functional CSV (fits FPC/DPC scores)")
    p_cls.add_argument("--scores", help="precomputed feature CSV (subject_id,f1,f2,...)")
    p_cls.add_argument("--labels", required=True, help="CSV subject_id,label with 0/1 labels")
    p_cls.add_argument("--train-size", type=int, default=30)
    p_cls.add_argument("--repeats", type=int, default=500)
    p_cls.set_defaults(func=cmd_classify)

    p_bw = sub.add_parser("bandwidth", help="print GCV curves as CSV")
    common(p_bw)
    p_bw.set_defaults(func=cmd_bandwidth)

    return parser


def _apply_config_file(argv: list[str], parser: _Parser) -> list[str]:
    """Inject key=value pairs from --config as defaults; explicit flags win."""
    if "--config" not in argv:
        return argv
    idx = argv.index("--config")
    if idx + 1 >= len(argv):
        raise _UsageError("--config needs a file path")
    path = argv[idx + 1]
    argv = argv[:idx] + argv[idx + 2 :]
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise InputError(f"cannot read config {path}: {exc}") from exc
    inject: list[str] = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise InputError(f"{path}:{lineno}: expected key=value")
        key, value = (part.strip() for part in line.split("=", 1))
        inject.append(f"--{key.replace('_', '-')}")
        if value:
            inject.append(value)
    # defaults go right after the subcommand so explicit flags override them
    for i, token in enumerate(argv):
        if not token.startswith("-"):
            return argv[: i + 1] + inject + argv[i + 1 :]
    return argv + inject


def main(argv=None) -> int:
    parser = build_parser()
    if argv is None:
        argv = sys.argv[1:]
    try:
        argv = _apply_config_file(list(argv), parser)
        args = parser.parse_args(argv)
    except _UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except InputError as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    try:
        if args.command == "classify" and not (args.input or args.scores):
            raise _UsageError("classify needs --input or --scores")
        return args.func(args)
    except (_UsageError, ValueError) as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except InputError as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except DpcaError as exc:
        stage = getattr(exc, "stage", None)
        where = f" (stage: {stage})" if stage else ""
        print(f"computation error{where}: {exc}", file=sys.stderr)
        return EXIT_COMPUTE


if __name__ == "__main__":
    sys.exit(main())
