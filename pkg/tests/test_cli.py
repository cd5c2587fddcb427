import csv
import json

import numpy as np
import pytest

from dpca.cli import main, read_long_csv
from dpca.simlab import SimModel


def write_long_csv(path, data):
    with open(path, "w") as handle:
        handle.write("subject_id,time,value\n")
        for sid, t, y in zip(data.subject_ids, data.times, data.values):
            for a, b in zip(t, y):
                handle.write(f"w{sid},{float(a)!r},{float(b)!r}\n")


@pytest.fixture(scope="module")
def sparse_growth_csv(tmp_path_factory):
    # 36 subjects with 1..12 observations each, like a sparse growth study
    rng = np.random.default_rng(0)
    model = SimModel()
    times, values, ids = [], [], []
    basis_cache = {}
    for i in range(36):
        n_i = int(rng.integers(1, 13))
        t = np.sort(rng.uniform(0.0, 1.0, n_i))
        while t.size > 1 and np.any(np.diff(t) <= 0):
            t = np.sort(rng.uniform(0.0, 1.0, n_i))
        basis, _ = model.basis(t)
        xi = rng.normal(0, 1, 5) * np.sqrt(model.eigenvalues)
        values.append(model.mean(t) + basis @ xi + rng.normal(0, 0.5, n_i))
        times.append(t)
        ids.append(i)
    from dpca.data import LongitudinalDataset

    data = LongitudinalDataset(times, values, subject_ids=ids, domain=(0, 1))
    path = tmp_path_factory.mktemp("cli") / "growth.csv"
    write_long_csv(path, data)
    return path, data


def test_fit_on_sparse_fragmentary_data(sparse_growth_csv, tmp_path):
    path, data = sparse_growth_csv
    out = tmp_path / "fit_out"
    code = main([
        "fit", "--input", str(path), "--out-dir", str(out),
        "--h-mu", "0.12", "--h-cov", "0.15",
    ])
    assert code == 0
    for name in ("fit.json", "mean_derivative.csv", "eigenfunctions.csv", "scores.csv", "reconstructions.csv"):
        assert (out / name).exists()
    # every subject gets scores, including singletons
    with open(out / "scores.csv") as handle:
        rows = list(csv.reader(handle))
    assert len(rows) - 1 == 36
    payload = json.loads((out / "fit.json").read_text())
    assert payload["schema"] == "dpca-fit-v1"
    assert len(payload["grid"]) == 51


def test_fit_reruns_byte_identical(sparse_growth_csv, tmp_path):
    path, _ = sparse_growth_csv
    out1 = tmp_path / "a"
    out2 = tmp_path / "b"
    for out in (out1, out2):
        assert main([
            "fit", "--input", str(path), "--out-dir", str(out),
            "--h-mu", "0.12", "--h-cov", "0.15",
        ]) == 0
    for name in ("fit.json", "scores.csv", "reconstructions.csv"):
        assert (out1 / name).read_bytes() == (out2 / name).read_bytes()


def test_reconstructions_roundtrip_through_parser(sparse_growth_csv, tmp_path):
    path, _ = sparse_growth_csv
    out = tmp_path / "rt"
    assert main([
        "fit", "--input", str(path), "--out-dir", str(out),
        "--h-mu", "0.12", "--h-cov", "0.15",
    ]) == 0
    recon = read_long_csv(str(out / "reconstructions.csv"))
    assert recon.n_subjects == 36
    payload = json.loads((out / "fit.json").read_text())
    grid = np.asarray(payload["grid"])
    for t in recon.times:
        assert np.max(np.abs(t - grid)) < 1e-12


def test_fit_empty_file_exit_2(tmp_path):
    empty = tmp_path / "empty.csv"
    empty.write_text("")
    assert main(["fit", "--input", str(empty), "--out-dir", str(tmp_path / "o")]) == 2


def test_fit_duplicate_times_exit_2(tmp_path):
    bad = tmp_path / "bad.csv"
    bad.write_text("subject_id,time,value\na,0.5,1.0\na,0.5,2.0\n")
    assert main(["fit", "--input", str(bad), "--out-dir", str(tmp_path / "o")]) == 2


def test_fit_all_singletons_exit_3(tmp_path):
    path = tmp_path / "singletons.csv"
    path.write_text(
        "subject_id,time,value\n"
        + "".join(f"s{i},{0.1 * i},1.0\n" for i in range(1, 9))
    )
    assert main([
        "fit", "--input", str(path), "--out-dir", str(tmp_path / "o"),
        "--h-mu", "0.3", "--h-cov", "0.3",
    ]) == 3


def test_bad_fve_value_exit_1(tmp_path):
    src = tmp_path / "x.csv"
    src.write_text("subject_id,time,value\na,0.1,1\na,0.5,2\nb,0.2,1\nb,0.8,2\n")
    assert main([
        "fit", "--input", str(src), "--out-dir", str(tmp_path / "o"), "--fve", "1.5",
    ]) == 1


def test_simulate_zero_replicates_exit_1(tmp_path):
    assert main([
        "simulate", "--design", "B", "--replicates", "0",
        "--out-dir", str(tmp_path / "s"),
    ]) == 1


@pytest.mark.slow
def test_simulate_outputs_and_thread_determinism(tmp_path):
    args = [
        "simulate", "--design", "B", "--sigma", "1.0", "--n", "40",
        "--replicates", "2", "--seed", "7",
    ]
    out1 = tmp_path / "s1"
    out2 = tmp_path / "s2"
    assert main(args + ["--out-dir", str(out1), "--threads", "1"]) == 0
    assert main(args + ["--out-dir", str(out2), "--threads", "2"]) == 0
    assert (out1 / "rmise.csv").read_bytes() == (out2 / "rmise.csv").read_bytes()
    assert (out1 / "rmise.json").read_bytes() == (out2 / "rmise.json").read_bytes()
    text = (out1 / "rmise.csv").read_text()
    assert text.startswith("method,K,mean,sd,n_rep")
    for method in ("DPCA", "FPCA", "LOCAL", "SMOOTH_DQ"):
        assert method in text


def _scores_csv(path, n=60, seed=0):
    rng = np.random.default_rng(seed)
    feats = rng.normal(size=(n, 4))
    labels = (feats[:, 1] > 0).astype(int)
    with open(path, "w") as handle:
        handle.write("subject_id,f1,f2,f3,f4\n")
        for i in range(n):
            handle.write(f"s{i}," + ",".join(repr(float(v)) for v in feats[i]) + "\n")
    return labels


def test_classify_on_score_features(tmp_path):
    scores_path = tmp_path / "scores.csv"
    labels = _scores_csv(scores_path)
    labels_path = tmp_path / "labels.csv"
    with open(labels_path, "w") as handle:
        handle.write("subject_id,label\n")
        for i, lab in enumerate(labels):
            handle.write(f"s{i},{lab}\n")
    out = tmp_path / "cls"
    code = main([
        "classify", "--scores", str(scores_path), "--labels", str(labels_path),
        "--out-dir", str(out), "--repeats", "40", "--train-size", "25", "--K", "4",
    ])
    assert code == 0
    with open(out / "classification.csv") as handle:
        rows = list(csv.DictReader(handle))
    ks = {(r["method"], r["K"]) for r in rows}
    assert ("SCORES", "2") in ks and ("SCORES", "CV") in ks
    for r in rows:
        assert 0.0 <= float(r["mean_err"]) <= 1.0


@pytest.mark.slow
def test_classify_from_functional_input(tmp_path):
    # two classes of dense curves separated in their derivative structure
    rng = np.random.default_rng(5)
    model = SimModel()
    grid = np.linspace(0.0, 1.0, 51)
    basis, _ = model.basis(grid)
    n = 50
    labels = rng.integers(0, 2, n)
    xi = rng.normal(0, 1, (n, 5)) * np.sqrt(model.eigenvalues)
    xi[:, 1] = np.where(labels == 1, 1.0, -1.0) * rng.uniform(2.0, 5.0, n)
    values = model.mean(grid)[None, :] + xi @ basis.T + rng.normal(0, 0.3, (n, 51))

    src = tmp_path / "curves.csv"
    with open(src, "w") as handle:
        handle.write("subject_id,time,value\n")
        for i in range(n):
            for a, b in zip(grid, values[i]):
                handle.write(f"c{i},{float(a)!r},{float(b)!r}\n")
    labels_path = tmp_path / "labels.csv"
    with open(labels_path, "w") as handle:
        handle.write("subject_id,label\n")
        for i, lab in enumerate(labels):
            handle.write(f"c{i},{lab}\n")

    out = tmp_path / "cls"
    code = main([
        "classify", "--input", str(src), "--labels", str(labels_path),
        "--out-dir", str(out), "--repeats", "30", "--train-size", "25", "--K", "3",
    ])
    assert code == 0
    with open(out / "classification.csv") as handle:
        rows = list(csv.DictReader(handle))
    methods = {r["method"] for r in rows}
    assert methods == {"DPC", "FPC"}
    best_dpc = min(float(r["mean_err"]) for r in rows if r["method"] == "DPC")
    assert best_dpc < 0.3
    payload = json.loads((out / "classification.json").read_text())
    assert set(payload["cv_selected_k"]) == {"DPC", "FPC"}


def test_classify_oversized_train_size_exit_1(tmp_path):
    scores_path = tmp_path / "scores.csv"
    labels = _scores_csv(scores_path, n=10)
    labels_path = tmp_path / "labels.csv"
    with open(labels_path, "w") as handle:
        handle.write("subject_id,label\n")
        for i, lab in enumerate(labels):
            handle.write(f"s{i},{lab}\n")
    assert main([
        "classify", "--scores", str(scores_path), "--labels", str(labels_path),
        "--out-dir", str(tmp_path / "o"), "--train-size", "50",
    ]) == 1


def test_classify_mismatched_ids_exit_2(tmp_path):
    scores_path = tmp_path / "scores.csv"
    _scores_csv(scores_path, n=10)
    labels_path = tmp_path / "labels.csv"
    labels_path.write_text("subject_id,label\nzz,1\n")
    assert main([
        "classify", "--scores", str(scores_path), "--labels", str(labels_path),
        "--out-dir", str(tmp_path / "o"),
    ]) == 2


def test_classify_single_class_exit_3(tmp_path):
    scores_path = tmp_path / "scores.csv"
    _scores_csv(scores_path, n=10)
    labels_path = tmp_path / "labels.csv"
    with open(labels_path, "w") as handle:
        handle.write("subject_id,label\n")
        for i in range(10):
            handle.write(f"s{i},1\n")
    assert main([
        "classify", "--scores", str(scores_path), "--labels", str(labels_path),
        "--out-dir", str(tmp_path / "o"),
    ]) == 3


def test_classify_requires_features(tmp_path):
    labels_path = tmp_path / "labels.csv"
    labels_path.write_text("subject_id,label\ns0,1\n")
    assert main(["classify", "--labels", str(labels_path)]) == 1


def test_bandwidth_prints_gcv_curves(sparse_growth_csv, capsys):
    path, _ = sparse_growth_csv
    assert main(["bandwidth", "--input", str(path)]) == 0
    out = capsys.readouterr().out
    lines = out.strip().splitlines()
    assert lines[0] == "target,bandwidth,gcv"
    assert any(line.startswith("mean,") for line in lines)
    assert any(line.startswith("covariance,") for line in lines)


def test_config_file_defaults_and_flag_override(sparse_growth_csv, tmp_path):
    path, _ = sparse_growth_csv
    cfg = tmp_path / "run.cfg"
    cfg.write_text("h_mu=0.12\nh_cov=0.15\ngrid=31\n")
    out1 = tmp_path / "c1"
    assert main([
        "fit", "--config", str(cfg), "--input", str(path), "--out-dir", str(out1),
    ]) == 0
    payload = json.loads((out1 / "fit.json").read_text())
    assert len(payload["grid"]) == 31
    out2 = tmp_path / "c2"
    assert main([
        "fit", "--config", str(cfg), "--grid", "41",
        "--input", str(path), "--out-dir", str(out2),
    ]) == 0
    payload2 = json.loads((out2 / "fit.json").read_text())
    assert len(payload2["grid"]) == 41