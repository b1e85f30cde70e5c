import csv
import json
import subprocess
import sys

import numpy as np
import pytest

from probcal import cli
from probcal.core import clip_probabilities, softmax

from conftest import random_simplex
from oracles import sample_labels_from_rows


def write_csv(path, X, prefix="p", labels=None):
    k = X.shape[1]
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        header = [f"{prefix}_{j}" for j in range(k)]
        if labels is not None:
            header.append("label")
        writer.writerow(header)
        for i, row in enumerate(X):
            out = [repr(float(v)) for v in row]
            if labels is not None:
                out.append(str(labels[i]))
            writer.writerow(out)


@pytest.fixture
def prob_file(tmp_path, rng):
    q = random_simplex(rng, 400, 3)
    y = sample_labels_from_rows(rng, q)
    path = tmp_path / "probs.csv"
    write_csv(path, q, labels=y)
    return path, q, y


@pytest.fixture
def four_row_file(tmp_path):
    p = np.array([[0.2, 0.8], [0.4, 0.6], [0.9, 0.1], [0.7, 0.3]])
    y = np.array([1, 1, 0, 0])
    path = tmp_path / "four.csv"
    write_csv(path, p, labels=y)
    return path


class TestReadPredictions:
    def test_probabilities_with_labels(self, prob_file):
        path, q, y = prob_file
        X, kind, raw = cli.read_predictions(path)
        assert kind == "probabilities"
        np.testing.assert_allclose(X, q)
        assert [int(v) for v in raw] == y.tolist()

    def test_logits_without_labels(self, tmp_path, rng):
        z = rng.normal(size=(10, 4))
        path = tmp_path / "z.csv"
        write_csv(path, z, prefix="z")
        X, kind, raw = cli.read_predictions(path)
        assert kind == "logits" and raw is None
        np.testing.assert_allclose(X, z)

    def test_missing_file(self, tmp_path):
        with pytest.raises(cli.ParseError):
            cli.read_predictions(tmp_path / "nope.csv")

    def test_bad_header(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("a,b\n1,2\n")
        with pytest.raises(cli.ParseError, match="header"):
            cli.read_predictions(path)

    def test_ragged_row(self, tmp_path):
        path = tmp_path / "ragged.csv"
        path.write_text("p_0,p_1\n0.5,0.5\n0.5\n")
        with pytest.raises(cli.ParseError, match="fields"):
            cli.read_predictions(path)


class TestLabelMapping:
    def test_zero_based(self):
        y, names = cli.build_label_mapping(["0", "2", "1"], 3)
        assert y.tolist() == [0, 2, 1]
        assert names == ["0", "1", "2"]

    def test_one_based(self):
        y, names = cli.build_label_mapping(["1", "3", "2"], 3)
        assert y.tolist() == [0, 2, 1]
        assert names == ["1", "2", "3"]

    def test_strings_sorted(self):
        y, names = cli.build_label_mapping(["cat", "ant", "bee"], 3)
        assert names == ["ant", "bee", "cat"]
        assert y.tolist() == [2, 0, 1]

    def test_explicit_dictionary(self):
        y, names = cli.build_label_mapping(["x", "y", "x"], 2, explicit=["x", "y"])
        assert y.tolist() == [0, 1, 0]

    def test_underdetermined_strings_rejected(self):
        with pytest.raises(ValueError, match="dictionary"):
            cli.build_label_mapping(["a", "a", "b"], 3)

    def test_missing_label_column(self):
        with pytest.raises(cli.ParseError, match="label"):
            cli.build_label_mapping(None, 3)


class TestFitCommand:
    def test_temperature_three_rows(self, tmp_path):
        z = np.array([[2.0, 0.0], [0.0, 2.0], [2.0, 0.0]])
        path = tmp_path / "z.csv"
        write_csv(path, z, prefix="z", labels=[0, 1, 1])
        out = tmp_path / "model.json"
        rc = cli.main(["fit", str(path), "--method", "temperature", "-o", str(out)])
        assert rc == 0
        doc = json.loads(out.read_text())
        assert doc["type"] == "single"
        assert doc["params"]["t"] == pytest.approx(2.0 / np.log(2.0), abs=1e-3)

    def test_dirichlet_l2_fixed_lambda(self, tmp_path, rng):
        q = random_simplex(rng, 1000, 3)
        y = sample_labels_from_rows(rng, q)
        path = tmp_path / "q.csv"
        write_csv(path, q, labels=y)
        out = tmp_path / "m.json"
        rc = cli.main(["fit", str(path), "--method", "dirichlet_l2",
                       "--lambda", "1e-3", "-o", str(out)])
        assert rc == 0
        doc = json.loads(out.read_text())
        assert doc["hyperparams"] == {"lam": 1e-3}

    def test_three_fold_ensemble_is_member_mean(self, tmp_path, prob_file):
        path, q, y = prob_file
        out = tmp_path / "ens.json"
        rc = cli.main(["fit", str(path), "--method", "dirichlet_l2",
                       "--lambda", "1e-3", "--folds", "3", "-o", str(out)])
        assert rc == 0
        model = cli.load_model(out)
        assert len(model.members) == 3
        outputs = np.stack([m.apply(q) for m in model.members])
        expected = outputs.mean(axis=0)
        expected /= expected.sum(axis=1, keepdims=True)
        np.testing.assert_allclose(model.apply(q), expected, atol=1e-12)

    def test_grid_search(self, tmp_path, prob_file):
        path, q, y = prob_file
        out = tmp_path / "g.json"
        rc = cli.main(["fit", str(path), "--method", "ovr_width_bin",
                       "--grid", "bins=5,10", "--folds", "2", "-o", str(out)])
        assert rc == 0
        doc = json.loads(out.read_text())
        assert doc["members"][0]["hyperparams"]["bins"] in (5, 10)

    def test_kind_mismatch(self, tmp_path, prob_file):
        path, _, _ = prob_file
        rc = cli.main(["fit", str(path), "--method", "temperature",
                       "-o", str(tmp_path / "x.json")])
        assert rc == 3

    def test_missing_input(self, tmp_path):
        rc = cli.main(["fit", str(tmp_path / "none.csv"), "--method", "temperature",
                       "-o", str(tmp_path / "x.json")])
        assert rc == 2


class TestApplyCommand:
    def test_uncalibrated_identity(self, tmp_path, prob_file):
        path, q, _ = prob_file
        model_path = tmp_path / "uncal.json"
        cli.main(["fit", str(path), "--method", "uncalibrated", "-o", str(model_path)])
        out = tmp_path / "out.csv"
        rc = cli.main(["apply", str(model_path), str(path), "-o", str(out)])
        assert rc == 0
        X, kind, _ = cli.read_predictions(out)
        assert kind == "probabilities"
        np.testing.assert_allclose(X, clip_probabilities(q), atol=0)

    def test_temperature_one_is_softmax(self, tmp_path, rng):
        z = rng.normal(size=(50, 3))
        z_path = tmp_path / "z.csv"
        write_csv(z_path, z, prefix="z")
        model_path = tmp_path / "t1.json"
        from probcal.models import CalibratorModel
        from probcal.scaling import TemperatureParams

        model = CalibratorModel(method="temperature", k=3,
                                params=TemperatureParams(1.0))
        cli.save_model(model_path, model)
        out = tmp_path / "p.csv"
        rc = cli.main(["apply", str(model_path), str(z_path), "-o", str(out)])
        assert rc == 0
        X, _, _ = cli.read_predictions(out)
        np.testing.assert_allclose(X, softmax(z, axis=1), atol=1e-15)

    def test_fit_then_apply_reduces_log_loss(self, tmp_path, rng):
        from oracles import sample_from_generative
        from probcal.metrics import log_loss

        alpha = np.array([[4.0, 2.0, 2.0], [2.0, 4.0, 2.0], [2.0, 2.0, 4.0]])
        q, y = sample_from_generative(rng, alpha, np.full(3, 1 / 3), 1500)
        data_path = tmp_path / "gen.csv"
        write_csv(data_path, q, labels=y)
        model_path = tmp_path / "dir.json"
        cli.main(["fit", str(data_path), "--method", "dirichlet_l2",
                  "--lambda", "1e-7", "-o", str(model_path)])
        out = tmp_path / "cal.csv"
        cli.main(["apply", str(model_path), str(data_path), "-o", str(out)])
        calibrated, _, _ = cli.read_predictions(out)
        assert log_loss(calibrated, y) < log_loss(q, y)

    def test_kind_mismatch(self, tmp_path, prob_file):
        path, _, _ = prob_file
        model_path = tmp_path / "t.json"
        from probcal.models import CalibratorModel
        from probcal.scaling import TemperatureParams

        cli.save_model(model_path, CalibratorModel(method="temperature", k=3,
                                                   params=TemperatureParams(2.0)))
        rc = cli.main(["apply", str(model_path), str(path), "-o", str(path) + ".out"])
        assert rc == 3

    def test_k_mismatch(self, tmp_path, prob_file):
        path, _, _ = prob_file
        model_path = tmp_path / "k4.json"
        from probcal.models import CalibratorModel
        from probcal.scaling import TemperatureParams

        cli.save_model(model_path, CalibratorModel(method="temperature", k=4,
                                                   params=TemperatureParams(2.0)))
        z_path = tmp_path / "z3.csv"
        write_csv(z_path, np.zeros((5, 3)), prefix="z")
        rc = cli.main(["apply", str(model_path), str(z_path), "-o", str(z_path) + ".out"])
        assert rc == 3

    def test_corrupt_model_file(self, tmp_path, prob_file):
        path, _, _ = prob_file
        bad = tmp_path / "bad.json"
        bad.write_text("{not json")
        rc = cli.main(["apply", str(bad), str(path), "-o", str(tmp_path / "o.csv")])
        assert rc == 2


class TestEvalCommand:
    def test_hand_dataset(self, four_row_file, capsys):
        rc = cli.main(["eval", str(four_row_file), "--bins", "2", "--resamples", "0",
                       "--format", "json-lines"])
        assert rc == 0
        rec = json.loads(capsys.readouterr().out.strip())
        assert rec["conf_ece"] == pytest.approx(0.25)
        assert rec["cw_ece"] == pytest.approx(0.25)
        assert rec["accuracy"] == 1.0

    def test_perfect_predictions(self, tmp_path, capsys):
        p = np.array([[1.0, 0.0], [0.0, 1.0]])
        path = tmp_path / "perfect.csv"
        write_csv(path, p, labels=[0, 1])
        rc = cli.main(["eval", str(path), "--resamples", "0", "--format", "json-lines"])
        assert rc == 0
        rec = json.loads(capsys.readouterr().out.strip())
        assert rec["conf_ece"] == 0.0
        assert rec["cw_ece"] == 0.0
        assert rec["brier"] == 0.0
        assert rec["accuracy"] == 1.0

    def test_mocked_resample_counts_give_0017(self, four_row_file, capsys, monkeypatch):
        from probcal import stattest

        observed_box = {}
        real_machinery = stattest._conf_machinery

        def fake_resampled(p, stat_fn, n_resamples, seed):
            # 170 of 10000 strictly above any observed statistic in [0, 1].
            return np.concatenate([np.full(170, 2.0), np.full(9830, -1.0)])

        monkeypatch.setattr(stattest, "_resampled_statistics", fake_resampled)
        rc = cli.main(["eval", str(four_row_file), "--bins", "2",
                       "--resamples", "10000", "--format", "json-lines"])
        assert rc == 0
        rec = json.loads(capsys.readouterr().out.strip())
        assert rec["p_conf_ece"] == 0.017
        assert rec["p_cw_ece"] == 0.017

    def test_text_format(self, four_row_file, capsys):
        rc = cli.main(["eval", str(four_row_file), "--bins", "2", "--resamples", "50"])
        assert rc == 0
        out = capsys.readouterr().out
        assert "conf_ece" in out and "p_cw_ece" in out

    def test_csv_format(self, four_row_file, capsys):
        rc = cli.main(["eval", str(four_row_file), "--bins", "2", "--resamples", "0",
                       "--format", "csv"])
        assert rc == 0
        lines = capsys.readouterr().out.strip().splitlines()
        header = lines[0].split(",")
        row = lines[1].split(",")
        assert dict(zip(header, row))["accuracy"] == "1.0"


class TestDiagramCommand:
    def test_calibrated_constant_zero_gaps(self, tmp_path, capsys):
        p = np.tile([0.75, 0.25], (8, 1))
        y = [0, 0, 0, 0, 0, 0, 1, 1]
        path = tmp_path / "cal.csv"
        write_csv(path, p, labels=y)
        out = tmp_path / "d.svg"
        rc = cli.main(["diagram", str(path), "--bins", "2", "-o", str(out)])
        assert rc == 0
        svg = out.read_text()
        # gap rects are 4 units wide with zero height here
        assert 'width="4.0000" height="0.0000"' in svg

    def test_four_row_upper_bin_full_height(self, four_row_file, tmp_path):
        out = tmp_path / "four.svg"
        rc = cli.main(["diagram", str(four_row_file), "--bins", "2", "-o", str(out)])
        assert rc == 0
        svg = out.read_text()
        assert svg.count('<g class="chart"') == 1
        table = (tmp_path / "four.csv").read_text().splitlines()
        assert table[0] == "mode,class,bin_low,bin_high,count,mean_predicted,empirical_frequency"
        upper = table[2].split(",")
        assert upper[4] == "4" and float(upper[5]) == 0.75 and float(upper[6]) == 1.0

    def test_classwise_three_charts(self, tmp_path, rng):
        q = random_simplex(rng, 60, 3)
        y = sample_labels_from_rows(rng, q)
        path = tmp_path / "p3.csv"
        write_csv(path, q, labels=y)
        out = tmp_path / "cw.svg"
        rc = cli.main(["diagram", str(path), "--mode", "classwise", "-o", str(out)])
        assert rc == 0
        assert out.read_text().count('<g class="chart"') == 3

    def test_byte_deterministic(self, four_row_file, tmp_path):
        out1 = tmp_path / "a.svg"
        out2 = tmp_path / "b.svg"
        cli.main(["diagram", str(four_row_file), "--bins", "2", "-o", str(out1)])
        cli.main(["diagram", str(four_row_file), "--bins", "2", "-o", str(out2)])
        assert out1.read_bytes() == out2.read_bytes()

    def test_unwritable_path(self, four_row_file, tmp_path):
        rc = cli.main(["diagram", str(four_row_file), "-o",
                       str(tmp_path / "missing_dir" / "x.svg")])
        assert rc == 2


class TestTestCommand:
    def test_output_fields(self, prob_file, capsys):
        path, _, _ = prob_file
        rc = cli.main(["test", str(path), "--statistic", "cw_ece", "--resamples", "200",
                       "--seed", "3", "--format", "json-lines"])
        assert rc == 0
        rec = json.loads(capsys.readouterr().out.strip())
        assert rec["statistic"] == "cw_ece"
        assert rec["resamples"] == 200
        assert rec["decision"] in ("accept", "reject")
        assert 0.0 <= rec["p_value"] <= 1.0


class TestCompareCommand:
    def test_deterministic_tables(self, prob_file, capsys):
        path, _, _ = prob_file
        args = ["compare", str(path), "--methods", "uncalibrated,dirichlet_l2",
                "--repeats", "1", "--folds", "2", "--inner-folds", "2",
                "--resamples", "40", "--seed", "5", "--format", "csv"]
        rc = cli.main(args)
        assert rc == 0
        first = capsys.readouterr().out
        rc = cli.main(args)
        assert rc == 0
        second = capsys.readouterr().out
        assert first == second
        rows = list(csv.DictReader(first.strip().splitlines()))
        assert [r["method"] for r in rows] == ["uncalibrated", "dirichlet_l2"]

    def test_unknown_method(self, prob_file):
        path, _, _ = prob_file
        rc = cli.main(["compare", str(path), "--methods", "magic", "--repeats", "1",
                       "--folds", "2", "--resamples", "10"])
        assert rc == 3


class TestInspectCommand:
    def test_temperature_model(self, tmp_path, capsys):
        from probcal.models import CalibratorModel
        from probcal.scaling import TemperatureParams

        model_path = tmp_path / "t2.json"
        cli.save_model(model_path, CalibratorModel(method="temperature", k=2,
                                                   params=TemperatureParams(2.0)))
        rc = cli.main(["inspect", str(model_path), "--format", "json-lines"])
        assert rc == 0
        rec = json.loads(capsys.readouterr().out.strip())
        np.testing.assert_allclose(rec["A"], 0.5 * np.eye(2), atol=1e-12)
        np.testing.assert_allclose(rec["c"], [0.5, 0.5], atol=1e-12)
        assert len(rec["interpretation_points"]) == 3

    def test_dirichlet_model_text(self, tmp_path, prob_file, capsys):
        path, _, _ = prob_file
        model_path = tmp_path / "d.json"
        cli.main(["fit", str(path), "--method", "dirichlet_l2", "--lambda", "1e-3",
                  "-o", str(model_path)])
        capsys.readouterr()
        rc = cli.main(["inspect", str(model_path)])
        assert rc == 0
        out = capsys.readouterr().out
        assert "A (rows):" in out and "interpretation points" in out

    def test_non_dirichlet_rejected(self, tmp_path, prob_file, capsys):
        path, _, _ = prob_file
        model_path = tmp_path / "iso.json"
        cli.main(["fit", str(path), "--method", "ovr_isotonic", "-o", str(model_path)])
        rc = cli.main(["inspect", str(model_path)])
        assert rc == 3


class TestRoundTripsAndDeterminism:
    def test_fit_serialize_apply_bit_stable(self, tmp_path, prob_file):
        path, _, _ = prob_file
        out_a = tmp_path / "a"
        out_b = tmp_path / "b"
        for tag in ("a", "b"):
            cli.main(["fit", str(path), "--method", "dirichlet_l2", "--lambda", "1e-3",
                      "--folds", "3", "--seed", "17", "-o", str(tmp_path / f"{tag}.json")])
            cli.main(["apply", str(tmp_path / f"{tag}.json"), str(path),
                      "-o", str(tmp_path / f"{tag}.out.csv")])
        assert (tmp_path / "a.out.csv").read_bytes() == (tmp_path / "b.out.csv").read_bytes()

    def test_model_file_roundtrip_within_1e15(self, tmp_path, prob_file):
        path, q, _ = prob_file
        model_path = tmp_path / "m.json"
        cli.main(["fit", str(path), "--method", "dirichlet_l2", "--lambda", "1e-3",
                  "-o", str(model_path)])
        model = cli.load_model(model_path)
        second_path = tmp_path / "m2.json"
        cli.save_model(second_path, model)
        model2 = cli.load_model(second_path)
        np.testing.assert_allclose(model2.apply(q), model.apply(q), rtol=0, atol=1e-15)


def test_compare_defaults_match_protocol():
    parser = cli.build_parser()
    args = parser.parse_args(["compare", "x.csv"])
    assert args.repeats == 5
    assert args.folds == 5
    assert args.inner_folds == 3
    assert args.alpha == 0.05
    assert args.resamples == 10000


def test_eval_defaults():
    parser = cli.build_parser()
    args = parser.parse_args(["eval", "x.csv"])
    assert args.bins == 15
    assert args.resamples == 10000
    assert args.clip_floor == 2.2e-308


def test_module_entrypoint_smoke(four_row_file):
    proc = subprocess.run(
        [sys.executable, "-m", "probcal", "eval", str(four_row_file),
         "--bins", "2", "--resamples", "0", "--format", "json-lines"],
        capture_output=True, text=True,
    )
    assert proc.returncode == 0
    rec = json.loads(proc.stdout.strip())
    assert rec["accuracy"] == 1.0
