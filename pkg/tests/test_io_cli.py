import json
import re
import subprocess
import sys
from pathlib import Path

import jsonschema
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from classgain import SampleSet
from classgain.cli import main, parse_seeds
from classgain.io import (
    SpecParseError,
    format_spec,
    label_pixels,
    parse_spec,
    pixel_labels,
    read_csv_labels,
    read_csv_values,
    read_pgm_raw,
    read_pgm_signal,
    render_svg,
    scale_path,
    write_csv_labels,
    write_csv_values,
    write_pgm_signal,
)

SCHEMA = json.loads((Path(__file__).resolve().parents[1] / "docs" / "report.schema.json").read_text())

CASE_ONE = """\
# two alternating classes
samples 256
seed 3
class 128 16
class 16 16
layout blocks 1:64 2:64 1:64 2:64
"""

TWODIM = """\
seed 1
class 200 400
class 5 400
layout blocks 1:512 2:512
grid 32 32
"""


def validate(payload):
    jsonschema.validate(payload, SCHEMA)


class TestSpecParsing:
    def test_case_one(self):
        spec, n = parse_spec(CASE_ONE)
        assert n == 256 and spec.seed == 3
        assert spec.means == (128.0, 16.0)
        assert spec.runs == ((0, 64), (1, 64), (0, 64), (1, 64))

    def test_grid_implies_samples(self):
        spec, n = parse_spec(TWODIM)
        assert n == 1024 and spec.grid == (32, 32)

    def test_format_roundtrip(self):
        spec, n = parse_spec(CASE_ONE)
        again, n2 = parse_spec(format_spec(spec, n))
        assert again == spec and n2 == n

    def test_iid_with_weights(self):
        spec, n = parse_spec("samples 10\nclass 0 1 0.25\nclass 5 1 0.75\nlayout iid\n")
        assert spec.layout == "iid" and spec.weights == (0.25, 0.75)

    @pytest.mark.parametrize(
        "text,line",
        [
            ("", 1),
            ("# only a comment\n", 1),
            ("class 0 1\nclass 1 0\n", 2),
            ("samples 8\nclass 0 1\nbogus entry\n", 3),
            ("class 0 1\nclass 5 1\nlayout blocks 1:4 3:4\n", 3),
            ("samples 8\nclass a 1\n", 2),
        ],
    )
    def test_errors_carry_line(self, text, line):
        with pytest.raises(SpecParseError) as err:
            parse_spec(text)
        assert err.value.lineno == line
        assert f"line {line}" in str(err.value)


class TestFiles:
    @settings(max_examples=50, deadline=None)
    @given(arrays(float, st.integers(1, 50), elements=st.floats(-1e9, 1e9)))
    def test_csv_values_roundtrip(self, tmp_path_factory, values):
        path = tmp_path_factory.mktemp("csv") / "v.csv"
        write_csv_values(path, values)
        np.testing.assert_array_equal(read_csv_values(path), values)

    def test_csv_labels_one_based(self, tmp_path):
        path = write_csv_labels(tmp_path / "l.csv", [0, 1, 1, 2])
        assert path.read_text().split() == ["1", "2", "2", "3"]
        assert read_csv_labels(path).tolist() == [0, 1, 1, 2]

    def test_pgm_roundtrip_within_scale(self, tmp_path):
        grid = np.random.default_rng(0).normal(100, 30, size=(8, 12))
        p, s = write_pgm_signal(tmp_path / "x.pgm", grid)
        assert s == scale_path(p)
        record = json.loads(s.read_text())
        back = read_pgm_signal(p)
        assert back.shape == (8, 12)
        assert np.max(np.abs(back - grid)) <= record["max_abs_error"] * (1 + 1e-9)
        assert read_pgm_raw(p).max() == 255 and read_pgm_raw(p).min() == 0

    def test_truncated_pgm(self, tmp_path):
        path = tmp_path / "bad.pgm"
        path.write_bytes(b"P5\n4 4\n255\n" + bytes(5))
        with pytest.raises(ValueError):
            read_pgm_raw(path)

    @pytest.mark.parametrize("J", [1, 2, 3, 5])
    def test_label_pixels_roundtrip(self, J):
        labels = np.arange(J).repeat(3)
        assert pixel_labels(label_pixels(labels, J), J).tolist() == labels.tolist()
        if J == 2:
            assert label_pixels(labels, 2).tolist() == [0, 0, 0, 255, 255, 255]

    def test_svg(self):
        line = render_svg(SampleSet.from_array([1.0, 3.0, 2.0]), np.array([0, 1, 0]))
        assert line.startswith("<svg") and "polyline" in line
        grid = render_svg(SampleSet.from_array(np.arange(4.0).reshape(2, 2)), np.array([0, 1, 1, 0]))
        assert grid.count("<rect") >= 8


def test_parse_seeds():
    assert parse_seeds("3") == [0, 1, 2]
    assert parse_seeds("4,9") == [4, 9]
    assert parse_seeds("10-12") == [10, 11, 12]


@pytest.fixture
def case_one_dir(tmp_path):
    spec = tmp_path / "one.txt"
    spec.write_text(CASE_ONE)
    out = tmp_path / "gen"
    assert main(["gen", "--input", str(spec), "--out", str(out)]) == 0
    return out


class TestCommands:
    def test_gen_writes_signal_and_truth(self, case_one_dir):
        values = read_csv_values(case_one_dir / "signal.csv")
        assert values.size == 256
        assert read_csv_labels(case_one_dir / "truth.csv").size == 256
        manifest = json.loads((case_one_dir / "manifest.json").read_text())
        assert manifest["command"] == "gen" and manifest["seeds"] == [3]
        assert re.fullmatch(r"[0-9a-f]{64}", manifest["inputs"]["spec"]["sha256"])

    def test_gen_twodim_pgm(self, tmp_path):
        spec = tmp_path / "two.txt"
        spec.write_text(TWODIM)
        assert main(["gen", "--input", str(spec), "--out", str(tmp_path / "g")]) == 0
        assert read_pgm_raw(tmp_path / "g" / "signal.pgm").shape == (32, 32)
        assert (tmp_path / "g" / "signal.scale.json").exists()

    def test_classify_and_eval(self, case_one_dir, tmp_path, capsys):
        out = tmp_path / "cls"
        assert main(["classify", "--input", str(case_one_dir / "signal.csv"), "-J", "2", "--out", str(out)]) == 0
        report = json.loads((out / "report.json").read_text())
        validate(report)
        assert report["gain"] > 1
        assert "azuma_bound" in report["rounding"] and "total_seconds" in report["timing"]
        assert (out / "figure.svg").read_text().startswith("<svg")
        capsys.readouterr()
        assert main(["eval", "--input", str(out / "labels.csv"), "--truth", str(case_one_dir / "truth.csv"),
                     "-J", "2", "--out", str(out)]) == 0
        payload = json.loads(capsys.readouterr().out)
        validate(payload)
        assert payload["overall_error"] == 0.0
        validate(json.loads((out / "eval.json").read_text()))

    @pytest.mark.parametrize("method", ["kmeans", "em"])
    def test_classify_baselines(self, case_one_dir, tmp_path, method):
        out = tmp_path / method
        assert main(["classify", "--input", str(case_one_dir / "signal.csv"), "-J", "2",
                     "--method", method, "--out", str(out)]) == 0
        validate(json.loads((out / "report.json").read_text()))

    def test_classify_single_class(self, case_one_dir, tmp_path):
        out = tmp_path / "j1"
        assert main(["classify", "--input", str(case_one_dir / "signal.csv"), "-J", "1", "--out", str(out)]) == 0
        report = json.loads((out / "report.json").read_text())
        assert report["gain"] == pytest.approx(1.0)
        assert set(read_csv_labels(out / "labels.csv").tolist()) == {0}

    def test_classify_pgm(self, tmp_path):
        spec = tmp_path / "two.txt"
        spec.write_text(TWODIM)
        main(["gen", "--input", str(spec), "--out", str(tmp_path / "g")])
        out = tmp_path / "c"
        assert main(["classify", "--input", str(tmp_path / "g" / "signal.pgm"), "-J", "2", "--out", str(out)]) == 0
        pixels = read_pgm_raw(out / "labels.pgm")
        assert pixels.shape == (32, 32)
        assert set(np.unique(pixels).tolist()) <= {0.0, 255.0}
        manifest = json.loads((out / "manifest.json").read_text())
        assert "scale" in manifest["inputs"]

    def test_repro_single_seed(self, capsys):
        assert main(["repro", "one", "--seeds", "1"]) == 0
        payload = json.loads(capsys.readouterr().out)
        validate(payload)
        assert payload["kind"] == "eval"

    def test_repro_table(self, tmp_path, capsys):
        assert main(["repro", "one", "--seeds", "3", "--out", str(tmp_path)]) == 0
        text = capsys.readouterr().out
        assert "published" in text and "zero-error seeds" in text
        payload = json.loads((tmp_path / "repro.json").read_text())
        validate(payload)
        assert payload["aggregate"]["overall_error"]["median"] == 0.0

    @pytest.mark.parametrize(
        "argv",
        [
            ["classify", "--out", "x"],
            ["classify", "--input", "a.csv", "--classes", "0", "--out", "x"],
            ["gen", "--input", "spec.txt"],
            ["nonsense"],
            ["repro", "five"],
        ],
    )
    def test_usage_errors(self, argv, tmp_path, monkeypatch):
        monkeypatch.chdir(tmp_path)
        assert main(argv) == 2

    def test_data_errors(self, tmp_path, capsys):
        empty = tmp_path / "empty.txt"
        empty.write_text("")
        assert main(["gen", "--input", str(empty), "--out", str(tmp_path / "o")]) == 3
        assert "line 1" in capsys.readouterr().err
        assert main(["classify", "--input", str(tmp_path / "missing.csv"), "-J", "2", "--out", str(tmp_path)]) == 3
        bad = tmp_path / "bad.csv"
        bad.write_text("1.0\nabc\n")
        assert main(["classify", "--input", str(bad), "-J", "2", "--out", str(tmp_path / "o")]) == 3


def test_repeat_runs_identical(case_one_dir, tmp_path):
    outs = []
    for k in range(2):
        out = tmp_path / f"r{k}"
        main(["classify", "--input", str(case_one_dir / "signal.csv"), "-J", "2", "--seed", "7", "--out", str(out)])
        outs.append(out)
    a, b = outs
    assert (a / "labels.csv").read_bytes() == (b / "labels.csv").read_bytes()
    assert (a / "figure.svg").read_bytes() == (b / "figure.svg").read_bytes()
    ra, rb = (json.loads((o / "report.json").read_text()) for o in outs)
    ra.pop("timing"), rb.pop("timing")
    assert ra == rb


def test_manifest_replay(case_one_dir, tmp_path):
    out = tmp_path / "first"
    main(["classify", "--input", str(case_one_dir / "signal.csv"), "-J", "2", "--seed", "2", "--out", str(out)])
    manifest = json.loads((out / "manifest.json").read_text())
    argv = list(manifest["argv"])
    argv[argv.index("--out") + 1] = str(tmp_path / "replay")
    main(argv)
    assert (tmp_path / "replay" / "labels.csv").read_bytes() == (out / "labels.csv").read_bytes()


def test_module_entry_point(case_one_dir, tmp_path):
    proc = subprocess.run(
        [sys.executable, "-m", "classgain", "eval", "--input", str(case_one_dir / "truth.csv"),
         "--truth", str(case_one_dir / "truth.csv"), "-J", "2"],
        capture_output=True, text=True, check=False,
    )
    assert proc.returncode == 0, proc.stderr
    assert json.loads(proc.stdout)["overall_error"] == 0.0
