import json
import math
import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from msis.cli import main
from msis.errors import DataError
from msis.io import (
    STUDY_COLUMNS,
    THEORY_COLUMNS,
    RunManifest,
    format_series,
    format_table,
    parse_series,
    parse_table,
    read_manifest,
    read_table,
)


def run(argv, capsys=None):
    code = main([str(a) for a in argv])
    out = capsys.readouterr() if capsys is not None else None
    return code, out


class TestTheory:
    def test_white_noise_first_scales(self, tmp_path):
        path = tmp_path / "t.csv"
        assert run(["theory", "--poles", "0:0.1", "--d", "0", "--tau-max", "5", "-o", path])[0] == 0
        manifest, cols = read_table(path)
        assert tuple(cols) == THEORY_COLUMNS
        np.testing.assert_array_equal(cols["tau"], [1, 2, 3, 4, 5])
        assert cols["S"][0] == 0.0
        assert manifest.command == "theory"
        assert manifest.params["poles"] == "0:0.1"

    def test_ar1_closed_form(self, capsys):
        code, out = run(["theory", "--ar", "0.5", "--d", "0", "--tau-max", "1"], capsys)
        assert code == 0
        _, cols = parse_table(out.out)
        assert cols["S"].size == 1
        assert cols["S"][0] == pytest.approx(0.5 * math.log(4 / 3), abs=1e-12)

    def test_intermediate_peak(self, capsys):
        code, out = run(["theory", "--poles", "0.8:0.1", "--d", "0.7", "--q", "50", "--r", "48"], capsys)
        assert code == 0
        _, cols = parse_table(out.out)
        S, f = cols["S"], cols["f_tau"]
        interior = [i for i in range(1, S.size - 1) if S[i] > S[i - 1] and S[i] >= S[i + 1]]
        assert interior
        assert any(0.03 <= f[i] <= 0.08 for i in interior)

    def test_negative_coefficients(self, capsys):
        assert run(["theory", "--ar", "-0.5,0.2", "--tau-max", "2"], capsys)[0] == 0

    def test_conflicting_flags(self, capsys):
        code, out = run(["theory", "--poles", "0.8:0.1", "--ar", "0.5"], capsys)
        assert code == 1
        assert "exactly one" in out.err

    def test_unstable(self, capsys):
        code, out = run(["theory", "--ar", "1.2"], capsys)
        assert code == 3
        assert "nonstationary" in out.err

    def test_bad_flag(self, capsys):
        with pytest.raises(SystemExit) as info:
            main(["theory", "--bogus"])
        assert info.value.code == 1


class TestSimulate:
    def test_files_and_determinism(self, tmp_path):
        for name in ("a", "b"):
            assert run(["simulate", "--poles", "0.8:0.1", "--d", "0.4", "--n", "300", "--reps", "3",
                        "--seed", "7", "--out", tmp_path / name])[0] == 0
        files = sorted(p.name for p in (tmp_path / "a").iterdir())
        assert files == ["manifest.json", "series_0000.txt", "series_0001.txt", "series_0002.txt"]
        for f in files:
            assert (tmp_path / "a" / f).read_text().replace(str(tmp_path / "a"), "") == \
                (tmp_path / "b" / f).read_text().replace(str(tmp_path / "b"), "")
        x = parse_series((tmp_path / "a" / "series_0001.txt").read_text())
        assert x.size == 300

    def test_white_noise_variance(self, tmp_path):
        assert run(["simulate", "--poles", "0:0.1", "--d", "0", "--sigma2", "2.5", "--n", "100000",
                    "--out", tmp_path])[0] == 0
        x = parse_series((tmp_path / "series_0000.txt").read_text())
        assert np.var(x) == pytest.approx(2.5, rel=0.02)

    def test_hundred_files(self, tmp_path):
        assert run(["simulate", "--ar", "0.5", "--n", "300", "--reps", "100", "--out", tmp_path])[0] == 0
        series = sorted(tmp_path.glob("series_*.txt"))
        assert len(series) == 100
        assert all(parse_series(p.read_text()).size == 300 for p in series[::17])

    def test_unwritable(self, tmp_path, capsys):
        blocker = tmp_path / "file"
        blocker.write_text("x")
        code, _ = run(["simulate", "--ar", "0.5", "--n", "10", "--out", blocker / "sub"], capsys)
        assert code == 2


class TestEstimate:
    @pytest.fixture()
    def series_file(self, tmp_path):
        run(["simulate", "--poles", "0.8:0.1", "--d", "0.7", "--n", "300", "--seed", "3", "--out", tmp_path])
        return tmp_path / "series_0000.txt"

    def test_result_and_rerun(self, series_file, tmp_path):
        a, b = tmp_path / "a.json", tmp_path / "b.json"
        for out in (a, b):
            assert run(["estimate", "--input", series_file, "--mode", "earfi", "--tau-max", "10", "-o", out])[0] == 0
        doc = json.loads(a.read_text())
        assert a.read_text().replace("a.json", "") == b.read_text().replace("b.json", "")
        fit = doc["fit"]
        for key in ("d_hat", "d_stderr", "d_significance", "p_selected", "ar_coefficients", "sigma2"):
            assert key in fit
        assert fit["d_significance"]["level"] == 0.05
        assert doc["table"]["columns"] == list(THEORY_COLUMNS)
        assert len(doc["table"]["rows"]) == 10
        assert doc["manifest"]["command"] == "estimate"

    def test_ear_mode(self, series_file, capsys):
        code, out = run(["estimate", "--input", series_file, "--mode", "ear", "--tau-max", "3"], capsys)
        assert code == 0
        doc = json.loads(out.out)
        assert doc["fit"]["d_hat"] == 0.0
        assert doc["fit"]["d_significance"] is None

    def test_non_numeric(self, tmp_path, capsys):
        path = tmp_path / "bad.txt"
        path.write_text("# comment\n" + "\n".join(["0.1"] * 50) + "\nabc\n" + "\n".join(["0.2"] * 50) + "\n")
        code, out = run(["estimate", "--input", path], capsys)
        assert code == 2
        assert "line 52" in out.err

    def test_short(self, tmp_path, capsys):
        path = tmp_path / "short.txt"
        path.write_text("\n".join(str(v) for v in range(10)))
        code, out = run(["estimate", "--input", path], capsys)
        assert code == 2
        assert "64" in out.err

    def test_missing_file(self, tmp_path, capsys):
        assert run(["estimate", "--input", tmp_path / "nope.txt"], capsys)[0] == 2


class TestStudy:
    def _config(self, tmp_path, text):
        path = tmp_path / "grid.yaml"
        path.write_text(text)
        return path

    def test_small_grid(self, tmp_path):
        cfg = self._config(tmp_path, "poles: ['0.8:0.1']\nd: [0.0, 0.7]\nn: [300]\nreps: 2\nseed: 1\n"
                                     "estimators: [earfi, rmse]\ntau_max: 4\n")
        out = tmp_path / "out"
        assert run(["study", "--config", cfg, "--out", out])[0] == 0
        csvs = sorted(p.name for p in out.glob("*.csv"))
        assert csvs == ["poles0_d0.7_n300_earfi.csv", "poles0_d0.7_n300_rmse.csv",
                        "poles0_d0_n300_earfi.csv", "poles0_d0_n300_rmse.csv"]
        manifest, cols = read_table(out / csvs[0])
        assert tuple(cols) == STUDY_COLUMNS
        assert manifest.command == "study"
        index = json.loads((out / "manifest.json").read_text())
        assert len(index["cells"]) == 4

    def test_json_config(self, tmp_path):
        cfg = tmp_path / "grid.json"
        cfg.write_text(json.dumps({"poles": [[[0.8, 0.1]]], "d": 0.4, "n": 300, "reps": 1,
                                   "estimators": ["ear"], "tau_max": 2}))
        assert run(["study", "--config", cfg, "--out", tmp_path / "o"])[0] == 0

    @pytest.mark.parametrize("text,field", [
        ("reps: many\n", "reps"),
        ("d: [zero]\n", "d"),
        ("colour: red\n", "colour"),
        ("poles: ['0.8']\n", "poles"),
    ])
    def test_malformed(self, tmp_path, capsys, text, field):
        code, out = run(["study", "--config", self._config(tmp_path, text), "--out", tmp_path / "o"], capsys)
        assert code == 1
        assert field in out.err

    def test_bad_estimator(self, tmp_path, capsys):
        code, out = run(["study", "--config", self._config(tmp_path, "estimators: [arma]\n"),
                         "--out", tmp_path / "o"], capsys)
        assert code == 1
        assert "estimators" in out.err


class TestReplay:
    def test_theory(self, tmp_path):
        path = tmp_path / "t.csv"
        run(["theory", "--ar=-0.3,0.2", "--d", "0.3", "--tau-max", "6", "-o", path])
        first = path.read_text()
        path.unlink()
        assert run(["replay", path.with_name("missing")])[0] != 0
        (tmp_path / "copy.csv").write_text(first)
        assert run(["replay", tmp_path / "copy.csv"])[0] == 0
        assert path.read_text() == first

    def test_estimate_to_new_path(self, tmp_path):
        run(["simulate", "--ar", "0.5", "--n", "200", "--out", tmp_path])
        a = tmp_path / "a.json"
        run(["estimate", "--input", tmp_path / "series_0000.txt", "--tau-max", "3", "-o", a])
        assert run(["replay", a, "-o", tmp_path / "b.json"])[0] == 0
        da = json.loads(a.read_text())
        db = json.loads((tmp_path / "b.json").read_text())
        assert da["fit"] == db["fit"] and da["table"] == db["table"]

    def test_simulate(self, tmp_path):
        run(["simulate", "--poles", "0.8:0.1", "--d", "0.4", "--n", "50", "--reps", "2", "--out", tmp_path / "a"])
        assert run(["replay", tmp_path / "a" / "manifest.json", "-o", tmp_path / "b"])[0] == 0
        for name in ("series_0000.txt", "series_0001.txt"):
            xa = parse_series((tmp_path / "a" / name).read_text())
            xb = parse_series((tmp_path / "b" / name).read_text())
            np.testing.assert_array_equal(xa, xb)


class TestIo:
    def test_table_round_trip(self):
        cols = {"tau": np.arange(1, 4), "f_tau": 1 / (2 * np.arange(1, 4)),
                "S": np.array([0.1, math.nan, 1 / 3])}
        manifest = RunManifest.create("theory", {"q": 50})
        m2, back = parse_table(format_table(cols, manifest))
        assert m2 == manifest
        np.testing.assert_array_equal(back["tau"], cols["tau"])
        np.testing.assert_array_equal(back["S"], cols["S"])

    @given(st.lists(st.floats(allow_nan=False, allow_infinity=False), min_size=1, max_size=50))
    def test_series_round_trip(self, values):
        np.testing.assert_array_equal(parse_series(format_series(values)), values)

    def test_series_header_and_comments(self):
        x = parse_series("value\n# note\n1.5\n\n-2\n")
        np.testing.assert_array_equal(x, [1.5, -2.0])

    def test_series_rejects_nonfinite(self):
        with pytest.raises(DataError, match="line 2"):
            parse_series("1\ninf\n")

    def test_series_rejects_second_header(self):
        with pytest.raises(DataError, match="line 3"):
            parse_series("a\n1\nb\n")

    def test_manifest_missing(self, tmp_path):
        path = tmp_path / "x.txt"
        path.write_text("1\n2\n")
        with pytest.raises(DataError):
            read_manifest(path)

    def test_timestamp_from_environment(self, monkeypatch):
        monkeypatch.setenv("SOURCE_DATE_EPOCH", "0")
        assert RunManifest.create("theory", {}).timestamp == "1970-01-01T00:00:00Z"
        monkeypatch.delenv("SOURCE_DATE_EPOCH")
        assert RunManifest.create("theory", {}).timestamp is None


def test_console_script(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "msis.cli", "theory", "--ar", "0.5", "--tau-max", "1"],
                          capture_output=True, text=True, check=False)
    assert proc.returncode == 0
    assert proc.stdout.splitlines()[1] == "tau,f_tau,S,sigma2_x,sigma2_e"
