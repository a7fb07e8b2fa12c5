import json
import math

import numpy as np
import pytest

from emdetect import cli
from emdetect.table import ScanTable, format_value


def read_csv(path):
    meta, rows = {}, []
    lines = path.read_text().splitlines()
    body = []
    for line in lines:
        if line.startswith("# "):
            key, value = line[2:].split("=", 1)
            meta[key] = value
        else:
            body.append(line)
    header = body[0].split(",")
    rows = [r.split(",") for r in body[1:]]
    cols = {h: [r[i] for r in rows] for i, h in enumerate(header)}
    return meta, cols


def run_ok(argv, capsys=None):
    code = cli.main(argv)
    assert code == 0
    return code


class TestParseComplex:
    @pytest.mark.parametrize(
        "text, value",
        [
            ("0", 0j),
            ("-1", -1 + 0j),
            ("2.5e-3", 0.0025 + 0j),
            ("i", 1j),
            ("-i", -1j),
            ("3i", 3j),
            ("-0.5i", -0.5j),
            ("1+2i", 1 + 2j),
            ("1-2i", 1 - 2j),
            ("-1.5+i", -1.5 + 1j),
            ("1e-2-3e1j", 0.01 - 30j),
            (".5+.5i", 0.5 + 0.5j),
        ],
    )
    def test_accepts(self, text, value):
        assert cli.parse_complex(text) == value

    @pytest.mark.parametrize("text", ["", "abc", "1+", "1 + 2i", "1+2", "2i3", "1+2k", "++1", "nan"])
    def test_rejects(self, text):
        with pytest.raises(cli.UsageError):
            cli.parse_complex(text)


class TestParseRange:
    def test_ok(self):
        assert cli.parse_range("-10:10:801") == (-10.0, 10.0, 801)

    @pytest.mark.parametrize("text", ["1:0:5", "0:1:1", "0:1", "a:b:c", "0:1:2.5"])
    def test_rejects(self, text):
        with pytest.raises(cli.UsageError):
            cli.parse_range(text)


class TestFormatting:
    def test_float_roundtrip(self):
        x = 0.1 + 0.2
        assert float(format_value(x)) == x

    def test_complex(self):
        assert format_value(1 - 2j) == "1-2i"
        assert cli.parse_complex(format_value(0.3 + 0.7j)) == 0.3 + 0.7j

    def test_misc(self):
        assert format_value(None) == "none"
        assert format_value(True) == "true"
        assert format_value((1.0, 2.0, 3)) == "1:2:3"

    def test_csv_layout(self):
        t = ScanTable({"a": np.array([1.0, 2.0]), "b": np.array([0.5, 0.25])}, {"k": 1})
        assert t.to_csv().splitlines() == ["# k=1", "a,b", "1,0.5", "2,0.25"]

    def test_json_layout(self):
        t = ScanTable({"a": np.array([1.0])}, {"z": 1j})
        obj = json.loads(t.to_json())
        assert set(obj) == {"meta", "columns"}
        assert obj["columns"]["a"] == [1.0]


class TestConfig:
    def test_defaults(self, tmp_path, monkeypatch):
        monkeypatch.setenv(cli.OUTPUT_DIR_ENV, str(tmp_path))
        cfg = cli.build_config(["fringe"])
        assert cfg.output_path == tmp_path / "fringe.csv"
        assert cfg.parameters["points"] == 1001
        assert cfg.format == "csv"

    def test_format_from_suffix(self, tmp_path):
        assert cli.build_config(["critical", "-o", str(tmp_path / "a.json")]).format == "json"

    def test_flags_override_file(self, tmp_path):
        conf = tmp_path / "run.conf"
        conf.write_text("# comment\nzeta = 0.5\npoints = 11  # trailing\n")
        cfg = cli.build_config(["fringe", "--config", str(conf), "--points", "21"])
        assert cfg.parameters["zeta"] == 0.5
        assert cfg.parameters["points"] == 21

    def test_file_underscores(self, tmp_path):
        conf = tmp_path / "run.conf"
        conf.write_text("command = resonance\ngamma_e = 2\n")
        assert cli.build_config(["resonance", "--config", str(conf)]).parameters["gamma-e"] == 2.0

    def test_file_command_mismatch(self, tmp_path):
        conf = tmp_path / "run.conf"
        conf.write_text("command = fringe\n")
        with pytest.raises(cli.UsageError):
            cli.build_config(["farfield", "--config", str(conf)])

    def test_file_unknown_key(self, tmp_path):
        conf = tmp_path / "run.conf"
        conf.write_text("bogus = 1\n")
        with pytest.raises(cli.UsageError):
            cli.build_config(["fringe", "--config", str(conf)])

    def test_negative_values_as_separate_tokens(self):
        cfg = cli.build_config(["resonance", "--delta-range", "-5:5:11", "--delta", "-1"])
        assert cfg.parameters["delta-range"] == (-5.0, 5.0, 11)


class TestExamples:
    def test_farfield_cancellation(self, tmp_path):
        out = tmp_path / "ff.csv"
        run_ok(["farfield", "--d-over-lambda", "3", "--zeta", "-1", "--cut", "polar", "--phi", "0", "-o", str(out)])
        meta, cols = read_csv(out)
        assert all(float(v) == 0.0 for v in cols["generalized"])
        assert any(float(v) > 0.0 for v in cols["glauber"])
        assert meta["param.zeta"] == "-1"

    def test_fringe_visibility(self, tmp_path, capsys):
        out = tmp_path / "fr.csv"
        run_ok(["fringe", "--zeta", "0", "--phi", "0", "--points", "1001", "-o", str(out)])
        assert "visibility 1.0000" in capsys.readouterr().out
        meta, cols = read_csv(out)
        assert len(cols["x"]) == 1001
        assert float(meta["visibility_extracted"]) == pytest.approx(1.0, abs=1e-4)

    def test_resonance_critical(self, tmp_path):
        out = tmp_path / "res.json"
        run_ok(["resonance", "--gamma-e", "1", "--gamma-m", "1", "--gamma-i", "2", "--delta-range", "-10:10:801", "-o", str(out)])
        meta = json.loads(out.read_text())["meta"]
        assert meta["peak_absorption"] == pytest.approx(1.0, abs=1e-12)
        assert meta["peak_detuning"] == 0.0


class TestCommands:
    @pytest.mark.parametrize(
        "argv",
        [
            ["farfield", "--cut", "azimuthal", "--zeta", "0.5+0.5i"],
            ["fringe", "--alpha", "0.6", "--beta", "0.8i", "--zeta", "0.3"],
            ["povm", "--zeta", "0.2-0.4i"],
            ["bloch"],
            ["resonance", "--sweep", "ratio", "--gamma-i", "critical"],
            ["evolve", "--delta", "0.5"],
            ["critical"],
            ["sample", "--events", "5000", "--zeta", "0.5"],
        ],
    )
    def test_runs_and_embeds_parameters(self, tmp_path, argv):
        out = tmp_path / "out.csv"
        run_ok([*argv, "-o", str(out)])
        meta, cols = read_csv(out)
        assert meta["command"] == argv[0]
        for p in cli.PARAMS[argv[0]]:
            assert f"param.{p.name}" in meta
        assert all(len(v) == len(next(iter(cols.values()))) for v in cols.values())

    def test_povm_consistency_column(self, tmp_path):
        out = tmp_path / "povm.csv"
        run_ok(["povm", "--zeta", "0.3+0.9i", "-o", str(out)])
        _, cols = read_csv(out)
        trace = np.array(cols["trace"], dtype=float)
        np.testing.assert_allclose(trace, 2 * (1 + 0.09 + 0.81), rtol=1e-12)

    def test_sample_header(self, tmp_path):
        out = tmp_path / "ev.csv"
        run_ok(["sample", "--events", "1000", "--seed", "42", "--zeta", "0.25", "--phi", "0.5", "-o", str(out)])
        meta, cols = read_csv(out)
        assert list(cols) == ["x"]
        assert meta["seed"] == "42" and meta["n_events"] == "1000"
        assert meta["zeta"] == "0.25" and meta["phi"] == "0.5"
        assert float(meta["k"]) == pytest.approx(2 * math.pi)
        assert meta["rng"].startswith("numpy.random.PCG64")


class TestReproducibility:
    def test_byte_identical(self, tmp_path):
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        for out in (a, b):
            run_ok(["sample", "--events", "70000", "--seed", "3", "--zeta", "0.4", "-o", str(out)])
        assert a.read_bytes() == b.read_bytes()

    def test_workers_byte_identical(self, tmp_path):
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        run_ok(["sample", "--events", "140000", "--seed", "3", "-o", str(a)])
        run_ok(["sample", "--events", "140000", "--seed", "3", "--workers", "3", "-o", str(b)])
        # only the recorded worker count differs
        strip = lambda p: [l for l in p.read_text().splitlines() if not l.startswith("# param.workers")]
        assert strip(a) == strip(b)

    def test_flag_file_equivalence(self, tmp_path):
        flags = ["--gamma-e", "0.3", "--gamma-m", "0.7", "--gamma-i", "1.5", "--delta-range", "-4:4:81"]
        a, b = tmp_path / "a.json", tmp_path / "b.json"
        run_ok(["resonance", *flags, "-o", str(a)])
        conf = tmp_path / "res.conf"
        conf.write_text(f"command = resonance\ngamma_e = 0.3\ngamma-m = 0.7\ngamma-i = 1.5\ndelta-range = -4:4:81\noutput = {b}\n")
        run_ok(["resonance", "--config", str(conf)])
        assert a.read_bytes() == b.read_bytes()

    def test_metadata_reproduces_run(self, tmp_path):
        a = tmp_path / "a.csv"
        run_ok(["fringe", "--zeta", "0.5-0.25i", "--phi", "1.2", "--points", "101", "-o", str(a)])
        meta, _ = read_csv(a)
        conf = tmp_path / "replay.conf"
        conf.write_text("".join(f"{k[6:]} = {v}\n" for k, v in meta.items() if k.startswith("param.")))
        b = tmp_path / "b.csv"
        run_ok(["fringe", "--config", str(conf), "-o", str(b)])
        assert a.read_bytes() == b.read_bytes()

    def test_env_output_dir(self, tmp_path, monkeypatch):
        monkeypatch.setenv(cli.OUTPUT_DIR_ENV, str(tmp_path / "nested"))
        run_ok(["critical", "--points", "5"])
        assert (tmp_path / "nested" / "critical.csv").exists()


class TestExitCodes:
    @pytest.mark.parametrize(
        "argv",
        [
            [],
            ["nonsense"],
            ["fringe", "--zeta", "1+"],
            ["fringe", "--bogus", "1"],
            ["fringe", "--points", "ten"],
            ["resonance", "--delta-range", "5:-5:10"],
            ["fringe", "--format", "xml"],
            ["fringe", "--alpha", "1"],
        ],
    )
    def test_usage(self, argv, tmp_path, monkeypatch, capsys):
        monkeypatch.setenv(cli.OUTPUT_DIR_ENV, str(tmp_path))
        assert cli.main(argv) == 1
        assert "usage error" in capsys.readouterr().err

    @pytest.mark.parametrize(
        "argv",
        [
            ["farfield", "--points", "1"],
            ["fringe", "--points", "2"],
            ["evolve", "--dt", "1"],
            ["resonance", "--gamma-e", "0", "--gamma-m", "0", "--gamma-i", "0"],
            ["sample", "--events", "0"],
            ["fringe", "--e-field", "-1"],
        ],
    )
    def test_precondition(self, argv, tmp_path, monkeypatch, capsys):
        monkeypatch.setenv(cli.OUTPUT_DIR_ENV, str(tmp_path))
        assert cli.main(argv) == 2
        assert "precondition" in capsys.readouterr().err

    def test_io(self, tmp_path, capsys):
        blocker = tmp_path / "file"
        blocker.write_text("")
        assert cli.main(["critical", "-o", str(blocker / "sub" / "x.csv")]) == 3
        assert "I/O error" in capsys.readouterr().err

    def test_missing_config_file(self, tmp_path):
        assert cli.main(["fringe", "--config", str(tmp_path / "missing.conf")]) == 1
