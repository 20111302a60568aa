import json
import math

import numpy as np
import pytest

from qlekit import cli, field, io
from qlekit.errors import InvalidArgument, QleError


def run(tmp_path, *argv):
    return cli.main([*argv, "--out", str(tmp_path)])


def test_maps_phi_prints_one(tmp_path, capsys):
    assert run(tmp_path, "maps", "phi", "--n", "0", "--m", "0") == 0
    assert capsys.readouterr().out.strip() == "1"
    header, rows = io.read_csv(tmp_path / "phi.csv")
    assert header == ["n", "m", "phi"] and rows == [["0", "0", "1"]]


def test_loewner_forward_swallows_probe(tmp_path, capsys):
    assert run(tmp_path, "loewner", "forward", "--uniform", "--T", "1", "--probe", "0.5") == 0
    out = capsys.readouterr().out
    assert "swallowed=true" in out
    header, rows = io.read_csv(tmp_path / "loewner.csv")
    assert header == ["z_re", "z_im", "image_re", "image_im", "log_abs_deriv",
                      "swallowed", "swallow_time"]
    row = dict(zip(header, rows[0]))
    assert row["swallowed"] == "true"
    assert abs(float(row["swallow_time"]) - math.log(2)) < 1e-8
    assert abs(complex(float(row["image_re"]), float(row["image_im"]))) == pytest.approx(1, abs=1e-8)


def test_scaling_curves_rows(tmp_path):
    assert run(tmp_path, "scaling", "curves") == 0
    header, rows = io.read_csv(tmp_path / "curves.csv")
    assert header == ["gamma2", "upper_eta", "middle_eta", "trivial_eta"]
    assert len(rows) == 48
    spot = [r for r in rows if float(r[0]) == pytest.approx(8 / 3)][0]
    assert [float(x) for x in spot[1:]] == [0.625, 0.0, -1.0]


def test_manifest_written(tmp_path):
    assert run(tmp_path, "maps", "phi", "--n", "2", "--m", "1", "--seed", "3") == 0
    man = json.loads((tmp_path / "manifest.json").read_text())
    assert man["subcommand"] == "maps" and man["seed"] == 3
    assert man["manifest_version"] == 1
    assert "out" not in man["params"]
    assert any(p.endswith("phi.csv") for p in man["outputs"])


def test_invalid_usage_exit_one(tmp_path):
    assert run(tmp_path, "nonsense") == 1
    assert run(tmp_path, "maps", "phi", "--n", "-1") == 1
    assert run(tmp_path, "grow", "eden", "--jobs", "0") == 1


def test_numerical_failure_exit_two(tmp_path, monkeypatch):
    def boom(args, out):
        raise QleError("refit diverged")

    monkeypatch.setitem(cli.COMMANDS, "scaling", boom)
    assert run(tmp_path, "scaling", "curves") == 2


def test_config_file(tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("# comment\nn = 3\nm = 1\n")
    assert run(tmp_path, "maps", "phi", "--config", str(cfg)) == 0
    _, rows = io.read_csv(tmp_path / "phi.csv")
    assert rows[0][:2] == ["3", "1"]
    cfg.write_text("bogus = 1\n")
    assert run(tmp_path, "maps", "phi", "--config", str(cfg)) == 1


def test_same_seed_same_bytes(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    args = ["grow", "eden", "--n", "9", "--steps", "15", "--runs", "2", "--seed", "5"]
    assert cli.main(args + ["--out", str(a)]) == 0
    assert cli.main(args + ["--out", str(b)]) == 0
    assert (a / "growth.csv").read_bytes() == (b / "growth.csv").read_bytes()


def test_jobs_do_not_change_output(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    args = ["grow", "dla", "--n", "9", "--steps", "10", "--runs", "3", "--seed", "7"]
    assert cli.main(args + ["--jobs", "1", "--out", str(a)]) == 0
    assert cli.main(args + ["--jobs", "2", "--out", str(b)]) == 0
    assert (a / "growth.csv").read_bytes() == (b / "growth.csv").read_bytes()


def test_json_format(tmp_path):
    assert run(tmp_path, "scaling", "table", "--format", "json") == 0
    obj = json.loads((tmp_path / "dimension.json").read_text())
    assert obj["columns"] == ["kappa", "gamma", "Q", "d"]
    assert len(obj["rows"]) > 0


def test_png_output(tmp_path):
    pytest.importorskip("PIL")
    assert run(tmp_path, "gff-sample", "--n", "17", "--format", "png") == 0
    pngs = list(tmp_path.glob("*.png"))
    assert pngs and pngs[0].read_bytes()[:8] == b"\x89PNG\r\n\x1a\n"


def test_selftest_single_criterion(tmp_path):
    assert run(tmp_path, "selftest", "--only", "12") == 0
    _, rows = io.read_csv(tmp_path / "selftest.csv")
    assert len(rows) == 1 and rows[0][2] == "true"


def test_field_snapshot_round_trip(tmp_path):
    f = field.sample_dgff(9, seed=4)
    p = io.save_field(tmp_path / "f.bin", f)
    g = io.load_field(p)
    assert np.array_equal(f.values, g.values)
    assert (g.n, g.bc, g.seed) == (f.n, f.bc, f.seed)
    (tmp_path / "junk.bin").write_bytes(b"nope\n")
    with pytest.raises(InvalidArgument):
        io.load_field(tmp_path / "junk.bin")


def test_ppm_header(tmp_path):
    img = np.zeros((3, 5, 3), np.uint8)
    data = (io.write_ppm(tmp_path / "x.ppm", img)).read_bytes()
    assert data.startswith(b"P6\n5 3\n255\n") and len(data) == 11 + 45
    with pytest.raises(InvalidArgument):
        io.write_ppm(tmp_path / "y.ppm", np.zeros((3, 5)))


def test_csv_cells(tmp_path):
    io.write_csv(tmp_path / "t.csv", ["a", "b", "c"], [(True, 0.1, 3)])
    assert (tmp_path / "t.csv").read_text() == "a,b,c\ntrue,0.1,3\n"


def test_read_config_keeps_case(tmp_path):
    p = tmp_path / "c.cfg"
    p.write_text("Kappa = 6\n; note\nT=0.5\n")
    assert io.read_config(p) == {"Kappa": "6", "T": "0.5"}
