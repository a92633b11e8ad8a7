import csv
import json
import math
import os

import numpy as np
import pytest

from cli import EXIT_CHECK_FAILED, EXIT_PASS, EXIT_USAGE, main
from familygen import FamilyPair
from fungrid import SampledFunction, UniformGrid, load_csv
from polyline import save_vector
from smoothcurve import curve_from_angle, turning_angle

GAPPED_FLAGS = ["--degree", "3", "--gap-modulus", "4", "--generator", "exp+2x", "--seed", "7",
                "--lambdas", "0,0.1,0.2,0.3,0.4,0.5,0.6,0.7"]


def write_pair(path, k, f, n=256):
    grid = UniformGrid(n)
    FamilyPair(SampledFunction.constant(grid, k), SampledFunction.constant(grid, f)).save(str(path))
    return str(path)


@pytest.fixture
def hexagon_file(tmp_path):
    path = tmp_path / "hexagon.txt"
    save_vector([math.pi / 3] * 5, str(path))
    return str(path)


@pytest.fixture(scope="module")
def circle_pair(tmp_path_factory):
    out = tmp_path_factory.mktemp("circle")
    assert main(["construct", "--degree", "1", "--gap-modulus", "2", "--grid", "1024", "--out", str(out)]) == EXIT_PASS
    return str(out / "pair.txt")


class TestConstruct:
    def test_circle(self, circle_pair):
        pair = FamilyPair.load(circle_pair)
        assert pair.provenance["harmonic"] == "2"
        assert pair.grid.n_samples == 1024

    def test_gap_modulus_one(self, tmp_path, capsys):
        assert main(["construct", "--gap-modulus", "1", "--out", str(tmp_path)]) == EXIT_USAGE
        assert "gap modulus" in capsys.readouterr().err

    def test_unknown_flag(self, tmp_path):
        assert main(["construct", "--shape", "blob", "--out", str(tmp_path)]) == EXIT_USAGE

    def test_unknown_command(self):
        assert main(["draw"]) == EXIT_USAGE

    def test_gapped_construct_then_verify(self, tmp_path, capsys):
        out = tmp_path / "gapped"
        assert main(["construct", *GAPPED_FLAGS, "--out", str(out)]) == EXIT_PASS
        assert (out / "curve.txt").exists()
        summary = capsys.readouterr().out
        assert "pair written" in summary
        assert main(["verify", str(out / "pair.txt"), "--lambdas", "0,0.1,0.2,0.3,0.4,0.5,0.6,0.7",
                     "--out", str(tmp_path / "verify")]) == EXIT_PASS
        assert (tmp_path / "verify" / "moments.csv").exists()
        assert (tmp_path / "verify" / "levels.csv").exists()

    def test_seeded_runs_are_identical(self, tmp_path):
        for name in ("a", "b"):
            assert main(["construct", "--degree", "3", "--gap-modulus", "4", "--seed", "11", "--grid", "1024",
                         "--out", str(tmp_path / name)]) == EXIT_PASS
        assert (tmp_path / "a" / "pair.txt").read_bytes() == (tmp_path / "b" / "pair.txt").read_bytes()

    def test_construct_writes_sample_csvs(self, circle_pair):
        pair = FamilyPair.load(circle_pair)
        out = os.path.dirname(circle_pair)
        k, f = load_csv(os.path.join(out, "k.csv")), load_csv(os.path.join(out, "f.csv"))
        assert k.grid == pair.grid
        np.testing.assert_array_equal(k.values, pair.k.values)
        np.testing.assert_array_equal(f.values, pair.f.values)


class TestVerifyAndScan:
    def test_open_family_fails(self, tmp_path):
        pair = write_pair(tmp_path / "pair.txt", 1.0, 1.0)
        out = tmp_path / "out"
        assert main(["verify", pair, "--out", str(out)]) == EXIT_CHECK_FAILED
        with open(out / "scan.csv") as handle:
            rows = {float(r["lambda"]): float(r["defect"]) for r in csv.DictReader(handle)}
        assert rows[0.5] == pytest.approx(4 / 3, abs=1e-9)
        assert rows[0.0] == pytest.approx(0.0, abs=1e-9)

    def test_trivial_family_passes(self, tmp_path, capsys):
        pair = write_pair(tmp_path / "pair.txt", 1.0, 0.0)
        assert main(["verify", pair, "--out", str(tmp_path / "out")]) == EXIT_PASS
        assert "skipped" in capsys.readouterr().out

    def test_scan(self, tmp_path, circle_pair):
        assert main(["scan", circle_pair, "--out", str(tmp_path)]) == EXIT_PASS
        with open(tmp_path / "scan.csv") as handle:
            assert len(list(csv.DictReader(handle))) == 21

    def test_malformed_pair(self, tmp_path, capsys):
        path = tmp_path / "pair.txt"
        path.write_text("grid=64\nk=1,2\nf=0,0\n")
        assert main(["verify", str(path), "--out", str(tmp_path / "out")]) == EXIT_USAGE
        assert "line 2" in capsys.readouterr().out

    def test_missing_pair(self, tmp_path):
        assert main(["scan", str(tmp_path / "absent.txt"), "--out", str(tmp_path)]) == EXIT_USAGE


class TestDiscrete:
    def test_hexagon(self, tmp_path, hexagon_file):
        assert main(["discrete", hexagon_file, "--out", str(tmp_path)]) == EXIT_PASS
        balance = json.loads((tmp_path / "balance.json").read_text())
        assert [b["subset"] for b in balance["balanced"]] == [[2, 5], [3, 6], [2, 4, 6], [2, 3, 5, 6]]

    def test_hexagon_family(self, tmp_path, hexagon_file):
        assert main(["discrete", hexagon_file, "--family", "--subset", "2,5", "--out", str(tmp_path)]) == EXIT_PASS
        assert (tmp_path / "discrete_scan.csv").exists()
        assert (tmp_path / "f.txt").exists()

    def test_no_balanced(self, tmp_path):
        assert main(["discrete", "--no-balanced", "n=3", "--out", str(tmp_path)]) == EXIT_PASS
        assert json.loads((tmp_path / "balance.json").read_text())["balanced"] == []
        assert (tmp_path / "polyline.txt").exists()

    def test_open_polyline_family(self, tmp_path):
        path = tmp_path / "k.txt"
        save_vector([math.pi / 2, math.pi, 0.3], str(path))
        assert main(["discrete", str(path), "--family", "--out", str(tmp_path / "out")]) == EXIT_CHECK_FAILED

    def test_unbalanced_subset(self, tmp_path, hexagon_file):
        assert main(["discrete", hexagon_file, "--family", "--subset", "2,3",
                     "--out", str(tmp_path)]) == EXIT_CHECK_FAILED

    def test_search_cap(self, tmp_path):
        path = tmp_path / "k.txt"
        save_vector([0.1] * 23, str(path))
        assert main(["discrete", str(path), "--out", str(tmp_path / "out")]) == EXIT_USAGE

    def test_needs_input(self, tmp_path):
        assert main(["discrete", "--out", str(tmp_path)]) == EXIT_USAGE


class TestRender:
    def test_circle_frames(self, tmp_path, circle_pair):
        assert main(["render", circle_pair, "--lambdas", "0,0.5", "--out", str(tmp_path)]) == EXIT_PASS
        assert sorted(p.name for p in tmp_path.glob("*.svg")) == ["frame_000.svg", "frame_001.svg"]

    def test_gapped_pair_sweep_frames_are_closed(self, tmp_path):
        out = tmp_path / "gapped"
        assert main(["construct", *GAPPED_FLAGS, "--out", str(out)]) == EXIT_PASS
        lambdas = [round(0.1 * i, 10) for i in range(8)]
        assert main(["render", str(out / "pair.txt"), "--lambdas", ",".join(str(x) for x in lambdas),
                     "--out", str(tmp_path / "frames")]) == EXIT_PASS
        assert len(list((tmp_path / "frames").glob("frame_*.svg"))) == 8
        pair = FamilyPair.load(str(out / "pair.txt"))
        theta, phi = turning_angle(pair.k), turning_angle(pair.f)
        for lam in lambdas:
            curve = curve_from_angle(theta.with_values(theta.values + lam * phi.values))
            assert np.hypot(*curve.endpoint) <= 1e-7

    def test_deterministic(self, tmp_path, circle_pair):
        for name in ("a", "b"):
            assert main(["render", circle_pair, "--lambdas", "0.5", "--out", str(tmp_path / name)]) == EXIT_PASS
        assert (tmp_path / "a" / "frame_000.svg").read_bytes() == (tmp_path / "b" / "frame_000.svg").read_bytes()

    def test_hexagon_family_dashes_subset(self, tmp_path, hexagon_file):
        assert main(["render", hexagon_file, "--family", "--lambdas", "0,0.5,1",
                     "--out", str(tmp_path)]) == EXIT_PASS
        assert len(list(tmp_path.glob("frame_*.svg"))) == 3
        assert "stroke-dasharray" in (tmp_path / "frame_001.svg").read_text()

    def test_montage(self, tmp_path, circle_pair):
        assert main(["render", circle_pair, "--lambdas", "0,0.25,0.5", "--montage",
                     "--out", str(tmp_path)]) == EXIT_PASS
        assert [p.name for p in tmp_path.glob("*.svg")] == ["montage.svg"]

    def test_open_pair_needs_force(self, tmp_path):
        pair = write_pair(tmp_path / "pair.txt", 1.0, 1.0)
        assert main(["render", pair, "--lambdas", "0,0.5", "--out", str(tmp_path / "a")]) == EXIT_CHECK_FAILED
        assert main(["render", pair, "--lambdas", "0,0.5", "--force", "--out", str(tmp_path / "b")]) == EXIT_PASS

    def test_no_balanced_polyline(self, tmp_path):
        assert main(["render", "--no-balanced", "2", "--out", str(tmp_path)]) == EXIT_PASS
        assert (tmp_path / "frame_000.svg").exists()
