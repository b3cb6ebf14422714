import json

import pytest

from isacsim.cli import main
from isacsim.dsp import read_pgm
from isacsim.manifest import read_manifest

DESK_CFG = """\
carrier_freq_hz = 3.5e9
bandwidth_hz = 1.0e7
sample_rate_hz = 1.0e7
sweep_time_s = 1.0e-5
slot_time_s = 2.0e-5
pri_s = 1.0e-3
tx_power_w = 1.0
noise_power_dbm = -100
sensing_gain_db = 25
comm_gain_db = 0
total_time_s = 1.0
num_targets = 1
num_users = 5
user_pathloss_db = -50,-50,-50,-50,-50
seed = 77
"""


@pytest.fixture
def cfg_file(tmp_path):
    path = tmp_path / "desk.cfg"
    path.write_text(DESK_CFG, encoding="utf-8")
    return str(path)


def manifest_of(out_dir):
    return (out_dir / "manifest.json").read_text()


class TestHelp:
    @pytest.mark.parametrize(
        "cmd", ["spectrogram", "dataset", "calibrate", "fit", "region", "pipeline"]
    )
    def test_help_exits_zero(self, cmd, capsys):
        with pytest.raises(SystemExit) as exc:
            main([cmd, "--help"])
        assert exc.value.code == 0
        assert "--" in capsys.readouterr().out

    def test_top_level_help(self, capsys):
        with pytest.raises(SystemExit) as exc:
            main(["--help"])
        assert exc.value.code == 0


class TestSpectrogram:
    def test_writes_pgm_and_manifest(self, cfg_file, tmp_path):
        out = tmp_path / "out"
        code = main([
            "spectrogram", "--config", cfg_file, "--out", str(out),
            "--cycles", "256", "--stft-window", "64", "--z-csv", "--tracks-csv",
            "--motion", "walking", "--start", "1.5", "4.0", "0.0",
            "--heading", "0", "-1",
        ])
        assert code == 0
        gray = read_pgm(out / "spectrogram.pgm")
        assert gray.shape == (64, 256 - 64 + 1)
        manifest = read_manifest(out / "manifest.json")
        names = {a["file"] for a in manifest.artifacts}
        assert names == {"spectrogram.pgm", "zmatrix.csv", "tracks.csv"}

    def test_same_seed_same_hashes(self, cfg_file, tmp_path):
        args = ["spectrogram", "--config", cfg_file, "--cycles", "192",
                "--stft-window", "64", "--seed", "5"]
        out1, out2 = tmp_path / "a", tmp_path / "b"
        assert main(args + ["--out", str(out1)]) == 0
        assert main(args + ["--out", str(out2)]) == 0
        m1 = json.loads(manifest_of(out1))
        m2 = json.loads(manifest_of(out2))
        assert m1["artifacts"] == m2["artifacts"]

    def test_bad_config_exit_2(self, tmp_path, capsys):
        bad = tmp_path / "bad.cfg"
        bad.write_text("carrier_freq_hz = fast\n")
        code = main(["spectrogram", "--config", str(bad), "--out",
                     str(tmp_path / "o")])
        assert code == 2
        assert "configuration error" in capsys.readouterr().err

    def test_missing_config_exit_2(self, tmp_path):
        code = main(["spectrogram", "--config", str(tmp_path / "nope.cfg"),
                     "--out", str(tmp_path / "o")])
        assert code == 2


class TestDataset:
    def test_writes_samples_and_labels(self, cfg_file, tmp_path):
        out = tmp_path / "ds"
        code = main([
            "dataset", "--config", cfg_file, "--out", str(out),
            "--classes", "motions3", "--n-per-class", "2",
            "--cycles", "128", "--stft-window", "32",
        ])
        assert code == 0
        assert len(list(out.glob("*.pgm"))) == 6
        labels = (out / "labels.csv").read_text().splitlines()
        assert labels[0] == "file,label,C,seed"
        assert len(labels) == 7


class TestCalibrate:
    def test_self_calibration_smoke(self, cfg_file, tmp_path, capsys):
        # Tiny grid around the generating rate; a smoke-scale version of
        # the full acceptance experiment.
        ref_dir = tmp_path / "ref"
        code = main([
            "dataset", "--config", cfg_file, "--out", str(ref_dir),
            "--classes", "motions3", "--n-per-class", "1",
            "--cycles", "256", "--stft-window", "64", "--rho", "0.997",
        ])
        assert code == 0
        out = tmp_path / "cal"
        code = main([
            "calibrate", "--config", cfg_file, "--out", str(out),
            "--reference", str(ref_dir), "--cycles", "256",
            "--stft-window", "64", "--grid-start", "0.95",
            "--grid-stop", "1.0", "--grid-step", "0.025",
            "--samples-per-point", "2",
        ])
        assert code == 0
        printed = capsys.readouterr().out
        assert "rho_star" in printed
        lines = (out / "rho_kl.csv").read_text().splitlines()
        assert lines[0] == "rho,kl"
        assert len(lines) == 4  # 0.95, 0.975, 1.0


class TestFit:
    def test_bundled_points_rank_pow3_top2(self, tmp_path, capsys):
        out = tmp_path / "fit"
        code = main(["fit", "--out", str(out)])
        assert code == 0
        lines = (out / "fits.csv").read_text().splitlines()
        families = [row.split(",")[0] for row in lines[1:]]
        assert "pow3" in families[:2]
        assert (out / "curve_best.csv").exists()
        assert "ranking" in capsys.readouterr().out

    def test_custom_points(self, tmp_path):
        pts = tmp_path / "points.csv"
        pts.write_text("C,A\n100,0.5\n200,0.7\n400,0.8\n800,0.85\n")
        out = tmp_path / "fit"
        assert main(["fit", "--points", str(pts), "--out", str(out),
                     "--families", "pow3,ilog2"]) == 0
        lines = (out / "fits.csv").read_text().splitlines()
        assert len(lines) == 3


class TestRegion:
    def test_boundary_csv_with_three_zones(self, cfg_file, tmp_path, capsys):
        out = tmp_path / "region"
        code = main([
            "region", "--config", cfg_file, "--out", str(out),
            "--num-points", "300", "--seed", "3",
        ])
        assert code == 0
        lines = (out / "boundary.csv").read_text().splitlines()
        assert lines[0] == "C,A,R_bps,zone"
        zones = [row.split(",")[3] for row in lines[1:]]
        bands = [zones[0]]
        for z in zones[1:]:
            if z != bands[-1]:
                bands.append(z)
        assert bands == ["comm_saturation", "adversarial", "sensing_saturation"]

    def test_infeasible_exit_4(self, tmp_path, capsys):
        cfg = tmp_path / "tiny.cfg"
        cfg.write_text(DESK_CFG.replace("total_time_s = 1.0",
                                        "total_time_s = 1.0e-3"))
        code = main(["region", "--config", str(cfg), "--out",
                     str(tmp_path / "r")])
        assert code == 4
        assert "infeasible" in capsys.readouterr().err


class TestPipeline:
    def test_runs_and_reproduces_manifest(self, cfg_file, tmp_path):
        args = [
            "pipeline", "--config", cfg_file, "--seed", "9",
            "--classes", "motions3", "--n-train", "4", "--n-test", "2",
            "--cycles-list", "64,96", "--stft-window", "32",
            "--num-points", "60",
        ]
        out1, out2 = tmp_path / "p1", tmp_path / "p2"
        assert main(args + ["--out", str(out1)]) == 0
        assert main(args + ["--out", str(out2)]) == 0
        m1 = json.loads(manifest_of(out1))
        m2 = json.loads(manifest_of(out2))
        assert m1["artifacts"] == m2["artifacts"]
        assert {a["file"] for a in m1["artifacts"]} == {
            "accuracy.csv", "fits.csv", "boundary.csv"
        }
