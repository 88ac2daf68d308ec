import numpy as np
import pytest

from nn3d import ConfigError, ContinuousGrid, DiscreteGrid, GroupTable, load_plane, save_plane
from nn3d.cli import main, parse_config_file, parse_grid

from conftest import seeded_plane


def run_cli(capsys, *argv):
    code = main(list(argv))
    captured = capsys.readouterr()
    return code, captured.out, captured.err


class TestParseHelpers:
    def test_config_file(self, tmp_path):
        cfg = tmp_path / "run.cfg"
        cfg.write_text(
            "# a comment\n"
            "sigma = 50\n"
            "tau_schedule = 12.5,6.25  # inline comment\n"
            "denoiser = dct8\n"
            "\n"
        )
        values = parse_config_file(cfg)
        assert values == {"sigma": "50", "tau_schedule": "12.5,6.25",
                          "denoiser": "dct8"}

    def test_config_file_unknown_key(self, tmp_path):
        cfg = tmp_path / "run.cfg"
        cfg.write_text("wat = 1\n")
        with pytest.raises(ConfigError):
            parse_config_file(cfg)

    def test_parse_grid_forms(self):
        assert parse_grid("0:75") == ContinuousGrid(0.0, 75.0)
        assert parse_grid("15,30,50") == DiscreteGrid((15.0, 30.0, 50.0))
        assert parse_grid("wdncnn") == DiscreteGrid((15.0, 30.0, 50.0))


class TestDenoiseCommand:
    def test_happy_path(self, tmp_path, capsys):
        src = tmp_path / "in.pgm"
        save_plane(seeded_plane((48, 48), seed=1), src, format="pgm8")
        out = tmp_path / "out.pgm"
        code, _, err = run_cli(capsys, "denoise", str(src), str(out), "--sigma", "50")
        assert code == 0, err
        assert out.exists()
        assert load_plane(out).shape == (48, 48)

    def test_identity_zero_tau_roundtrips_bytes(self, tmp_path, capsys):
        src = tmp_path / "in.pgm"
        save_plane(seeded_plane((48, 48), seed=2), src, format="pgm8")
        out = tmp_path / "out.pgm"
        code, _, err = run_cli(
            capsys, "denoise", str(src), str(out),
            "--sigma", "50", "--denoiser", "identity", "--tau", "0,0",
        )
        assert code == 0, err
        assert out.read_bytes() == src.read_bytes()

    def test_trace_goes_to_stderr(self, tmp_path, capsys):
        src = tmp_path / "in.pgm"
        save_plane(seeded_plane((48, 48), seed=3), src, format="pgm8")
        out = tmp_path / "out.npf"
        code, _, err = run_cli(
            capsys, "denoise", str(src), str(out), "--sigma", "25", "--trace"
        )
        assert code == 0
        assert err.count('"k":') == 2

    def test_missing_input_names_path(self, tmp_path, capsys):
        out = tmp_path / "out.pgm"
        code, _, err = run_cli(
            capsys, "denoise", str(tmp_path / "absent.pgm"), str(out), "--sigma", "50"
        )
        assert code == 1
        assert "absent.pgm" in err

    def test_config_file_with_flag_override(self, tmp_path, capsys):
        src = tmp_path / "in.pgm"
        save_plane(seeded_plane((48, 48), seed=4), src, format="pgm8")
        cfg = tmp_path / "run.cfg"
        cfg.write_text("sigma = 25\ndenoiser = identity\ntau_schedule = 0,0\n"
                       "schedule_mode = lab\n")
        out = tmp_path / "out.pgm"
        code, _, err = run_cli(
            capsys, "denoise", str(src), str(out), "--config", str(cfg)
        )
        assert code == 0, err
        assert out.read_bytes() == src.read_bytes()

    def test_invalid_schedule_is_a_cli_error(self, tmp_path, capsys):
        src = tmp_path / "in.pgm"
        save_plane(seeded_plane((48, 48), seed=5), src, format="pgm8")
        code, _, err = run_cli(
            capsys, "denoise", str(src), str(tmp_path / "o.pgm"),
            "--sigma", "50", "--lambda", "0.5,0.25",
        )
        assert code == 1
        assert "lambda" in err


class TestBenchCommand:
    def test_writes_csv_and_means(self, tmp_path, capsys):
        images = tmp_path / "imgs"
        images.mkdir()
        save_plane(np.full((48, 48), 100.0), images / "a.pgm", format="pgm8")
        out = tmp_path / "report.csv"
        code, stdout, err = run_cli(
            capsys, "bench", "--images", str(images), "--sigmas", "25",
            "--seed", "11", "--methods", "noisy,nlf-only", "--out", str(out),
        )
        assert code == 0, err
        text = out.read_text()
        assert text.startswith("# nn3d bench csv v1\n")
        assert "a.pgm" in text
        assert "mean dataset=imgs sigma=25 method=noisy" in stdout

    def test_no_timings_byte_stable(self, tmp_path, capsys):
        images = tmp_path / "imgs"
        images.mkdir()
        save_plane(np.full((48, 48), 100.0), images / "a.pgm", format="pgm8")
        outputs = []
        for name in ("r1.csv", "r2.csv"):
            out = tmp_path / name
            code, _, err = run_cli(
                capsys, "bench", "--images", str(images), "--sigmas", "25",
                "--seed", "11", "--methods", "noisy,cnnf-only",
                "--out", str(out), "--no-timings",
            )
            assert code == 0, err
            outputs.append(out.read_bytes())
        assert outputs[0] == outputs[1]

    def test_missing_directory_fails(self, tmp_path, capsys):
        code, _, err = run_cli(
            capsys, "bench", "--images", str(tmp_path / "nope"), "--sigmas", "25"
        )
        assert code == 1


class TestMakeFixturesCommand:
    def test_generates_corpus(self, tmp_path, capsys):
        outdir = tmp_path / "corpus"
        code, stdout, _ = run_cli(capsys, "make-fixtures", str(outdir))
        assert code == 0
        paths = sorted(outdir.glob("*.pgm"))
        names = [p.name for p in paths]
        assert len([n for n in names if n.startswith("stripes_")]) == 5
        assert len([n for n in names if n.startswith("checker_")]) == 2
        assert "constant.pgm" in names

    def test_stripes_rows_identical(self, tmp_path, capsys):
        outdir = tmp_path / "corpus"
        run_cli(capsys, "make-fixtures", str(outdir))
        for path in outdir.glob("stripes_*.pgm"):
            plane = load_plane(path)
            assert np.array_equal(plane, np.tile(plane[0], (plane.shape[0], 1)))

    def test_checker_period8_blocks_identical(self, tmp_path, capsys):
        outdir = tmp_path / "corpus"
        run_cli(capsys, "make-fixtures", str(outdir))
        plane = load_plane(outdir / "checker_p08.pgm")
        assert np.array_equal(plane[0:10, 0:10], plane[8:18, 8:18])

    def test_deterministic_bytes(self, tmp_path, capsys):
        d1, d2 = tmp_path / "c1", tmp_path / "c2"
        run_cli(capsys, "make-fixtures", str(d1))
        run_cli(capsys, "make-fixtures", str(d2))
        for p1 in sorted(d1.glob("*.pgm")):
            p2 = d2 / p1.name
            assert p1.read_bytes() == p2.read_bytes()


class TestBmDumpCommand:
    def test_writes_loadable_sidecar(self, tmp_path, capsys):
        src = tmp_path / "in.pgm"
        save_plane(seeded_plane((40, 40), seed=6), src, format="pgm8")
        out = tmp_path / "table.gt"
        code, stdout, err = run_cli(capsys, "bm-dump", str(src), str(out))
        assert code == 0, err
        table = GroupTable.load(out)
        assert len(table) == 49  # 7x7 reference grid on 40x40
        assert "49 groups" in stdout
