import json

import numpy as np
import pytest

from gmpool.cli import main

BOV_SUM_CONFIG = {
    "encoder": {"type": "bov", "centroids": [[0.0, 0.0], [5.0, 5.0], [9.0, 9.0]]},
    "pooling": {"type": "sum"},
    "post": [],
    "seed": 0,
}

DESCRIPTORS_CSV = (
    "img_one,3,2\n"
    "0.1,0.0\n"
    "0.0,0.2\n"
    "5.1,4.9\n"
    "img_two,2,2\n"
    "9.0,9.1\n"
    "8.9,9.0\n"
)


@pytest.fixture
def pool_files(tmp_path):
    descs = tmp_path / "descs.csv"
    descs.write_text(DESCRIPTORS_CSV)
    config = tmp_path / "config.json"
    config.write_text(json.dumps(BOV_SUM_CONFIG))
    out = tmp_path / "pooled.csv"
    return descs, config, out


class TestPoolCommand:
    def test_known_count_vectors(self, pool_files):
        descs, config, out = pool_files
        assert main(["pool", str(descs), "--config", str(config), "--output", str(out)]) == 0
        lines = out.read_text().splitlines()
        assert lines[0].startswith("# pipeline: encoder=bov pooling=sum")
        assert lines[1] == "img_one,2,1,0"
        assert lines[2] == "img_two,0,0,2"

    def test_byte_identical_reruns(self, pool_files, tmp_path):
        descs, config, out = pool_files
        other = tmp_path / "pooled2.csv"
        main(["pool", str(descs), "--config", str(config), "--output", str(out)])
        main(["pool", str(descs), "--config", str(config), "--output", str(other)])
        assert out.read_bytes() == other.read_bytes()

    def test_jobs_do_not_change_output(self, pool_files, tmp_path):
        descs, config, out = pool_files
        other = tmp_path / "pooled_jobs.csv"
        main(["pool", str(descs), "--config", str(config), "--output", str(out)])
        main(
            ["pool", str(descs), "--config", str(config), "--output", str(other),
             "--jobs", "4"]
        )
        assert out.read_bytes() == other.read_bytes()

    def test_env_var_overrides_jobs(self, pool_files, tmp_path, monkeypatch, capsys):
        descs, config, out = pool_files
        monkeypatch.setenv("GMP_POOL_JOBS", "not-a-number")
        assert main(
            ["pool", str(descs), "--config", str(config), "--output", str(out),
             "--jobs", "1"]
        ) == 2
        assert "GMP_POOL_JOBS" in capsys.readouterr().err

    def test_env_var_wins_over_flag(self, pool_files, monkeypatch):
        descs, config, out = pool_files
        monkeypatch.setenv("GMP_POOL_JOBS", "2")
        assert main(
            ["pool", str(descs), "--config", str(config), "--output", str(out),
             "--jobs", "1"]
        ) == 0
        assert out.exists()

    def test_malformed_row_exits_with_line(self, pool_files, capsys):
        descs, config, out = pool_files
        descs.write_text("img,2,2\n0.0,0.0\nbroken_row\n")
        code = main(["pool", str(descs), "--config", str(config), "--output", str(out)])
        assert code == 2
        assert "line 3" in capsys.readouterr().err

    def test_dimension_mismatch_names_image(self, pool_files, capsys):
        descs, config, out = pool_files
        descs.write_text("img_bad,1,3\n0.0,0.0,0.0\n")
        code = main(["pool", str(descs), "--config", str(config), "--output", str(out)])
        assert code == 2
        assert "img_bad" in capsys.readouterr().err

    def test_gmp_pipeline_with_post(self, pool_files):
        descs, config, out = pool_files
        cfg = {
            "encoder": {"type": "vlad", "centroids": [[0.0, 0.0], [5.0, 5.0], [9.0, 9.0]]},
            "pooling": {"type": "gmp", "lambda": 10.0},
            "post": [{"type": "power", "rho": 0.5}, {"type": "l2"}],
            "seed": 1,
        }
        config.write_text(json.dumps(cfg))
        assert main(["pool", str(descs), "--config", str(config), "--output", str(out)]) == 0
        lines = out.read_text().splitlines()
        assert "gmp(lambda=10)" in lines[0]
        assert "power(0.5)|l2" in lines[0]
        values = np.array([float(v) for v in lines[1].split(",")[1:]])
        assert np.linalg.norm(values) == pytest.approx(1.0, abs=1e-9)

    def test_seed_override_in_metadata(self, pool_files):
        descs, config, out = pool_files
        main(
            ["pool", str(descs), "--config", str(config), "--output", str(out),
             "--seed", "42"]
        )
        assert "seed=42" in out.read_text().splitlines()[0]

    def test_emk_max_pipeline(self, pool_files):
        descs, config, out = pool_files
        cfg = {
            "encoder": {"type": "emk", "dim": 32, "sigma": 1.0},
            "pooling": {"type": "max"},
            "post": [{"type": "l2"}],
            "seed": 5,
        }
        config.write_text(json.dumps(cfg))
        assert main(["pool", str(descs), "--config", str(config), "--output", str(out)]) == 0
        lines = out.read_text().splitlines()
        assert "pooling=max" in lines[0]
        assert len(lines[1].split(",")) == 1 + 32  # image_id + emk dims


class TestKdeDemoCommand:
    def test_output_properties(self, tmp_path):
        out = tmp_path / "kde.csv"
        assert main(["kde-demo", "--output", str(out)]) == 0
        lines = out.read_text().splitlines()
        assert lines[0] == "x,kde,kde_pow_renorm,weighted_kde"
        assert len(lines) == 1001 + 1  # grid rows + header

        data = np.array([[float(v) for v in line.split(",")] for line in lines[1:]])
        x, kde, powered, weighted = data.T

        # equalized curve hits 1 at every sample abscissa
        for s in (-11.0, -10.0, 7.0, 8.0, 9.0):
            i = int(np.argmin(np.abs(x - s)))
            assert weighted[i] == pytest.approx(1.0, abs=1e-8)

        # plain density stays bimodal
        maxima = np.nonzero((kde[1:-1] > kde[:-2]) & (kde[1:-1] > kde[2:]))[0]
        assert maxima.size == 2

        # the 0.5-power curve is renormalized to unit mass on the grid
        assert np.trapezoid(powered, x) == pytest.approx(1.0, rel=1e-9)

    def test_deterministic(self, tmp_path):
        a = tmp_path / "a.csv"
        b = tmp_path / "b.csv"
        main(["kde-demo", "--output", str(a)])
        main(["kde-demo", "--output", str(b)])
        assert a.read_bytes() == b.read_bytes()


class TestBenchCommand:
    SPEC = {
        "classes": 3,
        "images_per_class": 4,
        "descriptors_per_image": 24,
        "background_fraction": 0.9,
        "descriptor_dim": 4,
        "noise_scale": 0.25,
        "seed": 0,
        "encoder": {"type": "emk", "dim": 64, "sigma": 1.0},
    }

    def test_report_format_and_determinism(self, tmp_path):
        spec = tmp_path / "spec.json"
        spec.write_text(json.dumps(self.SPEC))
        a = tmp_path / "a.csv"
        b = tmp_path / "b.csv"
        assert main(["bench", str(spec), "--output", str(a)]) == 0
        assert main(["bench", str(spec), "--output", str(b)]) == 0
        assert a.read_bytes() == b.read_bytes()
        lines = a.read_text().splitlines()
        assert lines[0].startswith("# classes=3")
        assert lines[1] == "method,accuracy,selection"
        methods = [line.split(",")[0] for line in lines[2:]]
        assert methods == ["sum", "sum+power", "gmp", "gmp+power"]

    def test_low_burstiness_keeps_methods_close(self, tmp_path):
        """With almost no shared background, equalization has nothing to
        correct: both methods should score within 5 points."""
        spec_obj = dict(
            self.SPEC,
            background_fraction=0.01,
            images_per_class=8,
            descriptors_per_image=32,
        )
        spec = tmp_path / "spec.json"
        spec.write_text(json.dumps(spec_obj))
        out = tmp_path / "report.csv"
        assert main(["bench", str(spec), "--output", str(out)]) == 0
        rows = {
            line.split(",")[0]: float(line.split(",")[1])
            for line in out.read_text().splitlines()[2:]
        }
        assert abs(rows["gmp"] - rows["sum"]) <= 0.05

    def test_invalid_spec_rejected(self, tmp_path, capsys):
        spec = tmp_path / "spec.json"
        spec.write_text(json.dumps(dict(self.SPEC, classes=0)))
        assert main(["bench", str(spec), "--output", str(tmp_path / "r.csv")]) == 2
        assert "classes" in capsys.readouterr().err


class TestVerifyCommand:
    def test_all_checks_pass(self, tmp_path, capsys):
        out = tmp_path / "verify.csv"
        assert main(["verify", "--output", str(out)]) == 0
        lines = out.read_text().splitlines()
        assert lines[0] == "check,tolerance,observed,status"
        assert len(lines) == 9  # header + eight checks
        assert all(line.endswith(",pass") for line in lines[1:])
        # per-check tolerance and observed value present
        for line in lines[1:]:
            name, tol, obs, status = line.split(",")
            float(tol), float(obs)

    def test_fault_injection_names_check(self, tmp_path, monkeypatch, capsys):
        monkeypatch.setenv("GMP_VERIFY_FAULT", "lambda")
        out = tmp_path / "verify.csv"
        assert main(["verify", "--output", str(out)]) == 1
        err = capsys.readouterr().err
        assert "primal_dual_agreement" in err
        assert "primal_dual_agreement,1e-08" in out.read_text()
        assert ",FAIL" in out.read_text()
