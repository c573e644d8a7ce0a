"""
End-to-end tests for the hq-restore command line.
Each test drives main() with real files under tmp_path.
"""
import pytest

from src.cli import commands
from src.cli.main import main
from src.cli.schemas import PropertyResult, SuiteResult
from src.models.grid import Grid
from src.repositories.artifacts import MetricsRepository, TraceRepository
from src.services.verification_service import VerificationService


def _metrics(output):
    return MetricsRepository().read(f"{output}.metrics.txt")


@pytest.fixture
def step_csv(tmp_path, csv_repository, step_image):
    path = tmp_path / "step.csv"
    csv_repository.write(Grid.from_array(step_image), str(path))
    return path


@pytest.mark.e2e
class TestDenoiseCommand:
    """hq-restore denoise"""

    def test_piecewise_signal_improves(self, signal_csv, tmp_path):
        # Arrange
        output = tmp_path / "out.csv"
        argv = [
            "denoise", "--input", str(signal_csv), "--output", str(output),
            "--potential", "exp", "--beta", "0.5", "--noise-std", "0.1", "--seed", "42",
            "--max-iters", "1000",
        ]

        # Act
        status = main(argv)

        # Assert
        assert status == commands.EXIT_OK
        metrics = _metrics(output)
        assert metrics["reference"] == "input"
        assert metrics["converged"] == "true"
        assert float(metrics["psnr_vs_clean"]) > float(metrics["psnr_observed_vs_clean"])
        assert output.exists()
        assert (tmp_path / "out.csv.trace.csv").exists()
        assert not (tmp_path / "out.csv.not_converged").exists()

    def test_trace_is_descending(self, signal_csv, tmp_path):
        output = tmp_path / "out.csv"
        main(["denoise", "--input", str(signal_csv), "--output", str(output), "--noise-std", "0.1", "--seed", "42",
              "--max-iters", "1000"])

        trace = TraceRepository().read(f"{output}.trace.csv")

        values = trace.augmented_values
        assert all(b <= a + 1e-12 * (1.0 + abs(a)) for a, b in zip(values, values[1:]))

    def test_reruns_are_byte_identical(self, signal_csv, tmp_path):
        outputs = [tmp_path / "first.csv", tmp_path / "second.csv"]
        for output in outputs:
            assert main(["denoise", "--input", str(signal_csv), "--output", str(output),
                         "--noise-std", "0.1", "--seed", "42", "--max-iters", "1000"]) == 0

        assert outputs[0].read_bytes() == outputs[1].read_bytes()
        assert (tmp_path / "first.csv.trace.csv").read_bytes() == (tmp_path / "second.csv.trace.csv").read_bytes()

    def test_noise_free_tiny_beta_returns_input(self, signal_csv, tmp_path, csv_repository, piecewise_signal):
        output = tmp_path / "out.csv"

        status = main(["denoise", "--input", str(signal_csv), "--output", str(output), "--beta", "1e-12"])

        assert status == 0
        restored = csv_repository.read(str(output))
        assert abs(restored.data - piecewise_signal).max() <= 1e-5
        assert _metrics(output)["reference"] == "none"

    def test_config_file_with_overrides(self, signal_csv, tmp_path):
        # Arrange
        config = tmp_path / "run.env"
        config.write_text("potential=geman-mcclure\nbeta=0.3\nnoise_std=0.05\nseed=3\nmax_iters=1000\n")
        output = tmp_path / "out.csv"

        # Act
        status = main(["denoise", "--config", str(config), "--input", str(signal_csv), "--output", str(output),
                       "--beta", "0.2"])

        # Assert
        assert status == 0
        assert "psnr_vs_clean" in _metrics(output)

    def test_not_converged_writes_marker(self, signal_csv, tmp_path):
        output = tmp_path / "out.csv"

        status = main(["denoise", "--input", str(signal_csv), "--output", str(output),
                       "--noise-std", "0.1", "--seed", "42", "--max-iters", "1"])

        assert status == commands.EXIT_NOT_CONVERGED
        assert output.exists()
        assert (tmp_path / "out.csv.not_converged").exists()
        assert _metrics(output)["converged"] == "false"

    def test_missing_input(self, tmp_path):
        output = tmp_path / "out.csv"

        status = main(["denoise", "--input", str(tmp_path / "absent.csv"), "--output", str(output)])

        assert status == commands.EXIT_IO
        assert list(tmp_path.iterdir()) == []

    def test_malformed_input(self, tmp_path):
        bad = tmp_path / "bad.csv"
        bad.write_text("0.1\nnope\n")
        assert main(["denoise", "--input", str(bad), "--output", str(tmp_path / "out.csv")]) == commands.EXIT_IO

    @pytest.mark.parametrize(
        "extra",
        [["--beta", "-1"], ["--noise-std", "-0.1"], ["--cg-tol", "0"], ["--log-epsilon", "0"]],
    )
    def test_invalid_values(self, signal_csv, tmp_path, extra):
        argv = ["denoise", "--input", str(signal_csv), "--output", str(tmp_path / "out.csv")] + extra
        assert main(argv) == commands.EXIT_CONFIG

    def test_unknown_config_key(self, signal_csv, tmp_path):
        config = tmp_path / "run.env"
        config.write_text("potential=exp\nsmoothing=3\n")
        argv = ["denoise", "--config", str(config), "--input", str(signal_csv), "--output", str(tmp_path / "o.csv")]
        assert main(argv) == commands.EXIT_CONFIG

    def test_missing_config_file(self, signal_csv, tmp_path):
        argv = ["denoise", "--config", str(tmp_path / "none.env"), "--input", str(signal_csv),
                "--output", str(tmp_path / "o.csv")]
        assert main(argv) == commands.EXIT_CONFIG

    def test_unknown_potential_is_a_usage_error(self, signal_csv, tmp_path):
        with pytest.raises(SystemExit) as info:
            main(["denoise", "--input", str(signal_csv), "--output", str(tmp_path / "o.csv"), "--potential", "huber"])
        assert info.value.code == 2


@pytest.mark.e2e
class TestDeblurCommand:
    """hq-restore deblur"""

    def test_step_image_improves(self, step_csv, tmp_path):
        # Arrange
        output = tmp_path / "out.csv"
        argv = [
            "deblur", "--input", str(step_csv), "--output", str(output),
            "--kernel", "0.25,0.5,0.25", "--simulate",
            "--noise-std", "0.02", "--seed", "7", "--beta", "0.01", "--max-iters", "1000",
        ]

        # Act
        status = main(argv)

        # Assert
        assert status == 0
        metrics = _metrics(output)
        assert float(metrics["psnr_vs_clean"]) > float(metrics["psnr_observed_vs_clean"])

    def test_unit_kernel_acts_as_denoise(self, signal_csv, tmp_path, csv_repository):
        denoised, deblurred = tmp_path / "a.csv", tmp_path / "b.csv"
        common = ["--noise-std", "0.1", "--seed", "42", "--max-iters", "1000"]

        assert main(["denoise", "--input", str(signal_csv), "--output", str(denoised)] + common) == 0
        assert main(["deblur", "--input", str(signal_csv), "--output", str(deblurred), "--kernel", "1"] + common) == 0

        assert denoised.read_bytes() == deblurred.read_bytes()

    def test_pgm_round_trip(self, tmp_path, pgm_repository, step_image):
        source = tmp_path / "step.pgm"
        pgm_repository.write(Grid.from_array(step_image), str(source))
        output = tmp_path / "out.pgm"

        status = main(["deblur", "--input", str(source), "--output", str(output), "--kernel", "0.25,0.5,0.25",
                       "--simulate", "--noise-std", "0.02", "--seed", "7", "--beta", "0.01", "--max-iters", "1000"])

        assert status == 0
        assert pgm_repository.read(str(output)).shape == (32, 32)

    @pytest.mark.parametrize("kernel", ["0.5,0.5", "0.2,0.2,0.2", "a,b,c"])
    def test_bad_kernel(self, step_csv, tmp_path, kernel):
        argv = ["deblur", "--input", str(step_csv), "--output", str(tmp_path / "o.csv"), "--kernel", kernel]
        assert main(argv) == commands.EXIT_CONFIG


@pytest.mark.e2e
class TestVerifyCommand:
    """hq-restore verify / conjugate-check"""

    def test_fenchel_suite(self, capsys):
        status = main(["verify", "fenchel", "--seed", "1"])

        out = capsys.readouterr().out
        assert status == 0
        assert "fenchel.passed=true" in out
        assert out.rstrip().endswith("all.passed=true")

    def test_conjugate_check(self, capsys):
        status = main(["conjugate-check"])

        out = capsys.readouterr().out
        assert status == 0
        assert "conjugate.matches_table[log].passed=true" in out
        assert "table_discrepancy[geman-mcclure]" in out

    def test_failing_suite_exit_code(self, mocker, capsys):
        failing = SuiteResult(
            suite="fenchel",
            properties=[PropertyResult(name="fenchel_inequality[exp]", passed=False, worst=1.0, tolerance=1e-9)],
        )
        suite = mocker.patch.object(VerificationService, "fenchel", return_value=failing)

        assert main(["verify", "fenchel"]) == commands.EXIT_VERIFY_FAILED
        suite.assert_called_once()
        assert "all.passed=false" in capsys.readouterr().out
