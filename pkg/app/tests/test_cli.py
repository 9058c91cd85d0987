import json
import math

import numpy as np
import pytest

from app.main import main
from app.models.classical import ClassicalPhysics
from app.models.config import SimConfig
from app.models.physics import CONSTANTS, PulseProtocol
from app.simulator import simulate_trajectory
from app.tests.conftest import write_config
from app.utils.errors import AnalysisError
from app.utils.io import SNAPSHOT_COLUMNS, ArtifactWriter, read_snapshots_csv

SMALL_CLASSICAL = """
kind = "classical"
master_seed = 3
output_dir = "{output}"

[particle]
radius = 230e-9

[gas]
pressure = 1.0

[trap]
waist_w0 = 854e-9
power_high = 0.080
power_low = 0.0568
frequency_hz = 77e3
duffing_xi = -0.1e12

[protocol]
s_low = 0.71
n_pulses = 5

[simulation]
duration = 4e-5
n_trajectories = 60
snapshot_after_pulses = [0, 5]
"""

SMALL_QUANTUM = """
kind = "quantum"
output_dir = "{output}"

[particle]
radius = 4e-9

[protocol]
s_low = 0.71
n_pulses = 2

[quantum]
potential = "harmonic"
n_points = 128
steps_per_period = 500
duration = 0.5
snapshot_every = 125
fock_n_max = 5

[[quantum.initial_states]]
kind = "fock"
n = 1
"""


def _error_report(err: str) -> dict:
    lines = [line for line in err.splitlines() if line.startswith("{")]
    return json.loads(lines[-1])


def _classical_config(tmp_path, name="run"):
    output = tmp_path / name
    return write_config(tmp_path / f"{name}.cfg", SMALL_CLASSICAL.format(output=output.as_posix())), output


def test_validate_config_prints_defaults(config_dir, capsys):
    assert main(["validate-config", "--config", str(config_dir / "reference_quantum.cfg")]) == 0
    payload = json.loads(capsys.readouterr().out)
    assert payload["status"] == "ok"
    assert payload["config"]["kind"] == "quantum"
    assert payload["applied_defaults"]["quantum.check_every"] == 50


def test_config_error_exit_code(tmp_path, capsys):
    path = write_config(tmp_path / "bad.cfg", 'kind = "classical"\n\n[protocol]\ns_low = 1.5\n')
    assert main(["run", "--config", str(path)]) == 1
    report = _error_report(capsys.readouterr().err)
    assert report["status"] == "error"
    assert report["error_type"] == "ConfigError"
    assert report["key_path"] == "protocol.s_low"
    assert report["module"] == "cli-io"
    assert "line" in report and "file" in report


def test_threads_must_be_positive(config_dir, capsys):
    assert main(["--threads", "0", "validate-config", "--config", str(config_dir / "reference_quantum.cfg")]) == 1


def test_classical_run_writes_artifacts(tmp_path):
    path, output = _classical_config(tmp_path)
    assert main(["--threads", "2", "run", "--config", str(path)]) == 0

    for name in ("snapshots.csv", "bimodality.json", "metadata.json", "density_k000.csv", "marginal_k001.csv"):
        assert (output / name).exists()
    snapshots = read_snapshots_csv(output / "snapshots.csv")
    assert sorted(snapshots) == [0, 1]
    assert snapshots[0][0] == 0.0

    meta = json.loads((output / "metadata.json").read_text(encoding="utf-8"))
    assert meta["status"] == "ok"
    assert meta["master_seed"] == 3
    assert meta["threads"] == 2
    assert "simulation.integrator" in meta["applied_defaults"]
    assert [s["pulses_completed"] for s in meta["results"]["snapshots"]] == [0, 5]

    report = json.loads((output / "bimodality.json").read_text(encoding="utf-8"))
    assert len(report["snapshots"]) == 2


def test_classical_run_deterministic_across_threads(tmp_path):
    """같은 시드는 스레드 수와 무관하게 같은 바이트를 냄"""
    first, out1 = _classical_config(tmp_path, "one")
    second, out2 = _classical_config(tmp_path, "two")
    assert main(["--threads", "1", "run", "--config", str(first)]) == 0
    assert main(["--threads", "3", "run", "--config", str(second)]) == 0
    for name in ("snapshots.csv", "bimodality.json", "density_k001.csv"):
        assert (out1 / name).read_bytes() == (out2 / name).read_bytes()


def test_analyze_and_plot_snapshots(tmp_path):
    path, output = _classical_config(tmp_path)
    assert main(["run", "--config", str(path)]) == 0

    analyzed = tmp_path / "analyzed"
    assert main(["analyze", "--input", str(output / "snapshots.csv"), "--output-dir", str(analyzed)]) == 0
    report = json.loads((analyzed / "bimodality.json").read_text(encoding="utf-8"))
    assert [s["snapshot_index"] for s in report["snapshots"]] == [0, 1]

    plots = tmp_path / "plots"
    assert main(["plot-data", "--input", str(output / "snapshots.csv"), "--output-dir", str(plots), "--bins", "31"]) == 0
    grid_lines = (plots / "density_k000.dat").read_text(encoding="utf-8").splitlines()
    # 헤더 + 31 × (31행 + 빈 줄)
    assert len(grid_lines) == 1 + 31 * 32
    assert (plots / "marginal_k001.dat").exists()


def test_analyze_trace_psd(tmp_path):
    omega = 2 * math.pi * 100.0
    physics = ClassicalPhysics(mass=1.0, omega=omega, gamma=100.0, temperature=1.0, force_model="linear", kB=1.0)
    protocol = PulseProtocol(n_pulses=0).with_timing(omega)
    cfg = SimConfig(dt=physics.period / 200.0, duration=40.0, n_trajectories=1, record_every=10)
    trajectory = simulate_trajectory((0.0, 0.0), protocol, cfg, physics, seed=7)
    ArtifactWriter(tmp_path).write_columns("trace.csv", {"t": trajectory.times, "x": trajectory.positions})

    output = tmp_path / "psd"
    assert main(["analyze", "--input", str(tmp_path / "trace.csv"), "--psd", "--output-dir", str(output)]) == 0
    fit = json.loads((output / "spectrum_fit.json").read_text(encoding="utf-8"))
    assert fit["omega0"] == pytest.approx(omega, rel=0.01)
    assert len(fit["covariance"]) == 4


def test_analyze_trace_needs_mode(tmp_path, capsys):
    (tmp_path / "trace.csv").write_text("t,x\n0,0\n1,1\n", encoding="utf-8")
    assert main(["analyze", "--input", str(tmp_path / "trace.csv"), "--output-dir", str(tmp_path / "o")]) == 1
    assert _error_report(capsys.readouterr().err)["key_path"] == "analysis.psd"


def test_analyze_missing_input(tmp_path, capsys):
    assert main(["analyze", "--input", str(tmp_path / "missing.csv"), "--psd", "--output-dir", str(tmp_path)]) == 1


def test_analysis_error_exit_code(tmp_path, capsys):
    """피크 없는 시계열은 분석 오류 (종료 코드 2)"""
    t = np.arange(2**17) * 1e-3
    rng = np.random.default_rng(0)
    ArtifactWriter(tmp_path).write_columns("noise.csv", {"t": t, "x": rng.standard_normal(t.size)})
    code = main(["analyze", "--input", str(tmp_path / "noise.csv"), "--psd", "--output-dir", str(tmp_path / "o")])
    assert code == 2
    report = _error_report(capsys.readouterr().err)
    assert report["error_type"] == "AnalysisError"
    assert report["module"] == "phase-space-analysis"
    assert report["operation"] == "psd_lorentzian_calibration"


def test_header_only_snapshot_csv_is_analysis_error(tmp_path, capsys):
    path = tmp_path / "empty_snapshots.csv"
    path.write_text(",".join(SNAPSHOT_COLUMNS) + "\n", encoding="utf-8")
    with pytest.raises(AnalysisError, match="데이터 행이 없습니다"):
        read_snapshots_csv(path)

    code = main(["analyze", "--input", str(path), "--output-dir", str(tmp_path / "o")])
    assert code == 2
    report = _error_report(capsys.readouterr().err)
    assert report["error_type"] == "AnalysisError"
    assert report["operation"] == "read_input"


def test_quantum_run_writes_wigner(tmp_path):
    output = tmp_path / "quantum"
    path = write_config(tmp_path / "q.cfg", SMALL_QUANTUM.format(output=output.as_posix()))
    assert main(["run", "--config", str(path)]) == 0

    negativity = np.genfromtxt(output / "negativity_fock.csv", delimiter=",", names=True)
    assert negativity["N"][0] == pytest.approx(1.0 - 2.0 * math.exp(-0.5), abs=0.02)
    assert negativity["delta_N"][0] == 0.0
    # 기본 Γ/ω = 1e-5 에서 반 주기 동안 순도 감소는 작음
    assert negativity["purity"] == pytest.approx(np.ones(negativity.size), abs=1e-3)

    diagnostics = json.loads((output / "quantum_diagnostics.json").read_text(encoding="utf-8"))
    assert diagnostics["gamma_over_omega"] == 1e-5
    bins = sorted(output.glob("wigner_fock_t*.bin"))
    assert len(bins) == 2
    header = json.loads(bins[0].with_suffix(".json").read_text(encoding="utf-8"))
    values = np.fromfile(bins[0], dtype="<f8").reshape(header["shape"])
    assert values.shape == (128, 128)
    assert (output / "fock_fock.csv").exists()

    # 작은 격자는 Wigner CSV (x, p, W) 도 저장
    tables = sorted(output.glob("wigner_fock_t*.csv"))
    assert [t.stem for t in tables] == [b.stem for b in bins]
    table = np.genfromtxt(tables[0], delimiter=",", names=True)
    assert table.dtype.names == ("x_m", "p_kg_m_s", "W_si")
    assert table.size == 128 * 128
    np.testing.assert_allclose(table["W_si"].reshape(128, 128), values / CONSTANTS.hbar, rtol=1e-12)

    # 스냅샷마다 P(n), n = 0..fock_n_max
    run = diagnostics["states"][0]
    assert len(run["fock_populations"]) == len(run["times_internal"]) == 3
    assert all(len(populations) == 6 for populations in run["fock_populations"])
    assert run["fock_populations"][0][1] == pytest.approx(1.0, abs=1e-6)

    plots = tmp_path / "plots"
    assert main(["plot-data", "--input", str(bins[-1]), "--output-dir", str(plots)]) == 0
    assert (plots / (bins[-1].stem + "_marginal.dat")).exists()


def test_quantum_run_independent_of_thread_count(tmp_path):
    """상태별 스레드와 FFT 작업자 수가 달라도 같은 바이트"""
    text = SMALL_QUANTUM + '\n[[quantum.initial_states]]\nkind = "gaussian"\nwidth = 1.0\ndisplacement = 1.0\n'
    outputs = []
    for threads in ("1", "4"):
        output = tmp_path / f"quantum_{threads}"
        path = write_config(tmp_path / f"q{threads}.cfg", text.format(output=output.as_posix()))
        assert main(["--threads", threads, "run", "--config", str(path)]) == 0
        outputs.append(output)

    names = sorted(p.name for p in outputs[0].glob("negativity_*.csv"))
    names += sorted(p.name for p in outputs[0].glob("wigner_*_t*.bin"))
    assert "negativity_gaussian.csv" in names
    for name in names:
        assert (outputs[0] / name).read_bytes() == (outputs[1] / name).read_bytes()


def test_calibrate_reports_closed_form(tmp_path, config_dir):
    text = (config_dir / "reference_classical.cfg").read_text(encoding="utf-8")
    text = text.replace('output_dir = "output/classical"', f'output_dir = "{(tmp_path / "cal").as_posix()}"')
    text += "\n[calibration]\nn_trajectories = 2\nperiods = 400\nnperseg = 1024\n"
    path = write_config(tmp_path / "cal.cfg", text)
    assert main(["calibrate", "--config", str(path)]) == 0

    report = json.loads((tmp_path / "cal" / "calibration.json").read_text(encoding="utf-8"))
    closed = report["closed_form"]
    assert 15e-3 <= closed["relaxation_time_s"] <= 20e-3
    assert closed["frequency_hz"] == pytest.approx(77e3)
    assert closed["tau_high_s"] == pytest.approx(3.25e-6, rel=2e-3)
    assert closed["tau_low_s"] == pytest.approx(3.85e-6, rel=2e-3)
    assert closed["tau_low_configured_s"] == pytest.approx(3.48e-6)
    assert report["equilibrium"]["pressure_pa"] == 500.0


@pytest.mark.slow
def test_calibration_recovers_equilibrium(tmp_path, config_dir):
    """5 mbar 평형: ⟨x²⟩ 5%, ω₀ 1%, Γ 10% 이내"""
    text = (config_dir / "reference_classical.cfg").read_text(encoding="utf-8")
    text = text.replace('output_dir = "output/classical"', f'output_dir = "{(tmp_path / "cal").as_posix()}"')
    path = write_config(tmp_path / "cal.cfg", text)
    assert main(["--threads", "4", "calibrate", "--config", str(path)]) == 0
    equilibrium = json.loads((tmp_path / "cal" / "calibration.json").read_text(encoding="utf-8"))["equilibrium"]
    assert equilibrium["equipartition_ratio"] == pytest.approx(1.0, abs=0.05)
    assert abs(equilibrium["omega_relative_error"]) < 0.01
    assert abs(equilibrium["gamma_relative_error"]) < 0.10


@pytest.mark.slow
def test_bundled_classical_run_is_bimodal(tmp_path, config_dir):
    """기준 설정 55 펄스 후 x 주변분포의 A_D ≈ 3.32 ± 0.5"""
    text = (config_dir / "reference_classical.cfg").read_text(encoding="utf-8")
    text = text.replace('output_dir = "output/classical"', f'output_dir = "{(tmp_path / "reference").as_posix()}"')
    path = write_config(tmp_path / "reference.cfg", text)
    assert main(["--threads", "4", "run", "--config", str(path)]) == 0
    report = json.loads((tmp_path / "reference" / "bimodality.json").read_text(encoding="utf-8"))
    final = report["snapshots"][-1]
    assert final["pulses_completed"] == 55
    assert final["A_D"] == pytest.approx(3.32, abs=0.5)
