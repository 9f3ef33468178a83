import json

import numpy as np
import pytest
from numpy.testing import assert_allclose

from gfa.analysis.pipeline import FactorAnalyzer
from gfa.cli import main
from gfa.io.tables import read_matrix, write_matrix
from gfa.synthesis.scenario import parse_scenario, run_scenario
from gfa.types import SampleEnsemble

TWO_FACTORS = """
scenario = factor_model
name = two_factors
N = 400
M = 1000
seed = 31
loadings = constant(1.0); sign_pattern(2)
noise = white(1.0)
"""

WHITE = """
scenario = idiosyncratic
N = 200
M = 2000
seed = 9
noise = white(1.0)
"""

WIDE_WHITE = """
scenario = idiosyncratic
N = 2000
M = 200
seed = 9
noise = white(1.0)
"""

TWO_LINES = """
scenario = pd_stationary
N = 4096
M = 1
seed = 21
lines = 0.7:1.0:0.5; 2.1:-0.8:1.0
noise = white(0.1)
"""

CONSTANT_FIELD = """
scenario = field
N = 400
T = 50
seed = 2
loadings = constant(1.0)
space_factors = 1.0
time = ar1(0.9)
"""

MA_FIELD = """
scenario = field
N = 400
T = 50
seed = 3
noise = moving_average(1.0, 0.5)
time = ar1(0.9)
"""


def synth(tmp_path, text, name="data"):
    config = tmp_path / f"{name}.cfg"
    config.write_text(text)
    output = tmp_path / f"{name}.csv"
    assert main(["synth", str(config), "-o", str(output)]) == 0
    return config, output


def load_report(directory):
    return json.loads((directory / "report.json").read_text())


def test_synth_writes_data_and_truth(tmp_path):
    _, output = synth(tmp_path, TWO_FACTORS)
    assert read_matrix(output).shape == (400, 1000)
    truth = json.loads(output.with_suffix(".truth.json").read_text())
    assert truth["command"] == "synth"
    assert truth["kind"] == "replicates"
    assert np.array(truth["truth"]["factors"]).shape == (2, 1000)


def test_synth_seed_override(tmp_path):
    config = tmp_path / "white.cfg"
    config.write_text(WHITE)
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    assert main(["synth", str(config), "-o", str(a), "--seed", "1"]) == 0
    assert main(["synth", str(config), "-o", str(b), "--seed", "2"]) == 0
    assert not np.array_equal(read_matrix(a), read_matrix(b))


def test_decompose_two_factors(tmp_path):
    config, data = synth(tmp_path, TWO_FACTORS)
    out = tmp_path / "out"
    assert main(["decompose", str(data), "-o", str(out)]) == 0
    report = load_report(out)
    assert report["command"] == "decompose"
    assert report["q"] == 2
    assert report["realization"]["within_tolerance"]
    for name in ("growth_report.json", "curves.csv", "loadings.csv", "factors.csv", "strong_li.json"):
        assert (out / name).exists()

    analyzer = FactorAnalyzer()
    analyzer.fit(SampleEnsemble(run_scenario(parse_scenario(config)).data))
    assert analyzer.decomposition.q == report["q"]
    assert np.array_equal(report["growth_report"]["eigvals"], analyzer.decomposition.growth_report.eigvals)


def test_decompose_white_noise(tmp_path):
    _, data = synth(tmp_path, WHITE)
    out = tmp_path / "out"
    assert main(["decompose", str(data), "-o", str(out), "--grid", "25,50,100,200", "--top", "4"]) == 0
    report = load_report(out)
    assert report["q"] == 0
    assert report["flags"]["grid"] == [25, 50, 100, 200]
    assert (out / "loadings.csv").read_text() == ""


def test_decompose_white_noise_more_rows_than_replicates(tmp_path):
    _, data = synth(tmp_path, WIDE_WHITE)
    out = tmp_path / "out"
    assert main(["decompose", str(data), "-o", str(out)]) == 0
    report = load_report(out)
    assert report["q"] == 0
    assert report["grid"] == [12, 25, 50, 100, 200]
    assert report["N_used"] == 2000
    assert (out / "loadings.csv").read_text() == ""


def test_decompose_rejects_bad_input(tmp_path):
    empty = tmp_path / "empty.csv"
    empty.write_text("")
    assert main(["decompose", str(empty), "-o", str(tmp_path / "o1")]) == 2
    ragged = tmp_path / "ragged.csv"
    ragged.write_text("1,2,3\n4,5\n")
    assert main(["decompose", str(ragged), "-o", str(tmp_path / "o2")]) == 2


def test_decompose_short_grid_is_precondition_error(tmp_path):
    _, data = synth(tmp_path, WHITE)
    assert main(["decompose", str(data), "-o", str(tmp_path / "out"), "--grid", "50,100"]) == 4


def test_malformed_config(tmp_path):
    config = tmp_path / "bad.cfg"
    config.write_text("scenario = aggregate\nN = 10\nM = 2\nloadings = constant\nflavour = x\n")
    assert main(["synth", str(config), "-o", str(tmp_path / "x.csv")]) == 2


def test_stationary_two_lines(tmp_path):
    _, data = synth(tmp_path, TWO_LINES)
    out = tmp_path / "out"
    assert main(["stationary", str(data), "-o", str(out)]) == 0
    lines = json.loads((out / "lines.json").read_text())
    assert len(lines["lines"]) == 2
    assert_allclose([ln["omega"] for ln in lines["lines"]], [0.7, 2.1], atol=2 * 2 * np.pi / 4096)
    pd_part, pnd_part = read_matrix(out / "pd.csv"), read_matrix(out / "pnd.csv")
    assert_allclose(pd_part + pnd_part, read_matrix(data), atol=1e-12)
    assert load_report(out)["nu"] == 2


def test_stationary_white_noise_has_no_lines(tmp_path):
    rng = np.random.default_rng(5)
    data = write_matrix(tmp_path / "noise.csv", rng.standard_normal(4096)[None, :])
    out = tmp_path / "out"
    assert main(["stationary", str(data), "-o", str(out)]) == 0
    assert json.loads((out / "lines.json").read_text())["lines"] == []
    assert np.all(read_matrix(out / "pd.csv") == 0)
    assert read_matrix(out / "pd.csv").shape == (1, 4096)


@pytest.mark.parametrize("shape", [(32, 1), (80, 2)])
def test_stationary_preconditions(tmp_path, shape):
    data = write_matrix(tmp_path / "s.csv", np.ones(shape))
    assert main(["stationary", str(data), "-o", str(tmp_path / "out")]) == 4


def test_flock_on_deterministic_space(tmp_path):
    _, data = synth(tmp_path, CONSTANT_FIELD)
    out = tmp_path / "out"
    assert main(["flock", str(data), "-o", str(out), "--block", "5,5"]) == 0
    report = load_report(out)
    assert report["verdict"] == "FLOCK"
    assert report["q"] == 1
    assert report["defect"] < 1e-6
    assert_allclose(read_matrix(out / "flock.csv"), read_matrix(data), atol=1e-10)


def test_flock_on_moving_average_space(tmp_path):
    _, data = synth(tmp_path, MA_FIELD)
    out = tmp_path / "out"
    assert main(["flock", str(data), "-o", str(out)]) == 0
    report = load_report(out)
    assert report["verdict"] == "NO-FLOCK"
    assert report["q"] == 0
    assert_allclose(read_matrix(out / "residual.csv"), read_matrix(data))
