import io

import numpy as np
import pytest

from ripcert.cli import EXIT_OK, EXIT_PARAM, EXIT_REFUSED, main
from ripcert.matrix_io import load_matrix


def run(*argv):
    out = io.StringIO()
    code = main(list(argv), out=out)
    return code, out.getvalue()


def body(text):
    return [line for line in text.splitlines() if not line.startswith("#")]


@pytest.fixture
def stored(tmp_path):
    path = tmp_path / "A.bin"
    code, _ = run("sample", "--m", "200", "--n", "20", "--seed", "3", "--out", str(path))
    assert code == EXIT_OK
    return path


def test_certify_prints_one_row(stored):
    code, text = run("certify", "--in", str(stored), "--s", "8", "--delta", "0.5")
    assert code == EXIT_OK
    rows = body(text)
    assert rows[0].split(",")[:3] == ["seed", "model", "n"]
    assert len(rows) == 2
    fields = dict(zip(rows[0].split(","), rows[1].split(",")))
    assert fields["s"] == "8" and fields["verdict"] in ("yes", "no")


def test_ldlr_reproducible():
    argv = ["ldlr", "--n", "50", "--m", "30", "--beta", "-0.9", "--rho", "0.1",
            "--degree", "6", "--pairs", "20000", "--seed", "7"]
    code, a = run(*argv)
    assert code == EXIT_OK
    _, b = run(*argv, "--threads", "3")
    assert body(a) == body(b)
    header, row = body(a)
    assert header.split(",")[6] == "method" and row.split(",")[6] == "monte-carlo"


def test_bounds_four_rows():
    code, text = run("bounds", "--m", "400", "--s", "100", "--delta", "0.5", "--n", "2000")
    assert code == EXIT_OK
    rows = body(text)
    assert rows[0] == "name,inputs,bound_value,vacuous"
    assert len(rows) == 5


def test_config_echo_includes_generated_seed():
    code, text = run("ldlr", "--n", "20", "--m", "5", "--beta", "-0.5", "--rho", "0.3", "--degree", "4")
    assert code == EXIT_OK
    seeds = [line for line in text.splitlines() if line.startswith("# seed=")]
    assert len(seeds) == 1 and int(seeds[0].split("=")[1]) >= 0
    assert text.index("# seed=") < text.index("n,m,rho")


def test_exact_rip(stored):
    code, text = run("exact-rip", "--in", str(stored), "--s", "2", "--delta", "0.9")
    assert code == EXIT_OK
    header, row = body(text)
    assert header == "s,delta,b_s,rip,witness,subsets"
    assert row.split(",")[-1] == "190"


def test_refusal_exit_code(tmp_path):
    path = tmp_path / "B.bin"
    run("sample", "--m", "100", "--n", "300", "--seed", "1", "--out", str(path))
    code, _ = run("exact-rip", "--in", str(path), "--s", "8", "--delta", "0.5")
    assert code == EXIT_REFUSED


def test_parameter_errors(tmp_path, capsys):
    with pytest.raises(SystemExit) as info:
        main(["ldlr", "--bogus"], out=io.StringIO())
    assert info.value.code == EXIT_PARAM
    with pytest.raises(SystemExit) as info:
        main(["certify", "--s", "3", "--delta", "0.5"], out=io.StringIO())
    assert info.value.code == EXIT_PARAM
    code, _ = run("certify", "--in", str(tmp_path / "missing.bin"), "--s", "3", "--delta", "0.5")
    assert code == EXIT_PARAM
    assert "cannot read" in capsys.readouterr().err
    code, _ = run("bounds", "--m", "10", "--s", "2", "--delta", "1.5", "--n", "20")
    assert code == EXIT_PARAM


def test_sample_csv_roundtrip(tmp_path):
    path = tmp_path / "A.csv"
    code, text = run("sample", "--m", "6", "--n", "9", "--seed", "4", "--format", "csv", "--out", str(path))
    assert code == EXIT_OK
    mat = load_matrix(path)
    assert mat.shape == (6, 9) and mat.seed == 4 and mat.scale == "raw"
    code, text = run("certify", "--in", str(path), "--s", "2", "--delta", "0.9")
    assert code == EXIT_OK


def test_planted_sample(tmp_path):
    path = tmp_path / "P.bin"
    code, text = run("sample", "--model", "planted", "--m", "30", "--n", "60", "--s", "6",
                     "--delta", "0.5", "--seed", "2", "--out", str(path))
    assert code == EXIT_OK
    assert "# truncated=" in text
    assert np.all(np.isfinite(load_matrix(path).data))


def test_spec_file_and_flag_override(tmp_path):
    spec = tmp_path / "exp.cfg"
    spec.write_text("n = 40\nm = 20\ns = 2\ndelta = 0.5\ntrials = 3\nmaster_seed = 11\n")
    code, a = run("distinguish", "--spec", str(spec))
    assert code == EXIT_OK
    assert "master_seed=11" in a
    code, b = run("distinguish", "--spec", str(spec), "--trials", "4")
    assert code == EXIT_OK
    assert body(a) != body(b)


def test_sweep_and_witness():
    code, text = run("sweep", "--n", "60", "--m", "40", "--s", "2", "--delta", "0.5",
                     "--trials", "2", "--s-grid", "2,3", "--seed", "0")
    assert code == EXIT_OK
    assert body(text)[0].startswith("s,raw_r,r,")
    code, text = run("witness", "--n", "200", "--m", "100", "--s", "20", "--delta", "0.5",
                     "--trials", "5", "--seed", "0")
    assert code == EXIT_OK
    assert any(line.startswith("bound:witness_failure") for line in body(text))
