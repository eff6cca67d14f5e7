import csv
import pathlib

import numpy as np
import pytest

import pbec

CONFIGS = pathlib.Path(__file__).resolve().parents[2] / "configs"

BARE = """
[basis]
modes = 4
grid_points = 101
[rates]
profile = flat
value = 0
[pump]
shape = uniform
ratio = 0.2
decay = 3e-5
loss = 0.2
"""


def test_bare_cavity_closed_form():
    out = pbec.coherence(BARE)
    assert np.allclose(out["tau"], 2 / 0.2, rtol=1e-6)
    assert np.allclose(out["fwhm"], 0.2, rtol=1e-6)
    assert out["seeded"] == [0, 1, 2, 3]


def test_steady_state_is_hermitian_and_positive():
    text = (CONFIGS / "fig1.ini").read_text()
    out = pbec.steady(text, str(CONFIGS))
    n = out["photons"]
    assert n.shape == (10, 10)
    assert np.abs(n - n.conj().T).max() < 1e-10
    assert n.diagonal().real.min() >= 0
    assert np.all((out["excitation"] >= 0) & (out["excitation"] <= 1))


def test_normalized_config_round_trips():
    text = (CONFIGS / "thermal.ini").read_text()
    once = pbec.normalize_config(text, str(CONFIGS))
    assert pbec.normalize_config(once) == once


def test_errors_carry_kind_and_exit_code():
    with pytest.raises(pbec.Error) as info:
        pbec.steady("[pump]\ndecay = -1\n")
    message, kind, code = info.value.args
    assert message == "pump.decay: must be >= 0"
    assert (kind, code) == ("validation", 2)


def test_run_steady_writes_tables(tmp_path):
    bundle = pbec.run_steady(str(CONFIGS / "bare_cavity.ini"), out=str(tmp_path))
    assert "steady_modes.csv" in bundle["files"]
    lines = (tmp_path / "steady_modes.csv").read_text().splitlines()
    assert lines[0] == f"# run_id: {bundle['run_id']}"
    rows = list(csv.DictReader(lines[1:]))
    assert len(rows) == 4
    assert (tmp_path / "config.ini").read_bytes() == (CONFIGS / "bare_cavity.ini").read_bytes()
