import numpy as np
import pytest

from nschemo.config import (
    ConfigError,
    ConfigSyntaxError,
    UnknownKeyError,
    build_initial_state,
    emit_config,
    parse_and_validate,
    parse_string,
)
from nschemo.fieldio import write_snapshot
from nschemo.grid import Grid, ScalarField


def test_minimal_config_is_valid():
    rc = parse_string("")
    assert rc.grid.shape == (64, 64)
    assert rc.params.potential.kind == "logarithmic"
    assert rc.stepper.dt == pytest.approx(0.1 * (1 / 64) ** 2 / 1e-3)
    assert rc.n_steps == 100 and rc.t_end is None
    assert rc.warnings == []


def test_full_sections_parse():
    rc = parse_string(
        """
[grid]
nx = 16   # inline comment
ny = 8
lx = 2.0
[physics]
A = 2.0
chi = 0.5
lambda = 0.25
alpha = 1.0
c0 = 0.1
[potential]
theta = 0.5
[source]
kind = gaussian
amplitude = 1.0
center = 1.0 0.5
decay = 2.0
[initial]
phi = stripe
[stepper]
dt = 1e-4
t_end = 0.01
coupling = picard
picard_kmax = 3
"""
    )
    assert rc.grid.lx == 2.0 and rc.grid.shape == (16, 8)
    assert rc.params.A == 2.0 and rc.params.lam == 0.25 and rc.params.lambda_variant
    assert rc.params.source.kind == "gaussian" and rc.params.source.center == (1.0, 0.5)
    assert rc.stepper.kmax == 3 and rc.t_end == 0.01


def test_c0_out_of_range_cites_hypothesis():
    with pytest.raises(ConfigError, match=r"\(H5\)"):
        parse_string("[physics]\nc0 = 1.5\n")


def test_constant_one_initial_rejected():
    with pytest.raises(ConfigError, match=r"mean phi0"):
        parse_string("[grid]\nnx = 8\nny = 8\n[initial]\nphi = constant 1.0\n")


def test_constant_shorthand_accepted():
    rc = parse_string("[grid]\nnx = 8\nny = 8\n[initial]\nphi = constant 0.25\n")
    st = build_initial_state(rc)
    assert np.all(st.phi.values == 0.25)


def test_unknown_key_and_section():
    with pytest.raises(UnknownKeyError, match="colour"):
        parse_string("[grid]\ncolour = red\n")
    with pytest.raises(UnknownKeyError, match="mesh"):
        parse_string("[mesh]\nnx = 4\n")


def test_syntax_error_reports_line():
    with pytest.raises(ConfigSyntaxError) as exc:
        parse_string("[grid]\nnx = 8\nthis line has no equals sign\n")
    assert exc.value.line == 3 and exc.value.column == 1
    assert ":3:" in str(exc.value)


def test_bad_value_is_config_error():
    with pytest.raises(ConfigError, match="nx"):
        parse_string("[grid]\nnx = many\n")
    with pytest.raises(ConfigError):
        parse_string("[output]\nformats = gif\n")


def test_warnings_collected():
    rc = parse_string("[grid]\nnx = 8\nny = 8\n[potential]\ntheta = 1.2\n[physics]\nchi = 1.0\nlambda = -1.0\n")
    assert any("theta" in w for w in rc.warnings)
    assert any("lambda * chi" in w for w in rc.warnings)


def test_log_potential_rejects_out_of_range_snapshot(tmp_path):
    g = Grid(8, 8)
    vals = np.zeros(g.shape)
    vals[0, 0] = 1.2
    path = write_snapshot(tmp_path / "phi.snap", ScalarField(g, vals, "phi"))
    with pytest.raises(ConfigError, match="phi0"):
        parse_string(f"[grid]\nnx = 8\nny = 8\n[initial]\nphi = snapshot\nphi_file = {path}\n")


def test_values_at_one_are_clamped_with_warning(tmp_path):
    g = Grid(8, 8)
    vals = np.zeros(g.shape)
    vals[0, 0] = 1.0
    path = write_snapshot(tmp_path / "phi.snap", ScalarField(g, vals, "phi"))
    with pytest.warns(UserWarning):
        rc = parse_string(f"[grid]\nnx = 8\nny = 8\n[initial]\nphi = snapshot\nphi_file = {path}\n")
    with pytest.warns(UserWarning):
        st = build_initial_state(rc)
    assert st.phi.values[0, 0] < 1.0


def test_round_trip(tmp_path):
    text = "[grid]\nnx = 12\nny = 10\n[physics]\nchi = 0.3\nB = 0.001\n[source]\nkind = tabulated\ntimes = 0 1\nvalues = 0.5 1.5\n[stepper]\nn_steps = 7\n"
    rc = parse_string(text)
    once = emit_config(rc)
    rc2 = parse_string(once)
    assert emit_config(rc2) == once
    assert rc2.values == rc.values | {"stepper": rc2.values["stepper"]}
    assert rc2.stepper == rc.stepper
    f = tmp_path / "c.ini"
    f.write_text(once)
    assert emit_config(parse_and_validate(f)) == once


def test_missing_file():
    with pytest.raises(ConfigError):
        parse_and_validate("/nonexistent/config.ini")


def test_seed_override_changes_spinodal():
    rc = parse_string("[grid]\nnx = 8\nny = 8\n")
    a = build_initial_state(rc).phi.values
    b = build_initial_state(rc.with_seed(5)).phi.values
    assert not np.array_equal(a, b)
    np.testing.assert_array_equal(a, build_initial_state(rc).phi.values)


def test_output_dir_env(monkeypatch):
    rc = parse_string("")
    monkeypatch.setenv("NSCHEMO_OUT", "/tmp/elsewhere")
    assert str(rc.output_dir) == "/tmp/elsewhere"
    rc2 = parse_string("[output]\ndirectory = here\n")
    assert str(rc2.output_dir) == "here"
