import hashlib
import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nmcavity import cli
from nmcavity.config import ConfigError, InitialState, RunConfig, parse, serialize
from nmcavity.figures import UnknownFigureError, figure_config, reproduce_figure
from nmcavity.plotting import PlotError, emit_plots
from nmcavity.reservoir import kelvin_to_theta
from nmcavity.runner import read_csv, run, worker_count

SMALL = dict(t_end=10.0, n_steps=1000, output_points=201)


def digest(directory, pattern):
    return {p.name: hashlib.sha256(p.read_bytes()).hexdigest() for p in sorted(directory.glob(pattern))}


def test_config_defaults_and_theta():
    cfg = RunConfig()
    assert cfg.resolved_theta == 0.0
    assert RunConfig(temperature_k=2.0).resolved_theta == pytest.approx(kelvin_to_theta(2.0))
    assert cfg.dt == 0.005


def test_config_field_errors():
    with pytest.raises(ConfigError) as err:
        RunConfig(s=(), eta=(-1.0,), theta=1.0, temperature_k=2.0, outputs=("bogus",))
    assert set(err.value.errors) == {"s", "eta", "theta", "outputs"}
    with pytest.raises(ConfigError) as err:
        RunConfig(initial=InitialState(kind="cat"))
    assert "initial.kind" in err.value.errors
    with pytest.raises(ConfigError) as err:
        parse('{"etaa": [0.1]}')
    assert "etaa" in err.value.errors
    with pytest.raises(ConfigError):
        parse("{not json")
    with pytest.raises(ConfigError):
        parse('{"format_version": 99}')


finite = st.floats(min_value=0.01, max_value=10, allow_nan=False)


@settings(max_examples=50, deadline=None)
@given(st.lists(finite, min_size=1, max_size=3), st.lists(st.floats(0, 2), min_size=1, max_size=3),
       st.one_of(st.none(), st.floats(0, 50)), st.sampled_from(["vacuum", "coherent", "thermal"]),
       finite, finite, st.integers(2, 50000))
def test_config_round_trip(s, eta, theta, kind, re, n0, steps):
    cfg = RunConfig(s=tuple(s), eta=tuple(eta), theta=theta, n_steps=steps,
                    initial=InitialState(kind=kind, alpha0=(re, -re), n0=n0), compare=("bm", "oracle"))
    assert parse(serialize(cfg)) == cfg


def test_uncoupled_point(tmp_path):
    summary, ok = run(RunConfig(eta=(0.0,), theta=12.5, **SMALL), tmp_path)
    assert ok
    data = read_csv(tmp_path / "point_s1_eta0.csv")
    assert np.all(data["abs_u"] == 1.0)
    assert np.all(data["v"] == 0.0)
    assert np.max(np.abs(data["kappa"])) < 1e-12


def test_csv_is_finite_with_sentinel_column(tmp_path):
    run(RunConfig(s=(3.0,), eta=(1.0,), theta=1.0, compare=("bm", "second_order"), **SMALL), tmp_path)
    data = read_csv(tmp_path / "point_s3_eta1.csv")
    assert "coef_valid" in data
    assert all(np.all(np.isfinite(col)) for col in data.values())
    meta = json.loads((tmp_path / "point_s3_eta1.meta.json").read_text())
    assert meta["format_version"] == 1
    assert meta["config"]["eta"] == [1.0]
    assert "tolerances" in meta and "code_version" in meta


def test_runs_are_byte_identical(tmp_path):
    cfg = RunConfig(s=(0.5, 1.0), eta=(0.1, 0.6), theta=2.0, initial=InitialState(kind="thermal", n0=5.0),
                    outputs=("green", "coefficients", "observables", "populations"), **SMALL)
    run(cfg, tmp_path / "a")
    run(cfg, tmp_path / "b")
    assert digest(tmp_path / "a", "*") == digest(tmp_path / "b", "*")


def test_serial_and_parallel_sweeps_agree(tmp_path):
    cfg = RunConfig(s=(0.5, 3.0), eta=(0.2, 0.8), theta=1.0, **SMALL)
    run(cfg, tmp_path / "serial", workers=1)
    run(cfg, tmp_path / "parallel", workers=2)
    assert digest(tmp_path / "serial", "point_*") == digest(tmp_path / "parallel", "point_*")


def test_summary_matches_csv(tmp_path):
    summary, _ = run(RunConfig(s=(3.0,), eta=(0.6, 1.0), theta=12.5, **SMALL), tmp_path)
    for point in summary["points"]:
        data = read_csv(tmp_path / point["csv"])
        tail = data["t"] >= data["t"][-1] - 5.0
        assert abs(point["steady_abs_u"] - np.mean(data["abs_u"][tail])) < 1e-9
        assert point["bound_mode"]["exists"]


def test_failed_point_does_not_abort_sweep(tmp_path, monkeypatch):
    import nmcavity.runner as runner

    real = runner.solve

    def flaky(cfg, grid):
        if cfg.spectral.eta == 0.2:
            raise RuntimeError("injected")
        return real(cfg, grid)

    monkeypatch.setattr(runner, "solve", flaky)
    summary, ok = run(RunConfig(eta=(0.1, 0.2), **SMALL), tmp_path)
    assert not ok
    status = {p["eta"]: p["status"] for p in summary["points"]}
    assert status == {0.1: "ok", 0.2: "error"}
    assert (tmp_path / "point_s1_eta0.1.csv").exists()


def test_worker_count_env(monkeypatch):
    monkeypatch.setenv("NMCAVITY_WORKERS", "3")
    assert worker_count() == 3
    assert worker_count(2) == 2
    monkeypatch.setenv("NMCAVITY_WORKERS", "lots")
    with pytest.raises(ConfigError):
        worker_count()


def test_figure_settings():
    assert figure_config("fig6").resolved_theta == pytest.approx(0.0125, rel=0.01)
    assert figure_config("fig5").resolved_theta == pytest.approx(12.5, rel=0.01)
    assert figure_config("fig5").initial.n0 == 50
    f4 = figure_config("fig4")
    assert f4.s == (0.5,) and f4.eta == (0.1,) and f4.t_end > 50
    assert set(figure_config("fig1").eta) >= {0.02, 0.1, 0.4, 1.0}
    with pytest.raises(UnknownFigureError):
        figure_config("fig7")


@pytest.fixture(scope="module")
def fig1_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("fig1")
    reproduce_figure("fig1", out, t_end=10.0, n_steps=1000)
    return out


def test_fig1_one_image_per_eta_panel(fig1_dir):
    paths = emit_plots(fig1_dir)
    assert len(paths) == 8
    assert sorted(p.name for p in paths) == sorted(f"fig1_eta{e:g}.png" for e in
                                                   (0.02, 0.1, 0.2, 0.3, 0.4, 0.6, 0.8, 1.0))


def test_fig1_weak_coupling_tracks_bm(fig1_dir):
    data = read_csv(fig1_dir / "point_s1_eta0.02.csv")
    assert np.max(np.abs(data["abs_u"] - data["abs_u_bm"])) < 0.05


def test_plots_are_deterministic(fig1_dir, tmp_path):
    for sub in ("a", "b"):
        (tmp_path / sub).mkdir()
        emit_plots(fig1_dir, tmp_path / sub)
    assert digest(tmp_path / "a", "*.png") == digest(tmp_path / "b", "*.png")


def test_plot_errors(tmp_path):
    with pytest.raises(PlotError, match="figure.json"):
        emit_plots(tmp_path)
    run(RunConfig(outputs=("coefficients",), compare=(), **SMALL), tmp_path)
    manifest = {"figure": "x", "title": "", "panels": [
        {"file": "x.png", "title": "", "xlabel": "t", "ylabel": "y",
         "series": [{"csv": "point_s1_eta0.1.csv", "column": "abs_u", "label": "a", "style": "-"},
                    {"csv": "nothere.csv", "column": "v", "label": "b", "style": "-"}]}]}
    (tmp_path / "figure.json").write_text(json.dumps(manifest))
    with pytest.raises(PlotError) as err:
        emit_plots(tmp_path)
    assert "nothere.csv" in str(err.value) and "abs_u" in str(err.value)


def test_cli_run_with_config_file_and_overrides(tmp_path, capsys):
    conf = tmp_path / "run.json"
    conf.write_text(serialize(RunConfig(eta=(0.1,), theta=1.0, **SMALL)))
    code = cli.main(["run", "--config", str(conf), "--eta", "0.3", "--out", str(tmp_path / "out"), "--plot"])
    assert code == 0
    summary = json.loads((tmp_path / "out" / "summary.json").read_text())
    assert [p["eta"] for p in summary["points"]] == [0.3]
    assert summary["config"]["theta"] == 1.0
    assert list((tmp_path / "out").glob("*.png"))


def test_cli_errors(tmp_path, capsys):
    assert cli.main(["run", "--eta", "-1", "--out", str(tmp_path)]) == 2
    assert "eta" in capsys.readouterr().err
    assert cli.main(["figure", "fig0", "--out", str(tmp_path)]) == 2
    assert cli.main(["plot", str(tmp_path / "missing")]) == 2


def test_cli_oracle_check(tmp_path, capsys):
    code = cli.main(["oracle-check", "--eta", "0.1", "--theta", "2", "--t-end", "10", "--n-steps", "2000",
                     "--modes", "800", "--json", str(tmp_path / "o.json")])
    assert code == 0
    rows = json.loads((tmp_path / "o.json").read_text())
    assert rows[0]["pass"] and rows[0]["max_du"] < 1e-3
