import json
import os

import numpy as np
import pytest

from parmor import cli, moment_basis, moment_series, nonlinear, psys, rom
from parmor.errors import ConfigInvalid
from parmor.evaluation import Curve

SMALL = {
    "name": "small",
    "system": {"kind": "benchmark", "k": 10},
    "generator": {"interp": "0:2:4"},
    "reduction": {"method": "series"},
    "verification": {"grid": 6},
    "evaluation": {"grid": 8, "h2_grid": 2, "h2_points": 300},
}


def _write(tmp_path, cfg, name="cfg.json"):
    path = tmp_path / name
    path.write_text(json.dumps(cfg))
    return str(path)


def test_bench_gen(tmp_path):
    out = tmp_path / "bench.json"
    assert cli.main(["bench", "gen", "--k", "500", "-o", str(out)]) == 0
    s = psys.load_system(out)
    assert s.n == 1000


def test_subcommand_chain(tmp_path, capsys):
    bench = str(tmp_path / "b.json")
    assert cli.main(["bench", "gen", "--k", "10", "-o", bench]) == 0
    series = str(tmp_path / "ms.json")
    model = str(tmp_path / "model.json")
    assert cli.main(["reduce", "series", "--system", bench, "--interp", "0:2:4", "--order", "4",
                     "--center", "0.55", "-o", series, "--model", model]) == 0
    ms = moment_series.load_series(series)
    assert ms.order == 4 and ms.expansion_point == 0.55
    assert cli.main(["verify", "--system", bench, "--model", model, "--grid", "5"]) == 0
    curve = str(tmp_path / "c.csv")
    assert cli.main(["eval", "--system", bench, "--interp", "0:2:4", "--metric", "l2-moment",
                     "--series", series, "--grid", "6", "-o", curve]) == 0
    assert Curve.from_csv(curve).values.size == 6
    # the series file carries its generator, so --interp is not needed
    assert cli.main(["eval", "--system", bench, "--metric", "l2-moment", "--series", series, "--grid", "6",
                     "-o", curve]) == 0
    assert Curve.from_csv(curve).meta["nu"] == 8
    assert cli.main(["eval", "--system", bench, "--metric", "h2", "--model", model, "--grid", "2",
                     "-o", str(tmp_path / "h2.csv")]) == 0
    weights = str(tmp_path / "w.json")
    bmodel = str(tmp_path / "bm.json")
    assert cli.main(["reduce", "basis", "--system", bench, "--interp", "0:2:4", "--basis", "poly:4",
                     "--K", "6", "-o", weights, "--model", bmodel]) == 0
    assert moment_basis.load_weights(weights).gamma.shape == (4, 8)
    assert cli.main(["verify", "--system", bench, "--model", bmodel, "--grid", "3", "--property", "moment"]) == 0
    capsys.readouterr()
    assert cli.main(["eval", "--system", bench, "--metric", "bode", "--p", "0.5", "--grid", "5"]) == 0
    assert capsys.readouterr().out.startswith("omega,magnitude")


def test_simulate_and_data_reduce(tmp_path):
    bench = str(tmp_path / "b.json")
    cli.main(["bench", "gen", "--k", "10", "-o", bench])
    traj = str(tmp_path / "t.csv")
    assert cli.main(["simulate", "--system", bench, "--interp", "0:1:2", "--p", "0.5", "--t-end", "1",
                     "--dt", "0.01", "-o", traj]) == 0
    assert np.loadtxt(traj, delimiter=",", skiprows=1).shape == (101, 22)
    ds = str(tmp_path / "ds")
    assert cli.main(["simulate", "--system", bench, "--interp", "0:1:2", "--window", "17", "20", "--h", "20",
                     "--K", "5", "-o", ds]) == 0
    w = str(tmp_path / "w.json")
    assert cli.main(["reduce", "data", "--dataset", ds, "--interp", "0:1:2", "--basis", "poly:3", "-o", w]) == 0
    assert moment_basis.load_weights(w).provenance["kind"] == "data_driven"
    assert cli.main(["reduce", "data", "--interp", "0:1:2", "-o", w]) == cli.EXIT_CONFIG


def test_reduce_nl(tmp_path):
    sysm = nonlinear.make_nl_benchmark()
    from parmor import siggen, sim

    gen = siggen.from_frequencies([0.5], omega0=[0.5, 0.0])
    cfg = sim.SimConfig(dt=0.01, t_end=30.0, method="rk4")
    frags = [sim.extract_window(sim.simulate_interconnection(sysm, gen, p, cfg=cfg), gen, 20.0, 30.0, 50)
             for p in (0.5, 1.0, 2.0)]
    ds = moment_basis.SnapshotDataset([0.5, 1.0, 2.0], frags[0].times, frags[0].omega,
                                      np.vstack([f.outputs for f in frags]))
    ds.save(tmp_path / "nl")
    siggen.save_generator(gen, tmp_path / "g.json")
    out = str(tmp_path / "nlrom.json")
    assert cli.main(["reduce", "nl", "--dataset", str(tmp_path / "nl"), "--generator", str(tmp_path / "g.json"),
                     "--rbf", "10", "--seed", "7", "-o", out]) == 0
    m = nonlinear.load_nl_model(out)
    assert m.weights.basis.N == 10 and m.weights.basis.seed == 7


def test_run_experiment_and_determinism(tmp_path):
    path = _write(tmp_path, SMALL)
    run = cli.run_experiment(path, str(tmp_path / "runs"))
    files = set(os.listdir(run))
    assert {"config.resolved.json", "summary.json", "model.json", "verification.json", "h2_error.csv",
            "moment_series.json", "lyapunov_series.json", "generator.json", "system.json"} <= files
    assert {f"moment_error_N{N}.csv" for N in (1, 2, 3, 4)} <= files
    first = open(os.path.join(run, "summary.json"), "rb").read()
    summary = json.loads(first)
    assert summary["stable_on_grid"] is True
    assert summary["moment_error_N4"]["min"] < summary["moment_error_N1"]["min"]
    # identical config -> same directory; forced rerun -> byte-identical summary
    assert cli.run_experiment(path, str(tmp_path / "runs")) == run
    cli.run_experiment(path, str(tmp_path / "runs"), force=True)
    assert open(os.path.join(run, "summary.json"), "rb").read() == first
    model = rom.load_model(os.path.join(run, "model.json"))
    assert model.nu == 8


@pytest.mark.parametrize("method", ["basis", "data"])
def test_run_linear_basis_methods(tmp_path, method):
    cfg = dict(SMALL, name=method, reduction={"method": method, "basis": "poly:4", "K": 6},
               data={"h": 20, "t_start": 17.0, "t_end": 20.0})
    run = cli.run_experiment(_write(tmp_path, cfg), str(tmp_path / "runs"))
    summary = json.load(open(os.path.join(run, "summary.json")))
    assert summary["moment_error"]["max"] < 0.05
    if method == "data":
        assert os.path.exists(os.path.join(run, "dataset", "omega.csv"))


def test_threads_env(tmp_path, monkeypatch):
    monkeypatch.setenv("PARMOR_THREADS", "3")
    assert cli.pmap(lambda x: x * x, range(6)) == [0, 1, 4, 9, 16, 25]
    monkeypatch.setenv("PARMOR_THREADS", "many")
    with pytest.raises(ConfigInvalid):
        cli.pmap(abs, [1, 2])


@pytest.mark.parametrize(
    "patch, path",
    [
        ({"reduction": {"method": "magic"}}, "reduction.method"),
        ({"reduction": {"order": 0}}, "reduction.order"),
        ({"system": {"param_interval": [1.0, 0.1]}}, "system.param_interval"),
        ({"generator": {"interp": "0:3"}}, "generator.interp"),
        ({"data": {"bogus": 1}}, "data.bogus"),
        ({"extra": {}}, "extra"),
        ({"reduction": {"basis": "spline:3"}}, "reduction.basis"),
        ({"reduction": {"center": 5.0}}, "reduction.center"),
    ],
)
def test_config_errors(tmp_path, capsys, patch, path):
    cfg = cli._merge(SMALL, patch)
    with pytest.raises(ConfigInvalid) as info:
        cli.resolve_config(cfg)
    assert info.value.path == path
    code = cli.main(["run", _write(tmp_path, cfg), "--out", str(tmp_path / "r")])
    assert code == cli.EXIT_CONFIG
    assert path in capsys.readouterr().err


def test_invalid_json(tmp_path):
    p = tmp_path / "bad.json"
    p.write_text("{not json")
    assert cli.main(["run", str(p)]) == cli.EXIT_CONFIG


def test_numerical_failure_exit_code(tmp_path):
    # a benchmark whose interval reaches p = 0 puts undamped modes on the imaginary axis
    bench = tmp_path / "b.json"
    psys.save_system(psys.make_benchmark(3, b_range=(1.0, 10.0), param_interval=(0.0, 1.0)), bench)
    code = cli.main(["reduce", "series", "--system", str(bench), "--interp", "0:1:2", "--center", "0.0",
                     "-o", str(tmp_path / "x.json")])
    assert code == cli.EXIT_NUMERICAL


def test_bad_argument_value(tmp_path):
    bench = str(tmp_path / "b.json")
    cli.main(["bench", "gen", "--k", "10", "-o", bench])
    code = cli.main(["reduce", "basis", "--system", bench, "--interp", "0:2:4", "--basis", "spline:3",
                     "-o", str(tmp_path / "w.json")])
    assert code == cli.EXIT_CONFIG


def test_missing_file_exit_code(tmp_path):
    assert cli.main(["verify", "--model", str(tmp_path / "nope.json")]) == cli.EXIT_IO


def test_bundled_configs_validate():
    for name in ("bench_series", "bench_data", "nl_duffing"):
        cfg = cli.load_config(name)
        assert cfg["name"] == name
    series = cli.load_config("bench_series")
    assert series["system"]["k"] == 500 and series["reduction"]["orders"] == [1, 2, 3, 4]
    basis = cli.load_config("bench_data")
    assert basis["data"]["h"] == 64 and basis["reduction"]["K"] == 10
    nl = cli.load_config("nl_duffing")
    assert nl["reduction"]["rbf"] == 40 and nl["reduction"]["K"] == 9
