"""Command-line interface and config-driven experiment runner."""

from __future__ import annotations

import argparse
import copy
import hashlib
import json
import os
import sys
import warnings
from concurrent.futures import ThreadPoolExecutor
from importlib import resources

import numpy as np

from . import evaluation, moment_basis, moment_series, nonlinear, psys, rom, sim, siggen
from .errors import ConfigInvalid, DimensionMismatch, NumericalFailure, ParmorError

EXIT_OK = 0
EXIT_CONFIG = 3
EXIT_NUMERICAL = 4
EXIT_OTHER = 5
EXIT_IO = 6

METHODS = ("series", "basis", "data", "nl")

DEFAULTS = {
    "name": "experiment",
    "system": {"kind": "benchmark", "k": 500, "param_interval": [0.1, 1.0]},
    "generator": {"interp": "0:3.1:50", "freqs": None, "include_zero": False, "L": None, "omega0": None},
    "reduction": {
        "method": "series",
        "order": 4,
        "orders": [1, 2, 3, 4],
        "center": 0.55,
        "Q": "identity",
        "epsilon": 1e-14,
        "basis": "poly:6",
        "K": 10,
        "ridge": None,
        "gain": "auto",
        "rbf": 40,
        "width": 1.0,
        "seed": 7,
        "delta": 1.0,
    },
    "data": {
        "t_start": 17.38,
        "t_end": 20.0,
        "h": 64,
        "dt": None,
        "method": "auto",
        "noise_std": 0.0,
        "noise_seed": 0,
    },
    "verification": {"grid": 50, "property": "stability"},
    "evaluation": {"grid": 200, "h2_grid": 0, "h2_points": 1000, "heldout": [0.8, 1.7]},
}

_KNOWN = {sec: set(v) if isinstance(v, dict) else None for sec, v in DEFAULTS.items()}


def pmap(fn, items):
    """Map over ``items`` with up to ``PARMOR_THREADS`` worker threads (default 1)."""
    items = list(items)
    try:
        workers = max(1, int(os.environ.get("PARMOR_THREADS", "1")))
    except ValueError as exc:
        raise ConfigInvalid("PARMOR_THREADS must be an integer", "env.PARMOR_THREADS") from exc
    if workers == 1 or len(items) < 2:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=workers) as ex:
        return list(ex.map(fn, items))


# -- configuration -----------------------------------------------------------


def _merge(base, over):
    out = copy.deepcopy(base)
    for key, val in over.items():
        if isinstance(val, dict) and isinstance(out.get(key), dict):
            out[key] = _merge(out[key], val)
        else:
            out[key] = val
    return out


def _method_defaults(method):
    """Defaults that differ by pipeline (the linear ones follow the benchmark study)."""
    if method in ("basis", "data"):
        return {"generator": {"interp": "0:3.1:16"}}
    if method == "nl":
        return {
            "system": {"kind": "nl_duffing", "param_interval": [0.5, 2.0]},
            "generator": {"interp": None, "freqs": [0.5], "omega0": [0.5, 0.0]},
            "reduction": {"K": 9},
            "data": {"t_start": 160.0 - 4.0 * np.pi, "t_end": 160.0, "h": 200, "dt": 0.01},
        }
    return {}


def _req(cond, msg, path):
    if not cond:
        raise ConfigInvalid(msg, path)


def _num(x):
    return isinstance(x, (int, float)) and not isinstance(x, bool) and np.isfinite(x)


def resolve_config(raw):
    """Validate ``raw`` and fill in defaults.

    Raises
    ------
    ConfigInvalid
        With the dotted path of the first offending field.
    """
    _req(isinstance(raw, dict), "config must be a JSON object", "")
    for sec, val in raw.items():
        _req(sec in DEFAULTS, f"unknown section {sec!r}", sec)
        if _KNOWN[sec] is not None:
            _req(isinstance(val, dict), "section must be an object", sec)
            for key in val:
                _req(key in _KNOWN[sec], f"unknown field {key!r}", f"{sec}.{key}")
    method = raw.get("reduction", {}).get("method", DEFAULTS["reduction"]["method"])
    _req(method in METHODS, f"method must be one of {METHODS}", "reduction.method")
    cfg = _merge(_merge(DEFAULTS, _method_defaults(method)), raw)
    s, g, r, d, v, e = (cfg[k] for k in ("system", "generator", "reduction", "data", "verification", "evaluation"))
    _req(isinstance(cfg["name"], str) and cfg["name"], "must be a nonempty string", "name")

    _req(s["kind"] in ("benchmark", "file", "nl_duffing"), "unknown system kind", "system.kind")
    pi = s.get("param_interval")
    _req(
        isinstance(pi, list) and len(pi) == 2 and all(_num(x) for x in pi) and pi[0] < pi[1],
        "must be [lo, hi] with lo < hi",
        "system.param_interval",
    )
    if s["kind"] == "benchmark":
        _req(isinstance(s.get("k"), int) and s["k"] >= 1, "must be a positive integer", "system.k")
    if s["kind"] == "file":
        _req(isinstance(s.get("path"), str), "file systems need a path", "system.path")
    _req((method == "nl") == (s["kind"] == "nl_duffing"), "nl pipeline needs the nl_duffing system", "system.kind")

    if g.get("freqs") is not None:
        _req(isinstance(g["freqs"], list) and all(_num(x) and x >= 0 for x in g["freqs"]),
             "must be a list of nonnegative numbers", "generator.freqs")
    else:
        _req(isinstance(g.get("interp"), str), "give either freqs or an interp grid lo:hi:count", "generator.interp")
        try:
            siggen.parse_interp_grid(g["interp"])
        except ValueError as exc:
            raise ConfigInvalid(str(exc), "generator.interp") from exc

    for key in ("order", "K", "rbf"):
        _req(isinstance(r[key], int) and r[key] >= 1, "must be a positive integer", f"reduction.{key}")
    _req(isinstance(r["orders"], list) and all(isinstance(x, int) and x >= 1 for x in r["orders"]),
         "must be a list of positive integers", "reduction.orders")
    _req(_num(r["center"]) and pi[0] <= r["center"] <= pi[1], "must lie in the parameter interval", "reduction.center")
    _req(r["Q"] == "identity", "only 'identity' is supported", "reduction.Q")
    _req(_num(r["epsilon"]) and r["epsilon"] >= 0, "must be >= 0", "reduction.epsilon")
    _req(r["ridge"] is None or (_num(r["ridge"]) and r["ridge"] > 0), "must be null or > 0", "reduction.ridge")
    _req(r["gain"] in ("auto", "preserving", "placed", "riccati"), "unknown gain kind", "reduction.gain")
    _req(_num(r["width"]) and r["width"] > 0, "must be > 0", "reduction.width")
    _req(isinstance(r["seed"], int), "must be an integer", "reduction.seed")
    _req(_num(r["delta"]) and r["delta"] > 0, "must be > 0", "reduction.delta")
    try:
        moment_basis.BasisSet.parse(r["basis"])
    except (ValueError, AttributeError) as exc:
        raise ConfigInvalid(str(exc), "reduction.basis") from exc

    _req(_num(d["t_start"]) and _num(d["t_end"]) and 0 <= d["t_start"] < d["t_end"],
         "need 0 <= t_start < t_end", "data.t_start")
    _req(isinstance(d["h"], int) and d["h"] >= 2, "must be an integer >= 2", "data.h")
    _req(d["dt"] is None or (_num(d["dt"]) and d["dt"] > 0), "must be null or > 0", "data.dt")
    _req(d["method"] in ("auto", "rk4", "expm"), "unknown method", "data.method")
    _req(_num(d["noise_std"]) and d["noise_std"] >= 0, "must be >= 0", "data.noise_std")
    _req(isinstance(d["noise_seed"], int), "must be an integer", "data.noise_seed")

    _req(isinstance(v["grid"], int) and v["grid"] >= 1, "must be a positive integer", "verification.grid")
    _req(v["property"] in ("stability", "moment", "none"), "unknown property", "verification.property")
    for key in ("grid", "h2_grid"):
        _req(isinstance(e[key], int) and e[key] >= 0, "must be a nonnegative integer", f"evaluation.{key}")
    _req(isinstance(e["h2_points"], int) and e["h2_points"] >= 2, "must be an integer >= 2", "evaluation.h2_points")
    _req(isinstance(e["heldout"], list) and all(_num(x) for x in e["heldout"]), "must be a list of numbers",
         "evaluation.heldout")
    _req(method != "nl" or all(pi[0] <= x <= pi[1] for x in e["heldout"]),
         "must be parameters inside the interval", "evaluation.heldout")
    return cfg


def config_hash(cfg):
    return hashlib.sha256(json.dumps(cfg, sort_keys=True).encode()).hexdigest()[:12]


def bundled_config(name):
    """Path of a config shipped with the package (``bench_series``, ``bench_data``, ``nl_duffing``)."""
    ref = resources.files("parmor") / "configs" / f"{name}.json"
    if not ref.is_file():
        raise FileNotFoundError(f"no bundled config named {name!r}")
    return str(ref)


def load_config(path):
    if not os.path.exists(path) and not path.endswith(".json"):
        path = bundled_config(path)
    with open(path) as fh:
        try:
            raw = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigInvalid(f"invalid JSON: {exc}", "") from exc
    return resolve_config(raw)


# -- building blocks ---------------------------------------------------------


def build_system(scfg):
    if scfg["kind"] == "benchmark":
        return psys.make_benchmark(scfg["k"], param_interval=tuple(scfg["param_interval"]))
    if scfg["kind"] == "nl_duffing":
        return nonlinear.make_nl_benchmark(tuple(scfg["param_interval"]))
    return psys.load_system(scfg["path"])


def build_generator(gcfg):
    freqs = gcfg["freqs"] if gcfg.get("freqs") is not None else siggen.parse_interp_grid(gcfg["interp"])
    return siggen.from_frequencies(freqs, gcfg.get("include_zero", False), gcfg.get("L"), gcfg.get("omega0"))


def _dump(obj, path):
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=1, sort_keys=True)


def _grid(pi, count):
    return np.linspace(pi[0], pi[1], count)


def _exact_rows(system, gen, grid):
    return pmap(lambda p: moment_series.exact_moment(system, gen, p), grid)


def _errors_vs(rows, grid, fn):
    return np.array([np.linalg.norm(fn(p) - ref) / np.linalg.norm(ref) for p, ref in zip(grid, rows)])


def _write_curve(run, fname, grid, vals, ylabel, meta):
    evaluation.Curve(grid, vals, "p", ylabel, meta).to_csv(os.path.join(run, fname))


def _constant_gain(gen, kind):
    return rom.riccati_gain(gen) if kind == "riccati" else rom.place_gain(gen)


def _verify(model, system, cfg, run):
    v = cfg["verification"]
    if v["property"] == "none":
        return {}
    grid = _grid(cfg["system"]["param_interval"], v["grid"])
    if v["property"] == "stability":
        rep = rom.verify_preservation_grid(model, system, "stability", grid)
        _dump(rep.to_dict(), os.path.join(run, "verification.json"))
        return {"stable_on_grid": rep.passed, "max_real_part": float(np.max(rep.values))}
    reps = pmap(lambda p: rom.verify_moment_matching(model, system, p), grid)
    _dump([r.to_dict() for r in reps], os.path.join(run, "verification.json"))
    return {"max_transfer_deviation": max(r.transfer_deviation for r in reps)}


def _h2(system, model, cfg, run, summary):
    e = cfg["evaluation"]
    if e["h2_grid"] == 0:
        return
    grid = _grid(cfg["system"]["param_interval"], e["h2_grid"])
    wgrid = evaluation.h2_grid(points=e["h2_points"])
    curve = evaluation.h2_error_curve(system, model, grid, wgrid)
    curve.to_csv(os.path.join(run, "h2_error.csv"))
    summary["h2_max"] = float(curve.values.max())
    summary["h2_min"] = float(curve.values.min())


def _run_series(cfg, system, gen, run):
    r, e = cfg["reduction"], cfg["evaluation"]
    orders = sorted(set(r["orders"]) | {r["order"]})
    ms = moment_series.nested_sylvester(system, gen, r["center"], max(orders))
    grid = _grid(cfg["system"]["param_interval"], e["grid"])
    summary = {}
    if e["grid"]:
        rows = _exact_rows(system, gen, grid)
        for N in orders:
            sub = moment_series.MomentSeries(ms.expansion_point, ms.coeffs[:N], gen, ms.param_interval)
            approx = rom.SeriesMoment(sub, system)
            vals = _errors_vs(rows, grid, approx)
            meta = {"metric": evaluation.MOMENT_NORM, "N": N, "center": r["center"]}
            _write_curve(run, f"moment_error_N{N}.csv", grid, vals, "rel_l2_error", meta)
            summary[f"moment_error_N{N}"] = {"max": float(vals.max()), "min": float(vals.min())}
    series = moment_series.MomentSeries(ms.expansion_point, ms.coeffs[: r["order"]], gen, ms.param_interval)
    moment_series.save_series(series, os.path.join(run, "moment_series.json"))
    mmap = rom.SeriesMoment(series, system)
    if r["gain"] in ("auto", "preserving"):
        ls = moment_series.nested_lyapunov(system, r["center"], r["order"])
        moment_series.save_series(ls, os.path.join(run, "lyapunov_series.json"))
        gain = rom.PreservingGain(mmap, rom.SeriesCertificate(ls), system, r["epsilon"])
    else:
        gain = rom.ConstantGain(_constant_gain(gen, r["gain"]), gen)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        model = rom.assemble(gen, gain, mmap, system)
        rom.save_model(model, os.path.join(run, "model.json"))
        summary.update(_verify(model, system, cfg, run))
        _h2(system, model, cfg, run, summary)
    return summary


def _run_linear_basis(cfg, system, gen, run):
    r, d, e = cfg["reduction"], cfg["data"], cfg["evaluation"]
    pi = cfg["system"]["param_interval"]
    basis = moment_basis.BasisSet.parse(r["basis"])
    params = _grid(pi, r["K"])
    summary = {}
    if r["method"] == "basis":
        if r["ridge"] is None:
            w = moment_basis.fit_model_based(system, gen, basis, params)
        else:
            w = moment_basis.fit_ridge(system, gen, basis, params, r["ridge"])
    else:
        simcfg = sim.window_config(d["t_start"], d["t_end"], d["h"], d["method"], d["dt"])
        frags = pmap(
            lambda p: sim.extract_window(
                sim.simulate_interconnection(system, gen, p, cfg=simcfg), gen, d["t_start"], d["t_end"], d["h"]
            ),
            params,
        )
        data = moment_basis.SnapshotDataset(
            params, frags[0].times, frags[0].omega, np.vstack([f.outputs for f in frags])
        )
        if d["noise_std"] > 0:
            data = sim.add_output_noise(data, d["noise_std"], d["noise_seed"])
        data.save(os.path.join(run, "dataset"))
        w = moment_basis.fit_data_driven(data, basis, ridge=r["ridge"], param_interval=pi)
    moment_basis.save_weights(w, os.path.join(run, "weights.json"))
    if e["grid"]:
        grid = _grid(pi, e["grid"])
        vals = _errors_vs(_exact_rows(system, gen, grid), grid, w)
        meta = {"metric": evaluation.MOMENT_NORM, "basis": r["basis"], "K": r["K"]}
        _write_curve(run, "moment_error.csv", grid, vals, "rel_l2_error", meta)
        summary["moment_error"] = {"max": float(vals.max()), "min": float(vals.min())}
    kind = "placed" if r["gain"] in ("auto", "preserving") else r["gain"]
    model = rom.assemble(gen, _constant_gain(gen, kind), rom.BasisMoment(w), system)
    rom.save_model(model, os.path.join(run, "model.json"))
    summary.update(_verify(model, system, cfg, run))
    _h2(system, model, cfg, run, summary)
    return summary


def nl_settings(cfg):
    d = cfg["data"]
    dt = 0.01 if d["dt"] is None else d["dt"]
    return sim.SimConfig(dt=dt, t_end=d["t_end"], method="rk4", t_record=max(0.0, d["t_start"] - 1.0))


def nrms(reference, estimate):
    """``rms(estimate - reference) / rms(reference)``."""
    reference = np.asarray(reference)
    return float(np.sqrt(np.mean((np.asarray(estimate) - reference) ** 2) / np.mean(reference**2)))


def _run_nl(cfg, system, gen, run):
    r, d, e = cfg["reduction"], cfg["data"], cfg["evaluation"]
    pi = cfg["system"]["param_interval"]
    params = _grid(pi, r["K"])
    simcfg = nl_settings(cfg)
    frags = pmap(
        lambda p: sim.extract_window(
            sim.simulate_interconnection(system, gen, p, cfg=simcfg), gen, d["t_start"], d["t_end"], d["h"]
        ),
        params,
    )
    data = moment_basis.SnapshotDataset(params, frags[0].times, frags[0].omega, np.vstack([f.outputs for f in frags]))
    if d["noise_std"] > 0:
        data = sim.add_output_noise(data, d["noise_std"], d["noise_seed"])
    data.save(os.path.join(run, "dataset"))
    basis = nonlinear.make_rbf_basis(data, r["rbf"], r["width"], r["seed"])
    theta = nonlinear.fit_nonlinear_moment(data, basis, ridge=r["ridge"])
    model = nonlinear.assemble_nonlinear_rom(gen, r["delta"], theta, tuple(pi))
    nonlinear.save_nl_model(model, os.path.join(run, "model.json"))
    summary = {"nrms": {}}
    for p in e["heldout"]:
        full = sim.simulate_interconnection(system, gen, p, cfg=simcfg)
        red = sim.simulate_interconnection(model, gen, p, cfg=simcfg)
        m = full.times >= d["t_start"] - 1e-9
        summary["nrms"][f"{p:g}"] = nrms(full.outputs[m], red.outputs[m])
    return summary


def run_experiment(config_path, out_root="runs", force=False):
    """Run the pipeline described by a config file; returns the run directory.

    The directory name carries a hash of the resolved config, so a rerun of
    an identical config lands in the same place.  An existing completed run
    is left untouched unless ``force`` is set.
    """
    cfg = load_config(config_path) if isinstance(config_path, str) else resolve_config(config_path)
    run = os.path.join(out_root, f"{cfg['name']}-{config_hash(cfg)}")
    if os.path.exists(os.path.join(run, "summary.json")) and not force:
        return run
    os.makedirs(run, exist_ok=True)
    _dump(cfg, os.path.join(run, "config.resolved.json"))
    system = build_system(cfg["system"])
    gen = build_generator(cfg["generator"])
    siggen.save_generator(gen, os.path.join(run, "generator.json"))
    if isinstance(system, psys.ParametricLTI):
        psys.save_system(system, os.path.join(run, "system.json"))
    method = cfg["reduction"]["method"]
    if method == "series":
        summary = _run_series(cfg, system, gen, run)
    elif method == "nl":
        summary = _run_nl(cfg, system, gen, run)
    else:
        summary = _run_linear_basis(cfg, system, gen, run)
    summary = {"name": cfg["name"], "method": method, "config_hash": config_hash(cfg), **summary}
    _dump(summary, os.path.join(run, "summary.json"))
    return run


# -- subcommands -------------------------------------------------------------


def _gen_from_args(args):
    if getattr(args, "generator", None):
        return siggen.load_generator(args.generator)
    return siggen.from_frequencies(siggen.parse_interp_grid(args.interp), args.include_zero)


def _add_gen_args(p, default="0:3.1:50"):
    p.add_argument("--generator", help="generator JSON (overrides --interp)")
    p.add_argument("--interp", default=default, help="log10 frequency grid lo:hi:count")
    p.add_argument("--include-zero", action="store_true", help="add a zero eigenvalue")


def _load_system_arg(path, k=500):
    return psys.load_system(path) if path else psys.make_benchmark(k)


def cmd_bench_gen(args):
    system = psys.make_benchmark(args.k, param_interval=tuple(args.param_interval))
    psys.save_system(system, args.output)
    print(f"wrote n={system.n} benchmark to {args.output}")


def cmd_simulate(args):
    system = _load_system_arg(args.system)
    gen = _gen_from_args(args)
    if args.window:
        t0, t1 = args.window
        params = (
            np.linspace(*system.param_interval, args.K) if args.p is None else np.atleast_1d(args.p)
        )
        cfg = sim.window_config(t0, t1, args.h, args.method, None if args.method != "rk4" else args.dt)
        data = sim.collect_snapshots(system, gen, params, t0, t1, args.h, cfg)
        if args.noise_std > 0:
            data = sim.add_output_noise(data, args.noise_std, args.noise_seed)
        data.save(args.output)
        print(f"wrote dataset (K={data.K}, h={data.h}) to {args.output}")
        return
    if args.p is None:
        raise ConfigInvalid("either --p or --window is required", "simulate.p")
    if len(args.p) != 1:
        raise ConfigInvalid("a single --p value is required without --window", "simulate.p")
    cfg = sim.SimConfig(dt=args.dt, t_end=args.t_end, method=args.method, record_stride=args.stride)
    traj = sim.simulate_interconnection(system, gen, args.p[0], cfg=cfg)
    traj.to_csv(args.output)
    print(f"wrote {len(traj.times)} samples to {args.output}")


def cmd_reduce(args):
    if args.kind == "nl":
        data = moment_basis.SnapshotDataset.load(args.dataset)
        gen = _gen_from_args(args)
        basis = nonlinear.make_rbf_basis(data, args.rbf, args.width, args.seed)
        theta = nonlinear.fit_nonlinear_moment(data, basis, ridge=args.ridge)
        model = nonlinear.assemble_nonlinear_rom(gen, args.delta, theta)
        nonlinear.save_nl_model(model, args.output)
        print(f"wrote nonlinear ROM (nu={gen.nu}, N={basis.N}) to {args.output}")
        return
    gen = _gen_from_args(args)
    if args.kind == "data":
        data = moment_basis.SnapshotDataset.load(args.dataset)
        w = moment_basis.fit_data_driven(data, moment_basis.BasisSet.parse(args.basis), ridge=args.ridge)
        moment_basis.save_weights(w, args.output)
        print(f"wrote weights {w.gamma.shape} to {args.output}")
        return
    system = _load_system_arg(args.system)
    if args.kind == "series":
        ms = moment_series.nested_sylvester(system, gen, args.center, args.order)
        moment_series.save_series(ms, args.output)
        print(f"wrote series N={args.order} at p0={args.center} to {args.output}")
        if args.model:
            ls = moment_series.nested_lyapunov(system, args.center, args.order)
            mm = rom.SeriesMoment(ms, system)
            gain = rom.PreservingGain(mm, rom.SeriesCertificate(ls), system, args.epsilon)
            rom.save_model(rom.assemble(gen, gain, mm, system), args.model)
        return
    params = np.linspace(*system.param_interval, args.K)
    basis = moment_basis.BasisSet.parse(args.basis)
    if args.ridge is None:
        w = moment_basis.fit_model_based(system, gen, basis, params)
    else:
        w = moment_basis.fit_ridge(system, gen, basis, params, args.ridge)
    moment_basis.save_weights(w, args.output)
    print(f"wrote weights {w.gamma.shape} to {args.output}")
    if args.model:
        rom.save_model(rom.assemble(gen, rom.place_gain(gen), rom.BasisMoment(w), system), args.model)


def cmd_verify(args):
    system = _load_system_arg(args.system)
    model = rom.load_model(args.model)
    grid = np.linspace(*system.param_interval, args.grid)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        if args.property == "stability":
            out = rom.verify_preservation_grid(model, system, "stability", grid).to_dict()
            ok = out["passed"]
        else:
            reps = [rom.verify_moment_matching(model, system, p) for p in grid]
            out = [r.to_dict() for r in reps]
            ok = all(r.passed for r in reps)
    text = json.dumps(out, indent=1)
    if args.output:
        with open(args.output, "w") as fh:
            fh.write(text)
    print(f"{args.property}: {'passed' if ok else 'FAILED'} on {args.grid} grid points")
    return EXIT_OK if ok else EXIT_NUMERICAL


def cmd_eval(args):
    system = _load_system_arg(args.system)
    grid = np.linspace(*system.param_interval, args.grid)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        if args.metric == "l2-moment":
            if args.series:
                approx = moment_series.load_series(args.series)
            elif args.weights:
                approx = moment_basis.load_weights(args.weights)
            else:
                raise ConfigInvalid("l2-moment needs --series or --weights", "eval.approx")
            # a series file carries its generator; an explicit --generator still wins
            stored = getattr(approx, "generator", None)
            gen = stored if stored is not None and not args.generator else _gen_from_args(args)
            if gen.nu != approx.nu:
                raise DimensionMismatch(f"moment has nu = {approx.nu}, generator has nu = {gen.nu}")
            curve = evaluation.moment_error_curve(system, gen, approx, grid)
        elif args.metric == "h2":
            if not args.model:
                raise ConfigInvalid("h2 needs --model", "eval.model")
            curve = evaluation.h2_error_curve(system, rom.load_model(args.model), grid)
        else:
            obj = rom.load_model(args.model) if args.model else system
            curve = evaluation.bode_magnitude(obj, args.p, np.logspace(-1, 4, args.grid))
    if args.output:
        curve.to_csv(args.output)
    else:
        sys.stdout.write(f"{curve.xlabel},{curve.ylabel}\n")
        for a, b in zip(curve.x, curve.values):
            sys.stdout.write(f"{a:.10g},{b:.10g}\n")


def cmd_run(args):
    run = run_experiment(args.config, args.out, args.force)
    print(run)


def build_parser():
    ap = argparse.ArgumentParser(prog="parmor", description="Parametric moment-matching model reduction")
    sub = ap.add_subparsers(dest="command", required=True)

    bench = sub.add_parser("bench", help="benchmark systems")
    bsub = bench.add_subparsers(dest="bench_command", required=True)
    gen = bsub.add_parser("gen", help="write the block-diagonal benchmark")
    gen.add_argument("--k", type=int, default=500, help="number of 2x2 blocks (n = 2k)")
    gen.add_argument("--param-interval", type=float, nargs=2, default=[0.1, 1.0])
    gen.add_argument("-o", "--output", default="bench.json")
    gen.set_defaults(func=cmd_bench_gen)

    s = sub.add_parser("simulate", help="simulate the plant driven by the generator")
    s.add_argument("--system", help="system JSON (default: n=1000 benchmark)")
    _add_gen_args(s, "0:3.1:16")
    s.add_argument("--p", type=float, nargs="*", default=None)
    s.add_argument("--t-end", type=float, default=20.0)
    s.add_argument("--dt", type=float, default=1e-3)
    s.add_argument("--method", choices=("auto", "rk4", "expm"), default="auto")
    s.add_argument("--stride", type=int, default=1)
    s.add_argument("--window", type=float, nargs=2, help="collect a snapshot dataset on [t0, t1]")
    s.add_argument("--h", type=int, default=64)
    s.add_argument("--K", type=int, default=10)
    s.add_argument("--noise-std", type=float, default=0.0)
    s.add_argument("--noise-seed", type=int, default=0)
    s.add_argument("-o", "--output", default="trajectory.csv")
    s.set_defaults(func=cmd_simulate)

    r = sub.add_parser("reduce", help="estimate a parametric moment")
    r.add_argument("kind", choices=("series", "basis", "data", "nl"))
    r.add_argument("--system")
    _add_gen_args(r)
    r.add_argument("--order", type=int, default=4)
    r.add_argument("--center", type=float, default=0.55)
    r.add_argument("--epsilon", type=float, default=rom.DEFAULT_EPS)
    r.add_argument("--basis", default="poly:6")
    r.add_argument("--K", type=int, default=10)
    r.add_argument("--ridge", type=float, default=None)
    r.add_argument("--dataset")
    r.add_argument("--rbf", type=int, default=40)
    r.add_argument("--width", type=float, default=1.0)
    r.add_argument("--seed", type=int, default=7)
    r.add_argument("--delta", type=float, default=1.0)
    r.add_argument("--model", help="also write an assembled reduced model")
    r.add_argument("-o", "--output", default="moment.json")
    r.set_defaults(func=cmd_reduce)

    v = sub.add_parser("verify", help="grid verification of a reduced model")
    v.add_argument("--system")
    v.add_argument("--model", required=True)
    v.add_argument("--grid", type=int, default=50)
    v.add_argument("--property", choices=("stability", "moment"), default="stability")
    v.add_argument("-o", "--output")
    v.set_defaults(func=cmd_verify)

    e = sub.add_parser("eval", help="error curves")
    e.add_argument("--system")
    _add_gen_args(e)
    e.add_argument("--metric", choices=("l2-moment", "h2", "bode"), default="l2-moment")
    e.add_argument("--series")
    e.add_argument("--weights")
    e.add_argument("--model")
    e.add_argument("--p", type=float, default=0.55)
    e.add_argument("--grid", type=int, default=200)
    e.add_argument("-o", "--output")
    e.set_defaults(func=cmd_eval)

    run = sub.add_parser("run", help="run a full experiment from a config file")
    run.add_argument("config", help="config path or bundled name (bench_series, bench_data, nl_duffing)")
    run.add_argument("--out", default="runs")
    run.add_argument("--force", action="store_true")
    run.set_defaults(func=cmd_run)
    return ap


def main(argv=None):
    args = build_parser().parse_args(argv)
    if args.command == "reduce" and args.kind in ("data", "nl") and not args.dataset:
        print("error: reduce data/nl needs --dataset", file=sys.stderr)
        return EXIT_CONFIG
    try:
        code = args.func(args)
    except ConfigInvalid as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericalFailure as exc:
        print(f"numerical failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except ParmorError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_OTHER
    except (FileNotFoundError, PermissionError) as exc:
        print(f"io error: {exc}", file=sys.stderr)
        return EXIT_IO
    except ValueError as exc:
        print(f"invalid argument: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    return EXIT_OK if code is None else code


if __name__ == "__main__":
    sys.exit(main())
