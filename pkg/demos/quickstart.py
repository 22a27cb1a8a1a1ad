"""Reduce a small benchmark three ways and print the moment and H2 errors.

Run with ``python3 demos/quickstart.py`` after installing the package.
"""

import warnings

import numpy as np

from parmor import moment_basis, moment_series, psys, rom, siggen, sim
from parmor.evaluation import h2_relative_error_gramian, moment_error_curve

# Pi(p) of a lightly damped benchmark is ill conditioned; the gain stays regularised
warnings.simplefilter("ignore", RuntimeWarning)

system = psys.make_benchmark(20)
gen = siggen.from_frequencies(siggen.parse_interp_grid("0:3.1:6"))
params = np.linspace(0.1, 1.0, 8)
grid = np.linspace(0.1, 1.0, 10)

# series expansion around the middle of the interval, with a stability-preserving gain
ms = moment_series.nested_sylvester(system, gen, 0.55, 4)
ls = moment_series.nested_lyapunov(system, 0.55, 4)
mm = rom.SeriesMoment(ms, system)
series_rom = rom.assemble(gen, rom.PreservingGain(mm, rom.SeriesCertificate(ls), system), mm, system)

# polynomial basis fitted to Sylvester solutions at the training parameters
basis = moment_basis.BasisSet.polynomial(5)
w_model = moment_basis.fit_model_based(system, gen, basis, params)

# the same basis fitted to steady-state input/output snapshots
cfg = sim.window_config(17.0, 20.0, 30, "expm")
data = sim.collect_snapshots(system, gen, params, 17.0, 20.0, 30, cfg)
w_data = moment_basis.fit_data_driven(data, basis)
data_rom = rom.assemble(gen, rom.place_gain(gen), rom.BasisMoment(w_data), system)

for label, approx in (("series N=4", ms), ("basis, model", w_model), ("basis, data", w_data)):
    curve = moment_error_curve(system, gen, approx, grid)
    print(f"{label:14s} max moment error {curve.values.max():.2e}")

for p in (0.1, 0.55, 1.0):
    s = h2_relative_error_gramian(system, series_rom, p)
    d = h2_relative_error_gramian(system, data_rom, p)
    print(f"p = {p:4.2f}  H2 error  series {s:.3f}  data {d:.3f}")
