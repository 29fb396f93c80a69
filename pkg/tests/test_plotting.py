import numpy as np

from spectral_boundary import plotting
from spectral_boundary.regularity import FUNCTIONS, regularity_trend
from spectral_boundary.spectral import (
    cumulative_midpoints,
    fit_heat_coefficients,
    heat_t_range,
    residue_fit,
    weyl_slope,
)

PNG = b"\x89PNG"


def test_figures_written(tmp_path, fd512, small_torus):
    _, sd = fd512
    lam = sd.eigenvalues[~sd.kernel_mask][:20]
    paths = [plotting.plot_spectrum(lam, np.rint(lam), tmp_path / "s.png")]
    fit = residue_fit(sd)
    m = sd.window_mask()
    pts, F = cumulative_midpoints(sd.abs[m], 1 / sd.abs[m])
    paths.append(plotting.plot_residue_fit(pts, F, fit, tmp_path / "r.png"))
    t0, t1 = heat_t_range(sd)
    paths.append(plotting.plot_heat(sd, fit_heat_coefficients(sd, np.geomspace(t0, t1, 10)), tmp_path / "h.png"))
    tsd = small_torus[1]
    paths.append(plotting.plot_weyl(tsd, weyl_slope(tsd), tmp_path / "sub" / "w.png"))
    rep = regularity_trend(FUNCTIONS["cos"], (16, 32, 64), k_max=1, name="cos")
    paths.append(plotting.plot_regularity([rep], tmp_path / "g.png"))
    for p in paths:
        assert p.read_bytes()[:4] == PNG
