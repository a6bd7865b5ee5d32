"""Directional wavelet tiling of the ball.

Prints the scales of a tiling, the worst deviation from the resolution of
identity and the reconstruction error of analysis followed by synthesis.

    python3 demos/wavelets.py
"""

import numpy as np

from ballreg import BallBandProfile, build_tiling, wavelet_analysis, wavelet_synthesis
from ballreg.wavelets import identity_residual

prof = BallBandProfile(L=16, P=16)
t = build_tiling(prof, N=3, lam_ang=2.0, lam_rad=2.0, J0_ang=1)
print(f"angular scales {t.J0_ang}..{t.J_ang}, radial scales {t.J0_rad}..{t.J_rad}, N={t.N}")
print(f"identity residual {identity_residual(t):.2e}")

rng = np.random.default_rng(1)
c = rng.standard_normal(prof.coeff_shape) + 1j * rng.standard_normal(prof.coeff_shape)
w = wavelet_analysis(c, t)
err = np.linalg.norm(wavelet_synthesis(w, t).values - c) / np.linalg.norm(c)
print(f"synthesis error {err:.2e}")
print(f"energy ratio {w.energy() / np.sum(np.abs(c) ** 2):.15f}")
