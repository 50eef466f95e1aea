"""Hot inner loops, numba-compiled when available.

The 2D-Markov message-passing sweeps are loop-carried recursions over
the sub-array lattice and dominate the VR detector's runtime, so they
are compiled with numba's @njit. Setting the environment variable
``XLMIMO_NO_NUMBA=1`` (or running without numba installed) selects the
plain-Python fallback, which executes the identical code path and
produces bit-identical results. ``benchmarks/bench_kernels.py``
compares the two.
"""

from __future__ import annotations

import os

import numpy as np

_DISABLE = os.environ.get("XLMIMO_NO_NUMBA", "").lower() in ("1", "true", "yes")

try:
    if _DISABLE:
        raise ImportError
    from numba import njit

    NUMBA_ENABLED = True
except ImportError:
    NUMBA_ENABLED = False

    def njit(*args, **kwargs):
        def deco(f):
            return f
        return deco


PROB_FLOOR = 1e-12
PROB_CEIL = 1.0 - 1e-12


def _bp_sweeps_impl(gl, gr, gt, gb, pi1, pi0,
                    p01_x, p10_x, p01_z, p10_z, n_sweeps):
    """Alternating raster / anti-raster sum-product sweeps, in place.

    Message arrays are (n_sub, k_x, k_z) Bernoulli parameters: gl/gt
    hold the forward (from left / from top) messages into each node,
    gr/gb the backward ones. Boundary slots hold their phantom values
    (0.5, or the steady-state prior in the corner's gl) and are never
    written. The raster pass updates gl/gt, the anti-raster pass gr/gb,
    both using the freshest available neighbor values.
    """
    n_sub, k_x, k_z = gl.shape
    p11_x = 1.0 - p10_x
    p00_x = 1.0 - p01_x
    p11_z = 1.0 - p10_z
    p00_z = 1.0 - p01_z
    for sweep in range(n_sweeps):
        forward = sweep % 2 == 0
        for q in range(n_sub):
            if forward:
                for ix in range(k_x):
                    for iz in range(k_z):
                        if ix > 0:
                            # from the node above, excluding its bottom input
                            w1 = (pi1[q, ix - 1, iz] * gl[q, ix - 1, iz]
                                  * gr[q, ix - 1, iz] * gt[q, ix - 1, iz])
                            w0 = (pi0[q, ix - 1, iz] * (1.0 - gl[q, ix - 1, iz])
                                  * (1.0 - gr[q, ix - 1, iz])
                                  * (1.0 - gt[q, ix - 1, iz]))
                            den = w1 + w0
                            if den > 0.0:
                                g = (p11_x * w1 + p01_x * w0) / den
                                gt[q, ix, iz] = min(max(g, PROB_FLOOR), PROB_CEIL)
                        if iz > 0:
                            # from the node to the left, excluding its right input
                            w1 = (pi1[q, ix, iz - 1] * gl[q, ix, iz - 1]
                                  * gt[q, ix, iz - 1] * gb[q, ix, iz - 1])
                            w0 = (pi0[q, ix, iz - 1] * (1.0 - gl[q, ix, iz - 1])
                                  * (1.0 - gt[q, ix, iz - 1])
                                  * (1.0 - gb[q, ix, iz - 1]))
                            den = w1 + w0
                            if den > 0.0:
                                g = (p11_z * w1 + p01_z * w0) / den
                                gl[q, ix, iz] = min(max(g, PROB_FLOOR), PROB_CEIL)
            else:
                for ix in range(k_x - 1, -1, -1):
                    for iz in range(k_z - 1, -1, -1):
                        if ix < k_x - 1:
                            w1 = (pi1[q, ix + 1, iz] * gl[q, ix + 1, iz]
                                  * gr[q, ix + 1, iz] * gb[q, ix + 1, iz])
                            w0 = (pi0[q, ix + 1, iz] * (1.0 - gl[q, ix + 1, iz])
                                  * (1.0 - gr[q, ix + 1, iz])
                                  * (1.0 - gb[q, ix + 1, iz]))
                            num = p11_x * w1 + p10_x * w0
                            den = (p11_x + p01_x) * w1 + (p00_x + p10_x) * w0
                            if den > 0.0:
                                gb[q, ix, iz] = min(max(num / den, PROB_FLOOR),
                                                    PROB_CEIL)
                        if iz < k_z - 1:
                            w1 = (pi1[q, ix, iz + 1] * gr[q, ix, iz + 1]
                                  * gt[q, ix, iz + 1] * gb[q, ix, iz + 1])
                            w0 = (pi0[q, ix, iz + 1] * (1.0 - gr[q, ix, iz + 1])
                                  * (1.0 - gt[q, ix, iz + 1])
                                  * (1.0 - gb[q, ix, iz + 1]))
                            num = p11_z * w1 + p10_z * w0
                            den = (p11_z + p01_z) * w1 + (p00_z + p10_z) * w0
                            if den > 0.0:
                                gr[q, ix, iz] = min(max(num / den, PROB_FLOOR),
                                                    PROB_CEIL)


bp_sweeps_python = _bp_sweeps_impl

if NUMBA_ENABLED:
    bp_sweeps = njit(cache=True)(_bp_sweeps_impl)
else:
    bp_sweeps = _bp_sweeps_impl
