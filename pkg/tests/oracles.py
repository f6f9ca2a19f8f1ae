"""Independent reference implementations the tests check the package against.

Everything here is written straight from the discrete definitions (dense
matrices, raw Python loops, exhaustive search) with no imports from the
package's numerical modules, so agreement is meaningful.
"""

from __future__ import annotations

import itertools

import numpy as np


def dense_forward_matrix(a_slice: np.ndarray, sigma: float, h: float, dt: float) -> np.ndarray:
    """One-step transition matrix of the finite-volume scheme.

    Assembled face by face: the right face of cell i carries the upwind
    advective flux at velocity (a_i + a_{i+1})/2 plus the central diffusive
    flux -(sigma^2/2)(m_{i+1} - m_i)/h; each cell then loses its right-face
    flux and gains its left-face flux, scaled by dt/h.
    """
    a_slice = np.asarray(a_slice, dtype=np.float64)
    n = a_slice.size
    nu = 0.5 * sigma * sigma / h
    mat = np.eye(n)
    for i in range(n):
        ip = (i + 1) % n
        af = 0.5 * (a_slice[i] + a_slice[ip])
        flux = np.zeros(n)
        if af > 0.0:
            flux[i] += af
        else:
            flux[ip] += af
        flux[ip] -= nu
        flux[i] += nu
        mat[i] -= (dt / h) * flux
        mat[ip] += (dt / h) * flux
    return mat


def triple_loop_risk(
    a_list,
    m_list,
    psi_list,
    lambda_bar: np.ndarray,
    weights,
    coupling: float,
    h: float,
    dt: float,
):
    """Pooled objective by raw loops: (energy, aversion, terminal).

    ``weights`` is the kernel table (value at cell displacement) or None for
    the local mode, where the penalty is the density itself.
    """
    m_count = len(a_list)
    n_t, n_x = np.asarray(a_list[0]).shape
    energy = 0.0
    for j in range(m_count):
        for k in range(n_t):
            for i in range(n_x):
                energy += 0.5 * a_list[j][k][i] ** 2 * m_list[j][k][i] * h * dt
    aversion = 0.0
    for l in range(m_count):
        for lp in range(m_count):
            if lambda_bar[l][lp] == 0.0:
                continue
            for k in range(n_t):
                for i in range(n_x):
                    if weights is None:
                        pen = m_list[l][k][i]
                    else:
                        pen = 0.0
                        for i2 in range(n_x):
                            pen += h * weights[(i - i2) % n_x] * m_list[l][k][i2]
                    aversion += (
                        coupling * lambda_bar[l][lp] * pen * m_list[lp][k][i] * h * dt
                    )
    terminal = 0.0
    for j in range(m_count):
        for i in range(n_x):
            terminal += psi_list[j][i] * m_list[j][n_t][i] * h
    return energy, aversion, terminal


def geodesic(x: float, y: float, length: float = 1.0) -> float:
    d = abs((x - y) % length)
    return min(d, length - d)


def brute_force_w2_circle(xs, ys, length: float = 1.0) -> float:
    """Exact W2 for tiny samples: minimum over every pairing permutation."""
    xs = list(xs)
    ys = list(ys)
    assert len(xs) == len(ys) <= 7, "factorial search only"
    n = len(xs)
    best = np.inf
    for perm in itertools.permutations(range(n)):
        cost = sum(geodesic(xs[i], ys[perm[i]], length) ** 2 for i in range(n)) / n
        best = min(best, cost)
    return float(np.sqrt(best))


def sampled_indicator_weights(lo: float, hi: float, n_x: int, length: float = 1.0, samples: int = 4001):
    """Cell averages of the normalized indicator of the arc [lo, hi), by
    midpoint sampling inside each cell (accuracy ~ (h/samples))."""
    h = length / n_x
    span = hi - lo
    out = np.zeros(n_x)
    for i in range(n_x):
        left = i * h - 0.5 * h
        pts = left + (np.arange(samples) + 0.5) * (h / samples)
        inside = ((pts - lo) % length) < span
        out[i] = inside.mean() / span
    return out


def heat_fourier_solution(m0: np.ndarray, sigma: float, t: float, length: float = 1.0) -> np.ndarray:
    """Continuum periodic heat solution dm/dt = (sigma^2/2) m_xx from nodal data."""
    n = m0.size
    freq = np.fft.fftfreq(n, d=length / n)
    decay = np.exp(-0.5 * sigma * sigma * (2.0 * np.pi * freq) ** 2 * t)
    return np.real(np.fft.ifft(np.fft.fft(m0) * decay))
