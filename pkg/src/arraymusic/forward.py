"""Born-approximation array data: Green's functions, response matrices, noise.

The響 response at receiver r due to a unit pulse from source s is
``P(x_r, x_s; w) = sum_j alpha_j G(x_r, z_j; w) G(z_j, x_s; w)`` with the
free-space Green's function ``G(x, y; w) = exp(i*kappa*|x-y|) / (4*pi*|x-y|)``.
True continuous scatterer positions are used (never the grid-snapped ones).

All functions are pure; noise is injected only through :func:`add_noise`,
which is deterministic given its seed.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import CoincidentPointsError, DimensionMismatchError, ZeroSignalError
from .scene import ArrayGeometry, Scene

FOUR_PI = 4.0 * np.pi


def green_scalar(x: np.ndarray, y: np.ndarray, kappa: float) -> complex:
    """Free-space Green's function exp(i*kappa*r) / (4*pi*r), r = |x - y|."""
    r = float(np.linalg.norm(np.asarray(x, float) - np.asarray(y, float)))
    if r == 0.0:
        raise CoincidentPointsError("source and observation points coincide")
    return complex(np.exp(1j * kappa * r) / (FOUR_PI * r))


def green_vector(y: np.ndarray, kappa: float, array: ArrayGeometry) -> np.ndarray:
    """Green's function vector g(y; w): component r is G(x_r, y; w)."""
    r = np.linalg.norm(array.positions - np.asarray(y, float)[None, :], axis=1)
    if np.any(r == 0.0):
        raise CoincidentPointsError("point coincides with a transducer")
    return np.exp(1j * kappa * r) / (FOUR_PI * r)


def green_matrix(points: np.ndarray, kappa: float, array: ArrayGeometry) -> np.ndarray:
    """Columns g(y_k; w) for many points at once, shape ``(N, K)``."""
    pts = np.atleast_2d(np.asarray(points, float))
    diff = array.positions[:, None, :] - pts[None, :, :]
    r = np.linalg.norm(diff, axis=2)
    if np.any(r == 0.0):
        raise CoincidentPointsError("a point coincides with a transducer")
    return np.exp(1j * kappa * r) / (FOUR_PI * r)


@dataclass(frozen=True)
class Illumination:
    """Signals sent from the N sources, with a label for provenance."""

    vector: np.ndarray
    label: str

    def __post_init__(self):
        vec = np.asarray(self.vector, dtype=complex).reshape(-1)
        if vec.size < 1 or not np.any(vec):
            raise ValueError("illumination vector must be nonzero")
        vec = vec.copy()
        vec.setflags(write=False)
        object.__setattr__(self, "vector", vec)


def point_illumination(n: int, q: int) -> Illumination:
    """Basis illumination e_q (0-based)."""
    vec = np.zeros(n, dtype=complex)
    vec[q] = 1.0
    return Illumination(vec, f"e{q}")


def point_illuminations(n: int) -> list[Illumination]:
    return [point_illumination(n, q) for q in range(n)]


def response_matrix(scene: Scene, freq_index: int) -> np.ndarray:
    """Single-frequency response matrix P(w_l), symmetric N x N.

    Accumulated one scatterer at a time in a fixed order, so the response of
    a union of scatterers is bit-identical to the sum of the single-scatterer
    responses (and independent of any BLAS accumulation strategy).
    """
    kappa = scene.frequencies.kappas[freq_index]
    positions = scene.scatterer_positions()
    n = scene.array.count
    out = np.zeros((n, n), dtype=complex)
    if positions.shape[0] == 0:
        return out
    g = green_matrix(positions, kappa, scene.array)  # (N, M)
    for j, alpha in enumerate(scene.reflectivities()):
        out += alpha * np.outer(g[:, j], g[:, j])
    return out


@dataclass(frozen=True)
class ResponseTensor:
    """Echo tensor P[r, s, l] over receivers, sources and frequencies."""

    entries: np.ndarray

    def __post_init__(self):
        ent = np.asarray(self.entries, dtype=complex)
        if ent.ndim != 3 or ent.shape[0] != ent.shape[1]:
            raise ValueError("entries must have shape (N, N, S)")
        ent = ent.copy()
        ent.setflags(write=False)
        object.__setattr__(self, "entries", ent)

    @property
    def transducer_count(self) -> int:
        return self.entries.shape[0]

    @property
    def frequency_count(self) -> int:
        return self.entries.shape[2]

    def matrix(self, freq_index: int) -> np.ndarray:
        return self.entries[:, :, freq_index]


def response_tensor(scene: Scene) -> ResponseTensor:
    n = scene.array.count
    s = scene.frequencies.count
    out = np.empty((n, n, s), dtype=complex)
    for l in range(s):
        out[:, :, l] = response_matrix(scene, l)
    return ResponseTensor(out)


def apply_illumination(p_matrix: np.ndarray, illumination: Illumination) -> np.ndarray:
    """Echoes P f recorded at the N receivers."""
    p = np.asarray(p_matrix, dtype=complex)
    if p.ndim != 2 or p.shape[1] != illumination.vector.size:
        raise DimensionMismatchError(
            f"matrix {p.shape} incompatible with illumination of length "
            f"{illumination.vector.size}"
        )
    return p @ illumination.vector


def noise_scale(signal: np.ndarray, snr_db: float) -> float:
    """Per-entry noise standard deviation for the Frobenius-power SNR definition.

    sigma^2 = ||B||_F^2 / (count * 10^(snr_db/10)); raises on zero signal.
    """
    arr = np.asarray(signal)
    power = float(np.sum(np.abs(arr) ** 2))
    if power == 0.0:
        raise ZeroSignalError("cannot scale noise against a zero signal")
    return float(np.sqrt(power / (arr.size * 10.0 ** (snr_db / 10.0))))


def complex_gaussian(shape, sigma: float, rng: np.random.Generator) -> np.ndarray:
    """Circular complex Gaussian entries with per-entry variance sigma^2."""
    scale = sigma / np.sqrt(2.0)
    return rng.normal(0.0, scale, shape) + 1j * rng.normal(0.0, scale, shape)


def add_noise(signal: np.ndarray, snr_db: float, seed: int) -> np.ndarray:
    """Signal plus i.i.d. circular complex Gaussian noise at the requested SNR.

    Deterministic for a given seed (numpy PCG64 stream; numpy guarantees
    stream stability across platforms and releases).
    """
    arr = np.asarray(signal, dtype=complex)
    sigma = noise_scale(arr, snr_db)
    rng = np.random.default_rng(seed)
    return arr + complex_gaussian(arr.shape, sigma, rng)
