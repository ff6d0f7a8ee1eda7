"""Physical configuration: transducer array, scatterers, imaging window, frequencies.

Conventions
-----------
All lengths are measured in units of the central wavelength lambda_0 and the
wave speed is normalized so that the central wavenumber equals 2*pi (see
:meth:`FrequencySet.centered`).  Points are 3D ``(x, y, z)`` where ``x, y``
are the cross-range axes and ``z`` is the range axis.  Transducers sit in the
plane ``z = 0``.  The imaging window (IW) is a planar rectangle in the x-z
plane; its grid points are ordered row-major with cross-range fastest,
``k = iz * cross_count + ix``.

Everything in this module is an immutable value type (arrays are stored
read-only), safe to share across threads.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass

import numpy as np

from .errors import ScattererOutsideWindowError, TwoScatterersOneCellError

# Relative tolerance for "equally spaced wavenumbers".
EQUISPACED_RTOL = 1e-12


def _readonly(values, dtype=float) -> np.ndarray:
    arr = np.array(values, dtype=dtype)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class ArrayGeometry:
    """Transducer positions, shape ``(N, 3)``, all in the plane ``z = 0``."""

    positions: np.ndarray

    def __post_init__(self):
        pos = np.atleast_2d(np.asarray(self.positions, dtype=float))
        if pos.ndim != 2 or pos.shape[1] != 3:
            raise ValueError("transducer positions must have shape (N, 3)")
        if pos.shape[0] < 1:
            raise ValueError("need at least one transducer")
        if np.any(np.abs(pos[:, 2]) > 1e-12):
            raise ValueError("transducers must lie in the plane z = 0")
        if len({row.tobytes() for row in pos}) != pos.shape[0]:
            raise ValueError("transducer positions must be pairwise distinct")
        object.__setattr__(self, "positions", _readonly(pos))

    @property
    def count(self) -> int:
        return self.positions.shape[0]

    @property
    def cross_range(self) -> np.ndarray:
        """The (x, y) components, shape ``(N, 2)``."""
        return self.positions[:, :2]


def linear_array(count: int, aperture: float) -> ArrayGeometry:
    """Equispaced linear array of size ``aperture`` along x, centered at origin."""
    if count == 1:
        x = np.zeros(1)
    else:
        x = np.linspace(-aperture / 2.0, aperture / 2.0, count)
    pos = np.zeros((count, 3))
    pos[:, 0] = x
    return ArrayGeometry(pos)


@dataclass(frozen=True)
class Scatterer:
    """Point scatterer: continuous position (not grid-snapped) and reflectivity."""

    position: np.ndarray
    reflectivity: complex

    def __post_init__(self):
        pos = np.asarray(self.position, dtype=float).reshape(3)
        if abs(self.reflectivity) == 0.0:
            raise ValueError("reflectivity must be nonzero")
        object.__setattr__(self, "position", _readonly(pos))
        object.__setattr__(self, "reflectivity", complex(self.reflectivity))


@dataclass(frozen=True)
class ImagingGrid:
    """Uniform planar grid over the imaging window.

    ``origin`` is the corner with smallest coordinates.  The window spans
    ``cross_extent`` along x and ``range_extent`` along z; a degenerate axis
    (count 1) must have zero extent and contributes an infinite nominal
    spacing (any offset along it is accepted when assigning scatterers).
    """

    origin: np.ndarray
    cross_extent: float
    range_extent: float
    cross_count: int
    range_count: int

    def __post_init__(self):
        origin = np.asarray(self.origin, dtype=float).reshape(3)
        for name, count, extent in (
            ("cross", self.cross_count, self.cross_extent),
            ("range", self.range_count, self.range_extent),
        ):
            if count < 1:
                raise ValueError(f"{name}_count must be >= 1")
            if count == 1 and extent != 0.0:
                raise ValueError(f"degenerate {name} axis must have zero extent")
            if count > 1 and extent <= 0.0:
                raise ValueError(f"{name}_extent must be positive for {count} points")
        object.__setattr__(self, "origin", _readonly(origin))

    @property
    def point_count(self) -> int:
        return self.cross_count * self.range_count

    @property
    def cross_spacing(self) -> float:
        if self.cross_count == 1:
            return np.inf
        return self.cross_extent / (self.cross_count - 1)

    @property
    def range_spacing(self) -> float:
        if self.range_count == 1:
            return np.inf
        return self.range_extent / (self.range_count - 1)

    @property
    def cell_size(self) -> float:
        """Grid size used by the infinity-norm assignment criterion."""
        finite = [s for s in (self.cross_spacing, self.range_spacing) if np.isfinite(s)]
        return max(finite) if finite else np.inf

    @property
    def standoff(self) -> float:
        """Reference range L of the window (its center)."""
        return float(self.origin[2] + self.range_extent / 2.0)

    def points(self) -> np.ndarray:
        """All grid points, shape ``(K, 3)``, cross-range fastest."""
        x = self.origin[0] + self.cross_spacing_vector()
        z = self.origin[2] + self.range_spacing_vector()
        xs, zs = np.meshgrid(x, z)  # rows over z, columns over x
        pts = np.empty((self.point_count, 3))
        pts[:, 0] = xs.ravel()
        pts[:, 1] = self.origin[1]
        pts[:, 2] = zs.ravel()
        return pts

    def cross_spacing_vector(self) -> np.ndarray:
        if self.cross_count == 1:
            return np.zeros(1)
        return np.linspace(0.0, self.cross_extent, self.cross_count)

    def range_spacing_vector(self) -> np.ndarray:
        if self.range_count == 1:
            return np.zeros(1)
        return np.linspace(0.0, self.range_extent, self.range_count)

    def cross_range_parts(self) -> np.ndarray:
        """Cross-range components (x, y) of every grid point, shape ``(K, 2)``."""
        return self.points()[:, :2]

    def range_offsets(self) -> np.ndarray:
        """Offsets eta_k = z_k - L of every grid point from the standoff range."""
        return self.points()[:, 2] - self.standoff

    def flat_index(self, ix: int, iz: int) -> int:
        return iz * self.cross_count + ix

    def axis_indices(self, k: int) -> tuple[int, int]:
        return k % self.cross_count, k // self.cross_count

    def cell_coordinates(self, positions: np.ndarray) -> np.ndarray:
        """Fractional grid coordinates (ix, iz) of 3D points, in cell units.

        Degenerate axes map to coordinate 0.
        """
        pos = np.atleast_2d(np.asarray(positions, dtype=float))
        out = np.zeros((pos.shape[0], 2))
        if self.cross_count > 1:
            out[:, 0] = (pos[:, 0] - self.origin[0]) / self.cross_spacing
        if self.range_count > 1:
            out[:, 1] = (pos[:, 2] - self.origin[2]) / self.range_spacing
        return out


@dataclass(frozen=True)
class FrequencySet:
    """Angular frequencies (strictly increasing) plus the background wave speed."""

    omegas: np.ndarray
    wave_speed: float = 1.0

    def __post_init__(self):
        om = np.atleast_1d(np.asarray(self.omegas, dtype=float))
        if om.ndim != 1 or om.size < 1:
            raise ValueError("need at least one frequency")
        if np.any(om <= 0):
            raise ValueError("frequencies must be positive")
        if om.size > 1 and np.any(np.diff(om) <= 0):
            raise ValueError("frequencies must be strictly increasing")
        if self.wave_speed <= 0:
            raise ValueError("wave speed must be positive")
        object.__setattr__(self, "omegas", _readonly(om))

    @classmethod
    def centered(cls, count: int, fractional_bandwidth: float = 0.0,
                 wave_speed: float = 1.0) -> "FrequencySet":
        """Equally spaced band around the normalized central frequency.

        The central angular frequency is ``2*pi*wave_speed`` so that the
        central wavenumber is ``2*pi`` and lambda_0 = 1.
        """
        omega_c = 2.0 * np.pi * wave_speed
        if count == 1:
            return cls(np.array([omega_c]), wave_speed)
        if fractional_bandwidth <= 0:
            raise ValueError("fractional_bandwidth must be positive for count > 1")
        half = fractional_bandwidth / 2.0
        omegas = np.linspace(omega_c * (1 - half), omega_c * (1 + half), count)
        return cls(omegas, wave_speed)

    @property
    def count(self) -> int:
        return self.omegas.size

    @property
    def kappas(self) -> np.ndarray:
        return self.omegas / self.wave_speed

    @property
    def kappa_central(self) -> float:
        k = self.kappas
        return float((k[0] + k[-1]) / 2.0)

    @property
    def bandwidth(self) -> float:
        """Angular-frequency bandwidth B_w = omega_S - omega_1."""
        return float(self.omegas[-1] - self.omegas[0])

    @property
    def equally_spaced(self) -> bool:
        k = self.kappas
        if k.size <= 2:
            return True
        d = np.diff(k)
        return float(d.max() - d.min()) <= EQUISPACED_RTOL * float(d.max())


@dataclass(frozen=True)
class ReflectivityVector:
    """Discrete reflectivity over the grid; support is the nonzero index set."""

    values: np.ndarray

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=complex).reshape(-1)
        object.__setattr__(self, "values", _readonly(vals, dtype=complex))

    @property
    def support(self) -> tuple[int, ...]:
        return tuple(int(i) for i in np.flatnonzero(self.values))

    @property
    def sparsity(self) -> int:
        return len(self.support)

    @property
    def floor_magnitude(self) -> float:
        """mu = min |rho_i| over the support (0.0 for an empty vector)."""
        t = self.support
        if not t:
            return 0.0
        return float(np.min(np.abs(self.values[list(t)])))


@dataclass(frozen=True)
class Scene:
    """Immutable experiment configuration; read-only input of every module."""

    array: ArrayGeometry
    scatterers: tuple[Scatterer, ...]
    grid: ImagingGrid
    frequencies: FrequencySet

    def __post_init__(self):
        object.__setattr__(self, "scatterers", tuple(self.scatterers))

    def scatterer_positions(self) -> np.ndarray:
        if not self.scatterers:
            return np.zeros((0, 3))
        return np.stack([s.position for s in self.scatterers])

    def reflectivities(self) -> np.ndarray:
        return np.array([s.reflectivity for s in self.scatterers], dtype=complex)

    def content_hash(self) -> str:
        h = hashlib.sha256()
        h.update(self.array.positions.tobytes())
        h.update(self.scatterer_positions().tobytes())
        h.update(self.reflectivities().tobytes())
        g = self.grid
        h.update(g.origin.tobytes())
        h.update(np.array([g.cross_extent, g.range_extent], dtype=float).tobytes())
        h.update(np.array([g.cross_count, g.range_count], dtype=np.int64).tobytes())
        h.update(self.frequencies.omegas.tobytes())
        h.update(np.float64(self.frequencies.wave_speed).tobytes())
        return h.hexdigest()


def grid_points(grid: ImagingGrid) -> np.ndarray:
    """Grid points y_1..y_K in row-major order (cross-range fastest)."""
    return grid.points()


def _nearest_index(distances: np.ndarray) -> int:
    """Index of the smallest entry; near-ties resolved to the lowest index."""
    dmin = float(distances.min())
    tied = np.flatnonzero(distances <= dmin * (1.0 + 1e-12))
    return int(tied[0])


def discretize_reflectivity(scene: Scene) -> ReflectivityVector:
    """Map continuous scatterers to the grid reflectivity vector.

    Each scatterer is assigned to the nearest grid point in the infinity
    norm; the distance must be below the grid size.  When several grid
    points are equidistant (e.g. a half-cell displacement in both axes),
    the lowest flat index wins.

    Raises
    ------
    ScattererOutsideWindowError
        If no grid point satisfies the infinity-norm criterion.
    TwoScatterersOneCellError
        If two scatterers map to the same grid index.
    """
    pts = scene.grid.points()
    cell = scene.grid.cell_size
    values = np.zeros(scene.grid.point_count, dtype=complex)
    owner: dict[int, int] = {}
    for j, scat in enumerate(scene.scatterers):
        dist = np.max(np.abs(pts - scat.position[None, :]), axis=1)
        k = _nearest_index(dist)
        if not dist[k] < cell:
            raise ScattererOutsideWindowError(
                f"scatterer {j} at {scat.position} is {dist[k]:.3g} from the "
                f"nearest grid point (grid size {cell:.3g})"
            )
        if k in owner:
            raise TwoScatterersOneCellError(
                f"scatterers {owner[k]} and {j} both map to grid index {k}"
            )
        owner[k] = j
        values[k] = scat.reflectivity
    return ReflectivityVector(values)


@dataclass(frozen=True)
class DelayScene:
    """One-transducer multifrequency configuration (the 1D problem).

    ``true_delays`` hold the transducer-to-scatterer distances of the actual
    scatterers; ``candidate_delays`` is the search grid of K delays that the
    model matrix is built over.
    """

    true_delays: np.ndarray
    reflectivities: np.ndarray
    candidate_delays: np.ndarray

    def __post_init__(self):
        td = np.atleast_1d(np.asarray(self.true_delays, dtype=float))
        rf = np.atleast_1d(np.asarray(self.reflectivities, dtype=complex))
        cd = np.atleast_1d(np.asarray(self.candidate_delays, dtype=float))
        if td.size != rf.size:
            raise ValueError("one reflectivity per true delay")
        if cd.size < 1 or (cd.size > 1 and np.any(np.diff(cd) <= 0)):
            raise ValueError("candidate delays must be strictly increasing")
        object.__setattr__(self, "true_delays", _readonly(td))
        object.__setattr__(self, "reflectivities", _readonly(rf, dtype=complex))
        object.__setattr__(self, "candidate_delays", _readonly(cd))

    @property
    def candidate_count(self) -> int:
        return self.candidate_delays.size

    @property
    def spacing(self) -> float:
        if self.candidate_delays.size == 1:
            return np.inf
        return float(np.min(np.diff(self.candidate_delays)))

    def content_hash(self) -> str:
        h = hashlib.sha256()
        h.update(self.true_delays.tobytes())
        h.update(self.reflectivities.tobytes())
        h.update(self.candidate_delays.tobytes())
        return h.hexdigest()


def discretize_delays(scene1d: DelayScene) -> ReflectivityVector:
    """1D analog of :func:`discretize_reflectivity` over the candidate delays."""
    cand = scene1d.candidate_delays
    cell = scene1d.spacing
    values = np.zeros(cand.size, dtype=complex)
    owner: dict[int, int] = {}
    for j, (y, rho) in enumerate(zip(scene1d.true_delays, scene1d.reflectivities)):
        dist = np.abs(cand - y)
        k = _nearest_index(dist)
        if not dist[k] < cell:
            raise ScattererOutsideWindowError(
                f"delay {j} at {y} is outside the candidate span"
            )
        if k in owner:
            raise TwoScatterersOneCellError(
                f"delays {owner[k]} and {j} both map to candidate {k}"
            )
        owner[k] = j
        values[k] = rho
    return ReflectivityVector(values)


def random_scene(
    *,
    transducers: int,
    aperture: float,
    standoff: float,
    iw_cross: float,
    iw_range: float,
    grid_cross: int,
    grid_range: int,
    num_scatterers: int,
    seed: int,
    freq_count: int = 1,
    fractional_bandwidth: float = 0.0,
    min_separation: float = 0.0,
    amplitude_range: tuple[float, float] = (0.5, 2.0),
    offgrid_shift: float = 0.0,
) -> Scene:
    """Random scene with scatterers on (or uniformly displaced from) grid points.

    ``offgrid_shift`` displaces every scatterer by that fraction of the grid
    spacing in both cross-range and range (0.5 reproduces the half-cell
    off-grid setup); shifted scatterers keep away from the top grid edge so
    they stay inside the window.  Scatterer grid cells are drawn with pairwise
    Euclidean separation at least ``min_separation``.
    """
    rng = np.random.default_rng(seed)
    grid = ImagingGrid(
        origin=np.array([-iw_cross / 2.0, 0.0, standoff - iw_range / 2.0]),
        cross_extent=iw_cross,
        range_extent=iw_range,
        cross_count=grid_cross,
        range_count=grid_range,
    )
    pts = grid.points()
    max_ix = grid_cross - 1 if offgrid_shift == 0 else grid_cross - 2
    max_iz = grid_range - 1 if offgrid_shift == 0 else grid_range - 2
    if max_ix < 0 or max_iz < 0:
        raise ValueError("grid too small for the requested off-grid shift")
    chosen: list[int] = []
    for _ in range(10000):
        if len(chosen) == num_scatterers:
            break
        ix = int(rng.integers(0, max_ix + 1))
        iz = int(rng.integers(0, max_iz + 1))
        k = grid.flat_index(ix, iz)
        if k in chosen:
            continue
        if min_separation > 0 and chosen:
            d = np.linalg.norm(pts[chosen] - pts[k][None, :], axis=1)
            if np.min(d) < min_separation:
                continue
        chosen.append(k)
    if len(chosen) != num_scatterers:
        raise ValueError("could not place scatterers with the requested separation")

    shift = np.array([
        offgrid_shift * (0.0 if grid.cross_count == 1 else grid.cross_spacing),
        0.0,
        offgrid_shift * (0.0 if grid.range_count == 1 else grid.range_spacing),
    ])
    lo, hi = amplitude_range
    scatterers = []
    for k in chosen:
        amp = rng.uniform(lo, hi)
        phase = rng.uniform(0.0, 2.0 * np.pi)
        scatterers.append(Scatterer(pts[k] + shift, amp * np.exp(1j * phase)))
    return Scene(
        array=linear_array(transducers, aperture),
        scatterers=tuple(scatterers),
        grid=grid,
        frequencies=FrequencySet.centered(freq_count, fractional_bandwidth),
    )


def random_delay_scene(
    *,
    candidate_count: int,
    span: float,
    offset: float,
    num_scatterers: int,
    seed: int,
    on_grid: bool = True,
) -> DelayScene:
    """Random 1D delay scene over a uniform candidate-delay grid."""
    rng = np.random.default_rng(seed)
    cand = offset + np.linspace(0.0, span, candidate_count)
    idx = rng.choice(candidate_count, size=num_scatterers, replace=False)
    delays = cand[np.sort(idx)]
    if not on_grid:
        half = span / (candidate_count - 1) / 2.0
        delays = delays + rng.uniform(-half, half, size=num_scatterers)
    amps = rng.uniform(0.5, 2.0, size=num_scatterers)
    phases = rng.uniform(0.0, 2.0 * np.pi, size=num_scatterers)
    return DelayScene(delays, amps * np.exp(1j * phases), cand)
