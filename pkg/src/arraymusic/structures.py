"""MMV data matrices and the model-matrix families that factorize them.

Every builder returns the assembled data matrix together with the family
``(A, Lambda_q)`` such that column q of the noise-free data equals
``A @ diag(lambda_rule(q)) @ rho`` -- exactly for the single-frequency and
Toeplitz structures, approximately (paraxial regime) for the multifrequency
stacks.  The excitation diagonals are materialized as a K x aleph table whose
columns are the lambda_rule values; that table is precisely the parameter
matrix L used by the robustness analysis.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    DimensionMismatchError,
    NotEquispacedError,
    OddFrequencyCountError,
)
from .forward import (
    FOUR_PI,
    Illumination,
    ResponseTensor,
    green_matrix,
    response_matrix,
)
from .scene import DelayScene, FrequencySet, Scene


class DataMatrixKind(enum.Enum):
    SINGLE_FREQ = "single_freq"
    PRONY_TOEPLITZ = "prony_toeplitz"
    PC_STACK = "pc_stack"
    PD_BLOCK = "pd_block"
    M_SINGLE = "m_single"
    MC_STACK = "mc_stack"


class Exactness(enum.Enum):
    EXACT = "exact"
    PARAXIAL_APPROX = "paraxial_approx"


#: Kinds whose imaging vectors must be conjugated before projection; their
#: data matrices are built from adjoint products, so the signal subspace is
#: the conjugate of the model-column span (pinned by the calibration test).
CONJUGATED_KINDS = frozenset({DataMatrixKind.M_SINGLE, DataMatrixKind.MC_STACK})


def default_conjugation(kind: DataMatrixKind) -> bool:
    return kind in CONJUGATED_KINDS


@dataclass(frozen=True)
class Provenance:
    scene_hash: str
    illuminations: tuple[str, ...] = ()
    noise: str = "none"


@dataclass(frozen=True)
class DataMatrix:
    entries: np.ndarray
    kind: DataMatrixKind
    provenance: Provenance

    def __post_init__(self):
        ent = np.asarray(self.entries, dtype=complex)
        if ent.ndim != 2:
            raise ValueError("data matrix must be 2-dimensional")
        ent = ent.copy()
        ent.setflags(write=False)
        object.__setattr__(self, "entries", ent)

    @property
    def shape(self) -> tuple[int, int]:
        return self.entries.shape

    def with_noise(self, entries: np.ndarray, descriptor: str) -> "DataMatrix":
        """Same structure with perturbed entries and an updated noise tag."""
        prov = Provenance(self.provenance.scene_hash, self.provenance.illuminations,
                          descriptor)
        return DataMatrix(entries, self.kind, prov)


@dataclass(frozen=True)
class ModelMatrixFamily:
    """Universal matrix A plus the per-excitation diagonal rule.

    ``excitation_diagonals[:, q]`` is the diagonal of Lambda_q; the table
    doubles as the parameter matrix L (entry l_kq).  ``column_norms`` keeps
    the l2 norms of the stored A columns so the imaging functional's
    numerator stays available after normalization.
    """

    matrix: np.ndarray
    excitation_diagonals: np.ndarray
    kind: DataMatrixKind
    exactness: Exactness
    column_norms: np.ndarray = field(default=None)  # type: ignore[assignment]
    grid_shape: tuple[int, int] | None = None
    note: str = ""

    def __post_init__(self):
        a = np.asarray(self.matrix, dtype=complex)
        lam = np.asarray(self.excitation_diagonals, dtype=complex)
        if a.ndim != 2 or lam.ndim != 2 or lam.shape[0] != a.shape[1]:
            raise DimensionMismatchError(
                "excitation table must have one row per model column"
            )
        norms = np.linalg.norm(a, axis=0)
        if np.any(norms == 0.0):
            raise ValueError("model matrix has a zero column")
        a = a.copy()
        a.setflags(write=False)
        lam = lam.copy()
        lam.setflags(write=False)
        norms.setflags(write=False)
        object.__setattr__(self, "matrix", a)
        object.__setattr__(self, "excitation_diagonals", lam)
        object.__setattr__(self, "column_norms", norms)

    @property
    def column_count(self) -> int:
        return self.matrix.shape[1]

    @property
    def excitation_count(self) -> int:
        return self.excitation_diagonals.shape[1]

    def lambda_rule(self, q: int) -> np.ndarray:
        """Diagonal of Lambda_q."""
        return self.excitation_diagonals[:, q]

    def parameter_matrix(self) -> np.ndarray:
        """The K x aleph matrix of excitation coefficients l_kq."""
        return self.excitation_diagonals

    def predicted_column(self, rho: np.ndarray, q: int) -> np.ndarray:
        """A @ diag(lambda_rule(q)) @ rho."""
        return self.matrix @ (self.lambda_rule(q) * np.asarray(rho, complex))

    def unit_matrix(self) -> np.ndarray:
        """A with columns normalized to unit l2."""
        return self.matrix / self.column_norms[None, :]


def factorization_residuals(family: ModelMatrixFamily, rho: np.ndarray,
                            data: DataMatrix) -> np.ndarray:
    """Relative residual ||A Lam_q rho - b_q|| / ||b_q|| per excitation."""
    out = np.empty(family.excitation_count)
    for q in range(family.excitation_count):
        b = data.entries[:, q]
        out[q] = np.linalg.norm(family.predicted_column(rho, q) - b) / np.linalg.norm(b)
    return out


def build_single_freq(
    scene: Scene,
    illuminations: list[Illumination],
    freq_index: int = 0,
) -> tuple[DataMatrix, ModelMatrixFamily]:
    """Single-frequency data B = [P f_1 ... P f_aleph] with its exact family.

    A's columns are the Green's function vectors at the grid points;
    lambda_rule(q)[k] = g(y_k)^T f_q is the incident field at grid point k.
    """
    if not illuminations:
        raise ValueError("need at least one illumination")
    p = response_matrix(scene, freq_index)
    n = scene.array.count
    for f in illuminations:
        if f.vector.size != n:
            raise DimensionMismatchError(
                f"illumination {f.label!r} has length {f.vector.size}, expected {n}"
            )
    f_mat = np.column_stack([f.vector for f in illuminations])
    data = DataMatrix(
        p @ f_mat,
        DataMatrixKind.SINGLE_FREQ,
        Provenance(scene.content_hash(), tuple(f.label for f in illuminations)),
    )
    kappa = scene.frequencies.kappas[freq_index]
    a = green_matrix(scene.grid.points(), kappa, scene.array)
    family = ModelMatrixFamily(
        matrix=a,
        excitation_diagonals=a.T @ f_mat,
        kind=DataMatrixKind.SINGLE_FREQ,
        exactness=Exactness.EXACT,
        grid_shape=(scene.grid.range_count, scene.grid.cross_count),
    )
    return data, family


def build_prony(
    scene1d: DelayScene,
    freqs: FrequencySet,
) -> tuple[DataMatrix, ModelMatrixFamily]:
    """Toeplitz stacking of one-transducer multifrequency data.

    Measurements b_m = sum_n exp(2i*kappa_m*y_n) rho_n at S = 2*aleph - 1
    equally spaced wavenumbers fill the aleph x aleph Toeplitz matrix with
    entry (i, j) = b_{i+j} (0-based).  Column q is matched by
    Lambda_1^q with Lambda_1 = diag(exp(2i*dk*y_k)); the identity diagonal
    belongs to the first column.
    """
    if not freqs.equally_spaced:
        raise NotEquispacedError("Toeplitz stacking needs equally spaced wavenumbers")
    s = freqs.count
    if s % 2 == 0:
        raise OddFrequencyCountError(f"need an odd frequency count, got {s}")
    aleph = (s + 1) // 2
    kappas = freqs.kappas
    b = np.exp(2j * np.outer(kappas, scene1d.true_delays)) @ scene1d.reflectivities
    i, j = np.indices((aleph, aleph))
    data = DataMatrix(
        b[i + j],
        DataMatrixKind.PRONY_TOEPLITZ,
        Provenance(scene1d.content_hash(), tuple(f"shift{q}" for q in range(aleph))),
    )
    cand = scene1d.candidate_delays
    a = np.exp(2j * np.outer(kappas[:aleph], cand))
    if aleph == 1:
        lam = np.ones((cand.size, 1), dtype=complex)
    else:
        dk = kappas[1] - kappas[0]
        lam1 = np.exp(2j * dk * cand)
        lam = lam1[:, None] ** np.arange(aleph)[None, :]
    family = ModelMatrixFamily(
        matrix=a,
        excitation_diagonals=lam,
        kind=DataMatrixKind.PRONY_TOEPLITZ,
        exactness=Exactness.EXACT,
        grid_shape=(1, cand.size),
    )
    return data, family


PARAXIAL_ERROR_ORDER = "O(B_w a^2 / (c0 L) + omega_c a^4 / (c0 L^3))"


def _paraxial_family(scene: Scene, kind: DataMatrixKind) -> ModelMatrixFamily:
    """Stacked multifrequency model columns h(y_k; w_l) and the paraxial diagonals.

    h(y_k; w_l) = exp(i*kappa_l*(L + eta_k)) g(y_k; w_l), stacked over l and
    scaled by the constant paraxial amplitude 1/(4*pi*L) so the factorization
    residual against the raw data stays meaningful; the constant is invisible
    to the imaging functional, which normalizes columns.
    lambda_rule(q)[k] = exp(i*kappa_c*|x_q - y_k|^2 / (2L)) over the
    cross-range parts of transducer q and grid point k.
    """
    grid = scene.grid
    stand = grid.standoff
    eta = grid.range_offsets()
    pts = grid.points()
    kappas = scene.frequencies.kappas
    blocks = []
    for kappa in kappas:
        g = green_matrix(pts, kappa, scene.array)
        blocks.append(np.exp(1j * kappa * (stand + eta))[None, :] * g / (FOUR_PI * stand))
    a = np.vstack(blocks)
    cross_t = scene.array.cross_range  # (N, 2)
    cross_g = grid.cross_range_parts()  # (K, 2)
    sq = np.sum((cross_g[:, None, :] - cross_t[None, :, :]) ** 2, axis=2)  # (K, N)
    lam = np.exp(1j * scene.frequencies.kappa_central * sq / (2.0 * stand))
    return ModelMatrixFamily(
        matrix=a,
        excitation_diagonals=lam,
        kind=kind,
        exactness=Exactness.PARAXIAL_APPROX,
        grid_shape=(grid.range_count, grid.cross_count),
        note=f"approximation error {PARAXIAL_ERROR_ORDER}",
    )


def build_pc(
    scene: Scene,
    tensor: ResponseTensor | None = None,
) -> tuple[DataMatrix, ModelMatrixFamily]:
    """Column stack [P(w_1)^T; ...; P(w_S)^T] with the paraxial family."""
    if tensor is None:
        tensor = _tensor(scene)
    s = tensor.frequency_count
    data = DataMatrix(
        np.vstack([tensor.matrix(l).T for l in range(s)]),
        DataMatrixKind.PC_STACK,
        Provenance(scene.content_hash(),
                   tuple(f"e{q}" for q in range(tensor.transducer_count))),
    )
    return data, _paraxial_family(scene, DataMatrixKind.PC_STACK)


def build_pd(scene: Scene, tensor: ResponseTensor | None = None) -> DataMatrix:
    """Block-diagonal multifrequency stack; images each frequency incoherently."""
    if tensor is None:
        tensor = _tensor(scene)
    n = tensor.transducer_count
    s = tensor.frequency_count
    entries = np.zeros((n * s, n * s), dtype=complex)
    for l in range(s):
        entries[l * n:(l + 1) * n, l * n:(l + 1) * n] = tensor.matrix(l)
    return DataMatrix(
        entries,
        DataMatrixKind.PD_BLOCK,
        Provenance(scene.content_hash(), tuple(f"e{q}" for q in range(n * s))),
    )


def build_m_single(p_matrix: np.ndarray,
                   provenance: Provenance | None = None) -> DataMatrix:
    """Frequency interferometric matrix M(w) = P(w)^* P(w) (Hermitian PSD)."""
    p = np.asarray(p_matrix, dtype=complex)
    return DataMatrix(
        p.conj().T @ p,
        DataMatrixKind.M_SINGLE,
        provenance or Provenance("unknown"),
    )


def build_mc(scene: Scene, tensor: ResponseTensor | None = None) -> DataMatrix:
    """Interferometric stack of P(w_l)^* P(w_1) over l = 1..S."""
    if tensor is None:
        tensor = _tensor(scene)
    p1 = tensor.matrix(0)
    blocks = [tensor.matrix(l).conj().T @ p1 for l in range(tensor.frequency_count)]
    return DataMatrix(
        np.vstack(blocks),
        DataMatrixKind.MC_STACK,
        Provenance(scene.content_hash(),
                   tuple(f"e{q}" for q in range(tensor.transducer_count))),
    )


def _tensor(scene: Scene) -> ResponseTensor:
    from .forward import response_tensor

    return response_tensor(scene)
