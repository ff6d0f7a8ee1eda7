"""Subspace engine: SVD split, imaging functional, support and amplitudes.

The imaging functional at grid column a_k is

    I_k = ||a_k|| / sum_{j > M} |<a_k, u_j>|^2

with u_j the left singular vectors of the data matrix beyond the estimated
signal rank; the sum runs over the whole stacked row dimension.  The noise
energy is computed as ||a_k||^2 - ||U_sig^H a_k||^2 (Parseval complement),
which equals the explicit sum over every noise-subspace vector.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatchError, RankDeficientError, ZeroMatrixError
from .structures import DataMatrix, Exactness, ModelMatrixFamily

#: Relative floor applied to the noise-energy denominator, in units of
#: ||a_k||^2.  eps^2 sits far below SVD cancellation noise (~eps ||a_k||^2)
#: so genuine peaks are never flattened, yet keeps 1/denominator finite.
DENOMINATOR_FLOOR = float(np.finfo(np.float64).eps) ** 2

#: Condition-number ceiling for the restricted amplitude solve.
AMPLITUDE_CONDITION_LIMIT = 1e12


@dataclass(frozen=True)
class Known:
    """Use a given signal rank."""

    rank: int


@dataclass(frozen=True)
class Threshold:
    """Count singular values above ratio * sigma_1."""

    ratio: float = 1e-8


@dataclass(frozen=True)
class Gap:
    """Split at the largest ratio sigma_j / sigma_{j+1}."""


RankPolicy = Known | Threshold | Gap


@dataclass(frozen=True)
class SubspaceDecomposition:
    singular_values: np.ndarray
    left_vectors: np.ndarray
    rank: int
    shape: tuple[int, int]

    @property
    def signal_vectors(self) -> np.ndarray:
        return self.left_vectors[:, : self.rank]

    @property
    def gap(self) -> float:
        """Spectral gap beta = sigma_rank - sigma_{rank+1} (trailing sigma 0)."""
        s = self.singular_values
        after = s[self.rank] if self.rank < s.size else 0.0
        return float(s[self.rank - 1] - after)

    def noise_vectors(self) -> np.ndarray:
        """Explicit noise-subspace basis; needs a full decomposition."""
        if self.left_vectors.shape[1] != self.shape[0]:
            raise ValueError("noise basis requires decompose(..., full_matrices=True)")
        return self.left_vectors[:, self.rank:]


def _choose_rank(s: np.ndarray, policy: RankPolicy) -> int:
    if isinstance(policy, Known):
        if not 1 <= policy.rank <= s.size:
            raise ValueError(f"known rank {policy.rank} outside 1..{s.size}")
        return policy.rank
    if isinstance(policy, Threshold):
        return max(1, int(np.sum(s > policy.ratio * s[0])))
    if isinstance(policy, Gap):
        if s.size == 1:
            return 1
        with np.errstate(divide="ignore", invalid="ignore"):
            ratios = np.where(s[1:] > 0, s[:-1] / s[1:],
                              np.where(s[:-1] > 0, np.inf, 0.0))
        return int(np.argmax(ratios)) + 1
    raise TypeError(f"unknown rank policy {policy!r}")


def decompose(
    data: DataMatrix | np.ndarray,
    policy: RankPolicy,
    full_matrices: bool = False,
) -> SubspaceDecomposition:
    """Full SVD of the data matrix with the signal rank fixed by ``policy``."""
    entries = data.entries if isinstance(data, DataMatrix) else np.asarray(data, complex)
    if not np.any(entries):
        raise ZeroMatrixError("cannot decompose an all-zero data matrix")
    u, s, _ = np.linalg.svd(entries, full_matrices=full_matrices)
    return SubspaceDecomposition(
        singular_values=s,
        left_vectors=u,
        rank=_choose_rank(s, policy),
        shape=entries.shape,
    )


@dataclass(frozen=True)
class Pseudospectrum:
    """Imaging-functional values over the grid columns."""

    values: np.ndarray
    floor_scale: float
    grid_shape: tuple[int, int] | None = None


def pseudospectrum(
    decomp: SubspaceDecomposition,
    family: ModelMatrixFamily,
    conjugate: bool = False,
    normalized_numerator: bool = False,
) -> Pseudospectrum:
    """Evaluate the imaging functional for every model column.

    Paraxial families are imaged with unit-normalized columns.  The
    ``conjugate`` flag conjugates the imaging vectors before projecting
    (required for the adjoint-product interferometric structures; see
    :func:`arraymusic.structures.default_conjugation`).
    """
    a = family.unit_matrix() if family.exactness is Exactness.PARAXIAL_APPROX \
        else family.matrix
    if a.shape[0] != decomp.shape[0]:
        raise DimensionMismatchError(
            f"model rows {a.shape[0]} != data rows {decomp.shape[0]}"
        )
    if conjugate:
        a = a.conj()
    col_sq = np.sum(np.abs(a) ** 2, axis=0)
    sig = np.sum(np.abs(decomp.signal_vectors.conj().T @ a) ** 2, axis=0)
    denom = np.maximum(col_sq - sig, DENOMINATOR_FLOOR * col_sq)
    numer = col_sq if normalized_numerator else np.sqrt(col_sq)
    return Pseudospectrum(
        values=numer / denom,
        floor_scale=DENOMINATOR_FLOOR,
        grid_shape=family.grid_shape,
    )


@dataclass(frozen=True)
class SupportEstimate:
    """Top-count indices plus the local-maxima diagnostic variant."""

    indices: tuple[int, ...]
    local_peaks: tuple[int, ...] | None = None


def _local_maxima(values: np.ndarray, grid_shape: tuple[int, int]) -> np.ndarray:
    img = values.reshape(grid_shape)
    keep = np.ones_like(img, dtype=bool)
    keep[:, 1:] &= img[:, 1:] >= img[:, :-1]
    keep[:, :-1] &= img[:, :-1] >= img[:, 1:]
    keep[1:, :] &= img[1:, :] >= img[:-1, :]
    keep[:-1, :] &= img[:-1, :] >= img[1:, :]
    return np.flatnonzero(keep.ravel())


def extract_support(ps: Pseudospectrum, count: int) -> SupportEstimate:
    """Indices of the ``count`` largest values; ties go to the lowest index.

    Also reports the peaks restricted to local maxima of the grid graph
    (4-neighborhood) when the grid shape is known.
    """
    if count > ps.values.size:
        raise ValueError(f"cannot extract {count} indices from {ps.values.size} values")
    order = np.argsort(-ps.values, kind="stable")
    indices = tuple(sorted(int(i) for i in order[:count]))
    local = None
    if ps.grid_shape is not None:
        peaks = _local_maxima(ps.values, ps.grid_shape)
        ranked = peaks[np.argsort(-ps.values[peaks], kind="stable")]
        local = tuple(sorted(int(i) for i in ranked[:count]))
    return SupportEstimate(indices=indices, local_peaks=local)


@dataclass(frozen=True)
class AmplitudeRecovery:
    values: np.ndarray
    residual: float


def recover_amplitudes(
    family: ModelMatrixFamily,
    data: DataMatrix,
    support: tuple[int, ...],
) -> AmplitudeRecovery:
    """Least-squares reflectivities on the support from the factorized system.

    Stacks the restricted systems A_T diag(lam_q[T]) rho_T = b_q over all
    excitations and solves in the l2 sense.  Only meaningful for EXACT
    families.
    """
    if family.exactness is not Exactness.EXACT:
        raise ValueError("amplitude recovery requires an exact factorization")
    cols = list(support)
    rows, aleph = data.shape
    rhs = data.entries.T.reshape(-1)  # columns stacked in excitation order
    if not cols:
        return AmplitudeRecovery(np.zeros(0, complex), float(np.linalg.norm(rhs)))
    if len(cols) > rows:
        raise ValueError("support larger than the measurement dimension")
    a_t = family.matrix[:, cols]
    stacked = np.vstack([
        a_t * family.excitation_diagonals[cols, q][None, :] for q in range(aleph)
    ])
    s = np.linalg.svd(stacked, compute_uv=False)
    if s[-1] == 0.0 or s[0] / s[-1] > AMPLITUDE_CONDITION_LIMIT:
        raise RankDeficientError(
            f"restricted system condition exceeds {AMPLITUDE_CONDITION_LIMIT:g}"
        )
    solution, *_ = np.linalg.lstsq(stacked, rhs, rcond=None)
    residual = float(np.linalg.norm(stacked @ solution - rhs))
    return AmplitudeRecovery(solution, residual)
