"""Noise-robustness quantities: illumination quality, coherence, bound checks.

For the exact factorization B = A X L (X = Diag(rho)), the quantities are

    gamma = sigma_min(L_T)                       (illumination quality)
    eps   = (M - 1) * max_{i != j in T} |<a_i, a_j>|   (support coherence)
    mu    = min_{i in T} |rho_i|

and the tested claim is that a spectral-norm perturbation of size delta,
with eps < 1/3 and 2*delta < mu*gamma*(1 - 2*eps), moves the signal column
space by at most delta / (mu * gamma * (1 - 2*eps)) in projector distance.
The projector distance is the spectral norm of the difference of orthogonal
projectors, i.e. the sine of the largest principal angle.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import EmptySupportError, HypothesisViolatedError
from .forward import Illumination, complex_gaussian
from .music import Known, RankPolicy, decompose
from .structures import DataMatrix, DataMatrixKind, ModelMatrixFamily, Provenance


def compute_gamma(l_matrix: np.ndarray, support: tuple[int, ...]) -> float:
    """Smallest singular value of the support-restricted parameter matrix."""
    if len(support) == 0:
        raise EmptySupportError("gamma needs a nonempty support")
    l_t = np.asarray(l_matrix, complex)[list(support), :]
    if l_t.shape[0] > l_t.shape[1]:
        raise ValueError(
            f"support size {l_t.shape[0]} exceeds excitation count {l_t.shape[1]}"
        )
    return float(np.linalg.svd(l_t, compute_uv=False)[-1])


def support_coherence(a_matrix: np.ndarray, support: tuple[int, ...]) -> float:
    """Smallest eps making |<a_i, a_j>| < eps/(M-1) hold on the support.

    Expects unit-normalized columns; returns 0 for single-element supports.
    """
    m = len(support)
    if m <= 1:
        return 0.0
    cols = np.asarray(a_matrix, complex)[:, list(support)]
    gram = np.abs(cols.conj().T @ cols)
    np.fill_diagonal(gram, 0.0)
    return float((m - 1) * gram.max())


def unit_columns(a_matrix: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    a = np.asarray(a_matrix, complex)
    norms = np.linalg.norm(a, axis=0)
    return a / norms[None, :], norms


def subspace_distance(u1: np.ndarray, u2: np.ndarray) -> float:
    """Spectral norm of P1 - P2 for equal-dimension orthonormal bases.

    Equals the sine of the largest principal angle, computed as
    sigma_max((I - U1 U1^H) U2); the residual form stays accurate down to
    machine scale for nearly identical subspaces, where sqrt(1 - cos^2)
    would lose half the digits.
    """
    if u1.shape != u2.shape:
        raise ValueError("bases must have equal shapes")
    residual = u2 - u1 @ (u1.conj().T @ u2)
    return float(min(1.0, np.linalg.svd(residual, compute_uv=False)[0]))


def spectral_perturbation(shape: tuple[int, int], delta: float,
                          rng: np.random.Generator) -> np.ndarray:
    """Random complex Gaussian matrix rescaled so sigma_max = delta exactly."""
    if delta == 0.0:
        return np.zeros(shape, complex)
    e = complex_gaussian(shape, 1.0, rng)
    return e * (delta / np.linalg.svd(e, compute_uv=False)[0])


@dataclass(frozen=True)
class BoundReport:
    seed: int
    gamma: float
    eps: float
    mu: float
    delta: float
    admissible: bool
    bound: float
    distance: float
    status: str  # "ok", "hypothesis_violated:<which>", "rank_mismatch"

    @property
    def holds(self) -> bool:
        return self.admissible and self.status == "ok" and self.distance <= self.bound


BOUND_REPORT_FIELDS = ("seed", "gamma", "eps", "mu", "delta", "admissible",
                       "bound", "distance", "status")


def check_theorem_bound(
    a_matrix: np.ndarray,
    l_matrix: np.ndarray,
    rho: np.ndarray,
    delta: float,
    seeds,
    rank_policy: RankPolicy | None = None,
    strict: bool = False,
) -> list[BoundReport]:
    """Per-seed perturbation trials of the projector-distance bound.

    Columns of ``a_matrix`` are normalized internally (rho is rescaled by the
    norms, which leaves B = A X L unchanged).  Each trial perturbs B with a
    spectral-norm-delta matrix, truncates the perturbed SVD at the support
    size, and measures the projector distance against the noise-free signal
    space.  Hypothesis violations are reported in the status (or raised when
    ``strict``), never silently ignored.
    """
    rho = np.asarray(rho, complex)
    support = tuple(int(i) for i in np.flatnonzero(rho))
    if not support:
        raise EmptySupportError("rho has empty support")
    a_unit, norms = unit_columns(a_matrix)
    rho_n = rho * norms
    l_matrix = np.asarray(l_matrix, complex)
    m = len(support)

    eps = support_coherence(a_unit, support)
    gamma = compute_gamma(l_matrix, support)
    mu = float(np.min(np.abs(rho_n[list(support)])))
    margin = mu * gamma * (1.0 - 2.0 * eps)
    violations = []
    if not eps < 1.0 / 3.0:
        violations.append("coherence")
    if not 2.0 * delta < margin:
        violations.append("detection")
    admissible = not violations
    bound = delta / margin if margin > 0 else np.inf
    if violations and strict:
        raise HypothesisViolatedError(",".join(violations))

    b = a_unit @ (rho_n[:, None] * l_matrix)
    clean = decompose(b, Known(m))
    policy = rank_policy or Known(m)

    reports = []
    for seed in seeds:
        rng = np.random.default_rng(seed)
        e = spectral_perturbation(b.shape, delta, rng)
        noisy = decompose(b + e, policy)
        if noisy.rank != m:
            reports.append(BoundReport(seed, gamma, eps, mu, delta, admissible,
                                       bound, np.nan, "rank_mismatch"))
            continue
        distance = subspace_distance(clean.signal_vectors, noisy.signal_vectors)
        status = "ok" if admissible else "hypothesis_violated:" + ",".join(violations)
        reports.append(BoundReport(seed, gamma, eps, mu, delta, admissible,
                                   bound, distance, status))
    return reports


def check_theorem_bound_family(
    family: ModelMatrixFamily,
    rho: np.ndarray,
    delta: float,
    seeds,
    **kwargs,
) -> list[BoundReport]:
    """Bound check for a built exact family (L is its parameter matrix)."""
    return check_theorem_bound(family.matrix, family.parameter_matrix(), rho,
                               delta, seeds, **kwargs)


def optimal_illuminations(p_matrix: np.ndarray, count: int) -> list[Illumination]:
    """Top right singular vectors of the response matrix (maximal echo power)."""
    p = np.asarray(p_matrix, complex)
    if count > p.shape[1]:
        raise ValueError(f"cannot take {count} singular vectors from {p.shape}")
    _, _, vh = np.linalg.svd(p)
    return [Illumination(vh[j].conj(), f"opt{j}") for j in range(count)]


def random_illuminations(n: int, count: int, seed: int) -> list[Illumination]:
    """Unit-norm complex Gaussian illumination vectors, seeded."""
    rng = np.random.default_rng(seed)
    out = []
    for i in range(count):
        v = complex_gaussian(n, 1.0, rng)
        out.append(Illumination(v / np.linalg.norm(v), f"rand{seed}.{i}"))
    return out
