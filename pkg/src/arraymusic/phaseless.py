"""Intensity-only acquisition and polarization-identity recovery.

Record labels
-------------
Every intensity record is keyed by a label of the form ``w{l}|{illum}`` where
``l`` is the frequency index and ``illum`` names the illumination:

* ``e3``            basis illumination e_3,
* ``f+e3``          auxiliary sum illumination  f + e_3,
* ``f+ie3``         auxiliary sum illumination  f + i e_3,
* ``w2~w0|e1``      dual-frequency link |b_2(e_1) + b_0(e_1)|^2,
* ``w2~iw0|e1``     dual-frequency link |b_2(e_1) + i b_0(e_1)|^2.

The dual-frequency links are idealized heterodyne measurements; they supply
the per-receiver cross-frequency reference phases without which the
interferometric frequency stack cannot be assembled from intensities alone.

Recovery never touches phases directly: products conj(b_ki) b_kj come from
``conj(m_ci) m_cj / |b_kc|^2`` with m_ci the polarization inner products
against the reference column c, which chains the phase differences exactly.
"""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass
from typing import Iterable, Iterator, Sequence

import numpy as np

from .errors import (
    MissingAuxiliaryError,
    ReferenceVanishesError,
    ZeroSignalError,
)
from .forward import Illumination, point_illuminations, response_matrix
from .scene import Scene

log = logging.getLogger(__name__)

#: Default reference-amplitude floor, relative to the largest reference entry.
AMPLITUDE_FLOOR_SCALE = 1e-8


def polarization_inner(abs_u2, abs_v2, abs_upv2, abs_umiv2):
    """Inner product <u, v> = conj(u) * v from four squared magnitudes.

    2 Re<u,v> = |u+v|^2 - |u|^2 - |v|^2 and 2 Im<u,v> = |u-iv|^2 - |u|^2 - |v|^2.
    Inputs are trusted; validation is the caller's job.  Vectorized.
    """
    re = (np.asarray(abs_upv2, float) - abs_u2 - abs_v2) / 2.0
    im = (np.asarray(abs_umiv2, float) - abs_u2 - abs_v2) / 2.0
    out = re + 1j * im
    return complex(out) if out.ndim == 0 else out


def _sum_to_diff(abs_u2, abs_v2, abs_upiv2):
    """|u - iv|^2 from |u + iv|^2 (the measured auxiliary uses f + i e)."""
    return 2.0 * np.asarray(abs_u2, float) + 2.0 * np.asarray(abs_v2, float) - abs_upiv2


@dataclass(frozen=True)
class IntensityRecord:
    label: str
    receiver: int
    value: float


class IntensitySet:
    """Intensity records organized as a receivers x illuminations table."""

    def __init__(self, labels: Sequence[str], values: np.ndarray):
        values = np.asarray(values, dtype=float)
        if values.ndim != 2 or values.shape[1] != len(labels):
            raise ValueError("values must have one column per label")
        if np.any(values < 0):
            raise ValueError("intensities must be nonnegative")
        self.labels = tuple(labels)
        if len(set(self.labels)) != len(self.labels):
            raise ValueError("duplicate record labels")
        self.values = values
        self._index = {lab: i for i, lab in enumerate(self.labels)}

    @property
    def receiver_count(self) -> int:
        return self.values.shape[0]

    @property
    def illumination_count(self) -> int:
        return len(self.labels)

    def has(self, label: str) -> bool:
        return label in self._index

    def value_vector(self, label: str) -> np.ndarray:
        try:
            return self.values[:, self._index[label]]
        except KeyError:
            raise MissingAuxiliaryError(f"no intensity record for {label!r}") from None

    def merge(self, other: "IntensitySet") -> "IntensitySet":
        if other.receiver_count != self.receiver_count:
            raise ValueError("receiver counts differ")
        extra = [i for i, lab in enumerate(other.labels) if lab not in self._index]
        return IntensitySet(
            self.labels + tuple(other.labels[i] for i in extra),
            np.hstack([self.values, other.values[:, extra]]),
        )

    def __iter__(self) -> Iterator[IntensityRecord]:
        for j, lab in enumerate(self.labels):
            for r in range(self.receiver_count):
                yield IntensityRecord(lab, r, float(self.values[r, j]))

    def __len__(self) -> int:
        return self.values.size

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["illumination_label", "receiver", "value"])
            for rec in self:
                writer.writerow([rec.label, rec.receiver, repr(rec.value)])

    @classmethod
    def from_csv(cls, path) -> "IntensitySet":
        table: dict[str, dict[int, float]] = {}
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader)
            if header != ["illumination_label", "receiver", "value"]:
                raise ValueError(f"unexpected intensity CSV header {header}")
            for label, receiver, value in reader:
                table.setdefault(label, {})[int(receiver)] = float(value)
        labels = list(table)
        counts = {len(v) for v in table.values()}
        if len(counts) != 1:
            raise ValueError("ragged intensity table")
        r = counts.pop()
        values = np.empty((r, len(labels)))
        for j, lab in enumerate(labels):
            for k in range(r):
                values[k, j] = table[lab][k]
        return cls(labels, values)


def record_label(freq_index: int, illumination_label: str) -> str:
    return f"w{freq_index}|{illumination_label}"


def pair_labels(base_label: str, i: int) -> tuple[str, str]:
    return f"{base_label}+e{i}", f"{base_label}+ie{i}"


def link_labels(freq_index: int, ref_freq: int, illumination_label: str) -> tuple[str, str]:
    return (
        f"w{freq_index}~w{ref_freq}|{illumination_label}",
        f"w{freq_index}~iw{ref_freq}|{illumination_label}",
    )


def measure_intensities(
    scene: Scene,
    illuminations: Iterable[Illumination],
    freq_index: int = 0,
    pair_mode: str = "full",
    reference: int = 0,
    response_override: np.ndarray | None = None,
) -> IntensitySet:
    """Record |(P f)_r|^2 for the requested set plus polarization auxiliaries.

    ``pair_mode`` controls which pairs (f, e_i) get the auxiliary sum
    illuminations f + e_i and f + i e_i:

    * ``"full"``       every requested illumination against every basis e_i
      (enables cross-correlation recovery for each of them);
    * ``"reference"``  only (e_reference, e_j) for all j (enables the
      interferometric recovery); the basis set is completed automatically;
    * ``"none"``       no auxiliaries.

    ``response_override`` substitutes a (possibly noise-perturbed) response
    matrix for the scene's own.
    """
    p = response_matrix(scene, freq_index) if response_override is None \
        else np.asarray(response_override, complex)
    n = p.shape[1]
    requested = list(illuminations)
    basis = point_illuminations(n)

    batch: list[tuple[str, np.ndarray]] = []
    seen: set[str] = set()

    def push(label: str, vector: np.ndarray) -> None:
        if label not in seen:
            seen.add(label)
            batch.append((label, vector))

    for f in requested:
        push(f.label, f.vector)
    if pair_mode == "full":
        for e in basis:
            push(e.label, e.vector)
        for f in requested:
            for i, e in enumerate(basis):
                plus, plus_i = pair_labels(f.label, i)
                push(plus, f.vector + e.vector)
                push(plus_i, f.vector + 1j * e.vector)
    elif pair_mode == "reference":
        for e in basis:
            push(e.label, e.vector)
        ref = basis[reference]
        for j, e in enumerate(basis):
            plus, plus_i = pair_labels(ref.label, j)
            push(plus, ref.vector + e.vector)
            push(plus_i, ref.vector + 1j * e.vector)
    elif pair_mode != "none":
        raise ValueError(f"unknown pair_mode {pair_mode!r}")

    if not batch:
        return IntensitySet((), np.zeros((p.shape[0], 0)))
    f_mat = np.column_stack([vec for _, vec in batch])
    fields = p @ f_mat
    labels = [record_label(freq_index, lab) for lab, _ in batch]
    return IntensitySet(labels, np.abs(fields) ** 2)


def measure_cross_links(
    scene: Scene,
    freq_index: int,
    ref_freq: int = 0,
    reference: int = 0,
    response_pair: tuple[np.ndarray, np.ndarray] | None = None,
) -> IntensitySet:
    """Dual-frequency interference records linking w_l to the reference frequency.

    Both frequencies illuminate with the reference basis vector e_c; the
    detector records |b_l + b_ref|^2 and |b_l + i b_ref|^2 (idealized
    heterodyne superposition of the two complex amplitudes).
    """
    if response_pair is None:
        p_l = response_matrix(scene, freq_index)
        p_r = response_matrix(scene, ref_freq)
    else:
        p_l, p_r = (np.asarray(m, complex) for m in response_pair)
    u = p_l[:, reference]
    v = p_r[:, reference]
    lab_plain, lab_quad = link_labels(freq_index, ref_freq, f"e{reference}")
    values = np.column_stack([np.abs(u + v) ** 2, np.abs(u + 1j * v) ** 2])
    return IntensitySet([lab_plain, lab_quad], values)


def recover_cross_correlations(
    intensities: IntensitySet,
    receiver: int,
    illuminations: Iterable[Illumination],
    freq_index: int = 0,
) -> np.ndarray:
    """Cross-correlation vectors m_q[i] = conj(b_q) b_{e_i} at one receiver.

    Rows follow the requested illumination order; raises MissingAuxiliaryError
    if a required auxiliary record is absent.
    """
    requested = list(illuminations)
    n = _basis_size(intensities, freq_index)
    out = np.empty((len(requested), n), dtype=complex)
    basis2 = np.array([
        intensities.value_vector(record_label(freq_index, f"e{i}"))[receiver]
        for i in range(n)
    ])
    for qi, f in enumerate(requested):
        u2 = intensities.value_vector(record_label(freq_index, f.label))[receiver]
        for i in range(n):
            plus, plus_i = pair_labels(f.label, i)
            upv2 = intensities.value_vector(record_label(freq_index, plus))[receiver]
            upiv2 = intensities.value_vector(record_label(freq_index, plus_i))[receiver]
            out[qi, i] = polarization_inner(
                u2, basis2[i], upv2, _sum_to_diff(u2, basis2[i], upiv2)
            )
    return out


def _basis_size(intensities: IntensitySet, freq_index: int) -> int:
    n = 0
    while intensities.has(record_label(freq_index, f"e{n}")):
        n += 1
    if n == 0:
        raise MissingAuxiliaryError(
            f"no basis intensity records for frequency index {freq_index}"
        )
    return n


def _field_estimates(
    intensities: IntensitySet,
    freq_index: int,
    reference: int,
    amplitude_floor: float | None,
) -> np.ndarray:
    """Per-receiver fields up to a receiver-dependent global phase.

    Returns V with V[k, i] = exp(-i theta_kc) b_ki, built from the reference
    column's polarization inner products.  Raises ReferenceVanishesError if
    the reference amplitude drops below the floor at some receiver.
    """
    n = _basis_size(intensities, freq_index)
    amp2 = np.column_stack([
        intensities.value_vector(record_label(freq_index, f"e{i}")) for i in range(n)
    ])
    a_ref = np.sqrt(amp2[:, reference])
    floor = amplitude_floor
    if floor is None:
        floor = AMPLITUDE_FLOOR_SCALE * float(a_ref.max(initial=0.0))
    low = np.flatnonzero(~(a_ref > floor))
    if low.size:
        raise ReferenceVanishesError(int(low[0]))
    upv2 = np.empty_like(amp2)
    upiv2 = np.empty_like(amp2)
    for j in range(n):
        plus, plus_i = pair_labels(f"e{reference}", j)
        upv2[:, j] = intensities.value_vector(record_label(freq_index, plus))
        upiv2[:, j] = intensities.value_vector(record_label(freq_index, plus_i))
    ref2 = amp2[:, reference][:, None]
    m_ref = polarization_inner(ref2, amp2, upv2, _sum_to_diff(ref2, amp2, upiv2))
    return m_ref / a_ref[:, None]


def _reference_candidates(
    intensities: IntensitySet,
    freq_index: int,
    reference: int,
    fallback: bool,
    n: int,
) -> list[int]:
    order = [reference] + [c for c in range(n) if c != reference] if fallback \
        else [reference]
    out = []
    for c in order:
        plus, plus_i = pair_labels(f"e{c}", 0)
        if intensities.has(record_label(freq_index, plus)) and \
                intensities.has(record_label(freq_index, plus_i)):
            out.append(c)
    return out


def recover_interferometric(
    intensities: IntensitySet,
    freq_index: int = 0,
    reference: int = 0,
    amplitude_floor: float | None = None,
    fallback: bool = True,
) -> np.ndarray:
    """Interferometric matrix M(w) = P^* P from intensity records.

    Per receiver k, the reference column supplies amplitudes and chained
    phase differences; summing conj(b_ki) b_kj over k yields M.  The result
    is exactly Hermitian (symmetrized storage).  If the reference amplitude
    vanishes at some receiver, other reference columns with measured
    auxiliaries are tried in order (when ``fallback``), logging the switch.
    """
    n = _basis_size(intensities, freq_index)
    failure: ReferenceVanishesError | None = None
    for c in _reference_candidates(intensities, freq_index, reference, fallback, n):
        try:
            v = _field_estimates(intensities, freq_index, c, amplitude_floor)
        except ReferenceVanishesError as err:
            failure = failure or err
            continue
        if c != reference:
            log.info("reference column %d vanished; using column %d", reference, c)
        m = v.conj().T @ v
        return (m + m.conj().T) / 2.0
    raise failure or ReferenceVanishesError(0, "no usable reference column")


def assemble_mc_from_intensities(
    per_freq: Sequence[IntensitySet],
    links: IntensitySet,
    ref_freq: int = 0,
    reference: int = 0,
    amplitude_floor: float | None = None,
) -> np.ndarray:
    """Interferometric frequency stack [P_l^* P_ref]_l from intensities.

    ``per_freq[l]`` must hold reference-pair records for frequency l, and
    ``links`` the dual-frequency records of :func:`measure_cross_links` for
    every l against ``ref_freq`` (the same reference column throughout).
    """
    v_ref = _field_estimates(per_freq[ref_freq], ref_freq, reference, amplitude_floor)
    blocks = []
    for l, iset in enumerate(per_freq):
        v_l = _field_estimates(iset, l, reference, amplitude_floor)
        u2 = iset.value_vector(record_label(l, f"e{reference}"))
        v2 = per_freq[ref_freq].value_vector(record_label(ref_freq, f"e{reference}"))
        lab_plain, lab_quad = link_labels(l, ref_freq, f"e{reference}")
        upv2 = links.value_vector(lab_plain)
        upiv2 = links.value_vector(lab_quad)
        link = polarization_inner(u2, v2, upv2, _sum_to_diff(u2, v2, upiv2))
        mag = np.abs(link)
        dead = np.flatnonzero(mag == 0.0)
        if dead.size:
            raise ReferenceVanishesError(int(dead[0]), "cross-frequency link vanishes")
        phi = link / mag
        blocks.append(v_l.conj().T @ (phi[:, None] * v_ref))
    return np.vstack(blocks)


def add_intensity_noise(
    intensities: IntensitySet,
    snr_db: float,
    seed: int,
) -> tuple[IntensitySet, float]:
    """Additive Gaussian noise on the intensity records, clamped at zero.

    Returns the noisy set and the fraction of records that were clamped
    (also logged); the SNR follows the same mean-power definition as the
    data-matrix noise.
    """
    power = float(np.mean(intensities.values ** 2))
    if power == 0.0:
        raise ZeroSignalError("cannot scale noise against all-zero intensities")
    sigma = np.sqrt(power / 10.0 ** (snr_db / 10.0))
    rng = np.random.default_rng(seed)
    noisy = intensities.values + rng.normal(0.0, sigma, intensities.values.shape)
    clamped = noisy < 0.0
    rate = float(np.mean(clamped))
    if rate:
        log.info("clamped %.2f%% of noisy intensities at zero", 100.0 * rate)
    return IntensitySet(intensities.labels, np.where(clamped, 0.0, noisy)), rate
