"""Scale-invariant source-to-noise ratio.

Both signals are mean-centered before projection. The estimate is split
into a component collinear with the reference (s_target) and a residual
(e_noise); the ratio of their energies in dB is invariant to any rescaling
of the estimate. A collinear estimate has zero residual and is reported
with a distinguished "perfect" marker rather than an infinite float.
"""

from __future__ import annotations

from dataclasses import dataclass
from statistics import median

import numpy as np

from .audio import AudioBuffer


@dataclass(frozen=True)
class SiSnrResult:
    value_db: float | None
    s_target_energy: float
    e_noise_energy: float

    @property
    def perfect(self) -> bool:
        return self.value_db is None

    def __str__(self) -> str:
        return "perfect" if self.perfect else f"{self.value_db:.2f} dB"


def si_snr(estimate: AudioBuffer, reference: AudioBuffer) -> SiSnrResult:
    """10*log10(||s_target||^2 / ||e_noise||^2) with both signals centered."""
    if len(estimate) != len(reference):
        raise ValueError(f"length mismatch: {len(estimate)} vs {len(reference)}")
    s_hat = estimate.samples - np.mean(estimate.samples)
    s = reference.samples - np.mean(reference.samples)
    ref_energy = np.dot(s, s)
    if ref_energy == 0.0:
        raise ValueError("reference has zero energy after mean removal")
    scale = np.dot(s_hat, s) / ref_energy
    s_target = scale * s
    e_noise = s_hat - s_target
    target_energy = float(np.dot(s_target, s_target))
    noise_energy = float(np.dot(e_noise, e_noise))
    # Residuals at the level of float rounding noise (>= 240 dB) count as a
    # perfect reconstruction; a scaled copy of the reference must map here.
    if noise_energy <= 1e-24 * target_energy:
        return SiSnrResult(None, target_energy, noise_energy)
    return SiSnrResult(10.0 * np.log10(target_energy / noise_energy), target_energy, noise_energy)


@dataclass(frozen=True)
class BatchSummary:
    per_item_db: list
    perfect_count: int
    mean_db: float | None
    median_db: float | None


def summarize(results: list[SiSnrResult]) -> BatchSummary:
    """Aggregate stats; perfect results are counted separately, not averaged."""
    finite = [r.value_db for r in results if not r.perfect]
    perfect = sum(1 for r in results if r.perfect)
    return BatchSummary(
        per_item_db=[r.value_db for r in results],
        perfect_count=perfect,
        mean_db=float(np.mean(finite)) if finite else None,
        median_db=float(median(finite)) if finite else None,
    )
