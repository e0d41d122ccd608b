"""Beam-pair training procedures and the power-loss metric.

Every search measures pairs through a :class:`PowerMeter`, which counts
measurements. Ties in measured power go to the lexicographically lowest
``(tx, rx)`` pair, so results never depend on evaluation order.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .codebook import Codebook


@dataclass(frozen=True)
class AlignmentResult:
    tx_beam: int
    rx_beam: int
    trained_pairs: int
    best_power: float
    strategy: str


class PowerMeter:
    """Measures beamformed receive power on a fixed channel.

    Parameters
    ----------
    H : ndarray, shape (n_rx_elements, n_tx_elements)
        Channel matrix.
    tx_codebook, rx_codebook : Codebook
        Beams addressed by index.
    noise_std : float
        Standard deviation of complex Gaussian noise added to the beamformed
        amplitude before squaring. Zero (the default) gives exact powers.
    rng : numpy Generator, optional
        Source for measurement noise.
    """

    def __init__(self, H, tx_codebook: Codebook, rx_codebook: Codebook,
                 noise_std: float = 0.0, rng: np.random.Generator | None = None):
        self.H = np.asarray(H)
        if self.H.shape != (rx_codebook.beams.shape[1], tx_codebook.beams.shape[1]):
            raise ValueError(f"channel shape {self.H.shape} does not match the codebooks")
        self.tx_codebook = tx_codebook
        self.rx_codebook = rx_codebook
        self.noise_std = noise_std
        self.rng = rng if rng is not None else np.random.default_rng(0)
        self.count = 0
        self._scale = self.H.shape[0] * self.H.shape[1]
        self._projected: dict[int, np.ndarray] = {}

    def _project(self, tx: int) -> np.ndarray:
        # Always the same reduction per transmit beam, so powers are bitwise
        # reproducible no matter which search asks for them.
        if tx not in self._projected:
            f = self.tx_codebook.beams[tx]
            self._projected[tx] = np.sum(self.H * f[None, :], axis=1)
        return self._projected[tx]

    def measure(self, tx, rx) -> np.ndarray:
        """Power for each ``(tx[i], rx[i])`` pair; adds ``len(tx)`` to :attr:`count`."""
        tx = np.atleast_1d(np.asarray(tx, dtype=int))
        rx = np.atleast_1d(np.asarray(rx, dtype=int))
        if tx.shape != rx.shape:
            raise ValueError("tx and rx index arrays differ in length")
        projected = np.stack([self._project(int(t)) for t in tx]) if tx.size else np.empty((0, self.H.shape[0]))
        amplitude = np.sum(self.rx_codebook.beams[rx].conj() * projected, axis=1)
        if self.noise_std > 0:
            noise = self.rng.standard_normal(amplitude.shape) + 1j * self.rng.standard_normal(amplitude.shape)
            amplitude = amplitude + self.noise_std / np.sqrt(2) * noise
        self.count += int(tx.size)
        return np.abs(amplitude) ** 2 * self._scale


def _pick(pairs: np.ndarray, powers: np.ndarray, trained: int, strategy: str) -> AlignmentResult:
    order = np.lexsort((pairs[:, 1], pairs[:, 0]))
    best = order[np.argmax(powers[order])]
    return AlignmentResult(int(pairs[best, 0]), int(pairs[best, 1]), trained, float(powers[best]), strategy)


def exhaustive_search(meter: PowerMeter, tx_subset: Sequence[int], rx_subset: Sequence[int]) -> AlignmentResult:
    """Measure every pair of ``tx_subset x rx_subset`` and keep the strongest."""
    tx_subset = np.asarray(tx_subset, dtype=int)
    rx_subset = np.asarray(rx_subset, dtype=int)
    if tx_subset.size == 0 or rx_subset.size == 0:
        raise ValueError("exhaustive search needs non-empty beam subsets")
    tt, rr = np.meshgrid(tx_subset, rx_subset, indexing="ij")
    pairs = np.stack([tt.ravel(), rr.ravel()], axis=1)
    before = meter.count
    powers = meter.measure(pairs[:, 0], pairs[:, 1])
    return _pick(pairs, powers, meter.count - before, "exhaustive")


def restricted_search(meter: PowerMeter, candidates) -> AlignmentResult:
    """Measure only the given candidate pairs.

    ``candidates`` is a :class:`~beamsim.prior.CandidatePairs` or any sequence
    of ``(tx, rx)`` tuples.
    """
    pairs = getattr(candidates, "pairs", candidates)
    pairs = np.asarray(pairs, dtype=int).reshape(-1, 2)
    if len(pairs) == 0:
        raise ValueError("restricted search needs at least one candidate pair")
    before = meter.count
    powers = meter.measure(pairs[:, 0], pairs[:, 1])
    return _pick(pairs, powers, meter.count - before, "restricted")


def power_loss_db(exhaustive: AlignmentResult, restricted: AlignmentResult) -> float:
    """``10*log10(P_exhaustive / P_restricted)``.

    Returns 0 when both powers vanish (no link) and ``inf`` when only the
    restricted search found nothing.
    """
    pe, pr = exhaustive.best_power, restricted.best_power
    if pe <= 0 and pr <= 0:
        return 0.0
    if pr <= 0:
        return float("inf")
    return float(10 * np.log10(pe / pr))


def loss_status(exhaustive: AlignmentResult, restricted: AlignmentResult) -> str:
    """``"ok"``, ``"no_link"`` (both powers zero) or ``"blockage_miss"``."""
    if exhaustive.best_power <= 0 and restricted.best_power <= 0:
        return "no_link"
    if restricted.best_power <= 0:
        return "blockage_miss"
    return "ok"
