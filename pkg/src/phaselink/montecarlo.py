"""Photon-level Monte Carlo of pulse emission, loss, and detection.

Each pulse of intensity a clicks with the exact union probability of a
dark event and a photon event, 1 - (1 - Y0) exp(-eta a); given a click,
an error occurs with probability (e0 Y0 + (e_det + e_mis)(1 - exp(-eta a)))
/ (Y0 + 1 - exp(-eta a)). The union click model differs from the additive
closed form by O(Y0 * eta * a), far below sampling noise at the scales
simulated here. Double-click events are not modeled.

Batches are reproducible: all draws come from counter-based streams keyed
by the plan seed (see rng), so identical inputs give identical statistics
and parallel batches can use split_seed for independent streams.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import InsufficientStatistics
from .rates import DecoyObservables, DetectorConfig, SourceConfig, E0_BACKGROUND
from .rng import split_seed, uniforms

CLASS_SIGNAL = 0
CLASS_DECOY = 1
CLASS_VACUUM = 2
_CLASS_NAMES = ("signal", "decoy", "vacuum")

__all__ = [
    "CLASS_SIGNAL",
    "CLASS_DECOY",
    "CLASS_VACUUM",
    "PulsePlan",
    "ClassCounts",
    "BatchStats",
    "simulate_batch",
    "stats_to_observables",
    "split_seed",
]


@dataclass(frozen=True)
class PulsePlan:
    """Pulse count, seed, and the per-pulse intensity class schedule."""

    n_pulses: int
    seed: int
    intensity_schedule: np.ndarray = field(repr=False)

    def __post_init__(self):
        if self.n_pulses <= 0:
            raise ValueError("n_pulses must be positive")
        if len(self.intensity_schedule) != self.n_pulses:
            raise ValueError("schedule length must equal n_pulses")

    @classmethod
    def make(cls, n_pulses: int, mix_ratio, seed: int) -> "PulsePlan":
        """Draw the class schedule i.i.d. with probabilities mix_ratio."""
        total = float(sum(mix_ratio))
        p_sig = mix_ratio[0] / total
        p_dec = mix_ratio[1] / total
        u = uniforms(split_seed(seed, 0), n_pulses)
        schedule = np.full(n_pulses, CLASS_VACUUM, dtype=np.uint8)
        schedule[u < p_sig + p_dec] = CLASS_DECOY
        schedule[u < p_sig] = CLASS_SIGNAL
        return cls(n_pulses=n_pulses, seed=seed, intensity_schedule=schedule)


@dataclass(frozen=True)
class ClassCounts:
    """Counts for one intensity class. Counts are floats so that exact
    analytic embeddings (clicked = gain * sent) round-trip bit-exactly."""

    sent: float
    clicked: float
    errored: float

    def __post_init__(self):
        if not (0 <= self.errored <= self.clicked <= self.sent):
            raise ValueError("require errored <= clicked <= sent")

    @property
    def gain(self) -> float:
        return self.clicked / self.sent if self.sent else 0.0

    @property
    def qber(self) -> float:
        return self.errored / self.clicked if self.clicked else E0_BACKGROUND

    @property
    def se_gain(self) -> float:
        """Binomial standard error of the empirical gain."""
        if not self.sent:
            return 0.0
        g = self.gain
        return math.sqrt(g * (1.0 - g) / self.sent)

    @property
    def se_qber(self) -> float:
        """Binomial standard error of the empirical QBER (per click)."""
        if not self.clicked:
            return 0.0
        e = self.qber
        return math.sqrt(e * (1.0 - e) / self.clicked)


@dataclass(frozen=True)
class BatchStats:
    """Per-class tallies of one simulated batch."""

    signal: ClassCounts
    decoy: ClassCounts
    vacuum: ClassCounts

    def by_class(self, cls_index: int) -> ClassCounts:
        return getattr(self, _CLASS_NAMES[cls_index])

    @classmethod
    def from_observables(cls, obs: DecoyObservables, sent: float = 2.0**30) -> "BatchStats":
        """Embed exact observables as analytic counts.

        sent defaults to a power of two so clicked/sent reproduces the
        gains bit-exactly.
        """
        return cls(
            signal=ClassCounts(sent, obs.q_mu * sent, obs.e_mu * obs.q_mu * sent),
            decoy=ClassCounts(sent, obs.q_nu * sent, obs.e_nu * obs.q_nu * sent),
            vacuum=ClassCounts(sent, obs.y0 * sent, E0_BACKGROUND * obs.y0 * sent),
        )


def click_probability(eta: float, intensity: float, y0: float) -> float:
    """Union probability of a dark or photon click for one pulse."""
    return 1.0 - (1.0 - y0) * math.exp(-eta * intensity)


def error_given_click(eta: float, intensity: float, det: DetectorConfig) -> float:
    """Conditional error probability for a clicked pulse."""
    photon = -math.expm1(-eta * intensity)
    gain = det.y0 + photon
    if gain == 0.0:
        return E0_BACKGROUND
    return (E0_BACKGROUND * det.y0 + (det.e_det + det.e_mis) * photon) / gain


def simulate_batch(
    plan: PulsePlan,
    eta: float,
    src: SourceConfig,
    det: DetectorConfig,
) -> BatchStats:
    """Sample clicks and error flips for every pulse of the plan."""
    if not (0.0 <= eta <= 1.0):
        raise ValueError("eta must be in [0, 1]")
    intensities = np.array([src.mu, src.nu, 0.0])
    p_click = np.array([click_probability(eta, a, det.y0) for a in intensities])
    p_err = np.array([error_given_click(eta, a, det) for a in intensities])

    sched = plan.intensity_schedule
    u_click = uniforms(split_seed(plan.seed, 1), plan.n_pulses)
    u_err = uniforms(split_seed(plan.seed, 2), plan.n_pulses)
    clicked = u_click < p_click[sched]
    errored = clicked & (u_err < p_err[sched])

    counts = []
    for c in (CLASS_SIGNAL, CLASS_DECOY, CLASS_VACUUM):
        in_class = sched == c
        counts.append(
            ClassCounts(
                sent=float(np.count_nonzero(in_class)),
                clicked=float(np.count_nonzero(clicked & in_class)),
                errored=float(np.count_nonzero(errored & in_class)),
            )
        )
    return BatchStats(signal=counts[0], decoy=counts[1], vacuum=counts[2])


def stats_to_observables(stats: BatchStats) -> DecoyObservables:
    """Map empirical frequencies into decoy observables.

    The vacuum yield comes from the vacuum class; zero vacuum clicks are
    acceptable (y0 = 0). Signal or decoy classes without clicks leave the
    QBER undefined and raise InsufficientStatistics.
    """
    for name in ("signal", "decoy", "vacuum"):
        if getattr(stats, name).sent < 1:
            raise InsufficientStatistics(f"no {name} pulses sent")
    if stats.signal.clicked == 0 or stats.decoy.clicked == 0:
        raise InsufficientStatistics("signal and decoy classes need clicks")
    return DecoyObservables(
        q_mu=stats.signal.gain,
        e_mu=stats.signal.qber,
        q_nu=stats.decoy.gain,
        e_nu=stats.decoy.qber,
        y0=stats.vacuum.gain,
    )
