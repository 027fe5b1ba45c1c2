"""Free-space plus fiber link budget for a Gaussian beam.

Models the cascaded channel as: turbulence-broadened beam propagation over
the free-space leg, truncation by a finite receiver aperture, then fixed
dB losses (atmospheric extinction, telescope conversion, fiber attenuation,
fiber adapter) and the receiver-internal and detector efficiencies.

All lengths are meters, attenuation coefficients dB/km, efficiencies linear
probabilities. dB conversions use 10*log10 exactly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import BadJitterSpec, NonTurbulentChannel, RegimeViolation
from .rng import uniforms

__all__ = [
    "AtmosphereParams",
    "BeamParams",
    "LinkGeometry",
    "JitterSpec",
    "LinkBudget",
    "rytov_variance",
    "critical_distance",
    "rayleigh_length",
    "effective_waist",
    "transmittance",
    "loss_trace",
]


@dataclass(frozen=True)
class AtmosphereParams:
    """Turbulence and extinction constants of the free-space leg.

    cn2: refractive-index structure constant [m^(-2/3)]
    l0: turbulence inner scale [m]
    alpha_fs: free-space attenuation coefficient [dB/km]
    """

    cn2: float
    l0: float
    alpha_fs: float

    def __post_init__(self):
        if self.cn2 < 0:
            raise ValueError("cn2 must be non-negative")
        if self.l0 <= 0:
            raise ValueError("l0 must be positive")
        if self.alpha_fs < 0:
            raise ValueError("alpha_fs must be non-negative")


@dataclass(frozen=True)
class BeamParams:
    """Emitted Gaussian beam: waist w0 [m], telescope magnification
    gamma (dimensionless, >= 1), central wavelength [m]."""

    w0: float
    gamma: float
    wavelength: float

    def __post_init__(self):
        if self.w0 <= 0:
            raise ValueError("w0 must be positive")
        if self.gamma < 1:
            raise ValueError("gamma must be >= 1")
        if self.wavelength <= 0:
            raise ValueError("wavelength must be positive")

    @property
    def wavenumber(self) -> float:
        """k = 2*pi / wavelength [1/m]."""
        return 2.0 * math.pi / self.wavelength


@dataclass(frozen=True)
class LinkGeometry:
    """Link distances, receiver aperture, and fixed dB losses.

    d_fs: free-space distance [m]
    d_fiber: fiber distance [m]
    a_r: receiver aperture radius [m]
    conv_loss_db: telescope conversion loss, both ends combined [dB]
    adapter_loss_db: fixed fiber-interface loss [dB]
    alpha_fiber: fiber attenuation [dB/km]
    """

    d_fs: float
    d_fiber: float
    a_r: float
    conv_loss_db: float
    adapter_loss_db: float
    alpha_fiber: float

    def __post_init__(self):
        if self.d_fs < 0 or self.d_fiber < 0:
            raise ValueError("distances must be non-negative")
        if self.a_r <= 0:
            raise ValueError("a_r must be positive")
        if min(self.conv_loss_db, self.adapter_loss_db, self.alpha_fiber) < 0:
            raise ValueError("losses must be non-negative")


@dataclass(frozen=True)
class JitterSpec:
    """Bounded slow fluctuation of the channel loss, in dB.

    max_db: hard excursion bound around the static loss
    tau_s: mean-reversion timescale [s]
    step_db: random-step scale [dB per sqrt(s)]
    """

    max_db: float
    tau_s: float = 10.0
    step_db: float = 0.35

    def __post_init__(self):
        if self.max_db < 0:
            raise BadJitterSpec("max_db must be non-negative")
        if self.tau_s <= 0 or self.step_db < 0:
            raise ValueError("tau_s must be positive and step_db non-negative")


@dataclass(frozen=True)
class LinkBudget:
    """End-to-end transmittance with its itemized dB decomposition.

    breakdown holds one dB entry per multiplicative factor; their sum equals
    -10*log10(eta_total) up to float rounding.
    """

    eta_total: float
    breakdown: dict = field(repr=False)
    w_eff: float
    rytov: float

    def __post_init__(self):
        if not (0.0 < self.eta_total <= 1.0):
            raise ValueError("eta_total must be in (0, 1]")
        if abs(sum(self.breakdown.values()) - self.total_db) > 1e-9:
            raise ValueError("breakdown does not decompose eta_total")

    @property
    def total_db(self) -> float:
        return -10.0 * math.log10(self.eta_total)

    @property
    def channel_db(self) -> float:
        """Channel-only loss: everything except the receiver-internal and
        detector terms."""
        return sum(
            v for k, v in self.breakdown.items() if k not in ("receiver", "detector")
        )


def rytov_variance(atm: AtmosphereParams, beam: BeamParams, d_fs: float) -> float:
    """Turbulence strength sigma_Ry^2 = 1.23 * cn2 * k^(7/6) * d^(11/6).

    Dimensionless; zero iff cn2 = 0 or d_fs = 0.
    """
    if d_fs < 0:
        raise ValueError("d_fs must be non-negative")
    return 1.23 * atm.cn2 * beam.wavenumber ** (7.0 / 6.0) * d_fs ** (11.0 / 6.0)


def critical_distance(atm: AtmosphereParams, beam: BeamParams) -> float:
    """Distance d_i = 1 / (cn2 * k^2 * l0^(5/3)) at which the transverse
    coherence radius shrinks to the turbulence inner scale [m].

    The beam-spread model below is only valid for d_fs < d_i.
    """
    if atm.cn2 == 0:
        raise NonTurbulentChannel("critical distance undefined for cn2 = 0")
    return 1.0 / (atm.cn2 * beam.wavenumber**2 * atm.l0 ** (5.0 / 3.0))


def rayleigh_length(beam: BeamParams) -> float:
    """Rayleigh length of the magnified beam, pi * w0^2 * gamma^2 / lambda [m]."""
    return math.pi * beam.w0**2 * beam.gamma**2 / beam.wavelength


def effective_waist(atm: AtmosphereParams, beam: BeamParams, d_fs: float) -> float:
    """Beam radius at the receiver plane after diffraction and turbulence [m].

    w = w0*gamma * sqrt(1 + (d/d_R)^2) * sqrt(1 + 1.63 * sigma^(6/5) * Theta)
    with Theta = 2 d d_R^2 / (k w0^2 gamma^2 (d_R^2 + d^2)).

    Raises RegimeViolation when d_fs >= critical_distance (model validity).
    """
    if d_fs < 0:
        raise ValueError("d_fs must be non-negative")
    if atm.cn2 > 0 and d_fs >= critical_distance(atm, beam):
        raise RegimeViolation(
            f"d_fs = {d_fs:g} m is not below the critical distance "
            f"{critical_distance(atm, beam):g} m"
        )
    d_r = rayleigh_length(beam)
    launch = beam.w0 * beam.gamma
    diffraction = math.sqrt(1.0 + (d_fs / d_r) ** 2)
    if d_fs == 0.0:
        return launch
    sigma2 = rytov_variance(atm, beam, d_fs)
    theta = (
        2.0
        * d_fs
        * d_r**2
        / (beam.wavenumber * launch**2 * (d_r**2 + d_fs**2))
    )
    spread = math.sqrt(1.0 + 1.63 * sigma2 ** (6.0 / 5.0) * theta)
    return launch * diffraction * spread


def _to_db(factor: float) -> float:
    return -10.0 * math.log10(factor)


def transmittance(
    geom: LinkGeometry,
    atm: AtmosphereParams,
    beam: BeamParams,
    eta_b: float,
    eta_d: float,
) -> LinkBudget:
    """Total end-to-end transmittance of the cascaded link.

    eta = (1 - exp(-2 a_r^2 / w^2))            aperture capture
          * 10^(-alpha_fs d_fs / 10 km)        atmospheric extinction
          * 10^(-conv_loss / 10)               telescope conversion
          * 10^(-alpha_fiber d_fiber / 10 km)  fiber attenuation
          * 10^(-adapter_loss / 10)            fiber adapter
          * eta_b * eta_d                      receiver internal, detector

    eta_b, eta_d must lie in (0, 1].
    """
    if not (0.0 < eta_b <= 1.0 and 0.0 < eta_d <= 1.0):
        raise ValueError("eta_b and eta_d must be in (0, 1]")
    w = effective_waist(atm, beam, geom.d_fs)
    capture = -math.expm1(-2.0 * geom.a_r**2 / w**2)
    factors = {
        "geometric": capture,
        "atmospheric": 10.0 ** (-atm.alpha_fs * geom.d_fs / 1000.0 / 10.0),
        "conversion": 10.0 ** (-geom.conv_loss_db / 10.0),
        "fiber": 10.0 ** (-geom.alpha_fiber * geom.d_fiber / 1000.0 / 10.0),
        "adapter": 10.0 ** (-geom.adapter_loss_db / 10.0),
        "receiver": eta_b,
        "detector": eta_d,
    }
    eta_total = 1.0
    for v in factors.values():
        eta_total *= v
    breakdown = {k: _to_db(v) for k, v in factors.items()}
    return LinkBudget(
        eta_total=eta_total,
        breakdown=breakdown,
        w_eff=w,
        rytov=rytov_variance(atm, beam, geom.d_fs),
    )


def loss_trace(
    geom: LinkGeometry,
    atm: AtmosphereParams,
    beam: BeamParams,
    jitter: JitterSpec,
    duration: float,
    dt: float,
    seed: int,
    eta_b: float = 1.0,
    eta_d: float = 1.0,
) -> np.ndarray:
    """Sampled total link loss [dB] under bounded slow jitter.

    The static budget loss is perturbed by a mean-reverting random walk
    reflected at +-max_db, so the long-run mean stays at the static loss
    and no sample leaves the bound. Deterministic for a fixed seed.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    if duration < dt:
        raise ValueError("duration must be at least dt")
    static_db = transmittance(geom, atm, beam, eta_b, eta_d).total_db
    n = int(round(duration / dt))
    if jitter.max_db == 0.0:
        return np.full(n, static_db)
    # zero-mean, unit-variance steps; decay pulls toward the static level
    steps = (uniforms(seed, n) * 2.0 - 1.0) * math.sqrt(3.0) * jitter.step_db * math.sqrt(dt)
    decay = max(0.0, 1.0 - dt / jitter.tau_s)
    bound = jitter.max_db
    out = np.empty(n)
    x = 0.0
    for i in range(n):
        x = x * decay + steps[i]
        while x > bound or x < -bound:
            if x > bound:
                x = 2.0 * bound - x
            else:
                x = -2.0 * bound - x
        out[i] = static_db + x
    return out
