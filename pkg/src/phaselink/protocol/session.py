"""Executable endpoints for simultaneous message delivery and key exchange.

Per frame, the sender (Alice) encodes a 125-byte payload into chips
(framing pipeline), rides them on signal-class pulses interleaved with
decoy and vacuum pulses, and the receiver (Bob) measures in random bases.
The classical exchange per frame:

    A -> B  FRAME_META, QUANTUM (simulated photon stream)
    B -> A  BASIS_ANNOUNCE (bases + click flags for the pulse range)
    A -> B  SAMPLE_REQUEST (kept signal events to disclose)
    B -> A  SAMPLE_DISCLOSE
    A -> B  ABORT            if the sampled QBER exceeds the threshold
            SIFT_MAP         otherwise: kept-for-decode chip positions
                             (kept minus disclosed)
    B -> A  REPORT (decode status + payload digest)

Key accounting: each chip debits one pad bit at preprocess; pad bits on
positions Bob never kept are recycled; kept positions mint fresh key,
except disclosed check bits which are consumed and not regenerated.

A session is fully deterministic given (seed_alice, seed_bob,
seed_channel); every random draw comes from counter-based streams derived
from those three seeds. Rates are reported on the simulated clock,
elapsed = pulses / (rep_rate * duty_cycle).
"""

from __future__ import annotations

import hashlib
import threading
from dataclasses import dataclass
from typing import NamedTuple, Optional, Sequence

import numpy as np

from ..errors import Abort, EmptySift, FrameCorrupt, FrameLost, TransportClosed
from ..montecarlo import (
    CLASS_DECOY,
    CLASS_SIGNAL,
    CLASS_VACUUM,
    click_probability,
    error_given_click,
)
from ..optics import AtmosphereParams, BeamParams, JitterSpec, LinkGeometry, transmittance
from ..rates import DetectorConfig, SourceConfig
from ..rng import random_bits, random_bytes, split_seed, uniforms
from . import wire
from .framing import Frame, decode, preprocess
from .ledger import FrameAccounting, KeyLedger, ledger_commit
from .phases import SiftRecord

# stream ids for seed derivation
_S_PAYLOAD = 1
_S_SCHEDULE = 2
_S_FILLER = 3
_S_ALICE_BASIS = 4
_S_SAMPLE = 5
_S_KEYPOOL = 100
_S_MASK = 101
_S_CLICK = 1
_S_ERROR = 2
_S_JITTER = 3


@dataclass(frozen=True)
class ProtocolParams:
    """Frame pipeline and check settings for a session."""

    fec_ratio: int = 1
    spread_ratio: int = 1920
    qber_threshold: float = 0.05
    sample_fraction: float = 0.1
    duty_cycle: float = 1.0
    n_frames: int = 10
    initial_pool_bits: int = 4_000_000

    def __post_init__(self):
        if self.fec_ratio < 1 or self.spread_ratio < 1:
            raise ValueError("ratios must be >= 1")
        if not (0.0 < self.sample_fraction <= 1.0):
            raise ValueError("sample_fraction must be in (0, 1]")
        if not (0.0 <= self.qber_threshold <= 0.5):
            raise ValueError("qber_threshold must be in [0, 0.5]")
        if not (0.0 < self.duty_cycle <= 1.0):
            raise ValueError("duty_cycle must be in (0, 1]")
        if self.n_frames < 1 or self.initial_pool_bits < 0:
            raise ValueError("n_frames must be >= 1 and pool non-negative")


@dataclass(frozen=True)
class Seeds:
    alice: int
    bob: int
    channel: int


@dataclass(frozen=True)
class SessionSpec:
    """Everything both simulated endpoints need to run one session."""

    atm: AtmosphereParams
    beam: BeamParams
    geom: LinkGeometry
    src: SourceConfig
    det: DetectorConfig
    protocol: ProtocolParams
    seeds: Seeds
    jitter: Optional[JitterSpec] = None
    extra_loss_db: Optional[tuple] = None  # scripted per-frame extra loss


@dataclass
class SessionReport:
    qber: float
    comm_rate: float
    key_gen_rate: float
    key_cons_rate: float
    p_rec_empirical: float
    frames_ok: int
    frames_failed: int
    aborted: bool
    abort_reason: Optional[str] = None
    q_mu_hat: float = 0.0
    q_nu_hat: float = 0.0
    total_pulses: int = 0
    elapsed_s: float = 0.0

    def as_dict(self) -> dict:
        return {
            "qber": self.qber,
            "comm_rate": self.comm_rate,
            "key_gen_rate": self.key_gen_rate,
            "key_cons_rate": self.key_cons_rate,
            "p_rec_empirical": self.p_rec_empirical,
            "frames_ok": self.frames_ok,
            "frames_failed": self.frames_failed,
            "aborted": self.aborted,
            "abort_reason": self.abort_reason,
            "q_mu_hat": self.q_mu_hat,
            "q_nu_hat": self.q_nu_hat,
            "total_pulses": self.total_pulses,
            "elapsed_s": self.elapsed_s,
        }


class CheckResult(NamedTuple):
    decision: str  # "proceed" | "abort"
    qber_estimate: float
    disclosed_indices: np.ndarray


def security_check(
    records: Sequence[SiftRecord],
    alice_bits: Sequence[int],
    sample_fraction: float,
    threshold: float,
    seed: int = 0,
) -> CheckResult:
    """Estimate the QBER on a random disclosed subset of kept records.

    alice_bits aligns with records by position. Aborts iff the estimate
    exceeds the threshold; disclosed records must be excluded from message
    and key use by the caller. Raises EmptySift when nothing was kept.
    """
    if not (0.0 < sample_fraction <= 1.0):
        raise ValueError("sample_fraction must be in (0, 1]")
    kept_idx = [i for i, r in enumerate(records) if r.kept]
    if not kept_idx:
        raise EmptySift("no kept records to check")
    n_sample = max(1, int(len(kept_idx) * sample_fraction))
    order = np.argsort(uniforms(seed, len(kept_idx)), kind="stable")
    chosen = np.array(kept_idx, dtype=np.int64)[order[:n_sample]]
    errors = sum(records[i].bob_bit != alice_bits[i] for i in chosen)
    qber = errors / n_sample
    decision = "abort" if qber > threshold else "proceed"
    return CheckResult(decision=decision, qber_estimate=qber, disclosed_indices=chosen)


def _draw_schedule(seed: int, n_chips: int, src: SourceConfig) -> np.ndarray:
    """Class schedule covering exactly n_chips signal slots.

    Classes are drawn i.i.d. per the mix ratio; the frame ends at the
    n_chips-th signal pulse.
    """
    p_sig = src.signal_fraction
    p_dec = src.decoy_fraction
    chunks = []
    total_signal = 0
    offset = 0
    need = n_chips
    while total_signal < n_chips:
        est = int(need / p_sig * 1.05) + 64
        u = uniforms(seed, est, offset)
        c = np.full(est, CLASS_VACUUM, dtype=np.uint8)
        c[u < p_sig + p_dec] = CLASS_DECOY
        c[u < p_sig] = CLASS_SIGNAL
        chunks.append(c)
        total_signal += int(np.count_nonzero(c == CLASS_SIGNAL))
        offset += est
        need = n_chips - total_signal
    classes = np.concatenate(chunks) if len(chunks) > 1 else chunks[0]
    cum = np.cumsum(classes == CLASS_SIGNAL)
    end = int(np.searchsorted(cum, n_chips))
    return classes[: end + 1]


class _Tally:
    """Per-class sent/clicked accumulator (sender side)."""

    def __init__(self):
        self.sent = np.zeros(3, dtype=np.int64)
        self.clicked = np.zeros(3, dtype=np.int64)

    def add(self, classes: np.ndarray, clicks: np.ndarray) -> None:
        for c in (CLASS_SIGNAL, CLASS_DECOY, CLASS_VACUUM):
            mask = classes == c
            self.sent[c] += int(np.count_nonzero(mask))
            self.clicked[c] += int(np.count_nonzero(clicks & mask))

    def gain(self, c: int) -> float:
        return self.clicked[c] / self.sent[c] if self.sent[c] else 0.0


class AliceSession:
    """Sender endpoint: frames, sampling decisions, ledger, final report."""

    def __init__(self, spec: SessionSpec):
        self.spec = spec
        self.ledger = KeyLedger.with_initial(spec.protocol.initial_pool_bits)
        self.key_seed = split_seed(spec.seeds.alice, _S_KEYPOOL)
        self.mask_seed = split_seed(spec.seeds.alice, _S_MASK)
        self.sent_payloads: list = []
        self.report: Optional[SessionReport] = None
        self._tally = _Tally()

    def _frame_payload(self, frame_id: int) -> bytes:
        seed = split_seed(split_seed(self.spec.seeds.alice, _S_PAYLOAD), frame_id)
        return random_bytes(seed, 125)

    def run(self, transport) -> SessionReport:
        spec = self.spec
        p = spec.protocol
        start_pulse = 0
        frames_ok = frames_failed = 0
        disclosed_total = 0
        disclosed_errors = 0
        aborted = False
        abort_reason = None

        for f in range(p.n_frames):
            payload = self._frame_payload(f)
            frame = Frame(payload, f, p.fec_ratio, p.spread_ratio)
            self.sent_payloads.append(payload)
            n_chips = frame.chip_count
            key_bits = random_bits(self.key_seed, n_chips, offset=f * n_chips)
            chips = preprocess(frame, key_bits, self.mask_seed, self.ledger)

            classes = _draw_schedule(
                split_seed(split_seed(spec.seeds.alice, _S_SCHEDULE), f), n_chips, spec.src
            )
            n_pulses = len(classes)
            signal_mask = classes == CLASS_SIGNAL
            bits = random_bits(split_seed(split_seed(spec.seeds.alice, _S_FILLER), f), n_pulses)
            bits[signal_mask] = chips
            bases = random_bits(
                split_seed(split_seed(spec.seeds.alice, _S_ALICE_BASIS), f), n_pulses
            )

            last = f == p.n_frames - 1
            transport.send(
                wire.FRAME_META,
                wire.encode_frame_meta(
                    f, start_pulse, n_pulses, n_chips, p.fec_ratio, p.spread_ratio, last
                ),
            )
            transport.send(
                wire.QUANTUM, wire.encode_quantum(start_pulse, classes, bases, bits)
            )

            msg, payload_bytes = transport.recv()
            assert msg == wire.BASIS_ANNOUNCE
            _, bob_bases, clicks = wire.decode_basis_announce(payload_bytes)
            self._tally.add(classes, clicks)

            matched = bases == bob_bases
            kept = clicks & matched
            kept_sig_idx = np.flatnonzero(kept & signal_mask)

            n_sample = (
                max(1, int(len(kept_sig_idx) * p.sample_fraction))
                if len(kept_sig_idx)
                else 0
            )
            if n_sample:
                order = np.argsort(
                    uniforms(split_seed(split_seed(spec.seeds.alice, _S_SAMPLE), f),
                             len(kept_sig_idx)),
                    kind="stable",
                )
                sample_idx = np.sort(kept_sig_idx[order[:n_sample]])
            else:
                sample_idx = np.empty(0, dtype=np.int64)
            transport.send(wire.SAMPLE_REQUEST, wire.encode_sample_request(sample_idx))
            msg, payload_bytes = transport.recv()
            assert msg == wire.SAMPLE_DISCLOSE
            disclosed_bits = wire.decode_sample_disclose(payload_bytes)

            frame_errors = int(np.count_nonzero(disclosed_bits != bits[sample_idx]))
            disclosed_total += n_sample
            disclosed_errors += frame_errors
            if n_sample and frame_errors / n_sample > p.qber_threshold:
                reason = (
                    f"frame {f}: sampled QBER {frame_errors / n_sample:.4f} exceeds "
                    f"threshold {p.qber_threshold:.4f}"
                )
                transport.send(wire.ABORT, reason.encode("utf-8"))
                aborted = True
                abort_reason = reason
                start_pulse += n_pulses
                break

            # decode map: kept signal chips minus disclosed check bits
            decode_pulse_mask = kept & signal_mask
            decode_pulse_mask[sample_idx] = False
            chip_index = np.cumsum(signal_mask) - 1
            chip_map = np.zeros(n_chips, dtype=bool)
            chip_map[chip_index[decode_pulse_mask]] = True
            transport.send(wire.SIFT_MAP, wire.encode_sift_map(start_pulse, chip_map))

            ledger_commit(
                self.ledger,
                FrameAccounting(
                    chips=n_chips, kept=int(len(kept_sig_idx)), disclosed=n_sample
                ),
            )

            msg, payload_bytes = transport.recv()
            assert msg == wire.REPORT
            result = wire.decode_report(payload_bytes)
            ok = (
                result.get("status") == "ok"
                and result.get("sha256") == hashlib.sha256(payload).hexdigest()
            )
            if ok:
                frames_ok += 1
            else:
                frames_failed += 1
            start_pulse += n_pulses

        elapsed = start_pulse / (spec.src.rep_rate * p.duty_cycle)
        led = self.ledger
        self.report = SessionReport(
            qber=disclosed_errors / disclosed_total if disclosed_total else 0.0,
            comm_rate=frames_ok * 1000 / elapsed if elapsed else 0.0,
            key_gen_rate=led.generated / elapsed if elapsed else 0.0,
            key_cons_rate=(led.consumed - led.recycled) / elapsed if elapsed else 0.0,
            p_rec_empirical=led.p_rec,
            frames_ok=frames_ok,
            frames_failed=frames_failed,
            aborted=aborted,
            abort_reason=abort_reason,
            q_mu_hat=self._tally.gain(CLASS_SIGNAL),
            q_nu_hat=self._tally.gain(CLASS_DECOY),
            total_pulses=start_pulse,
            elapsed_s=elapsed,
        )
        return self.report


class BobSession:
    """Receiver endpoint: detection simulation, announcements, decoding."""

    def __init__(self, spec: SessionSpec):
        self.spec = spec
        self.key_seed = split_seed(spec.seeds.alice, _S_KEYPOOL)  # pre-shared
        self.mask_seed = split_seed(spec.seeds.alice, _S_MASK)
        self.recovered: dict = {}
        self.statuses: dict = {}
        budget = transmittance(
            spec.geom, spec.atm, spec.beam, spec.det.eta_b, spec.det.eta_d
        )
        self.static_db = budget.total_db
        self._jitter_x = 0.0

    def _frame_loss_db(self, frame_id: int, frame_duration: float) -> float:
        extra = 0.0
        if self.spec.extra_loss_db is not None and frame_id < len(self.spec.extra_loss_db):
            extra += self.spec.extra_loss_db[frame_id]
        jit = self.spec.jitter
        if jit is not None and jit.max_db > 0.0:
            u = uniforms(
                split_seed(split_seed(self.spec.seeds.channel, _S_JITTER), frame_id), 1
            )[0]
            step = (2.0 * u - 1.0) * np.sqrt(3.0) * jit.step_db * np.sqrt(frame_duration)
            x = self._jitter_x * max(0.0, 1.0 - frame_duration / jit.tau_s) + step
            while x > jit.max_db or x < -jit.max_db:
                x = 2.0 * jit.max_db - x if x > jit.max_db else -2.0 * jit.max_db - x
            self._jitter_x = x
            extra += x
        return self.static_db + extra

    def run(self, transport) -> None:
        spec = self.spec
        det, src = spec.det, spec.src
        intensities = {CLASS_SIGNAL: src.mu, CLASS_DECOY: src.nu, CLASS_VACUUM: 0.0}
        done = False
        while not done:
            msg, payload = transport.recv()
            if msg == wire.ABORT:
                return
            assert msg == wire.FRAME_META
            meta = wire.decode_frame_meta(payload)
            done = meta["last"]
            f = meta["frame_id"]
            n_pulses = meta["n_pulses"]

            msg, payload = transport.recv()
            assert msg == wire.QUANTUM
            start, classes, alice_bases, alice_bits = wire.decode_quantum(payload)

            loss_db = self._frame_loss_db(f, n_pulses / src.rep_rate)
            eta = 10.0 ** (-loss_db / 10.0)
            p_click = np.array(
                [click_probability(eta, intensities[c], det.y0) for c in range(3)]
            )
            p_err = np.array(
                [error_given_click(eta, intensities[c], det) for c in range(3)]
            )
            u_click = uniforms(
                split_seed(split_seed(spec.seeds.channel, _S_CLICK), f), n_pulses
            )
            u_err = uniforms(
                split_seed(split_seed(spec.seeds.channel, _S_ERROR), f), n_pulses
            )
            clicks = u_click < p_click[classes]
            errors = clicks & (u_err < p_err[classes])
            bob_bases = random_bits(split_seed(spec.seeds.bob, f), n_pulses)
            bob_bits = alice_bits ^ errors.astype(np.uint8)

            transport.send(
                wire.BASIS_ANNOUNCE, wire.encode_basis_announce(start, bob_bases, clicks)
            )

            msg, payload = transport.recv()
            assert msg == wire.SAMPLE_REQUEST
            sample_idx = wire.decode_sample_request(payload)
            transport.send(
                wire.SAMPLE_DISCLOSE, wire.encode_sample_disclose(bob_bits[sample_idx])
            )

            msg, payload = transport.recv()
            if msg == wire.ABORT:
                return
            assert msg == wire.SIFT_MAP
            _, chip_map = wire.decode_sift_map(payload)

            signal_mask = classes == CLASS_SIGNAL
            n_chips = meta["n_chips"]
            chips = np.zeros(n_chips, dtype=np.uint8)
            chips[np.cumsum(signal_mask)[signal_mask] - 1] = bob_bits[signal_mask]
            key_bits = random_bits(self.key_seed, n_chips, offset=f * n_chips)
            try:
                recovered = decode(
                    chips,
                    chip_map,
                    key_bits,
                    self.mask_seed,
                    f,
                    meta["fec_ratio"],
                    meta["spread_ratio"],
                )
                status, digest = "ok", hashlib.sha256(recovered).hexdigest()
                self.recovered[f] = recovered
            except FrameLost:
                status, digest = "lost", ""
            except FrameCorrupt:
                status, digest = "corrupt", ""
            self.statuses[f] = status
            transport.send(
                wire.REPORT,
                wire.encode_report({"frame_id": f, "status": status, "sha256": digest}),
            )


def run_session_detailed(spec: SessionSpec, transports=None) -> tuple:
    """Run one full session and return (report, alice, bob) without raising
    on abort. Loopback transports are created when none are given; pass a
    (sender, receiver) transport pair to run over sockets."""
    if transports is None:
        transports = wire.LoopbackTransport.pair()
    t_alice, t_bob = transports
    alice = AliceSession(spec)
    bob = BobSession(spec)
    failure = []

    def _bob_run():
        try:
            bob.run(t_bob)
        except Exception as exc:  # surfaced after join
            failure.append(exc)
            t_bob.close()  # unblock the sender

    thread = threading.Thread(target=_bob_run, daemon=True)
    thread.start()
    try:
        report = alice.run(t_alice)
    except TransportClosed:
        thread.join(timeout=60.0)
        if failure:
            raise failure[0] from None  # receiver's root cause, not the EOF
        raise
    finally:
        # closing first unblocks the receiver if the sender died mid-frame
        t_alice.close()
        t_bob.close()
        thread.join(timeout=60.0)
    if failure:
        raise failure[0]
    return report, alice, bob


def run_session(spec: SessionSpec, transports=None) -> SessionReport:
    """Run one full session and return the sender-side report.

    Raises Abort when the security check tripped.
    """
    report, _, _ = run_session_detailed(spec, transports)
    if report.aborted:
        raise Abort(report.abort_reason or "security check failed")
    return report
