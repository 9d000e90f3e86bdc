"""Metamorphic audio transformations with a severity parameter ``theta``.

Each kind maps (clip, theta[, seed]) to a new clip. Stochastic kinds
(Drop, Frame, Noise) draw from ``numpy.random.default_rng(seed)`` so the
output is a pure function of the inputs.
"""

from __future__ import annotations

import enum
import math
import re
from dataclasses import dataclass
from fractions import Fraction

import numpy as np
from scipy import signal

from .audio_io import AudioClip
from .errors import InfeasibleSelection, InvalidParameter, SilentClip

DROP_CHUNK_MS = 20
FRAME_DROP_FRACTION = Fraction(1, 10)


class Kind(str, enum.Enum):
    AMPLITUDE = "Amplitude"
    CLIPPING = "Clipping"
    DROP = "Drop"
    FRAME = "Frame"
    HIGHPASS = "HighPass"
    LOWPASS = "LowPass"
    NOISE = "Noise"
    SCALE = "Scale"

    def __str__(self):
        return self.value

    @classmethod
    def parse(cls, name) -> "Kind":
        if isinstance(name, cls):
            return name
        key = re.sub(r"[^a-z]", "", str(name).lower())
        aliases = {"amp": "amplitude", "hp": "highpass", "lp": "lowpass", "clip": "clipping"}
        key = aliases.get(key, key)
        for kind in cls:
            if kind.value.lower() == key:
                return kind
        raise InvalidParameter(f"unknown transformation kind {name!r}")


STOCHASTIC = frozenset({Kind.DROP, Kind.FRAME, Kind.NOISE})


def format_theta(theta) -> str:
    """Canonical text for a severity value: integers lose the trailing '.0'."""
    theta = float(theta)
    return str(int(theta)) if theta.is_integer() else repr(theta)


@dataclass(frozen=True)
class Transformation:
    kind: Kind
    theta: float
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "kind", Kind.parse(self.kind))
        object.__setattr__(self, "theta", float(self.theta))
        object.__setattr__(self, "seed", int(self.seed))

    @property
    def descriptor(self) -> str:
        return f"{self.kind.value}:{format_theta(self.theta)}:{self.seed}"

    def validate(self, sample_rate: int | None = None) -> None:
        validate_theta(self.kind, self.theta, sample_rate)


def validate_theta(kind, theta, sample_rate=None) -> None:
    kind = Kind.parse(kind)
    theta = float(theta)
    if not math.isfinite(theta):
        raise InvalidParameter(f"{kind}: theta must be finite")
    ok = {
        Kind.AMPLITUDE: theta > 0,
        Kind.CLIPPING: 0 < theta <= 1,
        Kind.DROP: 0 <= theta < 100,
        Kind.FRAME: theta >= 1,
        Kind.HIGHPASS: theta > 0 and (sample_rate is None or theta < sample_rate / 2),
        Kind.LOWPASS: theta > 0 and (sample_rate is None or theta < sample_rate / 2),
        Kind.NOISE: True,
        Kind.SCALE: 0 < theta <= 1,
    }[kind]
    if not ok:
        raise InvalidParameter(f"theta={theta} is out of range for {kind}")


@dataclass(frozen=True)
class SeveritySchedule:
    kind: Kind
    thetas: tuple

    def __post_init__(self):
        object.__setattr__(self, "kind", Kind.parse(self.kind))
        thetas = tuple(float(t) for t in self.thetas)
        if not thetas:
            raise InvalidParameter(f"{self.kind}: empty schedule")
        for t in thetas:
            validate_theta(self.kind, t)
        object.__setattr__(self, "thetas", thetas)

    def transformations(self, seed=0):
        return [Transformation(self.kind, t, seed) for t in self.thetas]


# Least -> most destructive. Amplitude carries the extra gain 2.0 at the end.
DEFAULT_SCHEDULES = (
    SeveritySchedule(Kind.AMPLITUDE, (0.5, 0.4, 0.3, 0.2, 0.1, 2.0)),
    SeveritySchedule(Kind.CLIPPING, (0.05, 0.04, 0.03, 0.02, 0.01)),
    SeveritySchedule(Kind.DROP, (5, 10, 15, 20, 25)),
    SeveritySchedule(Kind.FRAME, (10, 20, 30, 40, 50)),
    SeveritySchedule(Kind.HIGHPASS, (500, 600, 700, 800, 900)),
    SeveritySchedule(Kind.LOWPASS, (900, 800, 700, 600, 500)),
    SeveritySchedule(Kind.NOISE, (10, 8, 6, 4, 2)),
    SeveritySchedule(Kind.SCALE, (0.9, 0.8, 0.7, 0.6, 0.5)),
)


def load_schedules(path) -> tuple:
    """Read schedules, one kind per line: ``Noise 10 8 6 4 2`` (commas also accepted).

    Kinds absent from the file keep their default schedule.
    """
    found = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            parts = [p for p in re.split(r"[,\s]+", line) if p]
            try:
                sched = SeveritySchedule(parts[0], tuple(float(p) for p in parts[1:]))
            except ValueError as exc:
                raise InvalidParameter(f"{path}:{lineno}: {exc}") from exc
            found[sched.kind] = sched
    return tuple(found.get(s.kind, s) for s in DEFAULT_SCHEDULES)


def severity_rank(kind, theta, schedules=DEFAULT_SCHEDULES) -> int:
    """1-based position of ``theta`` in its schedule (nearest entry if absent)."""
    kind = Kind.parse(kind)
    for sched in schedules:
        if sched.kind == kind:
            dists = [abs(t - float(theta)) for t in sched.thetas]
            return dists.index(min(dists)) + 1
    raise InvalidParameter(f"no schedule for {kind}")


def apply_amplitude(clip: AudioClip, theta) -> AudioClip:
    validate_theta(Kind.AMPLITUDE, theta)
    return clip.with_samples(clip.samples * float(theta))


def clipping_stages(clip: AudioClip, theta):
    """Return (peak-normalized, clipped, rescaled) sample arrays."""
    validate_theta(Kind.CLIPPING, theta)
    peak = np.max(np.abs(clip.samples)) if len(clip) else 0.0
    if peak == 0:
        raise SilentClip("cannot peak-normalize an all-zero clip")
    normalized = clip.samples / peak
    clipped = np.clip(normalized, -theta, theta)
    return normalized, clipped, clipped / theta


def apply_clipping(clip: AudioClip, theta) -> AudioClip:
    return clip.with_samples(clipping_stages(clip, theta)[2])


def choose_nonadjacent(n: int, k: int, rng: np.random.Generator) -> np.ndarray:
    """Uniformly sample ``k`` of ``range(n)`` with no two indices adjacent.

    Uses the bijection between such subsets and plain k-subsets of
    ``range(n - k + 1)`` (shift the i-th smallest pick by i).
    """
    if k == 0:
        return np.empty(0, dtype=np.int64)
    if k > (n + 1) // 2:
        raise InfeasibleSelection(f"cannot place {k} non-adjacent chunks among {n}")
    picks = np.sort(rng.choice(n - k + 1, size=k, replace=False))
    return picks + np.arange(k)


def _zero_chunks(clip: AudioClip, chunk_len: int, k_of_n, seed) -> AudioClip:
    n_samples = len(clip)
    n_chunks = -(-n_samples // chunk_len)
    k = k_of_n(n_chunks)
    chosen = choose_nonadjacent(n_chunks, k, np.random.default_rng(seed))
    out = clip.samples.copy()
    for idx in chosen:
        out[idx * chunk_len:(idx + 1) * chunk_len] = 0.0
    return clip.with_samples(out)


def apply_drop(clip: AudioClip, theta, seed=0) -> AudioClip:
    validate_theta(Kind.DROP, theta)
    chunk_len = max(1, round(clip.sample_rate * DROP_CHUNK_MS / 1000))
    # Fraction(str(..)) keeps 0.25 * 50 == 12.5 exact before flooring
    rate = Fraction(str(float(theta))) / 100
    return _zero_chunks(clip, chunk_len, lambda n: math.floor(rate * n), seed)


def apply_frame(clip: AudioClip, theta, seed=0) -> AudioClip:
    validate_theta(Kind.FRAME, theta)
    chunk_len = round(clip.sample_rate * float(theta) / 1000)
    if chunk_len < 1:
        raise InvalidParameter(f"{theta} ms is shorter than one sample at {clip.sample_rate} Hz")
    return _zero_chunks(clip, chunk_len, lambda n: math.floor(FRAME_DROP_FRACTION * n), seed)


def butterworth_sos(kind, cutoff, sample_rate):
    """Second-order Butterworth sections (bilinear transform, prewarped at ``cutoff``)."""
    kind = Kind.parse(kind)
    if kind not in (Kind.HIGHPASS, Kind.LOWPASS):
        raise InvalidParameter(f"{kind} is not a filter kind")
    validate_theta(kind, cutoff, sample_rate)
    btype = "highpass" if kind is Kind.HIGHPASS else "lowpass"
    return signal.butter(2, float(cutoff), btype=btype, fs=sample_rate, output="sos")


def apply_filter(clip: AudioClip, kind, theta) -> AudioClip:
    sos = butterworth_sos(kind, theta, clip.sample_rate)
    return clip.with_samples(signal.sosfilt(sos, clip.samples))


def apply_highpass(clip, theta):
    return apply_filter(clip, Kind.HIGHPASS, theta)


def apply_lowpass(clip, theta):
    return apply_filter(clip, Kind.LOWPASS, theta)


def apply_noise(clip: AudioClip, theta, seed=0) -> AudioClip:
    """Add white Gaussian noise at ``theta`` dB SNR (mean-square power ratio).

    The drawn noise is centred and rescaled so the realised SNR over the
    whole clip equals ``theta`` rather than only matching it in expectation.
    """
    validate_theta(Kind.NOISE, theta)
    x = clip.samples
    p_signal = float(np.mean(x * x)) if len(x) else 0.0
    if p_signal == 0:
        raise SilentClip("zero signal power; SNR is undefined")
    p_noise = p_signal / 10 ** (float(theta) / 10)
    noise = np.random.default_rng(seed).standard_normal(len(x))
    if len(x) > 1:
        noise -= noise.mean()
    noise *= math.sqrt(p_noise / float(np.mean(noise * noise)))
    return clip.with_samples(x + noise)


def apply_scale(clip: AudioClip, theta) -> AudioClip:
    """Slow the clip down by ``1/theta`` via polyphase resampling (pitch drops too)."""
    validate_theta(Kind.SCALE, theta)
    theta = float(theta)
    if theta == 1.0:
        return clip.with_samples(clip.samples)
    ratio = Fraction(theta).limit_denominator(1000)
    target = math.floor(len(clip) / theta + 0.5)
    out = signal.resample_poly(clip.samples, ratio.denominator, ratio.numerator)
    if out.shape[0] >= target:
        out = out[:target]
    else:
        out = np.concatenate([out, np.zeros(target - out.shape[0])])
    return clip.with_samples(out)


def apply(clip: AudioClip, t: Transformation) -> AudioClip:
    kind = t.kind
    if kind is Kind.AMPLITUDE:
        return apply_amplitude(clip, t.theta)
    if kind is Kind.CLIPPING:
        return apply_clipping(clip, t.theta)
    if kind is Kind.DROP:
        return apply_drop(clip, t.theta, t.seed)
    if kind is Kind.FRAME:
        return apply_frame(clip, t.theta, t.seed)
    if kind in (Kind.HIGHPASS, Kind.LOWPASS):
        return apply_filter(clip, kind, t.theta)
    if kind is Kind.NOISE:
        return apply_noise(clip, t.theta, t.seed)
    if kind is Kind.SCALE:
        return apply_scale(clip, t.theta)
    raise InvalidParameter(f"unhandled kind {kind}")


def schedule_transformations(schedules=DEFAULT_SCHEDULES, seed=0):
    return [t for sched in schedules for t in sched.transformations(seed)]
