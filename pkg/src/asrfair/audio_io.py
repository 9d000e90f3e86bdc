"""16-bit PCM WAV decoding/encoding and reference test signals.

Samples are held as float64 in nominal range [-1, 1]. Decoding divides the
PCM integer by 32768; encoding multiplies by 32768, rounds half away from
zero and clamps to the int16 range, so +1.0 lands on 32767 and a decoded
buffer re-encodes to the exact same PCM values.
"""

from __future__ import annotations

import hashlib
import os
import struct
from dataclasses import dataclass, field

import numpy as np

from .errors import CorruptContainer, InvalidParameter, UnsupportedFormat

PCM_SCALE = 32768.0
_WAVE_FORMAT_PCM = 1
_WAVE_FORMAT_EXTENSIBLE = 0xFFFE


@dataclass(frozen=True, eq=False)
class AudioClip:
    """Mono sample buffer plus its sample rate.

    ``samples`` is stored as a read-only float64 array. Values may exceed
    [-1, 1] in memory (e.g. after amplitude gain 2.0); they are clamped
    only when encoded.
    """

    samples: np.ndarray
    sample_rate: int
    clip_id: str = ""
    _digest: list = field(default_factory=list, repr=False, compare=False)

    def __post_init__(self):
        arr = np.array(self.samples, dtype=np.float64, copy=True).reshape(-1)
        if not np.all(np.isfinite(arr)):
            raise InvalidParameter("samples must be finite")
        arr.setflags(write=False)
        object.__setattr__(self, "samples", arr)
        if int(self.sample_rate) != self.sample_rate or self.sample_rate <= 0:
            raise InvalidParameter(f"sample_rate must be a positive integer, got {self.sample_rate!r}")
        object.__setattr__(self, "sample_rate", int(self.sample_rate))

    def __len__(self):
        return self.samples.shape[0]

    @property
    def duration(self) -> float:
        return len(self) / self.sample_rate

    def with_samples(self, samples) -> "AudioClip":
        return AudioClip(samples, self.sample_rate, self.clip_id)

    def to_wav_bytes(self) -> bytes:
        return encode_wav(self)

    @property
    def digest(self) -> str:
        """sha256 of the canonical WAV encoding."""
        if not self._digest:
            self._digest.append(hashlib.sha256(self.to_wav_bytes()).hexdigest())
        return self._digest[0]


def quantize(samples) -> np.ndarray:
    """Map float samples to int16 PCM values."""
    x = np.asarray(samples, dtype=np.float64) * PCM_SCALE
    q = np.sign(x) * np.floor(np.abs(x) + 0.5)
    return np.clip(q, -32768, 32767).astype("<i2")


def dequantize(pcm) -> np.ndarray:
    return np.asarray(pcm, dtype=np.float64) / PCM_SCALE


def encode_wav(clip: AudioClip) -> bytes:
    data = quantize(clip.samples).tobytes()
    header = struct.pack(
        "<4sI4s4sIHHIIHH4sI",
        b"RIFF", 36 + len(data), b"WAVE",
        b"fmt ", 16, _WAVE_FORMAT_PCM, 1, clip.sample_rate,
        clip.sample_rate * 2, 2, 16,
        b"data", len(data),
    )
    return header + data


def decode_wav(blob: bytes, clip_id: str = "") -> AudioClip:
    """Parse a RIFF/WAVE byte string holding 16-bit PCM."""
    if len(blob) < 12 or blob[:4] != b"RIFF" or blob[8:12] != b"WAVE":
        raise CorruptContainer("not a RIFF/WAVE container")
    riff_size = struct.unpack_from("<I", blob, 4)[0]
    if riff_size + 8 > len(blob):
        raise CorruptContainer(f"RIFF size {riff_size} exceeds file length {len(blob)}")
    end = riff_size + 8

    fmt = None
    data = None
    pos = 12
    while pos + 8 <= end:
        ckid, cksize = struct.unpack_from("<4sI", blob, pos)
        body = pos + 8
        if body + cksize > end:
            raise CorruptContainer(f"chunk {ckid!r} overruns container")
        if ckid == b"fmt ":
            if cksize < 16:
                raise CorruptContainer("fmt chunk too short")
            fmt = struct.unpack_from("<HHIIHH", blob, body)
            if fmt[0] == _WAVE_FORMAT_EXTENSIBLE:
                if cksize < 40:
                    raise CorruptContainer("extensible fmt chunk too short")
                sub = struct.unpack_from("<H", blob, body + 24)[0]
                fmt = (sub,) + fmt[1:]
        elif ckid == b"data":
            data = blob[body:body + cksize]
        pos = body + cksize + (cksize & 1)

    if fmt is None or data is None:
        raise CorruptContainer("missing fmt or data chunk")
    audio_format, channels, rate, _, block_align, bits = fmt
    if audio_format != _WAVE_FORMAT_PCM:
        raise UnsupportedFormat(f"audio format {audio_format} is not PCM")
    if bits != 16:
        raise UnsupportedFormat(f"{bits}-bit samples are not supported")
    if channels < 1 or rate < 1 or block_align != 2 * channels:
        raise CorruptContainer("inconsistent fmt chunk")
    if len(data) % block_align:
        raise CorruptContainer("data chunk holds a partial frame")
    if not data:
        raise CorruptContainer("empty data chunk")

    pcm = np.frombuffer(data, dtype="<i2").reshape(-1, channels)
    samples = dequantize(pcm).mean(axis=1) if channels > 1 else dequantize(pcm[:, 0])
    return AudioClip(samples, rate, clip_id)


def read_wav(path, clip_id: str | None = None) -> AudioClip:
    """Read a 16-bit PCM WAV file; multi-channel input is averaged to mono."""
    with open(path, "rb") as fh:
        blob = fh.read()
    if clip_id is None:
        clip_id = os.path.splitext(os.path.basename(os.fspath(path)))[0]
    return decode_wav(blob, clip_id)


def write_wav(clip: AudioClip, path) -> None:
    with open(path, "wb") as fh:
        fh.write(encode_wav(clip))


def synth_sine(amplitude, freq, phase=0.0, duration=1.0, sample_rate=16000, clip_id="sine"):
    """``amplitude * sin(2*pi*freq*n/sample_rate + phase)`` sampled for ``duration`` seconds."""
    if not 0 <= amplitude <= 1:
        raise InvalidParameter("amplitude must lie in [0, 1]")
    if not 0 < freq < sample_rate / 2:
        raise InvalidParameter(f"frequency {freq} violates Nyquist for {sample_rate} Hz")
    if duration <= 0:
        raise InvalidParameter("duration must be positive")
    n = np.arange(int(round(duration * sample_rate)))
    if n.size == 0:
        raise InvalidParameter("duration shorter than one sample")
    return AudioClip(amplitude * np.sin(2 * np.pi * freq * n / sample_rate + phase), sample_rate, clip_id)

