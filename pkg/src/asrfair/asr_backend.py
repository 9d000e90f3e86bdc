"""ASR backends: HTTP clients for cloud services, a simulated backend, and a transcript cache.

Backends are looked up by name in a :class:`Registry`, which consults an
on-disk cache before calling the service. The cache layout is
``<root>/<asr_name>/<key>.json``.
"""

from __future__ import annotations

import base64
import hashlib
import json
import logging
import math
import os
import tempfile
import threading
import time
from dataclasses import dataclass, field

import httpx
import numpy as np

from .audio_io import AudioClip
from .errors import (
    AuthError,
    BackendError,
    BackendRejected,
    InvalidParameter,
    NetworkError,
    RateLimited,
    UnknownBackend,
)
from .text_metrics import tokenize
from .transforms import DEFAULT_SCHEDULES, Kind, SeveritySchedule, Transformation, severity_rank

log = logging.getLogger(__name__)

ORIGINAL = "original"
SENTINEL = "unk"


def descriptor_of(transformation: Transformation | None) -> str:
    return ORIGINAL if transformation is None else transformation.descriptor


@dataclass(frozen=True)
class Transcript:
    raw_text: str
    tokens: tuple
    source_asr: str
    clip_digest: str

    @classmethod
    def from_text(cls, raw_text, source_asr, clip_digest):
        return cls(raw_text, tuple(tokenize(raw_text)), source_asr, clip_digest)


def _key_from_digest(asr_name: str, clip_digest: str, descriptor: str) -> str:
    return hashlib.sha256(f"{asr_name}\0{clip_digest}\0{descriptor}".encode()).hexdigest()


def cache_key(asr_name: str, clip_bytes: bytes, descriptor: str) -> str:
    """Stable key for (backend, audio content, transformation descriptor)."""
    return _key_from_digest(asr_name, hashlib.sha256(clip_bytes).hexdigest(), descriptor)


class TranscriptCache:
    """Content-addressed JSON store; writes are atomic and serialized per key."""

    def __init__(self, root):
        self.root = os.fspath(root)
        self._locks: dict[str, threading.Lock] = {}
        self._guard = threading.Lock()

    def _path(self, asr_name, key):
        return os.path.join(self.root, asr_name, key + ".json")

    def _lock(self, key):
        with self._guard:
            return self._locks.setdefault(key, threading.Lock())

    def get(self, asr_name, key):
        try:
            with open(self._path(asr_name, key), encoding="utf-8") as fh:
                return json.load(fh)
        except FileNotFoundError:
            return None
        except json.JSONDecodeError:
            log.warning("ignoring unreadable cache record %s/%s", asr_name, key)
            return None

    def put(self, asr_name, key, record: dict):
        path = self._path(asr_name, key)
        with self._lock(key):
            os.makedirs(os.path.dirname(path), exist_ok=True)
            fd, tmp = tempfile.mkstemp(dir=os.path.dirname(path), suffix=".tmp")
            with os.fdopen(fd, "w", encoding="utf-8") as fh:
                json.dump(record, fh, sort_keys=True)
            os.replace(tmp, path)


class Backend:
    """Base class. Subclasses implement :meth:`recognize`."""

    name: str
    max_concurrency: int = 4

    def recognize(self, clip: AudioClip, transformation: Transformation | None) -> str:
        raise NotImplementedError


# --- simulated backend -------------------------------------------------------

_FILLER_WORDS = (
    "the brother is nice and the sister likes fresh bread while people talk "
    "about plastic straws near the big river every morning"
).split()


@dataclass
class MockAsrSpec:
    """Deterministic word-corruption model.

    ``base_error_rate`` applies to every clip; ``noise_sensitivity[kind]``
    is added once per severity rank of the applied transformation and is
    multiplied by ``group_scale[group]`` (default 1). A fraction ``p`` of a
    clip's words becomes exactly ``round(p * n)`` substitutions with
    :data:`SENTINEL`, which keeps planted distances computable by hand.
    Words in ``vocabulary_weakness`` are deleted once the rank reaches
    ``weakness_rank``, except in clips listed in ``robust_clips``.
    """

    base_error_rate: float = 0.0
    noise_sensitivity: dict = field(default_factory=dict)
    vocabulary_weakness: frozenset = frozenset()
    weakness_rank: int = 1
    weakness_kinds: frozenset | None = None
    robust_clips: frozenset = frozenset()
    group_scale: dict = field(default_factory=dict)
    seed: int = 0
    schedules: tuple = DEFAULT_SCHEDULES

    def __post_init__(self):
        self.noise_sensitivity = {Kind.parse(k): float(v) for k, v in self.noise_sensitivity.items()}
        self.vocabulary_weakness = frozenset(w.lower() for w in self.vocabulary_weakness)
        if self.weakness_kinds is not None:
            self.weakness_kinds = frozenset(Kind.parse(k) for k in self.weakness_kinds)
        probs = [self.base_error_rate, *self.noise_sensitivity.values()]
        if any(not 0 <= p <= 1 for p in probs):
            raise InvalidParameter("mock probabilities must lie in [0, 1]")

    @classmethod
    def from_dict(cls, d: dict) -> "MockAsrSpec":
        d = dict(d)
        if "vocabulary_weakness" in d:
            d["vocabulary_weakness"] = frozenset(d["vocabulary_weakness"])
        if "robust_clips" in d:
            d["robust_clips"] = frozenset(d["robust_clips"])
        if d.get("weakness_kinds") is not None:
            d["weakness_kinds"] = frozenset(d["weakness_kinds"])
        if "schedules" in d:
            d["schedules"] = tuple(SeveritySchedule(k, v) for k, v in d["schedules"].items())
        return cls(**d)

    def to_dict(self) -> dict:
        return {
            "base_error_rate": self.base_error_rate,
            "noise_sensitivity": {k.value: v for k, v in sorted(self.noise_sensitivity.items())},
            "vocabulary_weakness": sorted(self.vocabulary_weakness),
            "weakness_rank": self.weakness_rank,
            "weakness_kinds": None if self.weakness_kinds is None else sorted(k.value for k in self.weakness_kinds),
            "robust_clips": sorted(self.robust_clips),
            "group_scale": dict(sorted(self.group_scale.items())),
            "seed": self.seed,
        }


class MockBackend(Backend):
    """Corrupts a known reference text; a pure function of (spec, clip digest, transformation)."""

    def __init__(self, name, spec: MockAsrSpec | None = None, references=None, groups=None,
                 max_concurrency=8):
        self.name = name
        self.spec = spec or MockAsrSpec()
        self.references = dict(references or {})
        self.groups = dict(groups or {})
        self.max_concurrency = max_concurrency

    def reference_for(self, clip_id: str) -> str:
        if clip_id in self.references:
            return self.references[clip_id]
        # stand-in text when the manifest carries none
        h = int.from_bytes(hashlib.sha256(clip_id.encode()).digest()[:8], "little")
        rng = np.random.default_rng(h)
        return " ".join(rng.choice(_FILLER_WORDS, size=12))

    def _rng(self, clip, descriptor):
        h = hashlib.sha256(f"{self.spec.seed}\0{self.name}\0{clip.digest}\0{descriptor}".encode()).digest()
        return np.random.default_rng(int.from_bytes(h[:8], "little"))

    def recognize(self, clip, transformation=None):
        spec = self.spec
        text = self.reference_for(clip.clip_id)
        rank = 0
        kind = None
        if transformation is not None:
            kind = transformation.kind
            rank = severity_rank(kind, transformation.theta, spec.schedules)
        scale = float(spec.group_scale.get(self.groups.get(clip.clip_id), 1.0))
        p = spec.base_error_rate + scale * spec.noise_sensitivity.get(kind, 0.0) * rank
        p = min(max(p, 0.0), 1.0)
        weak_active = (
            rank >= spec.weakness_rank
            and rank > 0
            and (spec.weakness_kinds is None or kind in spec.weakness_kinds)
            and clip.clip_id not in spec.robust_clips
        )
        if p == 0 and not (weak_active and spec.vocabulary_weakness):
            return text

        words = tokenize(text)
        if weak_active:
            words = [w for w in words if w not in spec.vocabulary_weakness]
        n_bad = min(len(words), math.floor(p * len(words) + 0.5 + 1e-9))
        if n_bad:
            for i in self._rng(clip, descriptor_of(transformation)).choice(len(words), n_bad, replace=False):
                words[i] = SENTINEL
        return " ".join(words)


# --- HTTP backends -----------------------------------------------------------

@dataclass
class BackendConfig:
    name: str
    type: str = "http"
    flavor: str = "generic"
    endpoint: str = ""
    credential_env: str = ""
    model: str = ""
    language: str = "en-US"
    max_concurrency: int = 4
    retry_budget: int = 4
    backoff_base: float = 0.5
    timeout: float = 60.0
    mock: dict = field(default_factory=dict)

    def __post_init__(self):
        if not self.name:
            raise InvalidParameter("backend name must be non-empty")


def _join_alternatives(payload) -> str:
    parts = []
    for result in payload.get("results", []):
        alts = result.get("alternatives") or []
        if alts:
            parts.append(alts[0].get("transcript", "").strip())
    return " ".join(p for p in parts if p)


class HttpBackend(Backend):
    """Submits Linear16 WAV audio over HTTP and reads back the top hypothesis.

    ``flavor`` selects the request/response shape: ``gcp``, ``azure``,
    ``ibm`` or ``generic`` (raw WAV in, ``{"text": ...}`` out).
    """

    def __init__(self, config: BackendConfig, client: httpx.Client | None = None, sleep=time.sleep):
        self.config = config
        self.name = config.name
        self.max_concurrency = config.max_concurrency
        self._client = client
        self._sleep = sleep

    @property
    def client(self):
        if self._client is None:
            self._client = httpx.Client(timeout=self.config.timeout)
        return self._client

    def _credential(self):
        env = self.config.credential_env
        value = os.environ.get(env) if env else None
        if not value:
            raise AuthError(f"{self.name}: credential variable {env or '<unset>'} is empty")
        return value

    def _build_request(self, clip: AudioClip):
        cfg = self.config
        key = self._credential()
        wav = clip.to_wav_bytes()
        flavor = cfg.flavor.lower()
        if flavor == "gcp":
            body = {
                "config": {"encoding": "LINEAR16", "sampleRateHertz": clip.sample_rate,
                           "languageCode": cfg.language},
                "audio": {"content": base64.b64encode(wav).decode("ascii")},
            }
            if cfg.model:
                body["config"]["model"] = cfg.model
            return dict(method="POST", url=cfg.endpoint, params={"key": key}, json=body)
        if flavor == "azure":
            headers = {
                "Ocp-Apim-Subscription-Key": key,
                "Content-Type": f"audio/wav; codecs=audio/pcm; samplerate={clip.sample_rate}",
                "Accept": "application/json",
            }
            params = {"language": cfg.language}
            if cfg.model:
                params["cid"] = cfg.model
            return dict(method="POST", url=cfg.endpoint, params=params, headers=headers, content=wav)
        if flavor == "ibm":
            params = {"model": cfg.model} if cfg.model else {}
            return dict(method="POST", url=cfg.endpoint, params=params, content=wav,
                        headers={"Content-Type": "audio/wav"}, auth=("apikey", key))
        if flavor == "generic":
            params = {"model": cfg.model} if cfg.model else {}
            return dict(method="POST", url=cfg.endpoint, params=params, content=wav,
                        headers={"Content-Type": "audio/wav", "Authorization": f"Bearer {key}"})
        raise InvalidParameter(f"unknown backend flavor {cfg.flavor!r}")

    def _parse(self, payload) -> str:
        flavor = self.config.flavor.lower()
        if flavor == "azure":
            status = payload.get("RecognitionStatus", "Success")
            if status not in ("Success", "NoMatch", "InitialSilenceTimeout"):
                raise BackendRejected(f"{self.name}: recognition status {status}")
            return payload.get("DisplayText", "")
        if flavor == "generic":
            return payload.get("text", "")
        return _join_alternatives(payload)

    def recognize(self, clip, transformation=None):
        request = self._build_request(clip)
        budget = max(1, self.config.retry_budget)
        last = None
        for attempt in range(budget):
            if attempt:
                self._sleep(self.config.backoff_base * 2 ** (attempt - 1))
            try:
                resp = self.client.request(**request)
            except httpx.TransportError as exc:
                last = NetworkError(f"{self.name}: {exc}")
                continue
            status = resp.status_code
            if status in (401, 403):
                raise AuthError(f"{self.name}: HTTP {status}")
            if status == 429:
                last = RateLimited(f"{self.name}: rate limited after {attempt + 1} attempt(s)")
                continue
            if status >= 500:
                last = NetworkError(f"{self.name}: HTTP {status}")
                continue
            if status >= 400:
                raise BackendRejected(f"{self.name}: HTTP {status}: {resp.text[:200]}")
            try:
                payload = resp.json()
            except ValueError as exc:
                raise BackendRejected(f"{self.name}: response is not JSON") from exc
            return self._parse(payload)
        raise last


# --- registry ----------------------------------------------------------------

class Registry:
    """Named backends plus the shared transcript cache and concurrency limits."""

    def __init__(self, backends=(), cache: TranscriptCache | None = None):
        self._backends: dict[str, Backend] = {}
        self._sems: dict[str, threading.BoundedSemaphore] = {}
        self.cache = cache
        for b in backends:
            self.register(b)

    def register(self, backend: Backend):
        if backend.name in self._backends:
            raise InvalidParameter(f"duplicate backend name {backend.name!r}")
        self._backends[backend.name] = backend
        self._sems[backend.name] = threading.BoundedSemaphore(max(1, backend.max_concurrency))

    def __contains__(self, name):
        return name in self._backends

    def __getitem__(self, name) -> Backend:
        try:
            return self._backends[name]
        except KeyError:
            raise UnknownBackend(name) from None

    @property
    def names(self):
        return list(self._backends)

    def transcribe(self, asr: str, clip: AudioClip, transformation: Transformation | None = None) -> Transcript:
        backend = self[asr]
        descriptor = descriptor_of(transformation)
        key = _key_from_digest(asr, clip.digest, descriptor)
        if self.cache is not None:
            hit = self.cache.get(asr, key)
            if hit is not None:
                return Transcript.from_text(hit["raw_text"], asr, clip.digest)
        with self._sems[asr]:
            raw = backend.recognize(clip, transformation)
        if self.cache is not None:
            self.cache.put(asr, key, {
                "asr": asr, "clip_id": clip.clip_id, "clip_digest": clip.digest,
                "transformation": descriptor, "raw_text": raw,
            })
        return Transcript.from_text(raw, asr, clip.digest)


def load_backend_config(path):
    """Parse a backend config JSON file.

    ``{"backends": [{...BackendConfig fields...}], "pairs": [["a", "b"], ...]}``;
    pairs default to every combination in file order.
    """
    with open(path, encoding="utf-8") as fh:
        doc = json.load(fh)
    try:
        configs = [BackendConfig(**b) for b in doc["backends"]]
    except (KeyError, TypeError) as exc:
        raise InvalidParameter(f"{path}: malformed backend config: {exc}") from exc
    names = [c.name for c in configs]
    if len(set(names)) != len(names):
        raise InvalidParameter(f"{path}: duplicate backend names")
    pairs = doc.get("pairs")
    if pairs is None:
        pairs = [(a, b) for i, a in enumerate(names) for b in names[i + 1:]]
    pairs = [tuple(p) for p in pairs]
    for a, b in pairs:
        if a not in names or b not in names:
            raise InvalidParameter(f"{path}: pair ({a}, {b}) names an unknown backend")
    return configs, pairs


def build_backend(config: BackendConfig, references=None, groups=None) -> Backend:
    if config.type == "mock":
        return MockBackend(config.name, MockAsrSpec.from_dict(config.mock), references, groups,
                           max_concurrency=config.max_concurrency)
    if config.type == "http":
        return HttpBackend(config)
    raise InvalidParameter(f"unknown backend type {config.type!r}")


def default_mock_configs():
    """A perfect reference ASR and a noise-sensitive one, used by ``--mock`` without ``--backends``."""
    return [
        BackendConfig("mock-a", type="mock", mock={}),
        BackendConfig("mock-b", type="mock", mock={
            "base_error_rate": 0.05,
            "noise_sensitivity": {k.value: 0.03 for k in Kind},
        }),
    ], [("mock-a", "mock-b")]


__all__ = [
    "AuthError", "BackendError", "BackendRejected", "NetworkError", "RateLimited",
    "Backend", "BackendConfig", "HttpBackend", "MockAsrSpec", "MockBackend", "Registry",
    "Transcript", "TranscriptCache", "build_backend", "cache_key", "default_mock_configs",
    "descriptor_of", "load_backend_config",
]
