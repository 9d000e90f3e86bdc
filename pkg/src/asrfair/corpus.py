"""Dataset manifests and bulk transcription of (clip x transformation x backend) grids."""

from __future__ import annotations

import csv
import json
import logging
import os
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

from .asr_backend import Registry, descriptor_of
from .audio_io import AudioClip, read_wav
from .errors import AsrFairError, ManifestError
from .transforms import apply

log = logging.getLogger(__name__)

MANIFEST_FIELDS = ("clip_path", "clip_id", "group", "speaker_id")


@dataclass(frozen=True)
class ManifestEntry:
    clip_path: str
    clip_id: str
    group: str
    speaker_id: str
    text: str | None = None


class DatasetManifest:
    def __init__(self, entries):
        self.entries = list(entries)
        seen = set()
        for e in self.entries:
            if e.clip_id in seen:
                raise ManifestError(f"duplicate clip_id {e.clip_id!r}")
            seen.add(e.clip_id)
        self._by_id = {e.clip_id: e for e in self.entries}

    @property
    def groups(self):
        return sorted({e.group for e in self.entries})

    def by_group(self, group):
        return [e for e in self.entries if e.group == group]

    def __getitem__(self, clip_id) -> ManifestEntry:
        return self._by_id[clip_id]

    def __len__(self):
        return len(self.entries)

    @property
    def references(self):
        return {e.clip_id: e.text for e in self.entries if e.text is not None}

    @property
    def group_of(self):
        return {e.clip_id: e.group for e in self.entries}

    def summary(self):
        """Per-group clip and distinct-speaker counts."""
        return {
            g: {"clips": len(self.by_group(g)), "speakers": len({e.speaker_id for e in self.by_group(g)})}
            for g in self.groups
        }


def _entry_from_row(row, base_dir, where):
    missing = [f for f in MANIFEST_FIELDS if not str(row.get(f) or "").strip()]
    if missing:
        raise ManifestError(f"{where}: missing {', '.join(missing)}")
    path = str(row["clip_path"])
    if not os.path.isabs(path):
        path = os.path.normpath(os.path.join(base_dir, path))
    text = row.get("text")
    return ManifestEntry(path, str(row["clip_id"]), str(row["group"]), str(row["speaker_id"]),
                         None if text in (None, "") else str(text))


def load_manifest(path) -> DatasetManifest:
    """Load a CSV (header row) or JSON-lines manifest; relative clip paths resolve against its directory.

    An optional ``text`` column supplies the reference text used by simulated backends.
    """
    path = os.fspath(path)
    base_dir = os.path.dirname(os.path.abspath(path))
    entries = []
    with open(path, encoding="utf-8", newline="") as fh:
        if path.endswith((".jsonl", ".ndjson", ".json")):
            for lineno, line in enumerate(fh, 1):
                if not line.strip():
                    continue
                try:
                    row = json.loads(line)
                except json.JSONDecodeError as exc:
                    raise ManifestError(f"{path}:{lineno}: {exc}") from exc
                entries.append(_entry_from_row(row, base_dir, f"{path}:{lineno}"))
        else:
            for lineno, row in enumerate(csv.DictReader(fh), 2):
                entries.append(_entry_from_row(row, base_dir, f"{path}:{lineno}"))
    if not entries:
        raise ManifestError(f"{path}: manifest is empty")
    return DatasetManifest(entries)


class TranscriptStore:
    """Transcribes every requested (asr, clip, transformation) cell, in parallel.

    ``fetch`` returns a dict keyed by ``(asr, clip_id, descriptor)`` whose
    values are token tuples, or an error string for cells that failed.
    Results do not depend on ``jobs``.
    """

    def __init__(self, manifest: DatasetManifest, registry: Registry, jobs: int = 1, loader=None):
        self.manifest = manifest
        self.registry = registry
        self.jobs = max(1, int(jobs))
        self._loader = loader or (lambda entry: read_wav(entry.clip_path, entry.clip_id))
        self._clips: dict[str, AudioClip | Exception] = {}
        self._lock = threading.Lock()

    def clip(self, clip_id) -> AudioClip:
        with self._lock:
            hit = self._clips.get(clip_id)
        if hit is None:
            try:
                hit = self._loader(self.manifest[clip_id])
            except (AsrFairError, OSError) as exc:
                hit = exc
            with self._lock:
                self._clips.setdefault(clip_id, hit)
        if isinstance(hit, Exception):
            raise hit
        return hit

    def _run_cell(self, clip_id, transformation, asrs):
        out = {}
        desc = descriptor_of(transformation)
        try:
            clip = self.clip(clip_id)
            if transformation is not None:
                clip = apply(clip, transformation)
        except (AsrFairError, OSError) as exc:
            msg = f"{type(exc).__name__}: {exc}"
            return {(a, clip_id, desc): msg for a in asrs}
        for asr in asrs:
            try:
                out[(asr, clip_id, desc)] = self.registry.transcribe(asr, clip, transformation).tokens
            except (AsrFairError, OSError) as exc:
                log.warning("transcription failed for %s/%s/%s: %s", asr, clip_id, desc, exc)
                out[(asr, clip_id, desc)] = f"{type(exc).__name__}: {exc}"
        return out

    def fetch(self, clip_ids, transformations, asrs) -> dict:
        asrs = sorted(set(asrs))
        cells = [(c, t) for c in clip_ids for t in transformations]
        results = {}
        if self.jobs == 1:
            for c, t in cells:
                results.update(self._run_cell(c, t, asrs))
        else:
            with ThreadPoolExecutor(max_workers=self.jobs) as pool:
                for part in pool.map(lambda ct: self._run_cell(ct[0], ct[1], asrs), cells):
                    results.update(part)
        return results
