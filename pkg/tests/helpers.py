import csv
import json

import numpy as np

from asrfair.asr_backend import MockAsrSpec, MockBackend, Registry
from asrfair.audio_io import AudioClip, synth_sine, write_wav
from asrfair.corpus import DatasetManifest, ManifestEntry

TEN_WORDS = "one two three four five six seven eight nine ten"


def sine_clip(clip_id, freq=440.0, duration=0.5, sr=16000):
    return synth_sine(0.5, freq, 0.0, duration, sr, clip_id)


def make_manifest(groups, text=TEN_WORDS):
    """groups: {group: n_clips}. Clip ids are '<group>-<i>'."""
    entries = []
    for g, n in groups.items():
        for i in range(n):
            entries.append(ManifestEntry(f"{g}-{i}.wav", f"{g}-{i}", g, f"spk-{g}-{i}", text))
    return DatasetManifest(entries)


def memory_loader(entry):
    # distinct audio per clip so digests differ
    freq = 200 + (sum(map(ord, entry.clip_id)) % 50) * 20
    return sine_clip(entry.clip_id, freq)


def mock_registry(manifest, specs, cache=None):
    return Registry(
        [MockBackend(name, spec, manifest.references, manifest.group_of) for name, spec in specs.items()],
        cache,
    )



def write_corpus(root, groups, texts=None, duration=0.5):
    """Write WAVs and a CSV manifest under ``root``; return the manifest path."""
    rows = []
    for g, n in groups.items():
        for i in range(n):
            cid = f"{g}-{i}"
            clip = sine_clip(cid, 300 + 40 * len(rows), duration)
            write_wav(clip, root / f"{cid}.wav")
            text = (texts or {}).get(cid, TEN_WORDS)
            rows.append({"clip_path": f"{cid}.wav", "clip_id": cid, "group": g,
                         "speaker_id": f"s{len(rows)}", "text": text})
    path = root / "manifest.csv"
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=list(rows[0]))
        w.writeheader()
        w.writerows(rows)
    return path


def write_backends(path, backends, pairs=None):
    doc = {"backends": backends}
    if pairs is not None:
        doc["pairs"] = pairs
    path.write_text(json.dumps(doc))
    return path
