"""Word-level fault localization: which words stop being recognized under a transformation."""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field

from .asr_backend import Registry, descriptor_of
from .corpus import DatasetManifest, TranscriptStore
from .errors import AsrFairError, InvalidParameter
from .text_metrics import word_counts
from .transforms import Kind, Transformation, apply

# omega thresholds per backend used for picking non-robust words in the
# validation experiment (GCP, Azure, IBM)
VALIDATION_OMEGAS = {"gcp": 3, "azure": 3, "ibm": 2}
DEFAULT_NOISE_SWEEP = (10, 8, 6, 4, 2)


@dataclass(frozen=True)
class LocalizerConfig:
    omega: float
    transformation_kind: Kind
    thetas: tuple

    def __post_init__(self):
        object.__setattr__(self, "transformation_kind", Kind.parse(self.transformation_kind))
        object.__setattr__(self, "thetas", tuple(float(t) for t in self.thetas))
        check_omega(self.omega)
        if not self.thetas:
            raise InvalidParameter("thetas must be non-empty")


def check_omega(omega):
    if omega != math.inf and (omega < 0 or int(omega) != omega):
        raise InvalidParameter(f"omega must be a non-negative integer or inf, got {omega!r}")


@dataclass
class FaultReport:
    group: str
    asr: str
    transformation_kind: str
    non_robust_words: set = field(default_factory=set)
    drop_counts: dict = field(default_factory=dict)
    omega: float = 0
    thetas: tuple = ()

    @property
    def average_word_drop(self) -> float:
        # zero-diff words stay in the denominator
        return sum(self.drop_counts.values()) / len(self.drop_counts) if self.drop_counts else 0.0

    def to_dict(self):
        return {
            "group": self.group,
            "asr": self.asr,
            "transformation_kind": self.transformation_kind,
            "omega": "inf" if self.omega == math.inf else self.omega,
            "thetas": list(self.thetas),
            "non_robust_words": sorted(self.non_robust_words),
            "drop_counts": dict(sorted(self.drop_counts.items())),
            "average_word_drop": self.average_word_drop,
        }


def localize(wc_original, wc_per_theta, omega):
    """Return ``(non_robust_words, drop_counts)``.

    For each word of the original transcripts the worst count over all
    thetas is compared with the original count; the clamped drop is
    recorded and the word is non-robust when the drop exceeds ``omega``.
    Words that only show up in transformed transcripts are ignored.
    """
    if not wc_per_theta:
        raise InvalidParameter("need word counts for at least one theta")
    check_omega(omega)
    non_robust = set()
    drops = {}
    for word, init_count in wc_original.items():
        min_count = min(wc.get(word, 0) for wc in wc_per_theta.values())
        diff = max(init_count - min_count, 0)
        if diff > omega:
            non_robust.add(word)
        drops[word] = diff
    return non_robust, drops


def _pooled_counts(results, asr, clip_ids, desc):
    counts = Counter()
    for cid in clip_ids:
        tokens = results[(asr, cid, desc)]
        if isinstance(tokens, str):
            raise AsrFairError(f"transcription failed for {cid} ({desc}): {tokens}")
        counts.update(tokens)
    return counts


def localize_group(clips, asr, kind, thetas, omega, registry: Registry, seed=0, group="") -> FaultReport:
    """Run the localizer for in-memory ``clips`` of one group against one backend."""
    kind = Kind.parse(kind)
    wc = word_counts([w for c in clips for w in registry.transcribe(asr, c).tokens])
    per_theta = {}
    for theta in thetas:
        t = Transformation(kind, theta, seed)
        per_theta[theta] = word_counts(
            [w for c in clips for w in registry.transcribe(asr, apply(c, t), t).tokens]
        )
    words, drops = localize(wc, per_theta, omega)
    return FaultReport(group, asr, kind.value, words, drops, omega, tuple(float(t) for t in thetas))


def localize_grid(manifest: DatasetManifest, registry: Registry, groups, asrs, kinds, thetas_for,
                  omega_for, seed=0, jobs=1, loader=None):
    """FaultReports for every (group, asr, kind) combination.

    ``thetas_for(kind)`` gives the severity sweep; ``omega_for(asr)`` the threshold.
    Returns ``(reports, failures)`` where failures maps cells to error text.
    """
    kinds = [Kind.parse(k) for k in kinds]
    transformations = {k: [Transformation(k, t, seed) for t in thetas_for(k)] for k in kinds}
    clip_ids = {g: [e.clip_id for e in manifest.by_group(g)] for g in groups}
    store = TranscriptStore(manifest, registry, jobs=jobs, loader=loader)
    results = store.fetch(
        [c for g in groups for c in clip_ids[g]],
        [None, *(t for ts in transformations.values() for t in ts)],
        asrs,
    )
    reports, failures = [], {}
    for g in groups:
        for asr in asrs:
            for k in kinds:
                try:
                    wc = _pooled_counts(results, asr, clip_ids[g], descriptor_of(None))
                    per_theta = {
                        t.theta: _pooled_counts(results, asr, clip_ids[g], t.descriptor)
                        for t in transformations[k]
                    }
                except AsrFairError as exc:
                    failures[(g, asr, k.value)] = str(exc)
                    continue
                omega = omega_for(asr)
                words, drops = localize(wc, per_theta, omega)
                reports.append(FaultReport(g, asr, k.value, words, drops, omega,
                                           tuple(t.theta for t in transformations[k])))
    return reports, failures


def word_drop_table(reports):
    """Average word drops arranged by (group, asr) and by (group, kind).

    Each cell is the mean of the matching reports' ``average_word_drop``.
    """
    by_asr, by_kind = {}, {}
    for r in reports:
        by_asr.setdefault((r.group, r.asr), []).append(r.average_word_drop)
        by_kind.setdefault((r.group, r.transformation_kind), []).append(r.average_word_drop)
    mean = lambda xs: sum(xs) / len(xs)
    return {
        "asr": {k: mean(v) for k, v in sorted(by_asr.items())},
        "kind": {k: mean(v) for k, v in sorted(by_kind.items())},
    }


def word_drop_rows(table):
    """CSV rows: section, key, then one column per group."""
    groups = sorted({g for g, _ in table["asr"]} | {g for g, _ in table["kind"]})
    rows = [["section", "key", *groups]]
    for section in ("asr", "kind"):
        keys = sorted({k for _, k in table[section]})
        for key in keys:
            rows.append([section, key, *[
                "" if (g, key) not in table[section] else f"{table[section][(g, key)]:.4f}" for g in groups
            ]])
    return rows
