"""Differential fairness testing across speaker groups.

For every transformation T, comparison group k and backend pair (A1, A2)
the degradation of a group is

    D = mean_dist(A1(T(G)), A2(T(G))) - mean_dist(A1(G), A2(G))

and the base group is charged with a violation when ``D_base - D_k > tau``.
Distances are kept as exact fractions so the strict threshold is decided
without floating-point noise; floats only appear in records and reports.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import asdict, dataclass, field
from fractions import Fraction

from .asr_backend import Registry, descriptor_of
from .corpus import DatasetManifest, TranscriptStore
from .errors import AllClipsDegenerate, BothEmpty, ManifestError, UnknownBackend
from .text_metrics import normalized_distance_exact
from .transforms import DEFAULT_SCHEDULES, Kind, Transformation, apply, format_theta

DEFAULT_TAU_SWEEP = (0.01, 0.05, 0.10, 0.15)


def default_exclusions(schedules=DEFAULT_SCHEDULES, n=2):
    """The ``n`` most destructive Scale settings."""
    for sched in schedules:
        if sched.kind is Kind.SCALE:
            return frozenset((Kind.SCALE, t) for t in sched.thetas[-n:])
    return frozenset()


@dataclass
class FairnessConfig:
    tau: float = 0.1
    tau_sweep: tuple = DEFAULT_TAU_SWEEP
    asr_pairs: tuple = ()
    schedules: tuple = DEFAULT_SCHEDULES
    exclusions: frozenset | None = None
    seed: int = 0

    def __post_init__(self):
        if self.tau < 0 or any(t < 0 for t in self.tau_sweep):
            raise ValueError("tau must be non-negative")
        self.tau_sweep = tuple(float(t) for t in self.tau_sweep)
        self.asr_pairs = tuple(tuple(p) for p in self.asr_pairs)
        if self.exclusions is None:
            self.exclusions = default_exclusions(self.schedules)
        else:
            self.exclusions = frozenset((Kind.parse(k), float(t)) for k, t in self.exclusions)

    @property
    def taus(self):
        return tuple(sorted(set(self.tau_sweep) | {float(self.tau)}))

    def transformations(self):
        return [
            Transformation(s.kind, t, self.seed)
            for s in self.schedules for t in s.thetas
            if (s.kind, t) not in self.exclusions
        ]

    def to_dict(self):
        return {
            "tau": self.tau,
            "tau_sweep": list(self.tau_sweep),
            "asr_pairs": [list(p) for p in self.asr_pairs],
            "schedules": {s.kind.value: list(s.thetas) for s in self.schedules},
            "exclusions": sorted([k.value, t] for k, t in self.exclusions),
            "seed": self.seed,
        }


@dataclass(frozen=True)
class DegradationRecord:
    group: str
    kind: str
    theta: float
    asr_pair: tuple
    d_plain: float
    d_transformed: float
    D: float
    skipped_plain: int = 0
    skipped_transformed: int = 0


@dataclass(frozen=True)
class FairnessViolation:
    base_group: str
    comparison_group: str
    kind: str
    theta: float
    asr_pair: tuple
    D_base: float
    D_comp: float
    tau: float


@dataclass(frozen=True)
class Hole:
    """A grid cell that could not be evaluated."""

    group: str
    kind: str | None
    theta: float | None
    asr_pair: tuple
    reason: str


@dataclass
class FairnessResult:
    base_group: str
    comparison_groups: list
    config: FairnessConfig
    records: list = field(default_factory=list)
    violations: list = field(default_factory=list)
    holes: list = field(default_factory=list)

    def error_set(self, tau=None):
        tau = self.config.tau if tau is None else float(tau)
        return [v for v in self.violations if v.tau == tau]


def mean_normalized_distance(token_pairs):
    """Mean per-clip normalized distance as a Fraction, plus the count of skipped both-empty pairs."""
    total = Fraction(0)
    used = skipped = 0
    for a, b in token_pairs:
        try:
            total += normalized_distance_exact(a, b)
        except BothEmpty:
            skipped += 1
            continue
        used += 1
    if not used:
        raise AllClipsDegenerate(f"all {skipped} clip(s) produced two empty transcripts")
    return total / used, skipped


def group_distance(clips, asr_pair, registry: Registry, transformation: Transformation | None = None):
    """Average normalized word distance between two backends over ``clips``.

    When ``transformation`` is given each clip is transformed first.
    """
    a1, a2 = asr_pair
    pairs = []
    for clip in clips:
        if transformation is not None:
            clip = apply(clip, transformation)
        pairs.append((registry.transcribe(a1, clip, transformation).tokens,
                      registry.transcribe(a2, clip, transformation).tokens))
    if not pairs:
        raise ValueError("group_distance needs at least one clip")
    return float(mean_normalized_distance(pairs)[0])


def _group_d(results, clip_ids, pair, desc):
    a1, a2 = pair
    pairs = []
    for cid in clip_ids:
        t1 = results[(a1, cid, desc)]
        t2 = results[(a2, cid, desc)]
        for t in (t1, t2):
            if isinstance(t, str):
                raise _CellFailed(f"{cid}: {t}")
        pairs.append((t1, t2))
    return mean_normalized_distance(pairs)


class _CellFailed(Exception):
    pass


def run_fairness_test(manifest: DatasetManifest, base: str, config: FairnessConfig,
                      registry: Registry, jobs: int = 1, loader=None) -> FairnessResult:
    """Evaluate every (transformation, comparison group, backend pair) cell for ``base``.

    Violations are produced for every tau in ``config.taus``; failed cells
    become :class:`Hole` entries instead of aborting the run.
    """
    if base not in manifest.groups:
        raise ManifestError(f"base group {base!r} not in manifest groups {manifest.groups}")
    comparisons = [g for g in manifest.groups if g != base]
    if not comparisons:
        raise ManifestError("at least one comparison group is required")
    if not config.asr_pairs:
        raise ManifestError("no ASR pairs configured")
    for pair in config.asr_pairs:
        for name in pair:
            if name not in registry:
                raise UnknownBackend(name)

    transformations = config.transformations()
    asrs = {a for p in config.asr_pairs for a in p}
    groups = [base, *comparisons]
    clip_ids = {g: [e.clip_id for e in manifest.by_group(g)] for g in groups}
    store = TranscriptStore(manifest, registry, jobs=jobs, loader=loader)
    results = store.fetch([c for g in groups for c in clip_ids[g]], [None, *transformations], asrs)

    result = FairnessResult(base, comparisons, config)
    degradation = {}
    for pair in config.asr_pairs:
        for g in groups:
            try:
                d_plain, skipped_plain = _group_d(results, clip_ids[g], pair, descriptor_of(None))
            except (_CellFailed, AllClipsDegenerate) as exc:
                result.holes.append(Hole(g, None, None, pair, str(exc)))
                continue
            for t in transformations:
                try:
                    d_t, skipped_t = _group_d(results, clip_ids[g], pair, t.descriptor)
                except (_CellFailed, AllClipsDegenerate) as exc:
                    result.holes.append(Hole(g, t.kind.value, t.theta, pair, str(exc)))
                    continue
                D = d_t - d_plain
                degradation[(g, t, pair)] = D
                result.records.append(DegradationRecord(
                    g, t.kind.value, t.theta, pair, float(d_plain), float(d_t), float(D),
                    skipped_plain, skipped_t,
                ))

    taus = [(tau, Fraction(str(tau))) for tau in config.taus]
    for t in transformations:
        for k in comparisons:
            for pair in config.asr_pairs:
                d_base = degradation.get((base, t, pair))
                d_comp = degradation.get((k, t, pair))
                if d_base is None or d_comp is None:
                    continue
                gap = d_base - d_comp
                for tau, exact in taus:
                    if gap > exact:
                        result.violations.append(FairnessViolation(
                            base, k, t.kind.value, t.theta, pair, float(d_base), float(d_comp), tau,
                        ))
    return result


def pair_label(pair) -> str:
    return "_".join(pair)


def sensitivity_report(violations, records, config: FairnessConfig, base_groups=None) -> dict:
    """Violation counts per base group: total, per tau, per backend pair, per kind.

    Only taus in ``config.tau_sweep`` are counted; ``total`` is their sum, so
    each breakdown sums to the total. Per-kind rows sum over all thetas.
    """
    if base_groups is None:
        base_groups = sorted({v.base_group for v in violations})
    sweep = sorted(set(config.tau_sweep))
    kinds = []
    for s in config.schedules:
        if any((s.kind, t) not in config.exclusions for t in s.thetas):
            kinds.append(s.kind.value)
    tables = {}
    for g in base_groups:
        mine = [v for v in violations if v.base_group == g and v.tau in sweep]
        by_tau = Counter(v.tau for v in mine)
        by_pair = Counter(pair_label(v.asr_pair) for v in mine)
        by_kind = Counter(v.kind for v in mine)
        tables[g] = {
            "total": len(mine),
            "tau": {format_theta(t): by_tau.get(t, 0) for t in sweep},
            "asr_pair": {pair_label(p): by_pair.get(pair_label(p), 0) for p in config.asr_pairs},
            "kind": {k: by_kind.get(k, 0) for k in kinds},
        }
    return tables


def sensitivity_rows(tables: dict):
    """Flatten sensitivity tables to CSV rows: section, key, then one column per base group."""
    groups = sorted(tables)
    header = ["section", "key", *groups]
    rows = [header, ["total", "", *[tables[g]["total"] for g in groups]]]
    if groups:
        first = tables[groups[0]]
        for section in ("tau", "asr_pair", "kind"):
            for key in first[section]:
                rows.append([section, key, *[tables[g][section][key] for g in groups]])
    return rows


def result_to_dict(result: FairnessResult) -> dict:
    def clean(obj):
        d = asdict(obj)
        if "asr_pair" in d:
            d["asr_pair"] = list(d["asr_pair"])
        return d

    key = lambda r: (r["group"], r["kind"] or "", r["theta"] or 0.0, r["asr_pair"])
    return {
        "base_group": result.base_group,
        "comparison_groups": list(result.comparison_groups),
        "records": sorted((clean(r) for r in result.records), key=key),
        "violations": sorted(
            (clean(v) for v in result.violations),
            key=lambda v: (v["tau"], v["comparison_group"], v["kind"], v["theta"], v["asr_pair"]),
        ),
        "holes": sorted((clean(h) for h in result.holes), key=key),
        "skipped_both_empty": (
            sum(r.skipped_transformed for r in result.records)
            + sum({(r.group, r.asr_pair): r.skipped_plain for r in result.records}.values())
        ),
    }
