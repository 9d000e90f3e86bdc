import csv
import json
from pathlib import Path

import pytest

from asrfair.audio_io import read_wav
from asrfair.cli import main, transformed_name
from asrfair.grammar_gen import default_grammar_path, derives, load_grammar

from helpers import write_backends, write_corpus


def _only_dir(root, prefix):
    dirs = sorted(Path(root).glob(f"{prefix}-*"))
    assert len(dirs) == 1
    return dirs[0]


def test_transformed_name():
    assert transformed_name("c1", "Amplitude", 0.5, 3) == "c1__Amplitude__0p5__s3.wav"
    assert transformed_name("c1", "hp", 700, 0) == "c1__HighPass__700__s0.wav"


def test_transform_writes_full_grid(tmp_path):
    manifest = write_corpus(tmp_path, {"g": 2}, duration=0.3)
    out = tmp_path / "out"
    assert main(["transform", "--manifest", str(manifest), "--out", str(out), "--seed", "4"]) == 0
    wavs = sorted(out.glob("*.wav"))
    assert len(wavs) == 2 * 41
    with open(out / "index.csv") as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == 82 and all(r["status"] == "ok" for r in rows)
    assert {r["output"] for r in rows} == {w.name for w in wavs}
    scaled = read_wav(out / "g-0__Scale__0p5__s4.wav")
    assert len(scaled) == 2 * len(read_wav(tmp_path / "g-0.wav"))

    again = tmp_path / "again"
    main(["transform", "--manifest", str(manifest), "--out", str(again), "--seed", "4"])
    for w in wavs:
        assert (again / w.name).read_bytes() == w.read_bytes()


def test_transform_partial_failure(tmp_path):
    manifest = write_corpus(tmp_path, {"g": 2}, duration=0.3)
    (tmp_path / "g-1.wav").write_bytes(b"not a wav")
    out = tmp_path / "out"
    assert main(["transform", "--manifest", str(manifest), "--out", str(out)]) == 1
    with open(out / "index.csv") as fh:
        status = [r["status"] for r in csv.DictReader(fh)]
    assert status.count("ok") == 41 and status.count("error") == 41


def test_custom_schedules(tmp_path):
    manifest = write_corpus(tmp_path, {"g": 1}, duration=0.3)
    sched = tmp_path / "sched.txt"
    sched.write_text("# just two\nNoise 10, 2\nAmplitude 0.5\n")
    out = tmp_path / "out"
    assert main(["transform", "--manifest", str(manifest), "--out", str(out), "--schedules", str(sched)]) == 0
    names = {p.name for p in out.glob("*.wav")}
    assert "g-0__Noise__2__s0.wav" in names and "g-0__Amplitude__0p5__s0.wav" in names
    # unlisted kinds keep their defaults
    assert len(names) == 41 - 5 + 2 - 6 + 1


def test_fairness_mock_run(tmp_path):
    manifest = write_corpus(tmp_path, {"A": 2, "B": 2}, duration=0.3)
    out = tmp_path / "runs"
    code = main(["fairness", "--manifest", str(manifest), "--mock", "--base-group", "A",
                 "--out", str(out), "--tau", "0.05", "--tau", "0.1"])
    assert code == 0
    run = _only_dir(out, "fairness")
    report = json.loads((run / "report.json").read_text())
    assert report["run"]["version"]
    assert report["config"]["tau_sweep"] == [0.05, 0.1]
    assert report["config"]["exclusions"] == [["Scale", 0.5], ["Scale", 0.6]]
    assert len(report["result"]["records"]) == 2 * 39
    with open(run / "sensitivity.csv") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["section", "key", "A"]
    assert [r[1] for r in rows if r[0] == "tau"] == ["0.05", "0.1"]


def test_fairness_usage_errors(tmp_path, capsys):
    manifest = write_corpus(tmp_path, {"A": 1, "B": 1}, duration=0.3)
    assert main(["fairness", "--manifest", str(manifest), "--mock", "--base-group", "Z",
                 "--out", str(tmp_path)]) == 2
    assert "base group" in capsys.readouterr().err
    assert main(["fairness", "--manifest", str(manifest), "--base-group", "A", "--out", str(tmp_path)]) == 2
    assert main(["fairness", "--manifest", str(tmp_path / "missing.csv"), "--mock",
                 "--base-group", "A", "--out", str(tmp_path)]) == 2
    with pytest.raises(SystemExit) as exc:
        main(["fairness", "--manifest", str(manifest)])
    assert exc.value.code == 2


def test_fairness_uses_cache(tmp_path):
    manifest = write_corpus(tmp_path, {"A": 1, "B": 1}, duration=0.3)
    cache = tmp_path / "cache"
    sched = tmp_path / "s.txt"
    sched.write_text("Noise 10\nAmplitude 0.5\nClipping 0.1\nDrop 10\nFrame 20\n"
                     "HighPass 700\nLowPass 700\nScale 0.9 0.8 0.7\n")
    args = ["fairness", "--manifest", str(manifest), "--mock", "--base-group", "A",
            "--cache-dir", str(cache), "--schedules", str(sched)]
    assert main(args + ["--out", str(tmp_path / "r1")]) == 0
    n = len(list(cache.rglob("*.json")))
    assert n > 0
    assert main(args + ["--out", str(tmp_path / "r2")]) == 0
    assert len(list(cache.rglob("*.json"))) == n
    r1 = (_only_dir(tmp_path / "r1", "fairness") / "report.json").read_bytes()
    r2 = (_only_dir(tmp_path / "r2", "fairness") / "report.json").read_bytes()
    assert r1 == r2


def test_localize_brother(tmp_path):
    texts = {f"g-{i}": "my brother is nice" for i in range(16)}
    manifest = write_corpus(tmp_path, {"g": 16}, texts=texts, duration=0.2)
    backends = write_backends(tmp_path / "b.json", [
        {"name": "weak", "type": "mock",
         "mock": {"vocabulary_weakness": ["brother"], "weakness_rank": 5, "robust_clips": ["g-0"]}},
    ])
    out = tmp_path / "loc"
    assert main(["localize", "--manifest", str(manifest), "--backends", str(backends), "--mock",
                 "--kind", "Noise", "--omega", "weak=3", "--out", str(out)]) == 0
    doc = json.loads((_only_dir(out, "localize") / "fault_reports.json").read_text())
    (report,) = doc["reports"]
    assert report["non_robust_words"] == ["brother"]
    assert report["drop_counts"]["brother"] == 15
    assert report["drop_counts"]["nice"] == 0
    assert doc["omega"] == {"default": 3, "per_backend": {"weak": 3}}
    assert (_only_dir(out, "localize") / "word_drops.csv").exists()


def test_localize_omega_inf(tmp_path):
    texts = {f"g-{i}": "my brother is nice" for i in range(4)}
    manifest = write_corpus(tmp_path, {"g": 4}, texts=texts, duration=0.2)
    backends = write_backends(tmp_path / "b.json", [
        {"name": "weak", "type": "mock", "mock": {"vocabulary_weakness": ["brother"]}},
    ])
    out = tmp_path / "loc"
    assert main(["localize", "--manifest", str(manifest), "--backends", str(backends), "--mock",
                 "--kind", "Noise", "--omega", "inf", "--out", str(out)]) == 0
    doc = json.loads((_only_dir(out, "localize") / "fault_reports.json").read_text())
    assert doc["reports"][0]["non_robust_words"] == []
    assert doc["reports"][0]["omega"] == "inf"
    assert main(["localize", "--manifest", str(manifest), "--mock", "--omega", "-1",
                 "--out", str(out)]) == 2


def test_gen_sentences(tmp_path):
    words = tmp_path / "words.txt"
    words.write_text("nice\n# skipped\nice cream\n\n")
    out = tmp_path / "sent"
    assert main(["gen-sentences", "--words", str(words), "-n", "50", "--out", str(out), "--seed", "2"]) == 0
    grammar = load_grammar(default_grammar_path())
    for word, fname in (("nice", "nice.txt"), ("ice cream", "ice_cream.txt")):
        lines = (out / fname).read_text().splitlines()
        assert len(lines) == 50
        assert all(derives(grammar, s, word) for s in lines)
    with open(out / "manifest.csv") as fh:
        assert [r["word"] for r in csv.DictReader(fh)] == ["nice", "ice cream"]
    first = (out / "nice.txt").read_bytes()
    main(["gen-sentences", "--words", str(words), "-n", "50", "--out", str(out), "--seed", "2"])
    assert (out / "nice.txt").read_bytes() == first
