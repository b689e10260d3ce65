"""Smoke test for the archon Python extension.

Build and install the extension first:

    maturin build -m crates/py/Cargo.toml -o dist && pip install dist/archon-*.whl

then run ``python python/smoke_test.py`` from the repository root.
"""

import json
import math
import shutil
import tempfile
from pathlib import Path

import archon

ROOT = Path(__file__).resolve().parent.parent
DEMO = ROOT / "crates" / "core" / "fixtures" / "demo"
EIGHTY = "v1;ops=gcn,gcn;dim=64;act=relu;drop=0.50;skips=0-2;pool=none;lr=0.005;wd=0.0005;ep=200"
INSTRUCTION = "predict the category of articles within a citation network"


def check_codec():
    assert archon.canonical_genotype(EIGHTY) == EIGHTY
    for seed in range(50):
        g = archon.sample_genotype("graph-classification", seed)
        assert archon.canonical_genotype(g) == g
        assert "pool=none" not in g
    try:
        archon.canonical_genotype(EIGHTY.replace("dim=64", "dim=65"))
    except archon.ArchonError as e:
        assert "dim" in str(e)
    else:
        raise AssertionError("malformed genotype accepted")


def check_surrogate():
    assert archon.surrogate_score(EIGHTY, "toy-cora") == (0.80, 0.0)
    assert archon.surrogate_score(EIGHTY, "toy-cora", ["normalize-features"]) == (0.81, 0.0)
    mean, std = archon.surrogate_score(EIGHTY, "toy-cora", [], 0.5, [1, 2, 3])
    assert 0.0 <= mean <= 1.0 and std >= 0.0
    best = archon.evolve_surrogate("toy-cora", population=8, generations=5, seed=3)
    scores = [score for score, _ in best]
    assert len(best) == 5 and scores == sorted(scores)


def check_embedding():
    v = archon.hash_embed("gcn skip")
    assert len(v) == 16
    assert abs(v[7] - 1 / math.sqrt(2)) < 1e-12 and abs(v[8] - 1 / math.sqrt(2)) < 1e-12


def check_pipeline(work):
    gateway = archon.Gateway.scripted([str(work / "ingest.jsonl")])
    store = archon.KnowledgeStore()
    ids = store.ingest_manifest(str(work / "corpus" / "manifest.jsonl"), gateway)
    assert ids[0] == "skipgnn/f01" and len(store) == 5
    top = store.retrieve("skip", gateway, stage="data-agent", final_k=2)
    assert len(top) == 2 and all(isinstance(score, float) for _, score, _ in top)

    run = archon.run_pipeline(str(work / "demo.config"), INSTRUCTION, store, seed=42)
    assert run.verdicts == ["accept"] and run.revisions_used == 0
    assert run.dataset == "toy-cora" and run.metric_mean == 0.82
    assert store.experiment_count() == 1
    report = json.loads(run.report_json())
    assert report["best_genotype"] == run.best_genotype

    path = work / "runs" / f"{run.run_id}.run"
    run.save(str(path))
    again = archon.Run.load(str(path))
    assert again.to_run_file() == run.to_run_file()

    snapshot = work / "kb.snapshot"
    store.save(str(snapshot))
    loaded = archon.KnowledgeStore.load(str(snapshot))
    assert loaded.snapshot() == store.snapshot()
    hits = loaded.retrieve("toy-cora", gateway)
    assert hits[0][0] == run.report_item


def main():
    check_codec()
    check_surrogate()
    check_embedding()
    with tempfile.TemporaryDirectory() as tmp:
        work = Path(tmp) / "demo"
        shutil.copytree(DEMO, work)
        check_pipeline(work)
    print("archon python smoke test: ok")


if __name__ == "__main__":
    main()
