"""Smoke test for the paneval extension module.

    maturin develop -m crates/python/Cargo.toml && python python/smoke_test.py
"""

import json
import math
import random
import tempfile
from pathlib import Path

import paneval


def close(a, b, tol):
    assert abs(a - b) <= tol, (a, b)


def main():
    rng = random.Random(7)
    img = [[rng.random() for _ in range(20)] for _ in range(16)]
    other = [[rng.random() for _ in range(20)] for _ in range(16)]

    mean, ssim_map = paneval.ssim(img, img)
    close(mean, 1.0, 1e-9)
    assert len(ssim_map) == 6 and len(ssim_map[0]) == 10
    ab, _ = paneval.ssim(img, other)
    ba, _ = paneval.ssim(other, img)
    close(ab, ba, 1e-12)

    batch = paneval.batch_ssim([img, other], [img, other], pairing="indexed")
    close(batch["mean_ssim"], 1.0, 1e-9)
    assert [p[:2] for p in batch["pairs"]] == [(0, 0), (1, 1)]

    kernel = paneval.gaussian_kernel()
    close(sum(map(sum, kernel)), 1.0, 1e-12)

    close(paneval.fid([[-1.0], [0.0], [1.0]], [[0.0], [1.0], [2.0]]), 1.0, 1e-9)
    feats = [[rng.gauss(0, 1) for _ in range(4)] for _ in range(12)]
    close(paneval.fid(feats, feats), 0.0, 1e-8)
    stats = paneval.gaussian_stats(feats)
    assert stats.dim == 4 and len(stats.sigma) == 4
    close(paneval.frechet_distance(stats, stats), 0.0, 1e-8)

    root = paneval.sqrtm_psd([[4.0, 0.0], [0.0, 9.0]])
    close(root[0][0], 2.0, 1e-12)
    close(root[1][1], 3.0, 1e-12)

    close(paneval.story_score(0.57, 0.67), 0.62, 1e-12)
    close(paneval.plot_score([1.0, 0.0], [[1.0, 0.0], [0.0, 1.0]]), 0.5, 1e-12)
    close(paneval.cosine_similarity([1.0, 1.0], [1.0, 0.0]), math.sqrt(0.5), 1e-12)

    with tempfile.TemporaryDirectory() as tmp:
        tmp = Path(tmp)
        for fmt in ("binary", "json", "csv"):
            path = tmp / f"f.{fmt}"
            paneval.write_features(feats, path, fmt)
            assert paneval.read_features(path, fmt) == feats

        def doc(i, emb):
            return {"id": i, "title": i, "summary_text": f"text {i}", "embedding": emb}

        manifest = {
            "gamma": 0.5,
            "candidate": doc("cand", [1.0, 0.0]),
            "target": doc("target", [1.0, 0.0]),
            "references": [doc("r", [0.0, 1.0])],
        }
        path = tmp / "m.json"
        path.write_text(json.dumps(manifest))
        row = paneval.evaluate_manifest(path)
        assert (row["similarity"], row["plot"], row["story"]) == (1.0, 0.0, 0.5)
        close(paneval.evaluate_manifest(path, gamma=0.0)["story"], 0.0, 1e-15)

        del manifest["target"]["embedding"]
        path.write_text(json.dumps(manifest))
        lookup = tmp / "lookup.json"
        lookup.write_text(json.dumps({paneval.content_hash("text target"): [0.6, 0.8]}))
        close(paneval.evaluate_manifest(path, lookup=lookup)["similarity"], 0.6, 1e-12)

    try:
        paneval.story_score(0.5, 0.5, gamma=2.0)
    except ValueError:
        pass
    else:
        raise AssertionError("gamma outside [0, 1] accepted")
    try:
        paneval.read_features(Path("/nonexistent/f.bin"))
    except OSError:
        pass
    else:
        raise AssertionError("missing file accepted")

    print("paneval", paneval.__version__, "smoke test ok")


if __name__ == "__main__":
    main()
