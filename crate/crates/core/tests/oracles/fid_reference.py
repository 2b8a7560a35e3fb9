"""Reference FID values computed with NumPy/SciPy.

Regenerates tests/fixtures/fid_reference.json. The cross term uses
scipy.linalg.sqrtm on the (non-symmetric) product sigma1 @ sigma2, the same
way the common PyTorch/TensorFlow FID scripts do, so it shares no code path
with the Rust implementation.

    python3 tests/oracles/fid_reference.py
"""

import json
import pathlib

import numpy as np
from scipy import linalg

EPS = 1e-6
OUT = pathlib.Path(__file__).resolve().parent.parent / "fixtures" / "fid_reference.json"


def reference_fid(x1, x2, eps=EPS):
    mu1, mu2 = x1.mean(axis=0), x2.mean(axis=0)
    s1 = np.atleast_2d(np.cov(x1, rowvar=False)) + eps * np.eye(x1.shape[1])
    s2 = np.atleast_2d(np.cov(x2, rowvar=False)) + eps * np.eye(x2.shape[1])
    covmean = linalg.sqrtm(s1 @ s2)
    if np.iscomplexobj(covmean):
        covmean = covmean.real
    diff = mu1 - mu2
    return float(diff @ diff + np.trace(s1) + np.trace(s2) - 2.0 * np.trace(covmean))


def smoke_features(count, dim, phase, scale, shift):
    """Closed-form features; the Rust tests regenerate them from the same formula."""
    i = np.arange(count, dtype=np.float64)[:, None] + 1.0
    j = np.arange(dim, dtype=np.float64)[None, :] + 1.0
    return scale * np.sin(phase * i * j + 0.01 * j) + shift


def main():
    rng = np.random.default_rng(20240417)
    cases = []
    for case in range(20):
        dim = int(rng.integers(1, 9))
        n1 = int(rng.integers(dim + 4, 65))
        n2 = int(rng.integers(dim + 4, 65))
        mix1 = rng.normal(size=(dim, dim))
        mix2 = rng.normal(size=(dim, dim))
        x1 = rng.normal(size=(n1, dim)) @ mix1 + rng.normal(scale=2.0, size=dim)
        x2 = rng.normal(size=(n2, dim)) @ mix2 + rng.normal(scale=2.0, size=dim)
        cases.append(
            {
                "name": f"random-{case:02d}",
                "eps": EPS,
                "candidates": x1.tolist(),
                "targets": x2.tolist(),
                "fid": reference_fid(x1, x2),
            }
        )

    a = smoke_features(5, 2048, 0.37, 0.5, 0.0)
    b = smoke_features(5, 2048, 0.23, 0.7, 0.1)
    smoke = {
        "count": 5,
        "dim": 2048,
        "eps": EPS,
        "candidates": {"phase": 0.37, "scale": 0.5, "shift": 0.0},
        "targets": {"phase": 0.23, "scale": 0.7, "shift": 0.1},
        "fid": reference_fid(a, b),
    }

    OUT.parent.mkdir(parents=True, exist_ok=True)
    OUT.write_text(json.dumps({"cases": cases, "smoke_2048": smoke}, indent=1) + "\n")
    print(f"wrote {OUT} ({len(cases)} cases, smoke fid {smoke['fid']:.12g})")


if __name__ == "__main__":
    main()
