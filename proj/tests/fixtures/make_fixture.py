#!/usr/bin/env python3
"""Writes the replay fixture: a 10,000-row (Q, M) table and the report values
an independent pipeline computes for it.

Coefficients come from scipy, AUC from sklearn, percentiles from numpy, and
the logistic fit is a separate Newton solver. Only the counter-based random
streams are re-coded here, because resample indices must line up draw for
draw with the C++ side.

    python3 tests/fixtures/make_fixture.py tests/fixtures/replay
"""

import json
import math
import sys
from pathlib import Path

import numpy as np
from scipy import stats
from sklearn.metrics import roc_auc_score

M64 = (1 << 64) - 1
GOLDEN = 0x9E3779B97F4A7C15

SEED = 42
RESAMPLES = 1000
PERMUTATIONS = 1000
LEVEL = 0.95
L2 = 1e-4
METRIC = "q"
MODEL = "net"


def splitmix64(x):
    x = (x + GOLDEN) & M64
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & M64
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & M64
    return x ^ (x >> 31)


def hash_string(s):
    h = 0xCBF29CE484222325
    for c in s.encode():
        h = ((h ^ c) * 0x100000001B3) & M64
    return splitmix64(h)


def derive(key, salt):
    if isinstance(salt, str):
        salt = hash_string(salt)
    return splitmix64(key ^ splitmix64((salt + 0x632BE59BD9B4E019) & M64))


class Stream:
    def __init__(self, key):
        self.key = key
        self.counter = 0

    def next(self):
        v = splitmix64((self.key + self.counter * GOLDEN) & M64)
        self.counter += 1
        return v

    def below(self, n):
        m = self.next() * n
        low = m & M64
        if low < n:
            threshold = ((1 << 64) - n) % n
            while low < threshold:
                m = self.next() * n
                low = m & M64
        return m >> 64


def bootstrap_indices(seed, n, resamples):
    base = derive(seed, "bootstrap")
    out = np.empty((resamples, n), dtype=np.int64)
    for b in range(resamples):
        s = Stream(derive(base, b))
        out[b] = [s.below(n) for _ in range(n)]
    return out


def permutations(seed, n, count):
    base = derive(seed, "permutation")
    out = np.empty((count, n), dtype=np.int64)
    for p in range(count):
        s = Stream(derive(base, p))
        perm = list(range(n))
        for i in range(n, 1, -1):
            j = s.below(i)
            perm[i - 1], perm[j] = perm[j], perm[i - 1]
        out[p] = perm
    return out


def interval(values):
    v = np.asarray([x for x in values if np.isfinite(x)])
    a = 1.0 - LEVEL
    return [float(np.percentile(v, 100 * a / 2)), float(np.percentile(v, 100 * (1 - a / 2)))]


def coefficient(name, x, y):
    if np.all(x == x[0]) or np.all(y == y[0]):
        return math.nan
    if name == "krcc":
        return stats.kendalltau(x, y, variant="b").statistic
    if name == "srcc":
        return stats.spearmanr(x, y).statistic
    return stats.pearsonr(x, y).statistic


def correlation(q, m, boot, perms):
    out = {}
    for name in ("krcc", "srcc", "plcc"):
        signed = coefficient(name, q, m)
        ci = interval([coefficient(name, q[idx], m[idx]) for idx in boot])
        if signed < 0:
            ci = [-ci[1], -ci[0]]
        null = np.array([coefficient(name, q, m[p]) for p in perms])
        p = (1 + int(np.sum(np.abs(null) >= abs(signed) - 1e-12))) / (1 + len(perms))
        out[name] = {"value": abs(signed), "signed": signed, "lo": ci[0], "hi": ci[1], "p": p}
    return out


def fit(q, m):
    # Newton on mean log-loss + L2/2 w^2, bias unpenalized, run to a fixed point.
    theta = np.zeros(2)
    X = np.column_stack([q, np.ones_like(q)])
    reg = np.diag([L2, 0.0])
    for _ in range(200):
        p = 1.0 / (1.0 + np.exp(-(X @ theta)))
        g = X.T @ (p - m) / len(q) + reg @ theta
        H = (X * (p * (1 - p))[:, None]).T @ X / len(q) + reg
        step = np.linalg.solve(H, g)
        theta -= step
        if np.max(np.abs(step)) < 1e-15:
            break
    return theta


def cross_entropy(p, y):
    p = np.clip(p, 1e-12, 1 - 1e-12)
    return float(np.mean(np.where(y == 1, -np.log(p), -np.log1p(-p))))


def pointwise(samples, boot_cache):
    ids = sorted({s[0] for s in samples})
    key = derive(SEED, "split")
    ranked = sorted(ids, key=lambda i: derive(key, i))
    n_train = min(max(int(math.floor(0.8 * len(ids) + 0.5)), 1), len(ids) - 1)
    train_ids = set(ranked[:n_train])
    train = [s for s in samples if s[0] in train_ids]
    test = [s for s in samples if s[0] not in train_ids]
    qtr = np.array([s[3] for s in train])
    mtr = np.array([s[4] for s in train], dtype=float)
    qte = np.array([s[3] for s in test])
    mte = np.array([s[4] for s in test])
    w, b = fit(qtr, mtr)
    probs = 1.0 / (1.0 + np.exp(-(w * qte + b)))
    ranked_scores = np.sign(w) * qte
    boot = boot_cache(len(test))
    aucs = [roc_auc_score(mte[i], ranked_scores[i]) if 0 < mte[i].sum() < len(i) else math.nan for i in boot]
    ces = [cross_entropy(probs[i], mte[i]) for i in boot]
    return {
        "auc": float(roc_auc_score(mte, ranked_scores)),
        "auc_ci": interval(aucs),
        "ce": cross_entropy(probs, mte),
        "ce_ci": interval(ces),
        "train_size": len(train),
        "test_size": len(test),
        "weight": float(w),
        "bias": float(b),
    }


def main(out_dir):
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    gen = np.random.default_rng(20240611)
    kinds = ["contrast", "gaussian_blur", "gaussian_noise", "jpeg_compression"]
    rows = []
    for i in range(500):
        image_id = f"id{i:04d}"
        base = gen.normal()
        for k, kind in enumerate(kinds):
            for sev in range(1, 6):
                q = 0.8 * base - 0.15 * sev * (k + 1) / 2 + 0.5 * gen.normal()
                # Round to what the score CSV stores, then use that value.
                text = "%#.9g" % q
                q = float(text)
                p = 1.0 / (1.0 + math.exp(-(1.5 * q + 0.4)))
                rows.append((image_id, kind, sev, q, int(gen.random() < p), text))

    with open(out / "scores.csv", "w") as f:
        f.write("image_id,corruption,severity,metric,value\n")
        for r in rows:
            f.write(f"{r[0]},{r[1]},{r[2]},{METRIC},{r[5]}\n")
    with open(out / "correctness.csv", "w") as f:
        f.write("image_id,corruption,severity,model,correct\n")
        for r in rows:
            f.write(f"{r[0]},{r[1]},{r[2]},{MODEL},{r[4]}\n")

    samples = sorted(rows, key=lambda r: (r[0], r[1], r[2]))
    cache = {}

    def boot_cache(n):
        if n not in cache:
            cache[n] = bootstrap_indices(SEED, n, RESAMPLES)
        return cache[n]

    groups = {}
    for s in samples:
        groups.setdefault((s[1], s[2]), []).append(s)
    keys = sorted(groups)
    gq = np.array([np.mean([s[3] for s in groups[k]]) for k in keys])
    gm = np.array([np.mean([s[4] for s in groups[k]]) for k in keys])
    expected = {
        "seed": SEED,
        "resamples": RESAMPLES,
        "permutations": PERMUTATIONS,
        "metric": METRIC,
        "model": MODEL,
        "groups": len(keys),
        "correlation": correlation(gq, gm, boot_cache(len(keys)), permutations(SEED, len(keys), PERMUTATIONS)),
        "pointwise": pointwise(samples, boot_cache),
    }
    with open(out / "expected.json", "w") as f:
        json.dump(expected, f, indent=2)
        f.write("\n")


if __name__ == "__main__":
    main(sys.argv[1] if len(sys.argv) > 1 else Path(__file__).parent / "replay")
