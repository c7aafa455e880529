"""Rule-governed family-tree knowledge graphs for smoke runs and offline
experiments.

Two disjoint "worlds" of people are generated; relations follow fixed rules
(inverses, compositions, symmetric relations) plus a frequent relation that
is assigned at random, so relation frequency alone is an imperfect
predictor. The output mirrors the on-disk layout of the inductive
benchmarks: a training directory and a sibling ``*_ind`` directory.
"""
from __future__ import annotations

from pathlib import Path

import numpy as np

RELATIONS = (
    "parent_of",
    "child_of",
    "grandparent_of",
    "grandchild_of",
    "sibling_of",
    "spouse_of",
    "knows",
)


def family_world(prefix: str, founders: int, generations: int, rng: np.random.Generator) -> list[tuple[str, str, str]]:
    people = 0

    def person() -> str:
        nonlocal people
        people += 1
        return f"{prefix}{people - 1}"

    parents: dict[str, list[str]] = {}
    couples = [(person(), person()) for _ in range(founders)]
    everyone = [p for c in couples for p in c]
    for _ in range(generations):
        children = []
        for a, b in couples:
            for _ in range(int(rng.integers(1, 4))):
                c = person()
                parents[c] = [a, b]
                children.append(c)
        everyone += children
        order = rng.permutation(len(children))
        couples = []
        for i in range(0, len(order) - 1, 2):
            x, y = children[order[i]], children[order[i + 1]]
            if parents[x] != parents[y]:
                couples.append((x, y))
        if not couples:
            break

    triples = set()
    spouses = set()
    for c, ps in parents.items():
        for p in ps:
            triples.add((p, "parent_of", c))
            triples.add((c, "child_of", p))
            for g in parents.get(p, []):
                triples.add((g, "grandparent_of", c))
                triples.add((c, "grandchild_of", g))
    by_parents: dict[tuple[str, ...], list[str]] = {}
    for c, ps in parents.items():
        by_parents.setdefault(tuple(ps), []).append(c)
    for ps, kids in by_parents.items():
        spouses.add(ps)
        for x in kids:
            for y in kids:
                if x != y:
                    triples.add((x, "sibling_of", y))
    for a, b in spouses:
        triples.add((a, "spouse_of", b))
        triples.add((b, "spouse_of", a))
    n = len(everyone)
    for _ in range(int(0.6 * n)):
        i, j = rng.choice(n, size=2, replace=False)
        triples.add((everyone[i], "knows", everyone[j]))
    out = sorted(triples)
    rng.shuffle(out)
    return [tuple(t) for t in out]


def family_benchmark(founders: int = 30, generations: int = 3, test_founders: int = 12, seed: int = 0):
    """Raw splits: ``train``, ``valid``, ``test`` (training world) and
    ``ind_train``, ``ind_test`` (disjoint test world)."""
    rng = np.random.default_rng(seed)
    world = family_world("p", founders, generations, rng)
    n_valid = max(1, len(world) // 10)
    splits = {
        "valid": world[:n_valid],
        "test": world[n_valid : 2 * n_valid],
        "train": world[2 * n_valid :],
    }
    ind = family_world("q", test_founders, generations, rng)
    n_test = max(1, len(ind) // 10)
    splits["ind_test"] = ind[:n_test]
    splits["ind_train"] = ind[n_test:]
    # inductive protocol: every query relation must occur in training facts
    train_rels = {r for _, r, _ in splits["train"]}
    for key in ("valid", "test", "ind_train", "ind_test"):
        splits[key] = [t for t in splits[key] if t[1] in train_rels]
    return splits


def write_benchmark(root: str | Path, name: str = "family", **kwargs) -> tuple[Path, Path]:
    """Write ``root/name`` and ``root/name_ind``; returns both directories."""
    splits = family_benchmark(**kwargs)
    root = Path(root)
    train_dir, ind_dir = root / name, root / f"{name}_ind"
    train_dir.mkdir(parents=True, exist_ok=True)
    ind_dir.mkdir(parents=True, exist_ok=True)
    files = {
        train_dir / "train.txt": splits["train"],
        train_dir / "valid.txt": splits["valid"],
        train_dir / "test.txt": splits["test"],
        ind_dir / "train.txt": splits["ind_train"],
        ind_dir / "test.txt": splits["ind_test"],
    }
    for path, rows in files.items():
        path.write_text("".join(f"{h}\t{r}\t{t}\n" for h, r, t in rows), encoding="utf-8")
    return train_dir, ind_dir
