#!/usr/bin/env python3
"""Convert a raw Planetoid dataset (Cora, CiteSeer, PubMed) into a clnr bundle.

Expects the original `ind.<name>.{x,y,tx,ty,allx,ally,graph,test.index}`
files in one directory, e.g. from https://github.com/kimiyoung/planetoid/tree/master/data.
Writes meta.txt, edges.tsv, features.bin, labels.tsv and the public split
(train.idx, val.idx, test.idx).

    python3 docs/convert_planetoid.py --raw planetoid/data --name cora --out data/cora

Needs numpy and scipy.
"""

import argparse
import pickle
import struct
import sys
from pathlib import Path

import numpy as np
import scipy.sparse as sp


def load(raw: Path, name: str, part: str):
    with open(raw / f"ind.{name}.{part}", "rb") as f:
        return pickle.load(f, encoding="latin1")


def convert(raw: Path, name: str, out: Path, row_normalize: bool) -> None:
    x, y, tx, ty, allx, ally, graph = (load(raw, name, p) for p in ("x", "y", "tx", "ty", "allx", "ally", "graph"))
    test_index = [int(l) for l in (raw / f"ind.{name}.test.index").read_text().split()]
    test_sorted = np.sort(test_index)

    if name == "citeseer":
        # some test nodes are isolated and missing from tx/ty; pad them with zeros
        full = range(test_sorted.min(), test_sorted.max() + 1)
        tx_ext = sp.lil_matrix((len(full), tx.shape[1]))
        tx_ext[test_sorted - test_sorted.min(), :] = tx
        tx = tx_ext
        ty_ext = np.zeros((len(full), ty.shape[1]))
        ty_ext[test_sorted - test_sorted.min(), :] = ty
        ty = ty_ext

    features = sp.vstack((allx, tx)).tolil()
    features[test_index, :] = features[test_sorted, :]
    features = np.asarray(features.todense(), dtype=np.float64)
    onehot = np.vstack((ally, ty))
    onehot[test_index, :] = onehot[test_sorted, :]
    labels = onehot.argmax(1)

    if row_normalize:
        sums = features.sum(1, keepdims=True)
        sums[sums == 0] = 1.0
        features = features / sums

    n = features.shape[0]
    edges = set()
    for src, dsts in graph.items():
        for dst in dsts:
            if src != dst and src < n and dst < n:
                edges.add((min(src, dst), max(src, dst)))
    edges = sorted(edges)

    train = list(range(len(y)))
    val = list(range(len(y), len(y) + 500))
    test = sorted(test_index)

    out.mkdir(parents=True, exist_ok=True)
    (out / "meta.txt").write_text(
        f"n_nodes = {n}\nn_edges_directed = {2 * len(edges)}\nfeature_dim = {features.shape[1]}\nn_classes = {onehot.shape[1]}\n"
    )
    (out / "edges.tsv").write_text("".join(f"{a}\t{b}\n" for a, b in edges))
    with open(out / "features.bin", "wb") as f:
        f.write(struct.pack("<QQ", n, features.shape[1]))
        f.write(features.astype("<f4").tobytes(order="C"))
    (out / "labels.tsv").write_text("".join(f"{int(c)}\n" for c in labels))
    for split, idx in (("train", train), ("val", val), ("test", test)):
        (out / f"{split}.idx").write_text("".join(f"{i}\n" for i in idx))
    stale = out / "features.tsv"
    if stale.exists():
        stale.unlink()
    print(f"{name}: {n} nodes, {len(edges)} edges, {features.shape[1]} features, {onehot.shape[1]} classes -> {out}")


def main(argv=None) -> int:
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--raw", type=Path, required=True, help="directory holding ind.<name>.* files")
    p.add_argument("--name", default="cora", choices=["cora", "citeseer", "pubmed"])
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--no-row-normalize", action="store_true", help="keep raw bag-of-words counts")
    args = p.parse_args(argv)
    convert(args.raw, args.name, args.out, not args.no_row_normalize)
    return 0


if __name__ == "__main__":
    sys.exit(main())
