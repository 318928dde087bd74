#!/usr/bin/env python3
"""Convert the public Citeseer Full dataset (citeseer.npz) into a graph bundle.

The .npz file is the CSR-packed citation graph distributed with
"Deep Gaussian Embedding of Graphs" (Bojchevski & Günnemann), e.g. from
https://github.com/abojchevski/graph2gauss/raw/master/data/citeseer.npz
Expected shape: 4230 nodes, 602 features, 6 classes.

Usage:
    python3 scripts/ingest_citeseer.py citeseer.npz data/citeseer
"""
import json
import sys

import numpy as np
import scipy.sparse as sp


def load_npz(path):
    with np.load(path, allow_pickle=True) as f:
        adj = sp.csr_matrix(
            (f["adj_data"], f["adj_indices"], f["adj_indptr"]), shape=f["adj_shape"]
        )
        feats = sp.csr_matrix(
            (f["attr_data"], f["attr_indices"], f["attr_indptr"]), shape=f["attr_shape"]
        )
        labels = f["labels"]
    return adj, feats, labels


def main():
    if len(sys.argv) != 3:
        sys.exit(__doc__)
    src, out_dir = sys.argv[1], sys.argv[2]
    adj, feats, labels = load_npz(src)
    n, d = feats.shape
    num_classes = int(labels.max()) + 1
    print(f"loaded: n={n} d={d} classes={num_classes} nnz(adj)={adj.nnz}")

    # symmetrize and deduplicate; the bundle stores one direction per edge
    adj = adj.maximum(adj.T).tocoo()
    edges = sorted(
        {(min(int(i), int(j)), max(int(i), int(j))) for i, j in zip(adj.row, adj.col) if i != j}
    )

    import os

    os.makedirs(out_dir, exist_ok=True)
    with open(os.path.join(out_dir, "meta.json"), "w") as f:
        json.dump({"name": "citeseer", "n": int(n), "d": int(d), "numClasses": num_classes}, f, indent=2)
        f.write("\n")
    with open(os.path.join(out_dir, "edges.tsv"), "w") as f:
        for a, b in edges:
            f.write(f"{a}\t{b}\n")
    dense = feats.toarray()
    with open(os.path.join(out_dir, "features.tsv"), "w") as f:
        for row in dense:
            f.write("\t".join(f"{v:.17g}" for v in row) + "\n")
    with open(os.path.join(out_dir, "labels.tsv"), "w") as f:
        for c in labels:
            f.write(f"{int(c)}\n")
    print(f"bundle written to {out_dir}: {len(edges)} undirected edges")
    if (n, d, num_classes) != (4230, 602, 6):
        print("warning: expected Citeseer Full dimensions (4230, 602, 6)")


if __name__ == "__main__":
    main()
