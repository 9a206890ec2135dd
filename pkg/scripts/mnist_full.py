#!/usr/bin/env python3
"""Full-scale MNIST semi-supervised run (optional; excluded from CI).

Requires the four MNIST IDX files downloaded locally, e.g.
train-images-idx3-ubyte and train-labels-idx1-ubyte. Builds the k-NN graph
over pixel space, samples one labeled vertex per selected class, and runs
the subspace solver. Expect several minutes of graph construction and a
large memory footprint; this script exists to reproduce the large-scale
trend, not for routine testing.

Usage:
    python scripts/mnist_full.py --images train-images-idx3-ubyte \
        --labels train-labels-idx1-ubyte --classes 5 --k 10 --out mnist.json
"""

import argparse
import json
import sys
import time

import numpy as np

from orthoquad.graphs import knn_gaussian_graph
from orthoquad.io import load_idx
from orthoquad.semisup import assemble_graph, classify


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--images", required=True, help="IDX image file")
    parser.add_argument("--labels", required=True, help="IDX label file")
    parser.add_argument("--classes", type=int, default=5,
                        help="use digits 0..classes-1")
    parser.add_argument("--k", type=int, default=10)
    parser.add_argument("--labels-per-class", type=int, default=1)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--max-points", type=int, default=None,
                        help="optional subsample for a faster run")
    parser.add_argument("--out", default="mnist_result.json")
    args = parser.parse_args(argv)

    print("loading IDX files ...")
    images = load_idx(args.images)
    digits = load_idx(args.labels)
    keep = digits < args.classes
    images, digits = images[keep], digits[keep]
    rng = np.random.default_rng(args.seed)
    if args.max_points is not None and images.shape[0] > args.max_points:
        pick = rng.choice(images.shape[0], args.max_points, replace=False)
        images, digits = images[pick], digits[pick]
    truth = digits.astype(int) + 1  # classes are 1-based in the pipeline
    print(f"{images.shape[0]} points, {args.classes} classes")

    t0 = time.time()
    print(f"building {args.k}-NN graph over pixel space ...")
    graph = knn_gaussian_graph(images, args.k)
    print(f"graph done in {time.time() - t0:.1f}s; {graph.weights.nnz} edges")

    labeled, classes = [], []
    for cls in range(1, args.classes + 1):
        members = np.where(truth == cls)[0]
        pick = rng.choice(members, args.labels_per_class, replace=False)
        labeled.extend(int(v) for v in pick)
        classes.extend([cls] * args.labels_per_class)

    instance = assemble_graph(graph, labeled, classes, args.classes)
    print("solving ...")
    result = classify(instance, truth=truth)
    report = result.report
    print(
        f"objective={result.objective:.4f} residual={result.certificate.residual:.2e} "
        f"qualified={result.certificate.qualified} accuracy={result.accuracy:.4f} "
        f"outer_iterations={len(report.iterations)} wall={result.wall_time_s:.1f}s"
    )
    with open(args.out, "w") as fh:
        json.dump(result.to_json_dict(), fh, indent=2)
    print(f"wrote {args.out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
