"""Two numeric clouds with an isolated point in the gap between them, scored
by the kNN detector; writes an SVG with the top-scoring cases enlarged.

    python scripts/numeric_clusters_plot.py --top 10 > clusters.svg
"""

import argparse
import sys

import numpy as np

from anomtypes.data import Dataset, Schema
from anomtypes.detectors import DetectorParams, detect_multidim_numerical, detect_extreme_value
from anomtypes.evaluation import ranking
from anomtypes.plot import scatter_svg
from anomtypes.taxonomy import AnomalyType


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--n", type=int, default=300, help="points per cloud")
    ap.add_argument("--top", type=int, default=10)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    rng = np.random.default_rng(args.seed)
    pts = np.vstack([
        rng.normal([0, 0], [1.0, 0.6], (args.n, 2)),
        rng.normal([6, 5], [0.8, 1.0], (args.n, 2)),
        [[3.0, 2.5]],
    ])
    ds = Dataset(Schema.of(("x", "continuous"), ("y", "continuous")), {"x": pts[:, 0], "y": pts[:, 1]})
    sv = detect_multidim_numerical(ds, DetectorParams(k_nn=10))
    top = ranking(sv.case_ids, sv.scores)[: args.top]
    gap = 2 * args.n
    print(f"isolated point rank: {list(ranking(sv.case_ids, sv.scores)).index(gap) + 1}", file=sys.stderr)
    print(f"flagged by the univariate detector: {gap in detect_extreme_value(ds).flagged_ids()}", file=sys.stderr)
    marks = {int(c): AnomalyType.MULTIDIM_NUMERICAL for c in top}
    sys.stdout.write(scatter_svg(ds, "x", "y", marks, title=f"top {args.top} kNN scores"))


if __name__ == "__main__":
    main()
