"""Inject one deviant cycle into a seasonal series, score (time, value) with
the kNN detector, shuffle the series and score again.

A seed counts as destroyed when the injected cycle makes up at least half of
the flagged top set before shuffling and less than half afterwards.
"""

import argparse

import numpy as np

from anomtypes.detectors import DetectorParams, detect_multidim_numerical
from anomtypes.sequence import SeriesAnomaly, generate_series, inject_series_anomaly, shuffle_series


def share(flagged, region):
    return len(flagged & region) / max(len(flagged), 1)


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--seeds", type=int, default=100)
    ap.add_argument("--n", type=int, default=400)
    ap.add_argument("--period", type=int, default=20)
    ap.add_argument("--amplitude", type=float, default=5.0)
    ap.add_argument("--noise", type=float, default=0.25)
    ap.add_argument("--epsilon", type=float, default=0.02)
    ap.add_argument("--reshape", choices=("shuffle", "zigzag"), default="shuffle")
    args = ap.parse_args()

    params = DetectorParams(standardize="none", epsilon=args.epsilon)
    before, after, destroyed = [], [], 0
    for seed in range(args.seeds):
        base = generate_series(args.n, amplitude=args.amplitude, period=args.period, noise=args.noise, seed=seed)
        kind = SeriesAnomaly("deviant_cycle", cycle=args.n // args.period // 2, period=args.period, reshape=args.reshape)
        series, truth, _ = inject_series_anomaly(base, kind, seed)
        region = set(truth.ids())
        b = share(set(detect_multidim_numerical(series, params).flagged_ids()), region)
        perm = np.random.default_rng(seed).permutation(len(series))
        moved = {int(series.case_ids[i]) for i in range(len(series)) if int(series.case_ids[perm[i]]) in region}
        a = share(set(detect_multidim_numerical(shuffle_series(series, seed), params).flagged_ids()), moved)
        before.append(b)
        after.append(a)
        destroyed += b >= 0.5 and a < 0.5
    print(f"mean injected share of the top set: before {np.mean(before):.3f}, after {np.mean(after):.3f}")
    print(f"destroyed by shuffling: {destroyed}/{args.seeds} seeds")


if __name__ == "__main__":
    main()
