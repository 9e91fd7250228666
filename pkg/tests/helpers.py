"""Shared test oracles: brute-force reimplementations kept independent of
the library's vectorized paths."""

import numpy as np

from cbcl import FeaturePair, fused_distance


def make_pair(sample_id, rgb, depth=None):
    if depth is None:
        depth = rgb
    return FeaturePair(id=sample_id, rgb=np.asarray(rgb, dtype=np.float64),
                       depth=np.asarray(depth, dtype=np.float64))


def one_d_pair(sample_id, value):
    """1-D pair with identical streams; with w=(1,1) the fused distance
    reduces to plain |x - c|."""
    return make_pair(sample_id, [value], [value])


def all_centroid_distances(model, pair):
    """(category, index, distance) for every centroid pair, via the scalar op."""
    out = []
    for cat in model.categories:
        for i, c in enumerate(cat.centroids):
            out.append((cat.label, i, fused_distance(c, pair, model.fusion)))
    return out


def brute_force_neighbors(model, pair, n):
    """Full sort of every centroid distance; ties break on flat position."""
    order = {label: i for i, label in enumerate(model.labels)}
    entries = all_centroid_distances(model, pair)
    entries.sort(key=lambda e: (e[2], order[e[0]], e[1]))
    return entries[: min(n, len(entries))]


def brute_force_silhouette(model, pair, label):
    """Silhouette terms (a, b, nearest_other) by full sort."""
    order = {lab: i for i, lab in enumerate(model.labels)}
    entries = all_centroid_distances(model, pair)
    own = [e for e in entries if e[0] == label]
    foreign = [e for e in entries if e[0] != label]
    a = min(e[2] for e in own)
    foreign.sort(key=lambda e: (e[2], order[e[0]], e[1]))
    b = foreign[0][2]
    denom = max(a, b)
    s = (b - a) / denom if denom > 0 else 0.0
    return a, b, foreign[0][0], s


def replay_trace(data, cfg, trace):
    """Re-derive centroid evolution from the trace, checking the threshold
    rule at every decision: absorbed samples were strictly inside the
    threshold of their centroid's pre-update state, creators were at or
    beyond it for every centroid existing at that moment."""
    by_id = {pair.id: pair for pair, _ in data}
    d_threshold = cfg.distance_threshold
    w = cfg.fusion
    states = {}  # category -> list of [rgb64, depth64, weight]

    def dist(state, pair):
        dr = state[0] - pair.rgb.astype(np.float64)
        dd = state[1] - pair.depth.astype(np.float64)
        return 0.5 * (
            w.w_rgb * np.sqrt((dr * dr).sum()) + w.w_depth * np.sqrt((dd * dd).sum())
        )

    for rec in trace.records:
        pair = by_id[rec.sample_id]
        members = states.setdefault(rec.category, [])
        if rec.action == "seed":
            assert rec.centroid_index == 0 and not members
            members.append([pair.rgb.astype(np.float64), pair.depth.astype(np.float64), 1])
        elif rec.action == "absorb":
            state = members[rec.centroid_index]
            assert dist(state, pair) < d_threshold
            wgt = float(state[2])
            state[0] = (wgt * state[0] + pair.rgb.astype(np.float64)) / (wgt + 1.0)
            state[1] = (wgt * state[1] + pair.depth.astype(np.float64)) / (wgt + 1.0)
            state[2] += 1
        elif rec.action == "create":
            assert all(dist(s, pair) >= d_threshold for s in members)
            assert rec.centroid_index == len(members)
            members.append([pair.rgb.astype(np.float64), pair.depth.astype(np.float64), 1])
        else:
            raise AssertionError(f"unknown trace action {rec.action!r}")
    return states


def random_instance(rng, max_categories=5, max_samples=50, max_dim=16):
    """Small random labeled dataset plus a threshold that mixes absorbs and
    creates."""
    n_categories = int(rng.integers(1, max_categories + 1))
    rgb_dim = int(rng.integers(1, max_dim + 1))
    depth_dim = int(rng.integers(1, max_dim + 1))
    total = int(rng.integers(n_categories, max_samples + 1))
    data = []
    sid = 0
    for j in range(n_categories):
        quota = total // n_categories + (1 if j < total % n_categories else 0)
        center_rgb = rng.normal(0, 3, rgb_dim)
        center_depth = rng.normal(0, 3, depth_dim)
        for _ in range(max(quota, 1)):
            data.append(
                (
                    make_pair(
                        sid,
                        center_rgb + rng.normal(0, 1, rgb_dim),
                        center_depth + rng.normal(0, 1, depth_dim),
                    ),
                    f"c{j}",
                )
            )
            sid += 1
    w_rgb = float(rng.uniform(0.1, 1.0))
    w_depth = float(rng.uniform(0.1, 1.0))
    scale = 0.5 * (w_rgb + w_depth) * np.sqrt((rgb_dim + depth_dim) / 2.0)
    threshold = float(rng.uniform(0.3, 3.0)) * scale
    return data, threshold, w_rgb, w_depth
