"""Slow, obviously-correct reference implementations used only by the tests."""

import math

import numpy as np


def conv2d_loops(x, w, b, stride, padding):
    n, c, h, wd = x.shape
    f, _, kh, kw = w.shape
    ho = (h + 2 * padding - kh) // stride + 1
    wo = (wd + 2 * padding - kw) // stride + 1
    out = np.zeros((n, f, ho, wo))
    for ni in range(n):
        for fi in range(f):
            for oi in range(ho):
                for oj in range(wo):
                    acc = b[fi]
                    for ci in range(c):
                        for ki in range(kh):
                            for kj in range(kw):
                                ii = oi * stride + ki - padding
                                jj = oj * stride + kj - padding
                                if 0 <= ii < h and 0 <= jj < wd:
                                    acc += x[ni, ci, ii, jj] * w[fi, ci, ki, kj]
                    out[ni, fi, oi, oj] = acc
    return out


def matmul_loops(x, w, b):
    n, k = x.shape
    m = w.shape[1]
    out = np.zeros((n, m))
    for i in range(n):
        for j in range(m):
            out[i, j] = b[j] + sum(x[i, t] * w[t, j] for t in range(k))
    return out


def bce_loops(p, y, eps=1e-7):
    total = 0.0
    flat_p, flat_y = p.reshape(-1), y.reshape(-1)
    for pi, yi in zip(flat_p, flat_y):
        q = min(max(pi, eps), 1 - eps)
        total += -(yi * math.log(q) + (1 - yi) * math.log(1 - q))
    return total / flat_p.size


def adam_scalar(theta, grad_fn, steps, lr, beta1, beta2, eps=1e-8):
    """Textbook scalar Adam; returns the whole trajectory."""
    m = v = 0.0
    traj = []
    for t in range(1, steps + 1):
        g = grad_fn(theta)
        m = beta1 * m + (1 - beta1) * g
        v = beta2 * v + (1 - beta2) * g * g
        m_hat = m / (1 - beta1**t)
        v_hat = v / (1 - beta2**t)
        theta = theta - lr * m_hat / (math.sqrt(v_hat) + eps)
        traj.append(theta)
    return traj


def nearest_positive_distance_map(mask, distance):
    """Per-pixel distance to the closest positive pixel of ``mask`` (inf if none).

    Euclidean distances are returned squared so comparisons stay in integers.
    """
    h, w = mask.shape
    pos = np.argwhere(mask)
    if len(pos) == 0:
        return np.full((h, w), np.inf)
    grid = np.indices((h, w)).reshape(2, -1).T
    diff = np.abs(grid[:, None, :] - pos[None, :, :])
    if distance == "euclidean":
        d = (diff**2).sum(axis=2)
    else:
        d = diff.max(axis=2)
    return d.min(axis=1).reshape(h, w).astype(float)


def within(dist_map, rho, distance):
    return dist_map <= (rho * rho if distance == "euclidean" else rho)


def dilate_brute(mask, rho, distance):
    h, w = mask.shape
    pos = np.argwhere(mask)
    out = np.zeros((h, w), dtype=np.uint8)
    for i in range(h):
        for j in range(w):
            for a, b in pos:
                if distance == "euclidean":
                    near = (a - i) ** 2 + (b - j) ** 2 <= rho * rho
                else:
                    near = max(abs(a - i), abs(b - j)) <= rho
                if near:
                    out[i, j] = 1
                    break
    return out


def relaxed_counts_brute(pred, gt, rho, distance):
    """(|pred near gt|, |pred|, |gt near pred|, |gt|) via nearest-positive-distance search."""
    pred, gt = pred.astype(bool), gt.astype(bool)
    to_gt = nearest_positive_distance_map(gt, distance)
    to_pred = nearest_positive_distance_map(pred, distance)
    pred_near = int((pred & within(to_gt, rho, distance)).sum())
    gt_near = int((gt & within(to_pred, rho, distance)).sum())
    return pred_near, int(pred.sum()), gt_near, int(gt.sum())


def rasterize_boxes(shape, boxes):
    """Pixel-by-pixel point-in-rectangle test."""
    out = np.zeros(shape, dtype=np.uint8)
    for i in range(shape[0]):
        for j in range(shape[1]):
            for r, c, h, w in boxes:
                if r <= i < r + h and c <= j < c + w:
                    out[i, j] = 1
                    break
    return out
