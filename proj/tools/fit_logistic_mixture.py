#!/usr/bin/env python3
"""Minimax fit of the inverse logit by a k-term mixture of normal CDFs.

    h(z) ~= sum_i p_i * Phi(z * s_i),   sum_i p_i = 1,  p_i, s_i > 0

The error h(z) - h*(z) is odd in z, so only z in [0, zmax] is fitted.

Stages:
  1. geometric grid of scales, weights by non-negative least squares,
     then nonlinear least squares over (p, s)
  2. L_q continuation (q = 2, 8, 32) toward the max-abs error
  3. Remez exchange on 2k alternation points

From the least-squares start the exchange settles in a local minimax near
2.8e-9 for k = 8. With --reference-seed the exchange starts from the
published k = 8 table instead and stays at its equioscillating optimum
(2.109e-9, 16 alternations).

Prints C++ initializer lists for the constants; pass --check to only
report the max error of the constants currently frozen in src/lni/.
"""
import argparse
import re
import sys
from pathlib import Path

import numpy as np
from scipy.optimize import least_squares, nnls
from scipy.special import expit, ndtr

GATE = 2.5e-9

REFERENCE_K8_P = [0.003246343272134, 0.051517477033972, 0.195077912673858,
                  0.315569823632818, 0.274149576158423, 0.131076880695470,
                  0.027912418727972, 0.001449567805354]
REFERENCE_K8_S = [1.365340806296348, 1.059523971016916, 0.830791313765644,
                  0.650732166639391, 0.508135425366489, 0.396313345166341,
                  0.308904252267995, 0.238212616409306]


def mixture(z, p, s):
    return (p[None, :] * ndtr(z[:, None] * s[None, :])).sum(axis=1)


def error(z, p, s):
    return expit(z) - mixture(z, p, s)


def seed(k, z):
    s = np.geomspace(1.4, 0.22, k)
    a = ndtr(z[:, None] * s[None, :])
    p, _ = nnls(a, expit(z))
    p = np.maximum(p, 1e-6)
    p /= p.sum()

    def resid(theta):
        pp = theta[:k] / theta[:k].sum()
        return error(z, pp, theta[k:])

    fit = least_squares(resid, np.concatenate([p, s]),
                        bounds=(1e-9, np.inf), xtol=1e-15, ftol=1e-15, max_nfev=20000)
    pp = fit.x[:k] / fit.x[:k].sum()
    return pp, fit.x[k:]


def lq_continuation(p, s, z, powers=(2, 8, 32)):
    k = len(p)
    theta = np.concatenate([np.log(p), np.log(s)])

    def unpack(x):
        pp = np.exp(x[:k])
        return pp / pp.sum(), np.exp(x[k:])

    for q in powers:
        def resid(x):
            e = error(z, *unpack(x)) * 1e9
            return np.sign(e) * np.abs(e) ** (q / 2)

        theta = least_squares(resid, theta, xtol=1e-14, ftol=1e-14, gtol=1e-14,
                              max_nfev=3000).x
    return unpack(theta)


def run_extrema(e):
    sign = np.sign(e)
    pts, start = [], 1
    for i in range(2, len(e) + 1):
        if i == len(e) or sign[i] != sign[i - 1]:
            pts.append(start + int(np.argmax(np.abs(e[start:i]))))
            start = i
    return pts


def select_reference(e, n):
    # drop the smallest extremum; an interior drop merges its neighbours
    pts = run_extrema(e)
    while len(pts) > n:
        k = int(np.argmin(np.abs(e[pts])))
        if k == 0 or k == len(pts) - 1:
            pts.pop(k)
            continue
        left, right = pts[k - 1], pts[k + 1]
        keep = left if abs(e[left]) >= abs(e[right]) else right
        pts = pts[:k - 1] + [keep] + pts[k + 2:]
    return pts


def remez_step(p, s, ref):
    k, n = len(p), len(ref)
    alt = (-1.0) ** np.arange(n)

    def resid(theta):
        pp, ss, lev = theta[:k], theta[k:2 * k], theta[-1]
        return np.concatenate([(error(ref, pp, ss) - lev * alt) * 1e9,
                               [(pp.sum() - 1.0) * 1e9]])

    start = np.concatenate([p, s, error(ref[:1], p, s)])
    theta = least_squares(resid, start, xtol=1e-15, ftol=1e-15, gtol=1e-15,
                          method="lm", max_nfev=5000).x
    return theta[:k], theta[k:2 * k], theta[-1]


def remez(p, s, dense, iters):
    n = 2 * len(p)
    for _ in range(iters):
        pts = select_reference(error(dense, p, s), n)
        if len(pts) < n:
            break
        p, s, level = remez_step(p, s, dense[pts])
        err = np.abs(error(dense, p, s)).max()
        print(f"  exchange: level {abs(level):.4e}, max err {err:.4e}", file=sys.stderr)
        if abs(err - abs(level)) < 1e-4 * abs(level):
            break
    return p / p.sum(), s


def frozen_constants(root):
    text = (root / "src" / "lni" / "mixture_constants.cpp").read_text()
    blocks = re.findall(r"\{([^{}]*)\}", text)
    vals = [np.array([float(v) for v in b.replace("\n", " ").split(",") if v.strip()])
            for b in blocks[:2]]
    return vals[0], vals[1]


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--k", type=int, default=8)
    ap.add_argument("--zmax", type=float, default=40.0)
    ap.add_argument("--iters", type=int, default=60)
    ap.add_argument("--reference-seed", action="store_true")
    ap.add_argument("--check", action="store_true")
    args = ap.parse_args()

    dense = np.linspace(0.0, args.zmax, 400001)
    if args.check:
        p, s = frozen_constants(Path(__file__).resolve().parent.parent)
        err = np.abs(error(dense, p, s)).max()
        print(f"sum p = {p.sum():.17g}")
        print(f"max |h - h*| on [0,{args.zmax}] = {err:.4e}")
        return 0 if err <= GATE else 1

    if args.reference_seed:
        if args.k != 8:
            ap.error("--reference-seed is only defined for k = 8")
        p, s = np.array(REFERENCE_K8_P), np.array(REFERENCE_K8_S)
    else:
        fit_z = np.unique(np.concatenate([np.linspace(0, 20, 4000),
                                          np.linspace(20, args.zmax, 200)]))
        p, s = seed(args.k, fit_z)
        print(f"least-squares seed: max err {np.abs(error(dense, p, s)).max():.4e}",
              file=sys.stderr)
        p, s = lq_continuation(p, s, fit_z)
        print(f"L_q continuation: max err {np.abs(error(dense, p, s)).max():.4e}",
              file=sys.stderr)
    p, s = remez(p, s, dense, args.iters)
    err = np.abs(error(dense, p, s)).max()
    print(f"minimax: max err {err:.4e}", file=sys.stderr)
    order = np.argsort(-s)
    print("p = {" + ", ".join(f"{v:.17g}" for v in p[order]) + "}")
    print("s = {" + ", ".join(f"{v:.17g}" for v in s[order]) + "}")
    return 0 if err <= GATE else 1


if __name__ == "__main__":
    sys.exit(main())
