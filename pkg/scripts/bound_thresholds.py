"""Largest hopping at which each explicit bound still holds.

Bisects in t at fixed (U, mu, beta, d) for the small-hopping precondition,
the four lemma inequalities and the truncated hopping-matrix row sum.
"""

import argparse

from mottlab import LatticeSpec, ModelParams
from mottlab.bounds import lemma32_bounds, sigma_rowsum_bound, small_hopping_check


def checks(d):
    lat = LatticeSpec(d, 8 if d == 1 else 3)

    def params(t, U, mu, beta):
        return ModelParams(lat, t=t, U=U, mu=mu, beta=beta)

    out = {"small_hopping": lambda *a: small_hopping_check(params(*a)).satisfied}
    for k, name in enumerate("abcd"):
        out[f"lemma_{name}"] = lambda *a, k=k: lemma32_bounds(params(*a))[k].satisfied
    out["sigma_rowsum"] = lambda *a: sigma_rowsum_bound(params(*a), max_jumps=4, radius=2).satisfied
    return out


def threshold(ok, U, mu, beta, lo=1e-6, hi=0.05, steps=30):
    if not ok(lo, U, mu, beta):
        return 0.0
    if ok(hi, U, mu, beta):
        return hi
    for _ in range(steps):
        mid = (lo * hi) ** 0.5
        lo, hi = (mid, hi) if ok(mid, U, mu, beta) else (lo, mid)
    return lo


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--U", type=float, default=1.0)
    ap.add_argument("--mu", type=float, default=0.2)
    ap.add_argument("--beta", type=float, default=40.0)
    args = ap.parse_args(argv)
    print("d,check,t_max")
    for d in (1, 2, 3):
        for name, ok in checks(d).items():
            print(f"{d},{name},{threshold(ok, args.U, args.mu, args.beta):.3e}")


if __name__ == "__main__":
    main()
