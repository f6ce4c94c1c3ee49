"""Write phase-map CSV and SVG files for d = 1, 2, 3.

Hard core and the generalized hard core at large U (where the unresolved
strip between the two theorem lines is visible) are both drawn.
"""

import argparse
import collections
import math
from pathlib import Path

from mottlab.phasemap import scan_grid, scan_to_svg


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", type=Path, default=Path("phase_maps"))
    ap.add_argument("--resolution", type=int, default=200)
    args = ap.parse_args(argv)
    args.out.mkdir(parents=True, exist_ok=True)
    for U in (math.inf, 1.0, 1e4):
        tag = "hardcore" if math.isinf(U) else f"U{U:g}"
        for d in (1, 2, 3):
            scan = scan_grid((-1.0, 1.5), (0.0, 0.5), args.resolution, U, d)
            (args.out / f"phase_{tag}_d{d}.csv").write_text(scan.to_csv())
            (args.out / f"phase_{tag}_d{d}.svg").write_text(scan_to_svg(scan))
            counts = collections.Counter(str(v) for _, v in scan.rows)
            print(f"{tag} d={d}: " + ", ".join(f"{k} {n}" for k, n in sorted(counts.items())))


if __name__ == "__main__":
    main()
