"""Assemble structural certificates (A, P, k, C1, C2, S_eps) for the builtin
anisotropic norms and write them as JSON files.
"""

import argparse
import os

from flowlab import finsler


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default="certificates")
    ap.add_argument("--s-max", type=float, default=1e3)
    ap.add_argument("--dim", type=int, default=2, help="spatial dimension n")
    args = ap.parse_args()

    os.makedirs(args.out, exist_ok=True)
    for nf in finsler.builtin_norms(args.dim):
        path = os.path.join(args.out, f"{nf.id.replace(':', '_')}.json")
        try:
            consts = finsler.certify(nf, s_max=args.s_max, path=path)
        except (RuntimeError, finsler.NormConstructionError) as e:
            print(f"{nf.id}: certification failed: {e}")
            continue
        c2 = "n/a" if consts.C2 is None else f"{consts.C2:.4g}"
        print(f"{nf.id}: A={consts.A:.5g} P={consts.P:.5g} k={consts.k:.5g} "
              f"C1={consts.C1:.3g} C2={c2}")
        sym = finsler.check_symmetry(nf)
        print(f"  symmetry probe: {'PASS' if sym.passed else 'FAIL'} "
              f"(defect {sym.max_defect:.3g})")


if __name__ == "__main__":
    main()
