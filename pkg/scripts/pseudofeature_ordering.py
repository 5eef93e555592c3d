"""Missing, pseudo and true feature on a task that depends on one predictable column.

Runs the pseudo-feature experiment in both directions (the column absent
upstream, then absent downstream) and prints mean AUC per arm.

    python scripts/pseudofeature_ordering.py --out runs/pseudofeature
"""

import argparse
from pathlib import Path

from tabtransfer.pipeline import load_config, run_pseudofeature

CONFIGS = Path(__file__).resolve().parent / "configs"
MIN_GAIN = 0.02       # pseudo over missing
MAX_EXCESS = 0.01     # pseudo over true


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    parser.add_argument("--out", type=Path, default=Path("runs/pseudofeature"))
    args = parser.parse_args()
    for direction in ("upstream", "downstream"):
        out = args.out / direction
        cfg = load_config(CONFIGS / f"pseudofeature_{direction}.json")
        summary = run_pseudofeature(cfg, out, resume=(out / "pseudofeature" / "manifest.json").exists())
        for n, means in summary.mean_auc.items():
            ok = means["pseudo"] >= means["missing"] + MIN_GAIN and means["pseudo"] <= means["true"] + MAX_EXCESS
            arms = "  ".join(f"{arm} {auc:.4f}" for arm, auc in means.items())
            print(f"{summary.direction} n={n}: {arms} -> {'PASS' if ok else 'FAIL'}")


if __name__ == "__main__":
    main()
