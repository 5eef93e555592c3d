"""Supervised against contrastive pre-training on the default synthetic benchmark.

At 10 and 100 downstream samples, compares mean test AUC of supervised and
contrastive checkpoints fine-tuned end to end with a linear head, and of the
same MLP trained from scratch. Re-running with the same --out resumes.

    python scripts/pretraining_ordering.py --out runs/pretraining --workers 4
"""

import argparse
from pathlib import Path

from tabtransfer.pipeline import MANIFEST, load_config, report_run, run_matrix

CONFIGS = Path(__file__).resolve().parent / "configs"
ARMS = ("supervised/LH_E2E", "contrastive/LH_E2E", "supervised/FS-2")


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    parser.add_argument("--out", type=Path, default=Path("runs/pretraining"))
    parser.add_argument("--workers", type=int, default=1)
    args = parser.parse_args()
    cfg = load_config(CONFIGS / "pretraining.json")
    summary = run_matrix(cfg, args.out, resume=(args.out / MANIFEST).exists(), workers=args.workers)
    print(f"{summary.executed} run, {summary.skipped} reused, {summary.failed} failed")
    report = report_run(args.out)
    for n in cfg.n_samples:
        sup, con, scratch = (report.mean_auc(n, arm) for arm in ARMS)
        ok = sup >= con >= scratch
        print(f"n={n}: supervised {sup:.4f}  contrastive {con:.4f}  from scratch {scratch:.4f} "
              f"(needs supervised >= contrastive >= from scratch) -> {'PASS' if ok else 'FAIL'}")


if __name__ == "__main__":
    main()
