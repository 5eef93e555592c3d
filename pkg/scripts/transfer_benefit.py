"""Transfer benefit on the default synthetic benchmark.

Runs two experiment matrices (pre-trained MLP against the same MLP from
scratch at 10 downstream samples, and pre-trained FT-Transformer against GBDT
with stacking at 200) and prints the comparisons. Re-running with the same
--out resumes unfinished jobs.

    python scripts/transfer_benefit.py --out runs/transfer --workers 4
"""

import argparse
from pathlib import Path

from tabtransfer.pipeline import MANIFEST, load_config, report_run, run_matrix

CONFIGS = Path(__file__).resolve().parent / "configs"
MIN_MARGIN = 0.03


def run(config: str, out: Path, workers: int):
    cfg = load_config(CONFIGS / config)
    summary = run_matrix(cfg, out, resume=(out / MANIFEST).exists(), workers=workers)
    print(f"{config}: {summary.executed} run, {summary.skipped} reused, {summary.failed} failed")
    return report_run(out)


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    parser.add_argument("--out", type=Path, default=Path("runs/transfer_benefit"))
    parser.add_argument("--workers", type=int, default=1)
    args = parser.parse_args()

    mlp = run("transfer_mlp.json", args.out / "mlp", args.workers)
    e2e, scratch = mlp.mean_auc(10, "mlp/MLP_E2E"), mlp.mean_auc(10, "mlp/FS-2")
    print(f"n=10  MLP_E2E AUC {e2e:.4f}  FS-2 AUC {scratch:.4f}  margin {e2e - scratch:+.4f} "
          f"(needs >= {MIN_MARGIN}) -> {'PASS' if e2e - scratch >= MIN_MARGIN else 'FAIL'}")

    ft = run("transfer_ft.json", args.out / "ft", args.workers)
    ranks = ft.mean_rank[200]
    ft_rank, gbdt_rank = ranks["ft/MLP_E2E"], ranks["gbdt/GBDT+stacking"]
    print(f"n=200 FT MLP_E2E mean rank {ft_rank:.3f}  GBDT+stacking mean rank {gbdt_rank:.3f} "
          f"-> {'PASS' if ft_rank < gbdt_rank else 'FAIL'}")


if __name__ == "__main__":
    main()
