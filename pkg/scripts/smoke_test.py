"""
Smoke test script to verify pipeline functionality.

Runs every command once on configs/tiny.cfg and prints the resulting
per-view WER table.
"""

import argparse
import sys
import tempfile
from pathlib import Path

import pandas as pd

ROOT = Path(__file__).resolve().parent.parent
if str(ROOT) not in sys.path:
    sys.path.insert(0, str(ROOT))

import run  # noqa: E402

TINY_CFG = ROOT / "configs" / "tiny.cfg"

STEPS = [
    ("Generating dataset", ["gen-data"]),
    ("Training teacher", ["train-teacher"]),
    ("Training student", ["train-student"]),
    ("Evaluating student", ["evaluate", "--split", "test"]),
    ("Running lambda ablation", ["ablate", "--axis", "lambda"]),
    ("Plotting", ["plot"]),
]


def run_smoke_test(out: Path, skip_ablation=False):
    """
    Run smoke test to verify pipeline functionality.

    Args:
        out: Output root for every artifact
        skip_ablation: If True, skip the ablation and plotting steps
    """
    print("=" * 60)
    print("SMOKE TEST - canonslr pipeline")
    print("=" * 60 + "\n")

    steps = STEPS[:4] if skip_ablation else STEPS
    for number, (title, argv) in enumerate(steps, start=1):
        print(f"Step {number}: {title}...")
        status = run.main([*argv, "--config", str(TINY_CFG), "--out", str(out)])
        if status != 0:
            print(f"FAILED: {' '.join(argv)} exited with {status}\n")
            return False

    print("\n" + "=" * 60)
    print("TEST REPORT")
    print("=" * 60 + "\n")
    report = pd.read_csv(out / "reports" / "student_test.tsv", sep="\t")
    print(report.to_string(index=False))

    if not skip_ablation:
        print("\nFigures:")
        for path in sorted((out / "plots").glob("*.png")):
            print(f"  - {path.name}")

    print("\n" + "=" * 60)
    print("SMOKE TEST PASSED")
    print("=" * 60 + "\n")
    return True


def main():
    """Main function."""
    parser = argparse.ArgumentParser(description="Smoke test for the canonslr pipeline")
    parser.add_argument("--out", type=str, default=None, help="Output root (default: a temporary directory)")
    parser.add_argument(
        "--skip-ablation",
        action="store_true",
        help="Stop after evaluation (no ablation or plots)"
    )

    args = parser.parse_args()
    if args.out is not None:
        success = run_smoke_test(Path(args.out), skip_ablation=args.skip_ablation)
    else:
        with tempfile.TemporaryDirectory(prefix="canonslr_smoke_") as tmp:
            success = run_smoke_test(Path(tmp), skip_ablation=args.skip_ablation)
    sys.exit(0 if success else 1)


if __name__ == "__main__":
    main()
