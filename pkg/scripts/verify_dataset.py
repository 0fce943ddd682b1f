"""Script to check a dataset directory against its manifest and list every issue.

python scripts/verify_dataset.py --dataset < /full/path/to/dataset >
"""

import argparse
import sys
from pathlib import Path

from cexdex.io import load_and_validate


def main():
    parser = argparse.ArgumentParser(
        description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter
    )
    parser.add_argument(
        "--dataset", type=Path, required=True, help="Dataset directory holding manifest.yaml"
    )
    args = parser.parse_args()

    dataset = load_and_validate(args.dataset)
    for issue in dataset.issues:
        print(issue)
    n_swaps = sum(len(block.txs) for block in dataset.blocks)
    print(f"{len(dataset.blocks)} blocks, {n_swaps} swaps, {len(dataset.issues)} issue(s)")
    sys.exit(0 if dataset.ok else 1)


if __name__ == "__main__":
    main()
