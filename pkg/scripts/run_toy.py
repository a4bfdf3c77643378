"""Run the bundled toy corpus end to end and print each record's audit trail.

    python3 scripts/run_toy.py [--out DIR] [--keep]
"""

from __future__ import annotations

import argparse
import tempfile

from medikal import toy_paths
from medikal.cli import main


def run(out: str) -> int:
    toy = toy_paths()
    code = main(["run", "--kg-nodes", str(toy["nodes"]), "--kg-edges", str(toy["edges"]),
                 "--emr", str(toy["emr"]), "--icd", str(toy["icd"]), "--config", str(toy["config"]),
                 "--out", out])
    for rid in ("r001", "r002", "r003"):
        print()
        main(["inspect", "--results", out, "--id", rid])
    return code


if __name__ == "__main__":
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out")
    args = ap.parse_args()
    if args.out:
        raise SystemExit(run(args.out))
    with tempfile.TemporaryDirectory() as tmp:
        raise SystemExit(run(tmp))
