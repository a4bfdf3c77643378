"""Count nodes, edges and per-type nodes in the toy graph straight from the TSV text.

Deliberately avoids the package loader so the manifest is an independent check.

    python3 scripts/count_toy_kg.py           # print
    python3 scripts/count_toy_kg.py --write   # rewrite manifest.json
"""

import json
import sys
from collections import Counter
from pathlib import Path

TOY = Path(__file__).resolve().parents[1] / "src" / "medikal" / "data" / "toy"


def rows(path):
    for line in path.read_text(encoding="utf-8").splitlines():
        if line.strip() and not line.startswith("#"):
            yield line.split("\t")


def count():
    nodes = list(rows(TOY / "nodes.tsv"))
    edges = {tuple(e) for e in rows(TOY / "edges.tsv")}
    return {
        "nodes": len(nodes),
        "edges": len(edges),
        "types": dict(sorted(Counter(n[2] for n in nodes).items())),
        "relations": dict(sorted(Counter(e[1] for e in edges).items())),
    }


if __name__ == "__main__":
    manifest = count()
    text = json.dumps(manifest, indent=2, sort_keys=True) + "\n"
    if "--write" in sys.argv:
        (TOY / "manifest.json").write_text(text, encoding="utf-8")
    sys.stdout.write(text)
