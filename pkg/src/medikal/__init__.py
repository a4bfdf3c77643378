"""KG-assisted diagnostic reasoning over electronic medical records."""

from pathlib import Path

__version__ = "0.1.0"

TOY_DIR = Path(__file__).resolve().parent / "data" / "toy"


def toy_paths() -> dict[str, Path]:
    """Paths of the bundled toy graph, corpus, terminology, mock replies and config."""
    return {
        "nodes": TOY_DIR / "nodes.tsv",
        "edges": TOY_DIR / "edges.tsv",
        "emr": TOY_DIR / "emr.jsonl",
        "icd": TOY_DIR / "icd.tsv",
        "mock_responses": TOY_DIR / "mock_responses.json",
        "config": TOY_DIR / "config.json",
        "expected": TOY_DIR / "expected_final.json",
        "golden": TOY_DIR / "golden",
        "manifest": TOY_DIR / "manifest.json",
    }
