"""Regenerate the bundled fixture files and report whether they changed.

    python scripts/regenerate_fixture.py [--check]
"""
import argparse
import sys
from pathlib import Path

import techprox
from techprox.corpus import raw_to_jsonl
from techprox.synthetic import SyntheticSpec, external_to_csv, generate_external_corpus, generate_works

DATA = Path(techprox.__file__).parent / "data"


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--check", action="store_true", help="only compare, do not write")
    args = parser.parse_args()
    files = {
        "synthetic_works.jsonl": raw_to_jsonl(generate_works(SyntheticSpec())),
        "synthetic_external.csv": external_to_csv(generate_external_corpus()),
    }
    stale = []
    for name, text in files.items():
        path = DATA / name
        if not path.exists() or path.read_text(encoding="utf-8") != text:
            stale.append(name)
            if not args.check:
                path.write_text(text, encoding="utf-8")
    for name in files:
        print(f"{name}: {'changed' if name in stale else 'unchanged'}")
    return 1 if args.check and stale else 0


if __name__ == "__main__":
    sys.exit(main())
