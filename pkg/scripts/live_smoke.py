#!/usr/bin/env python3
"""Smoke test against a live vision backend. Not part of the CI suite.

Requires LEDGERLIFT_API_URL and LEDGERLIFT_API_KEY in the environment plus
a rasterized manifest (`ledgerlift rasterize --pdf ... --out ...`). Sends
the first page with the static prompt and reports what came back.
"""

import argparse
import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "src"))

from ledgerlift.extraction import ContextBlock, HttpBackend, extract_page, static_prompt
from ledgerlift.ingest import load_manifest


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--manifest", type=Path, required=True)
    parser.add_argument("--page", type=int, default=1)
    args = parser.parse_args()

    pages = load_manifest(args.manifest)
    page = next(p for p in pages if p.page_number == args.page)
    backend = HttpBackend()
    extract = extract_page(page, ContextBlock(), static_prompt(), backend)

    print(f"page {extract.page}: {len(extract.segments)} segment(s)")
    for segment in extract.segments:
        print(f"  {segment.archetype}: {len(segment.lines)} rows")
    if extract.quarantined:
        print(f"  {len(extract.quarantined)} quarantined line(s)")
    print(f"usage: {extract.usage.as_tuple()}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
