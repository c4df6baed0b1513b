#!/usr/bin/env python3
"""Convert a raw CoEST-style corpus into the layout reqtrace ingests.

Input: a directory of requirement text files, a directory of code files,
and an oracle (answer) file in either of the two common shapes:

  simple: one line per requirement: `<req> <code> <code> ...`
          (ids with or without extensions; `%` or `#` comments)
  xml:    an RTM file with <link><source_artifact_id>..</source_artifact_id>
          <target_artifact_id>..</target_artifact_id></link> entries

Output layout (what `reqtrace evaluate` / `reqtrace baseline` consume):

  <out>/req/<req_id>.txt    one file per requirement
  <out>/code/<code_id>.txt  one file per code document
  <out>/links.tsv           req_id<TAB>code_id, one pair per line

The raw corpora themselves are downloaded manually from the CoEST
collection; this script only reshapes them.
"""

import argparse
import re
import shutil
import sys
from pathlib import Path


def norm_id(name: str) -> str:
    """Strip extension and path, keep a filesystem-safe stem."""
    stem = Path(name.strip()).stem
    return re.sub(r"[^A-Za-z0-9_.-]+", "_", stem)


def copy_docs(src_dir: Path, out_dir: Path) -> dict[str, str]:
    out_dir.mkdir(parents=True, exist_ok=True)
    mapping = {}
    for path in sorted(p for p in src_dir.iterdir() if p.is_file()):
        stem = norm_id(path.name)
        mapping[stem] = stem
        shutil.copyfile(path, out_dir / f"{stem}.txt")
    return mapping


def parse_simple_oracle(path: Path) -> list[tuple[str, str]]:
    pairs = []
    for raw in path.read_text(encoding="utf-8", errors="replace").splitlines():
        line = re.split(r"[%#]", raw, 1)[0].strip()
        if not line:
            continue
        fields = line.replace(":", " ").split()
        req, codes = fields[0], fields[1:]
        for code in codes:
            pairs.append((norm_id(req), norm_id(code)))
    return pairs


def parse_xml_oracle(path: Path) -> list[tuple[str, str]]:
    import xml.etree.ElementTree as ET

    tree = ET.parse(path)
    pairs = []
    for link in tree.iter("link"):
        source = link.findtext("source_artifact_id", "").strip()
        target = link.findtext("target_artifact_id", "").strip()
        if source and target:
            pairs.append((norm_id(source), norm_id(target)))
    return pairs


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--req-dir", required=True, type=Path)
    parser.add_argument("--code-dir", required=True, type=Path)
    parser.add_argument("--oracle", required=True, type=Path)
    parser.add_argument("--oracle-format", choices=("simple", "xml"), default="simple")
    parser.add_argument("--out", required=True, type=Path)
    args = parser.parse_args(argv)

    req_ids = copy_docs(args.req_dir, args.out / "req")
    code_ids = copy_docs(args.code_dir, args.out / "code")
    if args.oracle_format == "xml":
        pairs = parse_xml_oracle(args.oracle)
    else:
        pairs = parse_simple_oracle(args.oracle)

    kept, dropped = [], 0
    for req, code in pairs:
        if req in req_ids and code in code_ids:
            kept.append((req, code))
        else:
            dropped += 1
    kept = sorted(set(kept))
    lines = [f"{req}\t{code}" for req, code in kept]
    (args.out / "links.tsv").write_text("\n".join(lines) + "\n", encoding="utf-8")
    print(
        f"converted: {len(req_ids)} requirements, {len(code_ids)} code docs, "
        f"{len(kept)} links ({dropped} oracle entries dropped as unknown)",
        file=sys.stderr,
    )
    return 0


if __name__ == "__main__":
    sys.exit(main())
