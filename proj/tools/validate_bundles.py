#!/usr/bin/env python3
"""Validate a bundle directory against the published JSON schemas."""

import argparse
import json
import pathlib
import sys

import jsonschema


def load(path):
    with open(path, encoding="utf-8") as f:
        return json.load(f)


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("bundle_dir", type=pathlib.Path)
    parser.add_argument("--schemas", type=pathlib.Path,
                        default=pathlib.Path(__file__).resolve().parent.parent / "docs")
    args = parser.parse_args()

    bundle_schema = load(args.schemas / "bundle.schema.json")
    index_schema = load(args.schemas / "index.schema.json")
    jsonschema.Draft202012Validator.check_schema(bundle_schema)
    jsonschema.Draft202012Validator.check_schema(index_schema)

    errors = []
    index = load(args.bundle_dir / "index.json")
    errors += [f"index.json: {e.message}" for e in jsonschema.Draft202012Validator(index_schema).iter_errors(index)]
    validator = jsonschema.Draft202012Validator(bundle_schema)
    listed = {entry["bundle"] for entry in index.get("clips", [])}
    found = sorted(args.bundle_dir.glob("bundles/*.json"))
    for path in found:
        rel = path.relative_to(args.bundle_dir).as_posix()
        if rel not in listed:
            errors.append(f"{rel}: missing from index.json")
        bundle = load(path)
        errors += [f"{rel}: {'/'.join(map(str, e.path))}: {e.message}" for e in validator.iter_errors(bundle)]
        referenced = [bundle["clip"]["audio"]]
        for c in bundle["contrasts"]:
            referenced += [p for p in (c["counterfactual_audio"], c["synthetic_image"]) if p]
        errors += [f"{rel}: missing file {p}" for p in referenced if not (args.bundle_dir / p).is_file()]
    if not found:
        errors.append("no bundles found")

    for e in errors:
        print(e, file=sys.stderr)
    print(f"{len(found)} bundles checked, {len(errors)} errors")
    return 1 if errors else 0


if __name__ == "__main__":
    sys.exit(main())
