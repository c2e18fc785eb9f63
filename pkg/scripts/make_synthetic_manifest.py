"""Write a synthetic manifest to disk.

    python scripts/make_synthetic_manifest.py out/manifest.json --images 1149 --seed 0
"""

import argparse
import json
from collections import Counter

from cxrtasks.core import save_manifest, validate_manifest
from cxrtasks.synthetic import make_manifest


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("out")
    ap.add_argument("--images", type=int, default=100)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--max-annotations", type=int, default=3)
    ap.add_argument("--min-size", type=int, default=400)
    ap.add_argument("--max-size", type=int, default=1000)
    args = ap.parse_args()

    manifest = make_manifest(
        args.images,
        seed=args.seed,
        size_range=(args.min_size, args.max_size),
        max_annotations=args.max_annotations,
    )
    problems = validate_manifest(manifest)
    if problems:
        raise SystemExit(f"generated manifest is invalid: {problems[0]}")
    save_manifest(manifest, args.out)
    diagnoses = Counter(i.diagnosis.value for i in manifest.images)
    print(json.dumps({"images": len(manifest.images), "annotations": len(manifest.annotations), "diagnoses": diagnoses}))


if __name__ == "__main__":
    main()
