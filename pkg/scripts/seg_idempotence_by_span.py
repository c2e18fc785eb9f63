"""How often does re-encoding a decoded mask change its tokens, by box size?

Draws random half-plane and ellipse masks whose box side lies in each size
bucket, encodes, decodes and re-encodes them. Masks whose codes are all zero
decode to nothing and are left out. Expect zero mismatches from 64 px up.

    python scripts/seg_idempotence_by_span.py --trials 300
"""

import argparse
import json
from dataclasses import dataclass

import numpy as np

from cxrtasks.codec import decode_mask, encode_mask
from cxrtasks.core import BinaryMask, ImageInfo, mask_to_bbox


@dataclass
class SpanConfig:
    trials: int = 300
    seed: int = 0
    buckets: tuple = (1, 4, 8, 16, 32, 48, 64, 96, 128, 256, 512)


def random_mask(rng, image, side):
    h = w = side
    y0 = int(rng.integers(0, image.height - h + 1))
    x0 = int(rng.integers(0, image.width - w + 1))
    yy, xx = np.mgrid[0:h, 0:w]
    if rng.random() < 0.5:
        a, b, c = rng.normal(size=3)
        region = a * (yy - h / 2) + b * (xx - w / 2) < c * side / 4
    else:
        cy, cx, ry, rx = rng.uniform(0.3, 0.7, size=4)
        region = ((yy + 0.5) / h - cy) ** 2 / ry**2 + ((xx + 0.5) / w - cx) ** 2 / rx**2 < 1
    region[0, :] = region[-1, :] = region[:, 0] = region[:, -1] = True
    bits = np.zeros((image.height, image.width), bool)
    bits[y0 : y0 + h, x0 : x0 + w] = region
    return BinaryMask(bits)


def run(cfg: SpanConfig):
    rng = np.random.default_rng(cfg.seed)
    for side in cfg.buckets:
        mismatch = kept = 0
        for _ in range(cfg.trials):
            image = ImageInfo.canvas(int(rng.integers(side, 1001)), int(rng.integers(side, 1001)))
            mask = random_mask(rng, image, side)
            loc, seg = encode_mask(mask, mask_to_bbox(mask), image)
            box, decoded = decode_mask(loc, seg, image)
            if decoded.count == 0:
                continue
            kept += 1
            mismatch += encode_mask(decoded, box, image) != (loc, seg)
        yield {"side_px": side, "masks": kept, "mismatches": mismatch, "rate": round(mismatch / kept, 4) if kept else None}


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--trials", type=int, default=300)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    for row in run(SpanConfig(args.trials, args.seed)):
        print(json.dumps(row))


if __name__ == "__main__":
    main()
