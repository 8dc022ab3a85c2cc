#!/usr/bin/env python3
"""Regenerate assets/campus_map.png, the bundled 400x400 ingestion fixture.

Deterministic campus-style geometry: a road grid every 40 px (6 px wide),
dark building blocks between roads, an open central quad, and one large
auditorium block. Pixel values stay far from the 128 threshold (roads/quad
~230, buildings ~40) so the landmark occupancies in the acceptance test are
unambiguous.
"""

from pathlib import Path

import numpy as np
from PIL import Image

SIZE = 400


def campus_image() -> np.ndarray:
    img = np.full((SIZE, SIZE), 40, dtype=np.int16)  # buildings everywhere
    xs = np.arange(SIZE)
    road = (xs % 40) < 6
    img[road, :] = 230  # horizontal roads
    img[:, road] = 230  # vertical roads
    img[160:240, 160:240] = 230  # central quad, fully open
    img[100:140, 280:330] = 40  # auditorium block (overrides any road)
    rng = np.random.default_rng(20250809)
    img += rng.integers(-20, 21, size=img.shape, dtype=np.int16)
    return np.clip(img, 0, 255).astype(np.uint8)


# (cell, expected obstacle?) pairs, verified against the geometry above:
# roads and the quad are bright (free), blocks and the auditorium dark.
LANDMARKS = [
    ((3, 100), False),   # vertical road strip
    ((100, 3), False),   # horizontal road strip
    ((200, 200), False),  # central quad
    ((170, 230), False),  # central quad, near its edge
    ((43, 80), False),   # second vertical road (43 % 40 = 3)
    ((20, 20), True),    # first building block
    ((30, 350), True),   # block interior far south
    ((300, 120), True),  # auditorium
    ((290, 110), True),  # auditorium
    ((399, 399), True),  # south-east block corner (399 % 40 = 39)
]


def main() -> None:
    img = campus_image()
    out = Path(__file__).resolve().parents[1] / "assets" / "campus_map.png"
    out.parent.mkdir(exist_ok=True)
    Image.fromarray(img, mode="L").save(out)
    dark = img < 128
    for (x, y), occupied in LANDMARKS:
        assert dark[y, x] == occupied, f"landmark {(x, y)} disagrees"
    print(f"wrote {out} ({dark.mean():.1%} obstacle pixels); landmarks verified")


if __name__ == "__main__":
    main()
