#!/usr/bin/env python3
"""Regenerate fixtures/golden_session.json.

Replays a fixed command script against a fresh corridor session and freezes
the full frame sequence. Both the Python protocol test and the browser
console's reducer test replay this file, so it changes only when the wire
protocol deliberately changes.
"""

import json
import sys
from pathlib import Path

REPO = Path(__file__).resolve().parents[1]
sys.path.insert(0, str(REPO / "tests"))

from test_service import corridor_spec  # noqa: E402

from qpath.service import SessionCore  # noqa: E402

SCRIPT = [
    {"command_id": "c1", "kind": "SetSpeed", "ticks_per_sec": 0},
    {"command_id": "c2", "kind": "Step", "ticks": 3},
    {"command_id": "c3", "kind": "PlaceObstacle", "cell": [10, 6]},
    {"command_id": "c4", "kind": "Step", "ticks": 12},
    {"command_id": "c5", "kind": "MoveDestination", "cell": [19, 1]},
    {"command_id": "c6", "kind": "Step", "ticks": 60},
]


def main() -> None:
    core = SessionCore(corridor_spec(with_mover=True))
    frames = []
    for cmd in SCRIPT:
        frames.extend(core.handle_command(cmd))
    out = REPO / "fixtures" / "golden_session.json"
    out.parent.mkdir(exist_ok=True)
    out.write_text(json.dumps({"script": SCRIPT, "frames": frames}, indent=1) + "\n")
    types = [f["type"] for f in frames]
    print(f"wrote {out} ({len(frames)} frames)")
    print("types:", {t: types.count(t) for t in dict.fromkeys(types)})


if __name__ == "__main__":
    main()
