#!/usr/bin/env python3
"""Test converter command: emits N fake frame images plus metadata."""

import json
import sys
from pathlib import Path

source, outdir, frames = sys.argv[1], Path(sys.argv[2]), int(sys.argv[3])
for index in range(frames):
    (outdir / f"frame-{index:02d}.png").write_bytes(b"\x89PNG-stub-" + str(index).encode())
(outdir / "metadata.json").write_text(
    json.dumps(
        {
            "duration": 12.5,
            "resolution": "640x480",
            "frame_rate": 24,
            "source": Path(source).name,
        }
    )
)
