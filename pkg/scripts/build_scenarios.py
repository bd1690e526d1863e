#!/usr/bin/env python3
"""Build the three benchmark scenario bundles into scenarios/.

Writes scenario.yaml plus the fitted model and surface files for the
insertion, polishing, and layup tasks, ready for the CLI:

    python scripts/build_scenarios.py [out_dir]
    dmpsteer run --scenario scenarios/insertion/scenario.yaml --user corrective
"""

import sys
from pathlib import Path

from dmpsteer.scenario import save_scenario
from dmpsteer.tasks import build_all


def main() -> int:
    out_root = Path(sys.argv[1]) if len(sys.argv) > 1 else Path("scenarios")
    for name, scenario in build_all().items():
        out_dir = out_root / name
        out_dir.mkdir(parents=True, exist_ok=True)
        path = save_scenario(scenario, str(out_dir))
        print(f"{name}: {len(scenario.segments)} segments -> {path}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
