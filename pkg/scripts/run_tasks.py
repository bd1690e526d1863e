#!/usr/bin/env python3
"""Re-enact the three benchmark tasks headless, nominal vs corrective.

Prints per-task outcomes, input times, and tick-compute timing; the nominal
runs must fail exactly at the injected errors and the corrective runs must
fix them.

    python scripts/run_tasks.py [--record-dir DIR]
"""

import argparse
from pathlib import Path

from dmpsteer.session import run
from dmpsteer.tasks import build_all


def main() -> int:
    ap = argparse.ArgumentParser()
    ap.add_argument("--record-dir", default=None, help="save traces here")
    args = ap.parse_args()
    record_dir = Path(args.record_dir) if args.record_dir else None
    if record_dir:
        record_dir.mkdir(parents=True, exist_ok=True)

    for name, scenario in build_all().items():
        print(f"=== {name} ({len(scenario.segments)} segments, dt={scenario.dt} s)")
        for label, user in (("nominal", None), ("corrective", scenario.scripted_user("corrective"))):
            rec = str(record_dir / f"{name}_{label}.jsonl") if record_dir else None
            result = run(scenario, user=user, record_path=rec)
            m = result.metrics
            print(
                f"  {label:<10} -> {result.outcome.summary().split(' ', 1)[1].split(' ')[0]:<8}"
                f" t_total={m.t_total:7.2f} s  t_input={m.t_input_corrective:6.2f} s"
                f"  tick={m.mean_tick_seconds * 1e6:6.1f} us  reversals={m.reversals}"
            )
    return 0


if __name__ == "__main__":
    import sys

    sys.exit(main())
