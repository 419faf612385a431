"""Build a drive trace from a dataset: frames in dataset order, scene changes on a schedule.

    python scripts/make_trace.py data.jsonl crosswalk:100 highway:100 > trace.jsonl

Each ``scene:count`` emits a navigation event followed by ``count`` frames.
"""

import argparse
import sys

from navexit import io
from navexit.router import NavEvent
from navexit.simulator import FrameArrival


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("dataset")
    ap.add_argument("schedule", nargs="+", help="scene:count segments, in order")
    ap.add_argument("--frame-ms", type=float, default=33.0, help="time between frames")
    args = ap.parse_args()

    ids = [s.sample_id for s in io.read_dataset(args.dataset)]
    steps, i = [], 0
    for segment in args.schedule:
        scene, count = segment.rsplit(":", 1)
        steps.append(NavEvent(i * args.frame_ms, scene))
        for _ in range(int(count)):
            steps.append(FrameArrival(i * args.frame_ms, ids[i % len(ids)]))
            i += 1
    sys.stdout.write(io.encode_trace(steps))


if __name__ == "__main__":
    main()
