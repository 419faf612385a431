"""Generic early exit vs navigation-routed exit on a synthetic two-task fixture."""

import argparse

from navexit.executor import ConfidenceThreshold, FixedFraction, StablePrediction
from navexit.io import report_text
from navexit.model import SyntheticSpec
from navexit.profiler import profile_tasks
from navexit.router import NavEvent, load_config
from navexit.simulator import FrameArrival, LatencyModel, simulate
from navexit.synth import generate_synthetic


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--layers", type=int, default=12)
    ap.add_argument("--shallow", type=int, default=4, help="planted depth of the easy task")
    ap.add_argument("--deep", type=int, default=11, help="planted depth of the hard task")
    ap.add_argument("--overthink", type=float, default=0.1)
    ap.add_argument("--n", type=int, default=200, help="samples per task")
    args = ap.parse_args()

    spec = SyntheticSpec(hidden_dim=64, num_layers=args.layers, num_classes=4, seed=args.seed,
                         planted_depths={"shallow": args.shallow, "deep": args.deep},
                         overthink_rate=args.overthink, samples_per_task=args.n)
    model, samples = generate_synthetic(spec)
    prof = profile_tasks(model, samples)
    print("selected exit layers:", prof.exit_layers)

    table = load_config(prof.exit_layers, {"city": ["shallow", "deep"]}, num_layers=args.layers)
    trace = [NavEvent(0, "city")] + [FrameArrival(i, s.sample_id) for i, s in enumerate(samples)]
    compare = [FixedFraction(0.5), FixedFraction(0.75), ConfidenceThreshold(0.9), StablePrediction(3)]
    report = simulate(trace, samples, model, table, LatencyModel.uniform(args.layers), compare)
    print(report_text(report))


if __name__ == "__main__":
    main()
