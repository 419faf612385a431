"""Layer-wise accuracy curves and over-inference counts as the planted flip rate varies."""

import argparse

from navexit.executor import FixedExit, Full, batch_run
from navexit.model import SyntheticSpec
from navexit.profiler import profile_tasks
from navexit.simulator import over_inference_analysis
from navexit.synth import generate_synthetic


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--layers", type=int, default=12)
    ap.add_argument("--depth", type=int, default=5)
    ap.add_argument("--n", type=int, default=500)
    ap.add_argument("--rates", default="0,0.1,0.2,0.3")
    args = ap.parse_args()

    print(f"{'rate':>5} {'flagged':>8} {'l*':>3} {'acc(l*)':>8} {'acc(L)':>7}  acc by layer")
    for rate in map(float, args.rates.split(",")):
        spec = SyntheticSpec(hidden_dim=48, num_layers=args.layers, num_classes=4, seed=args.seed,
                             planted_depths={"task": args.depth}, overthink_rate=rate, samples_per_task=args.n)
        model, samples = generate_synthetic(spec)
        result = profile_tasks(model, samples)
        l_star = result.exit_layers["task"]
        flagged = over_inference_analysis(model, samples)["task"].fraction
        early = batch_run(model, samples, FixedExit(l_star)).accuracy
        full = batch_run(model, samples, Full()).accuracy
        curve = " ".join(f"{a:.2f}" for a in result.profiles["task"].acc_by_layer)
        print(f"{rate:>5.2f} {flagged:>8.3f} {l_star:>3} {early:>8.3f} {full:>7.3f}  {curve}")


if __name__ == "__main__":
    main()
