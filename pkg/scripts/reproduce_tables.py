"""Recompute the published parameter and latency-reduction figures from their operands."""

import numpy as np

from navexit.model import ParamModel, activated_params
from navexit.simulator import reduction_pct

TASKS = ["pedestrian", "cyclist", "vehicle", "animal", "person", "vehicle (waymo)", "traffic-light"]

# model: (L, full size in B, exit layers, printed activated params in B)
PARAMS = {
    "DeepSeek-VL2-Tiny": (12, 1.0, [10, 10, 10, 10, 10, 9, 11], [0.90, 0.90, 0.90, 0.90, 0.90, 0.85, 0.95]),
    "DeepSeek-VL2-Small": (27, 2.8, [24, 25, 20, 21, 25, 20, 22], [2.53, 2.62, 2.18, 2.27, 2.62, 2.18, 2.36]),
    "LLaVA-7B": (32, 7.0, [18, 18, 14, 14, 17, 14, 25], [4.07, 4.07, 3.24, 3.24, 3.86, 3.24, 5.54]),
}

# model: (full latency s, nav latency s, printed reduction %, printed average %)
LATENCY = {
    "LLaVA-7B": ([.027, .036, .034, .029, .038, .030], [.015, .013, .013, .013, .015, .025],
                 [44.4, 63.9, 61.8, 55.2, 60.5, 16.7], 51.6),
    "DeepSeek-VL2-Tiny": ([.096, .093, .095, .100, .094, .098], [.077, .078, .080, .078, .070, .084],
                          [19.8, 16.1, 15.8, 22.0, 25.5, 14.3], 18.9),
    "DeepSeek-VL2-Small": ([.251, .240, .247, .258, .257, .248], [.216, .182, .186, .244, .185, .186],
                           [13.9, 24.2, 24.7, 5.4, 28.0, 25.0], 20.1),
}


def params_table():
    print("activated parameters (B): fitted linear model vs printed")
    for name, (L, full, layers, printed) in PARAMS.items():
        pm = ParamModel.fit(L, full, layers[2], printed[2])
        print(f"\n{name}: base={pm.base_params:.4f}B per_layer={pm.per_layer_params:.4f}B")
        for task, l, p in zip(TASKS, layers, printed):
            got = activated_params(pm, l)
            print(f"  {task:<16} l={l:>2}  fit={got:5.2f}  printed={p:5.2f}  diff={got - p:+.3f}")


def latency_table():
    print("\nlatency reduction (%): recomputed vs printed")
    for name, (full, nav, printed, avg) in LATENCY.items():
        got = [reduction_pct(b, e) for b, e in zip(full, nav)]
        mean = reduction_pct(float(np.mean(full)), float(np.mean(nav)))
        print(f"\n{name}")
        print("  per task  " + " ".join(f"{g:5.1f}" for g in got))
        print("  printed   " + " ".join(f"{p:5.1f}" for p in printed))
        print(f"  average   {mean:5.1f} (printed {avg})")
    print(f"\non-vehicle person detection: 0.609 s -> 0.361 s = {reduction_pct(0.609, 0.361)}%")


if __name__ == "__main__":
    params_table()
    latency_table()
