"""Generate a synthetic corpus, train all three predictors, tune fusion on the
validation split and compare every method on the test split.

Takes a few seconds. Pass a seed as the first argument to try another corpus.
"""

import sys

from eventcure.metrics import T_LIST
from eventcure.pipeline import METHODS, run_experiment

seed = int(sys.argv[1]) if len(sys.argv) > 1 else 0
result = run_experiment(seed)
print(f"seed {seed}: validation picked alpha={result.alpha}, m={result.mask_fraction}\n")
print(f"{'method':<20} {'top-1':>6} {'MAP (mean over t)':>18}")
for m in METHODS:
    rep = result.reports[m]
    cells = {(name, t) for name, t, _ in rep.cells}
    acc = f"{rep.get('accuracy'):.3f}" if ("accuracy", None) in cells else "-"
    maps = [rep.get("MAP", t) for t in T_LIST if ("MAP", t) in cells]
    map_str = f"{sum(maps) / len(maps):.3f}" if maps else "-"
    print(f"{m:<20} {acc:>6} {map_str:>18}")
