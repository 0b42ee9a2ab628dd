"""Curation metrics and label remapping on toy numbers."""

import numpy as np

from eventcure import LabelMapping, f1_score, map_at, precision_at, remap_confusion

gt = np.array([0.95, 0.10, 0.80, 0.20, 0.05, 0.60, 0.30, 0.15, 0.40, 0.25])
good = gt + np.random.default_rng(0).normal(0, 0.1, gt.size)
shuffled = np.random.default_rng(1).permutation(gt)

print("t   P@t(good) MAP@t(good) P@t(shuffled)")
for t in (10, 20, 30):
    print(f"{t:<3} {precision_at(good, gt, t):9.3f} {map_at(good, gt, t):11.3f} {precision_at(shuffled, gt, t):13.3f}")

preds = [[0.9, 0.1], [0.3, 0.7], [0.2, 0.8], [0.4, 0.6]]
print(f"\nmacro F1 with one miss out of four: {f1_score(preds, [{0}, {0}, {1}, {1}]):.3f}")

# fold 'reception' into 'wedding' and drop 'concert', which the target set lacks
cm = np.array([[8, 1, 1], [0, 9, 1], [2, 0, 8]])
mapping = LabelMapping.from_names(["wedding", "reception", "concert"], ["wedding"],
                                  {"wedding": "wedding", "reception": "wedding", "concert": None})
for loose in (True, False):
    merged, acc = remap_confusion(cm, mapping, loose=loose)
    print(f"remapped ({'loose' if loose else 'strict'}): counts {merged.tolist()}, accuracy {acc:.3f}")
