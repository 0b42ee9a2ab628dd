"""Step through the fusion loop on a hand-built three-image album.

Two images look like a wedding, one is an outlier that looks like a party.
The sequence model is unsure. Watch the event belief and the per-image
importance settle over a few iterations.
"""

import numpy as np

from eventcure import FusionConfig, FusionInputs, iterate, reweight_event, update_importance

EVENTS = ("wedding", "party")

Q = np.array([[0.85, 0.15], [0.80, 0.20], [0.10, 0.90]])  # per-image event probabilities
W = np.array([[0.9, 0.3], [0.7, 0.4], [0.1, 0.8]])  # per-image, per-event importance
p_hat = np.array([0.55, 0.45])  # album-level sequence model guess

x = FusionInputs(Q, W, p_hat)
cfg = FusionConfig(alpha=2.0, mask_fraction=0.5)

print("manual first step")
v = np.ones(3)
p_prime = reweight_event(v, Q, cfg.alpha)
p = 0.5 * (p_prime + p_hat)
v = update_importance(W, p, cfg.mask_fraction)
print(f"  event belief  {dict(zip(EVENTS, p.round(3).tolist()))}")
print(f"  importance    {v.round(3)}")

r = iterate(x, cfg)
print(f"\nfull loop: {r.steps} steps, converged={r.converged}")
print(f"  event belief  {dict(zip(EVENTS, r.p.round(3).tolist()))}")
print(f"  importance    {r.v.round(3)}")
print(f"  curated order {np.argsort(-r.v, kind='stable').tolist()}  (image 2 is the outlier)")

baseline = iterate(x, FusionConfig(alpha=0.0, mask_fraction=0.0))
print(f"\nalpha=0 reduces to averaging the image mean with the sequence guess: {baseline.p.round(3)}")
