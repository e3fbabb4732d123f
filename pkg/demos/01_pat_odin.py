"""Train PAT and ODIn on positives only, then reuse both models on shifted test samples."""
import numpy as np

from ocquant import odin_quantify, pat_quantify, train_odin, train_pat

rng = np.random.default_rng(0)
positives = rng.normal(0.0, 1.0, (500, 2))

pat = train_pat(positives, seed=1)
odin = train_odin(positives, seed=1)

print(" true   PAT    ODIn")
for p in (0.0, 0.1, 0.3, 0.5, 0.7, 0.9, 1.0):
    k = int(p * 1000)
    test = np.vstack([rng.normal(0.0, 1.0, (k, 2)), rng.normal(4.0, 1.0, (1000 - k, 2))])
    print(f"{p:5.2f}  {pat_quantify(pat, test):.3f}  {odin_quantify(odin, test):.3f}")
