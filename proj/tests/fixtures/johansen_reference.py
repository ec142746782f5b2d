# Regenerates johansen_*.csv and johansen_expected.json with statsmodels.
import json

import numpy as np
from statsmodels.tsa.vector_ar.vecm import coint_johansen

rng = np.random.default_rng(7)
n = 200
common = np.cumsum(rng.normal(size=n))
series = {
    "coint3": np.column_stack([common + rng.normal(size=n), 0.5 * common + rng.normal(size=n),
                               np.cumsum(rng.normal(size=n))]),
    "walk2": np.column_stack([np.cumsum(rng.normal(size=n)), np.cumsum(rng.normal(size=n))]),
}
expected = {}
for name, data in series.items():
    np.savetxt(f"johansen_{name}.csv", data, delimiter=",", fmt="%.17g")
    for det in (-1, 0):
        for lag in (1, 2):
            res = coint_johansen(data, det, lag)
            expected[f"{name}/{det}/{lag}"] = {"eig": list(res.eig), "trace": list(res.lr1)}
with open("johansen_expected.json", "w") as f:
    json.dump(expected, f, indent=1)
