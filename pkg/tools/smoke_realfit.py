"""Prototype of the real-data refit before freezing the sign-agreement test.

Fits the bundled full dataset and prints the interaction signs the
acceptance criteria pin (PI:region 2 positive, CE:region 15 negative),
plus the region 15 chart flags for the March-May window.
"""

import time

import numpy as np

from carcasswatch.estimator import StrandingModel
from carcasswatch.ingest import parse_csv
from carcasswatch import monitor

t0 = time.time()
records, _ = parse_csv("src/carcasswatch/data/strandings_2023s1.csv")
model = StrandingModel(max_edge_km=110.0, max_evaluations=2500)
model.fit(records)
print(f"fit done in {(time.time()-t0)/60:.1f} min, "
      f"{model.result_.n_evaluations} evals, converged={model.result_.converged}")

h = model.hyper_mode_
print(f"hyper mode: p={h.p:.3f} sigma2={h.sigma2:.3f} range={h.spatial_range:.0f}km "
      f"sd={h.spatial_sd:.2f} group_rho={h.group_rho:.3f} "
      f"week_prec={h.week_prec:.3f} week_rho={h.week_rho:.4f} region_prec={h.region_prec:.2f}")

for name in ("intercept", "species[PI]", "species[CE]", "region[2]", "region[15]",
             "species[PI]:region[2]", "species[CE]:region[15]"):
    s = model.latent_summaries_.get(name)
    if s is None:
        print(f"  {name}: MISSING from design")
    else:
        print(f"  {name}: mean {s.mean:+.3f} sd {s.sd:.3f} significant={s.significant}")

art = model.to_artifact()
t0 = time.time()
chart = monitor.build_chart(art, 15, "PI", level=0.80)
week_month = dict(zip(art.row_week.tolist(), art.row_month.tolist()))
flags = {}
for w, f in zip(chart.weeks, chart.flags):
    flags.setdefault(week_month.get(w, 0), []).append(f)
print(f"region 15 PI chart [{time.time()-t0:.1f}s]:")
for m in sorted(flags):
    above = sum(f == monitor.ABOVE_BAND for f in flags[m])
    print(f"  month {m}: {above} above-band of {len(flags[m])} weeks")
print("flags:", list(zip(chart.weeks, chart.flags)))
