"""Desk-scale consistency sweep: estimation error shrinks with the noise.

Generates a batch of datasets per noise amplitude with randomly drawn true
parameters, estimates each one, and reports the median error per level.  The
medians decrease monotonically and drop by an order of magnitude across the
sweep; the full-scale version of this study lives behind the CLI
(``sirlevy sweep``).
"""

import tempfile

from sirlevy.experiments import RunConfig, batch_estimate, emit_reports, generate_datasets

cfg = RunConfig(eps_list=(0.3, 0.1, 0.01, 0.001), n_datasets=25, seed=1234, cells=20)

with tempfile.TemporaryDirectory() as out:
    records = generate_datasets(cfg, out)
    print(f"generated {len(records)} datasets ({cfg.n_datasets} per eps)")
    batch_estimate(records, cfg, out)
    report = emit_reports(out)

print("\nmedian parameter-vector error by noise amplitude:")
for eps in cfg.eps_list:
    print(f"  eps={eps:5g}:  {report['medians_l2'][eps]:.5f}")
print(f"\nlargest/smallest ratio: {report['ratio']:.1f}")
print(f"consistency verdict: {'PASS' if report['consistency_pass'] else 'FAIL'}")
