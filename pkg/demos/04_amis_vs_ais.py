"""Paired AMIS and AIS runs with Gaussian-mixture proposals.

Both schemes share the seed, hence the same initial sample, and differ
only in how the pooled archive is weighted.
"""
import warnings

import numpy as np

from amis import Banana, EmOptions, RunConfig, RunFailed, estimate_suite, run_ais, run_amis

warnings.simplefilter("ignore", RuntimeWarning)
target = Banana(p=5)

for rep in range(3):
    config = RunConfig(family="gaussian-mixture", n0=10_000, nt=1_000, t=10, seed=1,
                       replication=rep, em=EmOptions(max_iter=100, restarts=1),
                       refit_em=EmOptions(max_iter=20, restarts=0))
    print(f"replication {rep}")
    for name, runner in (("AMIS", run_amis), ("AIS", run_ais)):
        try:
            result = runner(config, target)
        except RunFailed as exc:
            result = exc.result
        est = estimate_suite(result)
        trace = np.round(result.ess_trace).astype(int).tolist()
        print(f"  {name:4s} k={result.k} E(y1)={est['E_y1']:+.3f} ESS by iteration {trace}")
