"""Simulated wall-clock cost of synchronous rounds versus an always-full pool.

Both regimes see the same duration draws in issue order; only scheduling
differs. A synchronous round waits for its slowest job.
"""

from easybo.acq_optimizer import InnerOptConfig
from easybo.acquisition import AcqKind, AcquisitionSpec
from easybo.benchmarks import LogNormalDuration, get_problem
from easybo.harness import time_reduction
from easybo.scheduler import SchedulerOptions, run_async, run_sync_batch

problem = get_problem("branin", LogNormalDuration(median=10.0, sigma=0.5))
acq = AcquisitionSpec(AcqKind.EASYBO)
# timing does not depend on where points land, so keep the proposer cheap
opts = SchedulerOptions(inner=InnerOptConfig(n_random=256, n_local_starts=2, local_max_iters=10), refit_every=10)

print(" B   sync time  async time  reduction")
for B in (5, 10, 15):
    s = run_sync_batch(problem, 150, 20, B, acq, seed=7, options=opts)
    a = run_async(problem, 150, 20, B, acq, seed=7, options=opts)
    red = time_reduction(s.total_sim_time, a.total_sim_time)
    print(f"{B:2d} {s.total_sim_time:11.1f} {a.total_sim_time:11.1f} {100 * red:9.1f}%")
    print(f"   best found: sync {s.best_value:.5f}, async {a.best_value:.5f}")
