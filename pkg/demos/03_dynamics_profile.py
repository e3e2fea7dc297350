"""
Temporal dynamics profiles and chunk segmentation
=================================================

How fast does the state change at each point of the trajectory? The
relative-L1 profile answers that, barely varies across conditions, and
its curvature tells us where to cut the trajectory into chunks.
"""
import numpy as np

from driftlab.config import RunConfig
from driftlab.dynamics import (
    l1_rel_profile,
    profile_invariance,
    sampling_weights,
    segment_chunks,
)
from driftlab.flow import pretrain
from driftlab.rng import RandomStream
from driftlab.sde import rollout_group

config = RunConfig().with_overrides({"pretrain_steps": "600"})
data = config.dataset()
schedule = config.schedule()
root = RandomStream(0)
params = pretrain(data, config.pretrain_config(), root.spawn(1))

# One profile per condition, each from a batch of stochastic rollouts.
profiles = []
for c in range(data.n_conditions):
    groups = [rollout_group(params, c, 64, schedule, 0.7, root.spawn(50 * c + i)) for i in range(2)]
    members = [m for g in groups for m in g.members]
    profiles.append(l1_rel_profile(members, condition=c))
    print(f"condition {c} profile: {np.round(profiles[-1].values, 3)}")

# The profiles are nearly condition-invariant: the minimum pairwise
# Pearson correlation stays high, which is what justifies segmenting
# once and reusing the plan everywhere.
matrix, minimum = profile_invariance(profiles)
print(f"minimum pairwise correlation: {minimum:.4f}")

# Segment the pooled profile. The first two transitions always form
# their own chunk; the other boundaries go to curvature peaks.
pooled = l1_rel_profile([m for c in range(data.n_conditions)
                         for g in [rollout_group(params, c, 64, schedule, 0.7, root.spawn(900 + c))]
                         for m in g.members])
plan = segment_chunks(pooled, n_chunks=4)
print(f"chunk sizes: {plan.sizes}")

# Chunk weights compare in-chunk mean change against the global mean;
# weighting chunk selection by them focuses updates on the fast part.
weights = sampling_weights(pooled, plan)
print("chunk weights:", np.round(weights, 3))
print("size-weighted mean (should be 1):",
      round(float(np.dot(plan.sizes, weights)) / plan.total, 6))
