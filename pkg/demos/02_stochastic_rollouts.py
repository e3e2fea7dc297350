"""
Stochastic rollouts with exact transition log-probs
===================================================

The SDE sampler shares its marginals with the ODE but makes every
transition a Gaussian whose density we can evaluate exactly. That
density is what turns sampling into a policy we can optimise.
"""
import numpy as np

from driftlab.config import RunConfig
from driftlab.flow import ode_sample_batch, pretrain
from driftlab.rng import RandomStream
from driftlab.sde import rollout_group, transition_log_prob

config = RunConfig().with_overrides({"pretrain_steps": "600"})
data = config.dataset()
schedule = config.schedule()
root = RandomStream(0)
params = pretrain(data, config.pretrain_config(), root.spawn(1))

# Roll out a group of trajectories for one condition. Every stochastic
# transition records its sampling mean, noise scale, and log-density.
group = rollout_group(params, 0, 8, schedule, eta=0.7, stream=root.spawn(2))
trajectory = group.members[0]
print(f"{len(trajectory.transitions)} transitions, "
      f"{len(trajectory.stochastic_transitions)} stochastic")

# The final transition integrates straight to t=0 with zero noise, so
# it carries no log-prob and is excluded from optimisation.
last = trajectory.transitions[-1]
print(f"final transition std: {last.std} (deterministic: {not last.stochastic})")

# Recomputing a transition's log-prob at the sampling parameters must
# reproduce the value recorded during the rollout.
transition = trajectory.stochastic_transitions[3]
logp, _ = transition_log_prob(params, transition, trajectory.condition)
print(f"recorded logp {transition.logp_old:.6f}, recomputed {logp:.6f}")

# Marginal preservation: SDE endpoints land on the same distribution
# the ODE produces (here checked loosely through per-axis moments).
ode = ode_sample_batch(params, 0, schedule, 512, root.spawn(3))
groups = [rollout_group(params, 0, 64, schedule, 0.7, root.spawn(10 + i)) for i in range(8)]
sde = np.concatenate([np.stack([m.final for m in g.members]) for g in groups])
print("ODE endpoint mean/std:", np.mean(ode, axis=0).round(2), np.std(ode, axis=0).round(2))
print("SDE endpoint mean/std:", np.mean(sde, axis=0).round(2), np.std(sde, axis=0).round(2))
