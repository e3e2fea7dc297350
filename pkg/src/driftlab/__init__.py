"""driftlab: desk-scale flow-matching policies trained with group-relative RL.

The package is organised bottom-up:

- tape: reverse-mode autodiff on numpy arrays
- rng: named, replayable random streams
- net: tiny velocity MLP over a flat parameter vector
- optim: AdamW with global-norm gradient clipping
- checkpoint: binary parameter snapshots
- data: synthetic 2-D conditional distributions
- flow: time schedules, flow-matching pretraining, ODE sampling
- sde: stochastic rollouts with exact Gaussian transition log-probs
- grpo: group-relative policy optimisation at step/chunk/sequence level
- dynamics: denoising-dynamics profiles, segmentation, sampling weights
- rewards: synthetic reward functions and attribution scenarios
- oracle: exact rational-arithmetic analysis of step- vs chunk-level updates
- config/pipeline/ablate/report/cli: the experiment harness
"""

__version__ = "0.1.0"
