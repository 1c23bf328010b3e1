"""How often does a chain of agents end up with a visibly corrupted summary?

Each stage corrupts its output with a fixed probability and corruptions never
cancel, so the fraction should track 1 - (1 - rate) ** stages.

Run: python3 demos/05_whisper_game.py
"""

from trendscribe.evaluation import chain_fault_experiment

TRIALS = 1000
print(f"{'stages':>6} {'rate':>5} {'observed':>9} {'expected':>9} {'ci95':>7}")
for rate in (0.05, 0.1, 0.2):
    for stages in (1, 2, 3, 4):
        r = chain_fault_experiment(stages, rate, TRIALS, seed=0)
        print(f"{stages:>6} {rate:>5} {r.corrupted_fraction:>9.4f} {1 - (1 - rate) ** stages:>9.4f} "
              f"{r.ci95_halfwidth:>7.4f}")
