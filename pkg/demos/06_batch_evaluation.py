"""Compare twenty mock-generated summaries with references written for the same tables.

The generated side has every fault class switched on at 30%, so some pairs
diverge from their reference and fail validation.

Run: python3 demos/06_batch_evaluation.py
"""

import tempfile
from pathlib import Path

from trendscribe.evaluation import batch_evaluate, write_synthetic_pairs

pairs = Path(tempfile.mkdtemp()) / "pairs"
write_synthetic_pairs(pairs, n=20, seed=0, fault_rate=0.3)
result = batch_evaluate(pairs, workers=4)
print(result.markdown())
agg = result.aggregate()
print(f"pass rate {agg['pass_rate']:.2f}, mean entity overlap {agg['entity_overlap']:.2f}, "
      f"mean direction agreement {agg['direction_agreement']:.2f}")
print("pairs written to", pairs)
