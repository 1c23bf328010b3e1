"""From the bundled order-intake deltas to the oracle's reading of them.

Run: python3 demos/01_table_to_analysis.py
"""

from trendscribe import analyze, baseline_summary, load_example_table, render_prompt_table

table = load_example_table()
print(f"{len(table)} rows, net change {table.net_total:,.0f}, absolute movement {table.abs_total:,.0f}\n")

# This rendering is what every workflow injects into its prompts.
print(render_prompt_table(table))

analysis = analyze(table)
print("\noverall direction:", analysis.overall_direction)
print("main growth driver:", analysis.main_driver)
print("main detractor:   ", analysis.main_detractor)
print("moving the same way everywhere:", [(c.product_line, c.direction) for c in analysis.consistent_lines])
print("major cells:", [(r.product_line, r.region) for r in analysis.ranked_rows if r.impact == "major"])

# The reference commentary a faultless writer should produce.
print("\nbaseline:", baseline_summary(analysis))
