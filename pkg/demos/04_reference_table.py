"""Aggregate a published per-pair metric table and inspect its summary rows."""

from pathlib import Path

from hsiband.evalmetrics import aggregate_report, read_records_csv

rows = Path(__file__).resolve().parents[1] / "tests" / "data" / "reference_vru_rows.csv"
rgb, comp = read_records_csv(rows)
rep = aggregate_report(rgb, comp)
print(len(rgb), "pairs")
for m in ("d2", "sam", "t2", "de"):
    print(f"{m:>3}  {rep.averages['rgb'][m]:9.4f} -> {rep.averages['composite'][m]:9.4f}   {rep.improvement_pct[m]:8.2f}%")

# the RGB dE column has one entry with an extra digit (17.707); 17.07 brings
# the average back to 12.37
odd = next(r for r in rgb if r.de == 17.707)
print("odd row:", odd.pair)
odd.de = 17.07
rep2 = aggregate_report(rgb, comp)
print(f" de  {rep2.averages['rgb']['de']:9.4f} -> {rep2.averages['composite']['de']:9.4f}   {rep2.improvement_pct['de']:8.2f}%")
