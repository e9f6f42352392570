"""
Building instances and moving them through MPS files
====================================================

"""

import numpy as np

from rapidbnb import classify, from_inequalities
from rapidbnb.mps import parse_mps, write_mps

# A tiny production-mix model: two integer activities, one continuous
# buffer.  Internally every row is kept in <= normal form; >= rows are
# negated on the way in and == rows become two opposing halves.
inst = from_inequalities(
    objective=[-3.0, -2.0, 0.5],
    constraints=[
        ((0, 1), (2.0, 1.0), "<=", 10.0),      # machine hours
        ((0, 1), (1.0, 3.0), "<=", 15.0),      # raw material
        ((0, 1, 2), (1.0, 1.0, -1.0), "==", 0.0),   # buffer balance
    ],
    lower=[0.0, 0.0, 0.0],
    upper=[6.0, 6.0, 12.0],
    integer_set=[0, 1],
    names=["lathe", "mill", "store"],
    name="MIX")

print("class:", classify(inst).name)
print("rows in normal form:")
for row in inst.rows:
    print("  ", row)

# Round trip through the interchange format.
write_mps(inst, "/tmp/mix.mps")
back, diags = parse_mps("/tmp/mix.mps")
print("reparsed", diags.num_cols_read, "columns,", diags.num_rows_read,
      "rows, warnings:", diags.warnings or "none")
print("objective survived:", np.array_equal(back.c, inst.c))

# The parser also takes raw text, which is handy for quick experiments.
text = """NAME SCRATCH
ROWS
 N Z
 G PICK
COLUMNS
    MARKER                 'MARKER' 'INTORG'
 A Z 1.0 PICK 1.0
 B Z 1.0 PICK 1.0
    MARKER                 'MARKER' 'INTEND'
RHS
 R PICK 1.0
ENDATA
"""
scratch, _ = parse_mps(text)
print("scratch instance:", scratch.num_vars, "binaries,",
      classify(scratch).name)
