"""MPS reader/writer: golden files, diagnostics, errors, round trips."""

import io
import pathlib

import numpy as np
import pytest

from rapidbnb import ProblemClass, classify, parse_mps, solve, write_mps
from rapidbnb.mps import (
    MALFORMED_SECTION,
    NON_NUMERIC_FIELD,
    UNKNOWN_ROW_REFERENCE,
    MpsParseError,
)

import oracles

DATA = pathlib.Path(__file__).parent / "data"


class TestGoldenFiles:
    def test_toy_mix(self):
        inst, diag = parse_mps(DATA / "toy_mix.mps")
        assert inst.name == "toy_mix"
        assert inst.var_names == ("x", "y", "z")
        assert list(inst.c) == [2.0, -1.0, 0.0]
        assert list(inst.integer_mask) == [True, False, False]
        assert list(inst.lower) == [0.0, -5.0, 1.0]
        assert list(inst.upper) == [10.0, 5.0, 1.0]
        # CAP with RANGES 4 -> pair, DEMAND >= -> negated, BALANCE == -> pair
        rows = [(r.cols, r.coefs, r.rhs) for r in inst.rows]
        assert rows == [
            ((0, 1), (3.0, 2.0), 12.0),
            ((0, 1), (-3.0, -2.0), -8.0),
            ((0, 2), (-1.0, -2.0), -2.0),
            ((1, 2), (1.0, 1.0), 4.0),
            ((1, 2), (-1.0, -1.0), -4.0),
        ]
        assert classify(inst) is ProblemClass.MIP
        assert diag.num_rows_read == 3
        assert diag.num_cols_read == 3
        assert diag.warnings == []

    def test_cover3_integer_default_bound(self):
        inst, _ = parse_mps(DATA / "cover3.mps")
        # INTORG columns without BOUNDS entries default to [0, 1]
        assert list(inst.lower) == [0.0, 0.0, 0.0]
        assert list(inst.upper) == [1.0, 1.0, 1.0]
        assert classify(inst) is ProblemClass.BP
        res = solve(inst)
        assert res.status == "optimal"
        assert res.objective == 1.0
        assert list(res.solution) == [0.0, 1.0, 0.0]


GOOD_MIN = """\
NAME T
ROWS
 N OBJ
 L R1
COLUMNS
 x OBJ 1 R1 1
RHS
 RHS R1 4
ENDATA
"""


class TestDiagnostics:
    def test_duplicate_entry_summed(self):
        text = GOOD_MIN.replace(" x OBJ 1 R1 1", " x OBJ 1 R1 1\n x R1 2")
        inst, diag = parse_mps(text)
        assert inst.rows[0].coefs == (3.0,)
        assert any("summed" in w for w in diag.warnings)

    def test_objsense_max_negated(self):
        text = "OBJSENSE\n MAX\n" + GOOD_MIN
        inst, diag = parse_mps(text)
        assert inst.c[0] == -1.0
        assert any("negated" in w for w in diag.warnings)

    def test_objective_rhs_ignored(self):
        text = GOOD_MIN.replace(" RHS R1 4", " RHS R1 4 OBJ 7")
        inst, diag = parse_mps(text)
        assert any("constant term" in w for w in diag.warnings)

    def test_missing_objective_row_warns(self):
        text = GOOD_MIN.replace(" N OBJ\n", "").replace(" x OBJ 1 R1 1",
                                                         " x R1 1")
        inst, diag = parse_mps(text)
        assert list(inst.c) == [0.0]
        assert any("objective defaults to zero" in w for w in diag.warnings)


class TestParseErrors:
    def test_missing_endata(self):
        with pytest.raises(MpsParseError) as err:
            parse_mps(GOOD_MIN.replace("ENDATA\n", ""))
        assert err.value.code == MALFORMED_SECTION

    def test_unknown_row_reference(self):
        with pytest.raises(MpsParseError) as err:
            parse_mps(GOOD_MIN.replace(" x OBJ 1 R1 1", " x OBJ 1 R9 1"))
        assert err.value.code == UNKNOWN_ROW_REFERENCE
        assert err.value.line_no == 6

    def test_non_numeric_field(self):
        with pytest.raises(MpsParseError) as err:
            parse_mps(GOOD_MIN.replace(" RHS R1 4", " RHS R1 abc"))
        assert err.value.code == NON_NUMERIC_FIELD

    def test_unknown_bound_type(self):
        text = GOOD_MIN.replace("ENDATA", "BOUNDS\n XX BND x 1\nENDATA")
        with pytest.raises(MpsParseError) as err:
            parse_mps(text)
        assert err.value.code == MALFORMED_SECTION

    def test_bound_on_unknown_column(self):
        text = GOOD_MIN.replace("ENDATA", "BOUNDS\n UP BND q 1\nENDATA")
        with pytest.raises(MpsParseError) as err:
            parse_mps(text)
        assert err.value.code == MALFORMED_SECTION

    def test_ranges_unknown_row(self):
        text = GOOD_MIN.replace("ENDATA", "RANGES\n RNG R9 2\nENDATA")
        with pytest.raises(MpsParseError) as err:
            parse_mps(text)
        assert err.value.code == UNKNOWN_ROW_REFERENCE


class TestRoundTrip:
    def test_random_instances_survive(self):
        rng = np.random.default_rng(7)
        for _ in range(25):
            inst = oracles.random_instance(rng)
            buf = io.StringIO()
            write_mps(inst, buf)
            back, diag = parse_mps(buf.getvalue())
            assert diag.warnings == []
            assert back.num_vars == inst.num_vars
            assert back.num_rows == inst.num_rows
            assert list(back.c) == list(inst.c)
            assert list(back.lower) == list(inst.lower)
            assert list(back.upper) == list(inst.upper)
            assert list(back.integer_mask) == list(inst.integer_mask)
            for mine, theirs in zip(inst.rows, back.rows):
                assert mine.cols == theirs.cols
                assert mine.coefs == theirs.coefs
                assert mine.rhs == theirs.rhs

    def test_write_to_path(self, tmp_path):
        inst, _ = parse_mps(DATA / "cover3.mps")
        out = tmp_path / "copy.mps"
        write_mps(inst, out)
        again, _ = parse_mps(out)
        assert again.num_rows == inst.num_rows
