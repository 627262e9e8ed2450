import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gpdeplan.reports import TABLES, emit_reports, read_table, read_table_json, write_table

cell = st.one_of(
    st.integers(-10**6, 10**6),
    st.floats(allow_nan=False, width=64),
    st.text(alphabet="abcxyz_-=.", min_size=1, max_size=8).filter(lambda s: not _numeric(s)),
)


def _numeric(s):
    try:
        float(s)
        return True
    except ValueError:
        return False


@given(st.lists(st.tuples(cell, cell, cell), max_size=8))
@settings(max_examples=60, deadline=None)
def test_table_round_trip(tmp_path_factory, rows):
    cols = ("a", "b", "c")
    dicts = [dict(zip(cols, r)) for r in rows]
    stem = tmp_path_factory.mktemp("t") / "T"
    tsv, js = write_table(dicts, cols, stem)
    for reader, path in ((read_table, tsv), (read_table_json, js)):
        got_cols, got = reader(path)
        assert got_cols == list(cols)
        assert got == dicts


def test_empty_results_write_header_only(tmp_path):
    paths = emit_reports(tmp_path, {name: [] for name in TABLES})
    assert len(paths) == 2 * len(TABLES)
    for name, (stem, cols) in TABLES.items():
        text = (tmp_path / f"{stem}.tsv").read_text()
        assert text == "\t".join(cols) + "\n"
        assert read_table_json(tmp_path / f"{stem}.json") == (list(cols), [])


def test_stems_cover_appendix_tables():
    stems = {stem.split("_")[0] for stem, _ in TABLES.values()}
    assert {f"A{i}" for i in range(1, 11)} <= stems
    assert TABLES["rollout_grid"][1][:6] == ("layout", "r", "lf", "seeds", "harmonic_success", "amle_success")


def test_unknown_table_and_unwritable(tmp_path):
    with pytest.raises(KeyError):
        emit_reports(tmp_path, {"nope": []})
    blocker = tmp_path / "file"
    blocker.write_text("x")
    with pytest.raises(OSError):
        emit_reports(blocker / "sub", {"lift": []})


def test_booleans_and_infinities(tmp_path):
    rows = [{"x": True, "y": math.inf}]
    tsv, js = write_table(rows, ("x", "y"), tmp_path / "B")
    assert read_table(tsv)[1] == [{"x": 1, "y": math.inf}]
    assert read_table_json(js)[1] == [{"x": 1, "y": math.inf}]
