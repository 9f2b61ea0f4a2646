import logging

import pytest

from reports.builders import Check, at_least, at_most, checks_table, flag, not_applicable, summarize_checks


@pytest.mark.parametrize(
    "value,tolerance,expected",
    [
        (1e-10, 1e-9, True),
        (1e-9, 1e-9, True),
        (2e-9, 1e-9, False),
        (float("nan"), 1e-9, False),
        (float("inf"), 1e-9, False),
    ],
)
def test_at_most(value, tolerance, expected):
    check = at_most("x", value, tolerance)
    assert check.passed is expected
    assert check.comparison == "<="


def test_at_least_fails_on_nan():
    assert at_least("order", 2.01, 1.9).passed
    assert not at_least("order", 1.5, 1.9).passed
    assert not at_least("order", float("nan"), 1.9).passed


def test_flag_values():
    assert flag("ok", True) == Check("ok", 1.0, 1.0, "flag", True)
    assert flag("bad", False).value == 0.0


def test_as_dict_stringifies_non_finite():
    row = at_most("x", float("inf"), 1.0).as_dict()
    assert row["value"] == "inf"
    assert row["tolerance"] == 1.0
    assert row["passed"] is False


def test_checks_table_columns():
    table = checks_table([at_most("a", 0.0, 1.0), flag("b", False)])
    assert list(table.columns) == ["name", "value", "tolerance", "comparison", "passed"]
    assert table["passed"].tolist() == [True, False]
    assert checks_table([]).empty


def test_summarize_checks_logs(caplog):
    checks = [at_most("a", 0.0, 1.0), at_most("b", 2.0, 1.0)]
    with caplog.at_level(logging.INFO):
        summary = summarize_checks(checks)
    assert summary == {"checks": 2, "passed": 1, "failed": 1}
    assert "1 checks failed: ['b']" in caplog.text

    caplog.clear()
    with caplog.at_level(logging.INFO):
        summarize_checks(checks[:1])
    assert "All 1 checks passed" in caplog.text


def test_not_applicable_passes_and_is_marked(caplog):
    check = not_applicable("curvature.sectional_oracle", "every sampled plane was degenerate")
    assert check.passed
    assert check.comparison == "n/a"
    row = check.as_dict()
    assert (row["value"], row["tolerance"]) == ("nan", "nan")
    assert "not applicable" in caplog.text
