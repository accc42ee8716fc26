import pytest

from app.errors import MalformedTicket
from app.logic.reproduction import parse_ticket
from app.models import TestId


def test_parse_ticket_splits_from_the_right():
    test = parse_ticket("//pkg/payments:unit/TestCharge/refund path")
    assert test == TestId(target="//pkg/payments:unit", func="TestCharge", case="refund path")


def test_parse_ticket_allows_empty_case():
    test = parse_ticket("example.com/goshop/program/TestAddProgram/")
    assert test.target == "example.com/goshop/program"
    assert test.func == "TestAddProgram"
    assert test.case == ""
    assert test.run_name == "TestAddProgram"


@pytest.mark.parametrize("raw", ["", "   ", "TestOnly", "pkg/TestX", "/TestX/case", "pkg//case"])
def test_parse_ticket_rejects_malformed(raw):
    with pytest.raises(MalformedTicket):
        parse_ticket(raw)


def test_run_name_normalises_whitespace():
    test = TestId(target="pkg", func="TestCart", case="handles empty\tcart")
    assert test.go_case == "handles_empty_cart"
    assert test.run_name == "TestCart/handles_empty_cart"


def test_slug_is_filesystem_safe():
    slug = TestId(target="//pkg/payments:unit", func="TestCharge", case="refund path").slug()
    assert slug == "pkg_payments_unit_TestCharge_refund_path"
    assert "/" not in slug and " " not in slug
