import pytest

from csprop.parser import ExpressionError, parse_hamiltonian
from csprop.symbols import OperatorPoly, ScaleParams, q_symbol

SCALES = ScaleParams()


def test_parse_number_operator():
    op = parse_hamiltonian("ad*a", SCALES)
    assert op.terms == {(1, 1): 1.0 + 0j}


def test_parse_antinormal_product_picks_up_commutator():
    op = parse_hamiltonian("a*ad", SCALES)
    assert op.terms == {(1, 1): 1.0 + 0j, (0, 0): 1.0 + 0j}


def test_parse_respects_operator_order():
    qp = parse_hamiltonian("q*p", SCALES)
    pq = parse_hamiltonian("p*q", SCALES)
    comm = qp - pq
    # [q, p] = i hbar
    assert set(comm.terms) == {(0, 0)}
    assert comm.terms[(0, 0)] == pytest.approx(1j * SCALES.hbar)


def test_parse_quartic_matches_manual_construction():
    op = parse_hamiltonian("0.5*p^2 + 0.5*q^2 + q^4", SCALES)
    a = OperatorPoly({(0, 1): 1.0}, SCALES)
    ad = OperatorPoly({(1, 0): 1.0}, SCALES)
    import math

    root2 = math.sqrt(2.0)
    q = (a + ad).scaled(SCALES.b / root2)
    p = (a - ad).scaled(-1j * SCALES.c / root2)
    manual = (p * p).scaled(0.5) + (q * q).scaled(0.5) + q.power(4)
    assert set(op.terms) == set(manual.terms)
    for key, c in manual.terms.items():
        assert op.terms[key] == pytest.approx(c, abs=1e-12)


def test_parse_oscillator_becomes_number_operator_plus_half():
    op = parse_hamiltonian("0.5*p^2 + 0.5*q^2", SCALES)
    assert set(op.terms) == {(1, 1), (0, 0)}
    assert op.terms[(1, 1)] == pytest.approx(1.0)
    assert op.terms[(0, 0)] == pytest.approx(0.5)


def test_parse_imaginary_coefficient():
    op = parse_hamiltonian("2i*ad - 2i*a", SCALES)
    assert op.terms[(1, 0)] == pytest.approx(2j)
    assert op.terms[(0, 1)] == pytest.approx(-2j)
    # proportional to the momentum quadrature, hence Hermitian
    assert op.is_hermitian() is True
    assert parse_hamiltonian("2i*ad + 2i*a", SCALES).is_hermitian() is False


def test_parse_mixing_qp_and_ladder_tokens():
    op = parse_hamiltonian("q^2 + ad*a", SCALES)
    assert op.terms[(1, 1)] == pytest.approx(2.0)


def test_parse_leading_minus():
    op = parse_hamiltonian("-q^2", SCALES)
    assert op.terms[(2, 0)] == pytest.approx(-0.5)


def test_parse_scientific_notation_and_whitespace():
    op = parse_hamiltonian("  1e-2 * ad * a  ", SCALES)
    assert op.terms == {(1, 1): 0.01 + 0j}


def test_parse_power_zero_is_identity():
    op = parse_hamiltonian("q^0", SCALES)
    assert op.terms == {(0, 0): 1.0 + 0j}


def test_empty_input_is_error():
    with pytest.raises(ExpressionError):
        parse_hamiltonian("", SCALES)
    with pytest.raises(ExpressionError):
        parse_hamiltonian("   ", SCALES)


def test_syntax_error_reports_position():
    with pytest.raises(ExpressionError) as err:
        parse_hamiltonian("q + #", SCALES)
    assert err.value.position == 4


def test_trailing_garbage_is_error():
    with pytest.raises(ExpressionError):
        parse_hamiltonian("q q", SCALES)


def test_bad_exponent_is_error():
    with pytest.raises(ExpressionError):
        parse_hamiltonian("q^1.5", SCALES)
    with pytest.raises(ExpressionError):
        parse_hamiltonian("q^a", SCALES)


def test_unknown_token_is_error():
    with pytest.raises(ExpressionError):
        parse_hamiltonian("x^2", SCALES)


def test_parsed_quartic_q_symbol_matches_display():
    # end-to-end: parse -> q_symbol reproduces the quartic Q display
    op = parse_hamiltonian("0.5*p^2 + 0.5*q^2 + q^4", SCALES)
    qp = q_symbol(op).to_qp()
    assert qp[(2, 0)] == pytest.approx(3.5, abs=1e-12)
    assert qp[(0, 0)] == pytest.approx(1.25, abs=1e-12)
