import math

import pytest

from cfmobility.errors import NumericError
from cfmobility.quadrature import adaptive_simpson


def test_polynomial_exact():
    # Simpson is exact for cubics
    assert adaptive_simpson(lambda x: x ** 3 - 2 * x, 0.0, 2.0) == pytest.approx(0.0, abs=1e-12)


def test_known_integrals():
    assert adaptive_simpson(math.sin, 0.0, math.pi, tol=1e-12) == pytest.approx(2.0, abs=1e-10)
    assert adaptive_simpson(lambda x: math.exp(-x * x), -8.0, 8.0, tol=1e-12) == pytest.approx(
        math.sqrt(math.pi), rel=1e-10)


def test_reversed_and_empty_interval():
    assert adaptive_simpson(math.sin, math.pi, 0.0, tol=1e-12) == pytest.approx(-2.0, abs=1e-10)
    assert adaptive_simpson(math.sin, 1.0, 1.0) == 0.0


def test_kinked_integrand():
    # |x - 1/3| over [0, 1]: area = (1/9 + 4/9) / 2
    val = adaptive_simpson(lambda x: abs(x - 1.0 / 3.0), 0.0, 1.0, tol=1e-10)
    assert val == pytest.approx(5.0 / 18.0, abs=1e-9)


def test_nonconvergence_raises():
    with pytest.raises(NumericError):
        adaptive_simpson(lambda x: abs(x - 1.0 / 3.0) ** 0.2, 0.0, 1.0,
                         tol=1e-14, max_depth=3)
