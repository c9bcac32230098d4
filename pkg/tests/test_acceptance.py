"""End-to-end acceptance criteria, one test and one printed verdict line each.

Run with ``pytest tests/test_acceptance.py -v -s`` to see the verdict
lines; each test fails if its criterion misses the pinned tolerance.
"""

import os

from sobolevkit import acceptance


def _seed() -> int:
    return int(os.environ.get("SOBOLEVKIT_SEED", acceptance.DEFAULT_SEED))


def _check(fn, *args) -> acceptance.CriterionResult:
    result = fn(*args)
    status = "PASS" if result.passed else "FAIL"
    print(f"[{status}] criterion {result.index} {result.name}: {result.detail}")
    assert result.passed, f"{result.name}: {result.detail}"
    return result


def test_mollifier_unit_properties():
    _check(acceptance.criterion_mollifier_unit)


def test_approximate_identity():
    _check(acceptance.criterion_approximate_identity)


def test_affine_exactness():
    _check(acceptance.criterion_affine_exactness)


def test_commutation_residual():
    _check(acceptance.criterion_commutation)


def test_weak_derivative_verification():
    _check(acceptance.criterion_weak_verification)


def test_sobolev_norm_values():
    _check(acceptance.criterion_sobolev_norm)


def test_kernel_composition():
    _check(acceptance.criterion_compose)


def test_newton_chord():
    _check(acceptance.criterion_newton)


def test_invertibility_after_smoothing():
    _check(acceptance.criterion_invertibility)


def test_exponential_flow_group_law():
    _check(acceptance.criterion_flow, _seed())


def test_distributional_shadow():
    _check(acceptance.criterion_shadow)


def test_expression_parser():
    _check(acceptance.criterion_parser, _seed())
