import math

import numpy as np
import pytest

from shapax.coalition import Coalition, Partition
from shapax.errors import ContractError, LimitError
from shapax.util import all_subsets
from shapax.weights import CoalitionalWeightScheme, WeightScheme, size_weights, weight


def test_shapley_weights():
    shapley = WeightScheme.shapley()
    assert weight(shapley, 0, 3) == pytest.approx(1 / 3, abs=1e-15)
    assert weight(shapley, 1, 3) == pytest.approx(1 / 6, abs=1e-15)
    assert weight(shapley, 2, 3) == pytest.approx(1 / 3, abs=1e-15)
    assert weight(shapley, 0, 1) == 1.0


def test_banzhaf_weights():
    assert weight(WeightScheme.banzhaf(), 3, 4) == 0.125


@pytest.mark.parametrize("s, n", [(3, 3), (-1, 3), (0, 0)])
def test_weight_rejects_sizes(s, n):
    with pytest.raises(ContractError):
        weight(WeightScheme.shapley(), s, n)


@pytest.mark.parametrize("n", [1, 2, 5, 12, 20, 30, 64])
@pytest.mark.parametrize("scheme", [WeightScheme.shapley(), WeightScheme.banzhaf()])
def test_normalization(scheme, n):
    total = math.fsum(math.comb(n - 1, s) * scheme.weight(s, n) for s in range(n))
    assert total == pytest.approx(1.0, abs=1e-12)
    scheme.check_normalized(n)


def test_large_shapley_weights_are_finite():
    assert 0.0 < weight(WeightScheme.shapley(), 32, 64) < 1e-18


def test_table_from_sizes():
    scheme = WeightScheme.from_sizes(3, {0: 1 / 3, 1: 1 / 6, 2: 1 / 3})
    np.testing.assert_allclose(size_weights(scheme, 3), size_weights(WeightScheme.shapley(), 3))
    with pytest.raises(ContractError):
        scheme.weight(0, 4)


def test_table_must_be_normalized():
    with pytest.raises(ContractError, match="sum to"):
        WeightScheme.from_sizes(3, {0: 0.5, 1: 0.5, 2: 0.5})
    with pytest.raises(ContractError, match="nonnegative"):
        WeightScheme.from_sizes(2, {0: 1.5, 1: -0.5})


def test_table_limit():
    with pytest.raises(LimitError):
        WeightScheme.from_sizes(21, {0: 1.0})


def test_coalition_keyed_table():
    # player 0 always sees the empty coalition, player 1 the coalition {0}
    scheme = WeightScheme.from_coalitions(2, {(0, 0): 1.0, (1, 1): 1.0})
    assert scheme.by_coalition
    assert scheme.coefficient(0, Coalition.empty(2)) == 1.0
    assert scheme.coefficient(1, Coalition.empty(2)) == 0.0
    assert scheme.max_weight(2, 1) == 1.0
    with pytest.raises(ContractError):
        scheme.weight(0, 2)


def test_coefficient_rejects_member():
    with pytest.raises(ContractError):
        WeightScheme.shapley().coefficient(0, Coalition.from_indices([0], 2))


def test_coefficients_vectorized():
    scheme = WeightScheme.shapley()
    bits = np.array([0, 2, 4, 6], dtype=np.uint64)
    expected = [scheme.coefficient(0, Coalition(int(b), 3)) for b in bits]
    np.testing.assert_allclose(scheme.coefficients(0, bits, 3), expected)


def test_max_weight():
    assert WeightScheme.shapley().max_weight(5) == pytest.approx(0.2)
    assert WeightScheme.banzhaf().max_weight(5) == 1 / 16


@pytest.mark.parametrize(
    "cw", [CoalitionalWeightScheme.owen(), CoalitionalWeightScheme.banzhaf_owen()]
)
def test_composite_weights_sum_to_one(cw):
    partition = Partition.from_lists([[0, 1], [2], [3, 4]], 5)
    for i in range(5):
        total = math.fsum(
            cw.composite(partition, i, Coalition(int(b), 5))
            for b in all_subsets(5)
            if not int(b) >> i & 1
        )
        assert total == pytest.approx(1.0, abs=1e-12)


def test_composite_rejects_split_groups():
    partition = Partition.from_lists([[0, 1], [2, 3]], 4)
    cw = CoalitionalWeightScheme.owen()
    assert cw.composite(partition, 0, Coalition.from_indices([2], 4)) == 0.0
    assert cw.composite(partition, 0, Coalition.from_indices([2, 3], 4)) > 0.0
