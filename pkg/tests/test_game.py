import itertools
import math

import numpy as np
import pytest

from shapax.coalition import Coalition, Partition
from shapax.data import Dataset
from shapax.errors import ContractError, LimitError, ModelDomainError
from shapax.game import (
    MarginalGame,
    compose,
    empirical_marginal_game,
    exact_coalitional_value,
    exact_linear_value,
    exact_quotient_value,
    exact_two_step,
)
from shapax.model import parse_expression
from shapax.weights import CoalitionalWeightScheme, WeightScheme

shapley = WeightScheme.shapley()
banzhaf = WeightScheme.banzhaf()


def _brute_force_game(model, data, x_star, S):
    return np.mean([float(model(compose(x_star, x, S))) for x in data.rows])


def test_compose():
    S = Coalition.from_indices([1], 3)
    assert compose([1.0, 2.0, 3.0], [7.0, 8.0, 9.0], S).tolist() == [7.0, 2.0, 9.0]
    with pytest.raises(ContractError):
        compose([1.0, 2.0], [7.0, 8.0, 9.0], S)


def test_game_matches_brute_force(interaction, background, x_star):
    game = MarginalGame(interaction, background, x_star)
    for bits in range(8):
        S = Coalition(bits, 3)
        assert game(S) == pytest.approx(
            _brute_force_game(interaction, background, x_star, S), abs=1e-12
        )


def test_game_examples():
    f = parse_expression("x1 + x2", 2)
    data = Dataset([[0.0, 0.0], [2.0, 2.0]])
    x_star = np.array([5.0, 5.0])
    assert empirical_marginal_game(Coalition.empty(2), x_star, data, f) == 2.0
    assert empirical_marginal_game(Coalition.full(2), x_star, data, f) == 10.0


def test_game_chunking_and_threads(interaction, background, x_star):
    reference = MarginalGame(interaction, background, x_star).table()
    serial = MarginalGame(interaction, background, x_star, chunk_points=24).table()
    threaded = MarginalGame(interaction, background, x_star, n_jobs=3, chunk_points=24).table()
    np.testing.assert_array_equal(serial, threaded)
    np.testing.assert_allclose(serial, reference, rtol=0, atol=1e-13)


def test_game_reports_row():
    f = parse_expression("log(x1)", 1)
    data = Dataset([[1.0], [2.0], [-1.0]])
    with pytest.raises(ModelDomainError) as info:
        empirical_marginal_game(Coalition.empty(1), np.array([1.0]), data, f)
    assert info.value.index == 2


def test_game_width_mismatch(interaction, background, x_star):
    with pytest.raises(ContractError):
        MarginalGame(interaction, background, x_star)(Coalition.empty(4))
    with pytest.raises(ContractError):
        MarginalGame(interaction, background, x_star[:2])


def test_shapley_additive_model():
    f = parse_expression("x1 + x2", 2)
    data = Dataset([[0.0, 0.0], [2.0, 2.0]])
    result = exact_linear_value(f, data, np.array([5.0, 5.0]), shapley)
    np.testing.assert_allclose(result.values, [4.0, 4.0], atol=1e-12)
    assert result.kind == "shapley"
    assert result.mode == "exact"


def test_shapley_interaction_splits_evenly():
    f = parse_expression("x1 * x2", 2)
    data = Dataset([[0.0, 0.0]])
    result = exact_linear_value(f, data, np.array([1.0, 1.0]), shapley)
    np.testing.assert_allclose(result.values, [0.5, 0.5], atol=1e-15)


def _permutation_shapley(game, n):
    values = np.zeros(n)
    for order in itertools.permutations(range(n)):
        S = Coalition.empty(n)
        for i in order:
            values[i] += game(S.insert(i)) - game(S)
            S = S.insert(i)
    return values / math.factorial(n)


def test_shapley_matches_permutation_definition(logistic, background4):
    x_star = np.array([0.5, -1.0, 0.3, 2.0])
    game = MarginalGame(logistic, background4, x_star)
    result = exact_linear_value(logistic, background4, x_star, shapley)
    np.testing.assert_allclose(result.values, _permutation_shapley(game, 4), atol=1e-12)


@pytest.mark.parametrize("n", [2, 4, 6])
def test_efficiency(rng, n):
    f = parse_expression(" + ".join(f"x{k} * x{k % n + 1}" for k in range(1, n + 1)), n)
    data = Dataset(rng.normal(size=(8, n)))
    x_star = rng.normal(size=n)
    game = MarginalGame(f, data, x_star)
    result = exact_linear_value(f, data, x_star, shapley)
    gain = game(Coalition.full(n)) - game(Coalition.empty(n))
    assert math.fsum(result.values) == pytest.approx(gain, abs=1e-10)


def test_null_player_is_exactly_zero(rng):
    f = parse_expression("exp(x1) * x3", 4)
    data = Dataset(rng.normal(size=(6, 4)))
    x_star = rng.normal(size=4)
    for scheme in (shapley, banzhaf):
        values = exact_linear_value(f, data, x_star, scheme).values
        assert values[1] == 0.0
        assert values[3] == 0.0


def test_symmetry_under_feature_permutation(logistic, background4):
    order = [2, 0, 3, 1]
    x_star = np.array([0.5, -1.0, 0.3, 2.0])
    original = exact_linear_value(logistic, background4, x_star, shapley).values
    # g(y) = f(y arranged back into the original order)
    inverse = np.argsort(order)
    source = "2 / (1 + exp(-(x{} - x{}*x{} + 0.5*x{})))".format(*(inverse[[0, 1, 2, 3]] + 1))
    g = parse_expression(source, 4)
    permuted = exact_linear_value(g, background4.permuted(order), x_star[order], shapley).values
    np.testing.assert_allclose(permuted, original[order], atol=1e-12)


def test_banzhaf_of_constant_is_zero():
    f = parse_expression("3", 3)
    data = Dataset(np.ones((2, 3)))
    result = exact_linear_value(f, data, np.zeros(3), banzhaf)
    np.testing.assert_array_equal(result.values, np.zeros(3))


def test_quotient_with_singletons_is_linear(logistic, background4):
    x_star = np.array([0.5, -1.0, 0.3, 2.0])
    for scheme in (shapley, banzhaf):
        linear = exact_linear_value(logistic, background4, x_star, scheme).values
        quotient = exact_quotient_value(
            logistic, background4, x_star, Partition.singletons(4), scheme
        ).values
        np.testing.assert_allclose(quotient, linear, atol=1e-12)


def test_quotient_with_one_group():
    f = parse_expression("x1 * x2 + x3", 3)
    data = Dataset([[0.0, 1.0, -1.0], [2.0, 0.5, 1.0]])
    x_star = np.array([1.0, 2.0, 3.0])
    game = MarginalGame(f, data, x_star)
    result = exact_quotient_value(f, data, x_star, Partition.trivial(3), shapley)
    gain = game(Coalition.full(3)) - game(Coalition.empty(3))
    assert result.values[0] == pytest.approx(gain, abs=1e-12)
    assert result.names == ("x1+x2+x3",)
    assert result.kind == "quotient-shapley"


def test_quotient_additive_model():
    f = parse_expression("x1 + x2 + x3", 3)
    data = Dataset([[0.0, 0.0, 0.0]])
    partition = Partition.from_lists([[0, 1], [2]], 3)
    result = exact_quotient_value(f, data, np.ones(3), partition, shapley)
    np.testing.assert_allclose(result.values, [2.0, 1.0], atol=1e-15)


def test_owen_with_singletons_is_shapley(logistic, background4):
    x_star = np.array([0.5, -1.0, 0.3, 2.0])
    expected = exact_linear_value(logistic, background4, x_star, shapley).values
    cw = CoalitionalWeightScheme.owen()
    for partition in (Partition.singletons(4), Partition.trivial(4)):
        owen = exact_coalitional_value(logistic, background4, x_star, partition, cw).values
        np.testing.assert_allclose(owen, expected, atol=1e-12)


def test_banzhaf_owen_with_singletons_is_banzhaf(logistic, background4):
    x_star = np.array([0.5, -1.0, 0.3, 2.0])
    expected = exact_linear_value(logistic, background4, x_star, banzhaf).values
    result = exact_coalitional_value(
        logistic, background4, x_star, Partition.singletons(4), CoalitionalWeightScheme.banzhaf_owen()
    )
    np.testing.assert_allclose(result.values, expected, atol=1e-12)
    assert result.kind == "banzhaf-owen"


def test_owen_sums_to_quotient(logistic, background4, grouping4):
    x_star = np.array([0.5, -1.0, 0.3, 2.0])
    owen = exact_coalitional_value(
        logistic, background4, x_star, grouping4, CoalitionalWeightScheme.owen()
    ).values
    quotient = exact_quotient_value(logistic, background4, x_star, grouping4, shapley).values
    for j, group in enumerate(grouping4.groups):
        assert sum(owen[list(group.indices())]) == pytest.approx(quotient[j], abs=1e-12)


def test_owen_matches_composite_weights(logistic, background4, grouping4):
    x_star = np.array([0.5, -1.0, 0.3, 2.0])
    cw = CoalitionalWeightScheme.owen()
    game = MarginalGame(logistic, background4, x_star)
    result = exact_coalitional_value(logistic, background4, x_star, grouping4, cw).values
    for i in range(4):
        expected = math.fsum(
            cw.composite(grouping4, i, Coalition(b, 4))
            * (game(Coalition(b, 4).insert(i)) - game(Coalition(b, 4)))
            for b in range(16)
            if not b >> i & 1
        )
        assert result[i] == pytest.approx(expected, abs=1e-12)


def test_two_step_with_singletons_is_quotient(logistic, background4):
    x_star = np.array([0.5, -1.0, 0.3, 2.0])
    singletons = Partition.singletons(4)
    quotient = exact_quotient_value(logistic, background4, x_star, singletons, shapley).values
    for centered in (True, False):
        two_step = exact_two_step(logistic, background4, x_star, singletons, centered).values
        np.testing.assert_allclose(two_step, quotient, atol=1e-12)


def test_two_step_constant_model():
    f = parse_expression("2.5", 3)
    data = Dataset(np.zeros((2, 3)))
    partition = Partition.from_lists([[0, 1], [2]], 3)
    verbatim = exact_two_step(f, data, np.ones(3), partition).values
    np.testing.assert_allclose(verbatim, [-1.25, -1.25, 0.0], atol=1e-15)
    centered = exact_two_step(f, data, np.ones(3), partition, centered=True).values
    np.testing.assert_array_equal(centered, np.zeros(3))


def test_two_step_constant_model_one_group():
    f = parse_expression("3", 2)
    data = Dataset([[0.0, 0.0], [1.0, 1.0]])
    result = exact_two_step(f, data, [1.0, 1.0], Partition.trivial(2))
    np.testing.assert_allclose(result.values, [-1.5, -1.5], atol=1e-15)


def test_two_step_hand_computed():
    # single background row z = (2, 1, 0) explaining x* = (1, 3, 4):
    # v({}) = 3, v({1}) = 2, v({2}) = 9, v({1,2}) = 6, v({3}) = 7, v(N) = 10
    # quotient values 3 and 4, within-group values -2 and 5
    f = parse_expression("x1*x2 + x2 + x3", 3)
    data = Dataset([[2.0, 1.0, 0.0]])
    partition = Partition.from_lists([[0, 1], [2]], 3)
    x_star = [1.0, 3.0, 4.0]
    verbatim = exact_two_step(f, data, x_star, partition).values
    np.testing.assert_allclose(verbatim, [-3.5, 3.5, 4.0], atol=1e-12)
    centered = exact_two_step(f, data, x_star, partition, centered=True).values
    np.testing.assert_allclose(centered, [-2.0, 5.0, 4.0], atol=1e-12)


def test_two_step_is_efficient_within_groups(logistic, background4, grouping4):
    x_star = np.array([0.5, -1.0, 0.3, 2.0])
    two_step = exact_two_step(logistic, background4, x_star, grouping4, centered=True).values
    quotient = exact_quotient_value(logistic, background4, x_star, grouping4, shapley).values
    for j, group in enumerate(grouping4.groups):
        assert sum(two_step[list(group.indices())]) == pytest.approx(quotient[j], abs=1e-12)


def test_two_step_verbatim_group_sums(logistic, background4, grouping4):
    x_star = np.array([0.5, -1.0, 0.3, 2.0])
    empty = MarginalGame(logistic, background4, x_star)(Coalition.empty(4))
    two_step = exact_two_step(logistic, background4, x_star, grouping4).values
    quotient = exact_quotient_value(logistic, background4, x_star, grouping4, shapley).values
    for j, group in enumerate(grouping4.groups):
        expected = quotient[j] - empty if len(group) > 1 else quotient[j]
        assert sum(two_step[list(group.indices())]) == pytest.approx(expected, abs=1e-12)


def test_limits(rng):
    f = parse_expression("x1", 21)
    data = Dataset(rng.normal(size=(2, 21)))
    with pytest.raises(LimitError, match="2\\^21"):
        exact_linear_value(f, data, np.zeros(21), shapley)
    small = parse_expression("x1 + x2 + x3", 3)
    with pytest.raises(LimitError):
        exact_linear_value(small, Dataset(np.zeros((1, 3))), np.zeros(3), shapley, limit=2)


def test_partition_width_mismatch(interaction, background, x_star):
    with pytest.raises(ContractError):
        exact_quotient_value(interaction, background, x_star, Partition.singletons(4), shapley)


def test_records_are_one_based(interaction, background, x_star):
    records = exact_linear_value(interaction, background, x_star, shapley).to_records()
    assert [r["index"] for r in records] == [1, 2, 3]
    assert records[0]["name"] == "x1"
    assert records[0]["stderr"] == 0.0
    assert records[0]["game"] == "empirical-marginal"


@pytest.mark.slow
def test_variance_shrinks_with_background_size(logistic):
    rng = np.random.default_rng(7)
    x_star = np.array([0.5, -1.0, 0.3, 2.0])

    def spread(size):
        values = [
            exact_linear_value(logistic, Dataset(rng.normal(size=(size, 4))), x_star, shapley)[0]
            for _ in range(200)
        ]
        return np.var(values, ddof=1)

    assert 0.15 <= spread(400) / spread(100) <= 0.4
