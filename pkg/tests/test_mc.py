import numpy as np
import pytest

from shapax.coalition import Partition
from shapax.data import Dataset
from shapax.errors import ContractError, LimitError, ModelDomainError
from shapax.estimate import Estimate
from shapax.game import (
    exact_coalitional_value,
    exact_linear_value,
    exact_quotient_value,
    exact_two_step,
)
from shapax.mc import (
    EmpiricalMarginal,
    TrueMarginal,
    accumulate,
    delta_moments,
    mc_coalitional_value,
    mc_linear_value,
    mc_quotient_value,
    mc_two_step,
    mode_from_name,
    variance_bound_check,
)
from shapax.model import parse_expression
from shapax.weights import CoalitionalWeightScheme, WeightScheme

shapley = WeightScheme.shapley()
banzhaf = WeightScheme.banzhaf()
owen = CoalitionalWeightScheme.owen()
banzhaf_owen = CoalitionalWeightScheme.banzhaf_owen()

X_STAR = np.array([0.5, -1.0, 0.3, 2.0])


class _OrderedEmpirical(EmpiricalMarginal):
    """Empirical sampler visiting the rows in dataset order."""

    def rows(self, key, n_rows):
        return np.arange(self.iterations) % n_rows


def _run_all(model, data, partition, mode, **kwargs):
    return [
        mc_linear_value(model, data, X_STAR, shapley, mode, **kwargs),
        mc_linear_value(model, data, X_STAR, banzhaf, mode, **kwargs),
        mc_quotient_value(model, data, X_STAR, partition, shapley, mode, **kwargs),
        mc_coalitional_value(model, data, X_STAR, partition, owen, mode, **kwargs),
        mc_coalitional_value(model, data, X_STAR, partition, banzhaf_owen, mode, **kwargs),
        mc_two_step(model, data, X_STAR, partition, mode, **kwargs),
    ]


def test_seeded_runs_are_reproducible(logistic, background4, grouping4):
    mode = EmpiricalMarginal(256)
    first = _run_all(logistic, background4, grouping4, mode, seed=7)
    second = _run_all(logistic, background4, grouping4, mode, seed=7)
    for a, b in zip(first, second):
        np.testing.assert_array_equal(a.values, b.values)
        np.testing.assert_array_equal(a.stderr, b.stderr)


def test_seeds_and_replicates_differ(logistic, background4):
    mode = EmpiricalMarginal(256)
    base = mc_linear_value(logistic, background4, X_STAR, shapley, mode, seed=7).values
    other_seed = mc_linear_value(logistic, background4, X_STAR, shapley, mode, seed=8).values
    other_rep = mc_linear_value(
        logistic, background4, X_STAR, shapley, mode, seed=7, replicate=1
    ).values
    assert not np.array_equal(base, other_seed)
    assert not np.array_equal(base, other_rep)


def test_results_do_not_depend_on_threads(logistic, background4, grouping4):
    mode = EmpiricalMarginal(128)
    serial = _run_all(logistic, background4, grouping4, mode, seed=3)
    threaded = _run_all(logistic, background4, grouping4, mode, seed=3, n_jobs=4)
    for a, b in zip(serial, threaded):
        np.testing.assert_array_equal(a.values, b.values)


def test_singleton_quotient_reproduces_linear_draws(logistic, background4):
    singletons = Partition.singletons(4)
    for mode in (EmpiricalMarginal(300), TrueMarginal()):
        for scheme in (shapley, banzhaf):
            linear = mc_linear_value(logistic, background4, X_STAR, scheme, mode, seed=5)
            quotient = mc_quotient_value(
                logistic, background4, X_STAR, singletons, scheme, mode, seed=5
            )
            np.testing.assert_array_equal(quotient.values, linear.values)
            np.testing.assert_array_equal(quotient.stderr, linear.stderr)


def test_singleton_two_step_reproduces_quotient_draws(logistic, background4):
    singletons = Partition.singletons(4)
    mode = EmpiricalMarginal(300)
    quotient = mc_quotient_value(logistic, background4, X_STAR, singletons, shapley, mode, seed=2)
    two_step = mc_two_step(logistic, background4, X_STAR, singletons, mode, seed=2)
    np.testing.assert_array_equal(two_step.values, quotient.values)


def test_true_marginal_makes_one_pass(logistic, background4, grouping4):
    for result in _run_all(logistic, background4, grouping4, TrueMarginal(), seed=1):
        assert result.mode == "mc-true"
        assert result.game == "marginal"
        assert all(e.count == len(background4) for e in result.estimates)


def test_modes_agree_on_the_same_rows(logistic, background4, grouping4):
    true = _run_all(logistic, background4, grouping4, TrueMarginal(), seed=4)
    ordered = _run_all(logistic, background4, grouping4, _OrderedEmpirical(len(background4)), seed=4)
    for a, b in zip(true, ordered):
        np.testing.assert_array_equal(a.values, b.values)
        assert b.mode == "mc-empirical"


def test_constant_model(background4, grouping4):
    f = parse_expression("1.5", 4)
    *values, two_step = _run_all(f, background4, grouping4, EmpiricalMarginal(64), seed=0)
    for result in values:
        np.testing.assert_array_equal(result.values, np.zeros(len(result)))
        np.testing.assert_array_equal(result.stderr, np.zeros(len(result)))
    # groups of two or more keep the stand-alone worth of the constant
    np.testing.assert_allclose(two_step.values, [-0.75, -0.75, 0.0, 0.0], atol=1e-15)
    np.testing.assert_allclose(two_step.stderr, np.zeros(4), atol=1e-15)
    centered = mc_two_step(f, background4, X_STAR, grouping4, EmpiricalMarginal(64), centered=True)
    np.testing.assert_array_equal(centered.values, np.zeros(4))


def test_two_step_constant_model_one_group():
    f = parse_expression("3", 2)
    data = Dataset([[0.0, 0.0], [1.0, 1.0]])
    result = mc_two_step(f, data, [1.0, 1.0], Partition.trivial(2), EmpiricalMarginal(16))
    np.testing.assert_allclose(result.values, [-1.5, -1.5], atol=1e-15)


def test_additive_model_is_exact_in_one_draw():
    f = parse_expression("x1 + 2*x2", 2)
    data = Dataset([[0.0, 0.0]])
    result = mc_linear_value(f, data, np.array([1.0, 1.0]), shapley, EmpiricalMarginal(1))
    np.testing.assert_allclose(result.values, [1.0, 2.0], atol=1e-15)
    assert result.estimates[0].count == 1


def test_mode_validation():
    with pytest.raises(ContractError):
        EmpiricalMarginal(0)
    with pytest.raises(ContractError):
        mode_from_name("empirical")
    with pytest.raises(ContractError):
        mode_from_name("bootstrap", 10)
    assert mode_from_name("true") == TrueMarginal()
    assert mode_from_name("empirical", 5).count(100) == 5
    assert TrueMarginal().count(100) == 100


def test_domain_error_reports_draw():
    f = parse_expression("sqrt(x1)", 1)
    data = Dataset([[-1.0]])
    with pytest.raises(ModelDomainError) as info:
        mc_linear_value(f, data, np.array([4.0]), shapley, EmpiricalMarginal(8))
    assert 0 <= info.value.index < 8


def test_width_mismatch(logistic, background4):
    with pytest.raises(ContractError):
        mc_linear_value(logistic, background4, X_STAR[:3], shapley, TrueMarginal())
    with pytest.raises(ContractError):
        mc_quotient_value(
            logistic, background4, X_STAR, Partition.singletons(3), shapley, TrueMarginal()
        )


def _exact_all(model, data, partition):
    return [
        exact_linear_value(model, data, X_STAR, shapley),
        exact_linear_value(model, data, X_STAR, banzhaf),
        exact_quotient_value(model, data, X_STAR, partition, shapley),
        exact_coalitional_value(model, data, X_STAR, partition, owen),
        exact_coalitional_value(model, data, X_STAR, partition, banzhaf_owen),
        exact_two_step(model, data, X_STAR, partition),
    ]


def test_estimates_agree_with_exact_values(logistic, background4, grouping4):
    estimates = _run_all(logistic, background4, grouping4, EmpiricalMarginal(2**14), seed=11)
    for estimate, exact in zip(estimates, _exact_all(logistic, background4, grouping4)):
        assert estimate.kind == exact.kind
        assert estimate.names == exact.names
        bound = 4 * estimate.stderr + 1e-12
        assert np.all(np.abs(estimate.values - exact.values) <= bound), estimate.kind


def test_centered_two_step(logistic, background4, grouping4):
    mode = EmpiricalMarginal(2**14)
    exact = exact_two_step(logistic, background4, X_STAR, grouping4, centered=True).values
    estimate = mc_two_step(logistic, background4, X_STAR, grouping4, mode, seed=3, centered=True)
    assert np.all(np.abs(estimate.values - exact) <= 4 * estimate.stderr + 1e-12)


def test_delta_moments_first_moment_is_value(logistic, background4):
    exact = exact_linear_value(logistic, background4, X_STAR, banzhaf).values
    for i in range(4):
        first, second = delta_moments(logistic, background4, X_STAR, banzhaf, i)
        assert first == pytest.approx(exact[i], abs=1e-12)
        assert second >= first**2


def test_variance_bound_holds(rng):
    for _ in range(20):
        n = int(rng.integers(2, 6))
        coeffs = rng.normal(size=n)
        terms = " + ".join(f"{float(c)!r}*x{k + 1}" for k, c in enumerate(coeffs))
        f = parse_expression(f"exp(0.3*({terms})) * sin(x1)", n)
        data = Dataset(rng.normal(size=(6, n)))
        x_star = rng.normal(size=n)
        for scheme in (shapley, banzhaf):
            for i in range(n):
                result = variance_bound_check(f, data, x_star, scheme, i)
                assert result.holds
                assert result.variance >= 0.0


def test_variance_bound_limit(rng):
    f = parse_expression("x1", 13)
    with pytest.raises(LimitError):
        variance_bound_check(f, Dataset(rng.normal(size=(2, 13))), np.zeros(13), shapley, 0)


@pytest.mark.slow
def test_estimates_agree_with_oracle_on_random_instances(rng):
    passed = total = 0
    for instance in range(100):
        n = int(rng.integers(2, 7))
        coeffs = rng.normal(size=(n,))
        terms = " + ".join(f"{float(c)!r}*x{k + 1}" for k, c in enumerate(coeffs))
        f = parse_expression(f"x1 * x{n} + sin({terms})", n)
        data = Dataset(rng.normal(size=(20, n)))
        x_star = rng.normal(size=n)
        cut = int(rng.integers(1, n))
        partition = Partition.from_lists([list(range(cut)), list(range(cut, n))], n)
        mode = EmpiricalMarginal(2**16)
        pairs = [
            (mc_linear_value(f, data, x_star, shapley, mode, seed=instance),
             exact_linear_value(f, data, x_star, shapley)),
            (mc_linear_value(f, data, x_star, banzhaf, mode, seed=instance),
             exact_linear_value(f, data, x_star, banzhaf)),
            (mc_quotient_value(f, data, x_star, partition, shapley, mode, seed=instance),
             exact_quotient_value(f, data, x_star, partition, shapley)),
            (mc_coalitional_value(f, data, x_star, partition, owen, mode, seed=instance),
             exact_coalitional_value(f, data, x_star, partition, owen)),
            (mc_coalitional_value(f, data, x_star, partition, banzhaf_owen, mode, seed=instance),
             exact_coalitional_value(f, data, x_star, partition, banzhaf_owen)),
            (mc_two_step(f, data, x_star, partition, mode, seed=instance),
             exact_two_step(f, data, x_star, partition)),
        ]
        for estimate, exact in pairs:
            total += 1
            passed += bool(
                np.all(np.abs(estimate.values - exact.values) <= 4 * estimate.stderr + 1e-12)
            )
    assert passed >= 0.95 * total


@pytest.mark.slow
def test_quotient_estimate_is_unbiased():
    from shapax.experiments import ExperimentSpec, gen_experiment

    data, model, partition, target = gen_experiment(ExperimentSpec("1a", seed=5))
    x_star = data[0]
    exact = exact_quotient_value(model, data, x_star, partition, shapley).values[target]
    runs = [
        mc_quotient_value(
            model, data, x_star, partition, shapley, EmpiricalMarginal(2**9), seed=5, replicate=r
        )
        for r in range(50)
    ]
    means = np.array([run.values[target] for run in runs])
    pooled = np.sqrt(np.mean([run.stderr[target] ** 2 for run in runs]) / len(runs))
    assert abs(means.mean() - exact) <= 3 * pooled


def test_single_draws_are_unbiased(logistic, background4):
    exact = exact_linear_value(logistic, background4, X_STAR, banzhaf).values
    estimate = mc_linear_value(logistic, background4, X_STAR, banzhaf, EmpiricalMarginal(1000), seed=8)
    assert np.all(np.abs(estimate.values - exact) <= 5 * estimate.stderr + 1e-12)


def test_accumulate_merges_blocks(rng):
    samples = rng.normal(size=50)
    whole = Estimate.from_samples(samples)
    blocked = accumulate(samples, block=7)
    assert blocked.count == whole.count
    assert blocked.mean == pytest.approx(whole.mean, abs=1e-12)
    assert blocked.m2 == pytest.approx(whole.m2, abs=1e-12)
    assert accumulate(samples).mean == pytest.approx(whole.mean, abs=1e-12)


def test_accumulate_rejects():
    with pytest.raises(ContractError):
        accumulate(np.ones(3), block=0)
    with pytest.raises(ContractError):
        accumulate(np.array([]))
