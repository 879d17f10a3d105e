import numpy as np
import pytest

from obsavg.adversary import (
    AdversaryConfig,
    compare,
    project_unbiased_povm,
    random_unbiased_povm,
    run_trials,
    smear_povm,
)
from obsavg.errors import InfeasibleError, ObsavgError, PovmValidationError
from obsavg.estimators import canonical_error, canonical_povm, total_variation
from obsavg.linops import DensityMatrix, Observable, pure_state, random_density, random_hermitian
from obsavg.povm import Povm
from obsavg.symspace import CopySpace

Z = np.diag([1.0, -1.0]).astype(complex)


def test_config_validation():
    cfg = AdversaryConfig((0.0, 1.0))
    assert cfg.value_grid == (0.0, 1.0)
    with pytest.raises(ObsavgError):
        AdversaryConfig(())
    with pytest.raises(ObsavgError):
        AdversaryConfig((np.inf, 0.0))
    with pytest.raises(ObsavgError):
        AdversaryConfig((0.0,), max_iterations=0)


def test_spanning_grid_endpoints():
    cfg = AdversaryConfig.spanning_grid(Observable(Z), size=5)
    assert cfg.value_grid[0] == pytest.approx(-1.0)
    assert cfg.value_grid[-1] == pytest.approx(1.0)
    assert len(cfg.value_grid) == 5


def test_canonical_start_converges_immediately():
    space = CopySpace(2, 2)
    p = canonical_povm(Z, space)
    result = project_unbiased_povm(
        Z, space, p.values, start=p.elements, max_iterations=50
    )
    assert result.iterations == 0
    assert result.completeness_residual <= 1e-12


def test_project_finds_valid_unbiased_povm():
    space = CopySpace(2, 2)
    grid = (-1.0, -0.5, 0.0, 0.5, 1.0)
    result = project_unbiased_povm(
        Z, space, grid, rng=np.random.default_rng(3)
    )
    povm = result.povm
    assert povm.validate(psd_tol=1e-8, completeness_tol=1e-8).ok
    assert povm.unbiasedness_residual(Z) <= 1e-8
    assert result.iterations > 0


def test_project_rejects_uncovering_grid():
    with pytest.raises(InfeasibleError) as err:
        project_unbiased_povm(Z, CopySpace(2, 2), (0.0,))
    assert err.value.details["reason"] == "grid_coverage"


def test_project_rejects_out_of_range_grid():
    with pytest.raises(ObsavgError) as err:
        project_unbiased_povm(Z, CopySpace(2, 2), (-2.0, 0.0, 2.0))
    assert err.value.code == "BAD_GRID"


def test_project_reports_non_convergence():
    with pytest.raises(InfeasibleError) as err:
        project_unbiased_povm(
            Z,
            CopySpace(2, 2),
            (-1.0, 0.0, 1.0),
            rng=np.random.default_rng(0),
            max_iterations=1,
        )
    assert err.value.details["reason"] == "no_convergence"


def test_random_unbiased_povm_deterministic():
    space = CopySpace(2, 2)
    cfg = AdversaryConfig((-1.0, -0.5, 0.0, 0.5, 1.0), seed=11)
    p1 = random_unbiased_povm(Z, space, cfg)
    p2 = random_unbiased_povm(Z, space, cfg)
    assert np.array_equal(p1.elements, p2.elements)
    assert p1.validate(psd_tol=1e-8, completeness_tol=1e-8).ok


def test_smear_zero_deltas_keeps_distribution():
    space = CopySpace(2, 2)
    base = canonical_povm(Z, space)
    smeared = smear_povm(base, deltas=np.zeros(base.n_outcomes))
    rho = random_density(2, np.random.default_rng(70))
    tv = total_variation(base.probabilities(rho), smeared.probabilities(rho))
    assert tv <= 1e-12
    assert np.abs(smeared.first_moment() - base.first_moment()).max() < 1e-14


def test_smear_error_oracle_maximally_mixed():
    # canonical Z on one copy, rho = I/2, both deltas 0.2:
    # outcomes (+-1.2, +-0.8) each with probability 1/4, mean 0,
    # so the squared error is (1.44 + 0.64 + 0.64 + 1.44) / 4 = 1.04
    base = canonical_povm(Z, CopySpace(2, 1))
    smeared = smear_povm(base, deltas=[0.2, 0.2])
    rho = DensityMatrix(np.eye(2) / 2)
    dist = smeared.probabilities(rho)
    assert sorted(np.round(dist.values, 12)) == [-1.2, -0.8, 0.8, 1.2]
    assert np.allclose(dist.probabilities, 0.25)
    assert smeared.estimation_error(Z, rho) ** 2 == pytest.approx(1.04)
    assert base.estimation_error(Z, rho) ** 2 == pytest.approx(1.0)


def test_smear_variance_increase_identity():
    rng = np.random.default_rng(71)
    space = CopySpace(2, 2)
    for trial in range(10):
        a = Observable(random_hermitian(2, rng))
        base = canonical_povm(a, space)
        deltas = rng.uniform(0.0, 0.3, size=base.n_outcomes)
        smeared = smear_povm(base, deltas=deltas)
        rho = random_density(2, rng)
        base_dist = base.probabilities(rho)
        lhs = smeared.estimation_error(a, rho) ** 2 - base.estimation_error(a, rho) ** 2
        rhs = float(base_dist.probabilities @ deltas**2)
        assert abs(lhs - rhs) <= 1e-12


def test_smear_seeded_draw_and_validation():
    base = canonical_povm(Z, CopySpace(2, 2))
    s1 = smear_povm(base, seed=4, value_range=(-1.0, 1.0))
    s2 = smear_povm(base, seed=4, value_range=(-1.0, 1.0))
    assert np.array_equal(s1.values, s2.values)
    assert s1.values.max() <= 1.0 + 1e-12
    assert s1.values.min() >= -1.0 - 1e-12
    assert s1.unbiasedness_residual(Z) < 1e-12
    with pytest.raises(ObsavgError):
        smear_povm(base, deltas=[0.1])
    with pytest.raises(ObsavgError):
        smear_povm(base, deltas=[-0.1, 0.0, 0.0])
    with pytest.raises(ObsavgError):
        smear_povm(base, deltas=[0.5, 0.0, 0.0], value_range=(-1.0, 1.0))


def test_compare_canonical_has_zero_gap():
    space = CopySpace(2, 3)
    rng = np.random.default_rng(72)
    a = Observable(random_hermitian(2, rng))
    rho = random_density(2, rng)
    report = compare(canonical_povm(a, space), a, rho)
    assert abs(report.gap) <= 1e-10
    assert report.unbiasedness_residual <= 1e-10
    assert report.moment_floor >= -1e-9


def test_compare_smeared_gap_matches_formula():
    space = CopySpace(2, 2)
    base = canonical_povm(Z, space)
    # only the interior outcome is smeared, keeping values inside the spectrum
    deltas = np.array([0.0, 0.15, 0.0])
    smeared = smear_povm(base, deltas=deltas)
    rho = random_density(2, np.random.default_rng(73))
    report = compare(smeared, Z, rho)
    increase = float(base.probabilities(rho).probabilities @ deltas**2)
    expected_gap = increase / (report.adversary_error + report.canonical_error)
    assert report.gap == pytest.approx(expected_gap, abs=1e-12)
    assert report.gap > 0


def test_compare_rejects_biased_povm():
    space = CopySpace(2, 2)
    base = canonical_povm(Z, space)
    biased = Povm(base.values + 0.2, base.elements, space)
    rho = random_density(2, np.random.default_rng(74))
    with pytest.raises(PovmValidationError) as err:
        compare(biased, Z, rho)
    assert err.value.code == "POVM_BIASED"


def test_compare_rejects_invalid_povm():
    space = CopySpace(2, 1)
    bad = Povm([1.0, -1.0], [np.eye(2, dtype=complex), np.eye(2, dtype=complex)], space)
    with pytest.raises(PovmValidationError):
        compare(bad, Z, DensityMatrix(np.eye(2) / 2))


def test_compare_warns_on_out_of_range_values():
    base = canonical_povm(Z, CopySpace(2, 1))
    wide = smear_povm(base, deltas=[0.5, 0.5])  # values reach +-1.5
    rho = DensityMatrix(np.eye(2) / 2)
    with pytest.warns(UserWarning):
        report = compare(wide, Z, rho)
    assert report.gap > 0


def test_run_trials_batch():
    space = CopySpace(2, 2)
    cfg = AdversaryConfig((-1.0, -0.5, 0.0, 0.5, 1.0), seed=100)
    rows, summary = run_trials(Z, space, cfg, 5)
    assert len(rows) == 5
    assert summary["trials"] == 5
    assert summary["converged"] == 5
    assert summary["min_gap"] >= -1e-8
    assert summary["max_unbiasedness_residual"] <= 1e-8
    for row in rows:
        assert row["converged"]
        assert row["moment_floor"] >= -1e-9
    rows2, summary2 = run_trials(Z, space, cfg, 5)
    assert rows == rows2 and summary == summary2
