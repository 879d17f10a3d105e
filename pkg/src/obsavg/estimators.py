"""Optimal estimation of an ensemble average from n identical copies.

Two routes are implemented: the collective spectral measurement of the
copy-averaged observable (canonical POVM), and repeated single-copy
measurement followed by averaging. They induce the same outcome
distribution on tensor-power states.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatchError
from .linops import DensityMatrix, Observable, as_matrix
from .povm import OutcomeDistribution, Povm
from .symspace import CopySpace, copy_average

MERGE_TOL_SCALE = 1e-8


def default_merge_tol(values: np.ndarray) -> float:
    """Clustering tolerance 1e-8 * max(1, largest |value|)."""
    peak = float(np.abs(values).max(initial=0.0))
    return MERGE_TOL_SCALE * max(1.0, peak)


def _merge_weighted(values: np.ndarray, probs: np.ndarray,
                    tol: float) -> tuple[np.ndarray, np.ndarray]:
    """Single-linkage clustering of values; weights summed per cluster."""
    order = np.argsort(values, kind="stable")
    v, p = values[order], probs[order]
    cuts = np.nonzero(np.diff(v) > tol)[0] + 1
    merged_v, merged_p = [], []
    for group in np.split(np.arange(v.size), cuts):
        weight = p[group].sum()
        if weight > 0.0:
            merged_v.append(float(np.average(v[group], weights=p[group])))
        else:
            merged_v.append(float(v[group].mean()))
        merged_p.append(float(weight))
    return np.array(merged_v), np.array(merged_p)


def _as_observable(a) -> Observable:
    return a if isinstance(a, Observable) else Observable(as_matrix(a))


def _as_state(rho) -> DensityMatrix:
    return rho if isinstance(rho, DensityMatrix) else DensityMatrix(as_matrix(rho))


def canonical_povm(a, space: CopySpace, merge_tol: float | None = None) -> Povm:
    """Spectral measurement of the copy-averaged observable.

    Eigenvalues of the copy average closer than merge_tol are clustered
    (single linkage); each outcome carries the cluster's arithmetic-mean
    value and the orthogonal projector onto its eigenspace.

    Parameters
    ----------
    a : Observable or array_like
        Single-copy observable, dim must equal space.local_dim.
    space : CopySpace
        The copy space the measurement acts on.
    merge_tol : float, optional
        Eigenvalue clustering tolerance; default 1e-8 * max(1, spectral peak).
    """
    obs = _as_observable(a)
    if obs.dim != space.local_dim:
        raise DimensionMismatchError(
            f"observable dim {obs.dim} does not match local_dim {space.local_dim}"
        )
    avg = copy_average(obs.matrix, space)
    w, v = np.linalg.eigh(avg)
    if merge_tol is None:
        merge_tol = default_merge_tol(w)
    cuts = np.nonzero(np.diff(w) > merge_tol)[0] + 1
    values, elements = [], []
    for group in np.split(np.arange(w.size), cuts):
        vecs = v[:, group]
        values.append(float(w[group].mean()))
        elements.append(vecs @ vecs.conj().T)
    return Povm(values, np.stack(elements), space)


def canonical_error(a, rho, n_copies: int) -> float:
    """Closed-form optimal error sqrt((<A^2> - <A>^2) / n)."""
    if n_copies < 1:
        raise DimensionMismatchError(f"n_copies must be >= 1, got {n_copies}")
    obs = _as_observable(a)
    state = _as_state(rho)
    return float(np.sqrt(obs.variance(state) / n_copies))


def single_copy_distribution(a, rho, merge_tol: float | None = None) -> OutcomeDistribution:
    """Spectral outcome distribution of one copy, eigenvalues clustered."""
    obs = _as_observable(a)
    state = _as_state(rho)
    if obs.dim != state.dim:
        raise DimensionMismatchError(
            f"observable dim {obs.dim} vs state dim {state.dim}"
        )
    w, v = obs.eigensystem
    probs = np.einsum("ij,jk,ki->i", v.conj().T, state.matrix, v).real
    if merge_tol is None:
        merge_tol = default_merge_tol(w)
    values, probs = _merge_weighted(w.astype(float), probs, merge_tol)
    return OutcomeDistribution(values, probs)


def repeated_measurement_distribution(a, rho, n_copies: int,
                                      merge_tol: float | None = None) -> OutcomeDistribution:
    """Distribution of the average of n independent single-copy measurements.

    Convolves the single-copy spectral distribution with itself n times on
    the average scale (each step adds value/n), clustering coincident
    support points with merge_tol after every step.
    """
    if n_copies < 1:
        raise DimensionMismatchError(f"n_copies must be >= 1, got {n_copies}")
    obs = _as_observable(a)
    if merge_tol is None:
        merge_tol = default_merge_tol(obs.eigenvalues)
    base = single_copy_distribution(obs, rho, merge_tol=merge_tol)
    step_v = base.values / n_copies
    step_p = base.probabilities
    acc_v, acc_p = step_v.copy(), step_p.copy()
    for _ in range(n_copies - 1):
        sums = (acc_v[:, None] + step_v[None, :]).ravel()
        weights = (acc_p[:, None] * step_p[None, :]).ravel()
        acc_v, acc_p = _merge_weighted(sums, weights, merge_tol)
    return OutcomeDistribution(acc_v, acc_p)


def total_variation(dist_a: OutcomeDistribution, dist_b: OutcomeDistribution,
                    value_tol: float | None = None) -> float:
    """Total variation distance, identifying outcome values within value_tol."""
    all_values = np.concatenate([dist_a.values, dist_b.values])
    if value_tol is None:
        value_tol = default_merge_tol(all_values)
    order = np.argsort(all_values, kind="stable")
    v = all_values[order]
    cuts = np.nonzero(np.diff(v) > value_tol)[0] + 1
    # cluster id for each concatenated entry
    ids = np.zeros(v.size, dtype=np.int64)
    ids[cuts] = 1
    ids = np.cumsum(ids)
    labels = np.empty(v.size, dtype=np.int64)
    labels[order] = ids
    n_clusters = int(ids[-1]) + 1 if v.size else 0
    pa = np.zeros(n_clusters)
    pb = np.zeros(n_clusters)
    np.add.at(pa, labels[: dist_a.values.size], dist_a.probabilities)
    np.add.at(pb, labels[dist_a.values.size:], dist_b.probabilities)
    return 0.5 * float(np.abs(pa - pb).sum())


@dataclass
class EstimationReport:
    """Summary of one estimation run, serializable with a fixed key order."""

    local_dim: int
    n_copies: int
    expected_value: float
    closed_form_error: float
    povm_error: float | None = None
    distribution: OutcomeDistribution | None = None
    shots: int | None = None
    seed: int | None = None
    sample_mean: float | None = None
    sample_stddev: float | None = None

    def to_dict(self) -> dict:
        out: dict = {
            "local_dim": self.local_dim,
            "n_copies": self.n_copies,
            "expected_value": self.expected_value,
            "closed_form_error": self.closed_form_error,
        }
        if self.povm_error is not None:
            out["povm_error"] = self.povm_error
        if self.distribution is not None:
            out["outcome_values"] = [float(x) for x in self.distribution.values]
            out["outcome_probabilities"] = [
                float(x) for x in self.distribution.probabilities
            ]
        if self.shots is not None:
            out["shots"] = self.shots
            out["seed"] = self.seed
            out["sample_mean"] = self.sample_mean
            out["sample_stddev"] = self.sample_stddev
        return out


def _sample_stats(values: np.ndarray, counts: np.ndarray,
                  shots: int) -> tuple[float, float]:
    mean = float(counts @ values / shots)
    if shots > 1:
        var = float(counts @ (values - mean) ** 2 / (shots - 1))
    else:
        var = 0.0
    return mean, float(np.sqrt(var))


def estimate_canonical(a, rho, space: CopySpace, shots: int = 0,
                       seed: int | None = 0,
                       merge_tol: float | None = None) -> EstimationReport:
    """Run the collective route: canonical POVM, its exact error, optional sampling."""
    obs = _as_observable(a)
    state = _as_state(rho)
    povm = canonical_povm(obs, space, merge_tol=merge_tol)
    dist = povm.probabilities(state)
    report = EstimationReport(
        local_dim=space.local_dim,
        n_copies=space.n_copies,
        expected_value=obs.expectation(state.matrix),
        closed_form_error=canonical_error(obs, state, space.n_copies),
        povm_error=povm.estimation_error(obs, state),
        distribution=dist,
    )
    if shots > 0:
        counts = povm.sample(state, shots, seed=seed)
        mean, stddev = _sample_stats(dist.values, counts.astype(float), shots)
        report.shots = shots
        report.seed = seed
        report.sample_mean = mean
        report.sample_stddev = stddev
    return report


def simulate_repeated(a, rho, n_copies: int, shots: int, seed: int | None = 0,
                      merge_tol: float | None = None) -> EstimationReport:
    """Monte Carlo over the repeated-measurement route.

    Each shot is one estimate: the average of n independent single-copy
    spectral outcomes, drawn from the exact aggregate distribution.
    """
    if shots < 1:
        raise ValueError(f"shots must be >= 1, got {shots}")
    obs = _as_observable(a)
    state = _as_state(rho)
    dist = repeated_measurement_distribution(obs, state, n_copies, merge_tol=merge_tol)
    rng = np.random.default_rng(seed)
    counts = rng.multinomial(shots, dist.probabilities / dist.probabilities.sum())
    mean, stddev = _sample_stats(dist.values, counts.astype(float), shots)
    return EstimationReport(
        local_dim=obs.dim,
        n_copies=n_copies,
        expected_value=obs.expectation(state.matrix),
        closed_form_error=canonical_error(obs, state, n_copies),
        distribution=dist,
        shots=shots,
        seed=seed,
        sample_mean=mean,
        sample_stddev=stddev,
    )
