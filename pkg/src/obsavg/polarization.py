"""Recovering an operator on n copies from product-state data.

Two reconstruction routes, both driven by a black-box oracle so they can
double as consistency checks of any expectation implementation:

* reconstruct_from_diagonal needs only diagonal product values
  <w|X|w> with w = psi_1 ox ... ox psi_n (an n-fold complex polarization
  over the four fourth roots of unity per site), and recovers any X.
* reconstruct_from_moments needs only tensor-power moments Tr[X rho^ox n]
  on randomized single-copy probe states, and recovers a
  permutation-invariant X by linear inversion on the orbit basis.

The multilinear-coefficient identity connecting power moments of a rank-1
mixture to symmetrized product expectations is exposed as
coefficient_extract / symmetrized_product_sum.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .errors import ConditioningError, DimensionCapError, DimensionMismatchError
from .linops import DensityMatrix, as_matrix, random_density
from .symspace import CopySpace, invariant_basis

MAX_LOCAL_DIM = 3
MAX_COPIES = 4
_IPOW = (1.0 + 0.0j, 1.0j, -1.0 + 0.0j, -1.0j)


def _check_caps(local_dim: int, n_copies: int) -> None:
    if local_dim > MAX_LOCAL_DIM:
        raise DimensionCapError(
            f"polarization reconstruction supports local_dim <= {MAX_LOCAL_DIM}, "
            f"got {local_dim}",
            details={"local_dim": local_dim, "cap": MAX_LOCAL_DIM},
        )
    if n_copies > MAX_COPIES:
        raise DimensionCapError(
            f"polarization reconstruction supports n_copies <= {MAX_COPIES}, "
            f"got {n_copies}",
            details={"n_copies": n_copies, "cap": MAX_COPIES},
        )


def _check_factors(factors: Sequence[np.ndarray]) -> list[np.ndarray]:
    out = [np.asarray(f, dtype=np.complex128).reshape(-1) for f in factors]
    if not out:
        raise DimensionMismatchError("need at least one factor vector")
    d = out[0].size
    if any(f.size != d for f in out):
        raise DimensionMismatchError("factor vectors must share one dimension")
    return out


def product_vector(factors: Sequence[np.ndarray]) -> np.ndarray:
    """Tensor product psi_1 ox ... ox psi_n as a flat vector."""
    vecs = _check_factors(factors)
    out = vecs[0]
    for v in vecs[1:]:
        out = np.kron(out, v)
    return out


def product_expectation(x, factors: Sequence[np.ndarray]) -> complex:
    """Diagonal product value <w|X|w> for w = psi_1 ox ... ox psi_n."""
    w = product_vector(factors)
    m = as_matrix(x)
    if m.shape[0] != w.size:
        raise DimensionMismatchError(
            f"matrix dim {m.shape[0]} vs product vector dim {w.size}"
        )
    return complex(w.conj() @ (m @ w))


def reconstruct_from_diagonal(
    oracle: Callable[[list[np.ndarray]], complex],
    local_dim: int,
    n_copies: int,
) -> np.ndarray:
    """Rebuild the full matrix of X from diagonal product values only.

    Every entry <J|X|K> is an average of 4**n oracle values on the product
    vectors built from e_j + i**p e_k per site, weighted by i**(-sum p).
    The oracle receives the list of single-site factor vectors and must
    return <w|X|w> for their tensor product. Total oracle calls:
    (4 * local_dim**2) ** n_copies.

    Parameters
    ----------
    oracle : callable
        Maps a list of n_copies factor vectors (each of size local_dim)
        to the diagonal value of X on their product.
    local_dim, n_copies : int
        Site dimension and copy count; capped at 3 and 4 respectively.
    """
    _check_caps(local_dim, n_copies)
    d, n = local_dim, n_copies
    dim = d**n
    eye = np.eye(d, dtype=np.complex128)
    # factor vector for (j, k, p): e_j + i**p e_k
    site_factors = [
        [[eye[j] + _IPOW[p] * eye[k] for p in range(4)] for k in range(d)]
        for j in range(d)
    ]
    out = np.empty((dim, dim), dtype=np.complex128)
    sites = list(itertools.product(range(d), repeat=n))
    phases = [_IPOW[(-sum(p)) % 4] for p in itertools.product(range(4), repeat=n)]
    p_tuples = list(itertools.product(range(4), repeat=n))
    for row, jj in enumerate(sites):
        for col, kk in enumerate(sites):
            acc = 0.0 + 0.0j
            for phase, pp in zip(phases, p_tuples):
                factors = [site_factors[jj[l]][kk[l]][pp[l]] for l in range(n)]
                acc += phase * complex(oracle(factors))
            out[row, col] = acc / 4**n
    return out


def symmetrized_product_sum(x, factors: Sequence[np.ndarray]) -> complex:
    """sum over permutations sigma of <w_sigma|X|w_sigma>, w_sigma = ox_l psi_sigma(l)."""
    vecs = _check_factors(factors)
    total = 0.0 + 0.0j
    for perm in itertools.permutations(range(len(vecs))):
        total += product_expectation(x, [vecs[s] for s in perm])
    return total


@dataclass(frozen=True)
class MixtureSpec:
    """A weighted rank-1 mixture sum_j weights[j] |vectors[j]><vectors[j]|."""

    weights: tuple[float, ...]
    vectors: tuple[np.ndarray, ...]

    @classmethod
    def build(cls, weights: Sequence[float], vectors: Sequence[np.ndarray]) -> "MixtureSpec":
        w = tuple(float(v) for v in weights)
        vecs = tuple(v.copy() for v in _check_factors(vectors))
        if len(w) != len(vecs):
            raise DimensionMismatchError(f"{len(w)} weights vs {len(vecs)} vectors")
        if any(not np.isfinite(v) or v <= 0.0 for v in w):
            raise DimensionMismatchError("mixture weights must be finite and > 0")
        return cls(w, vecs)

    @property
    def size(self) -> int:
        return len(self.weights)

    @property
    def local_dim(self) -> int:
        return self.vectors[0].size

    def operator(self) -> np.ndarray:
        """The mixture matrix sum_j w_j |psi_j><psi_j| (vectors not normalized)."""
        out = np.zeros((self.local_dim, self.local_dim), dtype=np.complex128)
        for w, v in zip(self.weights, self.vectors):
            out += w * np.outer(v, v.conj())
        return out


def coefficient_extract(x, mixture: MixtureSpec) -> complex:
    """Coefficient of the all-weights monomial in Tr[X (mixture operator)^ox n].

    Tr[X (sum_j w_j P_j)^ox n] is a polynomial in the weights; the
    coefficient of w_1 * ... * w_n is a multilinear functional of the
    projectors alone, computed here by inclusion-exclusion over vector
    subsets (evaluation at indicator weights, which the polynomial
    structure makes independent of the mixture's own weights). It equals
    symmetrized_product_sum(x, mixture.vectors).
    """
    m = as_matrix(x)
    n = mixture.size
    d = mixture.local_dim
    if m.shape[0] != d**n:
        raise DimensionMismatchError(
            f"matrix dim {m.shape[0]} does not equal local_dim**size = {d**n}"
        )
    projectors = [np.outer(v, v.conj()) for v in mixture.vectors]
    total = 0.0 + 0.0j
    for mask in range(1, 2**n):
        q = np.zeros((d, d), dtype=np.complex128)
        bits = 0
        for j in range(n):
            if mask >> j & 1:
                q += projectors[j]
                bits += 1
        power = q
        for _ in range(n - 1):
            power = np.kron(power, q)
        sign = -1.0 if (n - bits) % 2 else 1.0
        total += sign * complex(np.einsum("ij,ji->", m, power))
    return total


@dataclass
class MomentReconstruction:
    """Result of the moment-based linear inversion on the orbit basis."""

    matrix: np.ndarray
    condition_number: float
    rank: int
    n_basis: int
    residual: float


def random_probe_states(local_dim: int, count: int,
                        seed: int | None = 0) -> list[DensityMatrix]:
    """Full-rank random probe states (trace-normalized Wishart draws)."""
    rng = np.random.default_rng(seed)
    return [random_density(local_dim, rng) for _ in range(count)]


def reconstruct_from_moments(
    oracle: Callable[[DensityMatrix], complex],
    local_dim: int,
    n_copies: int,
    probes: Sequence[DensityMatrix],
) -> MomentReconstruction:
    """Rebuild a permutation-invariant X from tensor-power moments.

    Solves the least-squares system design @ c = y where
    design[i, a] = Tr[B_a probe_i^ox n] over the orbit indicator basis
    B_a and y_i = oracle(probe_i) = Tr[X probe_i^ox n]. Needs at least as
    many probes as basis elements and a numerically full-rank design.

    Raises
    ------
    ConditioningError
        If there are fewer probes than basis elements or the design matrix
        is rank deficient (code PROBE_RANK).
    """
    _check_caps(local_dim, n_copies)
    space = CopySpace(local_dim, n_copies)
    basis = invariant_basis(space)
    n_basis = len(basis)
    probes = list(probes)
    if len(probes) < n_basis:
        raise ConditioningError(
            f"need at least {n_basis} probe states, got {len(probes)}",
            details={"n_basis": n_basis, "n_probes": len(probes)},
        )
    stacked = np.stack(basis)
    design = np.empty((len(probes), n_basis), dtype=np.complex128)
    y = np.empty(len(probes), dtype=np.complex128)
    for i, probe in enumerate(probes):
        state = probe if isinstance(probe, DensityMatrix) else DensityMatrix(as_matrix(probe))
        joint = state.tensor_power(n_copies)
        design[i] = np.einsum("aij,ji->a", stacked, joint)
        y[i] = complex(oracle(state))
    singulars = np.linalg.svd(design, compute_uv=False)
    rank = int(np.sum(singulars > singulars[0] * 1e-10))
    if rank < n_basis:
        raise ConditioningError(
            f"probe design matrix is rank deficient ({rank} < {n_basis}); "
            f"add or rerandomize probes",
            details={"rank": rank, "n_basis": n_basis},
        )
    condition = float(singulars[0] / singulars[-1])
    coeffs, *_ = np.linalg.lstsq(design, y, rcond=None)
    matrix = np.tensordot(coeffs, stacked, axes=1)
    residual = float(np.linalg.norm(design @ coeffs - y))
    return MomentReconstruction(
        matrix=matrix,
        condition_number=condition,
        rank=rank,
        n_basis=n_basis,
        residual=residual,
    )
