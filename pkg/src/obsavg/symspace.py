"""Permutation action on tensor-power spaces and the symmetric (twirled) algebra.

Composite indices are big-endian: site 0 is the most significant base-d digit.
A permutation moves site k of the input to site sigma(k) of the output, so the
operator acts as P e_(i_0,...,i_{n-1}) = e_(j_0,...,j_{n-1}) with
j_k = i_{sigma^{-1}(k)}.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass
from functools import lru_cache
from typing import Iterator, Sequence

import numpy as np

from . import _kernels
from .errors import DimensionCapError, DimensionMismatchError, OperatorValidationError
from .linops import DEFAULT_TOL, as_matrix, check_dim_cap

# factorial safety valve for the permutation-sum operations
TWIRL_MAX_COPIES = 8


@dataclass(frozen=True)
class Permutation:
    """A permutation of range(n), stored as the image tuple mapping[x] = sigma(x)."""

    mapping: tuple[int, ...]

    def __post_init__(self):
        n = len(self.mapping)
        if n < 1 or sorted(self.mapping) != list(range(n)):
            raise OperatorValidationError(
                f"mapping must be a permutation of range(n), got {self.mapping!r}"
            )

    @classmethod
    def identity(cls, n: int) -> "Permutation":
        return cls(tuple(range(n)))

    @classmethod
    def from_sequence(cls, seq: Sequence[int]) -> "Permutation":
        return cls(tuple(int(v) for v in seq))

    @property
    def n(self) -> int:
        return len(self.mapping)

    def __call__(self, x: int) -> int:
        return self.mapping[x]

    def inverse(self) -> "Permutation":
        inv = [0] * self.n
        for pos, val in enumerate(self.mapping):
            inv[val] = pos
        return Permutation(tuple(inv))

    def compose(self, other: "Permutation") -> "Permutation":
        """self after other: (self.compose(other))(x) = self(other(x))."""
        if self.n != other.n:
            raise DimensionMismatchError(f"cannot compose sizes {self.n} and {other.n}")
        return Permutation(tuple(self.mapping[other.mapping[x]] for x in range(self.n)))


def transposition(i: int, j: int, n: int) -> Permutation:
    """The permutation of range(n) swapping i and j."""
    mapping = list(range(n))
    mapping[i], mapping[j] = mapping[j], mapping[i]
    return Permutation(tuple(mapping))


def all_permutations(n: int) -> Iterator[Permutation]:
    for mapping in itertools.permutations(range(n)):
        yield Permutation(mapping)


@dataclass(frozen=True)
class CopySpace:
    """n_copies identical systems of dimension local_dim, total_dim = local_dim**n_copies."""

    local_dim: int
    n_copies: int

    def __post_init__(self):
        if self.local_dim < 1:
            raise DimensionMismatchError(f"local_dim must be >= 1, got {self.local_dim}")
        if self.n_copies < 1:
            raise DimensionMismatchError(f"n_copies must be >= 1, got {self.n_copies}")
        check_dim_cap(self.total_dim)

    @property
    def total_dim(self) -> int:
        return self.local_dim ** self.n_copies


@lru_cache(maxsize=64)
def _digit_table(local_dim: int, n_copies: int) -> tuple[np.ndarray, np.ndarray]:
    # digits[i, k]: base-d digit of composite index i at site k; weights: place values
    weights = local_dim ** np.arange(n_copies - 1, -1, -1, dtype=np.int64)
    idx = np.arange(local_dim ** n_copies, dtype=np.int64)
    digits = (idx[:, None] // weights[None, :]) % local_dim
    digits.setflags(write=False)
    weights.setflags(write=False)
    return digits, weights


@lru_cache(maxsize=16)
def _gather_table(n_copies: int) -> np.ndarray:
    # row p is the inverse of permutation p as a gather map over sites
    perms = np.array(list(itertools.permutations(range(n_copies))), dtype=np.int64)
    gathers = np.argsort(perms, axis=1)
    gathers.setflags(write=False)
    return gathers


def composite_index_map(sigma: Permutation, space: CopySpace) -> np.ndarray:
    """t[i] = composite index of the permuted basis vector for input index i."""
    if sigma.n != space.n_copies:
        raise DimensionMismatchError(
            f"permutation of size {sigma.n} on {space.n_copies} copies"
        )
    digits, weights = _digit_table(space.local_dim, space.n_copies)
    inv = np.asarray(sigma.inverse().mapping, dtype=np.int64)
    return digits[:, inv] @ weights


def permutation_operator(sigma: Permutation, space: CopySpace) -> np.ndarray:
    """Unitary matrix routing site k of the input to site sigma(k) of the output."""
    t = composite_index_map(sigma, space)
    dim = space.total_dim
    p = np.zeros((dim, dim), dtype=np.complex128)
    p[t, np.arange(dim)] = 1.0
    return p


def lift(a, site: int, space: CopySpace) -> np.ndarray:
    """a acting on one site, identity elsewhere: I ox ... ox a ox ... ox I."""
    m = as_matrix(a)
    d, n = space.local_dim, space.n_copies
    if m.shape[0] != d:
        raise DimensionMismatchError(
            f"operator dim {m.shape[0]} does not match local_dim {d}"
        )
    if not 0 <= site < n:
        raise DimensionMismatchError(f"site {site} outside range(0, {n})")
    left = np.eye(d ** site, dtype=np.complex128)
    right = np.eye(d ** (n - site - 1), dtype=np.complex128)
    return np.kron(np.kron(left, m), right)


def copy_average(a, space: CopySpace) -> np.ndarray:
    """Average of the single-site liftings of a over all sites."""
    d, n = space.local_dim, space.n_copies
    out = np.zeros((space.total_dim, space.total_dim), dtype=np.complex128)
    for site in range(n):
        out += lift(a, site, space)
    out /= n
    return out


def _check_twirl_size(space: CopySpace) -> None:
    if space.n_copies > TWIRL_MAX_COPIES:
        raise DimensionCapError(
            f"permutation-sum operations support at most {TWIRL_MAX_COPIES} copies, "
            f"got {space.n_copies}",
            details={"n_copies": space.n_copies, "cap": TWIRL_MAX_COPIES},
        )


def twirl(x, space: CopySpace) -> np.ndarray:
    """Group average (1/n!) sum_sigma P_sigma^dagger x P_sigma.

    Projects onto the permutation-invariant operator subspace; implemented as
    index gathers rather than matrix products, so the cost is n! * total_dim^2.
    """
    _check_twirl_size(space)
    m = as_matrix(x)
    if m.shape[0] != space.total_dim:
        raise DimensionMismatchError(
            f"matrix dim {m.shape[0]} does not match total_dim {space.total_dim}"
        )
    digits, weights = _digit_table(space.local_dim, space.n_copies)
    gathers = _gather_table(space.n_copies)
    return _kernels.twirl_mean(m, digits, gathers, weights)


def is_perm_invariant(x, space: CopySpace, tol: float = DEFAULT_TOL) -> bool:
    """Whether x commutes with every permutation operator, within tol (max-norm).

    Checked on adjacent transpositions only; they generate the full group.
    """
    m = as_matrix(x)
    if m.shape[0] != space.total_dim:
        raise DimensionMismatchError(
            f"matrix dim {m.shape[0]} does not match total_dim {space.total_dim}"
        )
    for k in range(space.n_copies - 1):
        t = composite_index_map(transposition(k, k + 1, space.n_copies), space)
        if np.abs(m[np.ix_(t, t)] - m).max() > tol:
            return False
    return True


def invariant_basis(space: CopySpace) -> list[np.ndarray]:
    """0/1 indicator matrices of the index-pair orbits under the permutation action.

    The returned list is a basis of the permutation-invariant matrix subspace,
    ordered by the smallest composite pair code in each orbit.
    """
    _check_twirl_size(space)
    digits, weights = _digit_table(space.local_dim, space.n_copies)
    gathers = _gather_table(space.n_copies)
    codes = _kernels.pair_min_codes(digits, gathers, weights)
    _, inverse = np.unique(codes, return_inverse=True)
    inverse = inverse.reshape(codes.shape)
    count = int(inverse.max()) + 1
    basis = []
    for k in range(count):
        b = np.zeros(codes.shape, dtype=np.complex128)
        b[inverse == k] = 1.0
        basis.append(b)
    return basis
