"""Complete homogeneous sums and the telescoping identities built on them.

The kernel of a stacked diagonal recurrence is a weighted sum of complete
homogeneous symmetric polynomials of the layer eigenvalues.  This module
provides that polynomial in two forms plus the coefficient transform that
rewrites a prefix family of such polynomials as a plain exponential sum:

* :func:`homogeneous_sum` evaluates the degree-``k`` complete homogeneous
  sum through the add-one-variable recurrence, which stays exact for
  repeated and zero arguments.
* :func:`f_rational` evaluates the equivalent rational (Lagrange-style)
  form, defined only for pairwise distinct arguments.  It exists to
  cross-check the recurrence, not to replace it.
* :func:`telescope_coefficients` produces weights ``H`` with
  ``sum_k H[k] * F_t(beta[:k+1]) == sum_j Z[j] * beta[j]**t`` for all
  ``t >= 0``, where ``F_t`` is the degree-``t`` homogeneous sum.
"""

from __future__ import annotations

import numpy as np
from scipy.signal import lfilter

from .errors import (
    DegenerateEigenvalues,
    DomainError,
    ShapeMismatch,
    UnsortedInput,
    ZeroEigenvalue,
)

__all__ = [
    "DISTINCTNESS_RTOL",
    "homogeneous_sum",
    "homogeneous_sequence",
    "extend_homogeneous",
    "f_rational",
    "telescope_coefficients",
    "coincident_pairs",
]

#: Two eigenvalues closer than this relative separation are treated as
#: coincident everywhere a construction divides by their difference.
DISTINCTNESS_RTOL = 1e-10


def _as_complex_vector(values, name: str = "values") -> np.ndarray:
    arr = np.atleast_1d(np.asarray(values, dtype=complex))
    if arr.ndim != 1:
        raise ShapeMismatch(f"{name} must be one-dimensional, got shape {arr.shape}")
    if arr.size == 0:
        raise ShapeMismatch(f"{name} must be non-empty")
    if not np.all(np.isfinite(arr)):
        raise DomainError(f"{name} contains non-finite entries")
    return arr


def coincident_pairs(values, rtol: float = DISTINCTNESS_RTOL) -> list[tuple[int, int]]:
    """Index pairs ``(i, j)``, ``i < j``, closer than the relative tolerance.

    The separation test is ``|v[i] - v[j]| <= rtol * max(|v[i]|, |v[j]|, 1)``,
    so values near zero are compared on an absolute scale.
    """
    arr = _as_complex_vector(values)
    diff = np.abs(arr[:, None] - arr[None, :])
    scale = np.maximum(np.maximum(np.abs(arr)[:, None], np.abs(arr)[None, :]), 1.0)
    hits = np.argwhere(diff <= rtol * scale)
    return [(int(i), int(j)) for i, j in hits if i < j]


def homogeneous_sum(alphas, k: int) -> complex:
    """Degree-``k`` complete homogeneous sum of ``alphas``.

    Equals the sum of all degree-``k`` monomials in the arguments with
    unit coefficients.  Computed by absorbing one variable at a time,

        h_k(a_1..a_j) = h_k(a_1..a_{j-1}) + a_j * h_{k-1}(a_1..a_j),

    which involves no divisions and therefore tolerates repeated and zero
    arguments exactly.
    """
    arr = _as_complex_vector(alphas, "alphas")
    if k < 0:
        raise DomainError(f"degree must be non-negative, got {k}")
    table = np.zeros(k + 1, dtype=complex)
    table[0] = 1.0
    for value in arr:
        for degree in range(1, k + 1):
            table[degree] += value * table[degree - 1]
    return complex(table[k])


def extend_homogeneous(seqs: np.ndarray, alpha: complex) -> np.ndarray:
    """Absorb one more variable into homogeneous-sum sequences.

    ``seqs[..., t]`` holds the degree-``t`` sums over some variable set;
    the result holds the sums over that set plus ``alpha``.  This is the
    same recurrence as :func:`homogeneous_sum`, run along the last axis
    as a first-order recursive filter.
    """
    seqs = np.asarray(seqs, dtype=complex)
    return lfilter(
        np.ones(1, dtype=complex),
        np.array([1.0, -alpha], dtype=complex),
        seqs,
        axis=-1,
    )


def homogeneous_sequence(alphas, count: int) -> np.ndarray:
    """Degrees ``0 .. count-1`` of the complete homogeneous sum, as a vector."""
    arr = _as_complex_vector(alphas, "alphas")
    if count < 1:
        raise DomainError(f"count must be positive, got {count}")
    seq = np.zeros(count, dtype=complex)
    seq[0] = 1.0
    for value in arr:
        seq = extend_homogeneous(seq, value)
    return seq


def f_rational(alphas, k: int) -> complex:
    """Rational form of the degree-``k`` complete homogeneous sum.

    For pairwise distinct arguments ``a_1..a_n`` this evaluates

        sum_i a_i**(k + n - 1) / prod_{j != i} (a_i - a_j),

    which agrees with :func:`homogeneous_sum` but degrades as arguments
    approach each other.  Raises :class:`DegenerateEigenvalues` when any
    pair falls inside :data:`DISTINCTNESS_RTOL`.
    """
    arr = _as_complex_vector(alphas, "alphas")
    if k < 0:
        raise DomainError(f"degree must be non-negative, got {k}")
    clashes = coincident_pairs(arr)
    if clashes:
        i, j = clashes[0]
        raise DegenerateEigenvalues(
            f"arguments {i} and {j} coincide within tolerance: "
            f"{arr[i]} vs {arr[j]}"
        )
    n = arr.size
    total = 0.0 + 0.0j
    for i in range(n):
        others = np.delete(arr, i)
        total += arr[i] ** (k + n - 1) / np.prod(arr[i] - others)
    return complex(total)


def telescope_coefficients(betas, zs) -> np.ndarray:
    """Weights that flatten prefix homogeneous sums into an exponential sum.

    Given nonzero ``betas`` sorted by non-decreasing modulus and arbitrary
    ``zs`` of the same length ``n``, returns ``H`` of length ``n`` with

        sum_{k} H[k] * F_t(betas[:k+1]) = sum_{j} zs[j] * betas[j]**t

    for every ``t >= 0``, where ``F_t`` is the degree-``t`` complete
    homogeneous sum.  The weights satisfy ``|H[k]| <= 2**n * max |zs|``;
    the modulus ordering is what makes that bound hold.
    """
    b = _as_complex_vector(betas, "betas")
    z = _as_complex_vector(zs, "zs")
    if b.size != z.size:
        raise ShapeMismatch(f"betas and zs lengths differ: {b.size} vs {z.size}")
    if np.any(b == 0):
        raise ZeroEigenvalue("telescoping requires every beta to be nonzero")
    moduli = np.abs(b)
    if np.any(moduli[:-1] > moduli[1:]):
        raise UnsortedInput("betas must be sorted by non-decreasing modulus")
    clashes = coincident_pairs(b)
    if clashes:
        i, j = clashes[0]
        raise DegenerateEigenvalues(
            f"betas {i} and {j} coincide within tolerance: {b[i]} vs {b[j]}"
        )
    n = b.size
    out = np.zeros(n, dtype=complex)
    for k in range(1, n + 1):
        acc = 0.0 + 0.0j
        for j in range(k, n + 1):
            if z[j - 1] == 0:
                # A zero weight contributes nothing; evaluating its term
                # anyway risks 0/0 when beta**k underflows at large k.
                continue
            sep = np.prod(b[j - 1] - b[: k - 1]) if k > 1 else 1.0
            acc += z[j - 1] * b[k - 1] * sep / b[j - 1] ** k
        out[k - 1] = acc
    return out
