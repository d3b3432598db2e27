"""Matrix product state core: mixed-canonical MPS with SVD-truncated gate application.

Conventions: site 0 is the leftmost tensor and the leftmost character of basis
strings. Site tensors have shape (chi_left, 2, chi_right) with boundary bonds of
dimension 1. The orthogonality center, when tracked, is the index of the single
non-isometric tensor; tensors left of it are left-orthonormal, tensors right of
it are right-orthonormal.

All operations return new MPS values; inputs are never mutated.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

logger = logging.getLogger(__name__)

_UNITARY_ATOL = 1e-10


@dataclass(frozen=True)
class TruncationPolicy:
    """Bond truncation knobs for two-site gate application.

    chi_max: hard cap on kept singular values (None = unbounded).
    cutoff: relative threshold; singular values below cutoff * s_max are dropped.
    renormalize: rescale kept singular values so the state norm is preserved.
    """

    chi_max: int | None = None
    cutoff: float = 1e-12
    renormalize: bool = True

    def __post_init__(self) -> None:
        if self.chi_max is not None and self.chi_max < 1:
            raise ValueError(f"chi_max must be >= 1, got {self.chi_max}")
        if not 0.0 <= self.cutoff < 1.0:
            raise ValueError(f"cutoff must be in [0, 1), got {self.cutoff}")


#: Policy used when a caller wants exact (cutoff-only) evolution.
EXACT = TruncationPolicy(chi_max=None, cutoff=0.0)


@dataclass
class MPS:
    """An n-site matrix product state.

    tensors[i] has shape (chi_i, 2, chi_{i+1}); chi_0 = chi_n = 1.
    center is the orthogonality-center index, or None when unknown.
    discarded_weight accumulates the total squared singular-value mass dropped
    by truncation over the state's history.
    """

    tensors: list[np.ndarray]
    center: int | None = None
    discarded_weight: float = 0.0

    def __post_init__(self) -> None:
        if not self.tensors:
            raise ValueError("MPS needs at least one site")
        if self.tensors[0].shape[0] != 1 or self.tensors[-1].shape[2] != 1:
            raise ValueError("boundary bond dimensions must be 1")
        for i in range(self.n - 1):
            if self.tensors[i].shape[2] != self.tensors[i + 1].shape[0]:
                raise ValueError(f"bond mismatch between sites {i} and {i + 1}")

    @property
    def n(self) -> int:
        return len(self.tensors)

    def copy(self) -> "MPS":
        return MPS(list(self.tensors), self.center, self.discarded_weight)

    def bond_dims(self) -> list[int]:
        """Internal bond dimensions (length n - 1)."""
        return [t.shape[2] for t in self.tensors[:-1]]


def from_product_state(bits: str) -> MPS:
    """Build the computational-basis product state for a 0/1 string.

    amplitude(result, bits) == 1 and every bond dimension is 1.
    """
    if not bits:
        raise ValueError("bits must be a nonempty 0/1 string")
    tensors = []
    for ch in bits:
        if ch not in "01":
            raise ValueError(f"invalid character {ch!r} in basis string")
        t = np.zeros((1, 2, 1), dtype=complex)
        t[0, int(ch), 0] = 1.0
        tensors.append(t)
    return MPS(tensors, center=0)


def max_bond(psi: MPS) -> int:
    """Largest internal bond dimension (1 for a product state)."""
    if psi.n == 1:
        return 1
    return max(psi.bond_dims())


def inner_product(a: MPS, b: MPS) -> complex:
    """<a|b> via left-to-right transfer contraction, O(n chi^3)."""
    if a.n != b.n:
        raise ValueError(f"qubit counts differ: {a.n} vs {b.n}")
    env = np.ones((1, 1), dtype=complex)
    for ta, tb in zip(a.tensors, b.tensors):
        # env[p, q]: bra bond p, ket bond q
        tmp = np.tensordot(env, ta.conj(), axes=([0], [0]))  # (q, s, p')
        env = np.tensordot(tmp, tb, axes=([0, 1], [0, 1]))  # (p', q')
    return complex(env[0, 0])


def norm(psi: MPS) -> float:
    return math.sqrt(max(inner_product(psi, psi).real, 0.0))


def fidelity(a: MPS, b: MPS) -> float:
    """|<a|b>|^2; symmetric and global-phase invariant."""
    return abs(inner_product(a, b)) ** 2


def amplitude(psi: MPS, bits: str) -> complex:
    """Coefficient of the given basis string, O(n chi^2)."""
    if len(bits) != psi.n:
        raise ValueError(f"basis string length {len(bits)} != {psi.n} sites")
    vec = np.ones(1, dtype=complex)
    for ch, t in zip(bits, psi.tensors):
        vec = vec @ t[:, int(ch), :]
    return complex(vec[0])


def normalize(psi: MPS) -> MPS:
    """Scale to unit norm (at the center tensor when one is tracked)."""
    nrm = norm(psi)
    if nrm == 0.0:
        raise ValueError("cannot normalize a zero state")
    out = psi.copy()
    at = psi.center if psi.center is not None else 0
    out.tensors[at] = out.tensors[at] / nrm
    return out


def _check_unitary(u: np.ndarray, dim: int) -> None:
    if u.shape != (dim, dim):
        raise ValueError(f"gate must be {dim}x{dim}, got {u.shape}")
    err = np.max(np.abs(u.conj().T @ u - np.eye(dim)))
    if err > _UNITARY_ATOL:
        raise ValueError(f"gate is not unitary (deviation {err:.2e})")


def apply_single_site_gate(psi: MPS, u: np.ndarray, site: int) -> MPS:
    """Apply a 2x2 unitary at one site. Bonds and center are unchanged."""
    if not 0 <= site < psi.n:
        raise ValueError(f"site {site} out of range for {psi.n} qubits")
    _check_unitary(np.asarray(u), 2)
    out = psi.copy()
    out.tensors[site] = np.einsum("ps,asb->apb", u, psi.tensors[site])
    return out


def _shift_center_right(tensors: list[np.ndarray], c: int) -> None:
    """QR step: make site c left-orthonormal, push R into c+1."""
    chi_l, d, chi_r = tensors[c].shape
    q, r = np.linalg.qr(tensors[c].reshape(chi_l * d, chi_r))
    k = q.shape[1]
    tensors[c] = q.reshape(chi_l, d, k)
    tensors[c + 1] = np.einsum("ab,bsc->asc", r, tensors[c + 1])


def _shift_center_left(tensors: list[np.ndarray], c: int) -> None:
    """LQ step: make site c right-orthonormal, push L into c-1."""
    chi_l, d, chi_r = tensors[c].shape
    m = tensors[c].reshape(chi_l, d * chi_r)
    q, r = np.linalg.qr(m.conj().T)
    k = q.shape[1]
    tensors[c] = q.conj().T.reshape(k, d, chi_r)
    tensors[c - 1] = np.einsum("asb,bc->asc", tensors[c - 1], r.conj().T)


def canonicalize(psi: MPS, center: int) -> MPS:
    """Bring the state to mixed-canonical form with the given center.

    The represented state is unchanged (pure gauge transformation). When the
    current center is known only the tensors between old and new center are
    touched; otherwise a full two-sided sweep is done.
    """
    if not 0 <= center < psi.n:
        raise ValueError(f"center {center} out of range for {psi.n} sites")
    out = psi.copy()
    tensors = out.tensors
    if psi.center is None:
        for c in range(center):
            _shift_center_right(tensors, c)
        for c in range(psi.n - 1, center, -1):
            _shift_center_left(tensors, c)
    elif psi.center < center:
        for c in range(psi.center, center):
            _shift_center_right(tensors, c)
    else:
        for c in range(psi.center, center, -1):
            _shift_center_left(tensors, c)
    out.center = center
    return out


def apply_two_site_gate(
    psi: MPS, u: np.ndarray, left_site: int, policy: TruncationPolicy
) -> MPS:
    """Apply a 4x4 unitary to (left_site, left_site + 1) with SVD truncation.

    The orthogonality center is moved onto the touched pair first so the local
    SVD truncation is globally optimal, and ends on the RIGHT site
    (left_site + 1). Dropped squared singular-value mass is added to
    discarded_weight; kept singular values are rescaled when
    policy.renormalize is set.
    """
    if not 0 <= left_site < psi.n - 1:
        raise ValueError(f"left_site {left_site} out of range for {psi.n} qubits")
    u = np.asarray(u)
    _check_unitary(u, 4)

    if psi.center is None or not left_site <= psi.center <= left_site + 1:
        target = left_site if (psi.center is None or psi.center < left_site) else left_site + 1
        psi = canonicalize(psi, target)
    out = psi.copy()
    tensors = out.tensors

    a, b = tensors[left_site], tensors[left_site + 1]
    chi_l, chi_r = a.shape[0], b.shape[2]
    theta = np.tensordot(a, b, axes=([2], [0]))  # (chi_l, s, t, chi_r)
    u4 = u.reshape(2, 2, 2, 2)  # (out_l, out_r, in_l, in_r)
    theta = np.tensordot(u4, theta, axes=([2, 3], [1, 2]))  # (w, x, chi_l, chi_r)
    theta = np.moveaxis(theta, 2, 0)  # (chi_l, w, x, chi_r)

    mat = theta.reshape(chi_l * 2, 2 * chi_r)
    uu, s, vh = np.linalg.svd(mat, full_matrices=False)

    total = float(np.sum(s**2))
    keep = int(np.sum(s > policy.cutoff * s[0])) if s[0] > 0 else 1
    if policy.chi_max is not None:
        keep = min(keep, policy.chi_max)
    keep = max(keep, 1)
    kept = float(np.sum(s[:keep] ** 2))
    discarded = max(total - kept, 0.0)
    if discarded > 0:
        logger.debug(
            "truncation at bond %d: kept %d of %d, discarded weight %.3e",
            left_site, keep, len(s), discarded,
        )
    s = s[:keep]
    if policy.renormalize and kept > 0:
        s = s * math.sqrt(total / kept)

    tensors[left_site] = uu[:, :keep].reshape(chi_l, 2, keep)
    tensors[left_site + 1] = (s[:, None] * vh[:keep]).reshape(keep, 2, chi_r)
    out.center = left_site + 1
    out.discarded_weight = psi.discarded_weight + discarded / total if total > 0 else psi.discarded_weight
    return out


def expectation_single(psi: MPS, op: np.ndarray, site: int) -> complex:
    """<psi| op_site |psi> for a 2x2 operator at one site."""
    p = canonicalize(psi, site)
    t = p.tensors[site]
    return complex(np.einsum("asb,st,atb->", t.conj(), op, t, optimize=True))


def expectation_two(psi: MPS, op: np.ndarray, left_site: int) -> complex:
    """<psi| op |psi> for a 4x4 operator on (left_site, left_site + 1)."""
    p = canonicalize(psi, left_site)
    a, b = p.tensors[left_site], p.tensors[left_site + 1]
    theta = np.einsum("asb,btc->astc", a, b)
    o4 = np.asarray(op).reshape(2, 2, 2, 2)
    return complex(np.einsum("astc,stuv,auvc->", theta.conj(), o4, theta, optimize=True))
