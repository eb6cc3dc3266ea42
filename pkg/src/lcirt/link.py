"""Ordinal logit links: global (cumulative), local (adjacent-category) and
continuation-ratio logits.

Every link is written as ``g = C @ log(M @ lam)`` with ``C = (-I | I)``; the
top block of ``M`` builds the denominators and the bottom block the
numerators of the ``l - 1`` logits.  All functions accept stacked inputs:
the category axis is the last one and any leading axes are broadcast.
"""

from __future__ import annotations

import enum

import numpy as np
from numpy.typing import ArrayLike, NDArray

from lcirt.errors import (
    DegenerateDistributionError,
    InvalidCategoryCountError,
    InvalidOrderingError,
    SingularJacobianError,
)


class LinkKind(str, enum.Enum):
    GLOBAL = "global"
    LOCAL = "local"
    CONTINUATION = "continuation"

    @classmethod
    def parse(cls, value: str | LinkKind) -> LinkKind:
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).lower())
        except ValueError:
            raise ValueError(
                f"unknown link {value!r}; expected one of "
                + ", ".join(k.value for k in cls)
            ) from None

    def __str__(self) -> str:
        return self.value


LINK_ORDER = (LinkKind.GLOBAL, LinkKind.LOCAL, LinkKind.CONTINUATION)


def _check_l(l: int) -> int:
    if int(l) != l or l < 2:
        raise InvalidCategoryCountError(f"need at least 2 categories, got {l}")
    return int(l)


def lower_ones(a: int) -> NDArray[np.float64]:
    """The ``a x a`` lower-triangular matrix of ones."""
    return np.tril(np.ones((a, a)))


def build_constraint_matrices(l: int, kind: LinkKind | str):
    """Return ``(C, M)`` such that the logits are ``C @ log(M @ lam)``.

    ``C`` has shape ``(l-1, 2(l-1))`` and ``M`` has shape ``(2(l-1), l)``.
    """
    l = _check_l(l)
    kind = LinkKind.parse(kind)
    a = l - 1
    eye = np.eye(a)
    zero = np.zeros((a, 1))
    T = lower_ones(a)
    C = np.hstack([-eye, eye])
    top_block = T if kind is LinkKind.GLOBAL else eye
    bottom_block = eye if kind is LinkKind.LOCAL else T.T
    M = np.vstack([np.hstack([top_block, zero]), np.hstack([zero, bottom_block])])
    return C, M


def expit(x):
    """Logistic function in branch form, safe for large ``|x|``."""
    x = np.asarray(x, dtype=float)
    e = np.exp(-np.abs(x))
    return np.where(x >= 0, 1.0 / (1.0 + e), e / (1.0 + e))


def log_expit(x):
    x = np.asarray(x, dtype=float)
    return -np.logaddexp(0.0, -x)


def is_valid_global(g: ArrayLike) -> NDArray[np.bool_] | bool:
    """True where global logits are strictly decreasing along the last axis."""
    g = np.asarray(g, dtype=float)
    if g.shape[-1] < 2:
        return np.ones(g.shape[:-1], dtype=bool) if g.ndim > 1 else True
    return np.all(np.diff(g, axis=-1) < 0, axis=-1)


def _global_probs(g):
    ngl = g.shape[-1]
    lam = np.empty(g.shape[:-1] + (ngl + 1,))
    lam[..., 0] = expit(-g[..., 0])
    lam[..., ngl] = expit(g[..., ngl - 1])
    if ngl > 1:
        a = g[..., :-1]
        b = g[..., 1:]
        # expit(a) - expit(b) without cancellation for a > b
        lam[..., 1:ngl] = expit(a) * expit(-b) * -np.expm1(b - a)
    return lam


def _local_probs(g):
    z = np.concatenate([np.zeros(g.shape[:-1] + (1,)), np.cumsum(g, axis=-1)], axis=-1)
    z = z - z.max(axis=-1, keepdims=True)
    w = np.exp(z)
    return w / w.sum(axis=-1, keepdims=True)


def _continuation_probs(g):
    log_surv = np.concatenate(
        [np.zeros(g.shape[:-1] + (1,)), np.cumsum(log_expit(g), axis=-1)], axis=-1
    )
    lam = np.empty_like(log_surv)
    lam[..., :-1] = np.exp(log_surv[..., :-1] + log_expit(-g))
    lam[..., -1] = np.exp(log_surv[..., -1])
    return lam


def logits_to_probs(g: ArrayLike, kind: LinkKind | str) -> NDArray[np.float64]:
    """Invert a logit vector (or a stack of them) to category probabilities.

    Raises
    ------
    InvalidOrderingError
        For the global link when some logit vector is not strictly
        decreasing; the caller is expected to shorten its step.
    """
    kind = LinkKind.parse(kind)
    g = np.asarray(g, dtype=float)
    if g.ndim == 0 or g.shape[-1] < 1:
        raise InvalidCategoryCountError("logit vector must have length >= 1")
    if not np.all(np.isfinite(g)):
        raise ValueError("logits must be finite")
    if kind is LinkKind.GLOBAL:
        if not np.all(is_valid_global(g)):
            raise InvalidOrderingError("global logits must be strictly decreasing")
        return _global_probs(g)
    if kind is LinkKind.LOCAL:
        return _local_probs(g)
    return _continuation_probs(g)


def probs_to_logits(lam: ArrayLike, kind: LinkKind | str) -> NDArray[np.float64]:
    """``C @ log(M @ lam)`` along the last axis."""
    kind = LinkKind.parse(kind)
    lam = np.asarray(lam, dtype=float)
    l = _check_l(lam.shape[-1])
    if np.any(lam <= 0):
        raise DegenerateDistributionError("category probabilities must be positive")
    C, M = build_constraint_matrices(l, kind)
    return np.log(lam @ M.T) @ C.T


def _dlam_dpsi(lam):
    # d lam_a / d psi_b with psi_b = log(lam_b / lam_0), b = 1..l-1
    tail = lam[..., 1:]
    D = -lam[..., :, None] * tail[..., None, :]
    idx = np.arange(1, lam.shape[-1])
    D[..., idx, idx - 1] += tail
    return D


def logit_jacobian(lam: ArrayLike, kind: LinkKind | str) -> NDArray[np.float64]:
    """``J = dg/dpsi`` for baseline-category canonical parameters ``psi``."""
    kind = LinkKind.parse(kind)
    lam = np.asarray(lam, dtype=float)
    l = _check_l(lam.shape[-1])
    if np.any(lam <= 0):
        raise DegenerateDistributionError("category probabilities must be positive")
    C, M = build_constraint_matrices(l, kind)
    Ml = lam @ M.T
    return C @ ((M @ _dlam_dpsi(lam)) / Ml[..., :, None])


def canonical_jacobian(lam: ArrayLike, kind: LinkKind | str) -> NDArray[np.float64]:
    """``R = dpsi/dg``, the inverse of :func:`logit_jacobian`.

    For the local link the canonical parameters are partial sums of the
    logits, so ``R`` is the lower-triangular matrix of ones irrespective of
    ``lam``.
    """
    kind = LinkKind.parse(kind)
    lam = np.asarray(lam, dtype=float)
    l = _check_l(lam.shape[-1])
    if kind is LinkKind.LOCAL:
        if np.any(lam <= 0):
            raise DegenerateDistributionError("category probabilities must be positive")
        return np.broadcast_to(lower_ones(l - 1), lam.shape[:-1] + (l - 1, l - 1)).copy()
    J = logit_jacobian(lam, kind)
    try:
        R = np.linalg.inv(J)
    except np.linalg.LinAlgError as exc:
        raise SingularJacobianError("logit Jacobian is singular") from exc
    if not np.all(np.isfinite(R)):
        raise SingularJacobianError("logit Jacobian is numerically singular")
    return R
