"""Model structure, parameters and response probabilities.

A model is fixed by a :class:`ModelSpec` (items, categories, the map from
items to latent dimensions, number of latent classes, link and the two
item-parameter constraints) and evaluated at a :class:`Parameters` value.
Item and dimension indices are 0-based throughout.

The logit of category ``x`` of item ``j`` in class ``c`` is

    gamma_j * (xi[c, d_j] - beta_jx)             free difficulties
    gamma_j * (xi[c, d_j] - beta_j - tau_x)      rating-scale difficulties

For identifiability the first item of every dimension (its *anchor*) has
``gamma = 1`` and ``beta_{anchor,1} = 0`` (or ``beta_anchor = 0`` and
``tau_1 = 0`` under the rating scale).
"""

from __future__ import annotations

import enum
import itertools
import warnings
from dataclasses import dataclass
from functools import cached_property
from typing import Sequence

import numpy as np
from numpy.typing import ArrayLike, NDArray

from lcirt.errors import InvalidPatternError, PackingError, SpecError
from lcirt.link import LinkKind, is_valid_global, logits_to_probs


class Discrimination(str, enum.Enum):
    FREE = "free"
    CONSTRAINED = "constrained"

    def __str__(self) -> str:
        return self.value


class Difficulty(str, enum.Enum):
    FREE = "free"
    RATING_SCALE = "rating_scale"

    def __str__(self) -> str:
        return self.value


@dataclass(frozen=True)
class ModelSpec:
    """Structure of one model in the class.

    Parameters
    ----------
    categories : sequence of int
        Number of response categories ``l_j >= 2`` of every item.
    item_dims : sequence of int
        Latent dimension (0-based) measured by every item.  Every dimension
        ``0..s-1`` must own at least one item.
    n_classes : int
        Number of latent classes ``k``.
    link : LinkKind
    discrimination : Discrimination
    difficulty : Difficulty
    """

    categories: tuple[int, ...]
    item_dims: tuple[int, ...]
    n_classes: int
    link: LinkKind = LinkKind.GLOBAL
    discrimination: Discrimination = Discrimination.FREE
    difficulty: Difficulty = Difficulty.FREE

    def __post_init__(self):
        cats = tuple(int(v) for v in self.categories)
        dims = tuple(int(v) for v in self.item_dims)
        object.__setattr__(self, "categories", cats)
        object.__setattr__(self, "item_dims", dims)
        object.__setattr__(self, "link", LinkKind.parse(self.link))
        object.__setattr__(self, "discrimination", Discrimination(str(self.discrimination)))
        object.__setattr__(self, "difficulty", Difficulty(str(self.difficulty)))
        if len(cats) < 1:
            raise SpecError("a model needs at least one item")
        if len(dims) != len(cats):
            raise SpecError(
                f"item_dims has {len(dims)} entries for {len(cats)} items"
            )
        if any(l < 2 for l in cats):
            raise SpecError("every item needs at least 2 categories")
        if int(self.n_classes) < 1:
            raise SpecError("need at least one latent class")
        object.__setattr__(self, "n_classes", int(self.n_classes))
        if min(dims) < 0:
            raise SpecError("dimension indices are 0-based and non-negative")
        s = max(dims) + 1
        missing = sorted(set(range(s)) - set(dims))
        if missing:
            raise SpecError(f"dimensions {missing} own no items")
        if self.difficulty is Difficulty.RATING_SCALE and len(set(cats)) != 1:
            raise SpecError("rating-scale difficulties need equal category counts")

    @classmethod
    def from_partition(
        cls,
        partition: Sequence[Sequence[int]],
        categories: Sequence[int],
        n_classes: int,
        link: LinkKind | str = LinkKind.GLOBAL,
        discrimination: Discrimination | str = Discrimination.FREE,
        difficulty: Difficulty | str = Difficulty.FREE,
    ) -> ModelSpec:
        """Build a spec from item groups, one group per dimension.

        Dimensions are numbered by the smallest item they contain so that
        equal partitions always give equal specs.
        """
        r = len(categories)
        groups = sorted((sorted(int(j) for j in g) for g in partition if len(g)), key=min)
        dims = [-1] * r
        for d, grp in enumerate(groups):
            for j in grp:
                if not 0 <= j < r:
                    raise SpecError(f"item index {j} out of range")
                if dims[j] != -1:
                    raise SpecError(f"item {j} appears in two groups")
                dims[j] = d
        if -1 in dims:
            raise SpecError(f"items {[j for j, d in enumerate(dims) if d == -1]} not assigned")
        return cls(tuple(categories), tuple(dims), n_classes, LinkKind.parse(link),
                   Discrimination(str(discrimination)), Difficulty(str(difficulty)))

    def replace(self, **changes) -> ModelSpec:
        kw = dict(
            categories=self.categories,
            item_dims=self.item_dims,
            n_classes=self.n_classes,
            link=self.link,
            discrimination=self.discrimination,
            difficulty=self.difficulty,
        )
        kw.update(changes)
        return ModelSpec(**kw)

    @property
    def r(self) -> int:
        return len(self.categories)

    @property
    def s(self) -> int:
        return max(self.item_dims) + 1

    @property
    def k(self) -> int:
        return self.n_classes

    @property
    def max_categories(self) -> int:
        return max(self.categories)

    @cached_property
    def anchors(self) -> tuple[int, ...]:
        """First item of every dimension."""
        return tuple(self.item_dims.index(d) for d in range(self.s))

    @cached_property
    def partition(self) -> tuple[tuple[int, ...], ...]:
        return tuple(
            tuple(j for j in range(self.r) if self.item_dims[j] == d) for d in range(self.s)
        )

    @cached_property
    def category_groups(self) -> tuple[tuple[int, NDArray[np.intp]], ...]:
        """``(l, items)`` pairs grouping items by category count."""
        cats = np.asarray(self.categories)
        return tuple((int(l), np.flatnonzero(cats == l)) for l in sorted(set(self.categories)))

    @cached_property
    def is_anchor(self) -> NDArray[np.bool_]:
        a = np.zeros(self.r, dtype=bool)
        a[list(self.anchors)] = True
        return a

    @cached_property
    def layout(self) -> PhiLayout:
        return PhiLayout.build(self)

    @cached_property
    def design(self) -> NDArray[np.float64]:
        """All design matrices stacked as ``(k, r, L-1, len(phi))``.

        Rows past ``l_j - 1`` are zero for items with fewer categories.
        """
        L = self.max_categories
        Z = np.zeros((self.k, self.r, L - 1, self.layout.size))
        for c in range(self.k):
            for j in range(self.r):
                Z[c, j, : self.categories[j] - 1] = build_design_matrix(self, c, j)
        Z.setflags(write=False)
        return Z

    def to_dict(self) -> dict:
        return {
            "items": self.r,
            "categories": list(self.categories),
            "dimensions": self.s,
            "item_dims": list(self.item_dims),
            "classes": self.k,
            "link": self.link.value,
            "discrimination": self.discrimination.value,
            "difficulty": self.difficulty.value,
        }

    @classmethod
    def from_dict(cls, d: dict) -> ModelSpec:
        try:
            cats = d["categories"]
            r = d.get("items", len(cats) if not isinstance(cats, int) else None)
            if isinstance(cats, int):
                cats = [cats] * int(r)
            if r is not None and int(r) != len(cats):
                raise SpecError(f"items={r} but {len(cats)} category counts given")
            dims = d.get("item_dims")
            if dims is None:
                dims = [0] * len(cats)
            spec = cls(
                tuple(cats),
                tuple(dims),
                int(d["classes"]),
                LinkKind.parse(d.get("link", "global")),
                Discrimination(d.get("discrimination", "free")),
                Difficulty(d.get("difficulty", "free")),
            )
        except KeyError as exc:
            raise SpecError(f"model spec is missing key {exc.args[0]!r}") from None
        except (TypeError, ValueError) as exc:
            if isinstance(exc, SpecError):
                raise
            raise SpecError(str(exc)) from None
        if "dimensions" in d and int(d["dimensions"]) != spec.s:
            raise SpecError(f"dimensions={d['dimensions']} but item_dims imply {spec.s}")
        return spec


def _frozen(a, dtype=float):
    a = np.array(a, dtype=dtype)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class Parameters:
    """Class weights, support points and item parameters.

    ``beta`` holds one threshold vector per item (free difficulties);
    ``beta_rs`` and ``tau`` hold the rating-scale decomposition, with
    ``tau[0]`` the first category step.  Exactly one of the two forms is set.
    """

    pi: NDArray[np.float64]
    xi: NDArray[np.float64]
    gamma: NDArray[np.float64]
    beta: tuple[NDArray[np.float64], ...] | None = None
    beta_rs: NDArray[np.float64] | None = None
    tau: NDArray[np.float64] | None = None

    def __post_init__(self):
        object.__setattr__(self, "pi", _frozen(self.pi))
        xi = _frozen(self.xi)
        if xi.ndim == 1:
            xi = _frozen(xi[:, None])
        object.__setattr__(self, "xi", xi)
        object.__setattr__(self, "gamma", _frozen(self.gamma))
        if (self.beta is None) == (self.beta_rs is None):
            raise PackingError("give either beta or (beta_rs, tau)")
        if self.beta is not None:
            object.__setattr__(self, "beta", tuple(_frozen(b) for b in self.beta))
        else:
            if self.tau is None:
                raise PackingError("rating-scale parameters need tau")
            object.__setattr__(self, "beta_rs", _frozen(self.beta_rs))
            object.__setattr__(self, "tau", _frozen(self.tau))

    @property
    def k(self) -> int:
        return len(self.pi)

    @property
    def rating_scale(self) -> bool:
        return self.beta is None

    def thresholds(self, max_categories: int | None = None) -> NDArray[np.float64]:
        """Effective ``beta_jx`` as an ``(r, L-1)`` array, zero-padded."""
        if self.beta is None:
            return self.beta_rs[:, None] + self.tau[None, :]
        width = max(len(b) for b in self.beta)
        if max_categories is not None:
            width = max(width, max_categories - 1)
        B = np.zeros((len(self.beta), width))
        for j, b in enumerate(self.beta):
            B[j, : len(b)] = b
        return B

    def replace(self, **changes) -> Parameters:
        kw = dict(pi=self.pi, xi=self.xi, gamma=self.gamma, beta=self.beta,
                  beta_rs=self.beta_rs, tau=self.tau)
        kw.update(changes)
        return Parameters(**kw)

    def equals(self, other: Parameters, atol: float = 0.0) -> bool:
        def close(a, b):
            if a is None or b is None:
                return a is None and b is None
            a, b = np.asarray(a), np.asarray(b)
            return a.shape == b.shape and bool(np.all(np.abs(a - b) <= atol))

        if not (close(self.pi, other.pi) and close(self.xi, other.xi)
                and close(self.gamma, other.gamma)):
            return False
        if self.beta is not None:
            return other.beta is not None and len(self.beta) == len(other.beta) and all(
                close(a, b) for a, b in zip(self.beta, other.beta)
            )
        return close(self.beta_rs, other.beta_rs) and close(self.tau, other.tau)

    def to_dict(self) -> dict:
        d = {"pi": self.pi.tolist(), "xi": self.xi.tolist(), "gamma": self.gamma.tolist()}
        if self.beta is not None:
            d["beta"] = [b.tolist() for b in self.beta]
        else:
            d["beta_rs"] = self.beta_rs.tolist()
            d["tau"] = self.tau.tolist()
        return d

    @classmethod
    def from_dict(cls, d: dict) -> Parameters:
        try:
            if "beta" in d:
                return cls(d["pi"], d["xi"], d["gamma"], beta=tuple(d["beta"]))
            return cls(d["pi"], d["xi"], d["gamma"], beta_rs=d["beta_rs"], tau=d["tau"])
        except KeyError as exc:
            raise PackingError(f"parameters missing key {exc.args[0]!r}") from None


# ---------------------------------------------------------------------------
# validation and parameter counts


@dataclass(frozen=True)
class Violation:
    code: str
    message: str
    location: tuple = ()

    def __str__(self) -> str:
        return self.message


def _shape_violations(spec: ModelSpec, p: Parameters) -> list[Violation]:
    out = []
    if p.pi.shape != (spec.k,):
        out.append(Violation("shape", f"pi has shape {p.pi.shape}, expected ({spec.k},)"))
    if p.xi.shape != (spec.k, spec.s):
        out.append(Violation("shape", f"xi has shape {p.xi.shape}, expected {(spec.k, spec.s)}"))
    if p.gamma.shape != (spec.r,):
        out.append(Violation("shape", f"gamma has shape {p.gamma.shape}, expected ({spec.r},)"))
    if spec.difficulty is Difficulty.FREE:
        if p.beta is None:
            out.append(Violation("shape", "free difficulties need per-item beta"))
        elif len(p.beta) != spec.r or any(
            b.shape != (l - 1,) for b, l in zip(p.beta, spec.categories)
        ):
            out.append(Violation("shape", "beta does not match the category counts"))
    else:
        l = spec.categories[0]
        if p.beta_rs is None:
            out.append(Violation("shape", "rating-scale difficulties need beta_rs and tau"))
        elif p.beta_rs.shape != (spec.r,) or p.tau.shape != (l - 1,):
            out.append(Violation("shape", "beta_rs/tau do not match the spec"))
    return out


def validate(spec: ModelSpec, params: Parameters) -> list[Violation]:
    """List every violated parameter invariant; an empty list means valid.

    Non-positive discriminations are legal but reported through
    :mod:`warnings`.
    """
    out = _shape_violations(spec, params)
    if out:
        return out
    pi = params.pi
    if np.any(~np.isfinite(pi)) or np.any(pi <= 0):
        out.append(Violation("pi", "class weights must be positive"))
    if abs(pi.sum() - 1.0) > 1e-12:
        out.append(Violation("pi", f"class weights sum to {pi.sum()!r}, not 1"))
    for name, arr in (("xi", params.xi), ("gamma", params.gamma)):
        if not np.all(np.isfinite(arr)):
            out.append(Violation("finite", f"{name} has non-finite entries"))

    for jd in spec.anchors:
        if params.gamma[jd] != 1.0:
            out.append(Violation("anchor", f"gamma of anchor item {jd} must be 1", (jd,)))
    if spec.discrimination is Discrimination.CONSTRAINED:
        bad = np.flatnonzero(params.gamma != 1.0)
        for j in bad:
            out.append(Violation("gamma", f"gamma not 1 under constraint (item {j})", (int(j),)))
    elif np.any(params.gamma <= 0):
        warnings.warn("non-positive discrimination: "
                      f"items {np.flatnonzero(params.gamma <= 0).tolist()}", stacklevel=2)

    if spec.difficulty is Difficulty.FREE:
        for jd in spec.anchors:
            if params.beta[jd][0] != 0.0:
                out.append(Violation("anchor", f"beta[{jd}][0] of anchor item must be 0", (jd, 0)))
        if not all(np.all(np.isfinite(b)) for b in params.beta):
            out.append(Violation("finite", "beta has non-finite entries"))
        if spec.link is LinkKind.GLOBAL:
            for j, b in enumerate(params.beta):
                if np.any(np.diff(b) <= 0):
                    out.append(Violation("order", f"thresholds not increasing (item {j})", (j,)))
    else:
        for jd in spec.anchors:
            if params.beta_rs[jd] != 0.0:
                out.append(Violation("anchor", f"beta_rs[{jd}] of anchor item must be 0", (jd,)))
        if params.tau[0] != 0.0:
            out.append(Violation("anchor", "tau[0] must be 0"))
        if not (np.all(np.isfinite(params.beta_rs)) and np.all(np.isfinite(params.tau))):
            out.append(Violation("finite", "beta_rs/tau have non-finite entries"))
        if spec.link is LinkKind.GLOBAL and np.any(np.diff(params.tau) <= 0):
            out.append(Violation("order", "thresholds not increasing (tau)"))
    return out


def count_free_parameters(spec: ModelSpec) -> int:
    k, s, r = spec.k, spec.s, spec.r
    n = (k - 1) + s * k
    if spec.difficulty is Difficulty.FREE:
        n += sum(l - 1 for l in spec.categories) - s
    else:
        n += (r - s) + (spec.categories[0] - 2)
    if spec.discrimination is Discrimination.FREE:
        n += r - s
    return n


def count_standard_lc_parameters(categories: Sequence[int], n_classes: int) -> int:
    """Free parameters of the unrestricted latent class model."""
    return (n_classes - 1) + n_classes * sum(int(l) - 1 for l in categories)


# ---------------------------------------------------------------------------
# packing


@dataclass(frozen=True)
class PhiLayout:
    """Column map of the stacked ability/difficulty vector ``phi``.

    ``xi`` occupies the first ``s*k`` entries in class-major order.  With
    free difficulties ``beta_col[j, x]`` is the column of ``beta_j,x+1``
    (-1 for the anchored ones); under the rating scale ``beta_col[j]`` and
    ``tau_col[x]`` play the same role.
    """

    size: int
    n_xi: int
    beta_col: NDArray[np.intp]
    tau_col: NDArray[np.intp] | None

    @classmethod
    def build(cls, spec: ModelSpec) -> PhiLayout:
        pos = spec.s * spec.k
        if spec.difficulty is Difficulty.FREE:
            beta_col = -np.ones((spec.r, spec.max_categories - 1), dtype=np.intp)
            for j, l in enumerate(spec.categories):
                for x in range(l - 1):
                    if x == 0 and spec.is_anchor[j]:
                        continue
                    beta_col[j, x] = pos
                    pos += 1
            return cls(pos, spec.s * spec.k, beta_col, None)
        beta_col = -np.ones(spec.r, dtype=np.intp)
        for j in range(spec.r):
            if not spec.is_anchor[j]:
                beta_col[j] = pos
                pos += 1
        l = spec.categories[0]
        tau_col = -np.ones(l - 1, dtype=np.intp)
        for x in range(1, l - 1):
            tau_col[x] = pos
            pos += 1
        return cls(pos, spec.s * spec.k, beta_col, tau_col)


@dataclass(frozen=True)
class PackedParams:
    phi: NDArray[np.float64]
    gamma_free: NDArray[np.float64]
    pi_free: NDArray[np.float64]

    @property
    def size(self) -> int:
        return len(self.phi) + len(self.gamma_free) + len(self.pi_free)


def free_gamma_items(spec: ModelSpec) -> NDArray[np.intp]:
    if spec.discrimination is Discrimination.CONSTRAINED:
        return np.zeros(0, dtype=np.intp)
    return np.flatnonzero(~spec.is_anchor)


def pack_phi(spec: ModelSpec, params: Parameters) -> NDArray[np.float64]:
    lay = spec.layout
    phi = np.empty(lay.size)
    phi[: lay.n_xi] = params.xi.reshape(-1)
    if spec.difficulty is Difficulty.FREE:
        for j, b in enumerate(params.beta):
            cols = lay.beta_col[j, : len(b)]
            keep = cols >= 0
            phi[cols[keep]] = b[keep]
    else:
        keep = lay.beta_col >= 0
        phi[lay.beta_col[keep]] = params.beta_rs[keep]
        tk = lay.tau_col >= 0
        phi[lay.tau_col[tk]] = params.tau[tk]
    return phi


def unpack_phi(spec: ModelSpec, phi: ArrayLike, gamma, pi) -> Parameters:
    lay = spec.layout
    phi = np.asarray(phi, dtype=float)
    if phi.shape != (lay.size,):
        raise PackingError(f"phi has length {phi.size}, expected {lay.size}")
    xi = phi[: lay.n_xi].reshape(spec.k, spec.s)
    if spec.difficulty is Difficulty.FREE:
        beta = []
        for j, l in enumerate(spec.categories):
            cols = lay.beta_col[j, : l - 1]
            b = np.zeros(l - 1)
            b[cols >= 0] = phi[cols[cols >= 0]]
            beta.append(b)
        return Parameters(pi, xi, gamma, beta=tuple(beta))
    beta_rs = np.zeros(spec.r)
    keep = lay.beta_col >= 0
    beta_rs[keep] = phi[lay.beta_col[keep]]
    tau = np.zeros(len(lay.tau_col))
    tk = lay.tau_col >= 0
    tau[tk] = phi[lay.tau_col[tk]]
    return Parameters(pi, xi, gamma, beta_rs=beta_rs, tau=tau)


def pack(params: Parameters, spec: ModelSpec) -> PackedParams:
    """Stack the free parameters; the anchored ones are dropped."""
    bad = _shape_violations(spec, params)
    if bad:
        raise PackingError("; ".join(v.message for v in bad))
    return PackedParams(
        phi=pack_phi(spec, params),
        gamma_free=params.gamma[free_gamma_items(spec)].copy(),
        pi_free=params.pi[1:].copy(),
    )


def unpack(packed: PackedParams, spec: ModelSpec) -> Parameters:
    gi = free_gamma_items(spec)
    if len(packed.gamma_free) != len(gi):
        raise PackingError(f"gamma_free has length {len(packed.gamma_free)}, expected {len(gi)}")
    if len(packed.pi_free) != spec.k - 1:
        raise PackingError(f"pi_free has length {len(packed.pi_free)}, expected {spec.k - 1}")
    gamma = np.ones(spec.r)
    gamma[gi] = packed.gamma_free
    pi_free = np.asarray(packed.pi_free, dtype=float)
    pi = np.concatenate([[1.0 - pi_free.sum()], pi_free])
    return unpack_phi(spec, packed.phi, gamma, pi)


# ---------------------------------------------------------------------------
# design matrices and probabilities


def build_design_matrix(spec: ModelSpec, c: int, j: int) -> NDArray[np.float64]:
    """``Z_cj`` with ``logits = gamma_j * Z_cj @ phi``."""
    if not (0 <= c < spec.k and 0 <= j < spec.r):
        raise IndexError(f"class {c} / item {j} out of range")
    lay = spec.layout
    l = spec.categories[j]
    Z = np.zeros((l - 1, lay.size))
    Z[:, c * spec.s + spec.item_dims[j]] = 1.0
    if spec.difficulty is Difficulty.FREE:
        for x in range(l - 1):
            col = lay.beta_col[j, x]
            if col >= 0:
                Z[x, col] = -1.0
    else:
        if lay.beta_col[j] >= 0:
            Z[:, lay.beta_col[j]] = -1.0
        for x in range(l - 1):
            if lay.tau_col[x] >= 0:
                Z[x, lay.tau_col[x]] = -1.0
    return Z


def item_logits(spec: ModelSpec, params: Parameters, c: int, j: int) -> NDArray[np.float64]:
    l = spec.categories[j]
    if params.beta is not None:
        b = params.beta[j]
    else:
        b = params.beta_rs[j] + params.tau
    return params.gamma[j] * (params.xi[c, spec.item_dims[j]] - b[: l - 1])


def all_logits(spec: ModelSpec, params: Parameters) -> NDArray[np.float64]:
    """Logits of every class and item, ``(k, r, L-1)``, zero-padded."""
    B = params.thresholds(spec.max_categories)
    eta = params.xi[:, list(spec.item_dims)][:, :, None] - B[None, :, :]
    g = params.gamma[None, :, None] * eta
    for j, l in enumerate(spec.categories):
        g[:, j, l - 1:] = 0.0
    return g


def probs_from_logits(spec: ModelSpec, g: NDArray[np.float64]) -> NDArray[np.float64]:
    """Category probabilities ``(k, r, L)`` from padded logits."""
    lam = np.zeros(g.shape[:2] + (spec.max_categories,))
    for l, items in spec.category_groups:
        lam[:, items, :l] = logits_to_probs(g[:, items, : l - 1], spec.link)
    return lam


def logits_valid(spec: ModelSpec, g: NDArray[np.float64]) -> bool:
    if spec.link is not LinkKind.GLOBAL:
        return bool(np.all(np.isfinite(g)))
    for l, items in spec.category_groups:
        if not np.all(is_valid_global(g[:, items, : l - 1])):
            return False
    return bool(np.all(np.isfinite(g)))


def class_item_probs(spec: ModelSpec, params: Parameters) -> NDArray[np.float64]:
    """``lam[c, j, x]`` for every class, item and category (zero-padded)."""
    return probs_from_logits(spec, all_logits(spec, params))


def conditional_item_probs(spec: ModelSpec, params: Parameters, c: int, j: int):
    return logits_to_probs(item_logits(spec, params, c, j), spec.link)


def _check_pattern(spec_categories, x) -> NDArray[np.intp]:
    x = np.asarray(x)
    if x.shape != (len(spec_categories),):
        raise InvalidPatternError(f"pattern has length {x.size}, expected {len(spec_categories)}")
    if not np.issubdtype(x.dtype, np.integer):
        if not np.all(x == np.round(x)):
            raise InvalidPatternError("pattern entries must be integers")
        x = x.astype(np.intp)
    cats = np.asarray(spec_categories)
    bad = np.flatnonzero((x < 0) | (x >= cats))
    if bad.size:
        j = int(bad[0])
        raise InvalidPatternError(f"category {x[j]} out of range for item {j}")
    return x.astype(np.intp)


def log_conditional_pattern_probs(lam: NDArray[np.float64], patterns: NDArray[np.intp]):
    """``log p(x | c)`` for a ``(P, r)`` block of patterns, shape ``(k, P)``."""
    r = lam.shape[1]
    with np.errstate(divide="ignore"):
        ll = np.log(lam[:, np.arange(r)[None, :], patterns])
    return ll.sum(axis=-1)


def conditional_pattern_prob(spec: ModelSpec, params: Parameters, x, c: int) -> float:
    x = _check_pattern(spec.categories, x)
    lam = class_item_probs(spec, params)
    if spec.r > 20:
        return float(np.exp(log_conditional_pattern_probs(lam[c : c + 1], x[None])[0, 0]))
    return float(np.prod(lam[c, np.arange(spec.r), x]))


def manifest_prob(spec: ModelSpec, params: Parameters, x) -> float:
    x = _check_pattern(spec.categories, x)
    lam = class_item_probs(spec, params)
    lp = log_conditional_pattern_probs(lam, x[None])[:, 0] + np.log(params.pi)
    m = lp.max()
    return float(np.exp(m) * np.exp(lp - m).sum())


def all_patterns(categories: Sequence[int]) -> NDArray[np.intp]:
    """Every response configuration, in lexicographic order."""
    return np.array(list(itertools.product(*(range(l) for l in categories))), dtype=np.intp)


# ---------------------------------------------------------------------------
# naming, class order, nesting


_TABLE = {
    (Discrimination.FREE, Difficulty.FREE): ("GRM", "GPCM", "SM"),
    (Discrimination.FREE, Difficulty.RATING_SCALE): ("RS-GRM", "RS-GPCM", "RS-SM"),
    (Discrimination.CONSTRAINED, Difficulty.FREE): ("1P-GRM", "PCM", "SRM"),
    (Discrimination.CONSTRAINED, Difficulty.RATING_SCALE): ("1P-RS-GRM", "RSM", "SRSM"),
}


def name_model(spec: ModelSpec) -> str:
    """Conventional IRT label of the item parameterization."""
    col = {LinkKind.GLOBAL: 0, LinkKind.LOCAL: 1, LinkKind.CONTINUATION: 2}[spec.link]
    name = _TABLE[(spec.discrimination, spec.difficulty)][col]
    return f"LC-multidimensional {name}" if spec.s > 1 else name


def permute_classes(params: Parameters, order: Sequence[int]) -> Parameters:
    order = np.asarray(order)
    return params.replace(pi=params.pi[order], xi=params.xi[order])


def canonical_order(params: Parameters) -> NDArray[np.intp]:
    """Class order by ascending first support coordinate (stable)."""
    return np.argsort(params.xi[:, 0], kind="stable")


def embed(params: Parameters, spec_from: ModelSpec, spec_to: ModelSpec) -> Parameters:
    """Re-express a fit of ``spec_from`` as parameters of the nesting ``spec_to``.

    ``spec_to`` may free the discriminations, free the difficulties, or split
    dimensions of ``spec_from``; the logits of every class and item are
    preserved, so the likelihood is unchanged.
    """
    if (spec_from.categories != spec_to.categories or spec_from.k != spec_to.k
            or spec_from.link is not spec_to.link):
        raise SpecError("embedding needs equal items, classes and link")
    if (spec_from.discrimination is Discrimination.FREE
            and spec_to.discrimination is Discrimination.CONSTRAINED):
        raise SpecError("constrained discriminations do not nest free ones")
    if (spec_from.difficulty is Difficulty.FREE
            and spec_to.difficulty is Difficulty.RATING_SCALE):
        raise SpecError("rating-scale difficulties do not nest free ones")
    parent = []
    for grp in spec_to.partition:
        ds = {spec_from.item_dims[j] for j in grp}
        if len(ds) != 1:
            raise SpecError("target partition is not a refinement of the source")
        parent.append(ds.pop())

    r = spec_to.r
    g_from = params.gamma
    B = params.thresholds(spec_from.max_categories)
    # per target dimension: scale a = gamma_anchor, shift b = beta_anchor,1
    scale = np.array([g_from[ja] for ja in spec_to.anchors])
    shift = np.array([B[ja, 0] for ja in spec_to.anchors])
    xi = np.empty((spec_to.k, spec_to.s))
    for e, d in enumerate(parent):
        xi[:, e] = scale[e] * (params.xi[:, d] - shift[e])
    dim_to = np.asarray(spec_to.item_dims)
    gamma = g_from / scale[dim_to]

    if spec_to.difficulty is Difficulty.FREE:
        beta = tuple(
            scale[dim_to[j]] * (B[j, : spec_to.categories[j] - 1] - shift[dim_to[j]])
            for j in range(r)
        )
        out = params.replace(xi=xi, gamma=gamma, beta=beta, beta_rs=None, tau=None)
    else:
        if not np.allclose(scale, scale[0], rtol=0, atol=1e-12):
            raise SpecError("rating-scale steps cannot absorb different anchor slopes")
        a = scale[0]
        beta_rs = np.array([a * (params.beta_rs[j] - params.beta_rs[spec_to.anchors[dim_to[j]]])
                            for j in range(r)])
        tau = a * params.tau
        sh = np.array([params.beta_rs[ja] for ja in spec_to.anchors])
        xi = np.empty((spec_to.k, spec_to.s))
        for e, d in enumerate(parent):
            xi[:, e] = a * (params.xi[:, d] - sh[e])
        out = params.replace(xi=xi, gamma=gamma, beta=None, beta_rs=beta_rs, tau=tau)
    # exact anchor values; the division above may leave rounding residue
    gam = out.gamma.copy()
    gam[list(spec_to.anchors)] = 1.0
    if spec_to.discrimination is Discrimination.CONSTRAINED:
        gam[:] = 1.0
    out = out.replace(gamma=gam)
    if out.beta is not None:
        beta = [b.copy() for b in out.beta]
        for ja in spec_to.anchors:
            beta[ja][0] = 0.0
        out = out.replace(beta=tuple(beta))
    else:
        brs = out.beta_rs.copy()
        brs[list(spec_to.anchors)] = 0.0
        tau = out.tau.copy()
        tau[0] = 0.0
        out = out.replace(beta_rs=brs, tau=tau)
    return out


__all__ = [
    "Difficulty",
    "Discrimination",
    "ModelSpec",
    "PackedParams",
    "Parameters",
    "PhiLayout",
    "Violation",
    "all_logits",
    "all_patterns",
    "build_design_matrix",
    "canonical_order",
    "class_item_probs",
    "conditional_item_probs",
    "conditional_pattern_prob",
    "count_free_parameters",
    "count_standard_lc_parameters",
    "embed",
    "item_logits",
    "manifest_prob",
    "name_model",
    "pack",
    "unpack",
    "validate",
]
