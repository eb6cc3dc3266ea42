"""Model comparison and the four-step model-selection procedure.

The procedure runs, in order:

1. number of latent classes ``k`` by BIC on the unrestricted latent class
   model (``k`` just before the first increase of BIC);
2. link function by BIC on the ``r``-dimensional model with free item
   parameters;
3. dimensionality by a chain of likelihood-ratio tests along a sequence of
   successively coarser item partitions;
4. item-parameter constraints by likelihood-ratio tests among the four
   discrimination/difficulty regimes.

Every ``choose_*`` step either fits its candidate models or, when given a
``table`` of precomputed :class:`ModelSummary` rows, only applies the
decision rule.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, NamedTuple, Sequence

from lcirt.data import ResponseDataset
from lcirt.errors import FailedOptimizationError, SelectionError, SpecError, UsageError
from lcirt.estimate import Controls, FitResult, compute_bic, fit_em, fit_multistart, fit_standard_lc
from lcirt.link import LINK_ORDER, LinkKind
from lcirt.model import Difficulty, Discrimination, ModelSpec, embed, name_model
from lcirt.special import chi_square_sf

log = logging.getLogger(__name__)

ALPHA = 0.05
DEVIANCE_TOL = 1e-6
BIC_TIE_TOL = 1e-9
STEPS = ("k", "link", "dim", "constraints")


# ---------------------------------------------------------------------------
# comparison primitives


@dataclass(frozen=True)
class LrTestResult:
    deviance: float
    df: int
    p_value: float

    def accepts(self, alpha: float = ALPHA) -> bool:
        """True when the restricted model is not rejected at level ``alpha``."""
        return self.p_value >= alpha

    def to_dict(self) -> dict:
        return {"deviance": self.deviance, "df": self.df, "p_value": self.p_value}


def lr_test(loglik0: float, n_par0: int, loglik1: float, n_par1: int) -> LrTestResult:
    """Likelihood-ratio test of a restricted model (0) against its nesting one (1)."""
    if n_par0 >= n_par1:
        raise UsageError(f"restricted model must have fewer parameters ({n_par0} >= {n_par1})")
    dev = -2.0 * (loglik0 - loglik1)
    if dev < -DEVIANCE_TOL:
        raise FailedOptimizationError(
            f"negative deviance {dev:.6g}: the nesting model was not fitted to its maximum"
        )
    dev = max(dev, 0.0)
    df = int(n_par1 - n_par0)
    return LrTestResult(dev, df, chi_square_sf(dev, df))


@dataclass(frozen=True)
class ModelSummary:
    """One row of a comparison table."""

    label: str
    loglik: float
    n_par: int
    n: int

    @property
    def bic(self) -> float:
        return compute_bic(self.loglik, self.n_par, self.n)

    @classmethod
    def from_fit(cls, fit: FitResult, label: str | None = None) -> ModelSummary:
        return cls(label or fit.label, float(fit.loglik), int(fit.n_par), int(fit.n))

    def to_dict(self) -> dict:
        return {"label": self.label, "loglik": self.loglik, "n_par": self.n_par, "bic": self.bic}


def _compare(restricted: ModelSummary, full: ModelSummary) -> LrTestResult:
    # merging dimensions with k <= 2 classes does not lower the nominal count:
    # the two specs are then reparameterizations of one model
    if restricted.n_par >= full.n_par:
        dev = -2.0 * (restricted.loglik - full.loglik)
        if dev < -DEVIANCE_TOL:
            raise FailedOptimizationError(f"negative deviance {dev:.6g} between equivalent models")
        return LrTestResult(max(dev, 0.0), 0, 1.0)
    return lr_test(restricted.loglik, restricted.n_par, full.loglik, full.n_par)


class Regime(NamedTuple):
    discrimination: Discrimination
    difficulty: Difficulty

    @property
    def code(self) -> str:
        return ("F" if self.discrimination is Discrimination.FREE else "C") + (
            "F" if self.difficulty is Difficulty.FREE else "R")

    def label(self, link: LinkKind | str) -> str:
        spec = ModelSpec((3,), (0,), 1, link, self.discrimination, self.difficulty)
        return name_model(spec)

    @classmethod
    def parse(cls, value) -> Regime:
        if isinstance(value, Regime):
            return value
        if isinstance(value, str) and value.upper() in _REGIME_CODES:
            return _REGIME_CODES[value.upper()]
        d, b = value
        return cls(Discrimination(str(d)), Difficulty(str(b)))


FF = Regime(Discrimination.FREE, Difficulty.FREE)
FR = Regime(Discrimination.FREE, Difficulty.RATING_SCALE)
CF = Regime(Discrimination.CONSTRAINED, Difficulty.FREE)
CC = Regime(Discrimination.CONSTRAINED, Difficulty.RATING_SCALE)
REGIMES = (FF, FR, CF, CC)
_REGIME_CODES = {g.code: g for g in REGIMES}


# ---------------------------------------------------------------------------
# fitting helpers


class _Fitter:
    """Fits specs once per pipeline run and repairs nested pairs.

    When a nesting model comes out with a lower log-likelihood than a model
    it contains, EM is rerun for it from the embedded restricted solution,
    which can only go up from the restricted maximum.
    """

    def __init__(self, data: ResponseDataset, controls: Controls):
        self.data = data
        self.controls = controls
        self.fits: dict[ModelSpec, FitResult] = {}
        self.repairs = 0

    def fit(self, spec: ModelSpec) -> FitResult:
        if spec not in self.fits:
            log.info("fitting %s (k=%d, s=%d, %s)", name_model(spec), spec.k, spec.s, spec.link)
            self.fits[spec] = fit_multistart(spec, self.data, self.controls)
        return self.fits[spec]

    def nest(self, restricted: ModelSpec, full: ModelSpec) -> tuple[FitResult, FitResult]:
        small, big = self.fit(restricted), self.fit(full)
        if big.loglik < small.loglik:
            start = embed(small.params, restricted, full)
            warm = fit_em(full, self.data, start, self.controls,
                          start_id=self.controls.n_random + 1)
            self.repairs += 1
            log.info("warm restart of %s: %.6f -> %.6f", warm.label, big.loglik, warm.loglik)
            if warm.loglik > big.loglik:
                self.fits[full] = big = warm
        return small, big


def _controls(controls: Controls | None) -> Controls:
    return controls if controls is not None else Controls()


def _full_partition(r: int):
    return tuple((j,) for j in range(r))


# ---------------------------------------------------------------------------
# step 1: number of latent classes


@dataclass
class KStep:
    chosen_k: int
    table: list[ModelSummary]
    boundary: bool
    fits: list[FitResult] = field(default_factory=list, repr=False)

    def to_dict(self) -> dict:
        rows = [dict(k=i + 1, **row.to_dict()) for i, row in enumerate(self.table)]
        return {"chosen_k": self.chosen_k, "boundary": self.boundary, "table": rows}


def decide_k(bics: Sequence[float]) -> tuple[int, bool]:
    """``k`` just before the first strict increase of BIC over ``k = 1, 2, ...``.

    The flag is set when BIC never increases, so the largest ``k`` tried is
    returned at the boundary of the search.
    """
    if not len(bics):
        raise UsageError("empty BIC sequence")
    for i in range(1, len(bics)):
        if bics[i] > bics[i - 1]:
            return i, False
    return len(bics), len(bics) > 1


def choose_k(data: ResponseDataset | None = None, k_max: int | None = None,
             controls: Controls | None = None, *,
             table: Sequence[ModelSummary] | None = None) -> KStep:
    """Step 1: BIC over the unrestricted latent class model, ``k = 1..k_max``."""
    fits = []
    if table is None:
        if data is None or k_max is None:
            raise UsageError("choose_k needs data and k_max, or a table")
        if k_max < 1:
            raise UsageError("k_max must be at least 1")
        controls = _controls(controls)
        table = []
        for k in range(1, k_max + 1):
            try:
                fit = fit_standard_lc(k, data, controls)
            except Exception as exc:
                raise SelectionError(f"latent class fit failed at k={k}: {exc}", step="k") from exc
            fits.append(fit)
            table.append(ModelSummary.from_fit(fit))
    table = list(table)
    k, boundary = decide_k([row.bic for row in table])
    if boundary:
        log.warning("BIC still decreasing at k_max=%d; chosen k is at the search boundary", k)
    return KStep(k, table, boundary, fits)


# ---------------------------------------------------------------------------
# step 2: link function


@dataclass
class LinkStep:
    chosen: LinkKind
    table: dict[LinkKind, ModelSummary]
    tie: bool
    fits: dict[LinkKind, FitResult] = field(default_factory=dict, repr=False)

    def to_dict(self) -> dict:
        return {
            "chosen_link": self.chosen.value,
            "tie": self.tie,
            "table": [dict(link=kind.value, **row.to_dict()) for kind, row in self.table.items()],
        }


def decide_link(table: Mapping[LinkKind, ModelSummary]) -> tuple[LinkKind, bool]:
    """Minimum-BIC link; near-ties are broken by global < local < continuation."""
    if not table:
        raise UsageError("no candidate links")
    kinds = sorted((LinkKind.parse(k) for k in table), key=LINK_ORDER.index)
    rows = {LinkKind.parse(k): v for k, v in table.items()}
    best = min(rows[k].bic for k in kinds)
    close = [k for k in kinds if rows[k].bic - best <= BIC_TIE_TOL]
    return close[0], len(close) > 1


def choose_link(data: ResponseDataset | None = None, k: int | None = None,
                links: Sequence[LinkKind | str] = LINK_ORDER, controls: Controls | None = None, *,
                table: Mapping[LinkKind | str, ModelSummary] | None = None,
                _fitter: _Fitter | None = None) -> LinkStep:
    """Step 2: BIC among links for the ``r``-dimensional free model with ``k`` classes."""
    fits = {}
    if table is None:
        if data is None or k is None:
            raise UsageError("choose_link needs data and k, or a table")
        fitter = _fitter or _Fitter(data, _controls(controls))
        cats = data.categories
        table = {}
        for kind in dict.fromkeys(LinkKind.parse(v) for v in links):
            spec = ModelSpec.from_partition(_full_partition(data.r), cats, k, kind)
            fit = fitter.fit(spec)
            fits[kind] = fit
            table[kind] = ModelSummary.from_fit(fit)
    table = {LinkKind.parse(kk): v for kk, v in table.items()}
    chosen, tie = decide_link(table)
    if tie:
        log.warning("BIC tie between links; %s chosen by fixed order", chosen.value)
    return LinkStep(chosen, table, tie, fits)


# ---------------------------------------------------------------------------
# step 3: dimensionality


@dataclass
class DimStep:
    chosen_index: int
    partitions: list[tuple[tuple[int, ...], ...] | None]
    table: list[ModelSummary]
    tests: list[LrTestResult]
    fits: list[FitResult] = field(default_factory=list, repr=False)

    @property
    def chosen(self):
        return self.partitions[self.chosen_index]

    def to_dict(self) -> dict:
        def plain(p):
            return None if p is None else [list(g) for g in p]

        rows = []
        for i, row in enumerate(self.table):
            d = dict(partition=plain(self.partitions[i]), **row.to_dict())
            if i:
                d["test"] = self.tests[i - 1].to_dict()
            rows.append(d)
        return {"chosen_index": self.chosen_index, "chosen_partition": plain(self.chosen),
                "table": rows}


def _normalize_partition(partition, r: int | None = None):
    groups = tuple(sorted((tuple(sorted(int(j) for j in g)) for g in partition if len(g)), key=min))
    items = [j for g in groups for j in g]
    if len(set(items)) != len(items):
        raise UsageError("an item appears in two groups of a partition")
    if r is not None and sorted(items) != list(range(r)):
        raise UsageError(f"partition must cover items 0..{r - 1} exactly once")
    return groups


def is_coarsening(fine, coarse) -> bool:
    """True when every group of ``fine`` lies inside one group of ``coarse``."""
    owner = {j: i for i, g in enumerate(coarse) for j in g}
    for g in fine:
        owners = {owner.get(j) for j in g}
        if len(owners) != 1 or None in owners:
            return False
    return True


def check_nested(partitions) -> list:
    parts = [_normalize_partition(p) for p in partitions]
    for a, b in zip(parts, parts[1:]):
        if not is_coarsening(a, b):
            raise UsageError(f"partition {[list(g) for g in b]} is not a coarsening of "
                             f"{[list(g) for g in a]}")
    return parts


def decide_dimensionality(table: Sequence[ModelSummary],
                          alpha: float = ALPHA) -> tuple[int, list[LrTestResult]]:
    """Walk from the finest model and accept each coarsening while ``p >= alpha``.

    Returns the index of the chosen row and the tests actually performed.
    """
    if not len(table):
        raise UsageError("no candidate partitions")
    tests = []
    chosen = 0
    for i in range(1, len(table)):
        t = _compare(table[i], table[i - 1])
        tests.append(t)
        if not t.accepts(alpha):
            break
        chosen = i
    return chosen, tests


def test_dimensionality(data: ResponseDataset | None = None, k: int | None = None,
                        link: LinkKind | str = LinkKind.GLOBAL, groupings: Sequence = (),
                        controls: Controls | None = None, alpha: float = ALPHA, *,
                        table: Sequence[ModelSummary] | None = None,
                        _fitter: _Fitter | None = None) -> DimStep:
    """Step 3: LR chain along successively coarser item partitions.

    ``groupings`` lists partitions (each a list of item groups) from the
    finest to the coarsest.  Models are fitted only as far as the chain
    goes: a rejected coarsening ends the step.
    """
    parts = check_nested(groupings)
    if table is not None:
        table = list(table)
        if parts and len(parts) != len(table):
            raise UsageError("partitions and table rows differ in number")
        idx, tests = decide_dimensionality(table, alpha)
        parts = parts or [None] * len(table)
        return DimStep(idx, parts[:len(tests) + 1], table[:len(tests) + 1], tests)

    if data is None or k is None:
        raise UsageError("test_dimensionality needs data and k, or a table")
    if not parts:
        raise UsageError("no candidate partitions")
    parts = [_normalize_partition(p, data.r) for p in parts]
    fitter = _fitter or _Fitter(data, _controls(controls))
    link = LinkKind.parse(link)
    specs = [ModelSpec.from_partition(p, data.categories, k, link) for p in parts]
    tests: list[LrTestResult] = []
    fits = [fitter.fit(specs[0])]
    chosen = 0
    for i in range(1, len(specs)):
        if specs[i] == specs[i - 1]:
            small = big = fitter.fit(specs[i])
        else:
            small, big = fitter.nest(specs[i], specs[i - 1])
        fits[-1] = big
        fits.append(small)
        t = _compare(ModelSummary.from_fit(small), ModelSummary.from_fit(big))
        tests.append(t)
        if not t.accepts(alpha):
            break
        chosen = i
    table = [ModelSummary.from_fit(f) for f in fits]
    return DimStep(chosen, parts[:len(fits)], table, tests, fits)


test_dimensionality.__test__ = False  # keep pytest from collecting it when imported


# ---------------------------------------------------------------------------
# step 4: item-parameter constraints


@dataclass(frozen=True)
class ChainTest:
    restricted: Regime
    full: Regime
    test: LrTestResult
    accepted: bool

    def to_dict(self) -> dict:
        return {"restricted": self.restricted.code, "full": self.full.code,
                "accepted": self.accepted, **self.test.to_dict()}


@dataclass
class ConstraintStep:
    chosen: Regime
    link: LinkKind
    table: dict[Regime, ModelSummary]
    chain: list[ChainTest]
    fits: dict[Regime, FitResult] = field(default_factory=dict, repr=False)

    def to_dict(self) -> dict:
        return {
            "chosen_regime": self.chosen.code,
            "chosen_label": self.chosen.label(self.link),
            "table": [dict(regime=g.code, **row.to_dict()) for g, row in self.table.items()],
            "chain": [t.to_dict() for t in self.chain],
        }


def decide_constraints(table: Mapping[Regime, ModelSummary],
                       alpha: float = ALPHA) -> tuple[Regime, list[ChainTest]]:
    """Fixed chain of tests among the four regimes.

    Rating-scale against free difficulties and constrained against free
    discriminations are both tested within the free model.  The doubly
    constrained model is then tested against the accepted single
    restriction (the discrimination one when both are accepted).  Ties in
    the outcome resolve toward the more constrained model.
    """
    rows = {Regime.parse(g): v for g, v in table.items()}
    missing = [g.code for g in REGIMES if g not in rows]
    if missing:
        raise UsageError(f"constraint table lacks regimes {missing}")

    chain = []

    def run(restricted, full):
        t = _compare(rows[restricted], rows[full])
        ct = ChainTest(restricted, full, t, t.accepts(alpha))
        chain.append(ct)
        return ct.accepted

    rs_ok = run(FR, FF)
    gamma_ok = run(CF, FF)
    if gamma_ok:
        return (CC if run(CC, CF) else CF), chain
    if rs_ok:
        return (CC if run(CC, FR) else FR), chain
    return FF, chain


def choose_item_constraints(data: ResponseDataset | None = None, k: int | None = None,
                            link: LinkKind | str = LinkKind.GLOBAL, partition=None,
                            controls: Controls | None = None, alpha: float = ALPHA, *,
                            table: Mapping[Regime | str, ModelSummary] | None = None,
                            _fitter: _Fitter | None = None) -> ConstraintStep:
    """Step 4: choose among free/constrained discriminations and difficulties."""
    link = LinkKind.parse(link)
    fits = {}
    if table is None:
        if data is None or k is None:
            raise UsageError("choose_item_constraints needs data and k, or a table")
        if partition is None:
            partition = [list(range(data.r))]
        part = _normalize_partition(partition, data.r)
        fitter = _fitter or _Fitter(data, _controls(controls))
        specs = {}
        for g in REGIMES:
            if g.difficulty is Difficulty.RATING_SCALE and len(set(data.categories)) != 1:
                raise UsageError("rating-scale regimes need equal category counts")
            specs[g] = ModelSpec.from_partition(part, data.categories, k, link,
                                                g.discrimination, g.difficulty)
        # repair inner pairs first so the free model sees the repaired ones
        for small, big in ((CC, CF), (CC, FR), (CF, FF), (FR, FF)):
            fitter.nest(specs[small], specs[big])
        fits = {g: fitter.fits[specs[g]] for g in REGIMES}
        table = {g: ModelSummary.from_fit(fits[g]) for g in REGIMES}
    table = {Regime.parse(g): v for g, v in table.items()}
    chosen, chain = decide_constraints(table, alpha)
    return ConstraintStep(chosen, link, table, chain, fits)


# ---------------------------------------------------------------------------
# the pipeline


@dataclass
class PipelineConfig:
    """Settings of :func:`run_selection_pipeline`.

    ``partitions`` lists candidate item partitions from the finest to the
    coarsest; ``None`` means ``[r-dimensional, unidimensional]``.  ``step_starts``
    overrides the number of random starts while comparing models; the chosen
    model is then refitted with ``controls.n_random`` starts.
    """

    k_max: int = 4
    links: tuple[LinkKind, ...] = LINK_ORDER
    partitions: list | None = None
    alpha: float = ALPHA
    controls: Controls = field(default_factory=Controls)
    step_starts: int | None = None

    def __post_init__(self):
        self.links = tuple(dict.fromkeys(LinkKind.parse(v) for v in self.links))
        if not self.links:
            raise SpecError("need at least one candidate link")
        if int(self.k_max) < 1:
            raise SpecError("k_max must be at least 1")
        if not 0 < float(self.alpha) < 1:
            raise SpecError("alpha must lie in (0, 1)")
        if isinstance(self.controls, dict):
            self.controls = Controls.from_dict(self.controls)

    @classmethod
    def from_dict(cls, d: dict) -> PipelineConfig:
        known = {"k_max", "links", "partitions", "alpha", "controls", "step_starts"}
        unknown = set(d) - known
        if unknown:
            raise SpecError(f"unknown pipeline setting(s): {sorted(unknown)}")
        try:
            return cls(
                k_max=int(d.get("k_max", 4)),
                links=tuple(d.get("links", [v.value for v in LINK_ORDER])),
                partitions=d.get("partitions"),
                alpha=float(d.get("alpha", ALPHA)),
                controls=Controls.from_dict(d.get("controls")),
                step_starts=d.get("step_starts"),
            )
        except (TypeError, ValueError) as exc:
            raise SpecError(f"invalid pipeline config: {exc}") from None

    @classmethod
    def load(cls, path) -> PipelineConfig:
        return cls.from_dict(json.loads(Path(path).read_text()))

    def to_dict(self) -> dict:
        return {
            "k_max": self.k_max,
            "links": [v.value for v in self.links],
            "partitions": self.partitions,
            "alpha": self.alpha,
            "controls": self.controls.to_dict(),
            "step_starts": self.step_starts,
        }


@dataclass
class SelectionReport:
    """Decisions and evidence of every executed step."""

    n: int
    config: PipelineConfig
    k_step: KStep | None = None
    link_step: LinkStep | None = None
    dim_step: DimStep | None = None
    constraint_step: ConstraintStep | None = None
    final: FitResult | None = None
    stopped_after: str | None = None
    warnings: list[str] = field(default_factory=list)

    @property
    def chosen_k(self):
        return self.k_step.chosen_k if self.k_step else None

    @property
    def chosen_link(self):
        return self.link_step.chosen if self.link_step else None

    @property
    def chosen_partition(self):
        return self.dim_step.chosen if self.dim_step else None

    @property
    def chosen_regime(self):
        return self.constraint_step.chosen if self.constraint_step else None

    def to_dict(self) -> dict:
        d = {"n": self.n, "config": self.config.to_dict()}
        if self.k_step is not None:
            d["chosen_k"] = self.k_step.chosen_k
            d["k_table"] = self.k_step.to_dict()
        if self.link_step is not None:
            d["chosen_link"] = self.link_step.chosen.value
            d["link_table"] = self.link_step.to_dict()
        if self.dim_step is not None:
            d["chosen_partition"] = [list(g) for g in self.dim_step.chosen]
            d["dimensionality"] = self.dim_step.to_dict()
        if self.constraint_step is not None:
            d["chosen_regime"] = self.constraint_step.chosen.code
            d["constraints"] = self.constraint_step.to_dict()
        if self.final is not None:
            d["final"] = self.final.to_dict()
        d["stopped_after"] = self.stopped_after
        d["warnings"] = list(self.warnings)
        return d

    def format_table(self) -> str:
        """Human-readable dump, figures rounded to 3 decimals."""
        out = [f"n = {self.n}"]

        def rows(head, items):
            out.append(f"{head:<34}{'loglik':>14}{'#par':>6}{'BIC':>14}")
            for name, row in items:
                out.append(f"{name:<34}{row.loglik:>14.3f}{row.n_par:>6d}{row.bic:>14.3f}")

        if self.k_step:
            out.append("\n[1] latent classes")
            rows("k", [(str(i + 1), row) for i, row in enumerate(self.k_step.table)])
            note = " (boundary)" if self.k_step.boundary else ""
            out.append(f"chosen k = {self.k_step.chosen_k}{note}")
        if self.link_step:
            out.append("\n[2] link function")
            rows("link", [(kk.value, row) for kk, row in self.link_step.table.items()])
            note = " (tie)" if self.link_step.tie else ""
            out.append(f"chosen link = {self.link_step.chosen.value}{note}")
        if self.dim_step:
            out.append("\n[3] dimensionality")
            rows("dimensions", [(f"s={len(p)}", row) for p, row in
                                zip(self.dim_step.partitions, self.dim_step.table)])
            for i, t in enumerate(self.dim_step.tests):
                out.append(f"  s={len(self.dim_step.partitions[i + 1])} vs "
                           f"s={len(self.dim_step.partitions[i])}: D = {t.deviance:.3f}, "
                           f"df = {t.df}, p = {t.p_value:.3f}")
            out.append(f"chosen partition = {[list(g) for g in self.dim_step.chosen]}")
        if self.constraint_step:
            cs = self.constraint_step
            out.append("\n[4] item-parameter constraints")
            rows("model", [(g.label(cs.link), row) for g, row in cs.table.items()])
            for ct in cs.chain:
                verdict = "accept" if ct.accepted else "reject"
                out.append(f"  {ct.restricted.label(cs.link)} vs {ct.full.label(cs.link)}: "
                           f"D = {ct.test.deviance:.3f}, df = {ct.test.df}, "
                           f"p = {ct.test.p_value:.3f} ({verdict})")
            out.append(f"chosen model = {cs.chosen.label(cs.link)}")
        if self.final is not None:
            out.append(f"\nfinal: {self.final.label}, loglik = {self.final.loglik:.3f}, "
                       f"#par = {self.final.n_par}, BIC = {self.final.bic:.3f}")
        for w in self.warnings:
            out.append(f"warning: {w}")
        return "\n".join(out) + "\n"


def run_selection_pipeline(data: ResponseDataset, config: PipelineConfig | None = None,
                           stop_after: str | None = None) -> SelectionReport:
    """Run the steps in order, each using the previous step's choice.

    A failing step raises :class:`SelectionError` carrying the partial report.
    """
    config = config or PipelineConfig()
    if stop_after is not None and stop_after not in STEPS:
        raise UsageError(f"stop_after must be one of {STEPS}")
    full = config.controls
    step_controls = full
    if config.step_starts is not None and int(config.step_starts) != full.n_random:
        step_controls = Controls(**{**full.to_dict(), "n_random": int(config.step_starts)})
    report = SelectionReport(n=data.n, config=config)
    fitter: _Fitter | None = None
    r = data.r

    def guarded(step, func):
        try:
            return func()
        except SelectionError as exc:
            exc.report = report
            raise
        except Exception as exc:
            raise SelectionError(f"step '{step}' failed: {exc}", step=step, report=report) from exc

    report.k_step = guarded("k", lambda: choose_k(data, config.k_max, step_controls))
    if report.k_step.boundary:
        report.warnings.append(f"BIC decreasing up to k_max={config.k_max}")
    k = report.k_step.chosen_k
    if stop_after == "k":
        report.stopped_after = "k"
        return report

    fitter = _Fitter(data, step_controls)
    report.link_step = guarded("link", lambda: choose_link(data, k, config.links, _fitter=fitter))
    if report.link_step.tie:
        report.warnings.append("link chosen by tie-break")
    link = report.link_step.chosen
    if stop_after == "link":
        report.stopped_after = "link"
        return report

    if config.partitions:
        parts = [_normalize_partition(p, r) for p in config.partitions]
    else:
        parts = [_full_partition(r), (tuple(range(r)),)]
    report.dim_step = guarded("dim", lambda: test_dimensionality(
        data, k, link, parts, alpha=config.alpha, _fitter=fitter))
    partition = report.dim_step.chosen
    if stop_after == "dim":
        report.stopped_after = "dim"
        return report

    if len(set(data.categories)) == 1:
        report.constraint_step = guarded("constraints", lambda: choose_item_constraints(
            data, k, link, partition, alpha=config.alpha, _fitter=fitter))
        regime = report.constraint_step.chosen
    else:
        report.warnings.append("unequal category counts: rating-scale regimes skipped, "
                               "free item parameters kept")
        regime = FF
    spec = ModelSpec.from_partition(partition, data.categories, k, link,
                                    regime.discrimination, regime.difficulty)
    if stop_after == "constraints":
        report.stopped_after = "constraints"
        report.final = fitter.fit(spec)
        return report

    if step_controls is full:
        report.final = fitter.fit(spec)
    else:
        warm = fitter.fit(spec)
        report.final = guarded("final", lambda: fit_multistart(spec, data, full, [warm.params]))
    if fitter.repairs:
        report.warnings.append(f"{fitter.repairs} nesting model(s) refitted from embedded starts")
    if not report.final.converged:
        report.warnings.append("final model did not converge")
    return report


__all__ = [
    "ALPHA",
    "CC",
    "CF",
    "ChainTest",
    "ConstraintStep",
    "DimStep",
    "FF",
    "FR",
    "KStep",
    "LinkStep",
    "LrTestResult",
    "ModelSummary",
    "PipelineConfig",
    "REGIMES",
    "Regime",
    "SelectionReport",
    "check_nested",
    "choose_item_constraints",
    "choose_k",
    "choose_link",
    "decide_constraints",
    "decide_dimensionality",
    "decide_k",
    "decide_link",
    "is_coarsening",
    "lr_test",
    "run_selection_pipeline",
    "test_dimensionality",
]
