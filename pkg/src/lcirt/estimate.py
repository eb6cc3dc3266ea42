"""Maximum-likelihood estimation by EM.

The E-step turns the observed pattern frequencies into expected
class-by-pattern frequencies.  The M-step updates the class weights in
closed form and the item/ability parameters by Fisher scoring on the
expected complete log-likelihood, alternating a discrimination step and a
step on the stacked ability/difficulty vector ``phi``.  Every scoring step
is shortened by halving until the expected complete log-likelihood does not
decrease (and, for global logits, the thresholds stay ordered), so the
observed log-likelihood never decreases between iterations.
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, fields, replace
from statistics import NormalDist
from typing import Sequence

import numpy as np
from numpy.typing import NDArray
from scipy.special import logsumexp, xlogy

from lcirt import _kernels
from lcirt.data import ResponseDataset
from lcirt.errors import NumericUnderflowError, SingularJacobianError, SpecError
from lcirt.link import LinkKind, canonical_jacobian, probs_to_logits
from lcirt.model import (
    Difficulty,
    Discrimination,
    ModelSpec,
    Parameters,
    canonical_order,
    count_free_parameters,
    count_standard_lc_parameters,
    free_gamma_items,
    logits_valid,
    name_model,
    pack_phi,
    permute_classes,
    probs_from_logits,
    unpack_phi,
    validate,
)

log = logging.getLogger(__name__)

_PROB_FLOOR = 1e-200


@dataclass
class Controls:
    """Tuning knobs of the EM fitter and of the multistart layer."""

    tol: float = 1e-8
    max_iter: int = 5000
    inner_max: int = 5
    n_random: int = 10
    seed: int = 0
    pi_floor: float = 1e-12
    max_halvings: int = 30
    threads: int = 1

    @classmethod
    def from_dict(cls, d: dict | None) -> Controls:
        d = dict(d or {})
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown control(s): {sorted(unknown)}")
        return cls(**d)

    def to_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}


def compute_bic(loglik: float, n_par: int, n: int) -> float:
    if n < 1:
        raise ValueError("sample size must be at least 1")
    return -2.0 * loglik + math.log(n) * n_par


@dataclass(frozen=True, eq=False)
class ExpectedCounts:
    """Expected frequencies from one E-step.

    ``m_cj`` is zero-padded to the largest category count.
    """

    m_hat: NDArray[np.float64]
    m_c: NDArray[np.float64]
    m_cj: NDArray[np.float64]


@dataclass(frozen=True, eq=False)
class LatentClassParameters:
    """Unrestricted latent class model: free ``probs[c, j, x]`` per class."""

    pi: NDArray[np.float64]
    probs: NDArray[np.float64]

    def to_dict(self) -> dict:
        return {"pi": self.pi.tolist(), "probs": self.probs.tolist()}


@dataclass(eq=False)
class FitResult:
    params: Parameters | LatentClassParameters
    loglik: float
    n_par: int
    bic: float
    n: int
    iterations: int
    converged: bool
    start_id: int
    posterior: NDArray[np.float64]
    spec: ModelSpec | None = None
    trace: list[float] = field(default_factory=list)
    warnings: list[str] = field(default_factory=list)
    label: str = ""

    def to_dict(self, trace: bool = False) -> dict:
        d = {
            "label": self.label,
            "spec": self.spec.to_dict() if self.spec is not None else None,
            "params": self.params.to_dict(),
            "loglik": self.loglik,
            "n_par": self.n_par,
            "bic": self.bic,
            "n": self.n,
            "iterations": self.iterations,
            "converged": self.converged,
            "start_id": self.start_id,
            "posterior": self.posterior.tolist(),
            "warnings": list(self.warnings),
        }
        if trace:
            d["trace"] = list(self.trace)
        return d


# ---------------------------------------------------------------------------
# E-step machinery shared by the IRT and the unrestricted LC models


def _posterior(log_lam, pi, data: ResponseDataset):
    """Return ``(loglik, m_hat)`` for per-class log category probabilities."""
    log_cond = _kernels.pattern_logprob(log_lam, data.patterns)
    with np.errstate(divide="ignore"):
        log_joint = log_cond + np.log(pi)[:, None]
    log_marg = logsumexp(log_joint, axis=0)
    bad = np.flatnonzero(~np.isfinite(log_marg))
    if bad.size:
        pat = data.patterns[bad[0]].tolist()
        raise NumericUnderflowError(f"pattern {pat} has zero probability", pattern=pat)
    counts = data.counts.astype(float)
    m_hat = np.exp(log_joint - log_marg[None, :]) * counts[None, :]
    return float(counts @ log_marg), m_hat


def _counts_from_posterior(m_hat, data: ResponseDataset, L: int | None = None) -> ExpectedCounts:
    L = L or max(data.categories)
    m_cj = _kernels.category_counts(m_hat, data.patterns, L)
    return ExpectedCounts(m_hat=m_hat, m_c=m_hat.sum(axis=1), m_cj=m_cj)


def _log(a):
    with np.errstate(divide="ignore"):
        return np.log(a)


def log_likelihood(spec: ModelSpec, params: Parameters, data: ResponseDataset) -> float:
    """``sum_x n_x log p(x)`` over the observed patterns."""
    _check_data(spec, data)
    lam = probs_from_logits(spec, _logits(spec, params.gamma, pack_phi(spec, params)))
    ll, _ = _posterior(_log(lam), params.pi, data)
    return ll


def e_step(spec: ModelSpec, params: Parameters, data: ResponseDataset) -> ExpectedCounts:
    _check_data(spec, data)
    lam = probs_from_logits(spec, _logits(spec, params.gamma, pack_phi(spec, params)))
    _, m_hat = _posterior(_log(lam), params.pi, data)
    return _counts_from_posterior(m_hat, data, spec.max_categories)


def m_step_pi(counts: ExpectedCounts, n: float, pi_floor: float = 1e-12):
    """Class weights ``m_c / n``; weights below ``pi_floor`` are raised to it."""
    pi = np.asarray(counts.m_c, dtype=float) / n
    if np.any(pi < pi_floor):
        pi = np.maximum(pi, pi_floor)
        pi = pi / pi.sum()
    return pi


def _check_data(spec: ModelSpec, data: ResponseDataset):
    if data.r != spec.r or any(a > b for a, b in zip(data.categories, spec.categories)):
        raise SpecError(f"data categories {data.categories} do not fit spec {spec.categories}")


# ---------------------------------------------------------------------------
# expected complete log-likelihood and its Fisher scoring


def _logits(spec: ModelSpec, gamma, phi):
    return gamma[None, :, None] * np.einsum("crxp,p->crx", spec.design, phi)


def _item_q2(m_cj, lam):
    return xlogy(m_cj, lam).sum(axis=(0, 2))


def expected_complete_loglik(spec: ModelSpec, params: Parameters, counts: ExpectedCounts) -> float:
    """``sum_c m_c log pi_c + sum_c sum_j m_cj . log lam_cj``."""
    lam = probs_from_logits(spec, _logits(spec, params.gamma, pack_phi(spec, params)))
    q1 = float(xlogy(counts.m_c, params.pi).sum())
    return q1 + float(_item_q2(counts.m_cj, lam).sum())


@dataclass(frozen=True, eq=False)
class FisherScores:
    """Scores and expected information of the item part.

    ``s_phi``/``F_phi`` refer to the whole ``phi`` vector; ``s_gamma`` and
    ``f_gamma`` hold one score and one information per free discrimination,
    in the order of ``gamma_items``.
    """

    s_phi: NDArray[np.float64]
    F_phi: NDArray[np.float64]
    s_gamma: NDArray[np.float64]
    f_gamma: NDArray[np.float64]
    gamma_items: NDArray[np.intp]


def _weights(spec: ModelSpec, lam, counts: ExpectedCounts):
    """Per-(class, item) logit scores ``w`` and informations ``W``."""
    k, r, L = lam.shape
    w = np.zeros((k, r, L - 1))
    W = np.zeros((k, r, L - 1, L - 1))
    m_c = counts.m_c
    for l, items in spec.category_groups:
        lg = lam[:, items, :l]
        # categories can drift to subnormal probabilities when their expected
        # count is zero; a floor keeps the Jacobian finite there
        R = canonical_jacobian(np.maximum(lg, _PROB_FLOOR), spec.link)
        tail = lg[..., 1:]
        resid = counts.m_cj[:, items, 1:l] - m_c[:, None, None] * tail
        w[:, items, : l - 1] = np.einsum("crxy,crx->cry", R, resid)
        V = -tail[..., :, None] * tail[..., None, :]
        idx = np.arange(l - 1)
        V[..., idx, idx] += tail
        RVR = np.einsum("crxa,crxy,cryb->crab", R, V, R)
        W[:, items, : l - 1, : l - 1] = m_c[:, None, None, None] * RVR
    return w, W


def _fisher(spec: ModelSpec, gamma, phi, lam, counts):
    w, W = _weights(spec, lam, counts)
    Z = spec.design
    eta = np.einsum("crxp,p->crx", Z, phi)
    gi = free_gamma_items(spec)
    s_gamma = np.einsum("crx,crx->r", eta, w)[gi]
    f_gamma = np.einsum("crx,crxy,cry->r", eta, W, eta)[gi]
    gw = gamma[None, :, None] * w
    s_phi = np.einsum("crxp,crx->p", Z, gw)
    g2W = (gamma**2)[None, :, None, None] * W
    A = np.einsum("crxy,cryq->crxq", g2W, Z)
    F = np.tensordot(Z, A, axes=([0, 1, 2], [0, 1, 2]))
    F = 0.5 * (F + F.T)
    return FisherScores(s_phi, F, s_gamma, f_gamma, gi)


def fisher_scores(spec: ModelSpec, params: Parameters, counts: ExpectedCounts) -> FisherScores:
    phi = pack_phi(spec, params)
    lam = probs_from_logits(spec, _logits(spec, params.gamma, phi))
    return _fisher(spec, params.gamma, phi, lam, counts)


def _solve(F, s):
    """Newton direction ``F^{-1} s`` with a ridge and a gradient fallback."""
    dim = len(s)
    if dim == 0:
        return s.copy(), False
    try:
        c = np.linalg.cholesky(F)
        return np.linalg.solve(c.T, np.linalg.solve(c, s)), False
    except np.linalg.LinAlgError:
        pass
    ridge = 1e-8 * (1.0 + np.trace(F) / dim)
    try:
        c = np.linalg.cholesky(F + ridge * np.eye(dim))
        d = np.linalg.solve(c.T, np.linalg.solve(c, s))
        if np.all(np.isfinite(d)):
            return d, True
    except np.linalg.LinAlgError:
        pass
    return s / (1.0 + abs(np.trace(F)) / dim), True


@dataclass
class _MStepInfo:
    stalled: bool = False
    ridge: bool = False


def _try_lam(spec, gamma, phi):
    g = _logits(spec, gamma, phi)
    if not logits_valid(spec, g):
        return None
    return probs_from_logits(spec, g)


def _item_valid(spec: ModelSpec, g) -> NDArray[np.bool_]:
    """Per-item feasibility of the logits across all classes."""
    ok = np.all(np.isfinite(g), axis=(0, 2))
    if spec.link is LinkKind.GLOBAL:
        for l, items in spec.category_groups:
            if l > 2:
                dec = np.all(np.diff(g[:, items, : l - 1], axis=-1) < 0, axis=(0, 2))
                ok[items] &= dec
    return ok


def _gamma_step(spec, gamma, phi, lam, counts, fs: FisherScores, max_halvings):
    # the item part of the objective separates over items at fixed phi, so
    # every discrimination is halved independently
    gi = fs.gamma_items
    with np.errstate(divide="ignore", invalid="ignore"):
        delta = fs.s_gamma / fs.f_gamma
    delta[~np.isfinite(delta)] = 0.0
    base = _item_q2(counts.m_cj, lam)[gi]
    cur = gamma.copy()
    t = np.ones(gi.size)
    pending = np.ones(gi.size, dtype=bool)
    for _ in range(max_halvings + 1):
        trial = cur.copy()
        trial[gi[pending]] = gamma[gi[pending]] + t[pending] * delta[pending]
        ok = _item_valid(spec, _logits(spec, trial, phi))
        ev = np.where(ok, trial, cur)
        q = _item_q2(counts.m_cj, probs_from_logits(spec, _logits(spec, ev, phi)))[gi]
        acc = pending & ok[gi] & (q >= base)
        cur[gi[acc]] = trial[gi[acc]]
        pending &= ~acc
        if not pending.any():
            break
        t *= 0.5
    return cur, probs_from_logits(spec, _logits(spec, cur, phi)), bool(pending.any())


def _phi_step(spec, gamma, phi, lam, counts, fs: FisherScores, max_halvings, info: _MStepInfo):
    d, ridged = _solve(fs.F_phi, fs.s_phi)
    info.ridge |= ridged
    base = float(_item_q2(counts.m_cj, lam).sum())
    for h in range(max_halvings + 1):
        trial = phi + (0.5**h) * d
        lam_t = _try_lam(spec, gamma, trial)
        if lam_t is None:
            continue
        q = float(_item_q2(counts.m_cj, lam_t).sum())
        if q >= base:
            return trial, lam_t, q, False
    return phi, lam, base, True


def _m_step_arrays(spec, gamma, phi, counts, controls: Controls, info: _MStepInfo):
    lam = probs_from_logits(spec, _logits(spec, gamma, phi))
    q = float(_item_q2(counts.m_cj, lam).sum())
    for _ in range(controls.inner_max):
        q_start = q
        if spec.discrimination is Discrimination.FREE and free_gamma_items(spec).size:
            fs = _fisher(spec, gamma, phi, lam, counts)
            gamma, lam, st = _gamma_step(spec, gamma, phi, lam, counts, fs, controls.max_halvings)
            info.stalled |= st
        fs = _fisher(spec, gamma, phi, lam, counts)
        phi, lam, q, st = _phi_step(spec, gamma, phi, lam, counts, fs, controls.max_halvings, info)
        info.stalled |= st
        if q - q_start <= 1e-13 * (1.0 + abs(q)):
            break
    return gamma, phi


def m_step_fisher(spec: ModelSpec, params: Parameters, counts: ExpectedCounts,
                  controls: Controls | None = None) -> tuple[Parameters, bool]:
    """Fisher-scoring update of discriminations and ``phi`` at fixed counts.

    Returns the updated parameters and a flag that is true when some step
    could not be made acceptable within ``controls.max_halvings`` halvings.
    """
    controls = controls or Controls()
    info = _MStepInfo()
    gamma, phi = _m_step_arrays(spec, params.gamma.copy(), pack_phi(spec, params),
                                counts, controls, info)
    return unpack_phi(spec, phi, gamma, params.pi), info.stalled


# ---------------------------------------------------------------------------
# EM driver


def _converged(ll, prev, tol):
    return abs(ll - prev) / (abs(prev) + 1.0) < tol


def fit_em(spec: ModelSpec, data: ResponseDataset, init: Parameters,
           controls: Controls | None = None, start_id: int = 0) -> FitResult:
    """Run EM from ``init`` until the relative log-likelihood change is below tol."""
    controls = controls or Controls()
    _check_data(spec, data)
    bad = validate(spec, init)
    if bad:
        raise SpecError("invalid starting values: " + "; ".join(map(str, bad)))
    pi = init.pi.copy()
    gamma = init.gamma.copy()
    phi = pack_phi(spec, init)
    n = data.n
    trace: list[float] = []
    notes: set[str] = set()
    info = _MStepInfo()
    converged = False
    iterations = 0
    prev = None
    while True:
        lam = probs_from_logits(spec, _logits(spec, gamma, phi))
        ll, m_hat = _posterior(_log(lam), pi, data)
        trace.append(ll)
        if prev is not None and _converged(ll, prev, controls.tol):
            converged = True
            break
        if iterations >= controls.max_iter:
            break
        counts = _counts_from_posterior(m_hat, data, spec.max_categories)
        new_pi = m_step_pi(counts, n, controls.pi_floor)
        if np.any(counts.m_c / n < controls.pi_floor):
            notes.add("class weight floored at boundary")
        pi = new_pi
        gamma, phi = _m_step_arrays(spec, gamma, phi, counts, controls, info)
        iterations += 1
        prev = ll
    if info.stalled:
        notes.add("step-halving exhausted in some M-step")
    if info.ridge:
        notes.add("ridge added to singular information")
    params = unpack_phi(spec, phi, gamma, pi)
    order = canonical_order(params)
    params = permute_classes(params, order)
    posterior = (m_hat / data.counts[None, :]).T[:, order]
    n_par = count_free_parameters(spec)
    return FitResult(
        params=params,
        loglik=ll,
        n_par=n_par,
        bic=compute_bic(ll, n_par, n),
        n=n,
        iterations=iterations,
        converged=converged,
        start_id=start_id,
        posterior=posterior,
        spec=spec,
        trace=trace,
        warnings=sorted(notes),
        label=name_model(spec),
    )


# ---------------------------------------------------------------------------
# starting values


def _class_quantiles(k):
    nd = NormalDist()
    return np.array([nd.inv_cdf(c / (k + 1)) for c in range(1, k + 1)])


def _smoothed_marginals(data: ResponseDataset, categories):
    cc = data.category_counts()
    out = []
    for j, l in enumerate(categories):
        f = np.zeros(l)
        f[: cc.shape[1]] = cc[j, :l] if cc.shape[1] >= l else np.pad(cc[j], (0, l - cc.shape[1]))
        out.append((f + 0.5) / (f.sum() + 0.5 * l))
    return out


def deterministic_start(spec: ModelSpec, data: ResponseDataset) -> Parameters:
    """Uniform weights, normal-quantile support points, empirical thresholds."""
    k, s, r = spec.k, spec.s, spec.r
    pi = np.full(k, 1.0 / k)
    q = _class_quantiles(k)
    xi = np.repeat(q[:, None], s, axis=1)
    gamma = np.ones(r)
    marg = _smoothed_marginals(data, spec.categories)
    if spec.difficulty is Difficulty.FREE:
        beta = [-probs_to_logits(m, spec.link) for m in marg]
        for d, ja in enumerate(spec.anchors):
            shift = beta[ja][0]
            for j in spec.partition[d]:
                beta[j] = beta[j] - shift
            xi[:, d] -= shift
            beta[ja][0] = 0.0
        return Parameters(pi, xi, gamma, beta=tuple(beta))
    pooled = np.sum(marg, axis=0)
    tau = -probs_to_logits(pooled / pooled.sum(), spec.link)
    xi -= tau[0]
    tau = tau - tau[0]
    tau[0] = 0.0
    return Parameters(pi, xi, gamma, beta_rs=np.zeros(r), tau=tau)


def _reorder_global(spec: ModelSpec, p: Parameters) -> Parameters:
    xi = p.xi.copy()
    if spec.difficulty is Difficulty.FREE:
        beta = [np.sort(b) for b in p.beta]
        for d, ja in enumerate(spec.anchors):
            shift = beta[ja][0]
            if shift != 0.0:
                for j in spec.partition[d]:
                    beta[j] = beta[j] - shift
                xi[:, d] -= shift
            beta[ja][0] = 0.0
        return p.replace(xi=xi, beta=tuple(beta))
    tau = np.sort(p.tau)
    shift = tau[0]
    tau = tau - shift
    tau[0] = 0.0
    return p.replace(xi=xi - shift, tau=tau)


def make_starts(spec: ModelSpec, data: ResponseDataset, n_random: int = 10,
                seed: int = 0) -> list[Parameters]:
    """One deterministic start followed by ``n_random`` perturbed copies."""
    base = deterministic_start(spec, data)
    starts = [base]
    rng = np.random.default_rng(seed)
    for _ in range(n_random):
        xi = base.xi + rng.normal(0.0, 1.0, base.xi.shape)
        if spec.difficulty is Difficulty.FREE:
            beta = []
            for j, b in enumerate(base.beta):
                nb = b + rng.normal(0.0, 0.5, b.shape)
                if spec.is_anchor[j]:
                    nb[0] = 0.0
                beta.append(nb)
            p = base.replace(xi=xi, beta=tuple(beta))
        else:
            brs = base.beta_rs + rng.normal(0.0, 0.5, base.beta_rs.shape)
            brs[list(spec.anchors)] = 0.0
            tau = base.tau + rng.normal(0.0, 0.5, base.tau.shape)
            tau[0] = 0.0
            p = base.replace(xi=xi, beta_rs=brs, tau=tau)
        u = rng.uniform(0.1, 1.0, spec.k)
        p = p.replace(pi=u / u.sum())
        if spec.link is LinkKind.GLOBAL:
            p = _reorder_global(spec, p)
        starts.append(p)
    return starts


def _best(results: Sequence[FitResult]) -> FitResult:
    best = results[0]
    for res in results[1:]:
        if res.loglik > best.loglik:
            best = res
    return best


def _run_all(func, jobs, threads):
    if threads and threads > 1 and len(jobs) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(lambda a: func(*a), jobs))
    return [func(*a) for a in jobs]


def fit_multistart(spec: ModelSpec, data: ResponseDataset, controls: Controls | None = None,
                   extra_starts: Sequence[Parameters] = ()) -> FitResult:
    """Best of the deterministic, random and any caller-supplied starts.

    Start ids: 0 deterministic, ``1..n_random`` random, then the extra ones.
    Ties on the log-likelihood go to the lowest start id.
    """
    controls = controls or Controls()
    starts = make_starts(spec, data, controls.n_random, controls.seed) + list(extra_starts)
    jobs = [(spec, data, p, controls, i) for i, p in enumerate(starts)]
    return _best(_run_all(fit_em, jobs, controls.threads))


# ---------------------------------------------------------------------------
# unrestricted latent class model


def _lc_starts(k: int, data: ResponseDataset, n_random: int, seed: int):
    marg = _smoothed_marginals(data, data.categories)
    L = max(data.categories)
    q = _class_quantiles(k)
    starts = []
    probs = np.zeros((k, data.r, L))
    for j, m in enumerate(marg):
        x = np.arange(len(m))
        mu = m @ x
        sd = math.sqrt(max(m @ (x - mu) ** 2, 1e-12))
        tilt = np.exp(q[:, None] * ((x - mu) / sd)[None, :])
        p = m[None, :] * tilt
        probs[:, j, : len(m)] = p / p.sum(axis=1, keepdims=True)
    starts.append(LatentClassParameters(np.full(k, 1.0 / k), probs))
    rng = np.random.default_rng(seed)
    for _ in range(n_random):
        probs = np.zeros((k, data.r, L))
        for j, m in enumerate(marg):
            p = m[None, :] * np.exp(rng.normal(0.0, 1.0, (k, len(m))))
            probs[:, j, : len(m)] = p / p.sum(axis=1, keepdims=True)
        u = rng.uniform(0.1, 1.0, k)
        starts.append(LatentClassParameters(u / u.sum(), probs))
    return starts


def _fit_lc_one(k, data: ResponseDataset, init: LatentClassParameters, controls: Controls,
                start_id: int) -> FitResult:
    pi = init.pi.copy()
    probs = init.probs.copy()
    n = data.n
    trace = []
    notes = set()
    converged = False
    iterations = 0
    prev = None
    while True:
        ll, m_hat = _posterior(_log(probs), pi, data)
        trace.append(ll)
        if prev is not None and _converged(ll, prev, controls.tol):
            converged = True
            break
        if iterations >= controls.max_iter:
            break
        counts = _counts_from_posterior(m_hat, data)
        if np.any(counts.m_c / n < controls.pi_floor):
            notes.add("class weight floored at boundary")
        pi = m_step_pi(counts, n, controls.pi_floor)
        live = counts.m_c > 0
        probs[live] = counts.m_cj[live] / counts.m_c[live, None, None]
        iterations += 1
        prev = ll
    cats = np.arange(probs.shape[2])
    order = np.argsort((probs * cats).sum(axis=(1, 2)), kind="stable")
    params = LatentClassParameters(pi[order], probs[order])
    n_par = count_standard_lc_parameters(data.categories, k)
    return FitResult(
        params=params,
        loglik=ll,
        n_par=n_par,
        bic=compute_bic(ll, n_par, n),
        n=n,
        iterations=iterations,
        converged=converged,
        start_id=start_id,
        posterior=(m_hat / data.counts[None, :]).T[:, order],
        spec=None,
        trace=trace,
        warnings=sorted(notes),
        label=f"LC(k={k})",
    )


def fit_standard_lc(k: int, data: ResponseDataset, controls: Controls | None = None) -> FitResult:
    """Unrestricted latent class model with ``k`` classes, best of all starts."""
    if k < 1:
        raise ValueError("need at least one latent class")
    controls = controls or Controls()
    starts = _lc_starts(k, data, controls.n_random, controls.seed)
    jobs = [(k, data, p, controls, i) for i, p in enumerate(starts)]
    return _best(_run_all(_fit_lc_one, jobs, controls.threads))


__all__ = [
    "Controls",
    "ExpectedCounts",
    "FisherScores",
    "FitResult",
    "LatentClassParameters",
    "compute_bic",
    "deterministic_start",
    "e_step",
    "expected_complete_loglik",
    "fisher_scores",
    "fit_em",
    "fit_multistart",
    "fit_standard_lc",
    "log_likelihood",
    "m_step_fisher",
    "m_step_pi",
    "make_starts",
]
