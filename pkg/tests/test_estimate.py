import math

import numpy as np
import pytest

from _helpers import random_params, spec_grid
from lcirt.data import ResponseDataset
from lcirt.errors import SpecError
from lcirt.estimate import (
    Controls,
    compute_bic,
    deterministic_start,
    e_step,
    expected_complete_loglik,
    fisher_scores,
    fit_em,
    fit_multistart,
    fit_standard_lc,
    log_likelihood,
    m_step_fisher,
    m_step_pi,
    make_starts,
)
from lcirt.link import LinkKind
from lcirt.model import (
    ModelSpec,
    all_patterns,
    class_item_probs,
    embed,
    manifest_prob,
    pack_phi,
    unpack_phi,
    validate,
)
from lcirt.sim import SimConfig, sample_dataset


def _data(spec, n=400, seed=0):
    truth = random_params(spec, np.random.default_rng(seed + 100), spread=1.5)
    return sample_dataset(SimConfig(spec, truth, n, seed)), truth


def _q_phi(spec, params, counts, phi):
    return expected_complete_loglik(spec, unpack_phi(spec, phi, params.gamma, params.pi), counts)


def _q_gamma(spec, params, counts, gamma):
    return expected_complete_loglik(spec, params.replace(gamma=gamma), counts)


def _central(f, x, h=1e-6):
    g = np.empty(len(x))
    for i in range(len(x)):
        e = np.zeros(len(x))
        e[i] = h
        g[i] = (f(x + e) - f(x - e)) / (2 * h)
    return g


class TestBasics:
    def test_bic(self):
        assert compute_bic(-2726.348, 72, 201) == pytest.approx(5834.534, abs=1e-3)
        with pytest.raises(ValueError):
            compute_bic(0.0, 1, 0)

    def test_controls_dict(self):
        c = Controls.from_dict({"tol": 1e-6, "n_random": 3})
        assert c.tol == 1e-6 and Controls.from_dict(c.to_dict()) == c
        with pytest.raises(ValueError, match="unknown"):
            Controls.from_dict({"tolerance": 1})

    @pytest.mark.parametrize("spec", spec_grid()[:5], ids=str)
    def test_loglik_matches_manifest_sum(self, spec):
        data, truth = _data(spec, n=150)
        brute = sum(c * math.log(manifest_prob(spec, truth, x))
                    for x, c in zip(data.patterns, data.counts))
        assert log_likelihood(spec, truth, data) == pytest.approx(brute, rel=1e-12)

    def test_e_step_counts(self):
        spec = ModelSpec((3, 3, 4), (0, 0, 0), 3, "local")
        data, truth = _data(spec)
        cnt = e_step(spec, truth, data)
        assert cnt.m_c.sum() == pytest.approx(data.n)
        for j, l in enumerate(spec.categories):
            np.testing.assert_allclose(cnt.m_cj[:, j, :l].sum(axis=1), cnt.m_c)
        # joint posterior frequencies reproduce the observed counts
        np.testing.assert_allclose(cnt.m_hat.sum(axis=0), data.counts)

    def test_m_step_pi(self):
        spec = ModelSpec((3, 3), (0, 0), 2)
        data, truth = _data(spec)
        cnt = e_step(spec, truth, data)
        np.testing.assert_allclose(m_step_pi(cnt, data.n), cnt.m_c / data.n)

    def test_data_spec_mismatch(self):
        spec = ModelSpec((3, 3), (0, 0), 2)
        data = ResponseDataset.from_rows([[0, 1, 2]])
        with pytest.raises(SpecError):
            log_likelihood(spec, random_params(spec, np.random.default_rng(0)), data)


class TestScores:
    @pytest.mark.parametrize("spec", spec_grid(), ids=str)
    def test_scores_match_finite_differences(self, spec):
        rng = np.random.default_rng(11)
        data, truth = _data(spec)
        for _ in range(3):
            p = random_params(spec, rng)
            cnt = e_step(spec, truth, data)
            fs = fisher_scores(spec, p, cnt)
            phi = pack_phi(spec, p)
            fd = _central(lambda v: _q_phi(spec, p, cnt, v), phi)
            np.testing.assert_allclose(fs.s_phi, fd, rtol=1e-5, atol=1e-5 * (1 + np.abs(fd).max()))
            if fs.gamma_items.size:
                fdg = _central(lambda v: _q_gamma(spec, p, cnt, v), p.gamma)[fs.gamma_items]
                np.testing.assert_allclose(fs.s_gamma, fdg, rtol=1e-5,
                                           atol=1e-5 * (1 + np.abs(fdg).max()))

    @pytest.mark.parametrize("spec", spec_grid(), ids=str)
    def test_information_is_score_covariance(self, spec):
        """Expected information equals sum of m_c * E[grad log lam grad log lam^T]."""
        rng = np.random.default_rng(12)
        data, truth = _data(spec)
        p = random_params(spec, rng)
        cnt = e_step(spec, truth, data)
        fs = fisher_scores(spec, p, cnt)
        phi = pack_phi(spec, p)
        lam = class_item_probs(spec, p)

        def loglam(v):
            return np.log(class_item_probs(spec, unpack_phi(spec, v, p.gamma, p.pi)) + (lam == 0))

        h = 1e-6
        grads = np.empty(lam.shape + (len(phi),))
        for i in range(len(phi)):
            e = np.zeros(len(phi))
            e[i] = h
            grads[..., i] = (loglam(phi + e) - loglam(phi - e)) / (2 * h)
        F = np.einsum("c,crx,crxa,crxb->ab", cnt.m_c, lam, grads, grads)
        np.testing.assert_allclose(fs.F_phi, F, rtol=1e-5, atol=1e-6 * np.abs(F).max())

        if fs.gamma_items.size:
            for n, j in enumerate(fs.gamma_items):
                def lg(t):
                    g = p.gamma.copy()
                    g[j] = t
                    return np.log(class_item_probs(spec, p.replace(gamma=g))[:, j] + (lam[:, j] == 0))
                d = (lg(p.gamma[j] + h) - lg(p.gamma[j] - h)) / (2 * h)
                f = np.einsum("c,cx,cx->", cnt.m_c, lam[:, j], d**2)
                assert fs.f_gamma[n] == pytest.approx(f, rel=1e-5)

    def test_m_step_increases_q(self):
        spec = ModelSpec((4,) * 5, (0,) * 5, 2, "global")
        data, truth = _data(spec, n=600)
        start = deterministic_start(spec, data)
        cnt = e_step(spec, start, data)
        new, stalled = m_step_fisher(spec, start, cnt)
        assert not stalled
        assert validate(spec, new) == []
        assert expected_complete_loglik(spec, new, cnt) >= expected_complete_loglik(spec, start, cnt)


class TestEM:
    @pytest.mark.parametrize("spec", spec_grid(), ids=str)
    def test_ascent(self, spec):
        data, _ = _data(spec, n=500, seed=3)
        for p in make_starts(spec, data, 2, seed=1):
            fit = fit_em(spec, data, p, Controls(max_iter=300))
            diffs = np.diff(fit.trace)
            assert diffs.min() >= -1e-10 * (1 + abs(fit.trace[0]))

    def test_fit_result_fields(self):
        spec = ModelSpec((3,) * 4, (0,) * 4, 2, "local", "constrained", "rating_scale")
        data, _ = _data(spec, n=800)
        fit = fit_multistart(spec, data, Controls(n_random=2))
        assert fit.converged and fit.label == "RSM"
        assert fit.n_par == 7 and fit.bic == pytest.approx(compute_bic(fit.loglik, 7, 800))
        assert fit.posterior.shape == (data.n_patterns, 2)
        np.testing.assert_allclose(fit.posterior.sum(axis=1), 1.0)
        assert np.all(np.diff(fit.params.xi[:, 0]) >= 0)
        assert fit.loglik == pytest.approx(log_likelihood(spec, fit.params, data), abs=1e-9)
        d = fit.to_dict(trace=True)
        assert d["trace"][-1] == fit.loglik and d["spec"] == spec.to_dict()

    def test_fixed_point(self):
        spec = ModelSpec((3,) * 5, (0,) * 5, 2, "continuation")
        data, _ = _data(spec, n=700)
        fit = fit_multistart(spec, data, Controls(n_random=1, tol=1e-12))
        again = fit_em(spec, data, fit.params, Controls(tol=1e-12))
        assert again.loglik == pytest.approx(fit.loglik, abs=1e-7)
        assert again.params.equals(fit.params, atol=1e-4)

    def test_determinism(self):
        spec = ModelSpec((3,) * 4, (0, 0, 1, 1), 2, "global")
        data, _ = _data(spec, n=300)
        a = fit_multistart(spec, data, Controls(n_random=3, seed=9))
        b = fit_multistart(spec, data, Controls(n_random=3, seed=9, threads=3))
        assert a.loglik == b.loglik and a.start_id == b.start_id
        assert a.params.equals(b.params)

    def test_invalid_start(self):
        spec = ModelSpec((3, 3), (0, 0), 1)
        data, truth = _data(spec)
        with pytest.raises(SpecError):
            fit_em(spec, data, truth.replace(gamma=np.array([1.3, 1.0])))

    @pytest.mark.parametrize("link", list(LinkKind))
    def test_nested_fit_never_worse(self, link):
        full = ModelSpec((3,) * 5, (0,) * 5, 2, link)
        small = full.replace(discrimination="constrained", difficulty="rating_scale")
        data, _ = _data(small, n=600, seed=4)
        fs = fit_multistart(small, data, Controls(n_random=1))
        ff = fit_em(full, data, embed(fs.params, small, full))
        assert ff.loglik >= fs.loglik - 1e-9

    def test_one_class_is_independence(self):
        spec = ModelSpec((3, 4, 3), (0, 0, 0), 1, "local")
        data, _ = _data(spec, n=500)
        fit = fit_multistart(spec, data, Controls(n_random=0))
        cc = data.category_counts()
        oracle = sum(float(c @ np.log(c / data.n)) for c in (cc[j][cc[j] > 0] for j in range(3)))
        assert fit.loglik == pytest.approx(oracle, abs=1e-5)

    def test_fair_binary_one_class(self):
        rows = np.array(list(np.ndindex(2, 2, 2)) * 5)
        data = ResponseDataset.from_rows(rows)
        spec = ModelSpec((2, 2, 2), (0, 0, 0), 1)
        fit = fit_multistart(spec, data, Controls(n_random=0))
        assert fit.loglik == pytest.approx(40 * 3 * math.log(0.5), abs=1e-8)


class TestStandardLC:
    def test_one_class_closed_form(self):
        spec = ModelSpec((3, 4), (0, 0), 2)
        data, _ = _data(spec, n=300)
        fit = fit_standard_lc(1, data)
        cc = data.category_counts()
        oracle = sum(float(xl) for xl in (np.sum(c[c > 0] * np.log(c[c > 0] / data.n)) for c in cc))
        assert fit.loglik == pytest.approx(oracle, rel=1e-12)
        assert fit.n_par == 5

    def test_ascent_and_order(self):
        spec = ModelSpec((3,) * 6, (0,) * 6, 3, "global", "constrained")
        data, _ = _data(spec, n=800)
        fit = fit_standard_lc(3, data, Controls(n_random=3))
        assert np.diff(fit.trace).min() >= -1e-10 * abs(fit.trace[0])
        score = (fit.params.probs * np.arange(3)).sum(axis=(1, 2))
        assert np.all(np.diff(score) >= 0)
        assert fit.label == "LC(k=3)"

    def test_unrestricted_dominates_irt(self):
        spec = ModelSpec((3,) * 4, (0,) * 4, 2, "local")
        data, _ = _data(spec, n=500)
        lc = fit_standard_lc(2, data, Controls(n_random=5))
        irt = fit_multistart(spec, data, Controls(n_random=2))
        assert lc.loglik >= irt.loglik - 1e-6
