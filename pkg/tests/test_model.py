import itertools

import numpy as np
import pytest

from _helpers import random_params, spec_grid
from lcirt.errors import InvalidPatternError, PackingError, SpecError
from lcirt.link import LinkKind, logits_to_probs
from lcirt.model import (
    Difficulty,
    Discrimination,
    ModelSpec,
    Parameters,
    all_logits,
    all_patterns,
    build_design_matrix,
    canonical_order,
    class_item_probs,
    conditional_pattern_prob,
    count_free_parameters,
    count_standard_lc_parameters,
    embed,
    item_logits,
    manifest_prob,
    name_model,
    pack,
    pack_phi,
    permute_classes,
    unpack,
    validate,
)

HADS = (4,) * 14


def _count_by_enumeration(spec):
    """Free parameters counted entry by entry from the parameterization."""
    n = spec.k - 1 + spec.k * spec.s
    if spec.discrimination is Discrimination.FREE:
        n += sum(1 for j in range(spec.r) if not spec.is_anchor[j])
    if spec.difficulty is Difficulty.FREE:
        for j, l in enumerate(spec.categories):
            n += sum(1 for x in range(l - 1) if not (x == 0 and spec.is_anchor[j]))
    else:
        n += sum(1 for j in range(spec.r) if not spec.is_anchor[j])
        n += spec.categories[0] - 2
    return n


class TestSpec:
    def test_basic_properties(self):
        spec = ModelSpec((3, 4, 3), (0, 1, 0), 2)
        assert (spec.r, spec.s, spec.k, spec.max_categories) == (3, 2, 2, 4)
        assert spec.anchors == (0, 1)
        assert spec.partition == ((0, 2), (1,))

    def test_from_partition_is_canonical(self):
        a = ModelSpec.from_partition([[3, 2], [0, 1]], (3,) * 4, 2)
        b = ModelSpec.from_partition([[0, 1], [2, 3]], (3,) * 4, 2)
        assert a == b and a.item_dims == (0, 0, 1, 1)

    @pytest.mark.parametrize("kwargs", [
        dict(categories=(3, 1), item_dims=(0, 0), n_classes=2),
        dict(categories=(3, 3), item_dims=(0, 2), n_classes=2),
        dict(categories=(3, 3), item_dims=(0,), n_classes=2),
        dict(categories=(3, 3), item_dims=(0, 0), n_classes=0),
        dict(categories=(3, 4), item_dims=(0, 0), n_classes=2, difficulty="rating_scale"),
    ])
    def test_invalid(self, kwargs):
        with pytest.raises(SpecError):
            ModelSpec(**kwargs)

    def test_partition_errors(self):
        with pytest.raises(SpecError):
            ModelSpec.from_partition([[0, 1], [1, 2]], (3,) * 3, 2)
        with pytest.raises(SpecError):
            ModelSpec.from_partition([[0, 1]], (3,) * 3, 2)

    def test_dict_round_trip(self):
        spec = ModelSpec((3, 3, 4), (0, 1, 1), 3, "continuation", "constrained", "free")
        assert ModelSpec.from_dict(spec.to_dict()) == spec

    def test_dict_missing_key(self):
        with pytest.raises(SpecError, match="classes"):
            ModelSpec.from_dict({"categories": [3, 3]})

    def test_dict_inconsistent_dimensions(self):
        d = ModelSpec((3, 3), (0, 1), 2).to_dict()
        d["dimensions"] = 1
        with pytest.raises(SpecError):
            ModelSpec.from_dict(d)


class TestCounts:
    @pytest.mark.parametrize("k,expected", [(1, 42), (2, 85), (3, 128), (4, 171)])
    def test_standard_lc(self, k, expected):
        assert count_standard_lc_parameters(HADS, k) == expected

    def test_hads_models(self):
        rdim = ModelSpec.from_partition([[j] for j in range(14)], HADS, 3)
        assert count_free_parameters(rdim) == 72
        bidim = ModelSpec.from_partition([list(range(0, 14, 2)), list(range(1, 14, 2))], HADS, 3)
        assert count_free_parameters(bidim) == 60
        uni = ModelSpec(HADS, (0,) * 14, 3)
        expected = {("free", "free"): 59, ("free", "rating_scale"): 33,
                    ("constrained", "free"): 46, ("constrained", "rating_scale"): 20}
        for (d, b), n in expected.items():
            assert count_free_parameters(uni.replace(discrimination=d, difficulty=b)) == n

    @pytest.mark.parametrize("spec", spec_grid(), ids=str)
    def test_matches_enumeration_and_layout(self, spec):
        n = count_free_parameters(spec)
        assert n == _count_by_enumeration(spec)
        n_gamma = 0 if spec.discrimination is Discrimination.CONSTRAINED else spec.r - spec.s
        assert n == spec.layout.size + n_gamma + spec.k - 1


class TestValidate:
    def test_valid(self):
        spec = ModelSpec((3, 3, 3), (0, 0, 0), 2)
        assert validate(spec, random_params(spec, np.random.default_rng(0))) == []

    def test_constraint_violation_message(self):
        spec = ModelSpec((3, 3), (0, 0), 1, discrimination="constrained")
        p = Parameters([1.0], [[0.0]], [1.0, 1.2], beta=([0.0, 1.0], [0.5, 1.0]))
        msgs = [str(v) for v in validate(spec, p)]
        assert "gamma not 1 under constraint (item 1)" in msgs

    def test_ordering_violation(self):
        spec = ModelSpec((3, 3), (0, 0), 1)
        p = Parameters([1.0], [[0.0]], [1.0, 1.0], beta=([0.0, 1.0], [0.5, 0.2]))
        assert "thresholds not increasing (item 1)" in [str(v) for v in validate(spec, p)]

    def test_ordering_free_for_local(self):
        spec = ModelSpec((3, 3), (0, 0), 1, link="local")
        p = Parameters([1.0], [[0.0]], [1.0, 1.0], beta=([0.0, 1.0], [0.5, 0.2]))
        assert validate(spec, p) == []

    def test_anchor_and_weights(self):
        spec = ModelSpec((3, 3), (0, 0), 2)
        p = Parameters([0.5, 0.6], [[0.0], [1.0]], [1.1, 1.0], beta=([0.3, 1.0], [0.5, 1.2]))
        codes = {v.code for v in validate(spec, p)}
        assert {"pi", "anchor"} <= codes

    def test_shape(self):
        spec = ModelSpec((3, 3), (0, 0), 2)
        p = Parameters([1.0], [[0.0]], [1.0, 1.0], beta=([0.0, 1.0], [0.5, 1.2]))
        assert validate(spec, p)[0].code == "shape"

    def test_negative_gamma_warns(self):
        spec = ModelSpec((3, 3), (0, 0), 1)
        p = Parameters([1.0], [[0.0]], [1.0, -0.5], beta=([0.0, 1.0], [0.5, 1.2]))
        with pytest.warns(UserWarning, match="non-positive"):
            assert validate(spec, p) == []


class TestPacking:
    @pytest.mark.parametrize("spec", spec_grid(), ids=str)
    def test_round_trip(self, spec):
        p = random_params(spec, np.random.default_rng(1))
        q = unpack(pack(p, spec), spec)
        assert q.equals(p, atol=1e-15)

    def test_wrong_lengths(self):
        spec = ModelSpec((3, 3), (0, 0), 2)
        packed = pack(random_params(spec, np.random.default_rng(0)), spec)
        with pytest.raises(PackingError):
            unpack(type(packed)(packed.phi[:-1], packed.gamma_free, packed.pi_free), spec)
        with pytest.raises(PackingError):
            unpack(type(packed)(packed.phi, packed.gamma_free, np.zeros(3)), spec)

    def test_either_beta_form(self):
        with pytest.raises(PackingError):
            Parameters([1.0], [[0.0]], [1.0])


class TestDesign:
    @pytest.mark.parametrize("spec", spec_grid(), ids=str)
    def test_design_reproduces_logits(self, spec):
        p = random_params(spec, np.random.default_rng(2))
        phi = pack_phi(spec, p)
        for c in range(spec.k):
            for j in range(spec.r):
                g = p.gamma[j] * build_design_matrix(spec, c, j) @ phi
                np.testing.assert_allclose(g, item_logits(spec, p, c, j), atol=1e-14)

    def test_free_difficulty_rows(self):
        spec = ModelSpec((3, 3), (0, 0), 2)
        Z = build_design_matrix(spec, 1, 1)
        # phi = (xi_1, xi_2, beta_0,2, beta_1,1, beta_1,2)
        np.testing.assert_array_equal(Z, [[0, 1, 0, -1, 0], [0, 1, 0, 0, -1]])

    def test_rating_scale_rows(self):
        spec = ModelSpec((3, 3), (0, 0), 1, difficulty="rating_scale")
        Z = build_design_matrix(spec, 0, 1)
        # phi = (xi_1, beta_1, tau_2)
        np.testing.assert_array_equal(Z, [[1, -1, 0], [1, -1, -1]])

    def test_padded_logits(self):
        spec = ModelSpec((2, 4), (0, 0), 1, link="local")
        p = random_params(spec, np.random.default_rng(0))
        g = all_logits(spec, p)
        assert g.shape == (1, 2, 3) and np.all(g[:, 0, 1:] == 0)
        lam = class_item_probs(spec, p)
        assert np.all(lam[:, 0, 2:] == 0)
        np.testing.assert_allclose(lam.sum(axis=-1), 1.0)


def _manifest_oracle(spec, params, x):
    """Direct mixture sum with item probabilities from the textbook logits."""
    total = 0.0
    for c in range(spec.k):
        prod = 1.0
        for j in range(spec.r):
            d = spec.item_dims[j]
            if params.beta is not None:
                b = params.beta[j]
            else:
                b = params.beta_rs[j] + params.tau
            g = params.gamma[j] * (params.xi[c, d] - b)
            prod *= logits_to_probs(g, spec.link)[x[j]]
        total += params.pi[c] * prod
    return total


class TestProbabilities:
    @pytest.mark.parametrize("spec", spec_grid(), ids=str)
    def test_manifest_matches_oracle_and_sums_to_one(self, spec):
        p = random_params(spec, np.random.default_rng(4))
        total = 0.0
        for x in all_patterns(spec.categories):
            v = manifest_prob(spec, p, x)
            assert v == pytest.approx(_manifest_oracle(spec, p, x), rel=1e-12)
            total += v
        assert abs(total - 1.0) < 1e-10

    def test_conditional_product(self):
        spec = ModelSpec((3, 3), (0, 0), 2, link="continuation")
        p = random_params(spec, np.random.default_rng(5))
        for x in itertools.product(range(3), range(3)):
            mix = sum(p.pi[c] * conditional_pattern_prob(spec, p, x, c) for c in range(2))
            assert mix == pytest.approx(manifest_prob(spec, p, x), rel=1e-13)

    def test_many_items_no_underflow(self):
        spec = ModelSpec((4,) * 400, (0,) * 400, 2)
        p = random_params(spec, np.random.default_rng(0))
        x = np.full(400, 3)
        v = conditional_pattern_prob(spec, p, x, 0)
        assert np.isfinite(v)

    def test_bad_pattern(self):
        spec = ModelSpec((3, 3), (0, 0), 1)
        p = random_params(spec, np.random.default_rng(0))
        with pytest.raises(InvalidPatternError):
            manifest_prob(spec, p, [0, 3])
        with pytest.raises(InvalidPatternError):
            manifest_prob(spec, p, [0])


class TestNaming:
    @pytest.mark.parametrize("link,disc,diff,name", [
        ("global", "free", "free", "GRM"),
        ("global", "constrained", "rating_scale", "1P-RS-GRM"),
        ("local", "free", "free", "GPCM"),
        ("local", "constrained", "free", "PCM"),
        ("local", "constrained", "rating_scale", "RSM"),
        ("continuation", "free", "free", "SM"),
        ("continuation", "constrained", "free", "SRM"),
        ("continuation", "constrained", "rating_scale", "SRSM"),
    ])
    def test_labels(self, link, disc, diff, name):
        assert name_model(ModelSpec((3, 3), (0, 0), 2, link, disc, diff)) == name

    def test_multidimensional_prefix(self):
        assert name_model(ModelSpec((3, 3), (0, 1), 2)) == "LC-multidimensional GRM"


class TestClassOrderAndEmbedding:
    def test_permutation_leaves_likelihood(self):
        spec = ModelSpec((3, 3, 3), (0, 0, 0), 3)
        p = random_params(spec, np.random.default_rng(6))
        q = permute_classes(p, [2, 0, 1])
        for x in all_patterns(spec.categories):
            assert manifest_prob(spec, q, x) == pytest.approx(manifest_prob(spec, p, x), rel=1e-13)
        assert np.all(np.diff(permute_classes(p, canonical_order(p)).xi[:, 0]) >= 0)

    @pytest.mark.parametrize("link", list(LinkKind))
    @pytest.mark.parametrize("src,dst", [
        (("constrained", "rating_scale"), ("constrained", "free")),
        (("constrained", "rating_scale"), ("free", "rating_scale")),
        (("constrained", "free"), ("free", "free")),
        (("free", "rating_scale"), ("free", "free")),
    ])
    def test_regime_embedding_preserves_logits(self, link, src, dst):
        a = ModelSpec((3,) * 4, (0, 0, 1, 1), 2, link, *src)
        b = a.replace(discrimination=dst[0], difficulty=dst[1])
        p = random_params(a, np.random.default_rng(7))
        q = embed(p, a, b)
        assert validate(b, q) == []
        np.testing.assert_allclose(all_logits(b, q), all_logits(a, p), atol=1e-12)

    @pytest.mark.parametrize("disc,diff", [("free", "free"), ("constrained", "free"),
                                           ("constrained", "rating_scale")])
    def test_dimension_split_preserves_logits(self, disc, diff):
        coarse = ModelSpec((3,) * 4, (0,) * 4, 3, "global", disc, diff)
        fine = ModelSpec.from_partition([[0, 1], [2, 3]], (3,) * 4, 3, "global", disc, diff)
        p = random_params(coarse, np.random.default_rng(8))
        q = embed(p, coarse, fine)
        np.testing.assert_allclose(all_logits(fine, q), all_logits(coarse, p), atol=1e-12)

    def test_not_nested(self):
        a = ModelSpec((3,) * 4, (0, 0, 1, 1), 2)
        b = ModelSpec((3,) * 4, (0,) * 4, 2)
        with pytest.raises(SpecError):
            embed(random_params(a, np.random.default_rng(0)), a, b)
        with pytest.raises(SpecError):
            embed(random_params(b, np.random.default_rng(0)), b, b.replace(discrimination="constrained"))
