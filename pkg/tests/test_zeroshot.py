import itertools

import numpy as np
import pytest

from cxrkit.numerics import SeededRng
from cxrkit.zeroshot import (
    EmbeddingSet,
    PromptScorer,
    PromptSet,
    TextStubEmbedder,
    build_prompt_variants,
    class_probability_posneg,
    embed_text_stub,
    hybrid_prompt_scores,
    prompt_ensemble,
    tta_scores,
    zeroshot_evaluate,
)


def _prompt_set(k=3):
    classes = [f"c{i}" for i in range(k)]
    return PromptSet(
        classes=classes,
        names={c: [f"{c} finding"] for c in classes},
        descriptions={c: [f"diffuse {c} opacity in the lower zone"] for c in classes},
        negatives={c: [f"no {c} finding"] for c in classes},
    )


class TestStubEmbedder:
    def test_bag_of_words_order_invariance_exact(self):
        assert np.array_equal(embed_text_stub("a b", 16), embed_text_stub("b a", 16))

    def test_bit_identical_across_runs(self):
        a = TextStubEmbedder(dim=32, seed=5).embed("pleural effusion on the left")
        b = TextStubEmbedder(dim=32, seed=5).embed("pleural effusion on the left")
        np.testing.assert_array_equal(a, b)

    def test_seed_changes_embedding(self):
        a = embed_text_stub("consolidation", 32, seed=0)
        b = embed_text_stub("consolidation", 32, seed=1)
        assert not np.array_equal(a, b)

    def test_disjoint_vocabularies_nearly_orthogonal(self):
        a = embed_text_stub("cardiac silhouette enlarged markedly", 512)
        b = embed_text_stub("pneumothorax apex right subtle", 512)
        assert abs(float(a @ b)) < 0.2

    def test_empty_token_stream_gives_zero_vector(self):
        out = embed_text_stub("...!!!", 16)
        np.testing.assert_array_equal(out, np.zeros(16))

    def test_unit_norm_and_case_punctuation_folding(self):
        emb = TextStubEmbedder(dim=64)
        a = emb.embed("Pleural Effusion, left.")
        b = emb.embed("pleural effusion left")
        np.testing.assert_array_equal(a, b)
        assert np.linalg.norm(a) == pytest.approx(1.0, abs=1e-12)

    def test_minimum_dim_enforced(self):
        with pytest.raises(ValueError):
            TextStubEmbedder(dim=4)


class TestEmbeddingSet:
    def test_normalized_on_load_and_scale_invariant(self):
        rng = SeededRng(3)
        raw = rng.normal((5, 8))
        a = EmbeddingSet.from_matrix(raw)
        b = EmbeddingSet.from_matrix(raw * 123.0)
        np.testing.assert_allclose(a.vectors, b.vectors, atol=1e-12)
        np.testing.assert_allclose(np.linalg.norm(a.vectors, axis=1), 1.0, atol=1e-6)

    def test_default_ids_and_flags(self):
        es = EmbeddingSet.from_matrix(np.array([[1.0, 0.0], [0.0, 0.0]]))
        assert es.ids == ["0", "1"]
        assert es.zero_flags.tolist() == [False, True]


class TestPosNegScoring:
    def test_aligned_positive_orthogonal_negative(self):
        img = np.array([[1.0, 0.0]])
        pos = [np.array([1.0, 0.0])]
        neg = [np.array([0.0, 1.0])]
        p = class_probability_posneg(img, pos, neg, temperature=0.07)
        assert p[0, 0] > 0.999

    def test_equal_similarities_give_half(self):
        img = np.array([[1.0, 1.0]])
        pos = [np.array([1.0, 0.0])]
        neg = [np.array([0.0, 1.0])]
        p = class_probability_posneg(img, pos, neg)
        assert p[0, 0] == pytest.approx(0.5, abs=1e-12)

    def test_swapping_pos_neg_complements(self):
        rng = SeededRng(7)
        img = rng.normal((6, 8))
        pos = [rng.normal(8) for _ in range(3)]
        neg = [rng.normal(8) for _ in range(3)]
        p = class_probability_posneg(img, pos, neg)
        q = class_probability_posneg(img, neg, pos)
        np.testing.assert_allclose(p + q, 1.0, atol=1e-12)

    def test_probabilities_strictly_inside_unit_interval(self):
        rng = SeededRng(9)
        p = class_probability_posneg(
            rng.normal((10, 6)), [rng.normal(6)], [rng.normal(6)]
        )
        assert (p > 0.0).all() and (p < 1.0).all()

    def test_temperature_must_be_positive(self):
        with pytest.raises(ValueError):
            class_probability_posneg(np.eye(2), [np.ones(2)], [np.ones(2)], temperature=0.0)


class TestPromptEnsemble:
    def _variants(self, rng, k=3, v=2, d=8):
        return [
            [(rng.normal(d), rng.normal(d)) for _ in range(v)]
            for _ in range(k)
        ]

    def test_single_variant_equals_posneg(self):
        rng = SeededRng(11)
        img = rng.normal((4, 8))
        variants = self._variants(rng, k=2, v=1)
        out = prompt_ensemble(img, variants)
        pos = [variants[c][0][0] for c in range(2)]
        neg = [variants[c][0][1] for c in range(2)]
        np.testing.assert_allclose(out, class_probability_posneg(img, pos, neg), atol=1e-15)

    def test_duplicated_variant_identical_to_single(self):
        rng = SeededRng(13)
        img = rng.normal((4, 8))
        pair = (rng.normal(8), rng.normal(8))
        single = prompt_ensemble(img, [[pair]])
        doubled = prompt_ensemble(img, [[pair, pair]])
        np.testing.assert_allclose(doubled, single, atol=1e-15)

    def test_prob_mode_is_hand_average(self):
        rng = SeededRng(17)
        img = rng.normal((5, 8))
        v1 = [(rng.normal(8), rng.normal(8))]
        v2 = [(rng.normal(8), rng.normal(8))]
        merged = prompt_ensemble(img, [v1[0:1] + v2[0:1]])
        a = prompt_ensemble(img, [v1])
        b = prompt_ensemble(img, [v2])
        np.testing.assert_allclose(merged, (a + b) / 2.0, atol=1e-12)

    def test_convex_combination_bounds(self):
        rng = SeededRng(19)
        img = rng.normal((6, 8))
        variants = self._variants(rng, k=2, v=4)
        out = prompt_ensemble(img, variants)
        for c in range(2):
            per = np.stack([
                prompt_ensemble(img, [[pair]])[:, 0] for pair in variants[c]
            ])
            assert (out[:, c] >= per.min(axis=0) - 1e-12).all()
            assert (out[:, c] <= per.max(axis=0) + 1e-12).all()

    def test_embed_mode_runs_and_differs(self):
        rng = SeededRng(23)
        img = rng.normal((4, 8))
        variants = self._variants(rng, k=2, v=3)
        p = prompt_ensemble(img, variants, mode="prob")
        e = prompt_ensemble(img, variants, mode="embed")
        assert p.shape == e.shape == (4, 2)
        assert not np.allclose(p, e)

    def test_empty_variant_list_rejected(self):
        with pytest.raises(ValueError):
            prompt_ensemble(np.eye(2), [[]])

    def test_dim_mismatch_named(self):
        rng = SeededRng(27)
        with pytest.raises(ValueError, match="does not match image dim"):
            prompt_ensemble(rng.normal((3, 8)), [[(rng.normal(16), rng.normal(16))]])


class TestHybridPromptScores:
    def test_empty_descriptions_reduce_to_names(self):
        ps = _prompt_set(2)
        stripped = PromptSet(
            classes=ps.classes,
            names=ps.names,
            descriptions={c: [] for c in ps.classes},
            negatives=ps.negatives,
        )
        emb = TextStubEmbedder(dim=32)
        rng = SeededRng(29)
        img = rng.normal((4, 32))
        name_only = hybrid_prompt_scores(img, stripped, emb)
        pos = [emb.embed(ps.names[c][0]) for c in ps.classes]
        neg = [emb.embed(ps.negatives[c][0]) for c in ps.classes]
        np.testing.assert_allclose(name_only, class_probability_posneg(img, pos, neg), atol=1e-15)

    def test_names_equal_descriptions_collapse(self):
        classes = ["a", "b"]
        same = {c: [f"{c} pattern"] for c in classes}
        ps = PromptSet(classes=classes, names=same,
                       descriptions={c: list(same[c]) for c in classes},
                       negatives={c: ["clear lungs"] for c in classes})
        emb = TextStubEmbedder(dim=32)
        rng = SeededRng(31)
        img = rng.normal((3, 32))
        both = hybrid_prompt_scores(img, ps, emb)
        names_only = hybrid_prompt_scores(
            img,
            PromptSet(classes=classes, names=same,
                      descriptions={c: [] for c in classes},
                      negatives={c: ["clear lungs"] for c in classes}),
            emb,
        )
        np.testing.assert_allclose(both, names_only, atol=1e-15)

    def test_union_is_count_weighted_mean_of_subsets(self):
        ps = _prompt_set(2)
        emb = TextStubEmbedder(dim=32)
        rng = SeededRng(37)
        img = rng.normal((5, 32))
        union = hybrid_prompt_scores(img, ps, emb)
        names_only = hybrid_prompt_scores(
            img,
            PromptSet(classes=ps.classes, names=ps.names,
                      descriptions={c: [] for c in ps.classes}, negatives=ps.negatives),
            emb,
        )
        desc_only = hybrid_prompt_scores(
            img,
            PromptSet(classes=ps.classes, names=ps.descriptions,
                      descriptions={c: [] for c in ps.classes}, negatives=ps.negatives),
            emb,
        )
        np.testing.assert_allclose(union, 0.5 * names_only + 0.5 * desc_only, atol=1e-12)

    def test_negative_cycling(self):
        classes = ["a"]
        ps = PromptSet(
            classes=classes,
            names={"a": ["x1", "x2", "x3"]},
            descriptions={"a": []},
            negatives={"a": ["n1", "n2"]},
        )
        emb = TextStubEmbedder(dim=32)
        variants = build_prompt_variants(ps, emb)
        assert len(variants[0]) == 3
        np.testing.assert_array_equal(variants[0][2][1], emb.embed("n1"))

    def test_class_order_equivariance(self):
        ps = _prompt_set(3)
        emb = TextStubEmbedder(dim=32)
        rng = SeededRng(41)
        img = rng.normal((4, 32))
        base = hybrid_prompt_scores(img, ps, emb)
        order = [2, 0, 1]
        ps2 = PromptSet(
            classes=[ps.classes[i] for i in order],
            names=ps.names, descriptions=ps.descriptions, negatives=ps.negatives,
        )
        permuted = hybrid_prompt_scores(img, ps2, emb)
        np.testing.assert_array_equal(permuted, base[:, order])


class TestTtaScores:
    def test_mirrors_tta_average(self):
        rng = SeededRng(43)
        views = [rng.random((4, 3)) for _ in range(3)]
        np.testing.assert_allclose(tta_scores(views), sum(views) / 3.0, atol=1e-15)

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            tta_scores([])


class TestPromptSetJson:
    def test_round_trip(self, tmp_path):
        ps = _prompt_set(3)
        path = tmp_path / "prompts.json"
        ps.save(path)
        back = PromptSet.load(path)
        assert back.classes == ps.classes
        assert back.names == ps.names
        assert back.descriptions == ps.descriptions
        assert back.negatives == ps.negatives

    def test_missing_entry_rejected(self):
        with pytest.raises(ValueError, match="no entry"):
            PromptSet.from_dict({"classes": ["a"]})

    def test_missing_negatives_rejected(self):
        with pytest.raises(ValueError, match="negative"):
            PromptSet(classes=["a"], names={"a": ["x"]}, descriptions={}, negatives={})


class TestShufflingDefense:
    def test_all_permutations_embed_identically(self):
        """Concatenation order of descriptions never changes the embedding."""
        emb = TextStubEmbedder(dim=64, seed=2)
        parts = ["diffuse opacity", "blunted angle", "enlarged silhouette"]
        references = {
            emb.embed("; ".join(p for p in perm)).tobytes()
            for perm in itertools.permutations(parts)
        }
        assert len(references) == 1


def test_zeroshot_evaluate_delegates():
    rng = SeededRng(47)
    labels = (rng.random((20, 3)) < 0.5).astype(float)
    labels[0] = 1.0
    labels[1] = 0.0
    report = zeroshot_evaluate(labels, labels)
    assert report.map == 1.0


def test_prompt_scorer_estimator():
    ps = _prompt_set(3)
    rng = SeededRng(53)
    img = rng.normal((6, 32))
    scorer = PromptScorer(dim=32, seed=0).fit(ps)
    out = scorer.transform(img)
    emb = TextStubEmbedder(dim=32, seed=0)
    np.testing.assert_array_equal(out, hybrid_prompt_scores(img, ps, emb))
    assert scorer.get_params()["dim"] == 32
