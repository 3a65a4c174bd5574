import json

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays
from scipy.special import expit

from attrtransfer.datamodel import AttributeSchema
from attrtransfer.errors import ConfigError, DataError, ParseError, ShapeError, StageError
from attrtransfer.recognition import (
    ComparisonPair,
    HammingComparator,
    LogRegComparator,
    PairSamplingConfig,
    ScoreSet,
    all_pairs,
    attribute_importance,
    eval_closed_set,
    eval_open_set,
    eval_verification,
    fuse_scores,
    fusion_weights,
    hamming_score,
    joint_features,
    load_logreg,
    logreg_score,
    minmax,
    overlap_count,
    sample_training_pairs,
    save_logreg,
    select_gallery,
    split_open_set,
    train_logreg,
    valid_filter,
)
from attrtransfer.recognition.io import load_scores, save_scores, write_cmc, write_det, write_verification
from oracles import (
    auc_mann_whitney,
    cmc_loops,
    eer_loops,
    fmr_fnmr_loops,
    fnmr_at_fmr_loops,
    open_set_loops,
    sweep_thresholds,
)
from recog_data import TableComparator, identity_annotations, index_rows, pair_scores, subject_split

tristate = st.sampled_from([1, -1, 0])
# scores on a coarse grid so ties between and within the lists are common
grid_scores = st.lists(st.integers(0, 20).map(lambda v: v / 20), min_size=1, max_size=100)


class TestJointFeatures:
    @pytest.mark.parametrize(
        "ref,probe,slots",
        [(1, 1, [1, 0, 0]), (-1, -1, [0, 1, 0]), (1, -1, [0, 0, 1]), (-1, 1, [0, 0, 1]), (1, 0, [0, 0, 0]), (0, 0, [0, 0, 0])],
    )
    def test_slots(self, ref, probe, slots):
        np.testing.assert_array_equal(joint_features([ref], [probe]), slots)

    @given(arrays(np.int8, (5, 8), elements=tristate), arrays(np.int8, (5, 8), elements=tristate))
    def test_at_most_one_slot_per_attribute(self, a, b):
        f = joint_features(a, b).reshape(5, 8, 3)
        sums = f.sum(axis=-1)
        np.testing.assert_array_equal(sums, (a != 0) & (b != 0))
        np.testing.assert_array_equal(overlap_count(a, b), sums.sum(axis=-1))

    def test_shape_mismatch(self):
        with pytest.raises(ShapeError):
            joint_features([1, 1], [1])


class TestHamming:
    def test_identical(self):
        row = np.array([1, -1, 1, 1, -1])
        assert HammingComparator().score_pairs(row, row) == 1.0

    def test_all_disagree(self):
        row = np.array([1, -1, 1, 1])
        assert HammingComparator().score_pairs(row, -row) == 0.0

    def test_one_of_four_disagrees(self):
        assert HammingComparator().score_pairs([1, -1, 1, 1], [1, -1, 1, -1]) == 0.75

    def test_literal_mode_is_zero_when_fully_annotated(self):
        row = np.array([1, -1, 1, 1])
        assert HammingComparator(literal=True).score_pairs(row, row) == 0.0
        assert hamming_score(joint_features(row, row), 4, literal=True) == 0.0

    @given(arrays(np.int8, (6, 10), elements=tristate), arrays(np.int8, (6, 10), elements=tristate))
    def test_symmetric(self, a, b):
        h = HammingComparator()
        np.testing.assert_array_equal(h.score_pairs(a, b), h.score_pairs(b, a))

    def test_wrong_feature_length(self):
        with pytest.raises(ShapeError):
            hamming_score(np.zeros(7), 3)


class TestValidFilter:
    def _pair(self, n):
        return ComparisonPair("r", "p", n, True)

    @pytest.mark.parametrize("overlap,kept", [(9, False), (10, True), (0, False)])
    def test_boundary(self, overlap, kept):
        assert (len(valid_filter([self._pair(overlap)])) == 1) is kept

    def test_fully_undefined_samples(self):
        pairs = all_pairs(np.zeros((2, 12), dtype=np.int8), ["a", "b"])
        assert pairs.overlap[0] == 0
        assert len(valid_filter(pairs)) == 0

    @given(arrays(np.int8, (8, 12), elements=tristate), st.integers(0, 12), st.integers(0, 12))
    def test_monotone_in_threshold(self, ann, t1, t2):
        lo, hi = sorted((t1, t2))
        pairs = all_pairs(ann, [str(i % 3) for i in range(8)])
        kept_hi = set(zip(*(valid_filter(pairs, hi).ref, valid_filter(pairs, hi).probe)))
        kept_lo = set(zip(*(valid_filter(pairs, lo).ref, valid_filter(pairs, lo).probe)))
        assert kept_hi <= kept_lo


class TestLogRegComparator:
    def test_zero_model(self):
        c = LogRegComparator(np.zeros(9))
        assert c.score_pairs([1, -1, 0], [1, 1, 0]) == 0.5

    def test_all_zero_feature_gives_sigmoid_of_bias(self):
        c = LogRegComparator(np.arange(6.0), bias=-1.3)
        assert logreg_score(c, np.zeros(6)) == pytest.approx(expit(-1.3))

    def test_hand_computed(self):
        c = LogRegComparator([0.5, 0.2, -1.0, 0.3, 0.7, -2.0], bias=0.1)
        # attribute 0 both true -> slot 0, attribute 1 differs -> slot 2
        expected = 1 / (1 + np.exp(-(0.5 - 2.0 + 0.1)))
        assert c.score_pairs([1, 1], [1, -1]) == pytest.approx(expected, rel=1e-14)

    def test_weight_length_must_be_multiple_of_three(self):
        with pytest.raises(ShapeError):
            LogRegComparator(np.zeros(4))


def _split(ann, subjects, seed=0, train_fraction=0.2):
    ids = sorted(set(subjects))
    rng = np.random.default_rng(seed)
    train_ids = set(rng.choice(ids, int(round(train_fraction * len(ids))), replace=False))
    return subject_split(subjects, train_ids)


class TestTrainLogReg:
    def test_deterministic_attributes_separate_identities(self, rng):
        ann, subjects, _ = identity_annotations(rng, 100, 5, 20)
        tr, te = _split(ann, subjects)
        model = train_logreg(ann[tr], [subjects[i] for i in tr], seed=0)
        assert model.weights.size == 3 * 20
        auc = eval_verification(pair_scores(model, ann[te], [subjects[i] for i in te]), ()).auc
        assert auc >= 0.99

    def test_shuffled_identities_give_chance(self, rng):
        ann, subjects, _ = identity_annotations(rng, 100, 5, 20)
        subjects = list(rng.permutation(subjects))
        tr, te = _split(ann, subjects)
        model = train_logreg(ann[tr], [subjects[i] for i in tr], seed=0)
        auc = eval_verification(pair_scores(model, ann[te], [subjects[i] for i in te]), ()).auc
        assert abs(auc - 0.5) <= 0.05

    def test_reliable_attributes_get_more_weight(self, rng):
        noise = np.linspace(0.0, 0.45, 20)
        ann, subjects, _ = identity_annotations(rng, 150, 5, 20, noise=noise)
        tr, te = _split(ann, subjects, train_fraction=0.3)
        model = train_logreg(ann[tr], [subjects[i] for i in tr], seed=0)
        test_subjects = [subjects[i] for i in te]
        logreg = eval_verification(pair_scores(model, ann[te], test_subjects), ()).auc
        hamming = eval_verification(pair_scores(HammingComparator(), ann[te], test_subjects), ()).auc
        assert logreg >= hamming
        differ = model.weights.reshape(20, 3)[:, 2]
        assert differ[:5].mean() < differ[-5:].mean()

    def test_seeded(self, rng):
        ann, subjects, _ = identity_annotations(rng, 30, 4, 12, noise=0.1)
        a = train_logreg(ann, subjects, seed=3)
        b = train_logreg(ann, subjects, seed=3)
        np.testing.assert_array_equal(a.weights, b.weights)
        assert a.bias == b.bias

    def test_no_genuine_pairs(self, rng):
        ann, subjects, _ = identity_annotations(rng, 10, 1, 12)
        with pytest.raises(StageError):
            train_logreg(ann, subjects)

    def test_pair_sampling(self, rng):
        ann, subjects, _ = identity_annotations(rng, 20, 6, 12, undefined=0.05)
        cfg = PairSamplingConfig(max_genuine_per_subject=5, imposter_ratio=2.0)
        pairs = sample_training_pairs(ann, subjects, cfg, seed=1)
        assert (pairs.overlap >= 10).all()
        n_gen = int(pairs.genuine.sum())
        assert n_gen <= 5 * 20
        assert int((~pairs.genuine).sum()) == 2 * n_gen
        subj = np.asarray(subjects)
        np.testing.assert_array_equal(pairs.genuine, subj[pairs.ref] == subj[pairs.probe])


class TestImportance:
    def test_identity_attribute_has_most_negative_differ_weight(self, rng):
        n, per, k = 60, 5, 12
        ann = rng.choice(np.array([1, -1], dtype=np.int8), size=(n * per, k))
        ann[:, 3] = np.repeat(rng.choice([1, -1], size=n), per)
        subjects = [f"s{i // per}" for i in range(n * per)]
        schema = AttributeSchema.simple([f"a{j}" for j in range(k)])
        table = attribute_importance(train_logreg(ann, subjects, seed=0), schema)
        differ = dict(table["True-False"])
        assert min(differ, key=differ.get) == "a3"

    def test_zero_model(self):
        schema = AttributeSchema.simple(["a", "b"])
        table = attribute_importance(LogRegComparator(np.zeros(6)), schema)
        assert list(table) == ["True-True", "False-False", "True-False"]
        for rows in table.values():
            assert [n for n, _ in rows] == ["a", "b"]
            assert all(w == 0.0 for _, w in rows)

    def test_schema_size_mismatch(self):
        with pytest.raises(ShapeError):
            attribute_importance(LogRegComparator(np.zeros(6)), AttributeSchema.simple(["a"]))

    def test_model_file_round_trip(self, tmp_path, rng):
        schema = AttributeSchema.simple(["a", "b", "c"])
        c = LogRegComparator(rng.standard_normal(9), bias=0.25)
        save_logreg(c, schema, tmp_path / "m.csv")
        back = load_logreg(tmp_path / "m.csv", schema)
        np.testing.assert_array_equal(back.weights, c.weights)
        assert back.bias == c.bias


class TestVerification:
    def test_perfect_separation(self):
        r = eval_verification(ScoreSet([0.9, 0.8, 0.95], [0.1, 0.5]))
        assert r.eer == 0.0 and r.auc == 1.0

    def test_crossing_example(self):
        assert eval_verification(ScoreSet([0.9, 0.1], [0.8, 0.0])).eer == pytest.approx(0.5, abs=1e-15)

    def test_fnmr_at_fmr_example(self):
        r = eval_verification(ScoreSet([0.9, 0.8, 0.2], [0.7, 0.3, 0.1]), [1 / 3])
        assert r.fnmr_at_fmr[1 / 3] == pytest.approx(1 / 3)

    def test_empty(self):
        with pytest.raises(DataError):
            eval_verification(ScoreSet([], [0.1]))

    @given(grid_scores, grid_scores, st.sampled_from([0.0, 1e-2, 0.1, 0.25, 0.5]))
    def test_matches_recount(self, genuine, imposter, target):
        r = eval_verification(ScoreSet(genuine, imposter), [target])
        thr = sweep_thresholds(genuine, imposter)
        np.testing.assert_array_equal(r.thresholds, thr)
        for t, a, b in zip(r.thresholds, r.fmr, r.fnmr):
            fa, fb = fmr_fnmr_loops(genuine, imposter, t)
            assert abs(a - fa) <= 1e-12 and abs(b - fb) <= 1e-12
        assert abs(r.eer - eer_loops(genuine, imposter)) <= 1e-12
        assert abs(r.auc - auc_mann_whitney(genuine, imposter)) <= 1e-12
        assert abs(r.fnmr_at_fmr[target] - fnmr_at_fmr_loops(genuine, imposter, target)) <= 1e-12

    @given(grid_scores, grid_scores)
    def test_invariant_under_increasing_transform(self, genuine, imposter):
        a = eval_verification(ScoreSet(genuine, imposter), [0.1])
        b = eval_verification(ScoreSet(np.exp(3 * np.array(genuine)), np.exp(3 * np.array(imposter))), [0.1])
        assert a.eer == pytest.approx(b.eer, abs=1e-12)
        assert a.auc == pytest.approx(b.auc, abs=1e-12)


def _random_identification(rng, n_subjects, per_subject):
    n = n_subjects * per_subject
    subjects = [f"s{i // per_subject}" for i in range(n)]
    table = rng.integers(0, 8, size=(n, n)) / 8
    gallery = np.arange(0, n, per_subject)
    return subjects, table, gallery


class TestClosedSet:
    @given(st.integers(2, 8), st.integers(2, 4), st.integers(0, 2**32 - 1))
    def test_matches_recount(self, n_subjects, per_subject, seed):
        rng = np.random.default_rng(seed)
        subjects, table, gallery = _random_identification(rng, n_subjects, per_subject)
        n = len(subjects)
        ids = [str(i) for i in range(n)]
        res = eval_closed_set(index_rows(n), subjects, ids, TableComparator(table), min_overlap=1, gallery=gallery)
        probes = [i for i in range(n) if i not in set(gallery)]
        rows = [[table[p, g] for g in gallery] for p in probes]
        mated = [list(gallery).index(gallery[p // per_subject]) for p in probes]
        np.testing.assert_allclose(res.cmc, cmc_loops(rows, mated, n_subjects), rtol=0, atol=1e-12)
        assert res.cmc[-1] == 1.0
        assert np.all(np.diff(res.cmc) >= 0)

    def test_ties_count_against_the_probe(self):
        table = np.full((4, 4), 0.5)
        res = eval_closed_set(index_rows(4), ["a", "a", "b", "b"], list("0123"), TableComparator(table), 1, gallery=[0, 2])
        np.testing.assert_array_equal(res.ranks, [2, 2])
        np.testing.assert_array_equal(res.cmc, [0.0, 1.0])

    def test_identical_probe_is_rank_one(self, rng):
        ann, subjects, samples = identity_annotations(rng, 50, 5, 30)
        res = eval_closed_set(ann, subjects, samples, HammingComparator())
        assert res.cmc[0] == 1.0
        assert res.n_probes == 200 and res.n_excluded == 0

    def test_probe_without_valid_comparison_is_excluded(self, rng):
        ann, subjects, samples = identity_annotations(rng, 5, 3, 12)
        ann[1] = 0
        res = eval_closed_set(ann, subjects, samples, HammingComparator())
        assert res.n_excluded == 1 and res.n_probes == 9

    def test_gallery_selection(self):
        ann = np.array([[1, 0], [1, 1], [1, -1], [0, 0], [1, 0]])
        gallery, probes = select_gallery(ann, ["x", "x", "x", "y", "y"], ["c", "b", "a", "e", "d"])
        # x: samples "b" and "a" tie on two defined values, "a" wins; y: "d" has more defined
        np.testing.assert_array_equal(gallery, [2, 4])
        np.testing.assert_array_equal(probes, [0, 1, 3])

    def test_monotone_transform_keeps_cmc(self, rng):
        subjects, table, gallery = _random_identification(rng, 6, 3)
        ids = [str(i) for i in range(18)]
        a = eval_closed_set(index_rows(18), subjects, ids, TableComparator(table), 1, gallery=gallery)
        b = eval_closed_set(index_rows(18), subjects, ids, TableComparator(np.tanh(table * 4) - 7), 1, gallery=gallery)
        np.testing.assert_array_equal(a.cmc, b.cmc)


class TestOpenSet:
    @given(st.integers(2, 6), st.integers(2, 4), st.integers(1, 3), st.integers(0, 2**32 - 1))
    def test_matches_recount(self, n_enrolled, per_subject, n_unenrolled, seed):
        rng = np.random.default_rng(seed)
        n_subjects = n_enrolled + n_unenrolled
        subjects, table, gallery = _random_identification(rng, n_subjects, per_subject)
        enrolled_gallery = gallery[:n_enrolled]
        enrolled = [i for i in range(n_enrolled * per_subject) if i not in set(gallery)]
        unenrolled = list(range(n_enrolled * per_subject, n_subjects * per_subject))
        rows = index_rows(len(subjects))
        res = eval_open_set(
            rows[enrolled_gallery],
            [subjects[g] for g in enrolled_gallery],
            rows[enrolled],
            [subjects[i] for i in enrolled],
            rows[unenrolled],
            TableComparator(table),
            min_overlap=1,
        )
        e_rows = [[table[p, g] for g in enrolled_gallery] for p in enrolled]
        mated = [p // per_subject for p in enrolled]
        u_rows = [[table[p, g] for g in enrolled_gallery] for p in unenrolled]
        for t, fpir, fnir in zip(res.thresholds, res.fpir, res.fnir):
            ef, en = open_set_loops(e_rows, mated, u_rows, t)
            assert abs(fpir - ef) <= 1e-12 and abs(fnir - en) <= 1e-12
        assert res.fpir[-1] == 0.0 and res.fnir[-1] == 1.0

    def test_perfect_rank_one_at_lowest_threshold(self, rng):
        ann, subjects, samples = identity_annotations(rng, 20, 4, 30)
        enrolled_ids, unenrolled_ids = split_open_set(subjects, 0.25, seed=0)
        sub = np.asarray(subjects)
        enrolled_mask = np.isin(sub, enrolled_ids)
        gallery, probes = select_gallery(ann[enrolled_mask], sub[enrolled_mask], np.asarray(samples)[enrolled_mask])
        ea, es = ann[enrolled_mask], sub[enrolled_mask]
        res = eval_open_set(ea[gallery], es[gallery], ea[probes], es[probes], ann[~enrolled_mask], HammingComparator())
        assert res.fpir[0] == 1.0 and res.fnir[0] == 0.0
        assert res.n_enrolled == len(probes) and res.n_unenrolled == int((~enrolled_mask).sum())

    def test_needs_unenrolled_probes(self):
        with pytest.raises(DataError):
            eval_open_set(index_rows(1), ["a"], index_rows(1), ["a"], np.zeros((0, 1), int), TableComparator(np.ones((1, 1))), 1)

    def test_split_keeps_both_sides(self):
        enrolled, unenrolled = split_open_set(["a", "b", "c"], 0.99, seed=0)
        assert len(enrolled) == 1 and len(unenrolled) == 2


class TestFusion:
    def test_equal_eers(self):
        np.testing.assert_allclose(fusion_weights([0.2, 0.2]), [0.5, 0.5])

    def test_complement_weights(self):
        np.testing.assert_allclose(fusion_weights([0.0, 0.5]), [2 / 3, 1 / 3])

    def test_inverse_weights(self):
        np.testing.assert_allclose(fusion_weights([0.1, 0.3], "inverse"), [0.75, 0.25])
        np.testing.assert_allclose(fusion_weights([0.0, 0.3], "inverse"), [1.0, 0.0])

    def test_bad_mode(self):
        with pytest.raises(ConfigError):
            fusion_weights([0.1, 0.1], "max")

    def test_self_fusion_keeps_ranking(self, rng):
        s = ScoreSet(rng.random(30) + 0.3, rng.random(40))
        fused, w = fuse_scores(s, s)
        np.testing.assert_allclose(w, [0.5, 0.5])
        before = np.argsort(np.r_[s.genuine, s.imposter], kind="stable")
        after = np.argsort(np.r_[fused.genuine, fused.imposter], kind="stable")
        np.testing.assert_array_equal(before, after)
        assert eval_verification(fused, ()).auc == pytest.approx(eval_verification(s, ()).auc, abs=1e-12)

    def test_minmax_range(self, rng):
        n = minmax(ScoreSet(rng.random(5) * 7 - 2, rng.random(5) * 7 - 2))
        allv = np.r_[n.genuine, n.imposter]
        assert allv.min() == 0.0 and allv.max() == 1.0

    def test_misaligned(self):
        with pytest.raises(ShapeError):
            fuse_scores(ScoreSet([1.0], [0.0]), ScoreSet([1.0, 0.5], [0.0]))


class TestScoreFiles:
    def test_round_trip(self, tmp_path, rng):
        scores = rng.standard_normal(6)
        gen = rng.random(6) < 0.5
        save_scores(tmp_path / "s.csv", list("abcdef"), list("ghijkl"), gen, scores, {"seed": 1})
        refs, probes, g, s = load_scores(tmp_path / "s.csv")
        assert refs == list("abcdef") and probes == list("ghijkl")
        np.testing.assert_array_equal(g, gen)
        np.testing.assert_array_equal(s, scores)

    def test_malformed_row(self, tmp_path):
        (tmp_path / "s.csv").write_text("ref_id,probe_id,is_genuine,score\na,b,2,0.1\n")
        with pytest.raises(ParseError):
            load_scores(tmp_path / "s.csv")

    def test_metric_files(self, tmp_path):
        r = eval_verification(ScoreSet([0.9, 0.8, 0.2], [0.7, 0.3, 0.1]), [0.1])
        write_verification(r, tmp_path / "roc.csv", tmp_path / "summary.json", {"seed": 0}, {"valid_pairs": 9})
        lines = (tmp_path / "roc.csv").read_text().splitlines()
        assert lines[1] == "threshold,FMR,FNMR"
        assert lines[-1].startswith("inf,0.0,1.0")
        summary = json.loads((tmp_path / "summary.json").read_text())
        assert summary["valid_pairs"] == 9 and summary["eer"] == r.eer

    def test_cmc_and_det_files(self, tmp_path, rng):
        ann, subjects, samples = identity_annotations(rng, 6, 3, 12)
        closed = eval_closed_set(ann, subjects, samples, HammingComparator())
        write_cmc(closed, tmp_path / "cmc.csv")
        lines = (tmp_path / "cmc.csv").read_text().splitlines()
        assert lines[0] == "k,CMC" and len(lines) == 7
        sub = np.asarray(subjects)
        enrolled = sub < "id004"
        gallery, probes = select_gallery(ann[enrolled], sub[enrolled], np.asarray(samples)[enrolled])
        ea, es = ann[enrolled], sub[enrolled]
        det = eval_open_set(ea[gallery], es[gallery], ea[probes], es[probes], ann[~enrolled], HammingComparator())
        write_det(det, tmp_path / "det.csv")
        assert (tmp_path / "det.csv").read_text().splitlines()[0] == "threshold,FPIR,FNIR"
