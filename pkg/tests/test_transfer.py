import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from attrtransfer.datamodel import AttributeSchema, AttributeSpec, respects_schema
from attrtransfer.errors import SchemaError, ShapeError
from attrtransfer.pipeline import (
    DISCARDED,
    RETAINED,
    SourceAnnotations,
    SourcePredictions,
    aggregate,
    obtain_plausibility,
    transfer,
)
from attrtransfer.pipeline.calibration import AttributeCalibration, CalibrationTable
from instances import random_instance, solve_with_loops, solve_with_package


def flat_table(accuracy, names=("a",), threshold=0.0):
    """Every attribute retained at ``threshold`` with a constant map-back ``accuracy``."""
    return CalibrationTable(
        AttributeCalibration(n, RETAINED, threshold, 1.0, accuracy, support=np.array([0.0]), tail_accuracy=np.array([accuracy]))
        for n in names
    )


def one_cell(name, label, accuracy, schema=None):
    schema = schema or AttributeSchema.simple(["a"])
    return SourceAnnotations(name, schema, np.array([[label]], dtype=np.int8), np.array([[0.5]]), flat_table(accuracy, schema.names))


class TestTransfer:
    @pytest.mark.parametrize("r,expected", [(0.40, 1), (0.30, 0), (0.35, 1)])
    def test_rule(self, r, expected):
        preds = SourcePredictions("s", AttributeSchema.simple(["a"]), [[1]], [[r]])
        assert transfer(preds, flat_table(1.0, threshold=0.35))[0, 0] == expected

    def test_discarded_column_is_zero(self):
        schema = AttributeSchema.simple(["a", "b"])
        table = CalibrationTable([AttributeCalibration("a", RETAINED, 0.0, 1.0, 1.0), AttributeCalibration("b", DISCARDED)])
        out = transfer(SourcePredictions("s", schema, [[1, -1], [-1, 1]], [[0.4, 0.4], [0.1, 0.5]]), table)
        np.testing.assert_array_equal(out, [[1, 0], [-1, 0]])

    @given(
        arrays(np.int8, (12, 3), elements=st.sampled_from([1, -1])),
        arrays(np.float64, (12, 3), elements=st.floats(-0.1, 0.5)),
        st.lists(st.floats(-0.1, 0.5), min_size=3, max_size=3),
    )
    def test_never_flips_a_label(self, p, r, thresholds):
        schema = AttributeSchema.simple(["a", "b", "c"])
        table = CalibrationTable(AttributeCalibration(n, RETAINED, t, 1.0, 1.0) for n, t in zip(schema.names, thresholds))
        out = transfer(SourcePredictions("s", schema, p, r), table)
        assert np.all((out == p) | (out == 0))
        np.testing.assert_array_equal(out != 0, r >= np.array(thresholds))

    def test_shape_mismatch(self):
        with pytest.raises(ShapeError):
            SourcePredictions("s", AttributeSchema.simple(["a"]), [[1, 1]], [[0.1, 0.1]])


class TestAggregate:
    def test_highest_map_back_wins(self):
        assert aggregate([one_cell("A", 1, 0.95), one_cell("B", -1, 0.90)])[0, 0] == 1
        assert aggregate([one_cell("B", -1, 0.90), one_cell("A", 1, 0.95)])[0, 0] == 1

    def test_only_nonzero_candidate(self):
        assert aggregate([one_cell("A", 0, 0.99), one_cell("B", -1, 0.60)])[0, 0] == -1

    def test_all_zero_stays_zero(self):
        out, choice = aggregate([one_cell("A", 0, 0.9), one_cell("B", 0, 0.9)], return_choice=True)
        assert out[0, 0] == 0 and choice[0, 0] == -1

    def test_ties_follow_priority(self):
        sources = [one_cell("A", 1, 0.9), one_cell("B", -1, 0.9)]
        assert aggregate(sources)[0, 0] == 1
        assert aggregate(sources, priority=["B", "A"])[0, 0] == -1

    def test_single_source_attribute_is_copied(self, rng):
        sa = AttributeSchema.simple(["a", "b"])
        sb = AttributeSchema.simple(["b"])
        la = rng.choice([1, -1, 0], size=(6, 2)).astype(np.int8)
        lb = rng.choice([1, -1, 0], size=(6, 1)).astype(np.int8)
        out, choice = aggregate(
            [
                SourceAnnotations("A", sa, la, np.zeros((6, 2)), flat_table(0.9, ["a", "b"])),
                SourceAnnotations("B", sb, lb, np.zeros((6, 1)), flat_table(0.8, ["b"])),
            ],
            return_choice=True,
        )
        np.testing.assert_array_equal(out[:, 0], la[:, 0])
        np.testing.assert_array_equal(out[:, 1], np.where(la[:, 1] != 0, la[:, 1], lb[:, 0]))
        np.testing.assert_array_equal(choice[:, 0], np.where(la[:, 0] != 0, 0, -1))

    def test_map_back_uses_cell_reliability(self):
        table = CalibrationTable(
            [AttributeCalibration("a", RETAINED, 0.0, 1.0, 0.8, support=np.array([0.1, 0.5]), tail_accuracy=np.array([0.8, 0.99]))]
        )
        schema = AttributeSchema.simple(["a"])
        a = SourceAnnotations("A", schema, np.array([[1], [1]], np.int8), np.array([[0.1], [0.5]]), table)
        b = one_cell("B", -1, 0.9)
        b = SourceAnnotations("B", schema, np.array([[-1], [-1]], np.int8), np.zeros((2, 1)), b.table)
        np.testing.assert_array_equal(aggregate([a, b])[:, 0], [-1, 1])

    def test_conflicting_schema(self):
        a = one_cell("A", 1, 0.9, AttributeSchema([AttributeSpec("a", "x")]))
        b = one_cell("B", 1, 0.9, AttributeSchema([AttributeSpec("a", "y")]))
        with pytest.raises(SchemaError):
            aggregate([a, b])

    def test_unknown_priority_name(self):
        with pytest.raises(ValueError):
            aggregate([one_cell("A", 1, 0.9)], priority=["Z"])


HAIR = ["Black_Hair", "Blond_Hair", "Brown_Hair", "Gray_Hair"]


class TestPlausibility:
    def test_two_hair_colours_clear_the_class(self, hair_schema):
        row = np.array([[1, 1, -1, -1, 1, -1, 1]])
        out = obtain_plausibility(row, hair_schema)
        np.testing.assert_array_equal(out, [[0, 0, 0, 0, 1, -1, 1]])

    def test_no_violation_is_identity(self, hair_schema):
        rows = np.array([[1, -1, -1, -1, 1, -1, 1], [0, 0, 1, 0, -1, 1, -1]])
        np.testing.assert_array_equal(obtain_plausibility(rows, hair_schema), rows)

    def test_repair_is_local_to_the_class(self, hair_schema):
        row = np.array([[0, 1, -1, -1, 1, 1, -1]])
        np.testing.assert_array_equal(obtain_plausibility(row, hair_schema), [[0, 1, -1, -1, 0, 0, -1]])

    def test_strict_clears_the_row(self, hair_schema):
        rows = np.array([[0, 1, -1, -1, 1, 1, -1], [0, 1, -1, -1, 1, -1, -1]])
        out = obtain_plausibility(rows, hair_schema, strict=True)
        np.testing.assert_array_equal(out, [[0] * 7, rows[1]])

    def test_input_untouched(self, hair_schema):
        row = np.array([[1, 1, 0, 0, 0, 0, 0]])
        obtain_plausibility(row, hair_schema)
        assert row[0, 0] == 1

    @given(arrays(np.int8, st.tuples(st.integers(0, 20), st.just(7)), elements=st.sampled_from([1, -1, 0])), st.booleans())
    def test_at_most_one_positive_per_class(self, labels, strict):
        schema = AttributeSchema.simple(HAIR + ["Young", "Senior", "Eyeglasses"], {"HairColor": HAIR, "Age": ["Young", "Senior"]})
        out = obtain_plausibility(labels, schema, strict=strict)
        assert respects_schema(out, schema)
        changed = out != labels
        assert np.all(out[changed] == 0)


class TestAgainstLoopOracle:
    @pytest.mark.parametrize("strict", [False, True])
    def test_random_tiny_instances(self, strict):
        rng = np.random.default_rng(2024)
        for _ in range(200):
            inst = random_instance(rng)
            np.testing.assert_array_equal(solve_with_package(inst, strict), solve_with_loops(inst, strict))

    def test_three_sources(self):
        rng = np.random.default_rng(7)
        for _ in range(100):
            inst = random_instance(rng, n_sources=3)
            np.testing.assert_array_equal(solve_with_package(inst), solve_with_loops(inst))
