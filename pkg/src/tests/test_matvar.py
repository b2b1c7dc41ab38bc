"""
Unit tests for the matrix-variate adapter
"""

import sys
import os
sys.path.append(os.path.join(os.path.dirname(__file__), '..'))

import logging

import numpy as np

from algorithms.bilt_test import bilt
from algorithms.blockstats import TwoSampleData, fixed_partition
from algorithms.errors import ShapeMismatch
from algorithms.matvar import (
    MatrixLayout,
    devectorize,
    layout_partition,
    matrix_two_sample_test,
    vectorize,
)

class _Collector(logging.Handler):
    def __init__(self):
        super().__init__(logging.WARNING)
        self.messages = []

    def emit(self, record):
        self.messages.append(record.getMessage())

def make_subjects(n, rows, cols, seed, shift=0.0):
    rng = np.random.default_rng(seed)
    return [rng.standard_normal((rows, cols)) + shift for _ in range(n)]

class TestMatrixVariate:
    """Test suite for vectorization and the matrix-variate test"""

    def test_vectorize_is_location_major(self):
        """Entry (t, j) lands at column j * l + t"""
        subject = np.arange(6.0).reshape(2, 3)
        vec = vectorize([subject])[0]
        assert list(vec) == [0.0, 3.0, 1.0, 4.0, 2.0, 5.0]
        for t in range(2):
            for j in range(3):
                assert vec[j * 2 + t] == subject[t, j]
        print("✓ Location-major vectorization test passed")

    def test_devectorize_inverts(self):
        """devectorize undoes vectorize"""
        subjects = make_subjects(4, 3, 5, seed=1)
        back = devectorize(vectorize(subjects), 3, 5)
        assert np.array_equal(back, np.stack(subjects))
        try:
            devectorize(np.zeros((2, 7)), 3, 5)
            assert False, "Should have raised ShapeMismatch"
        except ShapeMismatch:
            pass
        print("✓ Devectorize test passed")

    def test_layout(self):
        """p = l * m and blocks cover l * c entries"""
        layout = MatrixLayout(3, 10, 2)
        assert layout.p == 30 and layout.block_size == 6
        assert layout.truncated(8).cols == 8
        assert layout_partition(layout).sizes == (6,) * 5
        for bad in [lambda: MatrixLayout(0, 5), lambda: MatrixLayout(2, 3, 4), lambda: layout.truncated(11)]:
            try:
                bad()
                assert False, "Should have rejected layout"
            except ValueError:
                pass
        print("✓ Layout test passed")

    def test_remainder_block_warns(self):
        """A short final block is used and logged"""
        collector = _Collector()
        logger = logging.getLogger("algorithms.matvar")
        logger.addHandler(collector)
        try:
            partition = layout_partition(MatrixLayout(2, 7, 3))
        finally:
            logger.removeHandler(collector)
        assert partition.sizes == (6, 6, 2)
        assert any("not divisible" in m for m in collector.messages)
        print("✓ Remainder block warning test passed")

    def test_odd_location_count(self):
        """99 locations in pairs leave one 2-wide block; truncating to 98 removes it"""
        collector = _Collector()
        logger = logging.getLogger("algorithms.matvar")
        logger.addHandler(collector)
        try:
            layout = MatrixLayout(2, 99, 2)
            partition = layout_partition(layout)
            warned = len(collector.messages)
            trimmed = layout_partition(layout.truncated(98))
        finally:
            logger.removeHandler(collector)
        assert partition.sizes == (4,) * 49 + (2,) and partition.p == 198
        assert warned == 1 and len(collector.messages) == 1
        assert trimmed.sizes == (4,) * 49

        group1 = make_subjects(15, 2, 10, seed=6)
        group2 = make_subjects(15, 2, 10, seed=7)
        single = matrix_two_sample_test(group1, group2, MatrixLayout(2, 10, 1))
        assert single == bilt(TwoSampleData(vectorize(group1), vectorize(group2)), fixed_partition(20, 2))
        print("✓ Odd location count test passed")

    def test_ragged_subjects_rejected(self):
        """Every subject must share the layout shape"""
        subjects = make_subjects(5, 2, 4, seed=2)
        subjects[3] = np.zeros((2, 3))
        try:
            matrix_two_sample_test(subjects, make_subjects(5, 2, 4, seed=3), MatrixLayout(2, 4))
            assert False, "Should have raised ShapeMismatch"
        except ShapeMismatch as e:
            assert "observation 3" in str(e)
        try:
            matrix_two_sample_test([], make_subjects(5, 2, 4, seed=3), MatrixLayout(2, 4))
            assert False, "Should have raised ShapeMismatch"
        except ShapeMismatch:
            pass
        print("✓ Ragged subject test passed")

    def test_matches_bilt_on_vectorized_data(self):
        """matrix_two_sample_test = bilt on vec(X) with blocks of l * c"""
        group1 = make_subjects(20, 2, 12, seed=4)
        group2 = make_subjects(22, 2, 12, seed=5, shift=0.1)
        layout = MatrixLayout(2, 12, 2)
        result = matrix_two_sample_test(group1, group2, layout)
        expected = bilt(TwoSampleData(vectorize(group1), vectorize(group2)), fixed_partition(24, 4))
        assert result == expected
        print("✓ Matrix test equivalence passed")

def run_all_tests():
    """Run all matrix-variate tests"""
    print("=== RUNNING MATRIX-VARIATE TESTS ===")
    test_suite = TestMatrixVariate()

    test_suite.test_vectorize_is_location_major()
    test_suite.test_devectorize_inverts()
    test_suite.test_layout()
    test_suite.test_remainder_block_warns()
    test_suite.test_odd_location_count()
    test_suite.test_ragged_subjects_rejected()
    test_suite.test_matches_bilt_on_vectorized_data()

    print("ALL MATRIX-VARIATE TESTS PASSED!")

if __name__ == "__main__":
    run_all_tests()
