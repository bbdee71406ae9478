"""Tests for the exact rational oracle"""

from fractions import Fraction

import numpy as np
import pytest

from exactoracle import (
    JordanSpec,
    NoControllableInputError,
    RationalMatrix,
    SuiteResult,
    _check_grounded_laplacian,
    brute_force_ND,
    build_jordan,
    example1_on_manifold,
    example1_pencil,
    exact_ctrb_rank,
    exact_minpoly_degree,
    exact_rank,
    jordan_structures,
    oracle_agrees,
    random_grounded_laplacian,
    random_jordan_spec,
    run_suite,
)
from graphgen import RngStream


class TestRationalMatrix:
    """Test the immutable Fraction matrix"""

    def test_entries_are_fractions(self):
        """Strings, floats and ints all become Fractions"""
        M = RationalMatrix([[1, "1/3"], [0.5, 2]])
        assert M[0, 1] == Fraction(1, 3)
        assert M[1, 0] == Fraction(1, 2)
        assert M.shape == (2, 2)

    def test_immutable(self):
        """Attributes cannot be reassigned"""
        M = RationalMatrix.identity(2)
        with pytest.raises(AttributeError):
            M.rows = 3

    def test_ragged_rows_rejected(self):
        """Rows must share one length"""
        with pytest.raises(ValueError):
            RationalMatrix([[1, 2], [3]])

    def test_matmul(self):
        """Products stay exact"""
        A = RationalMatrix([[1, 2], [3, 4]])
        B = RationalMatrix([["1/2", 0], [0, "1/4"]])
        assert A @ B == RationalMatrix([["1/2", "1/2"], ["3/2", 1]])

    def test_float_conversion_is_exact(self):
        """0.1 converts to its binary value, not 1/10"""
        M = RationalMatrix.from_numpy(np.array([[0.1]]))
        assert M[0, 0] == Fraction(0.1)
        assert M[0, 0] != Fraction(1, 10)

    def test_text_format(self, tmp_path):
        """Header line, then one p/q row per matrix row"""
        M = RationalMatrix([["-2/3", 1], [0, "5/7"]])
        path = M.write(tmp_path / "m.txt")
        assert path.read_text(encoding='utf-8') == "2 2\n-2/3 1/1\n0/1 5/7\n"
        assert RationalMatrix.read(path) == M

    def test_text_entry_count_checked(self):
        """A short row is rejected"""
        with pytest.raises(ValueError):
            RationalMatrix.from_text("2 2\n1 2 3\n")


class TestExactRank:
    """Test fraction-free elimination rank"""

    def test_proportional_rows(self):
        """Second row is twice the first"""
        assert exact_rank(RationalMatrix([[1, 2], [2, 4]])) == 1

    def test_identity(self):
        """Identity has full rank"""
        assert exact_rank(RationalMatrix.identity(4)) == 4

    def test_rational_entries(self):
        """Rows (1/2, 1/3) and (3, 2) are proportional"""
        assert exact_rank(RationalMatrix([["1/2", "1/3"], [3, 2]])) == 1

    def test_wide_matrix(self):
        """Rank of a wide matrix counts independent rows"""
        assert exact_rank(RationalMatrix([[0, 0, 1], [0, 0, 2]])) == 1

    def test_zero(self):
        """Zero matrix has rank 0"""
        assert exact_rank(RationalMatrix.zeros(3, 2)) == 0

    def test_agrees_with_float_rank_on_integers(self):
        """Integer matrices with a dependent row agree with the SVD rank"""
        from ctrlcore import numerical_rank
        generator = RngStream(5).generator()
        for _ in range(100):
            M = generator.integers(-9, 10, size=(5, 5))
            M[4] = M[0] - M[1]
            assert exact_rank(RationalMatrix.from_numpy(M)) == numerical_rank(M.astype(float)) == 4


class TestExactCtrbRank:
    """Test exact Krylov ranks"""

    def test_manifold_point(self):
        """Point on the uncontrollable set has Krylov rank 1"""
        assert exact_ctrb_rank(*example1_pencil(1, 2, 0, 3, 1, 0)) == 1

    def test_off_manifold_point(self):
        """Point off the uncontrollable set has Krylov rank 2"""
        assert exact_ctrb_rank(*example1_pencil(1, 2, 1, 3, 1, 0)) == 2

    def test_shift_chain(self):
        """Input at the bottom of J3(0) reaches all three states"""
        F = build_jordan(JordanSpec(((0, 3),)))
        assert exact_ctrb_rank(F, RationalMatrix.column([0, 0, 1])) == 3

    def test_row_mismatch(self):
        """G must have as many rows as F"""
        with pytest.raises(ValueError):
            exact_ctrb_rank(RationalMatrix.identity(2), RationalMatrix.column([1, 2, 3]))


class TestExample1Manifold:
    """Test the two-follower uncontrollability polynomial"""

    def test_on_manifold(self):
        """Polynomial vanishes at the uncontrollable point"""
        assert example1_on_manifold(1, 2, 0, 3, 1, 0)

    def test_off_manifold(self):
        """Polynomial is nonzero once a21 = 1"""
        assert not example1_on_manifold(1, 2, 1, 3, 1, 0)

    def test_zero_input_column(self):
        """A zero leader column is always on the set"""
        assert example1_on_manifold(7, -3, "2/5", 11, 0, 0)

    def test_agrees_with_exact_rank_on_rationals(self):
        """Polynomial zero matches rank < 2 at a rational point"""
        point = ("1/2", 3, "-1/3", 2, "2/3", "1/4")
        on_manifold = example1_on_manifold(*point)
        assert on_manifold == (exact_ctrb_rank(*example1_pencil(*point)) < 2)


class TestMinpolyDegree:
    """Test the exact minimal polynomial degree"""

    def test_identity(self):
        """Identity has degree 1"""
        assert exact_minpoly_degree(RationalMatrix.identity(3)) == 1

    def test_mixed_blocks(self):
        """J2(1) + J1(1) + J1(2) has degree 3"""
        assert exact_minpoly_degree(build_jordan(JordanSpec(((1, 2), (1, 1), (2, 1))))) == 3

    def test_nilpotent(self):
        """J4(0) has degree 4"""
        assert exact_minpoly_degree(build_jordan(JordanSpec(((0, 4),)))) == 4

    def test_non_square(self):
        """Rectangular input is rejected"""
        with pytest.raises(ValueError):
            exact_minpoly_degree(RationalMatrix.zeros(2, 3))


class TestJordan:
    """Test Jordan-form constructors"""

    def test_two_blocks(self):
        """J2(5) + J1(5) in block order"""
        assert build_jordan(JordanSpec(((5, 2), (5, 1)))) == RationalMatrix([[5, 1, 0], [0, 5, 0], [0, 0, 5]])

    def test_shift(self):
        """J3(0) is the upper shift"""
        assert build_jordan(JordanSpec(((0, 3),))) == RationalMatrix([[0, 1, 0], [0, 0, 1], [0, 0, 0]])

    def test_scalar(self):
        """A 1 x 1 block is the eigenvalue"""
        assert build_jordan(JordanSpec(((1, 1),))) == RationalMatrix([[1]])

    def test_spec_invariants(self):
        """Size, degree and geometric multiplicity from the block list"""
        spec = JordanSpec(((1, 2), (1, 1), (2, 1)))
        assert spec.n == 4
        assert spec.minpoly_degree() == 3
        assert spec.max_geometric_multiplicity() == 2

    def test_block_size_positive(self):
        """Empty blocks are rejected"""
        with pytest.raises(ValueError):
            JordanSpec(((1, 0),))

    def test_structure_counts(self):
        """Sizes 1, 2 and 3 have 1, 3 and 6 structures"""
        assert len(list(jordan_structures(1))) == 1
        assert len(list(jordan_structures(2))) == 3
        assert len(list(jordan_structures(3))) == 6

    def test_random_spec_size(self):
        """Random structures stay within the size bound"""
        generator = RngStream(9).generator()
        for _ in range(20):
            assert 1 <= random_jordan_spec(generator, 6).n <= 6


class TestBruteForceND:
    """Test the exhaustive minimal-leader search"""

    def test_scalar_matrix_needs_two(self):
        """Identity on two states needs two leaders"""
        assert brute_force_ND(RationalMatrix.identity(2)) == 2

    def test_scalar_matrix_single_column_fails(self):
        """One column never controls a 2 x 2 identity"""
        with pytest.raises(NoControllableInputError):
            brute_force_ND(RationalMatrix.identity(2), max_m=1)

    def test_jordan_block(self):
        """A single chain needs one leader"""
        assert brute_force_ND(build_jordan(JordanSpec(((0, 2),)))) == 1

    def test_grounded_path_laplacian(self):
        """Grounded path Laplacian needs one leader"""
        assert brute_force_ND(RationalMatrix([[1, -1], [-1, 2]])) == 1

    def test_four_copies_exceed_bounds(self):
        """Identity on four states needs more columns than the search allows"""
        with pytest.raises(NoControllableInputError):
            brute_force_ND(RationalMatrix.identity(4))

    def test_bounds_enforced(self):
        """Size and grid bounds are checked up front"""
        with pytest.raises(ValueError):
            brute_force_ND(RationalMatrix.identity(5))
        with pytest.raises(ValueError):
            brute_force_ND(RationalMatrix.identity(2), grid=3)


class TestOracle:
    """Test float and exact agreement"""

    def test_random_grounded_laplacian_is_symmetric(self):
        """Grounded Laplacian of an undirected graph is symmetric with a positive diagonal"""
        F = random_grounded_laplacian(RngStream(3).generator(), 3)
        assert F.shape == (3, 3)
        np.testing.assert_array_equal(F, F.T)
        assert (np.diag(F) > 0).all()

    def test_oracle_agrees_on_shift(self):
        """Hand pencils agree"""
        assert oracle_agrees(np.eye(3, k=1), np.eye(3)[:, 2])
        assert oracle_agrees(np.eye(2), np.ones(2))

    def test_agrees_on_random_rationals(self):
        """Exact and float Krylov dimensions agree on 300 dyadic pencils with n <= 5 and entries <= 10"""
        generator = RngStream(61).generator()
        for trial in range(300):
            n, m = int(generator.integers(1, 6)), int(generator.integers(1, 3))
            F = generator.integers(-10, 11, size=(n, n)) / generator.choice([1, 2, 4], size=(n, n))
            G = generator.integers(-10, 11, size=(n, m)) / generator.choice([1, 2, 4], size=(n, m))
            if trial % 2 and n > 1:
                # block triangular pencil: the lower states are never reached
                split = int(generator.integers(1, n))
                F[split:, :split] = 0.0
                G[split:] = 0.0
            assert oracle_agrees(F, G), (F.tolist(), G.tolist())

    def test_laplacian_needing_two_leaders_is_noted(self):
        """Star grounded at its centre needs two leaders; the case passes and is noted"""
        result = SuiteResult("leaders")
        _check_grounded_laplacian(result, np.eye(2))
        assert result.passed, result.mismatches
        assert result.checked == 1
        assert result.notes == ["laplacian [[1.0, 0.0], [0.0, 1.0]]: needs 2 leaders"]

    def test_unknown_suite(self):
        """Unknown suite names are rejected"""
        with pytest.raises(ValueError):
            run_suite("nope")

    def test_rank_suite(self):
        """500 integer matrices agree on rank"""
        result = run_suite("rank")
        assert result.passed, result.mismatches
        assert result.checked == 500

    def test_jordan_suite(self):
        """100 random Jordan structures agree on the minimal polynomial degree"""
        result = run_suite("jordan")
        assert result.passed, result.mismatches
        assert result.checked == 100

    @pytest.mark.slow
    def test_example1_suite(self):
        """Whole grid {-2..2}^6 agrees with the Krylov rank"""
        result = run_suite("example1")
        assert result.passed, result.mismatches
        assert result.checked == 5**6

    @pytest.mark.slow
    def test_leaders_suite(self):
        """Brute-force leader counts agree; multi-leader Laplacians are noted"""
        result = run_suite("leaders")
        assert result.passed, result.mismatches
