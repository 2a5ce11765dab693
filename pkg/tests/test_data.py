"""Tests for synthetic instance generation and file formats."""

import numpy as np
import pytest

from lowrankmf import InvalidParameterError
from lowrankmf.data import (
    ParseError,
    add_noise_snr,
    gen_lowrank,
    read_coordinate,
    read_matrix,
    read_movielens,
    sample_mask,
    write_mask_coordinate,
    write_matrix,
)

# --------------------------------------------------------------- generators


def test_gen_lowrank_rank_one_minors_vanish():
    x = gen_lowrank(2, 2, 1, "gaussian", 0)
    assert abs(x[0, 0] * x[1, 1] - x[0, 1] * x[1, 0]) < 1e-14


def test_gen_lowrank_deterministic():
    a = gen_lowrank(10, 8, 3, "uniform01", 5)
    b = gen_lowrank(10, 8, 3, "uniform01", 5)
    assert np.array_equal(a, b)
    c = gen_lowrank(10, 8, 3, "uniform01", 6)
    assert not np.array_equal(a, c)


def test_gen_lowrank_singular_values():
    x = gen_lowrank(50, 50, 5, "gaussian", 1)
    s = np.linalg.svd(x, compute_uv=False)
    assert s[4] > 1e-8
    assert s[5] < 1e-10 * s[0]


def test_gen_lowrank_uniform_nonnegative():
    x = gen_lowrank(20, 20, 4, "uniform01", 2)
    assert np.all(x >= 0)


def test_gen_lowrank_validation():
    with pytest.raises(InvalidParameterError):
        gen_lowrank(5, 5, 6, "gaussian", 0)
    with pytest.raises(InvalidParameterError):
        gen_lowrank(5, 5, 0, "gaussian", 0)
    with pytest.raises(InvalidParameterError):
        gen_lowrank(5, 5, 2, "cauchy", 0)


def test_add_noise_infinite_snr_exact_copy():
    x0 = gen_lowrank(6, 6, 2, "gaussian", 3)
    y = add_noise_snr(x0, float("inf"), 4)
    assert np.array_equal(y, x0)
    assert y is not x0


def test_add_noise_deterministic():
    x0 = gen_lowrank(6, 6, 2, "gaussian", 5)
    assert np.array_equal(add_noise_snr(x0, 10.0, 6), add_noise_snr(x0, 10.0, 6))


def test_add_noise_realized_snr():
    x0 = gen_lowrank(200, 200, 5, "gaussian", 7)
    y = add_noise_snr(x0, 20.0, 8)
    noise = y - x0
    realized = 10.0 * np.log10(np.sum(x0 * x0) / np.sum(noise * noise))
    assert abs(realized - 20.0) < 0.5


def test_sample_mask_full():
    mask = sample_mask(3, 4, 12, 0)
    assert mask.card == 12
    assert np.all(mask.to_dense_bool())


def test_sample_mask_single_entry():
    mask = sample_mask(5, 5, 1, 1)
    assert mask.card == 1
    assert mask.to_dense_bool().sum() == 1


def test_sample_mask_cardinality_and_distinctness():
    mask = sample_mask(30, 20, 240, 2)  # freedom-ratio style cardinality
    assert mask.card == 240
    flat = mask.row_idx * 20 + mask.col_idx
    assert len(set(flat.tolist())) == 240


def test_sample_mask_validation():
    with pytest.raises(InvalidParameterError):
        sample_mask(3, 3, 0, 0)
    with pytest.raises(InvalidParameterError):
        sample_mask(3, 3, 10, 0)


# ---------------------------------------------------------------- movielens


def test_read_movielens_two_lines(tmp_path):
    p = tmp_path / "u.data"
    p.write_text("1\t2\t3\t881250949\n2\t1\t5\t891717742\n")
    data = read_movielens(p)
    assert data.mask.card == 2
    assert data.duplicates == 0
    assert data.y[0, 1] == 3.0
    assert data.y[1, 0] == 5.0
    assert data.y.shape == (2, 2)


def test_read_movielens_duplicates_last_wins(tmp_path):
    p = tmp_path / "u.data"
    p.write_text("1\t1\t2\t0\n1\t1\t4\t1\n")
    data = read_movielens(p)
    assert data.duplicates == 1
    assert data.mask.card == 1
    assert data.y[0, 0] == 4.0


def test_read_movielens_empty_is_parse_error(tmp_path):
    p = tmp_path / "u.data"
    p.write_text("")
    with pytest.raises(ParseError):
        read_movielens(p)


def test_read_movielens_bad_rows(tmp_path):
    for body in ("1\t2\t3\n", "1\t2\tx\t0\n", "1\t2\t9\t0\n", "0\t2\t3\t0\n"):
        p = tmp_path / "u.data"
        p.write_text(body)
        with pytest.raises(ParseError):
            read_movielens(p)


# ---------------------------------------------------------------- matrix IO


@pytest.mark.parametrize("fmt", ["mm", "csv"])
def test_matrix_roundtrip(tmp_path, fmt):
    rng = np.random.default_rng(10)
    a = rng.standard_normal((7, 5)) * np.exp(rng.standard_normal((7, 5)) * 3)
    p = tmp_path / f"a.{fmt}"
    write_matrix(p, a, fmt)
    b = read_matrix(p, fmt)
    assert b.shape == a.shape
    assert np.max(np.abs(a - b)) < 1e-15 * np.max(np.abs(a))


def test_array_format_identity_example(tmp_path):
    p = tmp_path / "id.mtx"
    p.write_text(
        "%%MatrixMarket matrix array real general\n2 2\n1\n0\n0\n1\n"
    )
    a = read_matrix(p, "mm")
    assert np.array_equal(a, np.eye(2))


def test_array_format_column_major(tmp_path):
    p = tmp_path / "cm.mtx"
    p.write_text(
        "%%MatrixMarket matrix array real general\n2 3\n1\n2\n3\n4\n5\n6\n"
    )
    a = read_matrix(p, "mm")
    assert np.array_equal(a, np.array([[1.0, 3.0, 5.0], [2.0, 4.0, 6.0]]))


def test_coordinate_roundtrip(tmp_path):
    rng = np.random.default_rng(11)
    y = rng.standard_normal((6, 5))
    mask = sample_mask(6, 5, 12, 12)
    p = tmp_path / "m.mtx"
    write_mask_coordinate(p, y, mask)
    y2, mask2 = read_coordinate(p)
    assert np.array_equal(mask.row_idx, mask2.row_idx)
    assert np.array_equal(mask.col_idx, mask2.col_idx)
    obs = mask.to_dense_bool()
    assert np.max(np.abs(y2[obs] - y[obs])) < 1e-15
    assert np.all(y2[~obs] == 0.0)


def test_coordinate_out_of_bounds_entry(tmp_path):
    p = tmp_path / "bad.mtx"
    p.write_text(
        "%%MatrixMarket matrix coordinate real general\n2 2 1\n3 1 1.0\n"
    )
    with pytest.raises(ParseError):
        read_matrix(p, "mm")


def test_mm_header_errors(tmp_path):
    p = tmp_path / "bad.mtx"
    p.write_text("%%MatrixMarket matrix coordinate complex general\n1 1 1\n1 1 1\n")
    with pytest.raises(ParseError):
        read_matrix(p, "mm")
    p.write_text("")
    with pytest.raises(ParseError):
        read_matrix(p, "mm")


def test_mm_token_errors(tmp_path):
    p = tmp_path / "bad.mtx"
    p.write_text("%%MatrixMarket matrix array real general\n2 2\n1\nx\n0\n1\n")
    with pytest.raises(ParseError):
        read_matrix(p, "mm")
    p.write_text("%%MatrixMarket matrix array real general\n2 2\n1\n0\n1\n")
    with pytest.raises(ParseError):
        read_matrix(p, "mm")


def test_mm_comments_skipped(tmp_path):
    p = tmp_path / "c.mtx"
    p.write_text(
        "%%MatrixMarket matrix array real general\n% a comment\n1 1\n7.5\n"
    )
    a = read_matrix(p, "mm")
    assert a[0, 0] == 7.5


def test_csv_ragged_row(tmp_path):
    p = tmp_path / "r.csv"
    p.write_text("1,2,3\n4,5\n")
    with pytest.raises(ParseError):
        read_matrix(p, "csv")


def test_read_matrix_rejects_nonfinite(tmp_path):
    p = tmp_path / "n.csv"
    p.write_text("1,nan\n2,3\n")
    with pytest.raises(ParseError):
        read_matrix(p, "csv")


def test_unknown_format():
    with pytest.raises(InvalidParameterError):
        read_matrix("whatever", "hdf5")
