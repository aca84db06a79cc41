import csv
import struct

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from ssc.io import (
    CONFIG_SCHEMA,
    ConfigError,
    MatrixFormatError,
    load_config,
    parse_config,
    read_codes,
    read_matrix,
    write_codes,
    write_config,
    write_matrix,
    write_table,
)

any_finite = st.floats(allow_nan=False, allow_infinity=False)
shapes = st.tuples(st.integers(1, 6), st.integers(1, 6))


# -- dense matrices ----------------------------------------------------------

def test_csv_hand_example(tmp_path):
    p = tmp_path / "m.csv"
    p.write_text("1,2\n3,4\n")
    assert np.array_equal(read_matrix(p), [[1.0, 2.0], [3.0, 4.0]])


def test_csv_ragged_names_line(tmp_path):
    p = tmp_path / "m.csv"
    p.write_text("1,2\n3\n")
    with pytest.raises(MatrixFormatError, match="line 2"):
        read_matrix(p)


@pytest.mark.parametrize("text,msg", [("1,nan\n", "non-finite"), ("1,x\n", "line 1"), ("\n", "empty")])
def test_csv_rejects_bad_cells(tmp_path, text, msg):
    p = tmp_path / "m.csv"
    p.write_text(text)
    with pytest.raises(MatrixFormatError, match=msg):
        read_matrix(p)


def test_bin_layout_is_column_major(tmp_path):
    p = tmp_path / "m.bin"
    write_matrix(np.array([[1.0, 2.0], [3.0, 4.0]]), p)
    raw = p.read_bytes()
    assert raw[:4] == b"SSCM"
    assert struct.unpack_from("<III", raw, 4) == (1, 2, 2)
    assert struct.unpack_from("<4d", raw, 16) == (1.0, 3.0, 2.0, 4.0)


def test_bin_bad_magic_and_size(tmp_path):
    p = tmp_path / "m.bin"
    write_matrix(np.eye(2), p)
    raw = bytearray(p.read_bytes())
    bad = tmp_path / "bad.bin"
    bad.write_bytes(b"XXXX" + bytes(raw[4:]))
    with pytest.raises(MatrixFormatError, match="bad magic"):
        read_matrix(bad)
    bad.write_bytes(bytes(raw[:-8]))
    with pytest.raises(MatrixFormatError, match="payload"):
        read_matrix(bad)
    bad.write_bytes(b"SS")
    with pytest.raises(MatrixFormatError, match="shorter"):
        read_matrix(bad)


def test_unknown_extension(tmp_path):
    with pytest.raises(MatrixFormatError, match="cannot infer"):
        write_matrix(np.eye(2), tmp_path / "m.dat")
    write_matrix(np.eye(2), tmp_path / "m.dat", fmt="bin")
    assert np.array_equal(read_matrix(tmp_path / "m.dat", fmt="bin"), np.eye(2))


@given(shapes.flatmap(lambda s: arrays(np.float64, s, elements=any_finite)))
def test_bin_roundtrip_bitwise(tmp_path_factory, M):
    p = tmp_path_factory.mktemp("bin") / "m.bin"
    write_matrix(M, p)
    back = read_matrix(p)
    assert back.shape == M.shape
    assert back.tobytes() == M.astype("<f8").tobytes()


@given(shapes.flatmap(lambda s: arrays(np.float64, s, elements=any_finite)))
def test_csv_roundtrip_exact(tmp_path_factory, M):
    p = tmp_path_factory.mktemp("csv") / "m.csv"
    write_matrix(M, p)
    assert np.array_equal(read_matrix(p), M)


# -- sparse codes ------------------------------------------------------------

def test_codes_hand_layout(tmp_path):
    B = np.array([[0.0, 2.5], [1.0, 0.0], [0.0, 0.0]])
    p = tmp_path / "b.codes"
    write_codes(B, p)
    raw = p.read_bytes()
    assert struct.unpack_from("<II", raw) == (3, 2)
    assert struct.unpack_from("<I", raw, 8) == (1,)
    assert struct.unpack_from("<Id", raw, 12) == (1, 1.0)
    assert len(raw) == 8 + 2 * (4 + 12)
    assert np.array_equal(read_codes(p), B)


def test_codes_corruption(tmp_path):
    p = tmp_path / "b.codes"
    write_codes(np.eye(3), p)
    raw = p.read_bytes()
    (tmp_path / "t.codes").write_bytes(raw[:-3])
    with pytest.raises(MatrixFormatError):
        read_codes(tmp_path / "t.codes")
    (tmp_path / "x.codes").write_bytes(raw + b"\0")
    with pytest.raises(MatrixFormatError, match="trailing"):
        read_codes(tmp_path / "x.codes")
    bad = bytearray(raw)
    struct.pack_into("<I", bad, 12, 7)
    (tmp_path / "i.codes").write_bytes(bytes(bad))
    with pytest.raises(MatrixFormatError, match="index"):
        read_codes(tmp_path / "i.codes")


@given(
    shapes.flatmap(
        lambda s: arrays(np.float64, s, elements=st.one_of(st.just(0.0), st.floats(-1e6, 1e6, allow_nan=False)))
    )
)
def test_codes_roundtrip(tmp_path_factory, B):
    p = tmp_path_factory.mktemp("codes") / "b.codes"
    write_codes(B, p)
    back = read_codes(p)
    assert back.shape == B.shape
    assert np.array_equal(back, B)


# -- configs -----------------------------------------------------------------

def test_config_defaults_applied():
    cfg = parse_config({"K": 8, "lambda": 2.0, "data": "x.csv"})
    assert cfg["coder"] == "marginal" and cfg["kernel.family"] == "tricube"
    tc = cfg.train_config()
    assert tc.K == 8 and tc.lam == 2.0


def test_config_unknown_key_suggests():
    with pytest.raises(ConfigError, match="did you mean 'lambda'"):
        parse_config({"K": 8, "lamda": 2.0, "data": "x"})


def test_config_missing_and_invalid():
    with pytest.raises(ConfigError, match="missing"):
        parse_config({"K": 8})
    with pytest.raises(ConfigError, match="invalid"):
        parse_config({"K": 8, "lambda": -1.0, "data": "x"})


def test_config_nested_equals_dotted():
    a = parse_config({"K": 2, "lambda": 1.0, "data": "x", "kernel": {"h1": 3.0}})
    b = parse_config({"K": 2, "lambda": 1.0, "data": "x", "kernel.h1": 3.0})
    assert a.values == b.values


def test_config_full_roundtrip(tmp_path):
    p = tmp_path / "run.toml"
    p.write_text(
        'K = 16\nlambda = 3.5\ndata = "X.csv"\ncoder = "lasso"\n'
        '[kernel]\nfamily = "gaussian"\nh1 = 0.5\nh2 = 2.0\n'
        '[bench]\nK_values = [32, 64]\n'
    )
    cfg = load_config(p)
    assert cfg.resolve("data") == str(tmp_path / "X.csv")
    assert cfg.kernel_spec().temporal.bandwidth == 2.0
    out = tmp_path / "again.toml"
    write_config(cfg, out)
    again = load_config(out)
    assert again.values == cfg.values


def test_config_bad_toml(tmp_path):
    p = tmp_path / "bad.toml"
    p.write_text("K = = 3")
    with pytest.raises(ConfigError):
        load_config(p)


@given(
    st.integers(1, 512),
    st.floats(0.01, 1e3),
    st.sampled_from(["marginal", "lasso"]),
    st.sampled_from(["tricube", "gaussian", "uniform", "triangular"]),
    st.floats(1e-3, 1e3),
)
def test_config_roundtrip_property(tmp_path_factory, K, lam, coder, family, h1):
    cfg = parse_config({"K": K, "lambda": lam, "data": "d.csv", "coder": coder, "kernel": {"family": family, "h1": h1}})
    p = tmp_path_factory.mktemp("cfg") / "c.toml"
    write_config(cfg, p)
    back = load_config(p)
    assert back.values == cfg.values


def test_schema_has_required_keys():
    assert {"K", "lambda", "data", "kernel.h1", "bench.K_values"} <= set(CONFIG_SCHEMA)


# -- tables ------------------------------------------------------------------

def test_write_table(tmp_path):
    p = tmp_path / "t.csv"
    write_table([{"a": 1, "b": 0.1, "c": True}, {"a": 2, "c": False}], p)
    rows = list(csv.reader(open(p)))
    assert rows == [["a", "b", "c"], ["1", "0.1", "1"], ["2", "", "0"]]
