import struct

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from consensus_splitting.compression import (
    CompressionOperator,
    MaskStream,
    Payload,
    apply,
    decode_dense,
    decode_sparse,
    dense_nbytes,
    derive_mask,
    encode_payload,
    sparse_nbytes,
    verify_contract,
)

finite_vec = arrays(
    np.float64,
    st.integers(min_value=1, max_value=32),
    elements=st.floats(min_value=-1e6, max_value=1e6, allow_nan=False),
)


def rand_k(k):
    return CompressionOperator.rand_k(k)


# ------------------------------------------------------------------ operators

def test_operator_tau():
    assert CompressionOperator.identity().tau == 1.0
    assert rand_k(10.0).tau == pytest.approx(0.1)
    assert rand_k(100.0).tau == 1.0


def test_operator_validation():
    with pytest.raises(ValueError, match="kind"):
        CompressionOperator("top-k", 10.0)
    with pytest.raises(ValueError, match="k_percent"):
        rand_k(0.0)
    with pytest.raises(ValueError, match="k_percent"):
        rand_k(101.0)


# --------------------------------------------------------------------- masks

def test_mask_determinism():
    stream = MaskStream(edge_seed=987654321)
    a = derive_mask(stream, 17, 256, 30.0)
    b = derive_mask(stream, 17, 256, 30.0)
    assert np.array_equal(a, b)


def test_mask_full_keep_at_k100():
    stream = MaskStream(edge_seed=5)
    assert derive_mask(stream, 0, 64, 100.0).all()


def test_mask_varies_with_round_and_seed():
    s1, s2 = MaskStream(edge_seed=1), MaskStream(edge_seed=2)
    m0 = derive_mask(s1, 0, 512, 50.0)
    assert not np.array_equal(m0, derive_mask(s1, 1, 512, 50.0))
    assert not np.array_equal(m0, derive_mask(s2, 0, 512, 50.0))


def test_mask_round_counter_offsets_rounds():
    base = MaskStream(edge_seed=77)
    offset = MaskStream(edge_seed=77, round_counter=5)
    assert np.array_equal(derive_mask(base, 7, 128, 40.0),
                          derive_mask(offset, 2, 128, 40.0))


def test_mask_keep_fraction_concentrates():
    # binomial concentration: for p = 0.1 and d = 1e5 the keep fraction
    # stays within six standard deviations of p
    mask = derive_mask(MaskStream(edge_seed=31415), 0, 100_000, 10.0)
    frac = mask.mean()
    assert 0.094 <= frac <= 0.106


# --------------------------------------------------------------------- apply

def test_apply_hadamard_example():
    payload = apply(rand_k(50.0), np.array([1.0, 2.0, 3.0]),
                    np.array([True, False, True]))
    assert not payload.is_dense
    assert payload.indices.tolist() == [0, 2]
    assert payload.values.tolist() == [1.0, 3.0]
    assert np.array_equal(payload.densify(), [1.0, 0.0, 3.0])


def test_apply_identity_returns_dense():
    x = np.array([1.0, -2.0])
    payload = apply(CompressionOperator.identity(), x, None)
    assert payload.is_dense
    assert np.array_equal(payload.values, x)


def test_apply_dimension_mismatch():
    with pytest.raises(ValueError, match="mask shape"):
        apply(rand_k(50.0), np.zeros(3), np.array([True, False]))


def test_apply_keeps_explicit_zeros():
    # a zero value at a kept coordinate stays listed, so the receiver can
    # recover the mask from the payload indices
    payload = apply(rand_k(50.0), np.array([0.0, 5.0]), np.array([True, True]))
    assert payload.indices.tolist() == [0, 1]


@settings(max_examples=200, deadline=None)
@given(x=finite_vec, data=st.data())
def test_linearity_bit_exact(x, data):
    y = data.draw(arrays(np.float64, x.shape,
                         elements=st.floats(-1e6, 1e6, allow_nan=False)))
    mask = data.draw(arrays(np.bool_, x.shape))
    op = rand_k(37.0)
    lhs = apply(op, x + y, mask).densify()
    rhs = apply(op, x, mask).densify() + apply(op, y, mask).densify()
    assert np.array_equal(lhs, rhs)


@settings(max_examples=200, deadline=None)
@given(x=finite_vec, data=st.data())
def test_oddness_bit_exact(x, data):
    mask = data.draw(arrays(np.bool_, x.shape))
    op = rand_k(37.0)
    lhs = apply(op, -x, mask).densify()
    rhs = -apply(op, x, mask).densify()
    assert np.array_equal(lhs, rhs)


def test_zero_maps_to_zero():
    for op in (CompressionOperator.identity(), rand_k(30.0)):
        mask = derive_mask(MaskStream(3), 0, 16, 30.0)
        out = apply(op, np.zeros(16), mask).densify()
        assert np.array_equal(out, np.zeros(16))


# --------------------------------------------------------------- contract

def test_verify_contract_identity_exact():
    assert verify_contract(CompressionOperator.identity(), 50, 1000, seed=0) == 1.0


def test_verify_contract_rand10():
    tau = verify_contract(rand_k(10.0), d=1000, n_samples=10_000, seed=1)
    assert 0.09 <= tau <= 0.11


def test_verify_contract_rand100_exact():
    assert verify_contract(rand_k(100.0), 100, 1000, seed=2) == 1.0


def test_verify_contract_needs_samples():
    with pytest.raises(ValueError, match="1000"):
        verify_contract(rand_k(10.0), 10, 999, seed=0)


# --------------------------------------------------------------- wire format

def test_dense_roundtrip():
    values = np.array([1.5, -2.25, 0.0, 1e-300])
    data = encode_payload(Payload(dim=4, values=values))
    assert len(data) == dense_nbytes(4) == 36
    back = decode_dense(data, 4)
    assert np.array_equal(back.values, values)


def test_sparse_roundtrip():
    payload = Payload(dim=10, values=np.array([3.5, -1.0]),
                      indices=np.array([2, 7], dtype=np.uint32))
    data = encode_payload(payload)
    assert len(data) == sparse_nbytes(2) == 28
    back = decode_sparse(data, 10)
    assert back.indices.tolist() == [2, 7]
    assert np.array_equal(back.values, payload.values)


def test_wire_layout_golden_bytes():
    dense = encode_payload(Payload(dim=1, values=np.array([1.0])))
    assert dense == struct.pack("<I", 1) + struct.pack("<d", 1.0)
    sparse = encode_payload(Payload(dim=8, values=np.array([-2.25]),
                                    indices=np.array([5], dtype=np.uint32)))
    assert sparse == struct.pack("<I", 1) + struct.pack("<I", 5) + struct.pack("<d", -2.25)


def test_decode_rejects_corrupt_payloads():
    with pytest.raises(ValueError, match="count"):
        decode_dense(b"\x01", 1)
    good = encode_payload(Payload(dim=2, values=np.array([1.0, 2.0])))
    with pytest.raises(ValueError, match="expected"):
        decode_dense(good, 3)
    with pytest.raises(ValueError, match="bytes"):
        decode_dense(good[:-1], 2)
    sp = encode_payload(Payload(dim=4, values=np.array([1.0]),
                                indices=np.array([9], dtype=np.uint32)))
    with pytest.raises(ValueError, match="out of range"):
        decode_sparse(sp, 4)


def test_payload_nbytes_matches_encoding():
    dense = Payload(dim=7, values=np.zeros(7))
    assert dense.nbytes == len(encode_payload(dense))
    sparse = Payload(dim=7, values=np.zeros(3), indices=np.arange(3, dtype=np.uint32))
    assert sparse.nbytes == len(encode_payload(sparse))
