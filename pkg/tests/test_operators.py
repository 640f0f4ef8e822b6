"""Kernel operator, sparse positive operator, maximal function,
pointwise domination."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bergtents.errors import DomainKindUnsupported
from bergtents.geometry import ModelDomain, sample
from bergtents.operators import (
    KernelOperator,
    apply_Q_sparse,
    bergman_kernel,
    check_domination,
    kernel_block,
    kernel_factor,
    maximal,
)
from bergtents.weights import make_pair, one_weight


def _series_disc(z, w, deg):
    t = z * np.conj(w)
    k = np.arange(deg + 1)
    return (1.0 / math.pi) * np.sum((k + 1) * t ** k)


def _series_ball2(z, w, deg):
    t = np.sum(z * np.conj(w))
    k = np.arange(deg + 1)
    coef = (k + 1) * (k + 2) / 2.0
    return (2.0 / math.pi ** 2) * np.sum(coef * t ** k)


def test_kernel_series_oracle_disc(ball1):
    rng = np.random.default_rng(12)
    for _ in range(20):
        z = 0.7 * rng.uniform(0, 1) * np.exp(2j * np.pi * rng.uniform())
        w = 0.7 * rng.uniform(0, 1) * np.exp(2j * np.pi * rng.uniform())
        got = bergman_kernel(ball1, z, w)
        assert got == pytest.approx(_series_disc(z, w, 60), abs=1e-8)


def test_kernel_series_oracle_ball2(ball2):
    rng = np.random.default_rng(13)
    for _ in range(20):
        z = rng.normal(size=2) + 1j * rng.normal(size=2)
        z *= 0.7 * rng.uniform() / np.linalg.norm(z)
        w = rng.normal(size=2) + 1j * rng.normal(size=2)
        w *= 0.7 * rng.uniform() / np.linalg.norm(w)
        got = bergman_kernel(ball2, z, w)
        assert got == pytest.approx(_series_ball2(z, w, 60), abs=1e-8)


def test_kernel_at_center_inverts_volume(ball1, ball2):
    for dom in (ball1, ball2):
        k0 = bergman_kernel(dom, np.zeros(dom.n), np.zeros(dom.n))
        assert k0 == pytest.approx(
            math.factorial(dom.n) / math.pi ** dom.n, rel=1e-15)
        assert abs(k0) * dom.volume == pytest.approx(1.0, rel=1e-12)


def test_kernel_requires_ball(egg2, cloud_egg2):
    with pytest.raises(DomainKindUnsupported):
        bergman_kernel(egg2, np.zeros(2), np.zeros(2))
    with pytest.raises(DomainKindUnsupported):
        KernelOperator(cloud_egg2)


def test_reproduces_constants(op_ball1, cloud_ball1):
    w = cloud_ball1.interior_weights
    err = np.abs(op_ball1.apply(np.ones(cloud_ball1.n_interior)) - 1.0)
    assert np.sqrt(np.sum(err ** 2 * w) / w.sum()) < 0.015
    assert err.max() < 0.10


def test_kills_antiholomorphic(op_ball1, cloud_ball1):
    w = cloud_ball1.interior_weights
    zb = np.conj(cloud_ball1.interior[:, 0])
    num = np.sqrt(np.sum(np.abs(op_ball1.apply(zb)) ** 2 * w))
    den = np.sqrt(np.sum(np.abs(zb) ** 2 * w))
    assert num / den < 0.05


def test_near_idempotent(op_ball1, cloud_ball1):
    w = cloud_ball1.interior_weights
    f = np.exp(-np.abs(cloud_ball1.interior[:, 0]) ** 2)
    pf = op_ball1.apply(f)
    ppf = op_ball1.apply(pf)
    rel = (np.sqrt(np.sum(np.abs(ppf - pf) ** 2 * w))
           / np.sqrt(np.sum(np.abs(pf) ** 2 * w)))
    assert rel < 0.02


def test_hermitian_defect_zero(op_ball1):
    assert op_ball1.hermitian_defect() <= 1e-10


@given(seed=st.integers(0, 10_000))
@settings(max_examples=15, deadline=None)
def test_positive_majorant(op_ball1, cloud_ball1, seed):
    rng = np.random.default_rng(seed)
    f = rng.standard_normal(cloud_ball1.n_interior)
    lhs = np.abs(op_ball1.apply(f))
    rhs = op_ball1.apply_abs(np.abs(f))
    assert (lhs <= rhs * (1 + 1e-12) + 1e-12).all()


def test_stream_matches_dense(ball1):
    cloud = sample(ball1, 400, 200, seed=5)
    dense = KernelOperator(cloud)
    stream = KernelOperator(cloud, max_dense=0)
    assert stream._K is None
    rng = np.random.default_rng(3)
    f = rng.standard_normal(cloud.n_interior)
    assert np.allclose(stream.apply(f), dense.apply(f), rtol=1e-13, atol=0)
    assert np.allclose(stream.apply_abs(np.abs(f)),
                       dense.apply_abs(np.abs(f)), rtol=1e-13, atol=0)
    assert KernelOperator(cloud, threads=None).threads == 1
    assert KernelOperator(cloud, threads=4).threads == 4


def test_dump_load_roundtrip(ball1, tmp_path):
    cloud = sample(ball1, 120, 80, seed=7)
    op = KernelOperator(cloud)
    path = tmp_path / "kernel.bin"
    op.dump(str(path))
    with open(path, "rb") as fh:
        assert fh.read(8) == b"BTKERN01"
    back = KernelOperator.load_matrix(str(path))
    assert np.array_equal(back, op._K)
    bad = tmp_path / "bad.bin"
    bad.write_bytes(b"NOTMAGIC" + b"\x00" * 16)
    with pytest.raises(ValueError):
        KernelOperator.load_matrix(str(bad))


def test_sparse_count_identity(cloud_ball1, tents_ball1):
    pair = make_pair(one_weight(cloud_ball1), 2.0)
    one = np.ones(cloud_ball1.n_interior)
    q1 = apply_Q_sparse(cloud_ball1, pair, one, tents_ball1)
    count = np.zeros(cloud_ball1.n_interior)
    for ts in tents_ball1:
        count += (ts.tent_ids >= 0).sum(axis=0)
    assert q1 == pytest.approx(1.0 + count, rel=1e-12)
    q0 = apply_Q_sparse(cloud_ball1, pair, one, tents_ball1,
                        include_global=False)
    assert q0 == pytest.approx(count, rel=1e-12, abs=1e-12)


@given(seed=st.integers(0, 10_000))
@settings(max_examples=10, deadline=None)
def test_sparse_monotone(cloud_ball1, tents_ball1, seed):
    rng = np.random.default_rng(seed)
    pair = make_pair(one_weight(cloud_ball1), 2.0)
    f = rng.uniform(0, 1, cloud_ball1.n_interior)
    g = f + rng.uniform(0, 1, cloud_ball1.n_interior)
    qf = apply_Q_sparse(cloud_ball1, pair, f, tents_ball1)
    qg = apply_Q_sparse(cloud_ball1, pair, g, tents_ball1)
    assert (qf <= qg * (1 + 1e-12) + 1e-12).all()


def test_maximal_basic_identities(cloud_ball1, tents_ball1):
    ts = tents_ball1[0]
    one = one_weight(cloud_ball1)
    rng = np.random.default_rng(9)
    f = rng.standard_normal(cloud_ball1.n_interior)
    g = rng.standard_normal(cloud_ball1.n_interior)
    mf = maximal(cloud_ball1, ts, one, f)
    # homogeneous and sublinear
    assert maximal(cloud_ball1, ts, one, -2.5 * f) == pytest.approx(
        2.5 * mf, rel=1e-12)
    mg = maximal(cloud_ball1, ts, one, g)
    mfg = maximal(cloud_ball1, ts, one, f + g)
    assert (mfg <= mf + mg + 1e-12).all()
    # the constant averages to itself on the tent union, zero off it
    m1 = maximal(cloud_ball1, ts, one, np.ones_like(f))
    in_union = ts.tent_ids[0] >= 0
    assert m1[in_union] == pytest.approx(1.0, rel=1e-12)
    assert (m1[~in_union] == 0.0).all()


def test_domination_report_sane(cloud_ball1, tents_ball1):
    rep = check_domination(cloud_ball1, tents_ball1, n_pairs=2000, seed=5)
    assert rep.n_pairs == 2000
    assert np.isfinite(rep.max_ratio) and rep.max_ratio > 0
    assert rep.mean_ratio <= rep.q99 <= rep.max_ratio
    assert 0.0 <= rep.share_global_only <= 1.0
    assert rep.constant() == rep.max_ratio
