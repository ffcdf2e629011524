import io
import json

import numpy as np
import pytest

from privcurve import (
    CoordinateMode,
    LinearMap,
    build_mechanism,
    component_distortions_closed_form,
    respond,
    sample_joint,
    svd_ascending,
)
from privcurve.mechanism import (
    BATCH_MAGIC,
    RNG_ID,
    draw_standard_normals,
    read_batch_binary,
    write_batch_binary,
    write_batch_csv,
)

from conftest import random_map

REDUCED = CoordinateMode.REDUCED
ORIGINAL = CoordinateMode.ORIGINAL


def test_passthrough_parameters(remark_map):
    mech = build_mechanism(remark_map, 0.0)
    np.testing.assert_array_equal(mech.atten.d_a, [1, 1, 1])
    assert mech.is_passthrough


def test_remark_rho7(remark_map):
    mech = build_mechanism(remark_map, 7.0, mode=REDUCED)
    np.testing.assert_allclose(mech.atten.d_a, [0, 2 / 3, 1], atol=1e-12)
    np.testing.assert_allclose(mech.atten.d_no, [0, np.sqrt(2), 0], atol=1e-12)
    np.testing.assert_allclose(component_distortions_closed_form(mech), [4, 3, 0])
    assert mech.out_dim == 3


def test_closed_form_distortions(remark_map):
    assert not np.any(component_distortions_closed_form(build_mechanism(remark_map, 0.0)))
    np.testing.assert_allclose(
        component_distortions_closed_form(build_mechanism(remark_map, 1e9)), [4, 9, 16])


def test_zero_map_outputs_offset():
    lm = LinearMap(np.zeros((2, 3)), np.array([1.5, -2.0]))
    mech = build_mechanism(lm, 3.0)
    assert mech.r == 0
    out = respond(mech, np.array([1.0, 2.0, 3.0]), np.zeros(0))
    np.testing.assert_array_equal(out, [1.5, -2.0])
    batch = sample_joint(mech, 5, seed=1)
    np.testing.assert_array_equal(batch.Z, np.tile([1.5, -2.0], (5, 1)))


def test_passthrough_is_exact(scrambled_remark_map):
    rng = np.random.default_rng(0)
    x, noise = rng.standard_normal(5), rng.standard_normal(3)
    red = build_mechanism(scrambled_remark_map, 0.0, mode=REDUCED)
    svd = svd_ascending(scrambled_remark_map)
    np.testing.assert_array_equal(respond(red, x, noise), svd.reduced_map @ x)
    lm_b = LinearMap(scrambled_remark_map.entries, np.array([1.0, 2.0, 3.0]))
    orig = build_mechanism(lm_b, 0.0, mode=ORIGINAL)
    np.testing.assert_array_equal(respond(orig, x, noise), lm_b.entries @ x + lm_b.b)


def test_saturated_reduced_output_is_zero(scrambled_remark_map):
    mech = build_mechanism(scrambled_remark_map, 29.0 + 1e-9, mode=REDUCED)
    rng = np.random.default_rng(1)
    out = respond(mech, rng.standard_normal(5), rng.standard_normal(3))
    np.testing.assert_array_equal(out, np.zeros(3))


def test_smallest_component_concealed(scrambled_remark_map):
    mech = build_mechanism(scrambled_remark_map, 7.0, mode=REDUCED)
    v1 = mech.svd.V[:, 0]
    out = respond(mech, v1, np.zeros(3))
    assert out[0] == 0.0


def test_respond_dimension_errors(remark_map):
    mech = build_mechanism(remark_map, 1.0)
    with pytest.raises(ValueError, match="x has length"):
        respond(mech, np.zeros(4), np.zeros(3))
    with pytest.raises(ValueError, match="noise has length"):
        respond(mech, np.zeros(5), np.zeros(2))


@pytest.mark.parametrize("seed", range(25))
def test_coordinate_consistency(seed):
    rng = np.random.default_rng(seed)
    lm = random_map(rng, max_dim=10, offset=True)
    svd = svd_ascending(lm)
    rho = rng.uniform(0, 1.2) * np.sum(svd.s_squared)
    red = build_mechanism(lm, rho, mode=REDUCED)
    orig = build_mechanism(lm, rho, mode=ORIGINAL)
    x = rng.standard_normal((4, lm.n))
    noise = rng.standard_normal((4, svd.rank))
    expected = respond(red, x, noise) @ svd.U_tilde.T + lm.b
    np.testing.assert_allclose(respond(orig, x, noise), expected, atol=1e-10)
    # the generic (G, H) form agrees with respond
    G, H = orig.gains()
    np.testing.assert_allclose(x @ G.T + noise @ H.T + lm.b, respond(orig, x, noise), atol=1e-10)


@pytest.mark.parametrize("seed", range(25))
def test_constraints_hold(seed):
    rng = np.random.default_rng(1000 + seed)
    lm = random_map(rng, max_dim=15)
    mech = build_mechanism(lm, rng.uniform(0, 40))
    per = component_distortions_closed_form(mech)
    s2 = mech.svd.s_squared
    assert np.all(per <= s2)
    assert per.sum() == pytest.approx(min(mech.rho, s2.sum()), abs=1e-12 * max(1, s2.sum()))


def test_sampling_is_reproducible(remark_map):
    mech = build_mechanism(remark_map, 7.0)
    a = sample_joint(mech, 1, seed=5)
    b = sample_joint(mech, 1, seed=5)
    np.testing.assert_array_equal(a.X, b.X)
    np.testing.assert_array_equal(a.Z, b.Z)
    assert a.rng_id == RNG_ID and a.count == 1
    c = sample_joint(mech, 1000, seed=5, shards=4)
    d = sample_joint(mech, 1000, seed=5, shards=4)
    np.testing.assert_array_equal(c.Z, d.Z)
    assert not np.array_equal(c.X, sample_joint(mech, 1000, seed=5, shards=1).X)


def test_sampling_errors(remark_map):
    mech = build_mechanism(remark_map, 1.0)
    with pytest.raises(ValueError):
        sample_joint(mech, 0, seed=1)
    with pytest.raises(ValueError):
        sample_joint(mech, 10, seed=-1)
    with pytest.raises(ValueError):
        sample_joint(mech, 10, seed=2 ** 64)
    sample_joint(mech, 2, seed=2 ** 64 - 1)


def test_passthrough_batch(scrambled_remark_map):
    mech = build_mechanism(scrambled_remark_map, 0.0, mode=REDUCED)
    batch = sample_joint(mech, 100, seed=3)
    np.testing.assert_array_equal(batch.Z, batch.X @ mech.svd.reduced_map.T)


def test_standard_normal_draws():
    (X,) = draw_standard_normals(200_000, (4,), seed=9, shards=3)
    se = 1 / np.sqrt(X.shape[0])
    assert np.all(np.abs(X.mean(axis=0)) < 5 * se)
    assert np.all((0.9 < X.var(axis=0)) & (X.var(axis=0) < 1.1))


def test_reduced_component_variances(scrambled_remark_map):
    mech = build_mechanism(scrambled_remark_map, 7.0, mode=REDUCED)
    batch = sample_joint(mech, 200_000, seed=4)
    expected = mech.svd.s_squared - mech.allocation.per_component
    for j in np.flatnonzero(expected > 0):
        z = batch.Z[:, j]
        var = z.var(ddof=1)
        se = np.sqrt(np.var((z - z.mean()) ** 2) / z.size)
        assert abs(var - expected[j]) <= 3 * se


def test_mechanism_json_keys(remark_map):
    doc = build_mechanism(remark_map, 7.0).to_dict()
    assert {"m", "n", "r", "rho", "allocation", "d_a", "d_no", "U_tilde",
            "V_tilde", "b", "mode"} <= set(doc)
    json.dumps(doc)
    assert doc["allocation"] == [4.0, 3.0, 0.0]


def test_batch_csv_and_binary(remark_map):
    mech = build_mechanism(remark_map, 7.0)
    batch = sample_joint(mech, 7, seed=2)
    buf = io.StringIO()
    write_batch_csv(batch, buf)
    lines = buf.getvalue().splitlines()
    assert lines[0] == "x_1,x_2,x_3,x_4,x_5,z_1,z_2,z_3"
    assert len(lines) == 8
    np.testing.assert_array_equal(np.array(lines[1].split(","), dtype=float),
                                  np.concatenate([batch.X[0], batch.Z[0]]))

    raw = io.BytesIO()
    write_batch_binary(batch, raw)
    assert raw.getvalue()[:8] == BATCH_MAGIC
    raw.seek(0)
    X, Z = read_batch_binary(raw)
    np.testing.assert_array_equal(X, batch.X)
    np.testing.assert_array_equal(Z, batch.Z)
