import math

import numpy as np
import pytest

from cspectra import fixlab
from cspectra.bodycalc import BodySpec, body_support, certify
from cspectra.errors import ConvexityError, TrajectoryTruncated
from cspectra.fixlab import (
    IterationConfig, TrajectoryRecord, apply_map, ball_distance, ellipse_distance_2d, iterate,
    normalize, pgc_step_2d, read_trajectory_csv, run_sweep, write_trajectory_csv,
)
from cspectra.grid import ScalarField, build_grid
from cspectra.bodycalc import volume_i
from cspectra.harmonics import HarmonicSpectrum, omega, synthesize
from cspectra.linearized import theta_fixed_radius

SQPI = math.sqrt(math.pi)


@pytest.fixture(scope="module")
def s2():
    return build_grid(3, 24)


@pytest.fixture(scope="module")
def s1():
    return build_grid(2, 48)


def _y(k, l, t=1.0):
    return BodySpec.harmonic_perturbation(1.0, [[k, l, t]])


# --- ball fixed points -----------------------------------------------------

@pytest.mark.parametrize("m", ["pi_sq(1)", "pi_sq(2)", "theta_sq(1)", "theta_sq(2)"])
def test_ball_is_fixed(m):
    recs = iterate(IterationConfig(m, BodySpec.ball(1.0), steps=10, resolution=24))
    assert len(recs) == 10
    assert max(r.c2_proxy for r in recs) <= 1e-8
    assert max(r.l2 for r in recs) <= 1e-8


def test_theta_fixed_radius_ball(s2):
    r = theta_fixed_radius(3, 2)
    f = body_support(BodySpec.ball(r), s2)
    out = apply_map(IterationConfig("theta_sq(2)", BodySpec.ball(r)), f)
    assert np.max(np.abs(out.values - r)) <= 1e-8


# --- energy decay ----------------------------------------------------------

def _ratios(cfg):
    recs = iterate(cfg)
    return recs


def test_y2_decay_under_pi1_sq():
    recs = iterate(IterationConfig("pi_sq(1)", _y(2, 1, 0.01), steps=4, resolution=24))
    for a, b in zip(recs, recs[1:]):
        assert b.e2 / a.e2 == pytest.approx(1 / 16, rel=0.2)


def test_y4_decay_under_pi1_sq():
    recs = iterate(IterationConfig("pi_sq(1)", _y(4, 3, 0.002), steps=3, resolution=24))
    for a, b in zip(recs, recs[1:]):
        assert b.e4 / a.e4 == pytest.approx((3 / 8) ** 4, rel=0.2)


def test_pi2_sq_neutral_on_y2():
    recs = iterate(IterationConfig("pi_sq(2)", _y(2, 2, 0.005), steps=5, resolution=24))
    for a, b in zip(recs, recs[1:]):
        assert b.e2 / a.e2 == pytest.approx(1.0, rel=0.05)


def test_odd_degree_removed_by_pi2(s2):
    cfg = IterationConfig("pi_sq(2)", _y(3, 2, 0.01), resolution=24)
    out = apply_map(cfg, body_support(cfg.body, s2))
    assert np.max(np.abs(out.spectrum.degree(3))) <= 1e-10


# --- distances -------------------------------------------------------------

def test_ball_distance_offset_ball(s2):
    f = body_support(BodySpec.offset_ball(1.3, [0.1, -0.2, 0.05]), s2)
    c2, l2 = ball_distance(f)
    assert c2 <= 1e-10 and l2 <= 1e-10


def test_ball_distance_homogeneity(s2):
    t = 0.004
    one = body_support(BodySpec.harmonic_perturbation(1.0, [[2, 1, t], [4, 4, t]]), s2)
    two = body_support(BodySpec.harmonic_perturbation(1.0, [[2, 1, 2 * t], [4, 4, 2 * t]]), s2)
    assert ball_distance(two)[0] / ball_distance(one)[0] == pytest.approx(2.0, abs=1e-6)
    assert ball_distance(one)[1] == pytest.approx(t * math.sqrt(2), abs=1e-10)
    # dilation leaves the distance unchanged
    big = certify(one.field * 3.0)
    assert ball_distance(big)[1] == pytest.approx(ball_distance(one)[1], rel=1e-12)


def test_ellipse_distance_of_ellipse(s1):
    f = body_support(BodySpec.ellipsoid([1.3, 0.7], rotation=0.4), s1)
    assert ellipse_distance_2d(f) <= 1e-8


def test_ellipse_distance_of_disk(s1):
    assert ellipse_distance_2d(body_support(BodySpec.ball(3.0), s1)) <= 1e-10


def test_ellipse_distance_rotation_invariant(s1):
    a = 0.01 * SQPI  # 0.01 cos(4 theta) in the orthonormal basis
    ref = ellipse_distance_2d(body_support(BodySpec.harmonic_perturbation(1.0, [[4, 1, a]]), s1))
    assert ref > 1e-3
    for alpha in (0.3, 1.1, 2.0):
        terms = [[4, 1, a * math.cos(4 * alpha)], [4, 2, a * math.sin(4 * alpha)]]
        d = ellipse_distance_2d(body_support(BodySpec.harmonic_perturbation(1.0, terms), s1))
        assert d == pytest.approx(ref, abs=1e-10)


def test_ellipse_distance_rejects_asymmetric(s1):
    f = body_support(BodySpec.harmonic_perturbation(1.0, [[3, 1, 0.005]]), s1)
    with pytest.raises(ValueError):
        ellipse_distance_2d(f)


# --- planar map ------------------------------------------------------------

def test_pgc_unit_disk(s1):
    out = pgc_step_2d(body_support(BodySpec.ball(1.0), s1))
    assert np.max(np.abs(out.values - 0.125)) <= 1e-10


def test_pgc_ellipse_stays_ellipse():
    cfg = IterationConfig("pgc_2d", BodySpec.ellipsoid([1.2, 1 / 1.2]), steps=10,
                          normalization="volume", n=2)
    recs = iterate(cfg)
    assert len(recs) == 10
    assert max(r.ellipse_dist for r in recs) <= 1e-6


def test_pgc_random_symmetric_reported():
    cfg = IterationConfig("pgc_2d", BodySpec.random_smooth(5, 10, 0.01, symmetric=True),
                          steps=20, n=2)
    recs = iterate(cfg)
    assert len(recs) == 20
    d = [r.ellipse_dist for r in recs]
    assert all(math.isfinite(x) for x in d)
    assert d[-1] < d[0]


# --- normalization and config ----------------------------------------------

def test_volume_normalization(s2):
    f = body_support(BodySpec.ellipsoid([1.2, 0.9, 1.1]), s2)
    g, lam = normalize(f, "volume")
    assert volume_i(g, 3) == pytest.approx(omega(3), rel=1e-10)
    assert lam == pytest.approx((1.2 * 0.9 * 1.1) ** (-1 / 3), rel=1e-8)


def test_mean_width_normalization_removes_degree1(s2):
    f = body_support(BodySpec.offset_ball(2.0, [0.2, 0.0, 0.1]), s2)
    g, lam = normalize(f, "mean_width")
    assert lam == pytest.approx(0.5, rel=1e-12)
    assert np.max(np.abs(g.spectrum.degree(1))) <= 1e-14
    assert g.spectrum.mean() == pytest.approx(1.0, rel=1e-12)


@pytest.mark.parametrize("kw", [dict(map="pi_sq(3)"), dict(map="foo"), dict(steps=0),
                                dict(normalization="area"), dict(map="pgc_2d"),
                                dict(map="pi_sq(1)", n=2)])
def test_config_validation(kw):
    base = dict(map="pi_sq(1)", body=BodySpec.ball(1.0))
    base.update(kw)
    with pytest.raises(ValueError):
        IterationConfig(**base)


def test_config_roundtrip():
    cfg = IterationConfig("theta_sq(2)", BodySpec.random_smooth(3, 6, 0.02), steps=7)
    back = IterationConfig.from_dict(cfg.to_dict())
    assert back == cfg and back.kind == "theta_sq" and back.i == 2


def test_bad_perturbation_term():
    with pytest.raises(ValueError):
        BodySpec.harmonic_perturbation(1.0, [[2, 0, 0.01]])


def test_record_rejects_nonfinite():
    with pytest.raises(ValueError):
        TrajectoryRecord(1, 1.0, math.nan, 0, 0, 0, 0, 0)


# --- output ----------------------------------------------------------------

def test_csv_roundtrip_and_determinism(tmp_path):
    cfg = IterationConfig("pi_sq(1)", BodySpec.random_smooth(2, 6, 0.02), steps=3,
                          resolution=24)
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    write_trajectory_csv(iterate(cfg), a)
    write_trajectory_csv(iterate(cfg), b)
    assert a.read_bytes() == b.read_bytes()
    rows = read_trajectory_csv(a)
    assert [r["step"] for r in rows] == [1.0, 2.0, 3.0]
    assert a.read_text().splitlines()[0] == "step,scale,c2_proxy,l2,e2,e4,e6,e8"


def test_sweep_thread_invariance(tmp_path):
    cfgs = [IterationConfig("pi_sq(1)", BodySpec.random_smooth(s, 6, 0.02), steps=3,
                            resolution=24) for s in range(3)]
    cfgs.append(IterationConfig("pgc_2d", BodySpec.random_smooth(1, 6, 0.01, True), steps=3,
                                n=2, resolution=32))
    m1 = run_sweep(cfgs, tmp_path / "t1", threads=1)
    m4 = run_sweep(cfgs, tmp_path / "t4", threads=4)
    assert m1 == m4
    for i in range(4):
        name = f"trajectory_{i:03d}.csv"
        assert (tmp_path / "t1" / name).read_bytes() == (tmp_path / "t4" / name).read_bytes()
    assert (tmp_path / "t1" / "manifest.json").read_bytes() == \
        (tmp_path / "t4" / "manifest.json").read_bytes()
    assert "ellipse_dist" in (tmp_path / "t1" / "trajectory_003.csv").read_text()


def test_truncation(monkeypatch, tmp_path):
    real = fixlab.apply_map
    calls = {"n": 0}

    def flaky(cfg, f):
        calls["n"] += 1
        if calls["n"] == 3:
            raise ConvexityError("certificate lost")
        return real(cfg, f)

    monkeypatch.setattr(fixlab, "apply_map", flaky)
    cfg = IterationConfig("pi_sq(1)", BodySpec.ball(1.0), steps=5, resolution=24)
    with pytest.raises(TrajectoryTruncated) as info:
        iterate(cfg)
    assert info.value.step == 3 and len(info.value.records) == 2

    calls["n"] = 0
    man = run_sweep([cfg], tmp_path)
    assert man["runs"][0]["status"] == "truncated" and man["runs"][0]["rows"] == 2
    assert len(read_trajectory_csv(tmp_path / "trajectory_000.csv")) == 2
