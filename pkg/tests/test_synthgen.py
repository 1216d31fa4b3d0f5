import numpy as np
import pytest

from trip import SceneConfig, generate_scene, render_measurements
from trip.synthgen import InfeasibleConfigError, clean_witness_ok, rng_stream

CONFIGS = [
    dict(geometry=geo, model=model, q=q, seed=seed, n=n)
    for geo in ("grid", "torus") for model in ("uniform", "clustered")
    for q in (0.0, 0.2, 0.4) for seed in (0, 1) for n in (30, 100)
    if not (model == "clustered" and n == 30 and q == 0.4)
]


def test_grid_3x3():
    sc = generate_scene(SceneConfig(geometry="grid", n=9, k_good=3))
    np.testing.assert_array_equal(sc.locations[:, :2],
                                  [[i % 3, i // 3] for i in range(9)])
    assert not sc.corrupt.any()
    assert clean_witness_ok(sc)


@pytest.mark.invariant
@pytest.mark.parametrize("kw", CONFIGS)
def test_scene_invariants(kw):
    sc = generate_scene(SceneConfig(**kw))
    assert clean_witness_ok(sc)
    E = len(sc.edges)
    assert abs(sc.corrupt.sum() - kw["q"] * E) <= 1
    assert np.all(sc.edges[:, 0] < sc.edges[:, 1])
    keys = sc.edges[:, 0] * sc.n + sc.edges[:, 1]
    assert np.all(np.diff(keys) > 0)
    np.testing.assert_allclose(np.linalg.norm(sc.dirs, axis=1), 1, atol=1e-12)
    np.testing.assert_allclose(sc.dirs[sc.corrupt, 2], 0, atol=0)
    np.testing.assert_allclose(sc.dirs[~sc.corrupt], sc.true_directions()[~sc.corrupt], atol=1e-15)
    if kw["model"] == "clustered" and kw["q"] > 0:
        assert np.isin(sc.edges[sc.corrupt], sc.bad_nodes).any(axis=1).all()


@pytest.mark.invariant
def test_deterministic():
    cfg = SceneConfig(geometry="torus", n=80, q=0.3, sigma=0.01, seed=11)
    a, b = generate_scene(cfg), generate_scene(cfg)
    for f in ("locations", "edges", "corrupt", "dirs", "latent"):
        assert getattr(a, f).tobytes() == getattr(b, f).tobytes()
    c = generate_scene(SceneConfig(geometry="torus", n=80, q=0.3, sigma=0.01, seed=12))
    assert not np.array_equal(a.locations, c.locations)


def test_torus_and_grid_geometry():
    t = generate_scene(SceneConfig(geometry="torus", n=200))
    x = t.locations
    rho = np.hypot(x[:, 0], x[:, 1])
    np.testing.assert_allclose((rho - 2.0) ** 2 + x[:, 2] ** 2, 0.25, atol=1e-12)
    g = generate_scene(SceneConfig(geometry="grid", n=200))
    assert np.abs(g.locations[:, 2]).max() <= 0.05


def test_streams_independent():
    a = rng_stream(5, "scene").random(4)
    b = rng_stream(5, "noise").random(4)
    assert not np.allclose(a, b)
    np.testing.assert_array_equal(a, rng_stream(5, "scene").random(4))


def test_noise_median_angle_monte_carlo():
    sigma = 0.01
    sc = generate_scene(SceneConfig(geometry="grid", n=2500, sigma=sigma, seed=3))
    d = sc.true_directions()
    ang = np.arccos(np.clip(np.sum(sc.dirs * d, axis=1), -1, 1))
    # oracle: the same perturbation built from an unrelated generator
    rng = np.random.default_rng(123)
    dstar = rng.standard_normal((100_000, 3))
    dstar /= np.linalg.norm(dstar, axis=1, keepdims=True)
    tmp = rng.standard_normal((len(dstar), 3))
    u = np.cross(dstar, tmp)
    u /= np.linalg.norm(u, axis=1, keepdims=True)
    v = np.cross(dstar, u)
    eps = rng.standard_normal((len(dstar), 2))
    p = dstar + sigma * (eps[:, :1] * u + eps[:, 1:] * v)
    p /= np.linalg.norm(p, axis=1, keepdims=True)
    mc = np.arccos(np.clip(np.sum(p * dstar, axis=1), -1, 1))
    assert np.median(ang) == pytest.approx(np.median(mc), rel=0.05)
    assert np.median(mc) == pytest.approx(sigma * np.sqrt(2 * np.log(2)), rel=0.02)


def test_noise_grows_with_sigma():
    med = []
    for s in (0.0, 0.005, 0.02):
        sc = generate_scene(SceneConfig(geometry="grid", n=100, sigma=s))
        med.append(np.median(np.arccos(np.clip(np.sum(sc.dirs * sc.true_directions(), 1), -1, 1))))
    assert med[0] < 1e-7 < med[1] < med[2]


def test_render_matches_generated():
    sc = generate_scene(SceneConfig(geometry="torus", n=60, q=0.2, sigma=0.02, seed=9))
    np.testing.assert_array_equal(render_measurements(sc), sc.dirs)


@pytest.mark.parametrize("kw", [dict(geometry="sphere"), dict(n=3), dict(q=1.0), dict(q=-0.1),
                                dict(sigma=-1), dict(k_good=2), dict(model="bursty")])
def test_infeasible(kw):
    with pytest.raises(InfeasibleConfigError):
        generate_scene(SceneConfig(**kw))


def test_clustered_capacity_exhausted():
    # 3 bad nodes cannot carry the ~80 corrupted edges q=0.4 asks for
    with pytest.raises(InfeasibleConfigError, match="bad nodes"):
        generate_scene(SceneConfig(n=30, q=0.4, model="clustered"))


def test_large_scene_witnesses():
    sc = generate_scene(SceneConfig(geometry="torus", n=2000, q=0.1, seed=0))
    assert clean_witness_ok(sc)
