import numpy as np
import pytest
from hypothesis import given, strategies as st

from nca3d import tensor as T
from nca3d.nca import (
    Checkpoint,
    CheckpointError,
    NcaConfig,
    RngStream,
    alive_mask,
    checkpoint_from_bytes,
    checkpoint_to_bytes,
    compute_update,
    init_parameters,
    load_checkpoint,
    make_seed,
    nca_step,
    perceive,
    rollout,
    save_checkpoint,
    stochastic_mask,
)
from nca3d.presets import HYPERPARAMS, entity_overrides
from nca3d.voxels import BlockPalette

CFG = NcaConfig(num_block_channels=3, num_hidden=4, layer1_channels=8, layer2_channels=8, init_stdev=0.1)


def params(cfg=CFG, seed=0):
    return init_parameters(cfg, RngStream(seed))


def zero_head(p):
    p["update.weight"].data[:] = 0
    p["update.bias"].data[:] = 0
    return p


def test_config_validation():
    with pytest.raises(ValueError):
        NcaConfig(num_block_channels=1)
    with pytest.raises(ValueError):
        NcaConfig(num_block_channels=3, update_dropout=1.0)
    with pytest.raises(ValueError):
        NcaConfig(num_block_channels=3, activation="tanh")
    assert CFG.channels == 3 + 1 + 4 and CFG.alpha_channel == 3


def test_init_statistics_follow_configured_stdev():
    cfg = NcaConfig(num_block_channels=35, num_hidden=10, init_stdev=0.1)  # the mini castle row
    p = init_parameters(cfg, RngStream(1))
    w = np.concatenate([t.data.ravel() for n, t in p.items() if n.endswith("weight")])
    assert w.size >= 10_000
    assert abs(w.std() - 0.1) < 0.01
    assert all(np.all(t.data == 0) for n, t in p.items() if n.endswith("bias"))
    assert p["perception.weight"].shape == (3 * cfg.channels, cfg.channels, 3, 3, 3)
    assert p["update.weight"].shape[0] == cfg.channels


def test_init_is_deterministic():
    a, b = params(seed=3), params(seed=3)
    assert all(np.array_equal(a[n].data, b[n].data) for n, _ in a.items())


def test_perceive_and_update_shapes_and_zero_cases():
    p = params()
    x = T.Tensor(np.zeros((CFG.channels, 4, 3, 5)))
    per = perceive(x, p)
    assert per.shape == (3 * CFG.channels, 4, 3, 5)
    assert np.all(per.data == 0)  # zero state, zero bias
    assert np.all(compute_update(per, p).data == 0)
    with pytest.raises(T.DimensionError):
        perceive(T.Tensor(np.zeros((CFG.channels + 1, 3, 3, 3))), p)


def test_perceive_matches_reference_conv():
    p = params()
    x = np.random.default_rng(0).normal(size=(CFG.channels, 4, 4, 4))
    ref = T.conv3d_reference(x, p["perception.weight"].data, p["perception.bias"].data, padding=1)
    np.testing.assert_allclose(perceive(T.Tensor(x), p).data, ref, atol=1e-5)


def test_update_pipeline_matches_composed_reference():
    p = params()
    x = np.random.default_rng(1).normal(size=(3 * CFG.channels, 3, 3, 3)) * 0.3
    h = np.maximum(T.conv3d_reference(x, p["layer1.weight"].data, p["layer1.bias"].data), 0)
    h = np.maximum(T.conv3d_reference(h, p["layer2.weight"].data, p["layer2.bias"].data), 0)
    ref = T.conv3d_reference(h, p["update.weight"].data, p["update.bias"].data)
    np.testing.assert_allclose(compute_update(T.Tensor(x), p).data, ref, atol=1e-5)


def test_stochastic_mask():
    m = stochastic_mask((50, 50, 40), RngStream(0), 0.5)
    assert m.shape == (1, 50, 50, 40)
    assert abs(m.mean() - 0.5) < 0.01
    assert np.all(stochastic_mask((3, 3, 3), RngStream(0), 1.0) == 1)
    assert np.array_equal(m, stochastic_mask((50, 50, 40), RngStream(0), 0.5))
    with pytest.raises(ValueError):
        stochastic_mask((2, 2, 2), RngStream(0), 0.0)


def test_alive_mask_single_cell_reaches_27():
    state = np.zeros((CFG.channels, 5, 5, 5))
    assert alive_mask(state, CFG.alpha_channel).sum() == 0
    state[CFG.alpha_channel, 2, 2, 2] = 1.0
    m = alive_mask(state, CFG.alpha_channel)[0]
    assert m.sum() == 27 and np.all(m[1:4, 1:4, 1:4] == 1)


@given(st.integers(0, 2**31 - 1))
def test_alive_mask_matches_scan(seed):
    rng = np.random.default_rng(seed)
    state = np.zeros((CFG.channels, 4, 5, 3))
    state[CFG.alpha_channel] = rng.uniform(-0.2, 0.3, size=(4, 5, 3))
    m = alive_mask(state, CFG.alpha_channel)[0]
    a = state[CFG.alpha_channel]
    for i, j, k in np.ndindex(a.shape):
        hood = a[max(i - 1, 0):i + 2, max(j - 1, 0):j + 2, max(k - 1, 0):k + 2]
        assert m[i, j, k] == (hood.max() > 0.1)


def test_seed_state():
    s = make_seed((5, 6, 7), CFG)
    c = (2, 3, 3)
    assert s[CFG.alpha_channel][c] == 1.0
    assert np.all(s[:, c[0], c[1], c[2]][np.arange(CFG.channels) != CFG.alpha_channel] == 0)
    rest = np.ones((5, 6, 7), bool)
    rest[c] = False
    assert np.all(s[0][rest] == 1) and np.all(s[1:][:, rest] == 0)
    assert alive_mask(s, CFG.alpha_channel).sum() == 27


def _dead_ok(state, cfg=CFG):
    dead = alive_mask(state, cfg.alpha_channel)[0] == 0
    return np.all(state[0][dead] == 1) and np.all(state[1:][:, dead] == 0)


def test_dead_cells_are_air_after_every_step():
    p = params(seed=2)
    x = T.Tensor(make_seed((6, 6, 6), CFG))
    rng = RngStream(5)
    for _ in range(12):
        x = nca_step(x, p, CFG, rng)
        assert _dead_ok(x.data)


@given(st.integers(0, 1000), st.integers(1, 4))
def test_locality_after_k_steps(seed, k):
    cfg = NcaConfig(num_block_channels=3, num_hidden=4, layer1_channels=8, layer2_channels=8, init_stdev=0.5)
    p = init_parameters(cfg, RngStream(seed))
    dims = (9, 9, 9)
    final, _ = rollout(make_seed(dims, cfg), p, cfg, k, RngStream(seed + 1))
    dead = make_seed(dims, cfg)[:, 0, 0, 0][:, None]
    changed = ~np.all(final.data.reshape(cfg.channels, -1) == dead, axis=0).reshape(dims)
    idx = np.argwhere(changed)
    if len(idx):
        assert np.abs(idx - 4).max() <= k


def test_zero_head_is_identity():
    p = zero_head(params())
    s = make_seed((5, 5, 5), CFG)
    out = nca_step(T.Tensor(s), p, CFG, RngStream(0))
    assert np.array_equal(out.data, s)
    dead = make_seed((4, 4, 4), CFG)
    dead[CFG.alpha_channel] = 0
    dead[0] = 1
    assert np.array_equal(nca_step(T.Tensor(dead), p, CFG, RngStream(0)).data, dead)


def test_identity_configuration():
    cfg = NcaConfig(num_block_channels=3, num_hidden=4, layer1_channels=8, layer2_channels=8, alive_threshold=0.0,
                    update_dropout=0.0)
    p = zero_head(init_parameters(cfg, RngStream(0)))
    x = np.random.default_rng(0).uniform(-1, 1, size=(cfg.channels, 3, 3, 3))
    x[cfg.alpha_channel] = 1.0
    assert np.array_equal(nca_step(T.Tensor(x), p, cfg, RngStream(0)).data, x)


def test_state_is_clamped():
    cfg = NcaConfig(num_block_channels=3, num_hidden=4, layer1_channels=8, layer2_channels=8, init_stdev=3.0)
    p = init_parameters(cfg, RngStream(0))
    final, _ = rollout(make_seed((5, 5, 5), cfg), p, cfg, 6, RngStream(1))
    assert np.abs(final.data).max() <= cfg.state_clip
    with pytest.raises(ValueError):
        NcaConfig(num_block_channels=3, state_clip=0.5)


def test_rollout_determinism_and_snapshots():
    p = params(seed=4)
    s = make_seed((5, 5, 5), CFG)
    a, snaps = rollout(s, p, CFG, 10, RngStream(9), snapshot_every=3)
    b, _ = rollout(s, p, CFG, 10, RngStream(9))
    assert np.array_equal(a.data, b.data)
    assert [k for k, _ in snaps] == [3, 6, 9]
    assert a.is_leaf  # inference builds no graph
    with pytest.raises(ValueError):
        rollout(s, p, CFG, 0, RngStream(0))


def test_batched_step_matches_single():
    p = params(seed=6)
    s = make_seed((4, 4, 4), CFG)
    masks = [stochastic_mask((4, 4, 4), RngStream(i), 0.5) for i in range(3)]
    single, _ = rollout(s, p, CFG, 3, update_masks=masks)
    batched, _ = rollout(np.stack([s, s]), p, CFG, 3, update_masks=[np.stack([m, m]) for m in masks])
    np.testing.assert_allclose(batched.data[1], single.data, atol=1e-6)


def test_step_gradient_finite_difference():
    cfg = CFG
    p = params(seed=11).copy(np.float64)
    for n, t in p.items():
        if n.endswith("bias"):
            t.data = np.random.default_rng(3).normal(size=t.shape) * 0.05
    p["update.bias"].data[cfg.alpha_channel] = 0.3
    s = make_seed((4, 4, 4), cfg, np.float64)
    masks = [np.ones((1, 4, 4, 4)), np.ones((1, 4, 4, 4))]

    def f(w):
        q = p.copy(requires_grad=False)
        q.tensors["update.weight"] = w
        out, _ = rollout(T.Tensor(s), q, cfg, 2, update_masks=masks, record_grad=True)
        return T.reduce("mean", out)

    assert T.finite_diff_check(f, p["update.weight"], eps=1e-5) < 1e-3


def test_checkpoint_round_trip_and_corruption(tmp_path):
    ck = Checkpoint(CFG, BlockPalette(("AIR", "GLASS", "STONE")), params(seed=1), {"note": "x"})
    path = tmp_path / "ck.json"
    save_checkpoint(ck, path)
    back = load_checkpoint(path)
    assert back.config == CFG and back.palette == ck.palette and back.meta == {"note": "x"}
    assert all(np.array_equal(back.params[n].data, t.data) for n, t in ck.params.items())
    assert checkpoint_to_bytes(back) == path.read_bytes()

    raw = bytearray(path.read_bytes())
    i = raw.index(b'"data"') + 12
    raw[i] = ord("A") if raw[i] != ord("A") else ord("B")
    with pytest.raises(CheckpointError):
        checkpoint_from_bytes(bytes(raw))
    with pytest.raises(CheckpointError):
        checkpoint_from_bytes(b"not json")


def test_entity_hyperparameters():
    o = entity_overrides("Cathedral")
    assert o["nca.init_stdev"] == 0.2 and o["train.min_steps"] == 50 and o["padded_dims"] == [33, 27, 31]
    assert entity_overrides("flying_machine")["nca.init_stdev"] == 0.001
    assert HYPERPARAMS["village_house"][-1] == 0.0002
    with pytest.raises(KeyError):
        entity_overrides("spaceship")
