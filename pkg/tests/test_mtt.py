import numpy as np
import pytest
import torch
from hypothesis import given, settings
from hypothesis import strategies as st

from tlc.config import CorpusConfig, MttConfig, VqvaeConfig
from tlc.dataset import generate_corpus, sample_rng
from tlc.errors import InputError
from tlc.motion import GROUPS, PartialTrajectory, PoseFeatureLayout, default_skeleton
from tlc.mtt import (
    Mtt,
    continuous_trajectory_mask,
    joint_level_mask,
    mask_rng,
    predict_code_logits,
    sample_codes,
    train_mtt,
)
from tlc.vqvae import MotionCodec, train_vqvae

SKEL = default_skeleton()
LAYOUT = PoseFeatureLayout(num_joints=22)
SMALL_VQ = VqvaeConfig(codebook_size=8, code_dim=8, width=32)
SMALL_MTT = MttConfig(stage1_width=32, stage2_width=16, heads=2, epochs=2, batch_size=4)


def full_traj(T, rng=None):
    rng = rng or np.random.default_rng(0)
    return PartialTrajectory(rng.normal(size=(T, 6, 3)), np.ones((T, 6), dtype=bool))


@pytest.mark.parametrize("p", [0.0, 0.3, 0.5, 1.0])
@pytest.mark.parametrize("T", [8, 64, 196])
def test_continuous_mask_exact_counts(p, T):
    out = continuous_trajectory_mask(full_traj(T), p, np.random.default_rng(1))
    hidden = (~out.mask).sum(axis=0)
    assert (hidden == int(np.floor(p * T))).all()


def test_continuous_mask_zero_and_one():
    traj = full_traj(12)
    unchanged = continuous_trajectory_mask(traj, 0.0, np.random.default_rng(0))
    assert unchanged.mask.all()
    full = continuous_trajectory_mask(traj, 1.0, np.random.default_rng(0))
    assert not full.mask.any()


def test_continuous_mask_produces_contiguous_runs():
    out = continuous_trajectory_mask(full_traj(196), 0.5, np.random.default_rng(3))
    for g in range(6):
        hidden = ~out.mask[:, g]
        assert hidden.sum() == 98
        # at least one contiguous run of hidden frames
        runs = np.diff(np.flatnonzero(np.diff(np.concatenate([[0], hidden, [0]]))))
        assert len(runs) >= 1


@settings(max_examples=30, deadline=None)
@given(
    st.integers(min_value=4, max_value=40),
    st.floats(min_value=0.0, max_value=1.0),
    st.integers(min_value=0, max_value=2**31 - 1),
)
def test_masking_never_creates_information(T, p, seed):
    rng = np.random.default_rng(seed)
    traj = full_traj(T, rng)
    traj.mask[rng.random(size=traj.mask.shape) < 0.3] = False
    before = traj.mask.copy()
    for op in (
        lambda t: continuous_trajectory_mask(t, p, np.random.default_rng(seed + 1)),
        lambda t: joint_level_mask(t, np.random.default_rng(seed + 2)),
    ):
        out = op(traj)
        assert not (out.mask & ~before).any()


def test_joint_level_mask_replay():
    seed_rng = np.random.default_rng(42)
    out = joint_level_mask(full_traj(10), np.random.default_rng(42))
    # replay the same draws to learn which groups were selected
    replay = np.random.default_rng(42)
    k = int(replay.integers(0, 7))
    chosen = replay.choice(6, size=k, replace=False) if k else []
    for g in range(6):
        if g in list(chosen):
            assert not out.mask[:, g].any()
        else:
            assert out.mask[:, g].all()
    del seed_rng


def test_joint_level_mask_extremes():
    # find seeds drawing k=0 and k=6
    seen = {}
    for seed in range(200):
        k = int(np.random.default_rng(seed).integers(0, 7))
        seen.setdefault(k, seed)
        if 0 in seen and 6 in seen:
            break
    out0 = joint_level_mask(full_traj(5), np.random.default_rng(seen[0]))
    assert out0.mask.all()
    out6 = joint_level_mask(full_traj(5), np.random.default_rng(seen[6]))
    assert not out6.mask.any()


def test_invalid_proportion():
    with pytest.raises(InputError):
        continuous_trajectory_mask(full_traj(5), 1.5, np.random.default_rng(0))


def test_mask_rng_is_reproducible():
    a = mask_rng(1, 2, 3, 4).integers(0, 1000, size=5)
    b = mask_rng(1, 2, 3, 4).integers(0, 1000, size=5)
    c = mask_rng(1, 2, 3, 5).integers(0, 1000, size=5)
    assert (a == b).all()
    assert (a != c).any()


def _tiny_model(num_codebooks=6, codebook_size=8, max_steps=49):
    torch.manual_seed(0)
    return Mtt(SMALL_MTT, num_codebooks, codebook_size, max_steps)


def _codec_with_random_codes(config=SMALL_VQ, seed=2):
    torch.manual_seed(seed)
    codec = MotionCodec(config, SKEL, LAYOUT)
    g = torch.Generator().manual_seed(seed)
    for q in codec.quantizers:
        q.codes.copy_(torch.randn(q.codes.shape, generator=g, dtype=torch.float64))
    return codec


def test_logits_shapes_and_token_count():
    model = _tiny_model()
    assert model.token_count(196) == 1 + 6 * 49
    assert model.token_count(8) == 13
    logits = predict_code_logits(model, full_traj(196), "a person walks")
    assert logits.shape == (49, 6, 8)
    logits8 = predict_code_logits(model, full_traj(8), "a person walks")
    assert logits8.shape == (2, 6, 8)


def test_fully_masked_logits_depend_only_on_text():
    model = _tiny_model()
    rng = np.random.default_rng(5)
    t1 = PartialTrajectory(rng.normal(size=(16, 6, 3)), np.zeros((16, 6), dtype=bool))
    t2 = PartialTrajectory(rng.normal(size=(16, 6, 3)), np.zeros((16, 6), dtype=bool))
    l1 = predict_code_logits(model, t1, "walk forward")
    l2 = predict_code_logits(model, t2, "walk forward")
    np.testing.assert_array_equal(l1, l2)
    l3 = predict_code_logits(model, t1, "wave the left hand")
    assert (l1 != l3).any()


def test_sample_codes_one_hot_contract():
    codec = _codec_with_random_codes()
    logits = torch.randn(4, 6, 8, dtype=torch.float64)
    idx, v, q0 = sample_codes(logits, 0.7, np.random.default_rng(0), codec)
    v_np = v.detach().numpy()
    np.testing.assert_allclose(v_np.sum(axis=-1), 1.0, atol=1e-12)
    assert ((v_np != 0).sum(axis=-1) >= 1).all()
    hard = np.zeros_like(v_np)
    for t in range(4):
        for k in range(6):
            hard[t, k, idx[t, k]] = 1.0
    np.testing.assert_allclose(v_np, hard, atol=1e-12)
    assert q0.shape == (4, 6, 8)
    codes = torch.stack([q.codes for q in codec.quantizers]).numpy()
    for t in range(4):
        for k in range(6):
            np.testing.assert_allclose(q0[t, k].numpy(), codes[k, idx[t, k]], atol=1e-12)


def test_sample_codes_zero_noise_is_argmax():
    codec = _codec_with_random_codes()
    logits = torch.randn(3, 6, 8, dtype=torch.float64)
    idx, _, _ = sample_codes(logits, 1e-6, None, codec)
    np.testing.assert_array_equal(idx.numpy(), logits.argmax(-1).numpy())


def test_sample_codes_peaked_logits_frequency():
    codec = _codec_with_random_codes(VqvaeConfig(codebook_size=8, code_dim=4, width=16))
    logits = torch.zeros(1, 6, 8, dtype=torch.float64)
    logits[0, :, 3] = 50.0
    rng = np.random.default_rng(0)
    hits = 0
    for _ in range(1000):
        idx, _, _ = sample_codes(logits, 1.0, rng, codec)
        hits += int(idx[0, 0] == 3)
    assert hits >= 999


def test_gumbel_frequencies_match_softmax():
    codec = _codec_with_random_codes()
    rng_logits = np.random.default_rng(8)
    logits_np = rng_logits.normal(size=8)
    logits = torch.zeros(1, 6, 8, dtype=torch.float64)
    logits[0, 0] = torch.from_numpy(logits_np)
    probs = np.exp(logits_np) / np.exp(logits_np).sum()
    rng = np.random.default_rng(123)
    counts = np.zeros(8)
    draws = 10000
    for _ in range(draws):
        idx, _, _ = sample_codes(logits, 1.0, rng, codec)
        counts[int(idx[0, 0])] += 1
    tv = 0.5 * np.abs(counts / draws - probs).sum()
    assert tv < 0.02


def test_sample_codes_gradient_flows_to_logits():
    codec = _codec_with_random_codes()
    logits = torch.randn(2, 6, 8, dtype=torch.float64, requires_grad=True)
    _, _, q0 = sample_codes(logits, 0.8, np.random.default_rng(1), codec)
    q0.sum().backward()
    assert logits.grad is not None
    assert torch.isfinite(logits.grad).all()
    assert logits.grad.abs().sum() > 0


def test_uniform_logits_cross_entropy():
    logits = torch.zeros(49 * 6, 126, dtype=torch.float64)
    target = torch.randint(0, 126, (49 * 6,))
    ce = torch.nn.functional.cross_entropy(logits, target).item()
    assert ce == pytest.approx(np.log(126), abs=1e-9)


def test_curriculum_ramp_arithmetic():
    cfg = MttConfig()
    assert cfg.mask_ramp_end * 0.5 == pytest.approx(0.375)


def test_train_mtt_smoke_and_determinism():
    cfg = CorpusConfig(count=8, t_max=16)
    samples, stats = generate_corpus(cfg, seed=0)
    vq = VqvaeConfig(codebook_size=4, code_dim=4, width=16, epochs=2, batch_size=4)
    codec, _ = train_vqvae(samples, stats, vq, seed=0, skeleton=SKEL, layout=LAYOUT)
    m1, h1 = train_mtt(samples, codec, stats, SMALL_MTT, seed=5)
    m2, h2 = train_mtt(samples, codec, stats, SMALL_MTT, seed=5)
    assert h1 == h2
    for v1, v2 in zip(m1.state_dict().values(), m2.state_dict().values()):
        assert torch.equal(v1, v2)
    assert all(np.isfinite(h["total"]) for h in h1)
