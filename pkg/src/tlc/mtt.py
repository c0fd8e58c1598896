"""Masked trajectory transformer.

Maps a hashed text feature plus partial key-joint trajectories to code-index
logits over the codec's codebooks, with Gumbel-Softmax sampling of the initial
latent. Training masks ground-truth trajectories with two strategies (contiguous
segments at a ramped proportion, or whole joint groups) chosen by a fair coin
each iteration, and optimizes cross-entropy against teacher code indices plus
a decoded-feature reconstruction term through the frozen codec.
"""

from __future__ import annotations

import copy

import numpy as np
import torch
from torch import nn

from .config import MttConfig
from .dataset import CorpusSample, NormStats, normalize, sample_rng
from .errors import ConfigError, InputError, TrainingError
from .motion import GROUPS, PartialTrajectory
from .text import bucket_vector
from .vqvae import DTYPE, MotionCodec

# stream ids for the named masking / sampling RNG families
STREAM_MASK = 4
STREAM_COIN = 3
STREAM_GUMBEL = 5


def mask_rng(seed: int, epoch: int, batch: int, sample: int) -> np.random.Generator:
    """Counter-based stream so masks replay from (seed, epoch, batch, sample)."""
    return sample_rng(seed, STREAM_MASK, epoch, batch, sample)


def continuous_trajectory_mask(
    traj: PartialTrajectory, proportion: float, rng: np.random.Generator
) -> PartialTrajectory:
    """Hide contiguous segments per group until exactly floor(p*T) frames are hidden.

    Already-hidden frames stay hidden and count toward the target; the last
    segment is truncated to hit the count exactly.
    """
    if not 0.0 <= proportion <= 1.0:
        raise InputError("proportion must be in [0, 1]")
    out = traj.copy()
    T = out.length
    target = int(np.floor(proportion * T))
    for g in range(len(GROUPS)):
        mask = out.mask[:, g]
        hidden = int((~mask).sum())
        while hidden < target:
            start = int(rng.integers(0, T))
            length = int(rng.integers(1, T + 1))
            for t in range(start, min(start + length, T)):
                if mask[t]:
                    mask[t] = False
                    hidden += 1
                    if hidden >= target:
                        break
    return out


def joint_level_mask(
    traj: PartialTrajectory, rng: np.random.Generator
) -> PartialTrajectory:
    """Hide the full tracks of k groups, k uniform in {0..6}."""
    out = traj.copy()
    k = int(rng.integers(0, len(GROUPS) + 1))
    if k:
        chosen = rng.choice(len(GROUPS), size=k, replace=False)
        out.mask[:, chosen] = False
    return out


class Mtt(nn.Module):
    def __init__(self, config: MttConfig, num_codebooks: int, codebook_size: int,
                 max_steps: int):
        super().__init__()
        config.validate()
        self.config = config
        self.num_codebooks = num_codebooks
        self.codebook_size = codebook_size
        self.max_steps = max_steps
        w1, w2 = config.stage1_width, config.stage2_width
        self.text_proj = nn.Linear(config.text_buckets, config.text_dim)
        self.lang_token = nn.Linear(config.text_dim, w1)
        self.traj_proj = nn.Linear(4 * config.waypoints_per_token, w1)
        self.mask_emb = nn.Parameter(torch.zeros(w1))
        self.group_emb = nn.Parameter(torch.zeros(len(GROUPS), w1))
        self.time_emb = nn.Parameter(torch.zeros(max_steps, w1))
        self.lang_pos = nn.Parameter(torch.zeros(w1))
        layer1 = nn.TransformerEncoderLayer(
            w1, config.heads, dim_feedforward=4 * w1, dropout=0.0, batch_first=True
        )
        self.stage1 = nn.TransformerEncoder(layer1, config.stage1_layers)
        self.bridge = nn.Linear(w1, w2)
        layer2 = nn.TransformerEncoderLayer(
            w2, config.heads, dim_feedforward=4 * w2, dropout=0.0, batch_first=True
        )
        self.stage2 = nn.TransformerEncoder(layer2, config.stage2_layers)
        self.head = nn.Linear(w2, codebook_size)
        for p in (self.mask_emb, self.group_emb, self.time_emb, self.lang_pos):
            nn.init.normal_(p, std=0.02)
        self.to(DTYPE)

    def token_count(self, frames: int) -> int:
        return 1 + len(GROUPS) * (frames // self.config.waypoints_per_token)

    def forward(
        self,
        buckets: torch.Tensor,  # (B, 4096)
        waypoints: torch.Tensor,  # (B, T, 6, 3)
        presence: torch.Tensor,  # (B, T, 6) in {0, 1}
    ) -> torch.Tensor:
        s = self.config.waypoints_per_token
        B, T = waypoints.shape[0], waypoints.shape[1]
        if T % s:
            raise ConfigError(f"trajectory length {T} not divisible by {s}")
        L = T // s
        if L > self.max_steps:
            raise ConfigError(f"{L} temporal tokens exceed the trained maximum {self.max_steps}")

        wp = waypoints * presence[..., None]
        frame_feat = torch.cat([wp, presence[..., None]], dim=-1)  # (B, T, 6, 4)
        bundles = frame_feat.reshape(B, L, s, len(GROUPS), 4).permute(0, 3, 1, 2, 4)
        bundles = bundles.reshape(B, len(GROUPS), L, s * 4)
        tokens = self.traj_proj(bundles)  # (B, 6, L, w1)
        masked_frac = 1.0 - presence.reshape(B, L, s, len(GROUPS)).mean(dim=2)
        tokens = tokens + self.mask_emb * masked_frac.permute(0, 2, 1)[..., None]
        tokens = tokens + self.group_emb[None, :, None, :] + self.time_emb[None, None, :L, :]

        lang = self.lang_token(self.text_proj(buckets)) + self.lang_pos  # (B, w1)
        seq = torch.cat([lang[:, None, :], tokens.reshape(B, -1, tokens.shape[-1])], dim=1)
        hidden = self.stage2(self.bridge(self.stage1(seq)))
        traj_hidden = hidden[:, 1:, :].reshape(B, len(GROUPS), L, -1)
        if self.num_codebooks == len(GROUPS):
            logits = self.head(traj_hidden).permute(0, 2, 1, 3)  # (B, L, 6, C)
        else:
            logits = self.head(traj_hidden.mean(dim=1))[:, :, None, :]  # (B, L, 1, C)
        return logits


def predict_code_logits(
    model: Mtt, traj: PartialTrajectory, text: str | np.ndarray
) -> np.ndarray:
    """Single-input logits (T/s, K, |C|); masked waypoints never reach the model."""
    buckets = text if isinstance(text, np.ndarray) else bucket_vector(text)
    with torch.no_grad():
        logits = model(
            torch.from_numpy(buckets).to(DTYPE)[None],
            torch.from_numpy(traj.waypoints).to(DTYPE)[None],
            torch.from_numpy(traj.mask.astype(np.float64))[None],
        )
    return logits[0].numpy()


def sample_codes(
    logits: torch.Tensor,  # (..., K, |C|)
    temperature: float,
    rng: np.random.Generator | None,
    codec: MotionCodec,
):
    """Gumbel-argmax selection with straight-through soft weights.

    Returns (indices, one-hot decision vectors, selected codes). With rng=None
    no noise is injected and the hard forward value is the exact argmax.
    """
    if temperature <= 0:
        raise InputError("temperature must be > 0")
    if rng is not None:
        noise = torch.from_numpy(rng.gumbel(size=tuple(logits.shape))).to(logits.dtype)
        y = logits + noise
    else:
        y = logits
    idx = torch.argmax(y, dim=-1)
    hard = torch.nn.functional.one_hot(idx, logits.shape[-1]).to(logits.dtype)
    soft = torch.softmax(y / temperature, dim=-1)
    v = hard + soft - soft.detach()
    codes = torch.stack([q.codes for q in codec.quantizers])  # (K, |C|, d)
    selected = torch.einsum("...kc,kcd->...kd", v, codes)
    return idx, v, selected


def train_mtt(
    samples: list[CorpusSample],
    codec: MotionCodec,
    stats: NormStats,
    config: MttConfig,
    seed: int,
    log_every: int = 0,
    train_dtype: torch.dtype = torch.float32,
) -> tuple[Mtt, list[dict]]:
    config.validate(codec.downsample)
    codec.eval()
    for p in codec.parameters():
        p.requires_grad_(False)

    t_max = samples[0].motion.length
    torch.manual_seed(seed)
    model = Mtt(
        config,
        num_codebooks=codec.num_codebooks,
        codebook_size=codec.config.codebook_size,
        max_steps=t_max // codec.downsample,
    )
    model.to(train_dtype)
    codec.to(train_dtype)

    n = len(samples)
    feats = torch.from_numpy(
        np.stack([normalize(s.motion, stats).features for s in samples])
    ).to(train_dtype)
    with torch.no_grad():
        teacher = codec.quantize(codec.encode(feats))[1]  # (N, L, K)
    waypoints = torch.from_numpy(
        np.stack([s.full_trajectories.waypoints for s in samples])
    ).to(train_dtype)
    presence_full = np.stack([s.full_trajectories.mask for s in samples])
    buckets = torch.from_numpy(
        np.stack([bucket_vector(s.text) for s in samples])
    ).to(train_dtype)

    opt = torch.optim.AdamW(model.parameters(), lr=config.lr)
    order_rng = sample_rng(seed, 6)
    batches_per_epoch = int(np.ceil(n / config.batch_size))
    total_steps = max(config.epochs * batches_per_epoch - 1, 1)
    history: list[dict] = []
    last_good: dict | None = None
    step = 0
    for epoch in range(config.epochs):
        frac = epoch / max(config.epochs - 1, 1)
        lr = config.lr_final + 0.5 * (config.lr - config.lr_final) * (1 + np.cos(np.pi * frac))
        for group in opt.param_groups:
            group["lr"] = lr
        order = order_rng.permutation(n)
        sums = {"cross_entropy": 0.0, "reconstruction": 0.0}
        for b in range(batches_per_epoch):
            idx = order[b * config.batch_size:(b + 1) * config.batch_size]
            progress = step / total_steps
            proportion = config.mask_ramp_end * progress
            tau = config.temperature_start + (
                config.temperature_end - config.temperature_start
            ) * progress
            coin = sample_rng(seed, STREAM_COIN, epoch, b).random() < 0.5
            pres = np.empty((len(idx), t_max, len(GROUPS)))
            for j, i in enumerate(idx):
                traj = PartialTrajectory(
                    samples[i].full_trajectories.waypoints, presence_full[i].copy()
                )
                rng = mask_rng(seed, epoch, b, int(i))
                masked = (
                    continuous_trajectory_mask(traj, proportion, rng)
                    if coin
                    else joint_level_mask(traj, rng)
                )
                pres[j] = masked.mask.astype(np.float64)
            logits = model(
                buckets[idx], waypoints[idx], torch.from_numpy(pres).to(train_dtype)
            )
            ce = torch.nn.functional.cross_entropy(
                logits.reshape(-1, model.codebook_size), teacher[idx].reshape(-1)
            )
            gumbel = sample_rng(seed, STREAM_GUMBEL, epoch, b)
            _, _, q0 = sample_codes(logits, tau, gumbel, codec)
            recon = codec.decode(q0)
            mse = torch.mean((recon - feats[idx]) ** 2)
            loss = ce + mse
            if not torch.isfinite(loss):
                raise TrainingError("mtt loss diverged", checkpoint=last_good)
            opt.zero_grad()
            loss.backward()
            opt.step()
            sums["cross_entropy"] += ce.item()
            sums["reconstruction"] += mse.item()
            step += 1
        record = {k: v / batches_per_epoch for k, v in sums.items()}
        record.update(epoch=epoch, lr=lr, total=sum(sums.values()) / batches_per_epoch)
        history.append(record)
        if epoch % 20 == 0 or epoch == config.epochs - 1:
            last_good = copy.deepcopy(model.state_dict())
        if log_every and (epoch % log_every == 0 or epoch == config.epochs - 1):
            print(
                f"[mtt] epoch {epoch:4d} ce {record['cross_entropy']:.4f} "
                f"recon {record['reconstruction']:.5f}"
            )
    model.to(DTYPE)
    codec.to(DTYPE)
    model.eval()
    return model, history
