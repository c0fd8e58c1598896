"""Part-based vector-quantized motion codec.

Six per-group temporal-convolution encoders (or one whole-body encoder for the
unsplit ablation variant) feed per-group codebooks; a single decoder
reconstructs full-body features from the concatenated quantized latents.
Codebooks are trained by exponential moving averages of their assigned encoder
outputs with dead-code resets; reconstruction gradients reach the encoders
through a straight-through copy across the quantizer.
"""

from __future__ import annotations

import copy
from dataclasses import dataclass

import numpy as np
import torch
from torch import nn

from .config import VqvaeConfig
from .dataset import CorpusSample, NormStats, normalize, sample_rng
from .errors import ConfigError, TrainingError
from .motion import (
    GROUPS,
    GroupPartition,
    MotionClip,
    PoseFeatureLayout,
    SkeletonSpec,
    recover_positions_torch,
)

DTYPE = torch.float64


def _recon_weights(layout: PoseFeatureLayout, root_weight: float) -> torch.Tensor:
    w = torch.ones(layout.feature_dim, dtype=DTYPE)
    w[layout.root_yaw_velocity] = root_weight
    w[layout.root_linear_velocity] = root_weight
    w[layout.root_height] = root_weight
    return w / w.mean()


@dataclass
class LatentSequence:
    """(T/s, K, d) latent; K = 6 per-group slices or 1 whole-body slice."""

    data: np.ndarray
    quantized: bool

    @property
    def length(self) -> int:
        return self.data.shape[0]

    @property
    def step_width(self) -> int:
        return self.data.shape[1] * self.data.shape[2]


def quantize_nearest_array(latent: np.ndarray, codebooks: list[np.ndarray]):
    """Euclidean nearest-code lookup; ties break to the lowest index.

    latent: (L, K, d_k) with one codebook of shape (|C|, d_k) per slice k.
    """
    L, K, _ = latent.shape
    if len(codebooks) != K:
        raise ConfigError(f"expected {K} codebooks, got {len(codebooks)}")
    indices = np.empty((L, K), dtype=np.int64)
    quantized = np.empty_like(latent)
    for k, codes in enumerate(codebooks):
        if codes.size == 0:
            raise ConfigError("empty codebook")
        x = latent[:, k, :]
        d2 = (x**2).sum(1, keepdims=True) - 2.0 * x @ codes.T + (codes**2).sum(1)
        idx = np.argmin(d2, axis=1)
        indices[:, k] = idx
        quantized[:, k, :] = codes[idx]
    return quantized, indices


class ResBlock(nn.Module):
    def __init__(self, width: int):
        super().__init__()
        self.conv1 = nn.Conv1d(width, width, 3, padding=1)
        self.conv2 = nn.Conv1d(width, width, 1)

    def forward(self, x):
        return x + self.conv2(torch.nn.functional.silu(self.conv1(torch.nn.functional.silu(x))))


class GroupEncoder(nn.Module):
    """Temporal conv encoder with two stride-2 stages (downsample factor 4)."""

    def __init__(self, in_channels: int, width: int, code_dim: int):
        super().__init__()
        stages = [nn.Conv1d(in_channels, width, 3, padding=1), nn.SiLU()]
        for _ in range(2):
            stages += [nn.Conv1d(width, width, 4, stride=2, padding=1), ResBlock(width)]
        stages.append(nn.Conv1d(width, code_dim, 3, padding=1))
        self.net = nn.Sequential(*stages)

    def forward(self, x):  # (B, C, T) -> (B, d, T/4)
        return self.net(x)


class FullDecoder(nn.Module):
    """Mirror of the encoder with nearest-neighbor temporal upsampling."""

    def __init__(self, latent_width: int, width: int, out_channels: int):
        super().__init__()
        stages = [nn.Conv1d(latent_width, width, 3, padding=1), nn.SiLU()]
        for _ in range(2):
            stages += [
                ResBlock(width),
                nn.Upsample(scale_factor=2, mode="nearest"),
                nn.Conv1d(width, width, 3, padding=1),
            ]
        stages += [nn.SiLU(), nn.Conv1d(width, out_channels, 3, padding=1)]
        self.net = nn.Sequential(*stages)

    def forward(self, z):  # (B, K*d, L) -> (B, M, L*4)
        return self.net(z)


class VectorQuantizer(nn.Module):
    """One codebook with EMA statistics."""

    def __init__(self, num_codes: int, dim: int):
        super().__init__()
        self.register_buffer("codes", torch.zeros(num_codes, dim, dtype=DTYPE))
        self.register_buffer("ema_counts", torch.zeros(num_codes, dtype=DTYPE))
        self.register_buffer("ema_sums", torch.zeros(num_codes, dim, dtype=DTYPE))
        self.register_buffer("seeded", torch.zeros(1, dtype=DTYPE))

    def nearest(self, x: torch.Tensor) -> torch.Tensor:
        d2 = (
            (x**2).sum(1, keepdim=True)
            - 2.0 * x @ self.codes.T
            + (self.codes**2).sum(1)
        )
        return torch.argmin(d2, dim=1)

    def seed_from(self, x: torch.Tensor, rng: np.random.Generator) -> None:
        pick = rng.choice(x.shape[0], size=self.codes.shape[0], replace=x.shape[0] < self.codes.shape[0])
        self.codes.copy_(x[pick].detach())
        self.ema_counts.fill_(1.0)
        self.ema_sums.copy_(self.codes)
        self.seeded.fill_(1.0)

    def ema_update(self, x: torch.Tensor, indices: torch.Tensor, decay: float) -> None:
        one_hot = torch.zeros(x.shape[0], self.codes.shape[0], dtype=self.codes.dtype)
        one_hot.scatter_(1, indices[:, None], 1.0)
        counts = one_hot.sum(0)
        sums = one_hot.T @ x.detach()
        self.ema_counts.mul_(decay).add_(counts, alpha=1.0 - decay)
        self.ema_sums.mul_(decay).add_(sums, alpha=1.0 - decay)
        alive = self.ema_counts > 1e-9
        self.codes[alive] = self.ema_sums[alive] / self.ema_counts[alive, None]

    def reset_unused(self, x: torch.Tensor, threshold: float, rng: np.random.Generator) -> int:
        dead = (self.ema_counts < threshold).nonzero(as_tuple=True)[0]
        if dead.numel() == 0:
            return 0
        pick = rng.choice(x.shape[0], size=dead.numel(), replace=x.shape[0] < dead.numel())
        fresh = x[pick].detach()
        self.codes[dead] = fresh
        self.ema_sums[dead] = fresh
        self.ema_counts[dead] = 1.0
        return int(dead.numel())


class MotionCodec(nn.Module):
    """Encoder bank + codebooks + full-body decoder (part-based or unsplit)."""

    def __init__(
        self,
        config: VqvaeConfig,
        skeleton: SkeletonSpec,
        layout: PoseFeatureLayout,
        split: bool = True,
    ):
        super().__init__()
        self.config = config
        self.skeleton = skeleton
        self.layout = layout
        self.split = split
        self.partition = GroupPartition(skeleton, layout)
        self.latent_width = len(GROUPS) * config.code_dim
        if split:
            self.num_codebooks = len(GROUPS)
            self.code_dim = config.code_dim
            self.encoders = nn.ModuleList(
                GroupEncoder(w, config.width, config.code_dim) for w in self.partition.widths
            )
        else:
            self.num_codebooks = 1
            self.code_dim = self.latent_width
            self.encoders = nn.ModuleList(
                [GroupEncoder(layout.feature_dim, config.width, self.code_dim)]
            )
        self.quantizers = nn.ModuleList(
            VectorQuantizer(config.codebook_size, self.code_dim)
            for _ in range(self.num_codebooks)
        )
        self.decoder = FullDecoder(self.latent_width, config.width, layout.feature_dim)
        self._channel_index = [
            torch.from_numpy(self.partition.channels[g]) for g in GROUPS
        ]
        self.to(DTYPE)

    @property
    def downsample(self) -> int:
        return self.config.downsample

    def encode(self, features: torch.Tensor) -> torch.Tensor:
        """Normalized features (B, T, M) -> continuous latent (B, L, K, d), unit-norm vectors."""
        if features.shape[-1] != self.layout.feature_dim:
            raise ConfigError(
                f"expected {self.layout.feature_dim} channels, got {features.shape[-1]}"
            )
        if features.shape[-2] % self.downsample:
            raise ConfigError(
                f"frame count {features.shape[-2]} not divisible by s={self.downsample}"
            )
        x = features.transpose(-1, -2)  # (B, M, T)
        if self.split:
            outs = [
                enc(x[:, idx, :]) for enc, idx in zip(self.encoders, self._channel_index)
            ]
        else:
            outs = [self.encoders[0](x)]
        z = torch.stack([o.transpose(-1, -2) for o in outs], dim=-2)  # (B, L, K, d)
        return z / torch.linalg.vector_norm(z, dim=-1, keepdim=True).clamp_min(1e-8)

    def quantize(self, latent: torch.Tensor) -> tuple[torch.Tensor, torch.Tensor]:
        """(B, L, K, d) -> quantized latent and integer indices (B, L, K)."""
        B, L, K, d = latent.shape
        flat = latent.reshape(B * L, K, d)
        idx = torch.stack(
            [q.nearest(flat[:, k, :]) for k, q in enumerate(self.quantizers)], dim=1
        )
        quant = torch.stack(
            [q.codes[idx[:, k]] for k, q in enumerate(self.quantizers)], dim=1
        )
        return quant.reshape(B, L, K, d), idx.reshape(B, L, K)

    def decode(self, latent: torch.Tensor) -> torch.Tensor:
        """Latent (B, L, K, d) or (B, L, K*d) -> normalized features (B, T, M)."""
        if latent.ndim == 4:
            latent = latent.reshape(*latent.shape[:2], -1)
        if latent.shape[-1] != self.latent_width:
            raise ConfigError(
                f"expected latent width {self.latent_width}, got {latent.shape[-1]}"
            )
        return self.decoder(latent.transpose(-1, -2)).transpose(-1, -2)

    def forward(self, features: torch.Tensor):
        cont = self.encode(features)
        quant, idx = self.quantize(cont)
        st = cont + (quant - cont).detach()
        recon = self.decode(st)
        return recon, cont, quant, idx


# ---------------------------------------------------------------------------
# Spec-level operation wrappers on single clips


def encode_groups(
    codec: MotionCodec, clip_normalized: MotionClip
) -> LatentSequence:
    feats = torch.from_numpy(clip_normalized.features).to(DTYPE)
    with torch.no_grad():
        z = codec.encode(feats[None])[0]
    return LatentSequence(z.numpy(), quantized=False)


def quantize_nearest(
    latent: LatentSequence, codec: MotionCodec
) -> tuple[LatentSequence, np.ndarray]:
    quantized, indices = quantize_nearest_array(
        latent.data, [q.codes.numpy() for q in codec.quantizers]
    )
    return LatentSequence(quantized, quantized=True), indices


def decode_full(codec: MotionCodec, latent: LatentSequence, fps: float = 20.0) -> MotionClip:
    data = torch.from_numpy(latent.data).to(DTYPE)
    with torch.no_grad():
        recon = codec.decode(data[None])[0]
    return MotionClip(recon.numpy(), fps=fps)


def build_unsplit_variant(
    config: VqvaeConfig, skeleton: SkeletonSpec, layout: PoseFeatureLayout
) -> MotionCodec:
    return MotionCodec(config, skeleton, layout, split=False)


# ---------------------------------------------------------------------------
# Training


def train_vqvae(
    samples: list[CorpusSample],
    stats: NormStats,
    config: VqvaeConfig,
    seed: int,
    skeleton: SkeletonSpec,
    layout: PoseFeatureLayout,
    split: bool = True,
    log_every: int = 0,
    train_dtype: torch.dtype = torch.float32,
) -> tuple[MotionCodec, list[dict]]:
    config.validate()
    torch.manual_seed(seed)
    codec = MotionCodec(config, skeleton, layout, split=split)
    codec.to(train_dtype)
    recon_w = _recon_weights(layout, config.root_channel_weight).to(train_dtype)
    features = torch.from_numpy(
        np.stack([normalize(s.motion, stats).features for s in samples])
    ).to(train_dtype)
    n = features.shape[0]
    opt = torch.optim.AdamW(
        list(codec.encoders.parameters()) + list(codec.decoder.parameters()),
        lr=config.lr,
    )
    total_epochs = config.epochs
    history: list[dict] = []
    order_rng = sample_rng(seed, 1)
    reset_rng = sample_rng(seed, 2)
    last_good: dict | None = None
    step = 0
    for epoch in range(total_epochs):
        frac = epoch / max(total_epochs - 1, 1)
        lr = config.lr_final + 0.5 * (config.lr - config.lr_final) * (1 + np.cos(np.pi * frac))
        for group in opt.param_groups:
            group["lr"] = lr
        order = order_rng.permutation(n)
        sums = {"reconstruction": 0.0, "commitment": 0.0, "quantization": 0.0}
        batches = 0
        for start in range(0, n, config.batch_size):
            batch = features[order[start:start + config.batch_size]]
            cont = codec.encode(batch)
            B, L, K, d = cont.shape
            flat = cont.reshape(B * L, K, d)
            if not bool(codec.quantizers[0].seeded.item()):
                for k, q in enumerate(codec.quantizers):
                    q.seed_from(flat[:, k, :], reset_rng)
            quant_cols = []
            for k, q in enumerate(codec.quantizers):
                xk = flat[:, k, :]
                idx = q.nearest(xk)
                if codec.training:
                    q.ema_update(xk, idx, config.ema_decay)
                    if step >= config.reset_warmup_steps:
                        q.reset_unused(xk, config.reset_threshold, reset_rng)
                quant_cols.append(q.codes[idx])
            quant = torch.stack(quant_cols, dim=1).reshape(B, L, K, d)
            st = cont + (quant - cont).detach()
            recon = codec.decode(st)
            loss_recon = torch.mean(recon_w * (recon - batch) ** 2)
            loss_commit = torch.mean((quant.detach() - cont) ** 2)
            loss_quant = torch.mean((quant - cont.detach()) ** 2)  # monitoring only
            loss = loss_recon + config.beta * loss_commit
            if not torch.isfinite(loss):
                raise TrainingError("vq-vae loss diverged", checkpoint=last_good)
            opt.zero_grad()
            loss.backward()
            opt.step()
            sums["reconstruction"] += loss_recon.item()
            sums["commitment"] += loss_commit.item()
            sums["quantization"] += loss_quant.item()
            batches += 1
            step += 1
        record = {k: v / batches for k, v in sums.items()}
        record.update(epoch=epoch, lr=lr)
        record["total"] = record["reconstruction"] + config.beta * record["commitment"]
        history.append(record)
        if epoch % 20 == 0 or epoch == total_epochs - 1:
            last_good = copy.deepcopy(codec.state_dict())
        if log_every and (epoch % log_every == 0 or epoch == total_epochs - 1):
            print(
                f"[vqvae] epoch {epoch:4d} recon {record['reconstruction']:.5f} "
                f"commit {record['commitment']:.5f}"
            )
    codec.to(DTYPE)
    codec.eval()
    return codec, history


def reconstruction_mpjpe(
    codec: MotionCodec,
    samples: list[CorpusSample],
    stats: NormStats,
) -> float:
    """Mean per-joint position error (meters) after quantized round trip."""
    mean = torch.from_numpy(stats.mean).to(DTYPE)
    std = torch.from_numpy(stats.std).to(DTYPE)
    errs = []
    with torch.no_grad():
        for s in samples:
            normed = torch.from_numpy(normalize(s.motion, stats).features).to(DTYPE)
            recon, _, _, _ = codec(normed[None])
            raw = recon[0] * std + mean
            pos = recover_positions_torch(raw, codec.layout)
            ref = recover_positions_torch(
                torch.from_numpy(s.motion.features).to(DTYPE), codec.layout
            )
            t = s.true_length
            errs.append(
                torch.linalg.vector_norm(pos[:t] - ref[:t], dim=-1).mean().item()
            )
    return float(np.mean(errs))
