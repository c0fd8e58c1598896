import numpy as np
import pytest
import torch

from tlc.config import Config, CorpusConfig, MttConfig, VqvaeConfig
from tlc.dataset import generate_corpus, split_corpus
from tlc.models import ModelBundle
from tlc.motion import PoseFeatureLayout, default_skeleton
from tlc.mtt import train_mtt
from tlc.vqvae import train_vqvae

torch.set_num_threads(2)


def tiny_config() -> Config:
    cfg = Config(profile="toy", seed=3)
    cfg.corpus = CorpusConfig(count=12, t_max=16)
    cfg.vqvae = VqvaeConfig(
        codebook_size=8, code_dim=8, width=24, epochs=10, batch_size=4,
        lr=1e-3, lr_final=5e-4, reset_warmup_steps=6,
    )
    cfg.mtt = MttConfig(
        stage1_width=32, stage2_width=16, heads=2, epochs=8, batch_size=4,
        lr=1e-3, lr_final=5e-4,
    )
    return cfg


@pytest.fixture(scope="session")
def tiny_bundle():
    """A fast-to-train model set for interface-level tests (quality-irrelevant)."""
    cfg = tiny_config()
    samples, stats = generate_corpus(cfg.corpus, seed=cfg.seed)
    parts = split_corpus(samples, cfg.seed)
    skeleton = default_skeleton()
    layout = PoseFeatureLayout(num_joints=cfg.num_joints)
    codec, _ = train_vqvae(parts["train"], stats, cfg.vqvae, cfg.seed, skeleton, layout)
    mtt, _ = train_mtt(parts["train"], codec, stats, cfg.mtt, cfg.seed)
    return ModelBundle(codec, mtt, stats, cfg, skeleton, layout), parts


@pytest.fixture(scope="session")
def tiny_model_dir(tiny_bundle, tmp_path_factory):
    from tlc.models import save_bundle

    bundle, _ = tiny_bundle
    directory = tmp_path_factory.mktemp("model")
    save_bundle(directory, bundle)
    return directory
