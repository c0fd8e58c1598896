"""Acceptance suite: one test per criterion, each printing a pass/fail line.

Run with `pytest tests/test_acceptance.py -v -s`. The desk-scale criteria train
the toy profile once per config hash and cache the weights under .cache/.
"""

import hashlib
import json
import time
from dataclasses import replace
from pathlib import Path

import numpy as np
import pytest
import torch

from tlc.config import OptimizeConfig, toy_profile
from tlc.dataset import generate_corpus, sample_rng, split_corpus
from tlc.harness import (
    build_conditioning,
    evaluate_condition,
    group_independence_holds,
    ik_vs_latent_report,
    mmodality_by_mask_rate,
    run_ablation,
)
from tlc.metrics import (
    ControlErrorAccumulator,
    control_accuracy,
    diversity,
    fid_proxy,
    multimodality,
)
from tlc.models import ModelBundle, load_bundle, save_bundle
from tlc.motion import (
    GROUPS,
    PartialTrajectory,
    PoseFeatureLayout,
    default_skeleton,
    recover_global_positions,
)
from tlc.mtt import Mtt, continuous_trajectory_mask, joint_level_mask, train_mtt
from tlc.refine import generate_motion, objective_and_gradient, refine_latent
from tlc.vqvae import (
    MotionCodec,
    quantize_nearest_array,
    reconstruction_mpjpe,
    train_vqvae,
)

torch.set_num_threads(2)

CACHE_SALT = "v1"
CACHE_DIR = Path(__file__).resolve().parents[1] / ".cache"

SKEL = default_skeleton()
LAYOUT = PoseFeatureLayout(num_joints=22)


def report(line: str) -> None:
    print(f"\nACCEPTANCE {line}", flush=True)


@pytest.fixture(scope="session")
def toy_models():
    """Toy-profile corpus + trained codec/MTT, cached on disk per config hash."""
    cfg = toy_profile()
    samples, stats = generate_corpus(cfg.corpus, seed=cfg.seed)
    parts = split_corpus(samples, cfg.seed)
    train_cfg = {
        k: v for k, v in cfg.to_dict().items()
        if k in ("seed", "num_joints", "corpus", "vqvae", "mtt")
    }
    key = hashlib.sha256(
        (CACHE_SALT + json.dumps(train_cfg, sort_keys=True)).encode()
    ).hexdigest()[:16]
    cache = CACHE_DIR / f"toy-{key}"
    train_seconds = None
    if (cache / "config.json").exists():
        bundle = load_bundle(cache)
    else:
        t0 = time.time()
        codec, _ = train_vqvae(
            parts["train"], stats, cfg.vqvae, cfg.seed, SKEL, LAYOUT
        )
        mtt, _ = train_mtt(parts["train"], codec, stats, cfg.mtt, cfg.seed)
        train_seconds = time.time() - t0
        bundle = ModelBundle(codec, mtt, stats, cfg, SKEL, LAYOUT)
        save_bundle(cache, bundle)
        bundle = load_bundle(cache)  # evaluate exactly what was persisted
    return bundle, parts, train_seconds


def test_quantizer_oracle():
    rng = np.random.default_rng(2024)
    t0 = time.time()
    for case in range(1000):
        L = int(rng.integers(1, 5))
        K = int(rng.integers(1, 7))
        d = int(rng.integers(1, 9))
        C = int(rng.integers(1, 33))
        latent = rng.normal(size=(L, K, d))
        books = [rng.normal(size=(C, d)) for _ in range(K)]
        got_q, got_i = quantize_nearest_array(latent, books)
        for t in range(L):
            for k in range(K):
                dists = ((books[k] - latent[t, k]) ** 2).sum(axis=1)
                best = int(np.argmin(dists))
                assert got_i[t, k] == best, f"case {case} mismatch"
                assert (got_q[t, k] == books[k][best]).all()
    elapsed = time.time() - t0
    assert elapsed < 5.0, f"quantizer oracle took {elapsed:.1f}s (budget 5s)"
    report(f"PASS quantizer oracle: 1000 cases exact in {elapsed:.2f}s")


def test_gradient_checks():
    t0 = time.time()
    torch.manual_seed(99)
    codec = MotionCodec(
        replace(toy_profile().vqvae, width=48, codebook_size=8, code_dim=8),
        SKEL, LAYOUT,
    )
    codec.eval()
    rng = np.random.default_rng(7)

    for _ in range(20):  # decode_full
        base = rng.normal(size=(4, 6, 8))
        coord = (int(rng.integers(16)), int(rng.integers(LAYOUT.feature_dim)))
        entry = tuple(int(rng.integers(s)) for s in base.shape)
        z = torch.tensor(base, requires_grad=True)
        codec.decode(z[None])[0][coord].backward()
        analytic = z.grad[entry].item()
        h = 1e-4
        zp, zm = base.copy(), base.copy()
        zp[entry] += h
        zm[entry] -= h
        with torch.no_grad():
            fp = codec.decode(torch.tensor(zp)[None])[0][coord].item()
            fm = codec.decode(torch.tensor(zm)[None])[0][coord].item()
        numeric = (fp - fm) / (2 * h)
        scale = max(abs(numeric), abs(analytic), 1e-8)
        assert abs(numeric - analytic) / scale < 1e-4

    from tlc.dataset import NormStats

    stats = NormStats(np.zeros(LAYOUT.feature_dim), np.ones(LAYOUT.feature_dim))
    for _ in range(20):  # objective_and_gradient
        latent = rng.normal(size=(4, 6, 8))
        wp = rng.normal(size=(16, 6, 3))
        mask = rng.random((16, 6)) < 0.5
        mask[0, 0] = True
        traj = PartialTrajectory(wp, mask)
        _, grad = objective_and_gradient(latent, traj, codec, stats)
        entry = tuple(int(rng.integers(s)) for s in latent.shape)
        h = 1e-4
        lp, lm = latent.copy(), latent.copy()
        lp[entry] += h
        lm[entry] -= h
        fp, _ = objective_and_gradient(lp, traj, codec, stats)
        fm, _ = objective_and_gradient(lm, traj, codec, stats)
        numeric = (fp - fm) / (2 * h)
        scale = max(abs(numeric), abs(grad[entry]), 1e-10)
        assert abs(numeric - grad[entry]) / scale < 1e-4
    elapsed = time.time() - t0
    assert elapsed < 60.0, f"gradient checks took {elapsed:.1f}s (budget 60s)"
    report(f"PASS gradient checks: 20+20 instances, rel err < 1e-4, {elapsed:.1f}s")


def test_linear_decoder_refinement():
    from tests.test_refine import _linear_problem, normal_equations_objective

    t0 = time.time()
    worst = 0.0
    for seed in range(10):
        codec, stats, traj, q0 = _linear_problem(seed)
        res = refine_latent(
            q0, traj, codec, stats, OptimizeConfig(tolerance=1e-12, max_iterations=400)
        )
        final, _ = objective_and_gradient(res.latent, traj, codec, stats)
        oracle = normal_equations_objective(codec, traj, stats)
        assert final < 1e-8, f"seed {seed}: objective {final:.2e}"
        assert final <= oracle + 1e-8
        worst = max(worst, final)
    elapsed = time.time() - t0
    assert elapsed < 30.0, f"linear refinement took {elapsed:.1f}s (budget 30s)"
    report(f"PASS linear-decoder refinement: 10 seeds, worst objective {worst:.2e}, {elapsed:.1f}s")


def test_masking_exactness():
    for T in (8, 64, 196):
        full = PartialTrajectory(
            np.zeros((T, 6, 3)), np.ones((T, 6), dtype=bool)
        )
        for p in np.arange(0, 11) / 10.0:
            out = continuous_trajectory_mask(full, float(p), sample_rng(1, T, int(p * 10)))
            hidden = (~out.mask).sum(axis=0)
            assert (hidden == int(np.floor(p * T))).all(), (T, p)
    # joint-level: exactly the drawn groups
    for seed in range(40):
        full = PartialTrajectory(np.zeros((20, 6, 3)), np.ones((20, 6), dtype=bool))
        out = joint_level_mask(full, np.random.default_rng(seed))
        replay = np.random.default_rng(seed)
        k = int(replay.integers(0, 7))
        chosen = set(replay.choice(6, size=k, replace=False).tolist()) if k else set()
        for g in range(6):
            assert out.mask[:, g].all() != (g in chosen)
    report("PASS masking exactness: floor(p*T) counts on the full grid; joint masks match draws")


def test_metric_oracles():
    # fixture: 1 track, 10 keyframes, one 0.6 m deviation
    wp = np.zeros((10, 6, 3))
    mask = np.zeros((10, 6), dtype=bool)
    mask[:, 2] = True
    pos = wp.copy()
    pos[4, 2, 0] = 0.6
    rep = control_accuracy(pos, PartialTrajectory(wp, mask))
    assert abs(rep.traj_err_fraction - 1.0) < 1e-9
    assert abs(rep.loc_err_fraction - 0.1) < 1e-9
    assert abs(rep.avg_err_cm - 6.0) < 1e-9
    # boundary fixture: all deviations 0.49 m at threshold 0.5
    pos2 = np.zeros((5, 6, 3))
    mask2 = np.zeros((5, 6), dtype=bool)
    mask2[:, 0] = True
    pos2[:, 0, 2] = 0.49
    rep2 = control_accuracy(pos2, PartialTrajectory(np.zeros((5, 6, 3)), mask2))
    assert abs(rep2.traj_err_fraction) < 1e-9
    assert abs(rep2.loc_err_fraction) < 1e-9
    assert abs(rep2.avg_err_cm - 49.0) < 1e-9
    # diversity: two motions at distance 3
    a = np.zeros((4, 5))
    b = np.zeros((4, 5))
    b[0, 0] = 3.0
    assert abs(diversity([a, b], np.random.default_rng(0)) - 3.0) < 1e-9
    # multimodality: one group of two at distance 2
    c = np.zeros((4, 3))
    d = c.copy()
    d[0, 0] = 2.0
    assert abs(multimodality([[c, d]]) - 2.0) < 1e-9
    # FID proxy on N(0,1) vs N(1,1), n = 1e5 -> 1.0 +/- 0.05
    rng = np.random.default_rng(5)
    fid = fid_proxy(rng.normal(0, 1, 100_000), rng.normal(1, 1, 100_000))
    assert abs(fid - 1.0) < 0.05, f"fid {fid:.4f}"
    report(f"PASS metric oracles: fixtures to 1e-9; fid={fid:.4f} within 1.0±0.05")


def test_desk_scale_end_to_end(toy_models):
    bundle, parts, train_seconds = toy_models
    codec, mtt, stats = bundle.codec, bundle.mtt, bundle.stats
    if train_seconds is not None:
        assert train_seconds < 1800, f"training took {train_seconds:.0f}s (budget 30 min)"
        report(f"INFO toy training took {train_seconds:.0f}s")

    # (a) train reconstruction MPJPE < 5 cm
    mpjpe = reconstruction_mpjpe(codec, parts["train"][:60], stats)
    assert mpjpe < 0.05, f"train MPJPE {100 * mpjpe:.2f} cm"
    report(f"PASS (a) VQ-VAE train MPJPE {100 * mpjpe:.2f} cm < 5 cm")

    # decode gradient check must also hold on the trained decoder
    rng = np.random.default_rng(17)
    for _ in range(5):
        base = rng.normal(size=(16, codec.num_codebooks, codec.code_dim))
        coord = (int(rng.integers(64)), int(rng.integers(LAYOUT.feature_dim)))
        entry = tuple(int(rng.integers(s)) for s in base.shape)
        z = torch.tensor(base, requires_grad=True)
        codec.decode(z[None])[0][coord].backward()
        analytic = z.grad[entry].item()
        h = 1e-4
        zp, zm = base.copy(), base.copy()
        zp[entry] += h
        zm[entry] -= h
        with torch.no_grad():
            fp = codec.decode(torch.tensor(zp)[None])[0][coord].item()
            fm = codec.decode(torch.tensor(zm)[None])[0][coord].item()
        numeric = (fp - fm) / (2 * h)
        assert abs(numeric - analytic) / max(abs(numeric), abs(analytic), 1e-8) < 1e-4

    # (b) full-trajectory refinement on held-out samples at tolerance 1e-6
    test_samples = parts["test"]
    key_idx = SKEL.key_joint_indices()
    improved = 0
    refined_errs, unrefined_errs = [], []
    opt = OptimizeConfig(tolerance=1e-6)
    for i, s in enumerate(test_samples):
        cond = build_conditioning(s, list(range(6)), 0.0, sample_rng(0, 8, 0, 0, i))
        gen = generate_motion(
            s.text, cond, codec, mtt, stats, seed=1000 * i,
            opt_config=opt, num_samples=1, fps=s.motion.fps,
        )[0]
        pos_r = recover_global_positions(gen.clip, LAYOUT)[:, key_idx]
        pos_u = recover_global_positions(gen.unrefined_clip, LAYOUT)[:, key_idx]
        acc = ControlErrorAccumulator()
        acc.add(pos_r, cond)
        r = acc.report().avg_err_cm
        acc = ControlErrorAccumulator()
        acc.add(pos_u, cond)
        u = acc.report().avg_err_cm
        refined_errs.append(r)
        unrefined_errs.append(u)
        improved += int(r <= u)
    frac = improved / len(test_samples)
    mean_refined = float(np.mean(refined_errs))
    assert frac >= 0.95, f"refinement improved only {improved}/{len(test_samples)}"
    assert mean_refined < 5.0, f"mean refined avg err {mean_refined:.2f} cm"
    report(
        f"PASS (b) refined <= unrefined on {improved}/{len(test_samples)}; "
        f"mean refined {mean_refined:.2f} cm (unrefined {np.mean(unrefined_errs):.2f} cm)"
    )

    # (c) tolerance sweep: avg err non-increasing, runtime non-decreasing
    sweep = []
    for tol in (1e-4, 1e-5, 1e-6):
        row = evaluate_condition(
            codec, mtt, stats, test_samples[:8], "all", 0.0,
            OptimizeConfig(tolerance=tol), seed=0,
        )
        sweep.append(row)
    errs = [r.avg_err_cm for r in sweep]
    times = [r.seconds_per_batch for r in sweep]
    assert errs[0] >= errs[1] >= errs[2], f"avg err not monotone: {errs}"
    assert times[0] <= times[1] <= times[2], f"runtime not monotone: {times}"
    report(
        "PASS (c) tolerance sweep errs "
        + " >= ".join(f"{e:.3f}" for e in errs)
        + " cm; runtimes "
        + " <= ".join(f"{t:.1f}" for t in times)
        + " s"
    )

    # (d) inference mask-rate sweep degrades gracefully (vs full ground truth)
    rows = [
        evaluate_condition(
            codec, mtt, stats, test_samples[:8], "all", rate,
            OptimizeConfig(tolerance=1e-6), seed=0,
        )
        for rate in (0.0, 0.25, 0.5, 0.75)
    ]
    fulls = [r.avg_err_full_cm for r in rows]
    for a, b in zip(fulls, fulls[1:]):
        slack = max(0.10 * a, 0.25)  # "within noise": 10% relative or 0.25 cm
        assert b >= a - slack, f"mask sweep not graceful: {fulls}"
    report("PASS (d) mask-rate sweep avg err (vs full truth): "
           + " -> ".join(f"{e:.2f}" for e in fulls) + " cm")

    # (e) MModality strictly positive, increasing from 0% to 75% root masking
    mm = mmodality_by_mask_rate(
        codec, mtt, stats, test_samples[:8], (0.0, 0.25, 0.5, 0.75),
        seed=0, samples_per_input=10,
    )
    values = [mm[r] for r in (0.0, 0.25, 0.5, 0.75)]
    assert all(v > 0 for v in values), f"mmodality not strictly positive: {values}"
    assert values[-1] > values[0], f"mmodality did not increase: {values}"
    report("PASS (e) MModality " + " -> ".join(f"{v:.3f}" for v in values))


def test_ablation_harness(toy_models):
    bundle, parts, _ = toy_models
    cfg = toy_profile()
    # scores are not asserted, so the unsplit side trains briefly
    cfg.vqvae = replace(cfg.vqvae, epochs=30)
    cfg.mtt = replace(cfg.mtt, epochs=20)
    cfg.eval = replace(cfg.eval, num_eval_samples=4)
    cfg.optimize = replace(cfg.optimize, tolerance=1e-4, max_iterations=100)
    out = run_ablation(
        cfg, parts["train"], bundle.stats, parts["test"], seed=0,
        part_codec=bundle.codec, part_mtt=bundle.mtt,
    )
    assert out["latent_width"] == 6 * 32
    assert out["part_group_independent"] is True
    assert out["unsplit_group_independent"] is False
    variants = {row.variant for row in out["rows"]}
    assert variants == {"part", "unsplit"}
    report(
        f"PASS ablation: both rows reported at latent width {out['latent_width']}; "
        "group independence holds only for the part-based codec"
    )


def test_ik_ablation(toy_models):
    bundle, parts, _ = toy_models
    rep = ik_vs_latent_report(
        bundle.codec, bundle.mtt, bundle.stats, parts["test"][:6], seed=0,
        opt=OptimizeConfig(tolerance=1e-6, max_iterations=200), mask_rate=0.5,
    )
    assert rep["ik_unspecified_frames_bit_identical"] is True
    assert rep["latent_moves_unspecified_frames"] is True
    assert rep["ik_complement_drift_cm"] == 0.0
    assert rep["latent_complement_drift_cm"] > 0.0
    report(
        f"PASS IK ablation: latent complement drift {rep['latent_complement_drift_cm']:.2f} cm, "
        f"IK drift {rep['ik_complement_drift_cm']:.2f} cm (bit-identical unspecified frames)"
    )


def test_service_determinism(toy_models, tmp_path_factory):
    from fastapi.testclient import TestClient

    from tlc.service import create_app

    bundle, parts, _ = toy_models
    model_dir = tmp_path_factory.mktemp("acc-model")
    save_bundle(model_dir, bundle)
    app = create_app(model_dir)
    request = {
        "text": "a person walks forward slowly",
        "trajectory": {
            "length": 32,
            "controls": [
                {
                    "joint_group": "root",
                    "waypoints": [
                        {"frame": 0, "position": [0.0, 0.92, 0.0]},
                        {"frame": 15, "position": [0.7, 0.92, 0.0]},
                        {"frame": 31, "position": [1.4, 0.92, 0.0]},
                    ],
                }
            ],
        },
        "seed": 7,
        "num_samples": 2,
        "optimize": {"tolerance": 1e-6, "max_iterations": 300},
    }
    with TestClient(app) as client:
        blobs = []
        for _ in range(2):
            job_id = client.post("/api/v1/jobs", json=request).json()["id"]
            while True:
                snap = client.get(f"/api/v1/jobs/{job_id}").json()
                if snap["status"] in ("done", "error", "cancelled"):
                    break
                time.sleep(0.1)
            assert snap["status"] == "done", snap.get("error")
            blobs.append(json.dumps(snap["result"]["motions"], sort_keys=True))
    assert blobs[0] == blobs[1], "identical submissions returned different motion JSON"
    report("PASS service determinism: identical request+seed gave byte-identical motion JSON")
