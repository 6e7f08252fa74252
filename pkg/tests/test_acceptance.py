"""Acceptance gate: one test per criterion, each printing a pass/fail line.

Run with `pytest -s tests/test_acceptance.py` to see the per-criterion lines.
"""


import time

import numpy as np


from conftest import central_diff, fixture_pair, total_loss_at
from stylelook import cli, image
from stylelook.controls import LookSpec, ratio_from_u, scaled_ratio, scaled_u, validate
from stylelook.featurenet import NetConfig, forward, init_weights
from stylelook.finisher import DissolveCurve, FinishSpec, dissolve_weight, finish_frame
from stylelook.styleopt import (
    TransferParams,
    content_targets,
    gram,
    run_transfer,
    style_targets,
    total_loss_and_grad,
)


def announce(n, ok, detail=""):
    status = "PASS" if ok else "FAIL"
    print(f"{status}: criterion {n} {detail}")
    assert ok, f"criterion {n} failed: {detail}"


def test_criterion_1_gradient_correctness():
    t0 = time.perf_counter()
    cfg = NetConfig((6,), seed=3)
    w = init_weights(cfg)
    rng = np.random.default_rng(1001)
    content = rng.uniform(0, 1, (8, 8, 3))
    style = rng.uniform(0, 1, (8, 8, 3))
    x = rng.uniform(0.1, 0.9, (8, 8, 3))
    worst = 0.0
    for u in (-1.0, 0.0, 1.0):
        p = TransferParams(u=u, content_taps=("block1",), style_taps=("block1",))
        ct = content_targets(forward(content, w, cfg), p.content_taps)
        st = style_targets(forward(style, w, cfg), p.style_taps)
        _, g = total_loss_and_grad(x, ct, st, p, w, cfg)
        num = central_diff(lambda y: total_loss_at(y, ct, st, p, w, cfg), x, 1e-4)
        worst = max(worst, np.linalg.norm(num - g) / np.linalg.norm(num))
    elapsed = time.perf_counter() - t0
    announce(1, worst < 1e-3 and elapsed < 10.0,
             f"(gradient vs finite differences, worst rel L2 {worst:.2e}, {elapsed:.1f}s)")


def test_criterion_2_gram_oracle():
    rng = np.random.default_rng(1002)
    ok = True
    for _ in range(100):
        c = int(rng.integers(1, 5))
        hw = int(rng.integers(1, 17))
        a = rng.standard_normal((c, 1, hw))
        F = a.reshape(c, hw)
        oracle = np.zeros((c, c))
        for i in range(c):
            for j in range(c):
                acc = 0.0
                for k in range(hw):
                    acc += F[i, k] * F[j, k]
                oracle[i, j] = acc / hw
        ok = ok and np.array_equal(gram(a), oracle)
    announce(2, ok, "(gram bit-identical to brute-force double loop, 100 cases)")


def test_criterion_3_ratio_and_scaling_law():
    ok = ratio_from_u(0.0) == 1.0 and ratio_from_u(1.0) == 10.0
    ok = ok and scaled_ratio(10.0, 1024, 512) == 5.0
    rng = np.random.default_rng(1003)
    worst = 0.0
    for _ in range(1000):
        u = rng.uniform(-3, 3)
        fw = int(rng.integers(16, 4096))
        ww = int(rng.integers(16, 4096))
        lhs = ratio_from_u(scaled_u(u, fw, ww))
        rhs = scaled_ratio(ratio_from_u(u), fw, ww)
        worst = max(worst, abs(lhs - rhs) / rhs)
    announce(3, ok and worst < 1e-12,
             f"(10^u anchors, halving law, consistency worst rel {worst:.1e})")


def _fixture_runs(us):
    content, style = fixture_pair()
    cfg = NetConfig()
    results = {}
    for u in us:
        p = TransferParams(u=u, iterations=256)
        _, trace, _ = run_transfer(content, style, p, cfg)
        results[u] = trace
    return results


def test_criterion_4_monotone_unrealness():
    t0 = time.perf_counter()
    traces = _fixture_runs((-1.0, 0.0, 1.0))
    finals = [traces[u][-1] for u in (-1.0, 0.0, 1.0)]
    style_mono = finals[0].style_loss >= finals[1].style_loss >= finals[2].style_loss
    content_mono = finals[0].content_loss <= finals[1].content_loss <= finals[2].content_loss
    elapsed = time.perf_counter() - t0
    announce(4, style_mono and content_mono and elapsed < 180.0,
             f"(style {['%.3g' % f.style_loss for f in finals]} non-increasing, "
             f"content {['%.3g' % f.content_loss for f in finals]} non-decreasing, "
             f"{elapsed:.0f}s)")


def test_criterion_5_optimization_progress():
    trace = _fixture_runs((0.0,))[0.0]
    finite = all(
        np.isfinite(v)
        for r in trace
        for v in (r.content_loss, r.style_loss, r.total_loss)
    )
    ratio = trace[-1].total_loss / trace[0].total_loss
    announce(5, ratio < 0.9 and finite,
             f"(final/initial total loss {ratio:.3f} < 0.9, trace finite)")


def test_criterion_6_iteration_guardrails():
    warned = validate(LookSpec(iterations=100, working_width=512))
    clean = validate(LookSpec(iterations=256, working_width=512))
    ok = any(w.startswith("warning:low-iterations:") for w in warned) and clean == []
    announce(6, ok, "(iterations=100 warns, 256 is clean)")


def test_criterion_7_finishing_chain():
    rng = np.random.default_rng(1007)
    stylized = rng.uniform(0, 1, (16, 1024, 3))
    spec = FinishSpec(delivery_width=2048, denoise_sigma=1.0)
    finished = finish_frame(stylized, spec)
    plain = image.resize(stylized, 2048, finished.shape[0])
    hf_f = image.hf_energy(finished, 1.0)
    hf_p = image.hf_energy(plain, 1.0)
    announce(7, finished.shape[1] == 2048 and hf_f < hf_p,
             f"(width {finished.shape[1]}, hf {hf_f:.3g} < plain-upscale hf {hf_p:.3g})")


def test_criterion_8_dissolve_endpoints():
    curve = DissolveCurve(10, 20, 40, 50)
    rng = np.random.default_rng(1008)
    orig = rng.uniform(0, 1, (8, 16, 3))
    sty = rng.uniform(0, 1, (8, 16, 3))
    spec = FinishSpec(delivery_width=16, denoise_sigma=0.0, dissolve=curve)
    finished = finish_frame(sty, spec)
    at_zero = image.cross_dissolve(orig, finished, dissolve_weight(5, curve))
    at_one = image.cross_dissolve(orig, finished, dissolve_weight(30, curve))
    ok = (
        np.array_equal(at_zero, orig)
        and np.array_equal(at_one, finished)
        and dissolve_weight(15, curve) == 0.5
    )
    announce(8, ok, "(weight-0 equals original, weight-1 equals finished, midpoint 0.5)")


def test_criterion_9_determinism_and_pool_independence(tmp_path):
    content, style = fixture_pair(size=32, seed=5)
    rng = np.random.default_rng(1009)
    for i in range(4):
        frame = np.clip(content + 0.02 * rng.standard_normal(content.shape), 0, 1)
        image.save_image(frame, str(tmp_path / f"frame.{i:04d}.png"))
    image.save_image(style, str(tmp_path / "style.png"))
    mpath = tmp_path / "job.manifest"
    mpath.write_text(
        f"content = {tmp_path}/frame.%04d.png\n"
        f"style = {tmp_path}/style.png\n"
        f"out = {tmp_path}/a\n"
        "frames = 0..3\nblocks = 4,8\niterations = 8\n"
    )
    runs = {}
    for name, workers in (("a", 1), ("b", 1), ("c", 4)):
        rc = cli.main(["render", "--manifest", str(mpath),
                       "--out", str(tmp_path / name), "--workers", str(workers)])
        assert rc == 0
        runs[name] = [
            (tmp_path / name / f"stylized.{i:04d}.png").read_bytes() for i in range(4)
        ]
    ok = runs["a"] == runs["b"] == runs["c"]
    announce(9, ok, "(byte-identical across reruns and workers 1 vs 4)")


def test_criterion_10_desk_scale_runtime():
    content, style = fixture_pair()
    t0 = time.perf_counter()
    run_transfer(content, style, TransferParams(u=0.0, iterations=256), NetConfig())
    elapsed = time.perf_counter() - t0
    announce(10, elapsed < 60.0, f"(64x64, 256 iterations, default net: {elapsed:.1f}s)")
