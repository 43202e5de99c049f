"""The eleven acceptance criteria, each at its stated tolerance.

Run `pytest tests/test_acceptance.py -v`; the terminal summary prints one
PASS/FAIL line per criterion.
"""

import os
import subprocess
import sys
import time

import numpy as np
import pytest
from threadpoolctl import threadpool_limits

from wavesfnet import gradsuite
from wavesfnet.autodiff import ParameterStore, Tensor
from wavesfnet.autodiff import functional as F
from wavesfnet.config import PRESETS, VARIANTS, ModelConfig, RunConfig, parse_run_config
from wavesfnet.data import generate_moving_shapes
from wavesfnet.layers import Mode
from wavesfnet.metrics import annulus_counts, pixel_errors, rapsd, ssim
from wavesfnet.model import WaveSFNet, psi_census, variant_inventory
from wavesfnet.train import dataset_mse, train_loop
from wavesfnet.translator import TDI, STBlock, pack, unpack
from wavesfnet.wavelet import haar_dwt2, haar_idwt2

MICRO = ModelConfig(n_s=1, n_t=2, c_s=16, c_z=8, channels=1, height=16, width=16, t_in=4, t_out=4)


def corpus(n=50, seed=0):
    """Random (C, H, W) tensors with even extents up to 64 and C up to 8."""
    rng = np.random.default_rng(seed)
    for _ in range(n):
        c = int(rng.integers(1, 9))
        h, w = (2 * int(rng.integers(1, 33)) for _ in range(2))
        yield rng.standard_normal((c, h, w))


@pytest.mark.criterion(1, "perfect reconstruction")
def test_perfect_reconstruction():
    start = time.perf_counter()
    for x in corpus():
        for dtype, tol in ((np.float32, 1e-5), (np.float64, 1e-12)):
            xt = x.astype(dtype)
            back = haar_idwt2(haar_dwt2(Tensor(xt))).data
            assert back.dtype == dtype
            assert np.max(np.abs(back - xt)) <= tol
    assert time.perf_counter() - start < 10.0


@pytest.mark.criterion(2, "orthonormal energy")
def test_orthonormal_energy():
    for x in corpus():
        energy = float(np.sum(x ** 2))
        assert abs(haar_dwt2(Tensor(x)).energy() - energy) <= 1e-4 * energy


@pytest.mark.criterion(3, "FFT correctness")
def test_fft_correctness():
    for x in corpus(seed=1):
        H, W = x.shape[-2:]
        x32 = x.astype(np.float32)
        assert np.max(np.abs(F.irfft2(F.rfft2(Tensor(x32)), W).data - x32)) <= 1e-5
        spec = np.fft.fft2(x)
        energy = float(np.sum(x ** 2))
        assert abs(np.sum(np.abs(spec) ** 2) / (H * W) - energy) <= 1e-4 * energy
        half = F.rfft2(Tensor(x)).data
        assert np.allclose(half[..., 0] + 1j * half[..., 1], spec[..., :W // 2 + 1], atol=1e-9)
    c = F.rfft2(Tensor(np.full((1, 6, 10), 0.75))).data
    assert c[0, 0, 0, 0] == 0.75 * 60 and c[0, 0, 0, 1] == 0
    c[0, 0, 0] = 0
    assert not np.any(c)


@pytest.mark.criterion(4, "gradient suite")
def test_gradient_suite():
    start = time.perf_counter()
    names = ["conv2d", "activations", "fs_block", "st_context", "gated_channel_interaction",
             "tdi_inject", "model_loss"]
    errors = {name: gradsuite.SUITES[name]() for name in names}
    for name, err in errors.items():
        assert err <= 1e-4, f"{name}: {err:.3e}"
    assert time.perf_counter() - start < 120.0


@pytest.mark.criterion(5, "identity gates")
def test_identity_gates():
    rng = np.random.default_rng(0)
    tdi = TDI(ParameterStore(np.float64), "tdi", 3)
    z = rng.standard_normal((2, 4, 3, 6, 6))
    assert np.array_equal(tdi(Tensor(z)).data, z)

    store = ParameterStore(np.float64, seed=1)
    block = STBlock(store, "st", 6, 6, 6, Mode())
    gradsuite.randomize(store, rng)
    x = rng.standard_normal((2, 6, 6, 6))
    store["st.scale_a"].data[...] = 0
    assert np.array_equal(block.context(Tensor(x)).data, x)
    store["st.scale_b"].data[...] = 0
    assert np.array_equal(block.mixing(Tensor(x)).data, x)

    freq_store = ParameterStore(np.float64, seed=2)
    freq = STBlock(freq_store, "st", 6, 6, 6, Mode(), spatial=False)
    gradsuite.randomize(freq_store, rng)
    freq_store["st.psi"].data[...] = 0
    freq_store["st.psi"].data[..., 0] = 1
    y = freq.norm1(Tensor(x))
    assert np.max(np.abs(freq.context_branch(y).data - y.data)) <= 1e-5

    xt = Tensor(x)
    assert F.drop_path(xt, 0.0, True, np.random.default_rng(0)).data.tobytes() == xt.data.tobytes()
    packed = Tensor(rng.standard_normal((2, 4, 5, 3, 3)).astype(np.float32))
    assert unpack(pack(packed), 5).data.tobytes() == packed.data.tobytes()


@pytest.mark.criterion(6, "overfit benchmark")
def test_overfit_benchmark():
    data = generate_moving_shapes(0, 16, MICRO.t_in + MICRO.t_out, 16, 16)
    cfg = RunConfig(model=MICRO, lr=1e-3, steps=300, batch_size=16, schedule="constant", eval_every=0)
    start = time.perf_counter()
    with threadpool_limits(limits=1):
        model = WaveSFNet(MICRO)
        initial = dataset_mse(model, data)
        train_loop(model, data, cfg)
        final = dataset_mse(model, data)
    elapsed = time.perf_counter() - start
    print(f"overfit: initial {initial:.5f} final {final:.5f} ratio {final / initial:.4f} in {elapsed:.1f}s")
    assert final <= 0.1 * initial
    assert elapsed < 300.0


@pytest.mark.criterion(7, "ablation harness")
def test_ablation_harness():
    data = generate_moving_shapes(1, 16, MICRO.t_in + MICRO.t_out, 16, 16)
    cfg = RunConfig(model=MICRO, lr=1e-3, steps=50, batch_size=4, eval_every=0)
    counts = {}
    for variant in VARIANTS:
        model = WaveSFNet(MICRO.replace(variant=variant))
        result = train_loop(model, data, cfg)
        assert len(result.losses) == 50 and np.all(np.isfinite(result.losses))
        assert all(np.all(np.isfinite(t.data)) for _, t in model.params.items())
        inv = variant_inventory(model)
        counts[variant] = inv["params"]
        if variant == "spatial_only":
            assert inv["complex_params"] == 0
        if variant == "frequency_only":
            assert inv["kernels_9x9"] == 0
        if variant == "no_tdi":
            assert not inv["has_tdi_gate"]
    assert counts["full"] - counts["spatial_only"] == psi_census(MICRO)


@pytest.mark.criterion(8, "rollout rule")
def test_rollout_rule():
    for t_in, t_out, passes in ((10, 10, 1), (12, 4, 1), (10, 20, 2), (4, 9, 3), (5, 3, 1)):
        cfg = ModelConfig(n_s=1, n_t=1, c_s=2, c_z=1, height=4, width=4, t_in=t_in, t_out=t_out)
        model = WaveSFNet(cfg)
        x = np.random.default_rng(t_in).random((1, t_in, 1, 4, 4)).astype(np.float32)
        out = model.predict(Tensor(x), t_out).data
        assert out.shape[1] == t_out and model.forward_calls == passes
        model.forward_calls = 0
        chunks, current = [], Tensor(x)
        for _ in range(passes):
            current = model.forward(current)
            chunks.append(current.data)
        assert np.array_equal(out, np.concatenate(chunks, axis=1)[:, :t_out])


@pytest.mark.criterion(9, "metric sanity")
def test_metric_sanity():
    rng = np.random.default_rng(0)
    x, y = rng.random((3, 20, 20)), rng.random((3, 20, 20))
    assert abs(ssim(x, x) - 1.0) <= 1e-6
    mse, mae, rmse = pixel_errors(x, y)
    assert rmse ** 2 == pytest.approx(mse, rel=1e-12)
    for offset in (0.5, -0.25, 0.1):
        mse, mae, _ = pixel_errors(x + offset, x)
        assert mse == pytest.approx(offset ** 2, rel=1e-9) and mae == pytest.approx(abs(offset), rel=1e-9)
    n = 64
    counts = annulus_counts(n, n)
    for k in (1, 5, 13, 31):
        tone = np.cos(2 * np.pi * k * np.arange(n) / n)[None, :].repeat(n, axis=0)
        power = rapsd(tone) * counts
        assert power[k - 1] >= 0.999 * power.sum()


@pytest.mark.criterion(10, "determinism")
def test_determinism(tmp_path):
    config = tmp_path / "run.cfg"
    config.write_text("n_s = 1\nn_t = 1\nc_s = 4\nc_z = 2\nheight = 16\nwidth = 16\nt_in = 2\nt_out = 2\n"
                      "steps = 6\nbatch_size = 4\neval_every = 2\nn_sequences = 8\nn_eval_sequences = 4\n")
    env = dict(os.environ, WAVESF_THREADS="1")
    outputs = []
    for run in ("a", "b"):
        out = tmp_path / run
        subprocess.run([sys.executable, "-m", "wavesfnet", "train", "--config", str(config), "--out", str(out)],
                       check=True, env=env, capture_output=True)
        outputs.append((out / "metrics.csv").read_bytes())
    assert outputs[0] == outputs[1] and outputs[0].count(b"\n") == 4


@pytest.mark.criterion(11, "config fidelity")
def test_config_fidelity():
    expected = {"mmnist": 72, "taxibj": 48, "weather_t2m": 22, "weather_tcc": 22, "weather_uv10": 22,
                "weather_r": 22, "weather_mv": 66}
    assert set(PRESETS) == set(expected)
    for name, c_z in expected.items():
        mcfg = parse_run_config(f"preset = {name}").model
        assert mcfg.c_z == c_z and mcfg.c_t == PRESETS[name].c_t == c_z * mcfg.t_in
        model = WaveSFNet(mcfg)
        x = np.random.default_rng(0).random((1, mcfg.t_in) + mcfg.frame_shape).astype(np.float32)
        out = model.predict_numpy(x, mcfg.t_out)
        assert out.shape == (1, mcfg.t_out) + mcfg.frame_shape and np.all(np.isfinite(out))
