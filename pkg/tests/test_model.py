import numpy as np
import pytest

from wavesfnet import gradsuite
from wavesfnet.autodiff import ParameterStore, ShapeError, Tensor
from wavesfnet.autodiff import functional as F
from wavesfnet.config import PRESETS, VARIANTS, ConfigError, ModelConfig, parse_run_config
from wavesfnet.layers import depthwise, pointwise
from wavesfnet.model import WaveSFNet, count_params_flops, psi_census, rollout_passes, variant_inventory
from wavesfnet.train import AdamState, adam_step

TINY = ModelConfig(n_s=1, n_t=1, c_s=4, c_z=2, height=8, width=8, t_in=2, t_out=2)


def frames(cfg, batch=1, seed=0, t=None):
    t = cfg.t_in if t is None else t
    return np.random.default_rng(seed).random((batch, t) + cfg.frame_shape).astype(np.float32)


# -- config and census ---------------------------------------------------------

def test_taxibj_latent_width():
    assert PRESETS["taxibj"].model_config().c_z == 48


def test_layer_parameter_formulas():
    s = ParameterStore()
    assert pointwise(s, "pw", 32, 48).weight.data.size + 48 == 1584
    dw = depthwise(s, "dw", 192, 9)
    assert dw.weight.data.size + dw.bias.data.size == 15744
    assert s.count() == 1584 + 15744


def test_bad_configs_rejected():
    with pytest.raises(ConfigError):
        ModelConfig(height=30, width=32, n_s=2)
    with pytest.raises(ConfigError):
        ModelConfig(variant="bogus")
    with pytest.raises(ConfigError):
        ModelConfig(c_z=0)


def test_same_seed_identical_parameters():
    a, b = WaveSFNet(TINY), WaveSFNet(TINY)
    for name, t in a.params.items():
        assert t.data.tobytes() == b.params[name].data.tobytes()
    c = WaveSFNet(TINY.replace(seed=1))
    assert not np.array_equal(a.params["encoder.stem.conv1.weight"].data,
                              c.params["encoder.stem.conv1.weight"].data)


@pytest.mark.parametrize("variant", VARIANTS)
def test_variant_census(variant):
    model = WaveSFNet(TINY.replace(variant=variant))
    inv = variant_inventory(model)
    full = WaveSFNet(TINY)
    if variant == "spatial_only":
        assert inv["complex_params"] == 0
        assert full.parameter_count() - model.parameter_count() == psi_census(TINY)
    if variant == "frequency_only":
        assert inv["kernels_9x9"] == 0
    if variant == "no_tdi":
        assert not inv["has_tdi_gate"]
    if variant == "full":
        assert inv["complex_params"] == psi_census(TINY) and inv["has_tdi_gate"]


def test_count_params_flops_positive_and_consistent():
    params, macs = count_params_flops(TINY)
    assert params == WaveSFNet(TINY).parameter_count() and macs > 0


# -- forward -------------------------------------------------------------------

def test_forward_shape_and_eval_determinism():
    model = WaveSFNet(TINY)
    x = frames(TINY, batch=3)
    a, b = model.forward(x).data, model.forward(x).data
    assert a.shape == x.shape and a.tobytes() == b.tobytes()


def test_forward_rejects_wrong_shape():
    model = WaveSFNet(TINY)
    with pytest.raises(ShapeError):
        model.forward(np.zeros((1, 3, 1, 8, 8), np.float32))


def test_digits_config_shape():
    cfg = PRESETS["mmnist"].model_config()
    model = WaveSFNet(cfg)
    x = frames(cfg, batch=2)
    assert model.forward(x).shape == (2, 10, 1, 64, 64)


def test_backward_gradient_census():
    """Every parameter gets a nonzero gradient, except the TDI kernel whose
    gate starts at zero; it gets one as soon as the gate has moved."""
    model = WaveSFNet(TINY.replace(n_t=2), dtype=np.float64)
    rng = np.random.default_rng(0)
    x = Tensor(rng.random((2, 2, 1, 8, 8)))
    y = rng.random((2, 2, 1, 8, 8))
    model.params.zero_grad()
    loss = F.mse_loss(model.forward(x), y)
    assert np.isfinite(loss.item())
    loss.backward()
    silent = [n for n in model.params.names() if not np.any(model.params.grad(n))]
    assert silent == ["translator.tdi.dw.weight"]

    grads = {n: model.params.grad(n) for n in model.params.names()}
    adam_step(dict(model.params.items()), grads, AdamState(), 1e-3)
    model.params.zero_grad()
    F.mse_loss(model.forward(x), y).backward()
    assert all(np.any(model.params.grad(n)) for n in model.params.names())


@pytest.mark.parametrize("variant", VARIANTS)
def test_model_loss_gradient(variant):
    assert gradsuite.check_model_loss(variant=variant) <= gradsuite.TOLERANCE


# -- rollout -------------------------------------------------------------------

@pytest.mark.parametrize("t_in,t_out,passes", [(10, 10, 1), (12, 4, 1), (10, 20, 2), (4, 9, 3), (3, 1, 1)])
def test_rollout_pass_count(t_in, t_out, passes):
    assert rollout_passes(t_in, t_out) == passes
    cfg = ModelConfig(n_s=1, n_t=1, c_s=2, c_z=1, height=4, width=4, t_in=t_in, t_out=t_out)
    model = WaveSFNet(cfg)
    out = model.predict(Tensor(frames(cfg)), t_out)
    assert out.shape[1] == t_out and model.forward_calls == passes


def test_truncation_is_first_frames_of_one_pass():
    cfg = ModelConfig(n_s=1, n_t=1, c_s=2, c_z=1, height=4, width=4, t_in=12, t_out=4)
    model = WaveSFNet(cfg)
    x = frames(cfg)
    full = model.forward(x).data
    assert np.array_equal(model.predict(Tensor(x)).data, full[:, :4])


def test_second_pass_consumes_first_output():
    cfg = ModelConfig(n_s=1, n_t=1, c_s=2, c_z=1, height=4, width=4, t_in=10, t_out=20)
    model = WaveSFNet(cfg)
    x = frames(cfg)
    first = model.forward(x)
    second = model.forward(first)
    out = model.predict(Tensor(x)).data
    assert np.array_equal(out[:, :10], first.data) and np.array_equal(out[:, 10:], second.data)


def test_predict_numpy_batches_match():
    model = WaveSFNet(TINY)
    x = frames(TINY, batch=5)
    assert np.allclose(model.predict_numpy(x, 3, batch_size=2), model.predict_numpy(x, 3, batch_size=5),
                       atol=1e-6)


def test_run_config_preset_parse():
    cfg = parse_run_config("preset = taxibj\nsteps = 3\n")
    assert cfg.model.n_t == 8 and cfg.model.c_t == 192 and cfg.lr == 1.5e-3
    assert cfg.schedule == "cosine" and cfg.epochs == 50 and cfg.steps == 3
