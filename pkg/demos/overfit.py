"""Train the micro model on sixteen bouncing-square clips until it memorises them.

Takes about a minute on one core.

Run: python3 demos/overfit.py
"""

from threadpoolctl import threadpool_limits

from wavesfnet.config import ModelConfig, RunConfig
from wavesfnet.data import generate_moving_shapes
from wavesfnet.model import WaveSFNet
from wavesfnet.train import dataset_mse, train_loop

micro = ModelConfig(n_s=1, n_t=2, c_s=16, c_z=8, height=16, width=16, t_in=4, t_out=4)
clips = generate_moving_shapes(seed=0, n_sequences=16, T=8, H=16, W=16)
print(f"{micro.c_t} packed latent channels, lit-pixel fraction {clips.mean():.3f}")

model = WaveSFNet(micro)
print(f"{model.parameter_count()} parameters, {model.macs() / 1e6:.2f} M MACs per clip")

run = RunConfig(model=micro, lr=1e-3, steps=300, batch_size=16, schedule="constant", eval_every=0)


def report(step, loss):
    if step % 50 == 0:
        print(f"step {step:3d}  loss {loss:.5f}")


with threadpool_limits(limits=1):
    before = dataset_mse(model, clips)
    train_loop(model, clips, run, on_step=report)
    after = dataset_mse(model, clips)
print(f"train MSE {before:.5f} -> {after:.5f} ({after / before:.1%} of the start)")
