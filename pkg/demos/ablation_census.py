"""What each ablation variant removes, counted in parameters and MACs.

Run: python3 demos/ablation_census.py
"""

from wavesfnet.config import PRESETS, VARIANTS
from wavesfnet.model import WaveSFNet, psi_census, variant_inventory

cfg = PRESETS["taxibj"].model_config()
print(f"TaxiBJ-sized model, latent {cfg.latent_hw}, C_t = {cfg.c_t}")
print(f"{'variant':15s} {'params':>10s} {'complex':>9s} {'9x9 kernels':>12s} {'TDI gate':>9s} {'GMACs':>7s}")
for variant in VARIANTS:
    model = WaveSFNet(cfg.replace(variant=variant))
    inv = variant_inventory(model)
    print(f"{variant:15s} {inv['params']:10d} {inv['complex_params']:9d} {inv['kernels_9x9']:12d} "
          f"{str(inv['has_tdi_gate']):>9s} {model.macs() / 1e9:7.3f}")

print(f"\nspectral weights across all blocks: {psi_census(cfg)} real scalars,")
print("which is exactly the gap between full and spatial_only.")
