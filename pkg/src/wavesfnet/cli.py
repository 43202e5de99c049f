"""Command-line entry point: train, eval, predict, ablate, spectrum, gradcheck, info."""

from __future__ import annotations

import argparse
import csv
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import gradsuite
from .config import PRESETS, VARIANTS, ConfigError, RunConfig, load_run_config
from .data import WsftError, generate_moving_shapes, load_split, load_tensor, save_tensor
from .metrics import mean_rapsd, write_metric_rows, write_rapsd_csv
from .model import WaveSFNet, count_params_flops
from .train import CheckpointError, TrainingError, evaluate_model, load_checkpoint, save_checkpoint, train_loop

log = logging.getLogger("wavesfnet")


def _limit_threads():
    try:
        n = int(os.environ.get("WAVESF_THREADS", "1"))
    except ValueError:
        raise ConfigError("WAVESF_THREADS must be an integer") from None
    from threadpoolctl import threadpool_limits

    return threadpool_limits(limits=max(1, n))


# -- data --------------------------------------------------------------------


def _datasets(cfg: RunConfig) -> tuple[np.ndarray, np.ndarray]:
    m = cfg.model
    if cfg.data_dir is not None:
        train = load_split(cfg.data_dir, "train")
        val_path = Path(cfg.data_dir) / "val.wsft"
        val = load_split(cfg.data_dir, "val") if val_path.exists() else train
        for name, arr in (("train", train), ("val", val)):
            if arr.shape[2:] != m.frame_shape:
                raise ConfigError(f"{name}.wsft frames {arr.shape[2:]} do not match config {m.frame_shape}")
        return train, val
    if m.channels != 1:
        raise ConfigError("the synthetic generator produces 1-channel frames; set channels = 1 or data_dir")
    T = m.t_in + m.t_out
    gen = dict(T=T, H=m.height, W=m.width, n_objects=cfg.n_objects, object_size=cfg.object_size)
    train = generate_moving_shapes(cfg.data_seed, cfg.n_sequences, **gen)
    val = generate_moving_shapes(cfg.data_seed + 1, cfg.n_eval_sequences, **gen)
    return train, val


def _test_split(cfg: RunConfig) -> np.ndarray:
    if cfg.data_dir is not None and (Path(cfg.data_dir) / "test.wsft").exists():
        return load_split(cfg.data_dir, "test")
    return _datasets(cfg)[1]


def _model_from(cfg: RunConfig, checkpoint: str | None) -> tuple[WaveSFNet, int]:
    model = WaveSFNet(cfg.model)
    if checkpoint is None:
        return model, 0
    ckpt = load_checkpoint(checkpoint, expect=cfg.model)
    model.params.load_state_dict(ckpt.params)
    return model, ckpt.step


def _out_dir(cfg: RunConfig, override: str | None) -> Path:
    out = Path(override or cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def write_pgm(path: Path, frame: np.ndarray) -> None:
    """8-bit binary PGM (P5) from a [0, 1] float frame."""
    img = np.clip(np.rint(np.asarray(frame, dtype=np.float64) * 255.0), 0, 255).astype(np.uint8)
    h, w = img.shape
    path.write_bytes(f"P5\n{w} {h}\n255\n".encode("ascii") + img.tobytes())


# -- commands ----------------------------------------------------------------


def cmd_train(args) -> int:
    cfg = load_run_config(args.config)
    out = _out_dir(cfg, args.out)
    train, val = _datasets(cfg)
    model = WaveSFNet(cfg.model)
    resume = load_checkpoint(args.resume, expect=cfg.model) if args.resume else None
    result = train_loop(model, train, cfg, eval_data=val, resume=resume)
    write_metric_rows(out / "metrics.csv", result.eval_rows)
    start = resume.step if resume else 0
    with open(out / "losses.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["step", "loss", "lr"])
        for k, (loss, lr) in enumerate(zip(result.losses, result.lrs), start=start):
            w.writerow([k, repr(loss), repr(lr)])
    save_checkpoint(out / "checkpoint.wsfc", result.checkpoint)
    print(f"trained {len(result.losses)} steps; final loss {result.losses[-1]:.6g}" if result.losses
          else "nothing to train")
    print(f"artifacts in {out}")
    return 0


def cmd_eval(args) -> int:
    cfg = load_run_config(args.config)
    out = _out_dir(cfg, args.out)
    model, step = _model_from(cfg, args.checkpoint)
    report = evaluate_model(model, _test_split(cfg), cfg.model.t_in, cfg.model.t_out, cfg.batch_size)
    write_metric_rows(out / "eval.csv", [report.row(step)])
    print(f"mse={report.mse:.6g} mae={report.mae:.6g} rmse={report.rmse:.6g} "
          f"psnr={report.psnr:.4f} ssim={report.ssim:.4f}")
    return 0


def cmd_predict(args) -> int:
    cfg = load_run_config(args.config)
    out = _out_dir(cfg, args.out)
    model, _ = _model_from(cfg, args.checkpoint)
    t_out = args.t_out or cfg.model.t_out
    if args.input:
        seqs = load_tensor(args.input).astype(np.float32)
        inputs = seqs[:, :cfg.model.t_in]
    else:
        inputs = _test_split(cfg)[:, :cfg.model.t_in]
    pred = model.predict_numpy(inputs, t_out, cfg.batch_size)
    save_tensor(out / "predictions.wsft", pred.astype(np.float32))
    if args.pgm:
        frames_dir = out / "frames"
        frames_dir.mkdir(exist_ok=True)
        for n, seq in enumerate(pred):
            for t, frame in enumerate(seq):
                for c, chan in enumerate(frame):
                    write_pgm(frames_dir / f"seq{n:04d}_t{t:03d}_c{c}.pgm", chan)
    print(f"wrote {pred.shape} predictions to {out / 'predictions.wsft'}")
    return 0


def cmd_spectrum(args) -> int:
    cfg = load_run_config(args.config)
    out = _out_dir(cfg, args.out)
    model, _ = _model_from(cfg, args.checkpoint)
    data = _test_split(cfg)
    m = cfg.model
    pred = model.predict_numpy(data[:, :m.t_in], m.t_out, cfg.batch_size)
    truth_last = data[:, m.t_in + m.t_out - 1]
    write_rapsd_csv(out / "rapsd_truth.csv", mean_rapsd(truth_last))
    write_rapsd_csv(out / "rapsd_pred.csv", mean_rapsd(pred[:, -1]))
    print(f"wrote RAPSD for {len(data)} sequences to {out}")
    return 0


def cmd_ablate(args) -> int:
    cfg = load_run_config(args.config)
    out = _out_dir(cfg, args.out)
    train, val = _datasets(cfg)
    rows = []
    for variant in VARIANTS:
        model = WaveSFNet(cfg.model.replace(variant=variant))
        train_loop(model, train, cfg)
        report = evaluate_model(model, val, cfg.model.t_in, cfg.model.t_out, cfg.batch_size)
        rows.append([variant, model.parameter_count(), report.mse, report.mae, report.ssim])
        print(f"{variant:15s} params={model.parameter_count():9d} mse={report.mse:.6g}")
    with open(out / "ablation.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["variant", "params", "mse", "mae", "ssim"])
        for variant, params, mse, mae, ssim in rows:
            w.writerow([variant, params, repr(mse), repr(mae), repr(ssim)])
    return 0


def cmd_gradcheck(args) -> int:
    names = args.suite or list(gradsuite.SUITES)
    unknown = [n for n in names if n not in gradsuite.SUITES]
    if unknown:
        print(f"unknown suite(s): {', '.join(unknown)}", file=sys.stderr)
        return 2
    failed = False
    for name in names:
        err = gradsuite.SUITES[name]()
        ok = err <= args.tol
        failed |= not ok
        print(f"{'PASS' if ok else 'FAIL'} {name}: max relative error {err:.3e}")
    return 1 if failed else 0


def cmd_info(args) -> int:
    if args.preset:
        mcfg = PRESETS[args.preset].model_config()
    elif args.config:
        mcfg = load_run_config(args.config).model
    else:
        print("info needs --config or --preset", file=sys.stderr)
        return 2
    if args.variant:
        mcfg = mcfg.replace(variant=args.variant)
    params, macs = count_params_flops(mcfg)
    h, w = mcfg.latent_hw
    print(f"N_s={mcfg.n_s} N_t={mcfg.n_t} C_s={mcfg.c_s} C_z={mcfg.c_z} C_t={mcfg.c_t}")
    print(f"frame=(C={mcfg.channels}, H={mcfg.height}, W={mcfg.width}) latent=({h}, {w}) "
          f"T_in={mcfg.t_in} T_out={mcfg.t_out} variant={mcfg.variant}")
    print(f"params={params} ({params / 1e6:.3f} M)")
    print(f"macs={macs} ({macs / 1e9:.3f} G per sequence)")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="wavesfnet", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def with_config(name, fn, help_):
        p = sub.add_parser(name, help=help_)
        p.add_argument("--config", required=True, help="key = value run configuration")
        p.add_argument("--out", help="output directory (default: output_dir from the config)")
        p.set_defaults(func=fn)
        return p

    p = with_config("train", cmd_train, "train and write metrics.csv, losses.csv, checkpoint.wsfc")
    p.add_argument("--resume", help="checkpoint to continue from")
    p = with_config("eval", cmd_eval, "evaluate a checkpoint, write eval.csv")
    p.add_argument("--checkpoint")
    p = with_config("predict", cmd_predict, "write predictions.wsft (and PGM frames)")
    p.add_argument("--checkpoint")
    p.add_argument("--input", help="WSFT sequences (N, T, C, H, W); default: test split")
    p.add_argument("--t-out", type=int, help="prediction length (default: config t_out)")
    p.add_argument("--pgm", action="store_true", help="also dump 8-bit PGM frames")
    p = with_config("spectrum", cmd_spectrum, "RAPSD of last predicted vs true frame")
    p.add_argument("--checkpoint")
    with_config("ablate", cmd_ablate, "train all six variants, write ablation.csv")

    p = sub.add_parser("gradcheck", help="finite-difference gradient suites")
    p.add_argument("--suite", action="append", help="run only this suite (repeatable)")
    p.add_argument("--tol", type=float, default=gradsuite.TOLERANCE)
    p.set_defaults(func=cmd_gradcheck)

    p = sub.add_parser("info", help="parameter and MAC counts")
    p.add_argument("--config")
    p.add_argument("--preset", choices=sorted(PRESETS))
    p.add_argument("--variant", choices=VARIANTS)
    p.set_defaults(func=cmd_info)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        with _limit_threads():
            return args.func(args)
    except (ConfigError, CheckpointError, WsftError, TrainingError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
