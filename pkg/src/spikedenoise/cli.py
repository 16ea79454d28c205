"""Command-line front end: dataset synthesis, training, denoising,
evaluation, the closed-form demo, and the performance tables.

Exit codes: 0 success, 1 usage error, 2 data error, 3 numerical failure.
Every run writes its fully resolved configuration to the output directory,
so a run is reproducible from its echo plus the seed. A config file
(--config, JSON) supplies defaults; explicit flags override it.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import audio, dsp, expressivity, metrics, perf
from .audio import WavFormatError


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _resolve(args: argparse.Namespace, defaults: dict) -> dict:
    """Priority: explicit flag > config-file entry > built-in default."""
    config = {}
    if getattr(args, "config", None):
        path = Path(args.config)
        if not path.exists():
            raise FileNotFoundError(f"config file not found: {path}")
        config = json.loads(path.read_text())
    resolved = {}
    for key, default in defaults.items():
        flag_value = getattr(args, key, None)
        if flag_value is not None:
            resolved[key] = flag_value
        elif key in config:
            resolved[key] = config[key]
        else:
            resolved[key] = default
    return resolved


def _echo_config(out_dir: Path, command: str, resolved: dict) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    payload = {"command": command, **resolved}
    (out_dir / "config.json").write_text(json.dumps(payload, indent=2) + "\n")


# ---------------------------------------------------------------------------
# synth


SYNTH_DEFAULTS = dict(count=8, seconds=2.0, seed=0, snr_low=-5.0, snr_high=20.0, rate=16000)


def cmd_synth(args) -> int:
    cfg = _resolve(args, SYNTH_DEFAULTS)
    if cfg["snr_low"] > cfg["snr_high"]:
        raise UsageError(f"--snr-low {cfg['snr_low']} exceeds --snr-high {cfg['snr_high']}")
    if cfg["count"] <= 0 or cfg["seconds"] <= 0:
        raise UsageError("count and seconds must be positive")
    out_dir = Path(args.out)
    _echo_config(out_dir, "synth", cfg)
    triples = audio.synth_dataset(
        cfg["count"], cfg["seconds"], (cfg["snr_low"], cfg["snr_high"]),
        seed=cfg["seed"], sample_rate_hz=cfg["rate"],
    )
    rows = []
    for i, triple in enumerate(triples):
        names = {kind: f"{kind}_{i:04d}.wav" for kind in ("clean", "noise", "noisy")}
        audio.write_wav(triple.clean, out_dir / names["clean"])
        audio.write_wav(triple.noise, out_dir / names["noise"])
        audio.write_wav(triple.noisy, out_dir / names["noisy"])
        rows.append({**names, "snr_db": triple.snr_db, "seed": cfg["seed"]})
    audio.write_manifest(out_dir / "manifest.csv", rows)
    print(f"wrote {3 * len(triples)} wav files and manifest.csv to {out_dir}")
    return 0


def _load_triples(manifest_path: Path) -> list[audio.NoisyTriple]:
    rows = audio.read_manifest(manifest_path)
    base = manifest_path.parent
    triples = []
    for row in rows:
        triples.append(audio.NoisyTriple(
            clean=audio.read_wav(base / row["clean"]),
            noise=audio.read_wav(base / row["noise"]),
            noisy=audio.read_wav(base / row["noisy"]),
            snr_db=row["snr_db"],
        ))
    return triples


# ---------------------------------------------------------------------------
# train


TRAIN_DEFAULTS = dict(steps=200, lr=0.05, momentum=0.9, seed=0, embed_dim=64,
                      num_heads=4, num_layers=2, snn_neurons=64, snn_steps=16,
                      overfit_one=False, threads=1)


def cmd_train(args) -> int:
    from . import model as model_mod
    import torch

    cfg = _resolve(args, TRAIN_DEFAULTS)
    manifest = Path(args.manifest)
    out_dir = Path(args.out)
    triples = _load_triples(manifest)
    if cfg["overfit_one"]:
        triples = triples[:1]
    _echo_config(out_dir, "train", {**cfg, "manifest": str(manifest)})
    torch.set_num_threads(int(cfg["threads"]))
    stft_cfg = dsp.StftConfig()
    model_cfg = model_mod.ModelConfig(
        input_dim=stft_cfg.num_bins, embed_dim=cfg["embed_dim"], num_heads=cfg["num_heads"],
        num_layers=cfg["num_layers"], snn_neurons=cfg["snn_neurons"],
        snn_steps=cfg["snn_steps"], seed=cfg["seed"],
    )
    state = model_mod.train(
        triples, model_cfg, stft_cfg, steps=cfg["steps"], lr=cfg["lr"],
        momentum=cfg["momentum"], log_path=out_dir / "train.log",
    )
    model_mod.save_checkpoint(state.model, out_dir / "checkpoint.ckpt")
    if state.diverged:
        print(f"training diverged at step {state.step}; checkpoint holds the last good parameters",
              file=sys.stderr)
        return 3
    final = state.loss_history[-1] if state.loss_history else float("nan")
    print(f"trained {len(state.loss_history)} steps; final loss {final:.4f}; "
          f"checkpoint at {out_dir / 'checkpoint.ckpt'}")
    return 0


# ---------------------------------------------------------------------------
# denoise


def cmd_denoise(args) -> int:
    from . import model as model_mod

    checkpoint = Path(args.checkpoint)
    if not checkpoint.exists():
        raise FileNotFoundError(f"checkpoint not found: {checkpoint}")
    model = model_mod.load_checkpoint(checkpoint)
    noisy = audio.read_wav(args.input)
    stft_cfg = dsp.StftConfig()
    if noisy.sample_rate_hz != stft_cfg.sample_rate_hz:
        raise ValueError(
            f"{args.input}: sample rate {noisy.sample_rate_hz} does not match "
            f"the model's {stft_cfg.sample_rate_hz}"
        )
    cleaned = model_mod.denoise_buffer(model, noisy, stft_cfg)
    audio.write_wav(cleaned, args.output)
    print(f"denoised {args.input} -> {args.output}")
    return 0


# ---------------------------------------------------------------------------
# eval


def cmd_eval(args) -> int:
    manifest = Path(args.manifest)
    rows = audio.read_manifest(manifest)
    base = manifest.parent
    estimate_dir = Path(args.estimates) if args.estimates else None
    results = []
    baselines = []
    lines = ["file\tsi_snr_db\tbaseline_db\tdelta_db"]
    for row in rows:
        clean = audio.read_wav(base / row["clean"])
        noisy = audio.read_wav(base / row["noisy"])
        if estimate_dir is not None:
            est_path = estimate_dir / row["noisy"]
            if not est_path.exists():
                raise FileNotFoundError(f"no estimate for {row['noisy']} in {estimate_dir}")
            estimate = audio.read_wav(est_path)
        else:
            estimate = noisy
        result = metrics.si_snr(estimate, clean)
        baseline = metrics.si_snr(noisy, clean)
        results.append(result)
        baselines.append(baseline)
        value = "perfect" if result.perfect else f"{result.value_db:.2f}"
        base_v = "perfect" if baseline.perfect else f"{baseline.value_db:.2f}"
        delta = ("" if result.perfect or baseline.perfect
                 else f"{result.value_db - baseline.value_db:+.2f}")
        lines.append(f"{row['noisy']}\t{value}\t{base_v}\t{delta}")
    summary = metrics.summarize(results)
    base_summary = metrics.summarize(baselines)
    lines.append(f"# perfect: {summary.perfect_count}/{len(results)}")
    if summary.mean_db is not None:
        lines.append(f"# mean: {summary.mean_db:.2f} dB, median: {summary.median_db:.2f} dB")
    if summary.mean_db is not None and base_summary.mean_db is not None:
        lines.append(f"# mean delta vs noisy: {summary.mean_db - base_summary.mean_db:+.2f} dB")
    report = "\n".join(lines) + "\n"
    if args.out:
        Path(args.out).write_text(report)
    print(report, end="")
    return 0


# ---------------------------------------------------------------------------
# perf


def cmd_perf(args) -> int:
    extra = perf.load_profile_file(args.profile) if args.profile else ()
    stft_cfg = dsp.StftConfig()
    perf_cfg = perf.PerfConfig(D=stft_cfg.num_bins, S=64, T=4, N=64, t_sim=16)
    report = perf.characteristics_report(stft_cfg, perf_cfg)
    print("system characteristics")
    print(f"  bands: {report.bands}")
    print(f"  frequency range: {report.freq_range_hz[0]:.0f} Hz - {report.freq_range_hz[1] / 1000:.0f} kHz")
    print(f"  dynamic range: {report.dynamic_range_db:.1f} dB")
    print(f"  max event rate: {report.max_event_rate_mevents_s} Mevents/s")
    print(f"  core clock: {report.core_clock_mhz:.0f} MHz")
    print(f"  model MACs (analytic): {report.mac_total}")
    print()
    print("device comparison (reference 960 MOP workload)")
    header = f"{'device':<24}{'nm':>4}{'MHz':>7}{'lat ms':>9}{'GOP/s':>9}{'W':>7}{'GOP/s/W':>9}"
    print(header)
    for row in perf.device_table(extra=extra):
        print(f"{row.name:<24}{row.technology_nm:>4}{row.frequency_mhz:>7.0f}"
              f"{row.latency_ms:>9.2f}{row.throughput_gops:>9.2f}{row.power_w:>7.2f}"
              f"{row.efficiency_gops_per_w:>9.2f}")
        if row.notes:
            print(f"    note: {row.notes}")
    return 0


# ---------------------------------------------------------------------------
# expressivity


def cmd_expressivity(args) -> int:
    if args.theta <= 0:
        raise UsageError("--theta must be positive")
    fn = expressivity.TriLinearFn(args.theta)
    rows = expressivity.demo_table(fn, dt=args.dt, grid_points=args.points)
    print("x\texact\trelu_net\tspiking")
    for x, exact, relu, snn in rows:
        print(f"{x:.4f}\t{exact:.6f}\t{relu:.6f}\t{snn:.6f}")
    return 0


# ---------------------------------------------------------------------------
# wiring


def build_parser() -> _Parser:
    parser = _Parser(prog="spikedenoise", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic clean/noise/noisy dataset")
    p.add_argument("--out", required=True)
    p.add_argument("--config")
    p.add_argument("--count", type=int)
    p.add_argument("--seconds", type=float)
    p.add_argument("--seed", type=int)
    p.add_argument("--snr-low", dest="snr_low", type=float)
    p.add_argument("--snr-high", dest="snr_high", type=float)
    p.add_argument("--rate", type=int)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("train", help="train the denoiser on a dataset manifest")
    p.add_argument("--manifest", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--config")
    p.add_argument("--steps", type=int)
    p.add_argument("--lr", type=float)
    p.add_argument("--momentum", type=float)
    p.add_argument("--seed", type=int)
    p.add_argument("--embed-dim", dest="embed_dim", type=int)
    p.add_argument("--num-heads", dest="num_heads", type=int)
    p.add_argument("--num-layers", dest="num_layers", type=int)
    p.add_argument("--snn-neurons", dest="snn_neurons", type=int)
    p.add_argument("--snn-steps", dest="snn_steps", type=int)
    p.add_argument("--threads", type=int)
    p.add_argument("--overfit-one", dest="overfit_one", action="store_const", const=True)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("denoise", help="denoise one wav file with a checkpoint")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--out", dest="output", required=True)
    p.set_defaults(func=cmd_denoise)

    p = sub.add_parser("eval", help="SI-SNR report for estimates against a manifest")
    p.add_argument("--manifest", required=True)
    p.add_argument("--estimates", help="directory of denoised files named like the noisy ones")
    p.add_argument("--out", help="write the report here as well as stdout")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("perf", help="characteristics and device comparison tables")
    p.add_argument("--profile", help="extra devices: name, nm, MHz, W, latency_ms per line")
    p.set_defaults(func=cmd_perf)

    p = sub.add_parser("expressivity", help="tri-linear function demo table")
    p.add_argument("--theta", type=float, default=1.0)
    p.add_argument("--dt", type=float, default=1e-3)
    p.add_argument("--points", type=int, default=41)
    p.set_defaults(func=cmd_expressivity)

    return parser


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        return args.func(args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    except (FileNotFoundError, WavFormatError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 2
    except ValueError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 2
    except (FloatingPointError, expressivity.NoOutputSpike) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
