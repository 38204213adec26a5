"""Command-line entry points for the key-generation pipeline.

Five subcommands cover the full workflow:

  generate   scene config -> dual-band channel records (FDDC)
  train      channel records -> trained checkpoint (FDDN) + normalizers
  keygen     one session between the three parties -> JSON result
  sweep      many sessions over a grid of one variable -> CSV table
  nist       key file -> randomness report

The scene config is a JSON document:

  {
    "environment": {"room_bounds": [[0,0,0],[10,6,3]], "alice_pos": [5,3,2.9],
                    "scatterers": [[1,1,1.2], ...], "n_paths": 5,
                    "rng_seed": 11, "path_loss_exponent": 2.0,
                    "reflection_loss": 0.8},
    "band1": {"label": "band1", "f_center_hz": 2.4e9,
              "bandwidth_hz": 5e8, "n_subcarriers": 8},
    "band2": {"label": "band2", "f_center_hz": 2.5e9,
              "bandwidth_hz": 5e8, "n_subcarriers": 8},
    "grids": [{"origin": [1,1,1.5], "nx": 20, "ny": 10, "pitch": 0.2}]
  }

Every data-producing subcommand takes --seed, which overrides all stream
seeds, so identical invocations give identical files. Any error exits
nonzero with a one-line message on stderr.
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from .channel import (
    BandConfig,
    Environment,
    generate_channel_records,
    rectangular_grid,
)
from .features import (
    fit_normalizers,
    mix_datasets,
    normalize_dataset,
    realized_dataset,
    split_dataset,
)
from .harness import ModelBundle, SessionConfig, run_session, run_sweep
from .io import (
    read_channel_records,
    read_keys_text,
    write_channel_records,
    write_feature_csv,
    write_feature_dataset,
    write_keys_text,
    write_trace_jsonl,
)
from .network import ArchSpec, TrainConfig, preset_arch, train
from .quantizer import QuantConfig
from .randomness import blockify, run_suite


def load_scene(path):
    """Parse a scene config into (environment, band1, band2, positions)."""
    data = json.loads(Path(path).read_text())
    try:
        env = Environment.from_dict(data["environment"])
        band1 = BandConfig(**data["band1"])
        band2 = BandConfig(**data["band2"])
        grid_specs = data["grids"]
    except KeyError as exc:
        raise ValueError(f"{path}: scene config is missing {exc}") from exc
    if not grid_specs:
        raise ValueError(f"{path}: scene config needs at least one grid")
    grids = [rectangular_grid(g["origin"], int(g["nx"]), int(g["ny"]),
                              float(g["pitch"])) for g in grid_specs]
    return env, band1, band2, np.concatenate(grids)


def _parse_triple(text: str) -> tuple:
    parts = text.split(",")
    if len(parts) != 3:
        raise argparse.ArgumentTypeError(
            f"expected three comma-separated coordinates, got {text!r}")
    return tuple(float(p) for p in parts)


def _parse_floats(text: str) -> list:
    return [float(p) for p in text.split(",")]


def _parse_ints(text: str) -> tuple:
    return tuple(int(p) for p in text.split(","))


def _quant_from_args(args) -> QuantConfig:
    return QuantConfig(levels=args.levels, guard_factor=args.guard,
                       encoding=args.encoding)


def _add_quant_flags(parser) -> None:
    parser.add_argument("--levels", type=int, default=2,
                        help="quantization levels per feature (default 2)")
    parser.add_argument("--guard", type=float, default=0.1,
                        help="guard probability mass per boundary side (default 0.1)")
    parser.add_argument("--encoding", choices=("gray", "binary"),
                        default="gray", help="symbol-to-bit code (default gray)")


def cmd_generate(args) -> int:
    env, band1, band2, positions = load_scene(args.config)
    ids, h1, h2 = generate_channel_records(env, band1, band2, positions,
                                           snr_db=args.snr_db, seed=args.seed)
    write_channel_records(args.out, ids, h1, h2)
    if args.features or args.csv:
        dataset = realized_dataset(ids, h1, h2)
        if args.features:
            write_feature_dataset(args.features, dataset)
        if args.csv:
            write_feature_csv(args.csv, dataset)
    print(f"wrote {ids.size} records ({band1.n_subcarriers} subcarriers per "
          f"band) to {args.out}")
    return 0


def cmd_train(args) -> int:
    ids, h1, h2 = read_channel_records(args.data)
    dataset = realized_dataset(ids, h1, h2)
    rng = np.random.default_rng(np.random.SeedSequence([args.seed, 1]))
    train_set, test_set = split_dataset(dataset, args.train_fraction, rng)
    if args.noisy:
        n_ids, n_h1, n_h2 = read_channel_records(args.noisy)
        noisy = realized_dataset(n_ids, n_h1, n_h2, provenance="noisy")
        keep = np.flatnonzero(np.isin(noisy.position_ids,
                                      train_set.position_ids))
        noisy_train = noisy.subset(keep)
        train_set = mix_datasets(train_set, noisy_train, args.n_noisy,
                                 args.n_clean, rng)
    norm1, norm2 = fit_normalizers(train_set)
    train_norm = normalize_dataset(train_set, norm1, norm2)
    test_norm = normalize_dataset(test_set, norm1, norm2)
    if args.hidden is not None:
        arch = ArchSpec(layer_sizes=(train_norm.n_features, *args.hidden,
                                     train_norm.n_features),
                        hidden_activation=args.hidden_activation,
                        output_activation=args.output_activation)
    else:
        arch = preset_arch(args.preset, train_norm.n_features)
    cfg = TrainConfig(epochs=args.epochs, batch_size=args.batch_size,
                      seed=args.seed, learning_rate=args.learning_rate)
    params, trace = train(arch, train_norm, cfg, test_norm)
    ModelBundle(params=params, norm1=norm1, norm2=norm2).save(args.out)
    if args.trace:
        write_trace_jsonl(args.trace, trace)
    print(f"trained {len(train_norm)} pairs for {args.epochs} epochs; "
          f"eval nmse {trace[-1]['eval_nmse']:.6g}; checkpoint {args.out}")
    return 0


def cmd_keygen(args) -> int:
    env, band1, band2, _ = load_scene(args.config)
    bundle = ModelBundle.load(args.model)
    cfg = SessionConfig(environment=env, band1=band1, band2=band2,
                        bob_position=args.bob, eve_position=args.eve,
                        snr_db_alice=args.snr_db, snr_db_bob=args.snr_db,
                        snr_db_eve=args.snr_db, quant=_quant_from_args(args),
                        seed=args.seed)
    result = run_session(cfg, bundle)
    payload = result.metrics_dict()
    payload["bits_alice"] = "".join(map(str, result.bits_alice))
    payload["bits_bob"] = "".join(map(str, result.bits_bob))
    payload["bits_eve"] = "".join(map(str, result.bits_eve))
    text = json.dumps(payload, indent=2)
    if args.out:
        Path(args.out).write_text(text + "\n")
    else:
        print(text)
    if args.keys:
        write_keys_text(args.keys, [result.bits_alice])
    return 0


def cmd_sweep(args) -> int:
    env, band1, band2, positions = load_scene(args.config)
    bundle = ModelBundle.load(args.model)
    values = args.values
    if args.var == "levels":
        if any(v != int(v) for v in values):
            raise ValueError(f"levels grid must be whole numbers, got {values}")
        values = [int(v) for v in values]
    sweep = run_sweep(env, band1, band2, bundle, positions, args.var,
                      values, n_sessions=args.sessions,
                      snr_db=args.snr_db, quant=_quant_from_args(args),
                      eve_offset=args.eve_offset, seed=args.seed)
    sweep.to_csv(args.out)
    if args.sessions_out:
        sweep.to_jsonl(args.sessions_out)
    if args.keys:
        write_keys_text(args.keys,
                        [rec["bits_alice"] for rec in sweep.sessions])
    for row in sweep.rows:
        print(f"{args.var}={row[args.var]}: ker={row['ker']:.4f} "
              f"kgr={row['kgr']:.4f} nvd_ab_post={row['nvd_ab_post']:.5f}")
    print(f"wrote {len(sweep.rows)} rows to {args.out}")
    return 0


def cmd_nist(args) -> int:
    keys = read_keys_text(args.keys)
    blocks = blockify(keys, args.block_bits)
    report = run_suite(blocks, alpha=args.alpha)
    print(report.to_text_table())
    if args.json:
        Path(args.json).write_text(report.to_json() + "\n")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fddkey",
        description="Dual-band physical-layer key generation pipeline")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="scene config to channel records")
    p.add_argument("--config", required=True, help="scene JSON path")
    p.add_argument("--out", required=True, help="output FDDC path")
    p.add_argument("--snr-db", type=float, default=np.inf,
                   help="measurement SNR in dB (default noise-free)")
    p.add_argument("--features", help="also write realized features (FDDF)")
    p.add_argument("--csv", help="also write an inspection CSV")
    p.add_argument("--seed", type=int, default=0, help="noise stream seed")
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("train", help="channel records to trained checkpoint")
    p.add_argument("--data", required=True, help="clean FDDC records")
    p.add_argument("--out", required=True, help="output FDDN checkpoint")
    p.add_argument("--noisy", help="noisy FDDC records to mix into training")
    p.add_argument("--n-noisy", type=int, default=0,
                   help="noisy rows in the training mixture")
    p.add_argument("--n-clean", type=int, default=0,
                   help="clean rows in the training mixture")
    p.add_argument("--preset", default="relu4",
                   choices=("relu4", "tanh3", "relu3"),
                   help="named architecture (default relu4)")
    p.add_argument("--hidden", type=_parse_ints,
                   help="explicit hidden widths, e.g. 64,64 (overrides preset)")
    p.add_argument("--hidden-activation", default="relu",
                   choices=("relu", "tanh"))
    p.add_argument("--output-activation", default="sigmoid",
                   choices=("sigmoid", "tanh"))
    p.add_argument("--epochs", type=int, default=500)
    p.add_argument("--batch-size", type=int, default=128)
    p.add_argument("--learning-rate", type=float, default=1e-3)
    p.add_argument("--train-fraction", type=float, default=0.8)
    p.add_argument("--trace", help="write per-epoch JSON-lines trace here")
    p.add_argument("--seed", type=int, default=0,
                   help="split/shuffle/init seed")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("keygen", help="run one key-agreement session")
    p.add_argument("--config", required=True, help="scene JSON path")
    p.add_argument("--model", required=True, help="FDDN checkpoint path")
    p.add_argument("--bob", type=_parse_triple, required=True,
                   help="user position x,y,z")
    p.add_argument("--eve", type=_parse_triple, required=True,
                   help="eavesdropper position x,y,z")
    p.add_argument("--snr-db", type=float, default=np.inf)
    _add_quant_flags(p)
    p.add_argument("--out", help="write the JSON result here instead of stdout")
    p.add_argument("--keys", help="write the agreed key to this file")
    p.add_argument("--seed", type=int, default=0, help="session seed")
    p.set_defaults(func=cmd_keygen)

    p = sub.add_parser("sweep", help="sessions over a grid of one variable")
    p.add_argument("--config", required=True, help="scene JSON path")
    p.add_argument("--model", required=True, help="FDDN checkpoint path")
    p.add_argument("--var", required=True,
                   choices=("snr_db", "guard_factor", "levels"),
                   help="swept variable")
    p.add_argument("--values", type=_parse_floats, required=True,
                   help="comma-separated grid, e.g. 0,10,20,30,40")
    p.add_argument("--sessions", type=int, default=100,
                   help="sessions per grid point (default 100)")
    p.add_argument("--snr-db", type=float, default=20.0,
                   help="fixed SNR when not swept (default 20)")
    _add_quant_flags(p)
    p.add_argument("--eve-offset", type=_parse_triple, default=(0.15, 0.0, 0.0),
                   help="eavesdropper offset from the user (default 0.15,0,0)")
    p.add_argument("--out", required=True, help="aggregated CSV path")
    p.add_argument("--sessions-out", help="per-session JSON-lines path")
    p.add_argument("--keys", help="write every session's agreed key here")
    p.add_argument("--seed", type=int, default=0, help="root sweep seed")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("nist", help="randomness report for a key file")
    p.add_argument("--keys", required=True, help="key file, one 0/1 string per line")
    p.add_argument("--block-bits", type=int, default=128,
                   help="bits per analysis block (default 128)")
    p.add_argument("--alpha", type=float, default=0.01,
                   help="significance level (default 0.01)")
    p.add_argument("--json", help="also write the report as JSON here")
    p.set_defaults(func=cmd_nist)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except Exception as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
