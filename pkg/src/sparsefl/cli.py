"""Command-line client for the service.

Every verb speaks HTTP to the service API; without ``--server`` the app is
mounted in process, so no daemon is needed for local work.

Exit codes: 0 success, 1 configuration error, 2 runtime error.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from .client import ServiceClient, ServiceError
from .config import ExperimentConfig, config_from_toml
from .errors import ConfigError
from .experiments import load_preset, preset_names, replace_cfg

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_RUNTIME = 2


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sparsefl",
        description="Budgeted-uplink federated learning: experiments and codec tools.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run one experiment from a config file or preset")
    run.add_argument("config", help="path to a TOML config, or a preset name")
    run.add_argument("--out", default="runs", help="output directory for CSVs")
    run.add_argument("--seed", type=int, default=None, help="override the master seed")
    run.add_argument("--rounds", type=int, default=None, help="cap the round count")
    run.add_argument("--mnist-dir", default=None, help="override the dataset directory")
    run.add_argument("--server", default=None, help="base URL of a remote service")

    ablate = sub.add_parser("ablate", help="sweep codec variants around one config")
    ablate.add_argument("config", help="path to a TOML config, or a preset name")
    ablate.add_argument("--q-levels", default="", help="comma list of fixed Q values")
    ablate.add_argument("--kappas", default="", help="comma list of kappa values")
    ablate.add_argument("--out", default="runs")
    ablate.add_argument("--seed", type=int, default=None)
    ablate.add_argument("--rounds", type=int, default=None)
    ablate.add_argument("--mnist-dir", default=None)
    ablate.add_argument("--server", default=None)

    inspect = sub.add_parser("inspect", help="dump the fields of a payload envelope")
    inspect.add_argument("envelope", help="JSON envelope written by 'compress'")
    inspect.add_argument("--server", default=None)

    compress = sub.add_parser("compress", help="compress a vector into an envelope file")
    compress.add_argument("--npy", default=None, help="read the vector from a .npy file")
    compress.add_argument("--random", type=int, default=None, metavar="N",
                          help="use a random N(0,1) vector of this length")
    compress.add_argument("--s-level", type=int, required=True)
    compress.add_argument("--q-level", type=int, default=None)
    compress.add_argument("--subvectors", type=int, default=1)
    compress.add_argument("--seed", type=int, default=0, help="codec seed key")
    compress.add_argument("--out", default="payload.json")
    compress.add_argument("--server", default=None)

    dump = sub.add_parser("dump-codebooks", help="write the quantizer codebooks as CSV")
    dump.add_argument("--out", default=None, help="path for the CSV (default stdout)")
    dump.add_argument("--server", default=None)

    serve = sub.add_parser("serve", help="run the HTTP service")
    serve.add_argument("--host", default="127.0.0.1")
    serve.add_argument("--port", type=int, default=8000)
    return parser


def _load_config(args) -> ExperimentConfig:
    candidate = Path(args.config)
    if candidate.suffix == ".toml" or candidate.exists():
        cfg = config_from_toml(candidate)
    elif args.config in preset_names():
        cfg = load_preset(args.config, mnist_dir=getattr(args, "mnist_dir", None))
    else:
        raise ConfigError(
            [f"{args.config!r} is neither a config file nor one of: {', '.join(preset_names())}"]
        )
    overrides = {}
    if getattr(args, "seed", None) is not None:
        overrides["seed"] = args.seed
    if getattr(args, "mnist_dir", None) and candidate.exists():
        overrides["data"] = {"mnist_dir": args.mnist_dir}
    return replace_cfg(cfg, **overrides) if overrides else cfg


def _int_list(text: str) -> list[int]:
    return [int(x) for x in text.split(",") if x.strip()]


def _float_list(text: str) -> list[float]:
    return [float(x) for x in text.split(",") if x.strip()]


def cmd_run(args) -> int:
    cfg = _load_config(args)
    with ServiceClient(args.server) as client:
        result = client.run(cfg.to_dict(), round_limit=args.rounds)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    rounds_path = out / f"{cfg.name}_rounds.csv"
    summary_path = out / f"{cfg.name}_summary.csv"
    rounds_path.write_text(result["records_csv"])
    summary_path.write_text(result["summary_csv"])
    summary = result["summary"]
    acc = summary.get("final_accuracy")
    acc_text = f"accuracy {100 * acc:.2f}%" if acc is not None else f"test loss {summary['final_test_loss']:.6g}"
    print(f"{cfg.name}: {summary['rounds_run']} rounds, {acc_text}, "
          f"mean uplink {summary['mean_bits_per_device_round'] / 8000:.3f} KB/device/round")
    print(f"wrote {rounds_path} and {summary_path}")
    return EXIT_OK


def cmd_ablate(args) -> int:
    cfg = _load_config(args)
    q_levels = _int_list(args.q_levels)
    kappas = _float_list(args.kappas)
    if not q_levels and not kappas:
        print("empty sweep, nothing to do")
        return EXIT_OK
    with ServiceClient(args.server) as client:
        result = client.ablate(cfg.to_dict(), q_levels, kappas, round_limit=args.rounds)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    combined = out / f"{cfg.name}_ablation.csv"
    combined.write_text(result["combined_csv"])
    for name in result["variants"]:
        summary = result["summaries"][name]
        acc = summary.get("final_accuracy")
        acc_text = f"{100 * acc:.2f}%" if acc is not None else f"loss {summary['final_test_loss']:.6g}"
        print(f"{name}: {acc_text}")
    print(f"wrote {combined}")
    return EXIT_OK


def cmd_inspect(args) -> int:
    envelope = json.loads(Path(args.envelope).read_text())
    with ServiceClient(args.server) as client:
        info = client.inspect(
            envelope["payload_hex"], envelope["bit_length"], envelope["params"]
        )
    print(f"n={info['n']} L={info['l_subvectors']} Q={info['q_level']} "
          f"coding={info['value_coding']} S_total={info['total_sparsity']}")
    print(f"bits: payload={info['bit_length']} accounted={info['accounted_bits']} "
          f"match={info['bit_length'] == info['accounted_bits']}")
    for sec in info["sections"]:
        line = f"  subvector {sec['subvector']}: S={sec['s_level']} bits={sec['bits']}"
        if sec.get("mean") is not None:
            line += f" mean={sec['mean']:.6g} variance={sec['variance']:.6g}"
        if sec.get("position_bits") is not None:
            line += f" position_bits={sec['position_bits']}"
        print(line)
    return EXIT_OK


def cmd_compress(args) -> int:
    if (args.npy is None) == (args.random is None):
        raise ConfigError(["provide exactly one of --npy or --random"])
    if args.npy:
        values = np.load(args.npy).astype(float).ravel()
    else:
        values = np.random.default_rng(args.seed).standard_normal(args.random)
    params = {
        "n": int(values.shape[0]),
        "s_level": args.s_level,
        "q_level": args.q_level,
        "l_subvectors": args.subvectors,
        "seed_key": [args.seed],
        "value_coding": "lloyd_max" if args.q_level is not None else "float32",
    }
    with ServiceClient(args.server) as client:
        result = client.compress(values.tolist(), params)
    Path(args.out).write_text(json.dumps(result, indent=2))
    print(f"wrote {args.out} ({result['bit_length']} bits)")
    return EXIT_OK


def cmd_dump_codebooks(args) -> int:
    with ServiceClient(args.server) as client:
        text = client.codebooks_csv()
    if args.out:
        Path(args.out).write_text(text)
        print(f"wrote {args.out}")
    else:
        sys.stdout.write(text)
    return EXIT_OK


def cmd_serve(args) -> int:
    import uvicorn

    uvicorn.run("sparsefl.service:app", host=args.host, port=args.port)
    return EXIT_OK


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    handlers = {
        "run": cmd_run,
        "ablate": cmd_ablate,
        "inspect": cmd_inspect,
        "compress": cmd_compress,
        "dump-codebooks": cmd_dump_codebooks,
        "serve": cmd_serve,
    }
    try:
        return handlers[args.command](args)
    except ConfigError as exc:
        for message in exc.errors:
            print(f"config error: {message}", file=sys.stderr)
        return EXIT_CONFIG
    except ServiceError as exc:
        if exc.status_code == 400:
            detail = exc.detail if isinstance(exc.detail, list) else [exc.detail]
            for message in detail:
                print(f"config error: {message}", file=sys.stderr)
            return EXIT_CONFIG
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except (OSError, RuntimeError, ValueError, KeyError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
