"""Command line front end: checkpoint in, model file plus fixtures out."""

from __future__ import annotations

import argparse
import json
import sys

from wmwb import WmwbError, count_params, footprint_mib

from .errors import ExportError
from .export import PARITY_TOLERANCE, export, verify_parity
from .manifest import ExportManifest


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="wmwb-export",
        description="Convert a Keras checkpoint into a WMWB model file with parity fixtures.",
    )
    p.add_argument("checkpoint", help="source checkpoint (.keras or .h5)")
    p.add_argument("out", help="output model file path")
    p.add_argument("--manifest", help="JSON export manifest; flags below override its fields")
    p.add_argument("--arch", help="target architecture name")
    p.add_argument("--classes", type=int, help="number of output classes")
    p.add_argument("--head", choices=("custom", "imagenet_reference"))
    p.add_argument("--hidden", type=int, help="custom head hidden width")
    p.add_argument("--dropout", type=float, help="custom head dropout rate")
    p.add_argument("--waive", action="append", default=None, metavar="LAYER",
                   help="waive an unmapped source layer (repeatable)")
    p.add_argument("--fixtures", type=int, default=5, help="parity fixtures to emit (default 5)")
    p.add_argument("--seed", type=int, default=0, help="fixture input seed")
    p.add_argument("--tolerance", type=float, default=PARITY_TOLERANCE,
                   help="max per-class probability deviation (default %(default)s)")
    p.add_argument("--skip-verify", action="store_true",
                   help="do not replay fixtures through the toolkit after export")
    return p


def _resolve_manifest(args, parser) -> ExportManifest:
    base = {}
    if args.manifest:
        base = json.loads(open(args.manifest, encoding="utf-8").read())
        if not isinstance(base, dict):
            parser.error("--manifest must contain a JSON object")
    overrides = {
        "arch": args.arch,
        "n_classes": args.classes,
        "head": args.head,
        "hidden_width": args.hidden,
        "dropout_rate": args.dropout,
        "waived": args.waive,
    }
    for key, value in overrides.items():
        if value is not None:
            base[key] = value
    if "arch" not in base or "n_classes" not in base:
        parser.error("--arch and --classes are required unless the manifest provides them")
    return ExportManifest.from_json(json.dumps(base))


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        manifest = _resolve_manifest(args, parser)
        graph, fixture_dir = export(
            args.checkpoint, manifest, args.out, fixtures=args.fixtures, seed=args.seed
        )
        print(f"params: {count_params(graph)}")
        print(f"footprint_mib: {footprint_mib(graph)}")
        print(f"model: {args.out}")
        if args.fixtures > 0:
            print(f"fixtures: {fixture_dir} ({args.fixtures})")
            if not args.skip_verify:
                diffs = verify_parity(graph, fixture_dir)
                worst = max(diffs)
                print(f"parity: max deviation {worst:.3e} over {len(diffs)} fixtures")
                if worst > args.tolerance:
                    print(
                        json.dumps({
                            "error": "ParityError",
                            "message": f"deviation {worst:.3e} exceeds tolerance {args.tolerance:.1e}",
                        }),
                        file=sys.stderr,
                    )
                    return 1
    except (ExportError, WmwbError, OSError, ValueError) as e:
        print(json.dumps({"error": type(e).__name__, "message": str(e)}), file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
