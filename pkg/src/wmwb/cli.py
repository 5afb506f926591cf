"""Command-line interface.

Contract: exit 0 on success, 1 on a toolkit error (with one JSON error
line on stderr), 2 on usage errors (argparse's convention). Subcommands
cover the full pipeline: manifest, segment, featurize, split, infer,
evaluate, bench, catalog, config.
"""

from __future__ import annotations

import argparse
import json
import re
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__
from .annotation import build_manifest
from .audio import load_clip
from .bench import bench_forward
from .classifier import NetworkClassifier
from .config import PipelineConfig, load_config
from .errors import WmwbError
from .features import (
    FEATURE_FORMAT_VERSION,
    FeatureError,
    featurize_window,
    mel_filterbank,
    read_feature_file,
    write_feature_file,
)
from .metrics import (
    confusion_from_predictions,
    f1_histogram,
    macro_metrics,
    metrics_report,
    normalized_csv,
    report_csv,
    report_json,
)
from .netgraph import (
    MODEL_FORMAT_VERSION,
    build_catalog,
    count_params,
    depth_report,
    footprint_mib,
    init_random,
    load_model,
    save_model,
)
from .segment import segment_clip
from .split import SplitAssignment, split_by_source

_WINDOW_NAME = re.compile(r"^(?P<source>.+)_r(?P<region>\d+)_w(?P<window>\d+)$")


def _workers(jobs: int) -> int:
    import os

    return jobs if jobs > 0 else (os.cpu_count() or 1)


def _cmd_manifest(args) -> int:
    m = build_manifest(args.root)
    rows = m.summary_rows()
    width = max((len(r["species"]) for r in rows), default=7)
    print(f"{'species':<{width}}  files  regions  seconds  sound_types")
    for r in rows:
        print(
            f"{r['species']:<{width}}  {r['files']:>5}  {r['regions']:>7}  "
            f"{r['total_seconds']:>7.1f}  {r['sound_types']}"
        )
    total_s = sum(r["total_seconds"] for r in rows)
    total_r = sum(r["regions"] for r in rows)
    print(f"total: {len(m.entries)} files, {total_r} regions, {total_s:.1f} s")
    if args.csv:
        Path(args.csv).write_text(m.to_csv(), encoding="utf-8")
        print(f"wrote {args.csv}")
    return 0


def _cmd_segment(args) -> int:
    cfg = load_config(args.config)
    rate = cfg.features.sample_rate
    m = build_manifest(args.root)
    out_root = Path(args.out)
    per_species: dict[str, int] = {}
    for e in m.entries:
        clip = load_clip(e.audio_path, rate)
        windows = segment_clip(clip, e.regions)
        dest = out_root / e.species
        dest.mkdir(parents=True, exist_ok=True)
        from .audio import write_wav

        for w in windows:
            write_wav(dest / f"{w.name}.wav", w.samples, rate)
        per_species[e.species] = per_species.get(e.species, 0) + len(windows)
    for species in sorted(per_species):
        print(f"{species}: {per_species[species]} windows")
    print(f"total: {sum(per_species.values())} windows")
    return 0


def _featurize_one(path: Path, out_dir: Path, cfg, fb) -> str:
    clip = load_clip(path, cfg.sample_rate)
    if len(clip.samples) != cfg.sample_rate:
        raise FeatureError(
            f"{path}: expected a one-second window of {cfg.sample_rate} "
            f"samples, got {len(clip.samples)}"
        )
    image = featurize_window(clip.samples, cfg, fb)
    out = out_dir / (path.stem + ".wmfi")
    write_feature_file(out, image)
    return str(out)


def _cmd_featurize(args) -> int:
    cfg = load_config(args.config).features
    fb = mel_filterbank(cfg)
    in_root = Path(args.windows)
    out_root = Path(args.out)
    wavs = sorted(in_root.rglob("*.wav"))
    if not wavs:
        raise WmwbError(f"no .wav files under {in_root}")
    tasks = []
    for wav in wavs:
        rel = wav.parent.relative_to(in_root)
        dest = out_root / rel
        dest.mkdir(parents=True, exist_ok=True)
        tasks.append((wav, dest))
    with ThreadPoolExecutor(max_workers=_workers(args.jobs)) as pool:
        futures = [pool.submit(_featurize_one, wav, dest, cfg, fb) for wav, dest in tasks]
        for f in futures:
            f.result()
    print(f"featurized {len(tasks)} windows into {out_root}")
    return 0


def _cmd_split(args) -> int:
    cfg = load_config(args.config)
    fractions = cfg.fractions
    if args.fractions:
        parts = args.fractions.split(",")
        if len(parts) != 3:
            raise WmwbError(f"--fractions needs three comma-separated values, got {args.fractions!r}")
        fractions = tuple(float(p) for p in parts)
    seed = cfg.seed if args.seed is None else args.seed
    m = build_manifest(args.root)
    split = split_by_source(m, fractions=fractions, seed=seed,
                            sample_rate=cfg.features.sample_rate)
    Path(args.csv).write_text(split.to_csv(), encoding="utf-8")
    totals = split.window_totals()
    total = sum(totals.values())
    for subset in ("train", "val", "test"):
        share = totals[subset] / total if total else 0.0
        print(f"{subset}: {totals[subset]} windows ({share:.3f})")
    print(f"wrote {args.csv}")
    return 0


def _cmd_infer(args) -> int:
    class_names = None
    if args.classes:
        class_names = [
            line.strip()
            for line in Path(args.classes).read_text(encoding="utf-8").splitlines()
            if line.strip()
        ]
    clf = NetworkClassifier.from_file(args.model, class_names=class_names)
    paths = [Path(p) for p in args.features]

    def run(path: Path):
        probs = clf.predict_proba(read_feature_file(path))[0]
        return path, probs

    with ThreadPoolExecutor(max_workers=_workers(args.jobs)) as pool:
        results = list(pool.map(run, paths))
    for path, probs in results:
        idx = int(np.argmax(probs))
        record = {
            "file": str(path),
            "class_index": idx,
            "class": str(clf.classes_[idx]),
            "confidence": float(probs[idx]),
        }
        if args.probs:
            record["probs"] = [float(p) for p in probs]
        print(json.dumps(record))
    return 0


def _cmd_evaluate(args) -> int:
    split = SplitAssignment.from_csv(Path(args.split).read_text(encoding="utf-8"))
    subset_of = {r.source_id: r.subset for r in split.rows}
    species_of = {r.source_id: r.species for r in split.rows}
    class_names = sorted({r.species for r in split.rows})
    class_index = {name: i for i, name in enumerate(class_names)}

    clf = NetworkClassifier.from_file(args.model, class_names=class_names)
    features = sorted(Path(args.features).rglob("*.wmfi"))
    pairs = []
    skipped = 0
    for path in features:
        m = _WINDOW_NAME.match(path.stem)
        if not m or m.group("source") not in subset_of:
            skipped += 1
            continue
        source = m.group("source")
        if subset_of[source] != args.subset:
            continue
        probs = clf.predict_proba(read_feature_file(path))[0]
        pairs.append((class_index[species_of[source]], int(np.argmax(probs))))
    if not pairs:
        raise WmwbError(f"no feature files matched subset {args.subset!r}")

    cm = confusion_from_predictions(pairs, len(class_names), class_names)
    report = metrics_report(cm)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "report.json").write_text(report_json(cm), encoding="utf-8")
    (out_dir / "report.csv").write_text(report_csv(cm), encoding="utf-8")
    (out_dir / "confusion_normalized.csv").write_text(normalized_csv(cm), encoding="utf-8")
    hist = f1_histogram([c["f1"] for c in report["per_class"]])
    (out_dir / "f1_histogram.json").write_text(
        json.dumps(
            {"bin_width": hist.bin_width, "edges": hist.edges,
             "counts": hist.counts, "macro_f1": hist.macro_f1},
            indent=2,
        )
        + "\n",
        encoding="utf-8",
    )
    macro = macro_metrics(cm)
    if skipped:
        print(f"skipped {skipped} feature files not in the split", file=sys.stderr)
    print(
        f"{args.subset}: {len(pairs)} windows, macro recall {macro.recall:.3f}, "
        f"precision {macro.precision:.3f}, F1 {macro.f1:.3f}"
    )
    print(f"wrote reports to {out_dir}")
    return 0


def _cmd_bench(args) -> int:
    g = load_model(args.model)
    rng = np.random.default_rng(args.seed)
    image = rng.random(tuple(g.input_shape), dtype=np.float32)
    report = bench_forward(g, image, warmup=args.warmup, runs=args.runs)
    text = report.to_json()
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
        print(f"wrote {args.out}")
    else:
        print(text, end="")
    return 0


def _cmd_catalog(args) -> int:
    g = build_catalog(
        args.arch, n_classes=args.classes, head=args.head, hidden_width=args.hidden
    )
    print(f"params: {count_params(g)}")
    print(f"footprint_mib: {footprint_mib(g)}")
    print(json.dumps(depth_report(g)))
    if args.out:
        init_random(g, seed=args.seed)
        save_model(args.out, g)
        print(f"wrote {args.out}")
    return 0


def _cmd_config(args) -> int:
    cfg = load_config(args.config) if args.config else PipelineConfig()
    if args.dump:
        print(cfg.dump(), end="")
    else:
        print("config ok" if args.config else "using built-in defaults")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="wmwb",
        description="Bird species classification from annotated field recordings.",
    )
    p.add_argument(
        "--version",
        action="version",
        version=(
            f"wmwb {__version__} "
            f"(model format v{MODEL_FORMAT_VERSION}, feature format v{FEATURE_FORMAT_VERSION})"
        ),
    )
    sub = p.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("manifest", help="pair audio with labels and summarize the dataset")
    sp.add_argument("root", help="dataset root: <root>/<species>/<id>.{wav,txt}")
    sp.add_argument("--csv", help="also write the manifest as CSV")
    sp.set_defaults(fn=_cmd_manifest)

    sp = sub.add_parser("segment", help="cut annotated regions into one-second windows")
    sp.add_argument("root")
    sp.add_argument("out", help="output directory for window wavs")
    sp.add_argument("--config")
    sp.set_defaults(fn=_cmd_segment)

    sp = sub.add_parser("featurize", help="turn window wavs into feature images")
    sp.add_argument("windows", help="directory of one-second window wavs")
    sp.add_argument("out")
    sp.add_argument("--config")
    sp.add_argument("--jobs", type=int, default=0, help="worker threads (0 = all cores)")
    sp.set_defaults(fn=_cmd_featurize)

    sp = sub.add_parser("split", help="assign recordings to train/val/test")
    sp.add_argument("root")
    sp.add_argument("csv", help="output split CSV")
    sp.add_argument("--config")
    sp.add_argument("--seed", type=int, default=None)
    sp.add_argument("--fractions", help="train,val,test e.g. 0.7,0.2,0.1")
    sp.set_defaults(fn=_cmd_split)

    sp = sub.add_parser("infer", help="classify feature images")
    sp.add_argument("model")
    sp.add_argument("features", nargs="+", help="feature image files")
    sp.add_argument("--classes", help="text file with one class name per line")
    sp.add_argument("--probs", action="store_true", help="include full probability vectors")
    sp.add_argument("--jobs", type=int, default=0)
    sp.set_defaults(fn=_cmd_infer)

    sp = sub.add_parser("evaluate", help="score a subset and write metric reports")
    sp.add_argument("model")
    sp.add_argument("split", help="split CSV from `wmwb split`")
    sp.add_argument("features", help="directory of feature images")
    sp.add_argument("--subset", default="test", choices=["train", "val", "test"])
    sp.add_argument("--out", default="eval_out")
    sp.set_defaults(fn=_cmd_evaluate)

    sp = sub.add_parser("bench", help="time forward passes of a model")
    sp.add_argument("model")
    sp.add_argument("--runs", type=int, default=10)
    sp.add_argument("--warmup", type=int, default=3)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--out", help="write the JSON report here instead of stdout")
    sp.set_defaults(fn=_cmd_bench)

    sp = sub.add_parser("catalog", help="build a catalog architecture")
    sp.add_argument("arch", help="vgg16, resnet50, or mobilenet_v2")
    sp.add_argument("--classes", type=int, required=True)
    sp.add_argument("--head", default="custom", choices=["imagenet_reference", "custom"])
    sp.add_argument("--hidden", type=int, default=256, help="custom head width")
    sp.add_argument("--seed", type=int, default=0, help="weight init seed for --out")
    sp.add_argument("--out", help="write a randomly initialized model file")
    sp.set_defaults(fn=_cmd_catalog)

    sp = sub.add_parser("config", help="show or validate pipeline configuration")
    sp.add_argument("--config")
    sp.add_argument("--dump", action="store_true", help="print the full effective config")
    sp.set_defaults(fn=_cmd_config)

    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except (WmwbError, OSError) as e:
        print(
            json.dumps({"error": type(e).__name__, "message": str(e)}),
            file=sys.stderr,
        )
        return 1


if __name__ == "__main__":
    sys.exit(main())
