"""Command-line front end: ``wmdld {mix,separate,evaluate,hist}``.

Exit codes: 0 on success, 2 on usage errors, 1 on runtime failures.
The default seed comes from the ``WMDLD_SEED`` environment variable.
"""
import argparse
import json
import logging
import os
from pathlib import Path
import sys

import numpy as np

from . import __version__
from ._backend import NAME as BACKEND
from .audio import StftConfig, read_wav, stft, write_wav
from .em import EmConfig
from .evaluation import MixingSpec, bss_metrics, mix
from .separate import separate
from .sparsify import (SparsifierConfig, angle_histogram, norm_threshold_for_count,
                       norm_threshold_points, select_points, write_histogram_csv,
                       write_scatter_csv)

log = logging.getLogger("wmdld")

MATERIAL_Q = {"speech": 2, "music": 3}
MODE_NAMES = {"wmdld": "weighted", "mdld": "unweighted"}


class UsageError(Exception):
    pass


def default_seed():
    return int(os.environ.get("WMDLD_SEED", "0"))


def default_frame_ms(material, sample_rate):
    if material == "speech":
        return 32.0
    return 46.4 if sample_rate >= 44100 else 128.0


def parse_angles(text):
    """``"a,b,c;d,e,f"`` -> list of angle rows (one row per angle index)."""
    rows = []
    for chunk in text.split(";"):
        vals = chunk.replace(",", " ").split()
        if not vals:
            continue
        try:
            rows.append([float(v) for v in vals])
        except ValueError:
            raise UsageError(f"bad angle value in {chunk!r}") from None
    if not rows:
        raise UsageError("no angles given")
    return rows


def cmd_mix(args):
    rows = parse_angles(args.angles)
    n = len(args.sources)
    if any(len(r) != n for r in rows):
        raise UsageError(f"each angle list needs {n} values (one per source)")
    spec = MixingSpec.from_angle_rows(rows)
    sources = [read_wav(p) for p in args.sources]
    for p, s in zip(args.sources, sources):
        if s.channels != 1:
            raise UsageError(f"{p} is not mono")
    peak = args.peak
    out = mix(sources, spec, peak=peak)
    if peak is None and out.samples.size and np.max(np.abs(out.samples)) > 1.0:
        out = mix(sources, spec, peak=0.99)
    write_wav(out, args.out, args.encoding)
    sidecar = {**out.metadata["mixing"], "mix_gain": out.metadata["mix_gain"],
               "sources": [str(p) for p in args.sources], "seed": args.seed}
    with open(Path(args.out).with_suffix(".json"), "w") as fh:
        json.dump(sidecar, fh, indent=2)
    return 0


def _resolve_separate(args, sample_rate):
    material = args.material
    cfg = {
        "input": str(args.input),
        "num_sources": args.num_sources,
        "material": material,
        "frame_ms": args.frame_ms if args.frame_ms is not None
        else default_frame_ms(material, sample_rate),
        "q": args.q if args.q is not None else MATERIAL_Q[material],
        "conf_threshold": args.conf_threshold,
        "min_points": args.min_points if args.min_points is not None else 100 * args.num_sources,
        "mode": args.mode,
        "seed": args.seed,
        "max_iterations": args.max_iterations,
        "encoding": args.encoding,
    }
    return cfg


def cmd_separate(args):
    if args.num_sources < 1:
        raise UsageError("--num-sources must be >= 1")
    mixture = read_wav(args.input)
    if mixture.channels < 2:
        raise UsageError("the input mixture needs at least two channels")
    cfg = _resolve_separate(args, mixture.sample_rate)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    sources, model = separate(
        mixture, cfg["num_sources"],
        StftConfig.from_ms(cfg["frame_ms"], mixture.sample_rate),
        SparsifierConfig(cfg["q"], cfg["conf_threshold"], cfg["min_points"]),
        EmConfig(max_iterations=cfg["max_iterations"], seed=cfg["seed"]),
        MODE_NAMES[cfg["mode"]],
    )
    width = max(2, len(str(len(sources.buffers))))
    for i, buf in enumerate(sources.buffers, 1):
        write_wav(buf, out_dir / f"source_{i:0{width}d}.wav", cfg["encoding"])
    model.save(out_dir / "model.json")
    sources.write_summary(out_dir / "assignment.json")
    with open(out_dir / "config.json", "w") as fh:
        json.dump({"command": "separate", **cfg, "version": __version__}, fh, indent=2)
    log.info("separated %d sources with the %s kernels", len(sources.buffers), BACKEND)
    return 0


def _wavs(directory):
    files = sorted(Path(directory).glob("*.wav"))
    if not files:
        raise UsageError(f"no .wav files in {directory}")
    return files


def cmd_evaluate(args):
    est_files = _wavs(args.estimates)
    ref_files = _wavs(args.references)
    if len(est_files) != len(ref_files):
        raise UsageError(f"{len(est_files)} estimates but {len(ref_files)} references")
    est = [read_wav(p) for p in est_files]
    ref = [read_wav(p) for p in ref_files]
    lengths = {b.n_samples for b in est + ref}
    if len(lengths) != 1:
        raise UsageError("estimates and references must all have the same length")
    if any(b.channels != 1 for b in est + ref):
        raise UsageError("estimates and references must be mono")
    report = bss_metrics(est, ref)
    report.meta = {"estimates": [p.name for p in est_files],
                   "references": [p.name for p in ref_files]}
    report.write_json(args.report)
    report.write_csv(Path(args.report).with_suffix(".csv"), args.label)
    avg = report.averages
    print(f"SDR {avg['sdr']:.2f} dB  SIR {avg['sir']:.2f} dB  SAR {avg['sar']:.2f} dB")
    return 0


def cmd_hist(args):
    mixture = read_wav(args.input)
    if mixture.channels != 2:
        raise UsageError(f"hist needs a 2-channel mixture, got {mixture.channels}")
    frame_ms = args.frame_ms if args.frame_ms is not None else \
        default_frame_ms(args.material, mixture.sample_rate)
    q = args.q if args.q is not None else MATERIAL_Q[args.material]
    spec = stft(mixture, StftConfig.from_ms(frame_ms, mixture.sample_rate))
    if args.method == "confidence":
        data = select_points(spec, SparsifierConfig(q, args.conf_threshold))
    else:
        threshold = args.norm_threshold
        if threshold is None:
            # match the number of points the confidence method keeps
            n = select_points(spec, SparsifierConfig(q, args.conf_threshold)).count
            threshold = norm_threshold_for_count(spec, n)
        data = norm_threshold_points(spec, threshold)
    centers, counts = angle_histogram(data, args.bins)
    write_histogram_csv(args.out, centers, counts)
    if args.scatter:
        write_scatter_csv(args.scatter, data)
    return 0


def build_parser():
    p = argparse.ArgumentParser(prog="wmdld", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=__version__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    m = sub.add_parser("mix", help="mix mono sources with an angle-defined matrix")
    m.add_argument("--sources", nargs="+", required=True)
    m.add_argument("--angles", required=True,
                   help='per-source angles in degrees; ";" separates angle lists, '
                        'e.g. "0,-87,-60,0,45;85,0,-60,0,45" for K=3')
    m.add_argument("--out", required=True)
    m.add_argument("--peak", type=float, default=None,
                   help="rescale the mixture to this peak (default: only if it would clip)")
    m.add_argument("--encoding", choices=["pcm16", "float32"], default="float32")
    m.add_argument("--seed", type=int, default=default_seed())
    m.set_defaults(func=cmd_mix)

    s = sub.add_parser("separate", help="separate a multichannel mixture")
    s.add_argument("--config", help="JSON config from a previous run; flags override it")
    s.add_argument("--input", required=True)
    s.add_argument("--num-sources", type=int, required=True)
    s.add_argument("--material", choices=sorted(MATERIAL_Q), default="speech")
    s.add_argument("--frame-ms", type=float)
    s.add_argument("--q", type=int)
    s.add_argument("--conf-threshold", type=float, default=300.0)
    s.add_argument("--min-points", type=int)
    s.add_argument("--mode", choices=sorted(MODE_NAMES), default="wmdld")
    s.add_argument("--max-iterations", type=int, default=200)
    s.add_argument("--seed", type=int, default=default_seed())
    s.add_argument("--encoding", choices=["pcm16", "float32"], default="float32")
    s.add_argument("--out-dir", required=True)
    s.set_defaults(func=cmd_separate)

    e = sub.add_parser("evaluate", help="score estimates against references")
    e.add_argument("--estimates", required=True)
    e.add_argument("--references", required=True)
    e.add_argument("--report", required=True)
    e.add_argument("--label", default="")
    e.set_defaults(func=cmd_evaluate)

    h = sub.add_parser("hist", help="angle histogram of sparsified 2-channel data")
    h.add_argument("--input", required=True)
    h.add_argument("--bins", type=int, default=180)
    h.add_argument("--method", choices=["confidence", "norm"], default="confidence")
    h.add_argument("--out", required=True)
    h.add_argument("--material", choices=sorted(MATERIAL_Q), default="speech")
    h.add_argument("--frame-ms", type=float)
    h.add_argument("--q", type=int)
    h.add_argument("--conf-threshold", type=float, default=300.0)
    h.add_argument("--norm-threshold", type=float)
    h.add_argument("--scatter", help="also write the selected points as CSV")
    h.set_defaults(func=cmd_hist)
    return p


_CONFIG_KEYS = {"input", "num_sources", "material", "frame_ms", "q", "conf_threshold",
                "min_points", "mode", "seed", "max_iterations", "encoding"}


def _apply_config(parser, argv):
    """Use a saved config.json as defaults for ``separate``."""
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config")
    known, _ = pre.parse_known_args(argv)
    if not known.config or not argv or argv[0] != "separate":
        return
    with open(known.config) as fh:
        saved = json.load(fh)
    sep = parser._subparsers._group_actions[0].choices["separate"]
    sep.set_defaults(**{k: v for k, v in saved.items() if k in _CONFIG_KEYS})
    for action in sep._actions:
        if action.dest in saved and action.dest in _CONFIG_KEYS:
            action.required = False


def _join_angles(argv):
    # angle lists often start with "-", which argparse would take for a flag
    out = []
    it = iter(argv)
    for a in it:
        if a == "--angles":
            out.append("--angles=" + next(it, ""))
        else:
            out.append(a)
    return out


def main(argv=None):
    argv = _join_angles(list(sys.argv[1:] if argv is None else argv))
    parser = build_parser()
    try:
        _apply_config(parser, argv)
    except (OSError, ValueError) as exc:
        print(f"wmdld: cannot read config: {exc}", file=sys.stderr)
        return 2
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(name)s: %(message)s")
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"wmdld {args.command}: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:
        print(f"wmdld {args.command}: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
