"""Command-line interface: analyze, synth, copysynth, mcd."""

import argparse
import sys

from . import features
from .audio_io import read_wav, write_wav
from .pipeline import analyze_waveform, as_written, copysynth, mcd_between
from .synthesis import synthesize


def _positive_int(text):
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError("must be >= 1")
    return value


def build_parser():
    parser = argparse.ArgumentParser(prog="gmwvoc", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("analyze", help="extract a feature file from a 16 kHz mono WAV")
    p.add_argument("input")
    p.add_argument("-o", "--output", required=True)
    p.add_argument("--k", type=_positive_int, default=16, help="mixture components per frame")
    p.add_argument("--states", type=_positive_int, default=2, help="HMM states")
    p.add_argument("--scales", type=_positive_int, default=10, help="CWT scales")
    p.add_argument("--scale0", type=float, default=0.02, help="smallest CWT scale in seconds")
    p.add_argument("--fft", type=_positive_int, default=1024, help="FFT size")
    p.add_argument("--workers", type=_positive_int, default=1)

    p = sub.add_parser("synth", help="render a feature file to WAV")
    p.add_argument("input")
    p.add_argument("-o", "--output", required=True)
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--split-hz", type=float, default=4000.0)
    p.add_argument("--no-f0-residual", action="store_true")
    p.add_argument("--hmm-restore", action="store_true")

    p = sub.add_parser("copysynth", help="analyse, resynthesise and report MCD")
    p.add_argument("input")
    p.add_argument("-o", "--output", required=True)
    p.add_argument("--anchor", action="store_true")
    p.add_argument("--workers", type=_positive_int, default=1)

    p = sub.add_parser("mcd", help="mel-cepstral distortion between two WAVs")
    p.add_argument("ref")
    p.add_argument("test")
    return parser


def run(args):
    if args.command == "analyze":
        ff = analyze_waveform(read_wav(args.input), K=args.k, n_states=args.states,
                              n_scales=args.scales, scale0=args.scale0, fft_size=args.fft,
                              workers=args.workers)
        features.save(ff, args.output)
        print(f"n_frames={ff.n_frames}")
        print(f"K={ff.n_components}")
        print(f"n_scales={ff.n_scales}")
    elif args.command == "synth":
        ff = features.load(args.input)
        out = synthesize(ff, seed=args.seed, split_hz=args.split_hz,
                         f0_residual=not args.no_f0_residual, hmm_restore=args.hmm_restore)
        write_wav(as_written(out), args.output)
        print(f"n_samples={len(out)}")
    elif args.command == "copysynth":
        out, report = copysynth(read_wav(args.input), anchor=args.anchor, workers=args.workers)
        write_wav(out, args.output)
        print(report.as_text())
    elif args.command == "mcd":
        print(mcd_between(read_wav(args.ref), read_wav(args.test)).as_text())


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        run(args)
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())

