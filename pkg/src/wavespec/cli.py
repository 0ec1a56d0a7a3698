"""``wavespec`` command line: synth, wavelet, esd, mc, report and replay.

Exit codes: 0 success, 1 validation error, 2 runtime error.  Every command
writes a manifest holding the resolved argument list; ``wavespec replay``
re-runs it.
"""
from __future__ import annotations

import argparse
import hashlib
import json
import sys
from pathlib import Path
from typing import List, Optional, Sequence

import numpy as np

from . import __version__
from .errors import ValidationError, WavespecError
from .io import (FORMAT_VERSION, read_json, read_paths, read_pyramid, write_json, write_paths,
                 write_pyramid, write_spectrum_csv)
from .rng import derive
from .specmat import log_spectrum, wavelet_matrix
from .synth import EnsembleSpec, HurstLaw, MixingSpec, synth_ensemble
from .wavelet import mallat_pyramid

EXIT_OK, EXIT_VALIDATION, EXIT_RUNTIME = 0, 1, 2


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ValidationError(f"{self.prog}: {message}")


def _seed(text: str) -> int:
    value = int(text, 0)
    if not 0 <= value <= 2**64 - 1:
        raise argparse.ArgumentTypeError(f"seed must be an unsigned 64-bit integer, got {text}")
    return value


def _scale(text: str) -> int:
    """``2^m`` or a plain power of two."""
    try:
        value = 2 ** int(text[2:]) if text.startswith("2^") else int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"scale must be 2^m or an integer, got {text!r}") from None
    if value < 2 or value & (value - 1):
        raise argparse.ArgumentTypeError(f"scale must be a power of two >= 2, got {text!r}")
    return value


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="wavespec", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"wavespec {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("synth", help="synthesize a mixed-Hurst ensemble Y = P X")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--p", type=int, required=True)
    p.add_argument("--hurst", required=True, help='law as "H:mass,...", e.g. "0.2:1/3,0.5:1/3,0.8:1/3"')
    p.add_argument("--mixing", default="identity", help="identity | cond:<bound>")
    p.add_argument("--seed", type=_seed, default=0)
    p.add_argument("--out", required=True)
    p.add_argument("--latent-out", help="also write the latent X")

    p = sub.add_parser("wavelet", help="Mallat pyramid of a path file")
    p.add_argument("--in", dest="inp", required=True)
    p.add_argument("--family", default="db2")
    p.add_argument("--max-octave", type=int, required=True)
    p.add_argument("--out", required=True)

    p = sub.add_parser("esd", help="rescaled log spectrum of a wavelet random matrix")
    p.add_argument("--pyramid", required=True)
    p.add_argument("--scale", type=_scale, required=True, help="a, as 2^m")
    p.add_argument("--octave", type=int, default=0, help="fixed octave j (matrix at a 2^j)")
    p.add_argument("--out", required=True)

    p = sub.add_parser("mc", help="Monte Carlo experiment from a TOML/JSON config")
    p.add_argument("--config", required=True)
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--out", help="output directory (default: the config's outputs entry)")

    p = sub.add_parser("report", help="print a run summary")
    p.add_argument("--summary", required=True, help="summary.json or its directory")

    p = sub.add_parser("replay", help="re-run the command recorded in a manifest")
    p.add_argument("--manifest", required=True)
    return parser


# --- commands --------------------------------------------------------------

def _sha256(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _manifest(path, argv: Sequence[str], resolved, outputs: Sequence[Path]) -> None:
    write_json(path, {
        "tool": "wavespec",
        "version": __version__,
        "format_version": FORMAT_VERSION,
        "argv": list(argv),
        "resolved": resolved,
        "outputs": {str(p): _sha256(p) for p in outputs},
    })


def _file_manifest_path(out) -> Path:
    return Path(str(out) + ".manifest.json")


def cmd_synth(args, argv) -> int:
    spec = EnsembleSpec(args.n, args.p, HurstLaw.parse(args.hurst), MixingSpec.parse(args.mixing),
                        seed=args.seed)
    ens = synth_ensemble(spec, derive(args.seed))
    meta = {
        "seed": args.seed,
        "hurst_assignment": list(ens.assignment.values),
        "hurst_law": spec.law.format(),
        "mixing_kind": spec.mixing.kind,
        "condition_bound": spec.mixing.condition_bound,
        "mixing_matrix": ens.mixing.tolist(),
        "time_grid": "t = 1..n",
    }
    write_paths(args.out, ens.observed, role="observed", **meta)
    outputs = [Path(args.out), Path(args.out + ".json")]
    if args.latent_out:
        write_paths(args.latent_out, ens.latent, role="latent", **meta)
        outputs += [Path(args.latent_out), Path(args.latent_out + ".json")]
    resolved = {"n": args.n, "p": args.p, "hurst": spec.law.format(), "mixing": spec.mixing.format(),
                "seed": args.seed}
    _manifest(_file_manifest_path(args.out), argv, resolved, outputs)
    return EXIT_OK


def cmd_wavelet(args, argv) -> int:
    paths, meta = read_paths(args.inp)
    pyramid = mallat_pyramid(paths, args.family, args.max_octave)
    write_pyramid(args.out, pyramid, source=str(args.inp))
    resolved = {"in": args.inp, "in_sha256": _sha256(args.inp), "family": pyramid.family.name,
                "max_octave": args.max_octave}
    _manifest(_file_manifest_path(args.out), argv, resolved, [Path(args.out), Path(args.out + ".json")])
    return EXIT_OK


def cmd_esd(args, argv) -> int:
    pyramid, _ = read_pyramid(args.pyramid)
    octave_total = int(np.log2(args.scale)) + args.octave
    spectrum = log_spectrum(wavelet_matrix(pyramid, octave_total, args.octave))
    write_spectrum_csv(args.out, spectrum)
    resolved = {"pyramid": args.pyramid, "pyramid_sha256": _sha256(args.pyramid), "scale": args.scale,
                "octave": args.octave, "log": "natural"}
    _manifest(_file_manifest_path(args.out), argv, resolved, [Path(args.out)])
    return EXIT_OK


def cmd_mc(args, argv) -> int:
    from .harness import ExperimentConfig, ExperimentFailure, run_experiment, write_outputs

    config = ExperimentConfig.load(args.config)
    outdir = args.out or config.outputs
    if not outdir:
        raise ValidationError("no output directory: pass --out or set outputs in the config")
    status = EXIT_OK
    try:
        summary = run_experiment(config, threads=args.threads)
    except ExperimentFailure as exc:
        print(f"wavespec: {exc}", file=sys.stderr)
        summary, status = exc.summary, EXIT_RUNTIME
    paths = write_outputs(summary, outdir)
    outputs = [p for k, p in paths.items() if k != "timing"]
    _manifest(Path(outdir) / "manifest.json", argv, config.resolved(), outputs)
    print(format_report(summary.to_json()))
    return status


def format_report(data) -> str:
    lines = [f"experiment {data['config']['name']} (seed {data['config']['seed']}, "
             f"law {data['config']['hurst']})"]
    for c in data["configs"]:
        lines.append(f"  (n, a, p) = ({c['n']}, {c['a']}, {c['p']}), {c['replicates']} replicates, "
                     f"{len(c['failed'])} failed, octaves {c['octave_range']}")
        modes = ", ".join(f"{m['location']:.2f} (mass {m['mass']:.3f})" for m in c["modes"])
        lines.append(f"    modes: {modes or 'none'}"
                     + ("" if len(c["modes"]) == c["modes_expected"]
                        else f"  [expected {c['modes_expected']}]"))
        lines.append(f"    median KS: multiscale {c['ks_multiscale']['median']:.4f}, "
                     f"direct {c['ks_direct']['median']:.4f}")
    t = data.get("trend")
    if t:
        lines.append(f"  trend (multiscale): {t['median_ks']} strictly decreasing: {t['strictly_decreasing']}")
        lines.append(f"  trend (direct): {t['median_ks_direct']} strictly decreasing: "
                     f"{t['direct_strictly_decreasing']}")
    return "\n".join(lines)


def cmd_report(args, argv) -> int:
    path = Path(args.summary)
    if path.is_dir():
        path = path / "summary.json"
    print(format_report(read_json(path)))
    return EXIT_OK


def cmd_replay(args, argv) -> int:
    manifest = read_json(args.manifest)
    recorded = manifest.get("argv")
    if not recorded or recorded[0] == "replay":
        raise ValidationError(f"{args.manifest}: no replayable command recorded")
    return main(recorded)


COMMANDS = {"synth": cmd_synth, "wavelet": cmd_wavelet, "esd": cmd_esd, "mc": cmd_mc,
            "report": cmd_report, "replay": cmd_replay}


def main(argv: Optional[List[str]] = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        args = build_parser().parse_args(argv)
        return COMMANDS[args.command](args, argv)
    except ValidationError as exc:
        print(f"wavespec: error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except (WavespecError, OSError, KeyError) as exc:
        print(f"wavespec: runtime error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
