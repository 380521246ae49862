"""Command line front-end: ``beltloc simulate|calibrate|localize|evaluate``.

Exit codes: 0 success, 2 configuration error, 3 I/O error, 4 algorithm
error. Failures print one JSON line ``{"error": {"category", "message"}}``
on stderr.
"""

from __future__ import annotations

import argparse
import json
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__
from .calibration import calibrate
from .config import Config, load_config
from .dsp import MultichannelClip, stft
from .errors import BeltlocError, ConfigurationError, ManifestError
from .evaluation import evaluate_sweep
from .fileutil import atomic_write_text
from .formats import (clip_name, creation_timestamp, dumps, load_manifest, load_profile,
                      report_document, save_profile)
from .localization import check_compatible, config_for_profile, localize
from .masking import estimate_noise
from .sim import (BeltScenario, GroundTruth, derive_seed, synthesize, synthesize_silence)
from .wavio import WavError, read_wav, write_wav

EXIT_CODES = {"config": 2, "io": 3, "algorithm": 4}
SILENCE_STREAM = 1_000_000


class CliIOError(BeltlocError):
    category = "io"


def _common(parser: argparse.ArgumentParser, top: bool) -> None:
    default = None if top else argparse.SUPPRESS
    parser.add_argument("--config", metavar="FILE", default=default,
                        help="JSON file overriding analysis defaults")
    parser.add_argument("--seed", type=int, default=default,
                        help="replace manifest seeds with ones derived from N")
    parser.add_argument("--threads", type=int, default=1 if top else argparse.SUPPRESS,
                        help="worker threads for batch work")


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="beltloc", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    _common(p, top=True)
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", help="render manifest sweeps to WAV files")
    _common(s, top=False)
    s.add_argument("manifest")
    s.add_argument("--out", metavar="DIR", help="output root (default: manifest directory)")

    c = sub.add_parser("calibrate", help="build a profile from eight anchor recordings")
    _common(c, top=False)
    c.add_argument("--angle", action="append", default=[], metavar="DEG=WAV",
                   help="anchor recording; give all eight angles 0,45,...,315")
    c.add_argument("--silence", metavar="WAV", help="background-noise recording")
    c.add_argument("--out", required=True, metavar="PROFILE")

    loc = sub.add_parser("localize", help="estimate the direction of one recording")
    _common(loc, top=False)
    loc.add_argument("--profile", required=True)
    loc.add_argument("--in", dest="input", required=True, metavar="WAV")
    loc.add_argument("--noise", metavar="WAV", help="background-noise recording")
    loc.add_argument("--leading-silence", type=float, metavar="SEC",
                     help="treat the first SEC seconds of the input as background noise")
    loc.add_argument("--curve", metavar="PATH", help="write the 360-point score curve (CSV)")

    e = sub.add_parser("evaluate", help="score a profile against simulated sweeps")
    _common(e, top=False)
    e.add_argument("--profile", required=True)
    e.add_argument("--manifest", required=True)
    e.add_argument("--report", required=True, metavar="PATH")
    e.add_argument("--data", metavar="DIR",
                   help="where `simulate` wrote the sweeps (default: manifest directory)")
    e.add_argument("--synthesize", action="store_true",
                   help="render the sweeps in memory instead of reading WAV files")
    return p


def _base_config(args) -> Config:
    return load_config(args.config) if args.config else Config()


def _read_clip(path) -> MultichannelClip:
    try:
        return read_wav(path)
    except WavError:
        raise
    except ValueError as exc:
        raise CliIOError(f"{path}: {exc}") from None


def _noise_from(clip: MultichannelClip, config: Config):
    return estimate_noise(stft(clip, config.frame_size, config.hop, config.window))


def _sweep_seed(spec, index: int, override: int | None) -> int:
    return spec.seed if override is None else derive_seed(override, index)


def _scenarios(manifest, spec, seed: int):
    return [BeltScenario(manifest.geometry, a, spec.distance, spec.signal, spec.duration,
                         spec.snr_db, derive_seed(seed, i), manifest.sample_rate)
            for i, a in enumerate(spec.angles)]


def _silence_scenario(manifest, spec, seed: int):
    return BeltScenario(manifest.geometry, spec.angles[0], spec.distance, spec.signal,
                        spec.silence_duration, spec.snr_db, derive_seed(seed, SILENCE_STREAM),
                        manifest.sample_rate)


def _pmap(fn, items, threads: int):
    if threads > 1:
        with ThreadPoolExecutor(threads) as pool:
            return list(pool.map(fn, items))
    return [fn(x) for x in items]


def _all_sweeps(manifest, override):
    specs = []
    if manifest.calibration is not None:
        specs.append((manifest.calibration, _sweep_seed(manifest.calibration, 0, override)))
    for i, spec in enumerate(manifest.sweeps):
        specs.append((spec, _sweep_seed(spec, i + 1, override)))
    return specs


def cmd_simulate(args, out) -> None:
    manifest = load_manifest(args.manifest)
    root = Path(args.out) if args.out else manifest.root
    for spec, seed in _all_sweeps(manifest, args.seed):
        folder = root / spec.output
        scenarios = _scenarios(manifest, spec, seed)
        silence_sc = _silence_scenario(manifest, spec, seed)

        def render(sc, folder=folder):
            clip, truth = synthesize(sc)
            stem = clip_name(sc.source_angle)
            write_wav(clip, folder / f"{stem}.wav")
            atomic_write_text(folder / f"{stem}.json", dumps(truth.to_dict()))
            return stem, truth

        results = _pmap(render, scenarios, args.threads)
        write_wav(synthesize_silence(silence_sc, noise_std=results[0][1].noise_std),
                  folder / "silence.wav")
        index = {"format": "beltloc-sweep", "format_version": 1, "name": spec.name,
                 "sample_rate": manifest.sample_rate, "seed": seed,
                 "signal": spec.signal.to_dict(),
                 "clips": [{"angle": t.source_angle, "wav": f"{s}.wav", "truth": f"{s}.json"}
                           for s, t in results],
                 "silence": "silence.wav"}
        atomic_write_text(folder / "sweep.json", dumps(index))
        print(f"{spec.name}: {len(results)} clips -> {folder}", file=out)


def _parse_angle_arg(text: str):
    angle, sep, path = text.partition("=")
    if not sep or not path:
        raise ConfigurationError(f"--angle expects DEG=WAV, got {text!r}")
    try:
        return int(angle), path
    except ValueError:
        raise ConfigurationError(f"--angle: {angle!r} is not an integer angle") from None


def cmd_calibrate(args, out) -> None:
    config = _base_config(args)
    if not args.angle:
        raise ConfigurationError("calibrate needs eight --angle DEG=WAV recordings")
    pairs = [_parse_angle_arg(a) for a in args.angle]
    angles = [a for a, _ in pairs]
    if len(set(angles)) != len(angles):
        raise ConfigurationError("duplicate --angle values")
    recordings = {a: _read_clip(p) for a, p in pairs}
    silence = _read_clip(args.silence) if args.silence else None
    profile = calibrate(recordings, silence, config, created=creation_timestamp(),
                        tool_version=__version__)
    save_profile(profile, args.out)
    print(f"profile written to {args.out}", file=out)
    for i, (theta, shown) in enumerate(zip(profile.motor_angles,
                                           profile.motor_angles_display), start=1):
        print(f"motor {i:2d}: {shown:3d} deg ({float(theta)!r})", file=out)


def cmd_localize(args, out) -> None:
    profile = load_profile(args.profile)
    config = config_for_profile(profile)
    if args.config:
        config = load_config(args.config, config)
    check_compatible(profile, config)
    clip = _read_clip(args.input)
    noise = None
    if args.noise and args.leading_silence:
        raise ConfigurationError("use either --noise or --leading-silence, not both")
    if args.noise:
        noise = _noise_from(_read_clip(args.noise), config)
    elif args.leading_silence:
        split = int(round(args.leading_silence * clip.sample_rate))
        if not 0 < split < clip.length:
            raise ConfigurationError("--leading-silence must lie inside the clip")
        noise = _noise_from(clip.segment(0, split), config)
        clip = clip.segment(split)
    est = localize(clip, profile, noise, config)
    print(f"angle: {est.best_angle}", file=out)
    print(f"score: {est.best_score!r}", file=out)
    print(f"motor: {est.motor_index}", file=out)
    print(f"motor_angle: {est.motor_angle!r}", file=out)
    if args.curve:
        lines = ["angle,score"] + [f"{i},{v!r}" for i, v in enumerate(est.score_curve.tolist())]
        atomic_write_text(args.curve, "\n".join(lines) + "\n")


def _load_sweep(folder: Path):
    index_path = folder / "sweep.json"
    try:
        index = json.loads(index_path.read_text())
    except OSError as exc:
        raise CliIOError(f"cannot read {index_path}: {exc} (run `simulate` first)") from None
    except json.JSONDecodeError as exc:
        raise CliIOError(f"{index_path} is not valid JSON: {exc}") from None
    items = []
    for entry in index["clips"]:
        clip = _read_clip(folder / entry["wav"])
        try:
            truth = GroundTruth.from_dict(json.loads((folder / entry["truth"]).read_text()))
        except (OSError, ValueError, KeyError) as exc:
            raise CliIOError(f"bad ground-truth sidecar {entry['truth']}: {exc}") from None
        items.append((clip, truth))
    return items, _read_clip(folder / index["silence"])


def cmd_evaluate(args, out) -> None:
    profile = load_profile(args.profile)
    config = config_for_profile(profile)
    if args.config:
        config = load_config(args.config, config)
    check_compatible(profile, config)
    manifest = load_manifest(args.manifest)
    if not manifest.sweeps:
        raise ManifestError("manifest declares no sweeps to evaluate")
    root = Path(args.data) if args.data else manifest.root
    reports = {}
    for spec, seed in _all_sweeps(manifest, args.seed):
        if spec is manifest.calibration:
            continue
        if args.synthesize:
            sweep = _pmap(synthesize, _scenarios(manifest, spec, seed), args.threads)
            silence = synthesize_silence(_silence_scenario(manifest, spec, seed),
                                         noise_std=sweep[0][1].noise_std)
        else:
            sweep, silence = _load_sweep(root / spec.output)
        noise = _noise_from(silence, config)
        reports[spec.name] = evaluate_sweep(
            sweep, profile, noise, config, threads=args.threads,
            metadata={"sweep": spec.name, "signal": spec.signal.to_dict(),
                      "snr_db": None if np.isinf(spec.snr_db) else spec.snr_db,
                      "seed": seed})
        r = reports[spec.name]
        print(f"{spec.name}: mae={r.mae:.3f} match_rate={r.match_rate:.4f} "
              f"n={len(r.per_angle)} failures={r.failures}", file=out)
    doc = report_document(reports, {"profile": str(args.profile),
                                    "profile_created": profile.created,
                                    "manifest": str(args.manifest)})
    atomic_write_text(args.report, dumps(doc))
    print(f"overall: mae={doc['overall']['mae']:.3f} "
          f"match_rate={doc['overall']['match_rate']:.4f}", file=out)


COMMANDS = {"simulate": cmd_simulate, "calibrate": cmd_calibrate,
            "localize": cmd_localize, "evaluate": cmd_evaluate}


def _fail(category: str, message: str, err) -> int:
    print(json.dumps({"error": {"category": category, "message": message}}), file=err)
    return EXIT_CODES[category]


def main(argv=None, out=None, err=None) -> int:
    out = out or sys.stdout
    err = err or sys.stderr
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        if exc.code in (0, None):
            return 0
        return _fail("config", "invalid command line", err)
    if args.threads < 1:
        return _fail("config", "--threads must be >= 1", err)
    try:
        COMMANDS[args.command](args, out)
    except BeltlocError as exc:
        return _fail(exc.category, str(exc), err)
    except OSError as exc:
        return _fail("io", str(exc), err)
    return 0


if __name__ == "__main__":
    sys.exit(main())
