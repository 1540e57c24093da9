"""Pipeline driver: one subcommand per stage, files as the inter-stage contract.

Every threshold is exposed as a flag; a flat key=value config file can set
any of them, and explicit flags win over the config.
"""

from pathlib import Path

import click
import numpy as np

from .cluster import (
    AhcParams,
    CosineAffinityProvider,
    affinity_rows,
    ahc_pipeline,
    labels_to_diarization,
    spectral_cluster,
    uniform_segments,
)
from .core import ConstraintError, Diarization, InputError, derasterize, rasterize
from .fusion import fuse as fuse_systems
from .io import (
    parse_config,
    parse_rttm,
    read_embeddings,
    read_posteriors,
    write_posteriors,
    write_embeddings,
    write_rttm,
)
from .metrics import score_corpus
from .overlap import (
    TsVadConfig,
    assign_overlap_two_nearest,
    merge_full,
    merge_partial,
    select_targets,
    tsvad_decode,
)
from .simulate import (
    random_pattern,
    simulate_embeddings,
    simulate_labels,
    simulate_tsvad_posteriors,
)
from .vad import binarize, fuse_majority

CONFIG_TYPES = {
    "frame_shift": float,
    "onset_thr": float,
    "min_on": float,
    "min_off": float,
    "window": float,
    "shift": float,
    "segment_thr": float,
    "stop_thr": float,
    "long_min": float,
    "speaker_thr": float,
    "max_speakers": int,
    "context_n": int,
    "n_slots": int,
    "chunk": float,
    "min_enroll": float,
    "decision_thr": float,
    "overlap_thr": float,
    "collar": float,
    "rank_exponent": float,
    "seed": int,
    "within_cos": float,
    "noise": float,
    "duration": float,
    "speakers": int,
    "dim": int,
}


@click.group()
@click.option(
    "--config",
    "config_path",
    type=click.Path(dir_okay=False),
    default=None,
    help="Flat key=value file providing defaults; explicit flags win.",
)
@click.pass_context
def cli(ctx, config_path):
    """Speaker diarization pipeline stages."""
    if config_path is None:
        return
    raw = parse_config(Path(config_path).read_text())
    typed = {}
    for key, value in raw.items():
        if key not in CONFIG_TYPES:
            raise InputError(f"unknown config key {key!r}")
        try:
            typed[key] = CONFIG_TYPES[key](value)
        except ValueError:
            raise InputError(f"config key {key!r} has invalid value {value!r}") from None
    ctx.default_map = {name: dict(typed) for name in cli.commands}


def _read_text(path) -> str:
    return Path(path).read_text()


def _read_diars(path) -> dict[str, Diarization]:
    return parse_rttm(_read_text(path))


def _pick_recording(diars: dict[str, Diarization], recording: str | None) -> Diarization:
    if recording is not None:
        if recording not in diars:
            raise InputError(f"recording {recording!r} not found in RTTM")
        return diars[recording]
    if len(diars) != 1:
        raise ConstraintError(
            f"RTTM holds {len(diars)} recordings; select one with --recording"
        )
    return next(iter(diars.values()))


@cli.command("vad-fuse")
@click.argument("posteriors", nargs=-1, required=True, type=click.Path(dir_okay=False))
@click.option("--onset-thr", default=0.5, show_default=True, help="Speech posterior threshold.")
@click.option("--min-on", default=0.0, show_default=True, help="Delete speech runs shorter than this (s).")
@click.option("--min-off", default=0.0, show_default=True, help="Fill non-speech gaps shorter than this (s).")
@click.option("--recording", default="rec", show_default=True)
@click.option("--out", required=True, type=click.Path(dir_okay=False))
def vad_fuse_cmd(posteriors, onset_thr, min_on, min_off, recording, out):
    """Binarize VAD posterior files and fuse them by majority vote."""
    tracks = []
    for path in posteriors:
        tracks.extend(read_posteriors(Path(path).read_bytes()))
    binary = [
        rasterize(binarize(t, onset_thr, min_on, min_off), t.frame_shift, t.duration)
        for t in tracks
    ]
    fused = fuse_majority(binary)
    diar = Diarization(recording, tuple((seg, "speech") for seg in derasterize(fused)))
    Path(out).write_text(write_rttm(diar))
    click.echo(f"fused {len(tracks)} tracks -> {len(diar.turns)} speech segments")


@cli.command("segment")
@click.option("--speech", "speech_path", required=True, type=click.Path(dir_okay=False))
@click.option("--window", default=1.28, show_default=True)
@click.option("--shift", default=0.32, show_default=True)
@click.option("--out", required=True, type=click.Path(dir_okay=False))
def segment_cmd(speech_path, window, shift, out):
    """Cut uniform windows over the speech regions of an RTTM."""
    diars = _read_diars(speech_path)
    out_diars = []
    count = 0
    for rec in sorted(diars):
        segs = uniform_segments(diars[rec].support(), window, shift)
        out_diars.append(
            Diarization(rec, tuple((seg, f"win{i:06d}") for i, seg in enumerate(segs)))
        )
        count += len(segs)
    Path(out).write_text(write_rttm(out_diars))
    click.echo(f"wrote {count} windows")


@cli.command("diarize-ahc")
@click.option("--emb", "emb_path", required=True, type=click.Path(dir_okay=False))
@click.option("--recording", default=None, help="Recording id (default: embedding file stem).")
@click.option("--out", required=True, type=click.Path(dir_okay=False))
@click.option("--segment-thr", default=0.54, show_default=True)
@click.option("--stop-thr", default=0.6, show_default=True)
@click.option("--long-min", default=6.0, show_default=True)
@click.option("--speaker-thr", default=0.2, show_default=True)
def diarize_ahc_cmd(emb_path, recording, out, segment_thr, stop_thr, long_min, speaker_thr):
    """Agglomerative diarization from a DPE1 embedding file."""
    embs = read_embeddings(Path(emb_path).read_bytes())
    params = AhcParams(
        segment_thr=segment_thr, stop_thr=stop_thr, long_min=long_min, speaker_thr=speaker_thr
    )
    labels, merged = ahc_pipeline(embs, params)
    rec = recording or Path(emb_path).stem
    diar = labels_to_diarization(rec, merged.segments, labels)
    Path(out).write_text(write_rttm(diar))
    click.echo(f"{rec}: {len(diar.speakers)} speakers, {len(diar.turns)} turns")


@cli.command("diarize-sc")
@click.option("--emb", "emb_path", required=True, type=click.Path(dir_okay=False))
@click.option("--recording", default=None, help="Recording id (default: embedding file stem).")
@click.option("--out", required=True, type=click.Path(dir_okay=False))
@click.option("--max-speakers", default=20, show_default=True)
@click.option("--context-n", default=64, show_default=True)
@click.option("--seed", default=0, show_default=True)
def diarize_sc_cmd(emb_path, recording, out, max_speakers, context_n, seed):
    """Spectral-clustering diarization from a DPE1 embedding file."""
    embs = read_embeddings(Path(emb_path).read_bytes())
    affinity = affinity_rows(embs, CosineAffinityProvider(context_n))
    labels = spectral_cluster(affinity, max_speakers=max_speakers, seed=seed)
    rec = recording or Path(emb_path).stem
    diar = labels_to_diarization(rec, embs.segments, labels)
    Path(out).write_text(write_rttm(diar))
    click.echo(f"{rec}: {len(diar.speakers)} speakers, {len(diar.turns)} turns")


@cli.command("overlap-assign")
@click.option("--base", "base_path", required=True, type=click.Path(dir_okay=False))
@click.option("--posterior", "posterior_path", required=True, type=click.Path(dir_okay=False))
@click.option("--overlap-thr", default=0.85, show_default=True)
@click.option("--recording", default=None)
@click.option("--out", required=True, type=click.Path(dir_okay=False))
def overlap_assign_cmd(base_path, posterior_path, overlap_thr, recording, out):
    """Assign the two nearest speakers over detected overlap regions."""
    base = _pick_recording(_read_diars(base_path), recording)
    tracks = read_posteriors(Path(posterior_path).read_bytes())
    if len(tracks) != 1:
        raise ConstraintError(
            f"overlap posterior file must hold exactly one track, got {len(tracks)}"
        )
    overlaps = binarize(tracks[0], overlap_thr)
    result = assign_overlap_two_nearest(base, overlaps)
    Path(out).write_text(write_rttm(result))
    click.echo(f"{base.recording_id}: assigned {len(overlaps)} overlap regions")


@cli.command("tsvad-merge")
@click.option("--mode", type=click.Choice(["full", "partial"]), required=True)
@click.option("--base", "base_path", required=True, type=click.Path(dir_okay=False))
@click.option("--posteriors", "posteriors_path", required=True, type=click.Path(dir_okay=False))
@click.option("--speech", "speech_path", default=None, type=click.Path(dir_okay=False),
              help="Speech regions RTTM (default: base support).")
@click.option("--recording", default=None)
@click.option("--n-slots", default=8, show_default=True)
@click.option("--min-enroll", default=16.0, show_default=True)
@click.option("--decision-thr", default=0.5, show_default=True)
@click.option("--out", required=True, type=click.Path(dir_okay=False))
def tsvad_merge_cmd(
    mode, base_path, posteriors_path, speech_path, recording, n_slots, min_enroll, decision_thr, out
):
    """Decode TS-VAD slot posteriors and merge them into the base diarization."""
    base = _pick_recording(_read_diars(base_path), recording)
    cfg = TsVadConfig(n_slots=n_slots, min_enroll=min_enroll, decision_thr=decision_thr)
    zeros = {spk: np.zeros(1, dtype=np.float32) for spk in base.speakers}
    selection = select_targets(base, zeros, cfg, dim=1)
    if speech_path is not None:
        speech = _pick_recording(_read_diars(speech_path), base.recording_id
                                 if recording is None else recording).support()
    else:
        speech = base.support()
    posteriors = read_posteriors(Path(posteriors_path).read_bytes())
    decoded = tsvad_decode(posteriors, selection.slot_speakers, cfg, speech, base.recording_id)
    if mode == "full":
        kept = [t for t in base.turns if t[1] in selection.kept_aside]
        result = merge_full(decoded, kept)
    else:
        result = merge_partial(base, decoded)
    Path(out).write_text(write_rttm(result))
    click.echo(
        f"{base.recording_id}: {mode} merge, slots={[s or '-' for s in selection.slot_speakers]}"
    )


@cli.command("fuse")
@click.argument("rttms", nargs=-1, required=True, type=click.Path(dir_okay=False))
@click.option("--weights", default=None,
              help="Comma-separated system weights; default is rank-based by input order.")
@click.option("--rank-exponent", default=0.5, show_default=True)
@click.option("--out", required=True, type=click.Path(dir_okay=False))
def fuse_cmd(rttms, weights, rank_exponent, out):
    """Fuse diarization systems with overlap-aware weighted voting."""
    systems = [_read_diars(path) for path in rttms]
    recordings = set(systems[0])
    for sys_diars in systems[1:]:
        if set(sys_diars) != recordings:
            raise ConstraintError("all systems must cover the same recordings")
    weight_list = None
    if weights is not None:
        try:
            weight_list = [float(w) for w in weights.split(",")]
        except ValueError:
            raise InputError(f"invalid --weights value {weights!r}") from None
    fused = []
    for rec in sorted(recordings):
        fused.append(
            fuse_systems([s[rec] for s in systems], weight_list, rank_exponent)
        )
    Path(out).write_text(write_rttm(fused))
    click.echo(f"fused {len(systems)} systems over {len(fused)} recordings")


@cli.command("score")
@click.option("--ref", "ref_path", required=True, type=click.Path(dir_okay=False))
@click.option("--hyp", "hyp_path", required=True, type=click.Path(dir_okay=False))
@click.option("--collar", default=0.25, show_default=True)
@click.option("--no-overlap", is_flag=True, default=False,
              help="Exclude reference overlap regions from scoring.")
def score_cmd(ref_path, hyp_path, collar, no_overlap):
    """Score hypothesis RTTM against reference RTTM (DER/JER)."""
    refs = _read_diars(ref_path)
    hyps = _read_diars(hyp_path)
    overall, per_rec = score_corpus(refs, hyps, collar=collar, score_overlap=not no_overlap)
    for rec, rep in per_rec.items():
        click.echo(
            f"recording={rec} der={rep.der_pct:.3f} miss={rep.miss_pct:.3f} "
            f"fa={rep.fa_pct:.3f} confusion={rep.confusion_pct:.3f} jer={rep.jer_pct:.3f}"
        )
    click.echo(
        f"OVERALL der={overall.der_pct:.3f} miss={overall.miss_pct:.3f} "
        f"fa={overall.fa_pct:.3f} confusion={overall.confusion_pct:.3f} "
        f"jer={overall.jer_pct:.3f} scored_speech={overall.scored_ref_seconds:.3f}"
    )


@cli.command("simulate")
@click.option("--out-dir", required=True, type=click.Path(file_okay=False))
@click.option("--duration", default=600.0, show_default=True)
@click.option("--speakers", "n_speakers", default=4, show_default=True)
@click.option("--seed", default=0, show_default=True)
@click.option("--within-cos", default=0.9, show_default=True)
@click.option("--noise", default=0.2, show_default=True)
@click.option("--dim", default=256, show_default=True)
@click.option("--n-slots", default=8, show_default=True)
@click.option("--patterns", "patterns_path", default=None, type=click.Path(dir_okay=False),
              help="Pattern-pool RTTM (default: a random conversation).")
@click.option("--recording", default="sim", show_default=True)
def simulate_cmd(
    out_dir, duration, n_speakers, seed, within_cos, noise, dim, n_slots, patterns_path, recording
):
    """Write a ground-truth RTTM with matching embedding and posterior files."""
    if patterns_path is not None:
        pool = list(_read_diars(patterns_path).values())
    else:
        pool = [random_pattern(n_speakers, duration * 1.4 + 60.0, rng=seed)]
    diar = simulate_labels(pool, duration, rng_seed=seed, recording_id=recording)
    embs = simulate_embeddings(diar, dim=dim, within_cos=within_cos, rng_seed=seed + 1)
    cfg = TsVadConfig(n_slots=n_slots)
    zeros = {spk: np.zeros(dim, dtype=np.float32) for spk in diar.speakers}
    selection = select_targets(diar, zeros, cfg, dim=dim)
    tracks = simulate_tsvad_posteriors(diar, selection.slot_speakers, noise=noise)

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / f"{recording}.rttm").write_text(write_rttm(diar))
    speech = Diarization(recording, tuple((seg, "speech") for seg in diar.support()))
    (out / f"{recording}_speech.rttm").write_text(write_rttm(speech))
    (out / f"{recording}.dpe").write_bytes(write_embeddings(embs))
    (out / f"{recording}.dpp").write_bytes(write_posteriors(tracks))
    click.echo(
        f"{recording}: {len(diar.speakers)} speakers, {len(embs)} embeddings, "
        f"{len(tracks)} posterior tracks -> {out}"
    )


def main(argv=None) -> int:
    """Entry point mapping pipeline errors to exit codes (1 input, 2 constraint)."""
    try:
        cli.main(args=argv, standalone_mode=False)
    except click.exceptions.Exit as exc:
        return exc.exit_code
    except click.ClickException as exc:
        exc.show()
        return exc.exit_code
    except click.Abort:
        return 130
    except InputError as exc:
        click.echo(f"error: {exc}", err=True)
        return 1
    except ConstraintError as exc:
        click.echo(f"error: {exc}", err=True)
        return 2
    except OSError as exc:
        click.echo(f"error: {exc}", err=True)
        return 1
    return 0
