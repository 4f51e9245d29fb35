"""Command-line entry points.

Exit codes: 0 success, 1 validation failure, 2 unreadable or missing input.
"""
from __future__ import annotations

import functools
import json
import sys
from pathlib import Path

import click
import numpy as np

from . import formats, latent, metrics, pipeline, synth
from .document import load_pdg_document, load_pose, validate_document
from .errors import InputError, PdgKitError, ValidationError
from .motion import DEFAULT_FRAMES, EASINGS
from .scene import load_scene, save_scene

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_IO = 2


def _translate_errors(fn):
    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except ValidationError as exc:
            click.echo(f"error: {exc}", err=True)
            sys.exit(EXIT_VALIDATION)
        except (InputError, OSError) as exc:
            click.echo(f"error: {exc}", err=True)
            sys.exit(EXIT_IO)
        except PdgKitError as exc:
            click.echo(f"error: {exc}", err=True)
            sys.exit(EXIT_VALIDATION)

    return wrapper


@click.group()
def main():
    """Compile proxy-dynamic-graph motion into diffusion conditioning signals."""


@main.command()
@click.argument("pdg_path", type=click.Path(path_type=Path))
@_translate_errors
def validate(pdg_path: Path):
    """Validate a PDG document; prints one diagnostic per line."""
    doc = load_pdg_document(pdg_path)
    diagnostics = validate_document(doc, pdg_path.parent)
    for violation in diagnostics:
        click.echo(str(violation))
    sys.exit(EXIT_OK if not diagnostics else EXIT_VALIDATION)


@main.command()
@click.argument("scene_manifest", type=click.Path(path_type=Path))
@click.argument("pdg_path", type=click.Path(path_type=Path))
@click.argument("pose_path", type=click.Path(path_type=Path))
@click.option("--frames", default=DEFAULT_FRAMES, show_default=True, help="Motion frames T.")
@click.option("--easing", default="linear", show_default=True,
              type=click.Choice(sorted(EASINGS)))
@click.option("--palette", default="position", show_default=True,
              type=click.Choice(["position", "image"]))
@click.option("--timestamp", is_flag=True, help="Record a wall-clock timestamp in the manifest.")
@click.option("-o", "--out", "out_dir", required=True, type=click.Path(path_type=Path))
@_translate_errors
def compile(scene_manifest: Path, pdg_path: Path, pose_path: Path, frames: int,
            easing: str, palette: str, timestamp: bool, out_dir: Path):
    """Compile scene + PDG + pose into tracking video, masks, and flow."""
    scene = load_scene(scene_manifest)
    doc = load_pdg_document(pdg_path)
    pose = load_pose(pose_path)
    result = pipeline.compile_document(
        scene, doc, pose, frames=frames, easing=easing, palette=palette,
        base_dir=pdg_path.parent,
    )
    stamp = None
    if timestamp:
        import datetime

        stamp = datetime.datetime.now(datetime.timezone.utc).isoformat()
    manifest = pipeline.write_compile(result, out_dir, timestamp=stamp)
    click.echo(str(manifest))


@main.command()
@click.argument("compile_dir", type=click.Path(path_type=Path))
@click.argument("edited_frame", type=click.Path(path_type=Path))
@click.option("--prompt", default="", help="Source text prompt.")
@click.option("--prompt-new", default="", help="Prompt describing the edited reveal.")
@click.option("--steps", "total_steps", default=latent.DEFAULT_TOTAL_STEPS, show_default=True,
              help="Total denoising steps N.")
@click.option("--replace", "replace_steps", default=latent.DEFAULT_REPLACE_STEPS,
              show_default=True, help="Composite replacement steps M.")
@click.option("-o", "--out", "out_dir", required=True, type=click.Path(path_type=Path))
@_translate_errors
def bundle(compile_dir: Path, edited_frame: Path, prompt: str, prompt_new: str,
           total_steps: int, replace_steps: int, out_dir: Path):
    """Export the conditioning bundle for an external diffusion backend."""
    compiled = pipeline.read_compile(compile_dir)
    edited = formats.read_image(edited_frame)
    if edited.shape != compiled.input_image.shape:
        raise ValidationError(
            f"edited frame {edited.shape} does not match scene image {compiled.input_image.shape}"
        )
    try:
        manifest = latent.export_bundle(
            compiled.input_image,
            edited,
            compiled.tracking,
            compiled.disocclusion,
            prompt=prompt,
            prompt_new=prompt_new,
            out_dir=out_dir,
            total_steps=total_steps,
            replace_steps=replace_steps,
        )
    except ValueError as exc:
        raise ValidationError(str(exc)) from None
    click.echo(str(manifest))


def _load_candidate_video(candidate_dir: Path) -> np.ndarray:
    frames = sorted(candidate_dir.glob("*.png"))
    if not frames:
        raise InputError(f"no PNG frames found in {candidate_dir}")
    return np.stack([formats.read_image(p) for p in frames])


@main.command("metrics")
@click.argument("candidate_dirs", nargs=-1, required=True, type=click.Path(path_type=Path))
@click.option("--compile-dir", required=True, type=click.Path(path_type=Path))
@click.option("--edited-frame", required=True, type=click.Path(path_type=Path))
@click.option("--tau", default=metrics.DEFAULT_TAU, show_default=True,
              help="Ground-truth flow magnitude gate (px) for the cosine average.")
@click.option("-o", "--out", "out_dir", required=True, type=click.Path(path_type=Path))
@_translate_errors
def metrics_cmd(candidate_dirs, compile_dir: Path, edited_frame: Path, tau: float,
                out_dir: Path):
    """Score candidate videos (directories of PNG frames) against a compile."""
    compiled = pipeline.read_compile(compile_dir)
    edited = formats.read_image(edited_frame)
    reports = []
    for candidate in candidate_dirs:
        video = _load_candidate_video(Path(candidate))
        if video.shape[0] != compiled.tracking.shape[0]:
            raise ValidationError(
                f"candidate {candidate} has {video.shape[0]} frames,"
                f" compile has {compiled.tracking.shape[0]}"
            )
        if video.shape[1:3] != compiled.tracking.shape[1:3]:
            raise ValidationError(
                f"candidate {candidate} frames are {video.shape[1:3]},"
                f" compile is {compiled.tracking.shape[1:3]}"
            )
        try:
            reports.append(
                metrics.evaluate_sample(
                    Path(candidate).name,
                    video,
                    compiled.flows,
                    edited,
                    compiled.disocclusion.volume[-1],
                    tau=tau,
                )
            )
        except ValueError as exc:
            raise ValidationError(str(exc)) from None
    csv_path = metrics.write_reports(reports, out_dir)
    click.echo(str(csv_path))


@main.command("synth")
@click.argument("spec_path", type=click.Path(path_type=Path))
@click.argument("out_dir", type=click.Path(path_type=Path))
@_translate_errors
def synth_cmd(spec_path: Path, out_dir: Path):
    """Generate a synthetic scene plus its ground-truth PDG and target pose."""
    spec = synth.load_synth_spec(spec_path)
    result = synth.synth_scene(spec)
    out = Path(out_dir)
    manifest = save_scene(result.scene, out)

    from .document import pdg_to_document, save_pdg_document, save_pose

    scene_manifest = json.loads(manifest.read_text(encoding="utf-8"))
    doc = pdg_to_document(result.pdg, footprint_paths=scene_manifest["masks"])
    save_pdg_document(doc, out / "pdg.json")
    save_pose(result.target, out / "pose.json")
    click.echo(str(manifest))


@main.command()
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", default=8008, show_default=True)
@_translate_errors
def serve(host: str, port: int):
    """Run the studio HTTP service."""
    import uvicorn

    from .service import create_app

    uvicorn.run(create_app(), host=host, port=port, log_level="info")


if __name__ == "__main__":
    main()
