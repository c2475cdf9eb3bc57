"""obsdx-exporter command line: export-text, export-images, serve."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path
from typing import Optional, Sequence

from .encoders import EncoderLoadError, resolve_encoder
from .export import ExportError, export_images, export_text, parse_image_manifest, parse_text_manifest
from .service import serve


def _read_manifest(path: str) -> list[str]:
    return Path(path).read_text(encoding="utf-8").splitlines()


def cmd_export_text(args) -> int:
    encoder = resolve_encoder(args.model)
    items = parse_text_manifest(_read_manifest(args.manifest))
    result = export_text(items, encoder, args.out)
    print(f"exported {result.exported} text embedding(s) -> {result.store_path}", file=sys.stderr)
    return 0


def cmd_export_images(args) -> int:
    encoder = resolve_encoder(args.model)
    items = parse_image_manifest(_read_manifest(args.manifest))
    result = export_images(items, encoder, args.out)
    print(f"exported {result.exported} image embedding(s) -> {result.store_path}", file=sys.stderr)
    for key, reason in result.failures:
        print(f"failed {key}: {reason}", file=sys.stderr)
    return 0 if result.ok else 1


def cmd_serve(args) -> int:
    encoder = resolve_encoder(args.model)
    print(
        f"serving {encoder.model_id} (D={encoder.dimension}) on port {args.port}",
        file=sys.stderr,
    )
    serve(encoder, args.port, image_root=args.image_root)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="obsdx-exporter",
        description="Precompute embeddings into engine-compatible stores or serve them over HTTP",
    )
    parser.add_argument(
        "--model", default="hashed-512", help="model identifier (hashed-<dim> or biovil)"
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("export-text", help="embed prompts from a manifest file")
    p.add_argument("manifest", help="one prompt per line, or key<TAB>prompt")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_export_text)

    p = sub.add_parser("export-images", help="embed images from a key<TAB>path manifest")
    p.add_argument("manifest")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_export_images)

    p = sub.add_parser("serve", help="run the /v1/embed HTTP service")
    p.add_argument("--port", type=int, default=8900)
    p.add_argument("--image-root", help="directory image keys resolve against")
    p.set_defaults(func=cmd_serve)

    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except EncoderLoadError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except (ExportError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
