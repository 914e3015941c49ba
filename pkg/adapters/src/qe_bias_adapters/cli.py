"""Adapter command line: serve a scorer endpoint on stdin/stdout.

Examples:
    qe-bias-adapter serve --model constant:85
    qe-bias-adapter serve --model hash --scale 0:25:lower --name toy-error-model
    qe-bias-adapter serve --model gemba --generator "python my_llm.py" \
        --template ctx_v1 --src-lang English --tgt-lang Italian
    qe-bias-adapter serve --model comet:Unbabel/wmt22-cometkiwi-da

Render a prompt without serving (debugging):
    qe-bias-adapter render --template plain --source "..." --hypothesis "..."
"""

from __future__ import annotations

import argparse
import sys

from .gemba import VARIANTS, GembaTemplate
from .models import build_model
from .serve import Scale, serve_scorer


def _cmd_serve(args) -> int:
    template = GembaTemplate(
        variant=args.template, src_lang=args.src_lang, tgt_lang=args.tgt_lang
    )
    model = build_model(args.model, generator=args.generator, template=template)
    scale = Scale.parse(args.scale) if args.scale else model.default_scale
    name = args.name or args.model
    try:
        serve_scorer(model, scale, name, sys.stdin, sys.stdout)
    finally:
        if hasattr(model, "close"):
            model.close()
    return 0


def _cmd_render(args) -> int:
    template = GembaTemplate(
        variant=args.template, src_lang=args.src_lang, tgt_lang=args.tgt_lang
    )
    sys.stdout.write(template.render(args.source, args.hypothesis, args.context))
    sys.stdout.write("\n")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="qe-bias-adapter", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("serve", help="serve a scorer endpoint on stdin/stdout")
    p.add_argument("--model", required=True,
                   help="constant:V | echo | hash | gemba | comet:CKPT | metricx:CKPT")
    p.add_argument("--scale", default=None, help="min:max:higher|lower (default per model)")
    p.add_argument("--name", default=None, help="handshake name (default: model spec)")
    p.add_argument("--generator", default=None, help="text-generation command for gemba")
    p.add_argument("--template", default="plain", choices=VARIANTS)
    p.add_argument("--src-lang", default="English")
    p.add_argument("--tgt-lang", default="Italian")
    p.set_defaults(func=_cmd_serve)

    p = sub.add_parser("render", help="print a rendered prompt")
    p.add_argument("--template", default="plain", choices=VARIANTS)
    p.add_argument("--src-lang", default="English")
    p.add_argument("--tgt-lang", default="Italian")
    p.add_argument("--source", required=True)
    p.add_argument("--hypothesis", required=True)
    p.add_argument("--context", default=None)
    p.set_defaults(func=_cmd_render)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


def entrypoint() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entrypoint()
