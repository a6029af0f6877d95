"""Command-line interface.

Subcommands: edit, reconstruct, make-weights, selftest, serve. Validation
problems exit with status 2 and a machine-readable JSON report on stderr;
unexpected internal failures exit 1.
"""

from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from .errors import FormatError, MaskdiffError
from .imageio import read_image, read_mask, write_image
from .pipeline import EditConfig, EditRequest, ValidationFailure, ValidationIssue, edit, reconstruct
from .selftest import mixture_from_dict, run_selftest
from .unet import UNet, UNetConfig, init_weights
from .weightsio import load_weights, save_weights

DEFAULT_WEIGHTS_SEED = 0


def _fail_validation(issues) -> int:
    report = {"error": "validation", "issues": [i.to_dict() for i in issues]}
    print(json.dumps(report), file=sys.stderr)
    return 2


def _load_model(args) -> UNet:
    cfg = UNetConfig()
    if getattr(args, "weights", None):
        return UNet(cfg, load_weights(args.weights, cfg))
    return UNet(cfg, init_weights(cfg, getattr(args, "weights_seed", DEFAULT_WEIGHTS_SEED)))


def _read_config_file(path) -> dict:
    with open(path, "r", encoding="utf-8") as f:
        return json.load(f)


def _edit_config(args) -> EditConfig:
    data: dict = {}
    if args.config:
        data.update(_read_config_file(args.config))
    overrides = {
        "mode": args.mode,
        "steps": args.steps,
        "seed": args.seed,
        "encode_ratio": args.encode_ratio,
        "pixel_blend_fraction": args.pixel_blend_fraction,
        "tail_drop_fraction": args.tail_drop_fraction,
    }
    data.update({k: v for k, v in overrides.items() if v is not None})
    if args.am_word:
        data["am_words"] = list(args.am_word)
    return EditConfig.from_dict(data)


def cmd_edit(args) -> int:
    try:
        image = read_image(args.image)
        mask = read_mask(args.mask)
    except FormatError as exc:
        return _fail_validation([ValidationIssue("image", "format", str(exc))])
    cfg = _edit_config(args)
    req = EditRequest(image=image, mask=mask, source_prompt=args.source_prompt,
                      target_prompt=args.target_prompt, config=cfg)
    model = _load_model(args)
    try:
        out = edit(req, model)
    except ValidationFailure as exc:
        return _fail_validation(exc.issues)
    write_image(args.out, out)
    print(args.out)
    return 0


def cmd_reconstruct(args) -> int:
    try:
        image = read_image(args.image)
    except FormatError as exc:
        return _fail_validation([ValidationIssue("image", "format", str(exc))])
    model = _load_model(args)
    try:
        out = reconstruct(image, args.prompt, args.steps, model, seed=args.seed)
    except MaskdiffError as exc:
        return _fail_validation([ValidationIssue("prompt", "input", str(exc))])
    write_image(args.out, out)
    err = float(np.max(np.abs(out - image)))
    print(f"{args.out} (L-inf reconstruction error {err:.5f})")
    return 0


def cmd_make_weights(args) -> int:
    weights = init_weights(UNetConfig(), args.seed)
    save_weights(args.out, weights)
    print(args.out)
    return 0


def cmd_selftest(args) -> int:
    mixture = None
    if args.config:
        data = _read_config_file(args.config)
        if "mixture" in data:
            mixture = mixture_from_dict(data["mixture"])
    results = run_selftest(mixture)
    for r in results:
        print(f"{'ok  ' if r.ok else 'FAIL'} {r.name}: {r.detail}")
    return 0 if all(r.ok for r in results) else 1


def cmd_serve(args) -> int:
    import uvicorn

    from .service import create_app

    host, _, port = args.addr.rpartition(":")
    model = _load_model(args)
    app = create_app(model, workers=args.workers)
    uvicorn.run(app, host=host or "127.0.0.1", port=int(port), log_level="info")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="maskdiff",
                                description="Mask-guided text-driven image editing")
    sub = p.add_subparsers(dest="command", required=True)

    def add_weights_opts(sp):
        sp.add_argument("--weights", help="weights file (PFBW); omit to derive from --weights-seed")
        sp.add_argument("--weights-seed", type=int, default=DEFAULT_WEIGHTS_SEED)

    e = sub.add_parser("edit", help="edit an image inside a mask")
    e.add_argument("--image", required=True, help="input PPM (P6)")
    e.add_argument("--mask", required=True, help="mask PGM (P5), >=128 is inside")
    e.add_argument("--source-prompt", required=True)
    e.add_argument("--target-prompt", required=True)
    e.add_argument("--mode", choices=["object", "background"])
    e.add_argument("--steps", type=int)
    e.add_argument("--seed", type=int)
    e.add_argument("--encode-ratio", type=float)
    e.add_argument("--pixel-blend-fraction", type=float)
    e.add_argument("--tail-drop-fraction", type=float)
    e.add_argument("--am-word", action="append", default=[],
                   help="confine this target-prompt word to the mask (repeatable)")
    e.add_argument("--config", help="JSON file with EditConfig fields")
    e.add_argument("--out", required=True)
    add_weights_opts(e)
    e.set_defaults(func=cmd_edit)

    r = sub.add_parser("reconstruct", help="encode then decode an image unchanged")
    r.add_argument("--image", required=True)
    r.add_argument("--prompt", required=True)
    r.add_argument("--steps", type=int, default=50)
    r.add_argument("--seed", type=int, default=0)
    r.add_argument("--out", required=True)
    add_weights_opts(r)
    r.set_defaults(func=cmd_reconstruct)

    w = sub.add_parser("make-weights", help="write seeded denoiser weights")
    w.add_argument("--seed", type=int, default=DEFAULT_WEIGHTS_SEED)
    w.add_argument("--out", required=True)
    w.set_defaults(func=cmd_make_weights)

    s = sub.add_parser("selftest", help="run oracle-based sampler checks")
    s.add_argument("--config", help="JSON file; key 'mixture' overrides the test mixture")
    s.set_defaults(func=cmd_selftest)

    v = sub.add_parser("serve", help="run the HTTP edit-job service")
    v.add_argument("--addr", default="127.0.0.1:8080")
    v.add_argument("--workers", type=int, default=2)
    add_weights_opts(v)
    v.set_defaults(func=cmd_serve)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ValidationFailure as exc:
        return _fail_validation(exc.issues)
    except FormatError as exc:
        return _fail_validation([ValidationIssue("file", "format", str(exc))])


if __name__ == "__main__":
    sys.exit(main())
