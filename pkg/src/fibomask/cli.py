"""``fibomask`` command line: mask export, statistics, bounds, toy forward, diversity.

Exit codes: 0 ok, 2 usage error, 3 bound violation, 4 I/O error.
"""
import argparse
import json
import os
import sys

import numpy as np

from . import analysis, attnkernel, export, maskgen, prng

EXIT_OK, EXIT_USAGE, EXIT_BOUND, EXIT_IO = 0, 2, 3, 4
FAMILIES = ("fibottention", "local", "random", "bigbird", "strided", "linear", "power", "poly", "fib-offset")
E_A_WINDOWS = (2, 10, 15, 20, 40)
E_B_WINDOWS = (2, 3, 4, 5, 6, 7, 8, 9, 10, 15, 20, 40, 80, 120, 160)
# keys that never change outputs and are therefore left out of manifests
_VOLATILE = {"manifest", "func", "out"}


class UsageError(Exception):
    pass


def _color(text, code):
    if os.environ.get("FIBO_NO_COLOR") or not sys.stdout.isatty():
        return text
    return f"\033[{code}m{text}\033[0m"


def _int_list(text):
    return [int(x) for x in text.split(",") if x.strip()]


def _common(p):
    g = p.add_argument_group("geometry")
    g.add_argument("--n", type=int, help="patch tokens N (default 196)")
    g.add_argument("--image-side", type=int, help="image side in pixels; N = (side/patch)^2")
    g.add_argument("--patch", type=int, default=16, help="patch size in pixels (default 16)")
    g.add_argument("--heads", type=int, default=12)
    g.add_argument("--wmin", type=int, help="smallest head window (default 5)")
    g.add_argument("--wmax", type=int, help="largest head window (default 65 N / 196)")
    g.add_argument("--variant", choices=("wythoff", "modified"), default="wythoff")
    g.add_argument("--layers", type=int, default=1)
    g.add_argument("--seed", type=int, default=42)
    f = p.add_argument_group("mask family")
    f.add_argument("--family", choices=FAMILIES, default="fibottention")
    f.add_argument("--w", type=int, default=2, help="local window (local, bigbird)")
    f.add_argument("--diagonal", action="store_true", help="keep the main diagonal (local)")
    f.add_argument("--keep", type=float, default=0.02, help="kept fraction (random)")
    f.add_argument("--no-class-token", action="store_true", help="drop class-token links (random)")
    f.add_argument("--globals", type=int, default=1, help="global tokens g (bigbird)")
    f.add_argument("--random", type=int, help="random pairs r (bigbird, default N)")
    f.add_argument(
        "--patch-globals", action="store_true",
        help="take all g global tokens from the patches instead of the class token (bigbird)",
    )
    f.add_argument("--stride", type=int, default=14, help="stride (strided)")
    f.add_argument("--local", type=int, default=1, help="local band (strided)")
    f.add_argument("--c", type=int, default=2, help="dilation factor (linear)")
    f.add_argument("--variable", action="store_true", help="shift offsets per head (linear)")
    f.add_argument("--base", type=int, default=2, help="base (power)")
    f.add_argument("--exponent", type=int, default=2, help="exponent (poly)")
    f.add_argument("--delta", type=int, default=0, help="offset delta (fib-offset)")
    p.add_argument("--out", help="output directory")
    p.add_argument("--manifest", help="re-run from a manifest.json written by an earlier run")


def build_parser():
    parser = argparse.ArgumentParser(prog="fibomask", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("mask", help="export per-layer, per-head masks")
    _common(p)
    p.add_argument("--format", choices=("pbm", "csv", "json"), default="pbm")
    p.set_defaults(func=cmd_mask)

    p = sub.add_parser("stats", help="pruning ratio, head counts, overlap histogram")
    _common(p)
    p.add_argument("--format", choices=("text", "json", "csv"), default="text")
    p.add_argument("--table", choices=("local-window", "flops"), help="reproduce a reference table")
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("bounds", help="check measured counts against the analytic bounds")
    _common(p)
    p.add_argument("--dim", type=int, default=768, help="embedding width d")
    p.add_argument("--sweep", type=_int_list, help="comma-separated N values (windows scale with N)")
    p.set_defaults(func=cmd_bounds)

    p = sub.add_parser("forward", help="seeded toy attention block forward pass")
    _common(p)
    p.add_argument("--dim", type=int, default=48)
    p.add_argument("--grad-check", action="store_true")
    p.add_argument("--grad-samples", type=int, default=6, help="coordinates per array for the FD check")
    p.add_argument("--zero-input", action="store_true")
    p.set_defaults(func=cmd_forward)

    p = sub.add_parser("diversity", help="head diversity statistics over seeded inputs")
    _common(p)
    p.add_argument("--dim", type=int, default=48)
    p.add_argument("--samples", type=int, default=16)
    p.add_argument("--identical-heads", action="store_true", help="share weights and masks across heads")
    p.set_defaults(func=cmd_diversity)
    return parser


# --------------------------------------------------------------- config


def resolve(args):
    """Fill derived defaults in place and validate; raises UsageError."""
    if args.image_side is not None:
        if args.patch < 1 or args.image_side % args.patch:
            raise UsageError("--patch must divide --image-side")
        n = (args.image_side // args.patch) ** 2
        if args.n is not None and args.n != n:
            raise UsageError(f"--n {args.n} disagrees with --image-side/--patch (N={n})")
        args.n = n
    if args.n is None:
        args.n = 196
    w_min, w_max = analysis.default_windows(args.n)
    args.wmin = w_min if args.wmin is None else args.wmin
    args.wmax = max(w_max, args.wmin) if args.wmax is None else args.wmax
    if args.random is None:
        args.random = args.n
    if args.heads < 1 or args.layers < 1:
        raise UsageError("--heads and --layers must be positive")
    try:
        head_config(args)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    return args


def head_config(args):
    return maskgen.HeadMaskConfig(
        h=args.heads,
        w_min=args.wmin,
        w_max=args.wmax,
        n_patches=args.n,
        variant="wythoff" if args.variant == "wythoff" else "modified_wythoff",
        layers=args.layers,
        seed=args.seed,
    )


def manifest_dict(args):
    return {k: v for k, v in sorted(vars(args).items()) if k not in _VOLATILE}


def build_layers(args):
    """Masks as ``layers[l][h]`` for the selected family."""
    cfg = head_config(args)
    n, h = args.n, args.heads
    fam = args.family
    if fam == "fibottention":
        return [list(layer) for layer in maskgen.fibottention_masks(cfg).masks]
    windows = cfg.windows
    if fam == "local":
        heads = [maskgen.local_window_mask(n, min(args.w, n - 1), args.diagonal)] * h
    elif fam == "random":
        heads = [
            maskgen.random_mask(n, args.keep, not args.no_class_token, prng.sub_seed(args.seed, i))
            for i in range(h)
        ]
    elif fam == "bigbird":
        heads = [
            maskgen.bigbird_mask(
                n, args.w, args.globals, args.random, prng.sub_seed(args.seed, i),
                class_token_global=not args.patch_globals,
            )
            for i in range(h)
        ]
    elif fam == "strided":
        heads = [maskgen.strided_mask(n, args.stride, args.local)] * h
    elif fam == "linear":
        heads = maskgen.dilated_heads_masks(h, args.c, args.variable, windows, n)
    elif fam == "power":
        heads = maskgen.family_masks("power", args.base, windows, n)
    elif fam == "poly":
        heads = maskgen.family_masks("poly", args.exponent, windows, n)
    elif fam == "fib-offset":
        heads = maskgen.offset_family_masks(h, args.delta, windows, n)
    else:  # argparse choices make this unreachable
        raise UsageError(f"unknown family {fam}")
    return [list(heads) for _ in range(args.layers)]


def _emit(args, payload, name="report.json"):
    data = export.json_bytes(payload)
    sys.stdout.write(data.decode("utf-8"))
    if args.out:
        _write(args.out, name, data)
        _write(args.out, "manifest.json", export.json_bytes(manifest_dict(args)))


def _write(out, name, data):
    os.makedirs(out, exist_ok=True)
    export.atomic_write_bytes(os.path.join(out, name), data)


# ------------------------------------------------------------- commands


def cmd_mask(args):
    if not args.out:
        raise UsageError("mask needs --out")
    layers = build_layers(args)
    if args.format == "pbm":
        for li, heads in enumerate(layers):
            for hi, mask in enumerate(heads):
                data = export.pbm_bytes(mask.dense(), comment=f"layer {li} head {hi} N={args.n}")
                _write(args.out, f"layer{li:02d}_head{hi:02d}.pbm", data)
    elif args.format == "csv":
        _write(args.out, "masks.csv", export.coords_csv_bytes(layers))
    else:
        payload = [
            [{"offsets": list(m.offsets), "pairs": m.n_pairs, "class_token": m.include_class_token}
             for m in heads]
            for heads in layers
        ]
        _write(args.out, "masks.json", export.json_bytes(payload))
    _write(args.out, "manifest.json", export.json_bytes(manifest_dict(args)))
    return EXIT_OK


def _local_window_rows(n):
    rows = []
    for w in sorted(set(E_A_WINDOWS) | set(E_B_WINDOWS)):
        if w > n - 1:
            continue
        with_d = maskgen.pruning_ratio([maskgen.local_window_mask(n, w, True)])
        without_d = maskgen.pruning_ratio([maskgen.local_window_mask(n, w, False)])
        rows.append([w, f"{with_d:.2f}", f"{without_d:.2f}"])
    return ["w", "with_diagonal", "without_diagonal"], rows


def cmd_stats(args):
    if args.table == "local-window":
        header, rows = _local_window_rows(args.n)
        if args.format == "json":
            _emit(args, {"n_patches": args.n, "rows": [dict(zip(header, r)) for r in rows]})
        elif args.format == "csv":
            sys.stdout.write(export.table_csv_bytes(header, rows).decode("utf-8"))
        else:
            print(_color(f"local-window pruning ratios, N={args.n}", "1"))
            print(f"{'w':>5} {'w/ diag':>9} {'w/o diag':>9}")
            for w, a, b in rows:
                print(f"{w:>5} {a:>9} {b:>9}")
        return EXIT_OK
    if args.table == "flops":
        sides = [args.patch * k for k in (14, 28, 56)]
        report = analysis.flop_projection([(s, args.patch) for s in sides], h=args.heads)
        if args.format == "csv":
            header, rows = report.csv_rows()
            sys.stdout.write(export.table_csv_bytes(header, rows).decode("utf-8"))
        else:
            _emit(args, report.to_dict())
        return EXIT_OK

    heads = build_layers(args)[0]
    ratio = maskgen.pruning_ratio(heads)
    counts = [m.n_pairs for m in heads]
    hist = maskgen.overlap_histogram(heads)
    if args.format == "json":
        _emit(args, {
            "family": args.family,
            "n_patches": args.n,
            "pruning_ratio": round(ratio, 6),
            "pruning_ratio_2dp": f"{ratio:.2f}",
            "head_pairs": counts,
            "overlap_histogram": {str(k): v for k, v in hist.items()},
        })
    elif args.format == "csv":
        rows = [[i, c] for i, c in enumerate(counts)]
        sys.stdout.write(export.table_csv_bytes(["head", "pairs"], rows).decode("utf-8"))
    else:
        print(_color(f"{args.family} N={args.n} h={args.heads}", "1"))
        print(f"pruning ratio: {ratio:.2f}%")
        print("head pairs: " + " ".join(str(c) for c in counts))
        print("overlap histogram (offset:heads): " + " ".join(f"{k}:{v}" for k, v in hist.items()))
    return EXIT_OK


def cmd_bounds(args):
    if args.dim % args.heads:
        raise UsageError(f"--dim {args.dim} is not divisible by --heads {args.heads}")
    if args.sweep:
        reports = []
        for n in args.sweep:
            w_min, w_max = analysis.default_windows(n)
            cfg = maskgen.HeadMaskConfig(h=args.heads, w_min=w_min, w_max=w_max, n_patches=n,
                                         variant=head_config(args).variant, seed=args.seed)
            reports.append(analysis.verify_bounds(cfg, args.dim))
        payload = {"reports": [r.to_dict() for r in reports], "passed": all(r.passed for r in reports)}
    else:
        report = analysis.verify_bounds(head_config(args), args.dim)
        payload = report.to_dict()
    _emit(args, payload)
    return EXIT_OK if payload["passed"] else EXIT_BOUND


def _toy(args):
    if args.dim % args.heads:
        raise UsageError(f"--dim {args.dim} is not divisible by --heads {args.heads}")
    params = attnkernel.AttentionBlockParams.init(args.dim, args.heads, seed=args.seed)
    masks = build_layers(args)[0]
    return params, masks


def cmd_forward(args):
    params, masks = _toy(args)
    x = attnkernel.random_tokens(args.n + 1, args.dim, args.seed)
    if args.zero_input:
        x = np.zeros_like(x)
    out = attnkernel.fibottention_block_forward(x, params, masks)
    payload = {
        "shape": list(out.shape),
        "checksum": float(out.sum()),
        "abs_checksum": float(np.abs(out).sum()),
    }
    if args.grad_check:
        upstream = attnkernel.random_tokens(args.n + 1, args.dim, prng.sub_seed(args.seed, 0xF00D))
        errors = attnkernel.finite_difference_check(
            x, params, masks, upstream, samples=args.grad_samples, seed=args.seed
        )
        payload["fd_errors"] = errors
        payload["max_fd_error"] = max(errors.values())
    _emit(args, payload)
    return EXIT_OK


def cmd_diversity(args):
    if args.heads < 2:
        raise UsageError("diversity needs --heads >= 2")
    params, masks = _toy(args)
    if args.identical_heads:
        params = attnkernel.AttentionBlockParams(
            np.repeat(params.wq[:1], args.heads, axis=0),
            np.repeat(params.wk[:1], args.heads, axis=0),
            np.repeat(params.wv[:1], args.heads, axis=0),
            params.wz,
            params.seed,
        )
        masks = [masks[0]] * args.heads
    values = []
    for s in range(args.samples):
        x = attnkernel.random_tokens(args.n + 1, args.dim, prng.sub_seed(args.seed, 0x1000 + s))
        values.append(analysis.head_diversity(attnkernel.head_outputs(x, params, masks)))
    _emit(args, analysis.diversity_stats(values).to_dict())
    return EXIT_OK


# ----------------------------------------------------------------- main


def _read_manifest(argv):
    """Use a manifest's values as defaults, so explicit flags still win."""
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--manifest")
    known, _ = pre.parse_known_args(argv)
    if not known.manifest:
        return None
    with open(known.manifest, encoding="utf-8") as fh:
        return json.load(fh)


def main(argv=None):
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        manifest = _read_manifest(argv)
    except (OSError, ValueError) as exc:
        print(f"fibomask: cannot read manifest: {exc}", file=sys.stderr)
        return EXIT_IO
    if manifest:
        command = manifest.pop("command", None)
        if command and (not argv or argv[0].startswith("-")):
            argv = [command] + argv
        sub = parser._subparsers._group_actions[0].choices[argv[0]]
        known = {a.dest for a in sub._actions}
        sub.set_defaults(**{k: v for k, v in manifest.items() if k in known})
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if isinstance(exc.code, int) else EXIT_USAGE
    try:
        resolve(args)
        return args.func(args)
    except UsageError as exc:
        print(f"fibomask {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"fibomask {args.command}: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
