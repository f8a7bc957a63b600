"""Command-line client for the lab service.

Each subcommand builds one HTTP request.  By default the service app is
mounted in-process over an ASGI transport, so `qblab simulate ...` works
with no daemon running; `--server http://host:port` redirects the same
request to a remote instance started with `qblab serve`.

Exit codes: 0 success, 1 usage, 2 data, 3 numeric failure.  Failures
print a single-line diagnostic to stderr and leave no partial output
files behind (all writes are write-then-rename).
"""

from __future__ import annotations

import argparse
import asyncio
import sys

import httpx

from .errors import UsageError

_EXIT_BY_KIND = {"usage": 1, "data": 2, "numeric": 3}
_TIMEOUT = 600.0  # toy training is minutes, not milliseconds


class _Parser(argparse.ArgumentParser):
    """argparse exits 2 on bad flags; the contract here is exit 1."""

    def error(self, message):
        raise UsageError(message)


def build_parser() -> _Parser:
    common = _Parser(add_help=False)
    common.add_argument(
        "--server",
        default=None,
        metavar="URL",
        help="send requests to a remote `qblab serve` instance instead of in-process",
    )

    parser = _Parser(prog="qblab", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", metavar="COMMAND")

    p = sub.add_parser("simulate", parents=[common], help="mosaic an RGB image and add sensor noise")
    p.add_argument("--input", required=True, help="source RGB image (PNG)")
    p.add_argument("--out", required=True, help="output raw mosaic (PGM + .cfa sidecar)")
    p.add_argument("--pattern", choices=("quad", "bayer"), default="quad")
    p.add_argument("--noise-db", type=float, default=0.0, help="analog gain in dB")
    p.add_argument("--read-sigma", type=float, default=0.005, help="read noise sigma at unit gain")
    p.add_argument("--shot-scale", type=float, default=0.0005, help="shot variance per unit signal at unit gain")
    p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("remosaic", parents=[common], help="convert a quad mosaic to Bayer")
    p.add_argument("--input", required=True, help="input quad mosaic (PGM)")
    p.add_argument("--out", required=True, help="output Bayer mosaic (PGM)")
    p.add_argument("--method", choices=("djrd", "swap", "bin2x2"), default="djrd")
    p.add_argument("--checkpoint", default=None, help="model checkpoint (required for djrd)")

    p = sub.add_parser("train", parents=[common], help="fit the dual-head model on a paired corpus")
    p.add_argument("--corpus", required=True, help="directory of <stem>.quad.pgm / <stem>.bayer.pgm pairs")
    p.add_argument("--out", required=True, help="output checkpoint path (loss curve lands beside it)")
    p.add_argument("--steps", type=int, default=500)
    p.add_argument("--config", default=None, help="key=value config file")
    p.add_argument("--hard-manifest", default=None, help="mined hard-patch CSV to oversample")
    p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("mine", parents=[common], help="rank reconstruction patches by artifact severity")
    p.add_argument("--pairs", required=True, help="directory of <stem>.ci.png / <stem>.gt.png pairs")
    p.add_argument("--out", required=True, help="output manifest CSV (crops land in <stem>_crops/)")
    p.add_argument("--k", type=int, default=2000)
    p.add_argument("--patch", type=int, default=128)

    p = sub.add_parser("evaluate", parents=[common], help="score predictions against ground truth")
    p.add_argument("--pred", required=True, help="directory of predicted mosaics (PGM)")
    p.add_argument("--gt", required=True, help="directory of ground-truth mosaics (PGM)")
    p.add_argument("--domain", choices=("bayer", "srgb"), default="bayer")
    p.add_argument("--out", required=True, help="output report CSV")

    p = sub.add_parser("analyze-fsm", parents=[common], help="print a pattern's frequency structure matrix")
    p.add_argument("--pattern", choices=("bayer", "quad"), default="quad")
    p.add_argument("--triple", default=None, metavar="R,G,B", help="evaluate numerically at this RGB triple")

    p = sub.add_parser("serve", parents=[common], help="run the lab service as an HTTP daemon")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8765)

    return parser


# ---------------------------------------------------------------------------
# Transport
# ---------------------------------------------------------------------------


async def _post_async(base_url: str, transport, path: str, payload: dict):
    async with httpx.AsyncClient(base_url=base_url, transport=transport, timeout=_TIMEOUT) as client:
        response = await client.post(path, json=payload)
        return response.status_code, response.json()


def _post(server: str | None, path: str, payload: dict):
    if server is None:
        from .service import create_app

        transport = httpx.ASGITransport(app=create_app())
        base_url = "http://qblab.internal"
    else:
        transport = None
        base_url = server
    return asyncio.run(_post_async(base_url, transport, path, payload))


# ---------------------------------------------------------------------------
# Rendering
# ---------------------------------------------------------------------------


def _print_flat(body: dict) -> None:
    for key, value in body.items():
        if value is None:
            # evaluate reports an exact match (infinite PSNR) as null
            if key == "mean_psnr":
                print("mean_psnr=inf")
            continue
        print(f"{key}={value}")


def _render_mine(body: dict) -> None:
    _print_flat(body)
    if body.get("exhausted"):
        print(
            f"qblab: warning: only {body['n_patches']} acceptable patches existed",
            file=sys.stderr,
        )


def _format_complex(entry: dict) -> str:
    return f"{entry['re']:+.4f}{entry['im']:+.4f}i"


def _print_grid(rows: list[list[str]]) -> None:
    width = max(len(cell) for row in rows for cell in row)
    for row in rows:
        print("  [ " + "  ".join(cell.rjust(width) for cell in row) + " ]")


def _render_fsm(body: dict) -> None:
    print(f"pattern={body['pattern']}")
    print("triple=" + ",".join(f"{v:g}" for v in body["triple"]))
    print("symbolic (rows u, cols v, DC at top left):")
    _print_grid(body["symbolic"])
    print("numeric:")
    _print_grid([[_format_complex(e) for e in row] for row in body["numeric"]])
    if body["zero_rows"] or body["zero_cols"]:
        rows = ",".join(map(str, body["zero_rows"]))
        cols = ",".join(map(str, body["zero_cols"]))
        print(f"structural zeros: full rows [{rows}] and columns [{cols}]")
    else:
        print("structural zeros: none spanning a full row or column")


# ---------------------------------------------------------------------------
# Dispatch
# ---------------------------------------------------------------------------


def _build_request(args) -> tuple[str, dict, object]:
    if args.command == "simulate":
        return (
            "/simulate",
            {
                "input_path": args.input,
                "out_path": args.out,
                "pattern": args.pattern,
                "noise_db": args.noise_db,
                "read_sigma": args.read_sigma,
                "shot_scale": args.shot_scale,
                "seed": args.seed,
            },
            _print_flat,
        )
    if args.command == "remosaic":
        return (
            "/remosaic",
            {
                "input_path": args.input,
                "out_path": args.out,
                "method": args.method,
                "checkpoint": args.checkpoint,
            },
            _print_flat,
        )
    if args.command == "train":
        return (
            "/train",
            {
                "corpus_dir": args.corpus,
                "out_path": args.out,
                "steps": args.steps,
                "config": args.config,
                "hard_manifest": args.hard_manifest,
                "seed": args.seed,
            },
            _print_flat,
        )
    if args.command == "mine":
        return (
            "/mine",
            {"pairs_dir": args.pairs, "out_path": args.out, "k": args.k, "patch": args.patch},
            _render_mine,
        )
    if args.command == "evaluate":
        return (
            "/evaluate",
            {
                "pred_dir": args.pred,
                "gt_dir": args.gt,
                "out_path": args.out,
                "domain": args.domain,
            },
            _print_flat,
        )
    if args.command == "analyze-fsm":
        return ("/analyze-fsm", {"pattern": args.pattern, "triple": args.triple}, _render_fsm)
    raise UsageError(f"unknown command {args.command!r}")


def _one_line(text: str) -> str:
    return " ".join(str(text).split())


def _describe_422(body: dict) -> str:
    details = body.get("detail")
    if isinstance(details, list) and details:
        first = details[0]
        loc = ".".join(str(part) for part in first.get("loc", []) if part != "body")
        return f"{loc}: {first.get('msg', 'invalid value')}"
    return "invalid request"


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command is None:
            raise UsageError("a command is required (see --help)")
        if args.command == "serve":
            import uvicorn

            from .service import create_app

            uvicorn.run(create_app(), host=args.host, port=args.port)
            return 0
        path, payload, render = _build_request(args)
        try:
            status, body = _post(args.server, path, payload)
        except httpx.HTTPError as exc:
            print(f"qblab: cannot reach server: {_one_line(exc)}", file=sys.stderr)
            return 2
        if status == 200:
            render(body)
            return 0
        if status == 422:
            print(f"qblab: usage error: {_describe_422(body)}", file=sys.stderr)
            return 1
        kind = body.get("kind")
        if kind in _EXIT_BY_KIND:
            print(f"qblab: {kind} error: {_one_line(body.get('detail', ''))}", file=sys.stderr)
            return _EXIT_BY_KIND[kind]
        print(f"qblab: internal error (HTTP {status})", file=sys.stderr)
        return 3
    except UsageError as exc:
        print(f"qblab: usage error: {_one_line(exc)}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
