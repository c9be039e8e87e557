"""Command-line front end.

The CLI is a thin client of the service in service/app.py: it assembles
one request per invocation, posts it (in process through an ASGI
transport by default, or to a remote --server URL), and writes the
returned CSV artifact. Exit codes: 0 success, 1 argument/configuration
error, 2 numerical failure. MNAC_GT_WORKERS caps the service-side worker
pool.
"""

from __future__ import annotations

import argparse
import asyncio
import json
import sys
from pathlib import Path

import httpx

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_NUMERICAL = 2


class CliError(Exception):
    def __init__(self, message: str, code: int = EXIT_CONFIG):
        super().__init__(message)
        self.code = code


class _Parser(argparse.ArgumentParser):
    """argparse that exits 1 (not 2) on malformed flags, per our exit-code
    contract: 2 is reserved for numerical failures."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def _post(server: str | None, path: str, payload: dict) -> httpx.Response:
    if server:
        with httpx.Client(base_url=server, timeout=None) as client:
            return client.post(path, json=payload)

    from .service.app import app  # deferred: keeps --help snappy

    async def go() -> httpx.Response:
        transport = httpx.ASGITransport(app=app)
        async with httpx.AsyncClient(
            transport=transport, base_url="http://mnac-gt.internal", timeout=None
        ) as client:
            return await client.post(path, json=payload)

    return asyncio.run(go())


def _request(server: str | None, path: str, payload: dict) -> dict:
    try:
        resp = _post(server, path, payload)
    except httpx.HTTPError as exc:
        raise CliError(f"cannot reach service: {exc}", EXIT_CONFIG) from exc
    if resp.status_code == 200:
        return resp.json()
    try:
        body = resp.json()
    except ValueError:
        raise CliError(f"service error {resp.status_code}: {resp.text}", EXIT_CONFIG)
    if resp.status_code == 400 and body.get("kind") == "numerical":
        raise CliError(f"numerical failure: {body.get('message')}", EXIT_NUMERICAL)
    if resp.status_code == 400:
        raise CliError(f"configuration error: {body.get('message')}", EXIT_CONFIG)
    if resp.status_code == 422:
        raise CliError(f"invalid request: {body.get('detail')}", EXIT_CONFIG)
    raise CliError(f"service error {resp.status_code}: {body}", EXIT_CONFIG)


def _payload(args: argparse.Namespace, keys: list[str]) -> dict:
    """Effective configuration: --config file values overridden by any
    flag given on the command line; unset fields fall back to the service
    defaults."""
    merged: dict = {}
    if getattr(args, "config", None):
        try:
            merged.update(json.loads(Path(args.config).read_text()))
        except (OSError, ValueError) as exc:
            raise CliError(f"cannot read --config {args.config}: {exc}")
    for key in keys:
        value = getattr(args, key, None)
        if value is not None:
            merged[key] = value
    return merged


def _write_out(args: argparse.Namespace, text: str) -> None:
    if getattr(args, "out", None):
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)


def _add_io(p: argparse.ArgumentParser) -> None:
    p.add_argument("--out", help="write the CSV artifact to this path (default: stdout)")
    p.add_argument("--config", help="JSON file with defaults; explicit flags override it")
    p.add_argument("--server", help="remote service URL (default: run in-process)")


def _add_system(p: argparse.ArgumentParser) -> None:
    p.add_argument("--ell", type=int, help="number of users")
    p.add_argument("--alpha", type=float, help="activity probability (or use --gamma)")
    p.add_argument("--gamma", type=float, help="activity scaling k = ell^gamma")
    p.add_argument("--snr", type=float, help="per-symbol SNR rho, linear")
    p.add_argument("--sigma2-w", dest="sigma2_w", type=float, help="noise variance (default 1)")
    p.add_argument(
        "--allow-snr-outside-validity", dest="allow_snr_out_of_range",
        action="store_true", default=None,
        help="evaluate the capacity model outside its declared SNR range",
    )


def _add_discovery(p: argparse.ArgumentParser, with_tau=True) -> None:
    p.add_argument("--n", type=int, help="channel uses (tests)")
    p.add_argument("--p", type=float, help="signature inclusion probability (default 1/(k+1))")
    p.add_argument("--delta", type=float, help="decision margin Delta (default 0.05)")
    if with_tau:
        p.add_argument("--tau2", type=float, help="energy threshold (omit to optimize)")
        p.add_argument("--optimize-tau", dest="optimize_tau", action="store_true",
                       default=None, help="grid-search the threshold even if --tau2 given")
    p.add_argument("--grid-points", dest="grid_points", type=int,
                   help="threshold grid size (default 200)")
    p.add_argument("--q1-mode", dest="q1_mode", choices=["jensen_lb", "exact"],
                   help="q1/q2 fed to rule and bounds (default jensen_lb)")
    p.add_argument("--delta-exp", dest="delta_exp", type=float,
                   help="error-target exponent: bounds below ell^-delta_exp (default 1)")


def _add_sweep(p: argparse.ArgumentParser) -> None:
    p.add_argument("--variable", choices=["users", "snr"], help="sweep dimension")
    p.add_argument("--start", type=float, help="grid start (log spacing)")
    p.add_argument("--stop", type=float, help="grid stop")
    p.add_argument("--points", type=int, help="grid points (default 10)")
    p.add_argument("--ell", type=int, help="users (snr sweep)")
    p.add_argument("--snr", type=float, help="SNR (users sweep)")
    p.add_argument("--alpha", type=float, help="fixed activity probability")
    p.add_argument("--gamma", type=float, help="activity scaling k = ell^gamma (default 0.5)")
    p.add_argument(
        "--allow-snr-outside-validity", dest="allow_snr_out_of_range",
        action="store_true", default=None,
    )


SYSTEM_KEYS = ["ell", "alpha", "gamma", "snr", "sigma2_w", "allow_snr_out_of_range"]
DISCOVERY_KEYS = ["n", "p", "delta", "tau2", "optimize_tau", "grid_points", "q1_mode", "delta_exp"]
SWEEP_KEYS = ["variable", "start", "stop", "points", "ell", "snr", "alpha", "gamma",
              "allow_snr_out_of_range"]


def build_parser() -> _Parser:
    parser = _Parser(prog="mnac-gt", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("capacity-curve", help="message-length bound vs channel uses")
    p.add_argument("--ell", dest="ells", type=int, action="append",
                   help="population size; repeat for several curves")
    p.add_argument("--snr", type=float, help="per-symbol SNR (default 1e-4)")
    p.add_argument("--alpha", type=float)
    p.add_argument("--gamma", type=float, help="k = ell^gamma (default 0.5)")
    p.add_argument("--n-min", dest="n_start", type=float, help="smallest n (default 2000)")
    p.add_argument("--n-max", dest="n_stop", type=float, help="largest n (default 20000)")
    p.add_argument("--points", dest="n_points", type=int, help="n grid points (default 19)")
    p.add_argument("--allow-snr-outside-validity", dest="allow_snr_out_of_range",
                   action="store_true", default=None)
    _add_io(p)

    p = sub.add_parser("id-cost", help="identification-cost lower bound sweep")
    _add_sweep(p)
    _add_io(p)

    p = sub.add_parser("bounds", help="closed-form report for one configuration")
    _add_system(p)
    _add_discovery(p)
    _add_io(p)

    p = sub.add_parser("optimize-tau", help="exhaustive threshold search minimizing n_gt")
    _add_system(p)
    _add_discovery(p, with_tau=False)
    _add_io(p)

    p = sub.add_parser("gap-sweep", help="gap G over a users or SNR grid")
    _add_sweep(p)
    p.add_argument("--delta", type=float, help="decision margin Delta (default 0.05)")
    p.add_argument("--delta-exp", dest="delta_exp", type=float)
    p.add_argument("--q1-mode", dest="q1_mode", choices=["jensen_lb", "exact"])
    p.add_argument("--grid-points", dest="grid_points", type=int)
    p.add_argument("--trials", type=int, help="Monte Carlo validation trials per point (0 = analytic only)")
    p.add_argument("--seed", type=int)
    p.add_argument("--n", type=int, help="channel uses for bound reporting and simulation")
    _add_io(p)

    p = sub.add_parser("simulate", help="Monte Carlo discovery trials plus bound report")
    _add_system(p)
    _add_discovery(p)
    p.add_argument("--trials", type=int, help="number of discovery rounds (default 1000)")
    p.add_argument("--seed", type=int)
    p.add_argument("--fixed-matrix", dest="fixed_matrix", action="store_true", default=None,
                   help="freeze the signature matrix across trials")
    p.add_argument("--iid-fading", dest="iid_fading", action="store_true", default=None,
                   help="redraw fading per channel use instead of per round")
    p.add_argument("--q1-override", dest="q1_override", type=float,
                   help="feed this q1 to the decoder instead of the q1_mode value")
    p.add_argument("--dump-round", dest="dump_round_path",
                   help="also write a per-channel-use dump of trial 0 to this path")
    _add_io(p)

    p = sub.add_parser("validate", help="run the oracle self-checks; exit 0 iff all pass")
    p.add_argument("--draws", type=int, help="Monte Carlo draws (default 200000)")
    p.add_argument("--seed", type=int)
    p.add_argument("--server", help="remote service URL (default: run in-process)")

    p = sub.add_parser("serve", help="run the HTTP service")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)
    return parser


def _run(args: argparse.Namespace) -> int:
    server = getattr(args, "server", None)

    if args.command == "capacity-curve":
        payload = _payload(args, ["ells", "snr", "alpha", "gamma", "n_start", "n_stop",
                                  "n_points", "allow_snr_out_of_range"])
        data = _request(server, "/capacity/curve", payload)
        _write_out(args, data["csv"])
        return EXIT_OK

    if args.command == "id-cost":
        data = _request(server, "/id-cost", _payload(args, SWEEP_KEYS))
        _write_out(args, data["csv"])
        return EXIT_OK

    if args.command == "bounds":
        data = _request(server, "/bounds", _payload(args, SYSTEM_KEYS + DISCOVERY_KEYS))
        _write_out(args, data["csv"])
        return EXIT_OK

    if args.command == "optimize-tau":
        payload = _payload(args, SYSTEM_KEYS + DISCOVERY_KEYS)
        data = _request(server, "/optimize-tau", payload)
        _write_out(args, data["csv"])
        print(f"tau2* = {data['tau2']!r}  n_gt = {data['report']['n_gt']!r}", file=sys.stderr)
        return EXIT_OK

    if args.command == "gap-sweep":
        payload = _payload(args, SWEEP_KEYS + ["delta", "delta_exp", "q1_mode",
                                               "grid_points", "trials", "seed", "n"])
        data = _request(server, "/gap-sweep", payload)
        _write_out(args, data["csv"])
        return EXIT_OK

    if args.command == "simulate":
        keys = SYSTEM_KEYS + DISCOVERY_KEYS + ["trials", "seed", "fixed_matrix",
                                               "iid_fading", "q1_override"]
        payload = _payload(args, keys)
        if getattr(args, "dump_round_path", None):
            payload["dump_round"] = True
        data = _request(server, "/simulate", payload)
        _write_out(args, data["csv"])
        if getattr(args, "dump_round_path", None) and data.get("round_csv"):
            Path(args.dump_round_path).write_text(data["round_csv"])
        return EXIT_OK

    if args.command == "validate":
        data = _request(server, "/validate", _payload(args, ["draws", "seed"]))
        for check in data["checks"]:
            status = "ok  " if check["passed"] else "FAIL"
            print(f"[{status}] {check['name']}: {check['detail']}")
        return EXIT_OK if data["passed"] else EXIT_CONFIG

    if args.command == "serve":
        import uvicorn

        from .service.app import app

        uvicorn.run(app, host=args.host, port=args.port)
        return EXIT_OK

    raise CliError(f"unknown command {args.command!r}")


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return _run(args)
    except CliError as exc:
        print(f"mnac-gt: {exc}", file=sys.stderr)
        return exc.code


if __name__ == "__main__":
    sys.exit(main())
