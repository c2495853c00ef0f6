"""Command-line entry point: run the HTTP server over a data directory.

Every flag has an environment equivalent with the CONVENE_ prefix, e.g.
--listen / CONVENE_LISTEN. The mail secret may be given inline or as a
path to a file holding the key.
"""

from __future__ import annotations

import argparse
import os
import re
from datetime import timedelta
from pathlib import Path

ENV_PREFIX = "CONVENE_"

_DURATION = re.compile(r"^(\d+)([smhdw]?)$")
_UNIT_SECONDS = {"": 1, "s": 1, "m": 60, "h": 3600, "d": 86400, "w": 604800}


def parse_duration(value: str) -> timedelta:
    match = _DURATION.match(value.strip().lower())
    if not match:
        raise argparse.ArgumentTypeError(
            f"bad duration {value!r} (use e.g. 900s, 30m, 12h, 14d)"
        )
    amount, unit = match.groups()
    return timedelta(seconds=int(amount) * _UNIT_SECONDS[unit])


def parse_listen(value: str) -> tuple[str, int]:
    host, _, port = value.rpartition(":")
    if not host or not port.isdigit():
        raise argparse.ArgumentTypeError(f"bad listen address {value!r}")
    return host, int(port)


def resolve_mail_secret(value: str | None) -> bytes | None:
    if not value:
        return None
    path = Path(value)
    if path.is_file():
        return path.read_bytes().strip()
    return value.encode("utf-8")


def _env_default(name: str, fallback=None):
    return os.environ.get(ENV_PREFIX + name, fallback)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="convene", description="group deliberation server"
    )
    parser.add_argument(
        "--listen",
        default=_env_default("LISTEN", "127.0.0.1:8080"),
        help="address:port to serve on",
    )
    parser.add_argument(
        "--data-dir",
        default=_env_default("DATA_DIR", "./convene-data"),
        help="directory holding the embedded store",
    )
    parser.add_argument(
        "--mail-secret",
        default=_env_default("MAIL_SECRET"),
        help="routing-token key, inline or a file path; generated and "
        "stored in the data dir when omitted",
    )
    parser.add_argument(
        "--session-lifetime",
        default=_env_default("SESSION_LIFETIME", "14d"),
        help="session validity, e.g. 12h or 14d",
    )
    parser.add_argument(
        "--base-url",
        default=_env_default("BASE_URL", "http://127.0.0.1:8080"),
        help="public URL used in notification footers",
    )
    parser.add_argument(
        "--mail-domain",
        default=_env_default("MAIL_DOMAIN", "convene.local"),
        help="domain of generated posting addresses",
    )
    parser.add_argument(
        "--operators",
        default=_env_default("OPERATORS", ""),
        help="comma-separated emails allowed to read platform feedback",
    )
    parser.add_argument(
        "--ui-dir",
        default=_env_default("UI_DIR"),
        help="optional directory of built web-client assets to serve at /ui",
    )
    return parser


def make_server(args):
    from .server import Server
    from .storage import SqliteStorage

    data_dir = Path(args.data_dir)
    data_dir.mkdir(parents=True, exist_ok=True)
    storage = SqliteStorage(str(data_dir / "convene.db"))
    operators = tuple(
        email.strip() for email in args.operators.split(",") if email.strip()
    )
    return Server(
        storage=storage,
        mail_secret=resolve_mail_secret(args.mail_secret),
        mail_domain=args.mail_domain,
        base_url=args.base_url,
        session_lifetime=parse_duration(args.session_lifetime),
        operators=operators,
    )


def main(argv: list[str] | None = None) -> None:
    import uvicorn

    from .api import create_app

    args = build_parser().parse_args(argv)
    host, port = parse_listen(args.listen)
    server = make_server(args)
    app = create_app(server)
    if args.ui_dir and Path(args.ui_dir).is_dir():
        from fastapi.staticfiles import StaticFiles

        app.mount("/ui", StaticFiles(directory=args.ui_dir, html=True), name="ui")
    uvicorn.run(app, host=host, port=port)


if __name__ == "__main__":
    main()
