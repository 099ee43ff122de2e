"""Operator command line: personalize, serve, auth, attack, demo."""

from __future__ import annotations

import argparse
import getpass
import json
import logging
import os
import sys
from pathlib import Path

from . import adversary
from .group import DebugGroup
from .net import EXIT_NETWORK, EXIT_USAGE, AuthService, authenticate, parse_address
from .store import PROTOCOL_NAMES, ServerStore, save_card


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def read_password(env_var: str | None, confirm: bool = False) -> str:
    if env_var:
        value = os.environ.get(env_var)
        if value is None:
            raise UsageError(f"environment variable {env_var} is not set")
        return value
    try:
        first = getpass.getpass("Password: ")
        if confirm and getpass.getpass("Repeat password: ") != first:
            raise UsageError("passwords do not match")
    except EOFError:
        raise UsageError("no password given") from None
    return first


def cmd_personalize(args) -> int:
    out = Path(args.out)
    if out.exists() and not args.force:
        raise UsageError(f"{out} exists; pass --force to overwrite")
    db = Path(args.server_db)
    if db.exists():
        store = ServerStore.load(db)
    else:
        store = ServerStore(args.server_id.encode(), DebugGroup(t=args.group_t))
    password = read_password(args.password_env, confirm=True)
    try:
        cred = store.personalize(args.protocol, args.id.encode(), password, counter_limit=args.limit)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    save_card(out, cred)
    store.save(db)
    print(f"wrote card image {out} for {args.id} ({args.protocol})")
    return 0


def cmd_serve(args) -> int:
    store = ServerStore.load(args.server_db)
    host, port = parse_address(args.listen)
    protocols = tuple(PROTOCOL_NAMES[p] for p in args.protocol) if args.protocol else None
    try:
        service = AuthService(store, host, port, protocols)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    except OSError as exc:
        print(f"cannot listen on {args.listen}: {exc.strerror}", file=sys.stderr)
        return EXIT_NETWORK
    print(f"listening on {service.address[0]}:{service.address[1]}", flush=True)
    try:
        service.serve_forever()
    except KeyboardInterrupt:
        pass
    return 0


def cmd_auth(args) -> int:
    if not Path(args.card).exists():
        raise UsageError(f"no card image at {args.card}")
    password = read_password(args.password_env)
    report = authenticate(args.card, parse_address(args.server), password, timeout=args.timeout)
    print(report)
    return report.status


def cmd_attack(args) -> int:
    if args.list:
        for name, sc in adversary.SCENARIOS.items():
            print(f"{name}: {', '.join(sc.protocols)}")
        return 0
    if not args.scenario:
        raise UsageError("--scenario is required")
    scenario = adversary.SCENARIOS.get(args.scenario)
    if scenario is None:
        raise UsageError(f"unknown scenario {args.scenario}; see --list")
    protocols = [args.protocol] if args.protocol else list(scenario.protocols)
    dictionary = adversary.Dictionary.load(args.dict) if args.dict else None
    try:
        model = adversary.AttackerModel.parse(args.model) if args.model else None
        for proto in protocols:
            out = adversary.run_scenario(args.scenario, proto, model, dictionary, seed=args.seed)
            print(out.to_json(), flush=True)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    return 0


def cmd_demo(args) -> int:
    base = adversary.attack_small_subgroup(t=args.t, seed=args.seed)
    prot = adversary.small_subgroup_vs_protocols(t=args.t, seed=args.seed)
    if args.json:
        print(json.dumps({"baseline": base.details, "protocols": prot}))
        return 0
    d = base.details
    print(f"unprotected DH, cofactor {args.t}: keys agree={d['keys_agree']}, "
          f"key recovered={d['recovered']} after {d['guesses']} of {args.t} guesses")
    for name, r in prot.items():
        print(f"{name:7s} tampered first message rejected={r['server_rejects']}, "
              f"tampered reply rejected={r['card_rejects']}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="pwcard", description="Password-protected smart-card authentication toolkit.")
    p.add_argument("-v", "--verbose", action="store_true", help="log at INFO level")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("personalize", help="issue a card image and enroll it in the server store")
    s.add_argument("--protocol", required=True, choices=sorted(PROTOCOL_NAMES))
    s.add_argument("--id", required=True, help="card identity")
    s.add_argument("--server-db", required=True)
    s.add_argument("--out", required=True, help="card image path")
    s.add_argument("--server-id", default="pwcard-server", help="server identity for a new store")
    s.add_argument("--group-t", type=int, default=1, help="cofactor for a new store's group")
    s.add_argument("--limit", type=int, default=0, help="failed-query limit, 0 for none")
    s.add_argument("--password-env", help="read the password from this environment variable")
    s.add_argument("--force", action="store_true")
    s.set_defaults(func=cmd_personalize)

    s = sub.add_parser("serve", help="run the TCP authentication service")
    s.add_argument("--server-db", required=True)
    s.add_argument("--listen", default="127.0.0.1:7341", help="HOST:PORT")
    s.add_argument("--protocol", action="append", choices=sorted(PROTOCOL_NAMES))
    s.set_defaults(func=cmd_serve)

    s = sub.add_parser("auth", help="authenticate a card image against a server")
    s.add_argument("--card", required=True)
    s.add_argument("--server", required=True, help="HOST:PORT")
    s.add_argument("--password-env")
    s.add_argument("--timeout", type=float, default=10.0)
    s.set_defaults(func=cmd_auth)

    s = sub.add_parser("attack", help="run an adversary scenario, one JSON line per protocol")
    s.add_argument("--scenario")
    s.add_argument("--protocol", choices=sorted(PROTOCOL_NAMES))
    s.add_argument("--model", help="e.g. type-i, type-ii:16, type-iii, type-iv-prime")
    s.add_argument("--dict", help="word list, one per line")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--list", action="store_true", help="list scenarios")
    s.set_defaults(func=cmd_attack)

    s = sub.add_parser("demo", help="demonstrations")
    demo = s.add_subparsers(dest="demo", required=True, parser_class=_Parser)
    d = demo.add_parser("small-subgroup", help="unprotected DH versus the card protocols")
    d.add_argument("--t", type=int, default=3)
    d.add_argument("--seed", type=int, default=0)
    d.add_argument("--json", action="store_true")
    d.set_defaults(func=cmd_demo)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose or args.command == "serve" else logging.WARNING,
                        format="%(asctime)s %(name)s %(message)s")
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"pwcard: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except BrokenPipeError:
        # reader went away (e.g. piped into head); silence the flush at exit
        os.dup2(os.open(os.devnull, os.O_WRONLY), sys.stdout.fileno())
        return 0


if __name__ == "__main__":
    sys.exit(main())
