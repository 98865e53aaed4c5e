"""Operator command line.

Subcommands: params, register, handshake, serve, attack <name>,
cost-table, baseline, bench.  Exit codes: 0 success / property held,
1 property violated or run failed, 2 usage error, 3 I/O or transport
error.  Passwords come from the CHAOSKEX_PASSWORD environment variable
or an interactive prompt, never argv.  Every command is deterministic
under --seed.
"""

from __future__ import annotations

import argparse
import getpass
import os
import sys
import time

from . import adversary, costmodel
from .errors import (
    ChaoskexError,
    RegistrationRefusedError,
    StorageError,
    TransportError,
)
from .chebyshev import cheby_eval_fast_counted
from .numtheory import gen_prime
from .primitives import Identity, Meter, hash_algorithms, hash_tuple, new_rng
from .protocol import (
    CredentialStore,
    ProtocolConfig,
    ServerSession,
    UserSession,
    register_server_process,
    register_user_begin,
    register_user_complete,
)
from .storage import FileCredentialStore, load_credentials, save_credentials
from .transport import (
    SocketServer,
    run_handshake,
    socket_handshake,
    socket_register,
)
from .yoonjeon import TAG_YJ_MAC, new_key_table, run_baseline

EXIT_OK = 0
EXIT_VIOLATED = 1
EXIT_USAGE = 2
EXIT_IO = 3

PASSWORD_ENV = "CHAOSKEX_PASSWORD"
DEFAULT_PORT = 42555

ATTACK_NAMES = (
    "replay",
    "mitm",
    "anonymity",
    "linkability",
    "known-key",
    "insider",
    "unmasked-points",
)


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="chaoskex",
        description="Chaotic-map authenticated key agreement: run it, attack it, cost it.",
    )
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, help="deterministic RNG seed")
    common.add_argument("--bits", type=int, default=256, help="prime modulus bit length")
    common.add_argument(
        "--hash", dest="hash_algo", choices=hash_algorithms(), default="sha256"
    )
    common.add_argument("--terms", type=int, default=64, help="chaotic sequence length")
    common.add_argument("--format", choices=("text", "machine"), default="text")

    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("params", parents=[common], help="generate public parameters")
    p.set_defaults(func=cmd_params)

    p = sub.add_parser("register", parents=[common], help="enrol an identity")
    p.add_argument("--identity", required=True)
    p.add_argument("--creds", required=True, help="credential file to write")
    p.add_argument("--store", help="server store file (in-process registration)")
    p.add_argument("--host", help="server host (socket registration)")
    p.add_argument("--port", type=int, default=DEFAULT_PORT)
    p.add_argument("--server-id", default="server")
    p.add_argument("--server-seed", type=int)
    p.set_defaults(func=cmd_register)

    p = sub.add_parser("handshake", parents=[common], help="run one authentication")
    p.add_argument("--creds", required=True, help="credential file to use")
    p.add_argument("--store", help="server store file (loopback)")
    p.add_argument("--host", help="server host (socket)")
    p.add_argument("--port", type=int, default=DEFAULT_PORT)
    p.add_argument("--server-seed", type=int)
    p.set_defaults(func=cmd_handshake)

    p = sub.add_parser("serve", parents=[common], help="accept socket handshakes")
    p.add_argument("--store", required=True)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=DEFAULT_PORT)
    p.add_argument("--server-id", default="server")
    p.set_defaults(func=cmd_serve)

    p = sub.add_parser("attack", parents=[common], help="run a scripted attack")
    p.add_argument("name", choices=ATTACK_NAMES)
    p.add_argument(
        "--protocol", choices=("main", "yoon-jeon"), default="main",
        help="which protocol the scan targets",
    )
    p.add_argument("--runs", type=int, default=8, help="sessions per sweep")
    p.add_argument("--policy", choices=adversary.SUBSTITUTION_POLICIES)
    p.set_defaults(func=cmd_attack)

    p = sub.add_parser("cost-table", parents=[common], help="print the cost comparison")
    p.set_defaults(func=cmd_cost_table)

    p = sub.add_parser("baseline", parents=[common], help="run the reference protocol")
    p.set_defaults(func=cmd_baseline)

    p = sub.add_parser("bench", parents=[common], help="micro-benchmarks")
    p.set_defaults(func=cmd_bench)
    return parser


def _config(args) -> ProtocolConfig:
    return ProtocolConfig(
        hash_algo=args.hash_algo, modulus_bits=args.bits, logistic_terms=args.terms
    )


def _password() -> bytes:
    value = os.environ.get(PASSWORD_ENV)
    if value:
        return value.encode()
    return getpass.getpass("password: ").encode()


def _sub_rng(seed: int | None, offset: int):
    """Independent deterministic stream per role; OS randomness unseeded."""
    return new_rng(None if seed is None else seed + offset)


def _census_line(role: str, meter: Meter) -> str:
    expr, overhead = costmodel.census_from_meter(meter)
    extra = ",".join(f"{tag}:{count}" for tag, count in overhead.items())
    return f"role={role} cost={expr} overhead={extra or 'none'}"


# --------------------------------------------------------------------------
# Commands
# --------------------------------------------------------------------------

def cmd_params(args) -> int:
    config = _config(args)
    rng = new_rng(args.seed)
    modulus = gen_prime(config.modulus_bits, rng)
    base = rng.randrange(modulus)
    if args.format == "machine":
        print(f"bits={config.modulus_bits}")
        print(f"modulus={modulus:#x}")
        print(f"base={base:#x}")
    else:
        print(f"modulus ({config.modulus_bits} bits): {modulus:#x}")
        print(f"base point: {base:#x}")
    return EXIT_OK


def cmd_register(args) -> int:
    config = _config(args)
    identity = Identity.from_text(args.identity)
    password = _password()
    rng = new_rng(args.seed)
    if args.host:
        credentials = socket_register(
            identity, password, args.host, args.port, rng, config
        )
    elif args.store:
        store = FileCredentialStore(args.store)
        server_seed = args.server_seed
        if server_seed is None and args.seed is not None:
            server_seed = args.seed + 1
        server_rng = new_rng(server_seed)
        request, pending = register_user_begin(identity, password, rng, config)
        response = register_server_process(
            request, Identity.from_text(args.server_id), store, server_rng, config
        )
        credentials = register_user_complete(pending, response)
    else:
        print("register needs --store or --host", file=sys.stderr)
        return EXIT_USAGE
    save_credentials(args.creds, credentials)
    if args.format == "machine":
        print(f"identity={identity}")
        print(f"pseudonym={credentials.pseudonym.hex()}")
        print(f"creds={args.creds}")
    else:
        print(f"registered {identity}; pseudonym {credentials.pseudonym.hex()}")
        print(f"credentials written to {args.creds}")
    return EXIT_OK


def _report_session(args, role: str, session) -> None:
    state = session.phase.value
    if args.format == "machine":
        line = f"role={role} state={state}"
        if session.abort_reason:
            line += f" reason={session.abort_reason}"
        if state == "established":
            line += f" key_fp={session.session_key().hex()[:8]}"
        print(line)
        print(_census_line(role, session.meter))
    else:
        if state == "established":
            print(f"{role}: Established, key fingerprint {session.session_key().hex()[:8]}")
        else:
            print(f"{role}: Aborted ({session.abort_reason})")
        expr, overhead = costmodel.census_from_meter(session.meter)
        extra = ", ".join(f"{tag} x{count}" for tag, count in overhead.items())
        print(f"{role} operations: {expr} (overhead: {extra or 'none'})")


def cmd_handshake(args) -> int:
    config = _config(args)
    credentials = load_credentials(args.creds)
    password = _password()
    user = UserSession(credentials, password, new_rng(args.seed), config)
    if args.host:
        transcript = socket_handshake(user, args.host, args.port)
        server = None
    elif args.store:
        store = FileCredentialStore(args.store)
        server_seed = args.server_seed
        if server_seed is None and args.seed is not None:
            server_seed = args.seed + 1
        server = ServerSession(store, credentials.server_id, new_rng(server_seed), config)
        _, _, transcript = run_handshake(user, server)
    else:
        print("handshake needs --store or --host", file=sys.stderr)
        return EXIT_USAGE

    sizes = ",".join(str(len(entry.frame)) for entry in transcript)
    if args.format == "machine":
        print(f"frames={sizes}")
    else:
        print(f"frame sizes: {sizes} bytes")
    _report_session(args, "user", user)
    if server is not None:
        _report_session(args, "server", server)
    established = user.phase.value == "established" and (
        server is None or server.phase.value == "established"
    )
    return EXIT_OK if established else EXIT_VIOLATED


def cmd_serve(args) -> int:
    config = _config(args)
    store = FileCredentialStore(args.store)
    server = SocketServer(
        store,
        Identity.from_text(args.server_id),
        config=config,
        host=args.host,
        port=args.port,
        seed=args.seed,
    )
    print(f"listening on {server.host}:{server.port}", flush=True)
    server.serve_forever()
    return EXIT_OK


def _attack_fixture(args, config, n_users: int = 1):
    """Deterministic in-process enrolment shared by the attack commands."""
    store = CredentialStore()
    server_id = Identity.from_text("server")
    rng = _sub_rng(args.seed, 0)
    users = []
    for index in range(n_users):
        identity = Identity.from_text(f"user-{index}")
        password = f"correct horse {index}".encode()
        request, pending = register_user_begin(identity, password, rng, config)
        response = register_server_process(request, server_id, store, rng, config)
        users.append((register_user_complete(pending, response), password))
    return store, server_id, users


def cmd_attack(args) -> int:
    config = _config(args)
    outcomes: list[adversary.AttackOutcome] = []

    if args.name == "replay":
        store, server_id, [(creds, password)] = _attack_fixture(args, config)
        user = UserSession(creds, password, _sub_rng(args.seed, 1), config)
        server = ServerSession(store, server_id, _sub_rng(args.seed, 2), config)
        _, _, transcript = run_handshake(user, server)
        fresh = ServerSession(store, server_id, _sub_rng(args.seed, 3), config)
        outcomes.append(adversary.attack_replay(transcript, fresh))

    elif args.name == "mitm":
        store, server_id, [(creds, password)] = _attack_fixture(args, config)
        policies = (args.policy,) if args.policy else adversary.SUBSTITUTION_POLICIES
        for offset, policy in enumerate(policies):
            user = UserSession(creds, password, _sub_rng(args.seed, 10 + offset), config)
            server = ServerSession(store, server_id, _sub_rng(args.seed, 50 + offset), config)
            outcomes.append(
                adversary.attack_mitm_substitute(
                    user, server, policy, _sub_rng(args.seed, 90 + offset)
                )
            )

    elif args.name == "anonymity":
        if args.protocol == "main":
            store, server_id, [(creds, password)] = _attack_fixture(args, config)
            for run in range(args.runs):
                user = UserSession(creds, password, _sub_rng(args.seed, 10 + run), config)
                server = ServerSession(
                    store, server_id, _sub_rng(args.seed, 1000 + run), config
                )
                _, _, transcript = run_handshake(user, server)
                outcomes.append(adversary.scan_anonymity(transcript, [creds.identity]))
        else:
            initiator = Identity.from_text("alice")
            responder = Identity.from_text("bob")
            keys = new_key_table([initiator, responder], _sub_rng(args.seed, 0))
            for run in range(args.runs):
                baseline = run_baseline(
                    initiator,
                    responder,
                    keys,
                    _sub_rng(args.seed, 10 + run),
                    bits=config.modulus_bits,
                    algo=config.hash_algo,
                )
                outcomes.append(
                    adversary.scan_anonymity(baseline.transcript, [initiator, responder])
                )

    elif args.name == "linkability":
        transcripts = []
        if args.protocol == "main":
            store, server_id, [(creds, password)] = _attack_fixture(args, config)
            for run in range(max(args.runs, 2)):
                user = UserSession(creds, password, _sub_rng(args.seed, 10 + run), config)
                server = ServerSession(
                    store, server_id, _sub_rng(args.seed, 1000 + run), config
                )
                _, _, transcript = run_handshake(user, server)
                transcripts.append(transcript)
        else:
            initiator = Identity.from_text("alice")
            responder = Identity.from_text("bob")
            keys = new_key_table([initiator, responder], _sub_rng(args.seed, 0))
            for run in range(max(args.runs, 2)):
                baseline = run_baseline(
                    initiator,
                    responder,
                    keys,
                    _sub_rng(args.seed, 10 + run),
                    bits=config.modulus_bits,
                    algo=config.hash_algo,
                )
                transcripts.append(baseline.transcript)
        print(adversary.report_linkability(transcripts))
        return EXIT_OK

    elif args.name == "known-key":
        store, server_id, [(creds, password)] = _attack_fixture(args, config)
        records = []
        for run in range(max(args.runs, 2)):
            user = UserSession(creds, password, _sub_rng(args.seed, 10 + run), config)
            server = ServerSession(store, server_id, _sub_rng(args.seed, 1000 + run), config)
            _, _, transcript = run_handshake(user, server)
            records.append(adversary.SessionRecord(transcript, user.session_key()))
        outcomes.append(adversary.check_known_key(records, 0, config.hash_algo))

    elif args.name == "insider":
        store, server_id, users = _attack_fixture(args, config, n_users=2)
        (victim_creds, victim_password), (insider_creds, insider_password) = users
        victim = UserSession(victim_creds, victim_password, _sub_rng(args.seed, 1), config)
        outcomes.append(
            adversary.attack_insider_impersonation(
                victim, insider_creds, insider_password, _sub_rng(args.seed, 2)
            )
        )

    elif args.name == "unmasked-points":
        store, server_id, [(creds, password)] = _attack_fixture(args, config)
        user = UserSession(creds, password, _sub_rng(args.seed, 1), config)
        server = ServerSession(store, server_id, _sub_rng(args.seed, 2), config)
        _, _, transcript = run_handshake(user, server)
        outcomes.append(adversary.scan_unmasked_points(transcript, creds, password, config))

    print(adversary.render_outcomes(outcomes))
    return EXIT_VIOLATED if any(o.succeeded for o in outcomes) else EXIT_OK


def cmd_cost_table(args) -> int:
    reports = costmodel.evaluate_table()
    print(costmodel.render_table(reports, machine=args.format == "machine"))
    return EXIT_OK


def cmd_baseline(args) -> int:
    config = _config(args)
    initiator = Identity.from_text("alice")
    responder = Identity.from_text("bob")
    keys = new_key_table([initiator, responder], _sub_rng(args.seed, 0))
    run = run_baseline(
        initiator,
        responder,
        keys,
        _sub_rng(args.seed, 1),
        bits=config.modulus_bits,
        algo=config.hash_algo,
    )
    sizes = ",".join(str(len(entry.frame)) for entry in run.transcript)
    state = "established" if run.established else "failed"
    if args.format == "machine":
        print(f"state={state} key_fp={run.session_key.hex()[:8]}")
        print(f"frames={sizes}")
    else:
        print(f"baseline run {state}; key fingerprint {run.session_key.hex()[:8]}")
        print(f"frame sizes: {sizes} bytes")
    for role, meter in (
        ("initiator", run.initiator_meter),
        ("relay", run.relay_meter),
        ("responder", run.responder_meter),
    ):
        expr, _ = costmodel.census_from_meter(meter, frozenset({TAG_YJ_MAC}))
        print(f"role={role} cost={expr}")
    return EXIT_OK if run.established else EXIT_VIOLATED


def cmd_bench(args) -> int:
    config = _config(args)
    rng = new_rng(args.seed)
    modulus = gen_prime(config.modulus_bits, rng)
    base = rng.randrange(modulus)
    exponent = rng.randrange(2, modulus)

    reps = 50
    started = time.perf_counter()
    for _ in range(reps):
        _, muls = cheby_eval_fast_counted(exponent, base, modulus)
    map_rate = reps / (time.perf_counter() - started)

    reps = 20000
    started = time.perf_counter()
    for _ in range(reps):
        hash_tuple("bench", [b"bench"], config.hash_algo)
    hash_rate = reps / (time.perf_counter() - started)

    print(f"map evaluation ({config.modulus_bits}-bit, {muls} modular multiplies): "
          f"{map_rate:,.0f}/s")
    print(f"hash_tuple ({config.hash_algo}): {hash_rate:,.0f}/s")
    print(f"observed weight of one map evaluation: {hash_rate / map_rate:,.1f} hash units")
    return EXIT_OK


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (StorageError, TransportError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except RegistrationRefusedError as exc:
        print(f"registration refused: {exc}", file=sys.stderr)
        return EXIT_VIOLATED
    except ValueError as exc:
        print(f"invalid arguments: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ChaoskexError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VIOLATED
    except KeyboardInterrupt:
        return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
