"""chaoskex: password-authenticated key agreement over chaotic-map semigroups.

The handshake exchanges Chebyshev-map points masked by registration
secrets derived from a logistic-map sum folded through the Chinese
remainder theorem.  Alongside the protocol itself the package ships a
reference three-party baseline, an adversary harness (replay, tampering,
anonymity and known-key checks), a symbolic cost model, and a CLI.
"""

from .chebyshev import (
    ChebyKeyPair,
    ChebyParams,
    cheby_eval_fast,
    cheby_eval_naive,
    cheby_keygen,
    cheby_shared,
    decode_element,
    encode_element,
)
from .errors import ChaoskexError
from .logistic import LogisticParams, chaotic_sum, decimal_lift, logistic_sequence
from .numtheory import CrtSystem, crt_solve, gen_coprime, gen_prime, is_probable_prime
from .primitives import Identity, new_rng
from .protocol import (
    CredentialStore,
    ProtocolConfig,
    ServerSession,
    UserCredentials,
    UserSession,
    register_server_process,
    register_user_begin,
    register_user_complete,
)
from .transport import (
    SocketServer,
    decode_frame,
    dump_transcript,
    encode_frame,
    parse_transcript,
    run_handshake,
    socket_handshake,
)

__version__ = "1.0.0"

__all__ = [
    "ChaoskexError",
    "ChebyKeyPair",
    "ChebyParams",
    "CredentialStore",
    "CrtSystem",
    "Identity",
    "LogisticParams",
    "ProtocolConfig",
    "ServerSession",
    "SocketServer",
    "UserCredentials",
    "UserSession",
    "chaotic_sum",
    "cheby_eval_fast",
    "cheby_eval_naive",
    "cheby_keygen",
    "cheby_shared",
    "crt_solve",
    "decimal_lift",
    "decode_element",
    "decode_frame",
    "dump_transcript",
    "encode_element",
    "encode_frame",
    "gen_coprime",
    "gen_prime",
    "is_probable_prime",
    "logistic_sequence",
    "new_rng",
    "parse_transcript",
    "register_server_process",
    "register_user_begin",
    "register_user_complete",
    "run_handshake",
    "socket_handshake",
]
