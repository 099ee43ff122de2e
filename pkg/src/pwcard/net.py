"""TCP authentication service and the card-side client.

One connection carries exactly one handshake.  Any failure, whatever the
cause, is answered with the same empty reject frame and the connection is
closed.  An SSCA session has no fourth message, so the server signals
acceptance by closing the connection after the card's tag.
"""

from __future__ import annotations

import itertools
import logging
import socket
import socketserver
import threading
from dataclasses import dataclass, field

from . import pscab, pscav, ssca
from .errors import AuthError, CardDestroyed, FrameError, Rejected, UnexpectedMessage
from .group import kdf
from .store import ServerStore, card_protocol, load_card, save_card
from .wire import Frame, MsgType, ProtocolId, encode_frame, read_frame, reject_frame

log = logging.getLogger("pwcard.net")

EXIT_ACCEPT = 0
EXIT_REJECT = 2
EXIT_USAGE = 3
EXIT_NETWORK = 4
EXIT_DESTROYED = 5

DEFAULT_TIMEOUT = 10.0

_MODULES = {
    ProtocolId.SSCA: ssca,
    ProtocolId.PSCAB: pscab,
    ProtocolId.PSCABV: pscab,
    ProtocolId.PSCAV: pscav,
}


def check_value(session_key: bytes) -> str:
    """16 hex chars that let both ends compare keys without revealing them."""
    return kdf(session_key, b"check")[:8].hex()


def parse_address(text: str) -> tuple[str, int]:
    host, sep, port = text.rpartition(":")
    if not sep or not port.isdigit():
        raise ValueError(f"expected HOST:PORT, got {text!r}")
    return host or "127.0.0.1", int(port)


@dataclass
class SessionRecord:
    session_id: int
    protocol_id: int | None
    accepted: bool
    check: str | None = None


class ServerConnection:
    """Per-connection state machine, independent of the socket.

    ``handle`` returns ``(reply, close)``.  The first frame picks the
    protocol; afterwards a frame for another protocol or a fresh first
    message is a protocol violation.
    """

    def __init__(self, servers: dict[int, object], session_id: int, rng=None, sink=None):
        self.servers = servers
        self.session_id = session_id
        self.rng = rng
        self.sink = sink
        self.handshake = None
        self.protocol_id = None
        self.record = None

    def _settle(self, record: SessionRecord) -> None:
        # recorded before the final frame goes out, so a client never outruns the log
        self.record = record
        if self.sink is not None:
            self.sink(record)

    def handle(self, frame: Frame) -> tuple[Frame | None, bool]:
        try:
            if self.handshake is None:
                if frame.protocol_id not in self.servers:
                    raise UnexpectedMessage("protocol not served here")
                if frame.msg_type != MsgType.MSG1:
                    raise UnexpectedMessage("session must open with the first message")
                self.protocol_id = frame.protocol_id
                mod = _MODULES[ProtocolId(frame.protocol_id)]
                self.handshake = mod.ServerHandshake(self.servers[frame.protocol_id], self.rng)
            elif frame.protocol_id != self.protocol_id or frame.msg_type == MsgType.MSG1:
                raise UnexpectedMessage("second session on one connection")
            reply = self.handshake.receive(frame)
        except AuthError:
            return self._reject(frame.protocol_id)
        if self.handshake.session_key is not None:
            self._settle(SessionRecord(self.session_id, self.protocol_id, True,
                                       check_value(self.handshake.session_key)))
            log.info("session %d protocol %#04x Accept check=%s", self.session_id, self.protocol_id,
                     self.record.check)
            return reply, True
        return reply, False

    def _reject(self, protocol_id) -> tuple[Frame, bool]:
        self._settle(SessionRecord(self.session_id, self.protocol_id, False))
        log.info("session %d protocol %s Reject", self.session_id,
                 f"{self.protocol_id:#04x}" if self.protocol_id else "-")
        return reject_frame(self.protocol_id or protocol_id), True

    def reject_garbage(self) -> Frame:
        return self._reject(ProtocolId.SSCA)[0]


class _Handler(socketserver.StreamRequestHandler):
    timeout = DEFAULT_TIMEOUT

    def handle(self):
        service: AuthService = self.server.service
        conn = ServerConnection(service.servers, service.next_session_id(), sink=service.record)
        try:
            while True:
                try:
                    frame = read_frame(self.rfile)
                except FrameError:
                    self.wfile.write(encode_frame(conn.reject_garbage()))
                    break
                if frame is None:
                    if conn.record is None and conn.handshake is not None:
                        conn._reject(conn.protocol_id)
                    break
                reply, close = conn.handle(frame)
                if reply is not None:
                    self.wfile.write(encode_frame(reply))
                if close:
                    break
        except OSError:
            if conn.record is None:
                conn._reject(conn.protocol_id or 0)
        except Exception:  # noqa: BLE001  a single bad connection must not stop the service
            log.exception("session %d internal error", conn.session_id)
            try:
                self.wfile.write(encode_frame(reject_frame(conn.protocol_id or ProtocolId.SSCA)))
            except OSError:
                pass
            if conn.record is None:
                conn._settle(SessionRecord(conn.session_id, conn.protocol_id, False))


class _TCPServer(socketserver.ThreadingTCPServer):
    daemon_threads = True
    allow_reuse_address = True


@dataclass
class AuthService:
    """Serves every protocol the store has a master secret for, optionally filtered."""

    store: ServerStore
    host: str = "127.0.0.1"
    port: int = 0
    protocols: tuple[int, ...] | None = None
    sessions: list[SessionRecord] = field(default_factory=list)

    def __post_init__(self):
        wanted = self.protocols if self.protocols is not None else tuple(self.store.masters)
        self.servers = {}
        for pid in wanted:
            try:
                self.servers[pid] = self.store.server_for(pid)
            except KeyError:
                raise ValueError(f"store has no master secret for protocol {pid:#04x}") from None
        self._ids = itertools.count(1)
        self._lock = threading.Lock()
        self._tcp = _TCPServer((self.host, self.port), _Handler)
        self._tcp.service = self
        self._thread = None

    def __repr__(self):
        return f"AuthService(address={self.address}, protocols={sorted(self.servers)})"

    @property
    def address(self) -> tuple[str, int]:
        return self._tcp.server_address[:2]

    def next_session_id(self) -> int:
        with self._lock:
            return next(self._ids)

    def record(self, rec: SessionRecord) -> None:
        with self._lock:
            self.sessions.append(rec)

    def serve_forever(self) -> None:
        log.info("listening on %s:%d", *self.address)
        self._tcp.serve_forever(poll_interval=0.05)

    def start(self) -> "AuthService":
        self._thread = threading.Thread(target=self.serve_forever, daemon=True)
        self._thread.start()
        return self

    def stop(self) -> None:
        self._tcp.shutdown()
        self._tcp.server_close()
        if self._thread is not None:
            self._thread.join()

    def __enter__(self):
        return self.start()

    def __exit__(self, *exc):
        self.stop()


@dataclass
class AuthReport:
    status: int
    message: str
    check: str | None = None

    @property
    def accepted(self) -> bool:
        return self.status == EXIT_ACCEPT

    def __str__(self):
        return f"{self.message} check={self.check}" if self.check else self.message


def card_handshake(cred, password):
    return _MODULES[ProtocolId(card_protocol(cred))].CardHandshake(cred, password)


def _exchange(sock, card, first: Frame) -> bytes:
    """Run the card side over a connected socket and return the session key."""
    stream = sock.makefile("rb")
    sock.sendall(encode_frame(first))
    while True:
        frame = read_frame(stream)
        if frame is None:
            if card.session_key is not None:
                return card.session_key
            raise ConnectionError("server closed the connection mid-session")
        if frame.msg_type == MsgType.REJECT:
            raise Rejected("server rejected the session")
        reply = card.receive(frame)
        if reply is not None:
            sock.sendall(encode_frame(reply))
        if card.session_key is not None and card.protocol_id != ProtocolId.SSCA:
            return card.session_key


def authenticate(card_path, address, password, timeout: float = DEFAULT_TIMEOUT) -> AuthReport:
    """Run one handshake from a card image file and write the updated image back.

    The image is saved whatever the outcome, since drawing randomness and
    bumping the query counter must persist.
    """
    cred = load_card(card_path)
    if isinstance(address, str):
        address = parse_address(address)
    card = card_handshake(cred, password)
    try:
        first = card.start()
        with socket.create_connection(address, timeout=timeout) as sock:
            key = _exchange(sock, card, first)
        report = AuthReport(EXIT_ACCEPT, "Accept", check_value(key))
    except CardDestroyed:
        report = AuthReport(EXIT_DESTROYED, "Reject: card destroyed")
    except (AuthError, FrameError):
        report = AuthReport(EXIT_REJECT, "Reject")
    except OSError as exc:
        report = AuthReport(EXIT_NETWORK, f"network error: {exc.__class__.__name__}")
    save_card(card_path, cred)
    return report
