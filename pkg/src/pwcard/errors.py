"""Exception hierarchy shared by the protocol state machines and the service."""


class AuthError(Exception):
    """A handshake step failed. On the wire every subclass maps to one opaque reject."""


class IdentityMismatch(AuthError):
    pass


class ConfirmationFailed(AuthError):
    pass


class NonSubgroupElement(AuthError):
    pass


class UnknownIdentity(AuthError):
    pass


class UnexpectedMessage(AuthError):
    """Frame arrived for the wrong protocol, message type, or session phase."""


class MalformedFrame(AuthError):
    pass


class Rejected(AuthError):
    """The peer answered with a reject frame."""


class CardDestroyed(Exception):
    """The card's query counter is exhausted and its secrets have been wiped."""


class SuiteMismatch(ValueError):
    pass


class FrameError(ValueError):
    pass


class Truncated(FrameError):
    pass


class BadVersion(FrameError):
    pass


class LengthMismatch(FrameError):
    pass


class UnknownProtocol(FrameError):
    pass


class InsecureVariantDisabled(RuntimeError):
    """Server-first confirmation is only available inside the attack harness."""
