"""Gate for the server-first confirmation variants.

Those variants let a card-memory thief test passwords offline.  They exist
so the attack can be reproduced, and refuse to run unless the caller is
inside :func:`insecure_variants`.
"""

from contextlib import contextmanager
from contextvars import ContextVar

from .errors import InsecureVariantDisabled

_enabled: ContextVar[bool] = ContextVar("pwcard_insecure_variants", default=False)


@contextmanager
def insecure_variants():
    token = _enabled.set(True)
    try:
        yield
    finally:
        _enabled.reset(token)


def require_insecure_variants() -> None:
    if not _enabled.get():
        raise InsecureVariantDisabled("server-first confirmation is only available in the attack harness")
