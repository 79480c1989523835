"""Optional JSON-lines sink for special-function dispatch decisions.

The sink lives in a context variable, so concurrent callers in different
threads or contexts never see each other's trace target.
"""
import contextlib
import contextvars
import json

_sink: contextvars.ContextVar = contextvars.ContextVar("torwave_trace", default=None)


def emit(event: str, **fields) -> None:
    fh = _sink.get()
    if fh is None:
        return
    rec = {"event": event}
    for key, val in fields.items():
        if hasattr(val, "tolist"):
            val = val.tolist()
        rec[key] = val
    fh.write(json.dumps(rec, sort_keys=True, default=str) + "\n")


def enabled() -> bool:
    return _sink.get() is not None


@contextlib.contextmanager
def tracing(fh):
    """Route dispatch events to the writable text handle ``fh``."""
    token = _sink.set(fh)
    try:
        yield fh
    finally:
        _sink.reset(token)
