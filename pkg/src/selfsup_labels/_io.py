from contextlib import contextmanager


@contextmanager
def text_output(target):
    """Yield a writable text stream for a path, or pass an open stream through."""
    if hasattr(target, "write"):
        yield target
        return
    with open(target, "w", newline="", encoding="utf-8") as fh:
        yield fh
