"""Stub package for catalog tests: 12 public callables across 4 modules."""


def entry(task):
    """Dispatch a task to the stub pipeline."""
    return task
