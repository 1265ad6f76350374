"""Stub target library with one seeded silent bug and one seeded crash."""


def _make_probe(name, result=False):
    def probe(x=None):
        return result

    probe.__name__ = name
    probe.__qualname__ = name
    probe.__doc__ = f"Capability probe {name}; returns False unless the feature is present."
    return probe


from stublib import core, ext, ops  # noqa: E402,F401
