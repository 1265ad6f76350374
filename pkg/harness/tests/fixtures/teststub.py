"""Tiny stub library for harness fixtures; all reprs are deterministic."""


class Config:
    def __init__(self):
        self.mode = "default"

    def __repr__(self):
        return f"Config(mode={self.mode!r})"


def explode(message):
    raise ValueError(message)


class Session:
    def __init__(self, name):
        self.name = name

    def __enter__(self):
        return self

    def __exit__(self, *exc_info):
        return False

    def __repr__(self):
        return f"Session(name={self.name!r})"


def session(name):
    return Session(name)


class Flags:
    def any(self):
        return True

    def __repr__(self):
        return "Flags()"


class Grad:
    def __repr__(self):
        return "Grad(ok=False)"


class Reading:
    def __init__(self):
        self.grad = Grad()

    def __repr__(self):
        return "Reading()"


def reading():
    return Reading()


def isbad(grad):
    return Flags()


class Leaf:
    def d(self):
        return 42

    def __repr__(self):
        return "Leaf()"


class Mid:
    def __init__(self):
        self.c = [Leaf()]

    def __repr__(self):
        return "Mid()"


class Root:
    def b(self):
        return Mid()

    def __repr__(self):
        return "Root()"
