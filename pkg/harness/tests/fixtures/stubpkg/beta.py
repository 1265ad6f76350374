def b_one(x):
    """Negate."""
    return -x


def b_two(x, y):
    """Pair up."""
    return (x, y)


def b_three(flag=True):
    """Flip a flag."""
    return not flag


class BWidget:
    """A widget with one knob."""

    def __init__(self, knob=0):
        self.knob = knob
