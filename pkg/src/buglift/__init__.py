"""buglift: transfer-then-verify fuzzing for library APIs.

Mines context-aware bug patterns from resolved issue/PR pairs, transfers
them to functionally similar APIs via embedding similarity and LLM test
synthesis, executes the tests in an isolated harness, and filters false
positives through a staged, trace-grounded validation pipeline.
"""

__version__ = "0.1.0"
