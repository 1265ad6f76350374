"""apiharness: sidecar that instruments and executes generated test programs.

Speaks newline-delimited JSON over stdin/stdout: ``catalog`` scans an
importable library, ``instrument`` rewrites a program to log runtime values
on a dedicated trace channel, ``execute`` runs a program in an isolated
child process with timeout and signal capture.
"""

__version__ = "0.1.0"
