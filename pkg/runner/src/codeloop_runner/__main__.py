"""Entry point: read the job from stdin, emit the result on stdout."""

from __future__ import annotations

import os
import sys

# Candidates that plot must never open a display.
os.environ.setdefault("MPLBACKEND", "Agg")

from .executor import execute_one  # noqa: E402
from .protocol import ProtocolError, dump_result, parse_job  # noqa: E402


def main() -> int:
    try:
        job = parse_job(sys.stdin.read())
    except ProtocolError as exc:
        print(f"runner protocol error: {exc}", file=sys.stderr)
        return 2
    result = execute_one(job)
    sys.stdout.write(dump_result(result))
    sys.stdout.write("\n")
    return 0


if __name__ == "__main__":
    sys.exit(main())
