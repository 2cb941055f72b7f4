"""
Command-line entry point.

    python -m neural_imputation.cli train --model cnnae --epochs 2 --out runs/smoke

is the same as `python manage.py train ...`; run() returns the exit status
instead of exiting so it can be called from tests and scripts.
"""

import os
import sys
from typing import Optional, Sequence

STAGES = ('generate', 'preprocess', 'train', 'impute', 'evaluate', 'decode', 'report')


def run(argv: Optional[Sequence[str]] = None) -> int:
    os.environ.setdefault('DJANGO_SETTINGS_MODULE', 'config.settings')
    from django.core.management import execute_from_command_line

    args = list(sys.argv[1:] if argv is None else argv)
    if not args or args[0] not in STAGES:
        sys.stderr.write(f"usage: manage.py {{{'|'.join(STAGES)}}} [options]\n")
        return 2
    try:
        execute_from_command_line(['manage.py', *args])
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else (0 if exc.code is None else 1)
    return 0


if __name__ == '__main__':
    sys.exit(run())
