#!/usr/bin/env python
"""
Entry point for the imputation experiments.

    python manage.py generate --config smoke.json --out runs/smoke
    python manage.py train --model cnnae --out runs/smoke
    python manage.py test neural_imputation
"""
import os
import sys


def main(argv=None):
    os.environ.setdefault('DJANGO_SETTINGS_MODULE', 'config.settings')
    try:
        from django.core.management import execute_from_command_line
    except ImportError as exc:
        raise ImportError(
            "Django is required to run the experiment commands; install requirements.txt "
            "into the active environment."
        ) from exc
    execute_from_command_line(argv or sys.argv)


if __name__ == '__main__':
    main()
