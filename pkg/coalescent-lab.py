#!/usr/bin/env python3
"""
CoalescentLab - Additive Coalescent and Fragmentation Toolkit
Simulates finite additive coalescents and Brownian fragmentations, evaluates the
density of subordinator-driven fragmentations against the Brownian one, and
verifies the martingale, marginal-density and integro-differential identities.

Usage:
    python coalescent-lab.py <command> [options] --seed <int>

Run with --help for the list of commands.
"""

import sys
from pathlib import Path


def check_dependencies():
    """Check that the numerical stack is importable."""
    missing = []
    for module in ('numpy', 'scipy', 'chardet'):
        try:
            __import__(module)
        except ImportError:
            missing.append(module)
    if missing:
        sys.stderr.write("=" * 60 + "\n")
        sys.stderr.write(f"Missing Dependencies: {', '.join(missing)}\n")
        sys.stderr.write("=" * 60 + "\n")
        sys.stderr.write("\nPlease install them: pip install -r requirements.txt\n\n")
        return False
    return True


def main():
    """Main entry point for CoalescentLab."""
    if not check_dependencies():
        sys.exit(1)

    sys.path.insert(0, str(Path(__file__).parent))

    from CoalescentLab.cli import main as cli_main

    sys.exit(cli_main())


if __name__ == '__main__':
    main()
