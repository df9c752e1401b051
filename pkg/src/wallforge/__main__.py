"""Entry point for python -m wallforge."""

from wallforge.cli import main

main()
