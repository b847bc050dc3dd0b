"""Bundled knowledge bases: the burglary domain and constraint counterexamples."""

from importlib import resources


def path(name: str):
    return resources.files(__name__) / name


def read(name: str) -> str:
    return path(name).read_text(encoding="utf-8")
