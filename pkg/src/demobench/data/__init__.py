"""Bundled race x sex fixtures: NYC and USA census benchmarks and three LL144 audit cohorts."""

from pathlib import Path

DATA_DIR = Path(__file__).resolve().parent


def path(name: str) -> Path:
    return DATA_DIR / name


def read(name: str) -> str:
    return path(name).read_text(encoding="utf-8")
