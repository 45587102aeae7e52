"""Curves shipped with the package for tests and demos."""

from importlib import resources

from .algebra import Curve

CURVE_NAMES = ("toy3", "toy5", "toy11", "toy13", "mid1009", "mid5021")


def load_curve(name: str) -> Curve:
    ref = resources.files("ectaks") / "data" / "curves" / f"{name}.json"
    with resources.as_file(ref) as path:
        return Curve.load(path)


def all_curves() -> dict:
    return {name: load_curve(name) for name in CURVE_NAMES}
