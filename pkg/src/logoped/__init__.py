"""Speech therapy exercise platform: multimedia catalog, exercise
authoring, timed session runtime, score history, homework generation and
offline transfer bundles."""

__version__ = "0.1.0"
