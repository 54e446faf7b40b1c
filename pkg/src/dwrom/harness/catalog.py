"""Benchmark catalog: training ranges, online horizons and out-of-training presets."""

import numpy as np

from ..errors import ConfigurationError

# training: parameter ranges for random draws
# online_t_end: horizon of the in-training online test
# out_of_training: overrides (and altered initial data) for extrapolation tests
# length_scale: wavelength used for the dispersion parameter mu = h0 / L
CATALOG = {
    ("bbm", "monochromatic"): dict(
        training={"h0": (0.7, 1.3)}, online_t_end=250.0,
        out_of_training={"h0": 0.63, "a0": 0.05, "initial": "two_cosine"},
        length_scale=20.0 * np.pi, mode="energy",
        note="online horizon T = 250 for the in-training test; extrapolation with a "
             "two-cosine initial profile",
    ),
    ("bbm", "undular_bore"): dict(
        training={"h0": (0.7, 1.3)}, online_t_end=15.0,
        out_of_training={"h0": 0.63, "a0": 0.03},
        length_scale=20.0 * np.pi, mode="energy",
        note="online horizon T = 15 for the in-training test",
    ),
    ("bbm", "solitary_bar"): dict(
        training={"h0": (0.7, 1.3)}, online_t_end=60.0,
        out_of_training={"h0": 0.63, "a0": 0.15},
        length_scale=10.0, mode="energy",
        note="online horizon equal to the training horizon",
    ),
    ("eb", "solitary_bar"): dict(
        training={"h0": (0.8, 1.2), "a0": (0.16, 0.24)}, online_t_end=18.0,
        out_of_training={"h0": 0.75, "a0": 0.25},
        length_scale=10.0, mode="galerkin",
        note="parameter box h0 in [0.8, 1.2], a0 in [0.16, 0.24]",
    ),
    ("eb", "monochromatic_bar"): dict(
        training={"h0": (0.45, 0.55), "a0": (0.024, 0.030)}, online_t_end=40.0,
        out_of_training={"h0": 0.4},
        length_scale=3.7, mode="galerkin",
        note="out-of-training depth h0 = 0.4",
    ),
}


def catalog_entry(model, benchmark):
    try:
        return CATALOG[(model, benchmark)]
    except KeyError:
        known = ", ".join(f"{m}/{b}" for m, b in CATALOG)
        raise ConfigurationError(f"unknown benchmark {model}/{benchmark}; known: {known}") from None


def preset_overrides(model, benchmark, preset):
    """Overrides for ``in_training`` (none) or ``out_of_training``."""
    if preset in (None, "in_training"):
        return {}
    if preset == "out_of_training":
        return dict(catalog_entry(model, benchmark)["out_of_training"])
    raise ConfigurationError(f"unknown online preset {preset!r}")
