"""Adaptive hierarchical and T-spline refinement for isogeometric analysis."""

from ._aiga import (
    AigaError,
    Dyadic,
    DyadicBox,
    HierElement,
    HierMesh,
    TMesh,
    ThbVariant,
    box_relation,
    bspline_eval,
    default_theta,
    expected_rate,
    fit_rate,
    mark,
    overlay,
    problem_names,
    refiner_names,
    run,
)

__all__ = [
    "AigaError",
    "Dyadic",
    "DyadicBox",
    "HierElement",
    "HierMesh",
    "TMesh",
    "ThbVariant",
    "box_relation",
    "bspline_eval",
    "default_theta",
    "expected_rate",
    "fit_rate",
    "mark",
    "overlay",
    "problem_names",
    "refiner_names",
    "run",
]
