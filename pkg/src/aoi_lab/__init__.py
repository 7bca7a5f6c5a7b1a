"""Age-of-information aware UAV data-collection tour planning."""
from .aoi import AoIReport, Tour, evaluate, fly_hover_split, total_aoi
from .estimators import (ExactPlanner, GeneticPlanner, NearestNeighborPlanner, RandomPlanner,
                         SimulatedAnnealingPlanner, TWAStarPlanner)
from .exceptions import AoILabError, DimensionError, InfeasibleError, NumericalError, ParameterError, SchemaError
from .instance import Instance
from .scenario import EnvParams, GroundCluster, Scenario, UavParams, build_grids, generate_scenario

__version__ = "0.1.0"

__all__ = [
    "AoIReport", "Tour", "evaluate", "fly_hover_split", "total_aoi", "ExactPlanner", "GeneticPlanner",
    "NearestNeighborPlanner", "RandomPlanner", "SimulatedAnnealingPlanner", "TWAStarPlanner", "AoILabError",
    "DimensionError", "InfeasibleError", "NumericalError", "ParameterError", "SchemaError", "Instance",
    "EnvParams", "GroundCluster", "Scenario", "UavParams", "build_grids", "generate_scenario",
]
