"""Energy-aware path planning for air-ground (drive/fly) robots on elevation grids."""
from .config import RunConfig, load_config
from .energy import BatteryState, EnergyParams, hover_energy, move_energy, transform_energy
from .errors import (AgplanError, BatteryExhaustedError, ConfigError, ConsistencyError,
                     ContractError, IterationCapError, NoPathError, PlanningError, TerrainError)
from .estimator import AirGroundPlanner
from .flight import FlightParams, search_flight_direct, search_flight_escape
from .ground import MobilityLimits, search_ground
from .planner import PlannedPath, SmoothedPath, account, plan, smooth
from .switch_opt import BasParams, baseline_optimize, optimize_switch_point
from .terrain import GridIndex, TerrainGrid, TerrainSpec, load_dem, synthesize_terrain, write_dem

__version__ = "0.1.0"

__all__ = [
    "AgplanError", "AirGroundPlanner", "BasParams", "BatteryExhaustedError", "BatteryState",
    "ConfigError", "ConsistencyError", "ContractError", "EnergyParams", "FlightParams",
    "GridIndex", "IterationCapError", "MobilityLimits", "NoPathError", "PlannedPath",
    "PlanningError", "RunConfig", "SmoothedPath", "TerrainError", "TerrainGrid", "TerrainSpec",
    "account", "baseline_optimize", "hover_energy", "load_config", "load_dem", "move_energy",
    "optimize_switch_point", "plan", "search_flight_direct", "search_flight_escape",
    "search_ground", "smooth", "synthesize_terrain", "transform_energy", "write_dem",
]
