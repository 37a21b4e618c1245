"""Monte Carlo engine, scenarios, output writers and the command line."""

from .scenario import Scenario, fig5, load_scenario, scenario_from_dict
from .sweep import BerCurve, BerPoint, run_ber_sweep, wilson_interval

__all__ = ["BerCurve", "BerPoint", "Scenario", "fig5", "load_scenario", "run_ber_sweep", "scenario_from_dict",
           "wilson_interval"]
