"""DEVS simulation with state lifetimes computed by a Mamdani fuzzy controller."""
from .devs import (AtomicModel, CoupledModel, Message, Simulator, Trace, initialize, run_until,
                   select_imminent, step)
from .fis import build_fis_coupled
from .fuzzy import (ClippedSet, FuzzyRule, LinguisticVariable, PiecewiseLinearFn, RuleBase,
                    Trapezoid, ZeroActivation, aggregate, centroid, centroid_numeric,
                    default_rule_base, fis_evaluate)
from .scenario import Scenario, compare, load_scenario, run_scenario
from .wildfire import Conventional, Fuzzy, GridSpec, WeatherSchedule, build_forest

__version__ = "0.1.0"
