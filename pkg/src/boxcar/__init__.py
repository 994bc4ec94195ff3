"""Particle methods for size-structured population models, measured in the flat metric."""

from .ebt import Anomaly, AnomalyError, BlowUpError, CohortState, EbtVariant, RunReport
from .estimators import EscalatorBoxcarTrain, SplitUp
from .flat import flat_distance, flat_distance_between, flat_distance_upper_bound, total_variation, wasserstein1
from .harness import (ConvergenceRow, SimulationConfig, convergence_study, generate_reference, rows_to_csv,
                      simulate, stability_sweep)
from .measure import DiscreteMeasure, canonicalize, mollify, read_measure_csv, write_measure_csv
from .models import CoefficientSet, MeasureSummary, test_case

__version__ = "0.1.0"

__all__ = [
    "Anomaly", "AnomalyError", "BlowUpError", "CoefficientSet", "CohortState", "ConvergenceRow",
    "DiscreteMeasure", "EbtVariant", "EscalatorBoxcarTrain", "MeasureSummary", "RunReport",
    "SimulationConfig", "SplitUp", "canonicalize", "convergence_study", "flat_distance",
    "flat_distance_between", "flat_distance_upper_bound", "generate_reference", "mollify",
    "read_measure_csv", "rows_to_csv", "simulate", "stability_sweep", "test_case", "total_variation",
    "wasserstein1", "write_measure_csv",
]
