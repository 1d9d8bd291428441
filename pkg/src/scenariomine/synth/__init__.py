"""Synthetic trips with planted events, a brute-force oracle, and comparison."""
from .compare import CompareReport, compare, verify_directory
from .generate import GroundTruth, InfeasibleSpec, TripSpec, generate_trip, random_spec, write_dataset
from .oracle import OracleLabels, oracle_labels

__all__ = [
    "CompareReport",
    "GroundTruth",
    "InfeasibleSpec",
    "OracleLabels",
    "TripSpec",
    "compare",
    "generate_trip",
    "oracle_labels",
    "random_spec",
    "verify_directory",
    "write_dataset",
]
