from .audit import AuditResult, Tolerances, audit_engine
from .bruteforce import BruteForceResult, covering_bruteforce, offline_bruteforce, pmpc_bruteforce
from .instances import (KINDS, CoveringInstance, generate_instance, instance_from_dict, instance_to_dict,
                        load_instance, save_instance)
from .suite import RunSpec, parse_seeds, reports_to_csv, run_suite, summarize, write_csv
from .trials import CSV_COLUMNS, TrialReport, TrialSettings, run_trial, solve_fractional

__all__ = [
    "AuditResult", "Tolerances", "audit_engine", "BruteForceResult", "covering_bruteforce",
    "offline_bruteforce", "pmpc_bruteforce", "KINDS", "CoveringInstance", "generate_instance",
    "instance_from_dict", "instance_to_dict", "load_instance", "save_instance", "RunSpec", "parse_seeds",
    "reports_to_csv", "run_suite", "summarize", "write_csv", "CSV_COLUMNS", "TrialReport", "TrialSettings",
    "run_trial", "solve_fractional",
]
