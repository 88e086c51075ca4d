from .ccfl import (CCFLFractional, CCFLInstance, ccfl_alpha, ccfl_process_client, ccfl_separation,
                   run_ccfl_fractional)
from .lp_norm import MixedPCInstance, build_lp_norm, mixed_pc_report, run_lp_norm
from .pmpc import (Bundle, PMPCFractional, PMPCInstance, build_pmpc_objective, pmpc_config,
                   pmpc_oracle_enumerate, pmpc_process_buyer, production_cost, run_pmpc_fractional)
from .set_cover import SetCoverInstance, build_setcover_multicost, element_row, run_setcover_fractional

__all__ = [
    "CCFLFractional", "CCFLInstance", "ccfl_alpha", "ccfl_process_client", "ccfl_separation", "run_ccfl_fractional",
    "MixedPCInstance", "build_lp_norm", "mixed_pc_report", "run_lp_norm",
    "Bundle", "PMPCFractional", "PMPCInstance", "build_pmpc_objective", "pmpc_config", "pmpc_oracle_enumerate",
    "pmpc_process_buyer", "production_cost", "run_pmpc_fractional",
    "SetCoverInstance", "build_setcover_multicost", "element_row", "run_setcover_fractional",
]
