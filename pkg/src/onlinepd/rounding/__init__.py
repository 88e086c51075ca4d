from .ccfl import CCFLRoundState, PhaseCheck, ccfl_phase_check, ccfl_round_client, ccfl_update_modified
from .pmpc import PMPCRoundState, pmpc_round_buyer
from .rng import RngStream
from .setcover import SetCoverRounding, round_setcover, rounding_rate

__all__ = [
    "CCFLRoundState", "PhaseCheck", "ccfl_phase_check", "ccfl_round_client", "ccfl_update_modified",
    "PMPCRoundState", "pmpc_round_buyer", "RngStream", "SetCoverRounding", "round_setcover", "rounding_rate",
]
