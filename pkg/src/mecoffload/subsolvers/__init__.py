from .capacity import CapacityResult, capacity_terms, equal_split, solve_capacity
from .offload import (OffloadProblemData, OffloadResult, offload_data, round_offload,
                      solve_offload_sca)
from .subcarrier import (SubcarrierProblemData, SubcarrierResult, round_subcarriers,
                         round_robin, solve_subcarrier_sca, subcarrier_data)

__all__ = [
    "CapacityResult", "capacity_terms", "equal_split", "solve_capacity",
    "OffloadProblemData", "OffloadResult", "offload_data", "round_offload", "solve_offload_sca",
    "SubcarrierProblemData", "SubcarrierResult", "round_subcarriers", "round_robin",
    "solve_subcarrier_sca", "subcarrier_data",
]
