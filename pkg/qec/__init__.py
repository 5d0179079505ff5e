from qec.code import ToricCode, build_toric, validate
from qec.noise import LogicalLabel, NoiseModel, PauliError, Syndrome

__all__ = [
    "ToricCode",
    "build_toric",
    "validate",
    "LogicalLabel",
    "NoiseModel",
    "PauliError",
    "Syndrome",
]
