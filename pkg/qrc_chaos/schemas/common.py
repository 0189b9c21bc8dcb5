from enum import Enum


class MapKind(str, Enum):
    LOGISTIC = "logistic"
    HENON = "henon"


class Boundary(str, Enum):
    OPEN = "open"
    PERIODIC = "periodic"


class Encoding(str, Enum):
    PI = "pi"            # theta = pi * x
    ARCCOS = "arccos"    # theta = arccos(1 - 2x)


class QubitOrder(str, Enum):
    GROUPED = "grouped"          # x reps, then y reps
    INTERLEAVED = "interleaved"  # x, y, x, y, ...


class PropagationMode(str, Enum):
    UNITARY = "unitary"
    LINDBLAD = "lindblad"


class PredictionMode(str, Enum):
    TEACHER_FORCED = "teacher_forced"
    AUTONOMOUS = "autonomous"


class Region(str, Enum):
    ALL = "all"
    CHAOTIC_ONLY = "chaotic_only"
