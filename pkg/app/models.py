import enum


class WeightKind(str, enum.Enum):
    X2 = "X2"  # |X_2| weight
    X1 = "x1"  # |x_1| weight


class AlphaContext(str, enum.Enum):
    FORWARD = "forward"
    CHARACTERIZATION = "characterization"


class Verdict(str, enum.Enum):
    ACCEPTED = "accepted"
    REJECTED = "rejected"


class CanonicalVariant(str, enum.Enum):
    COR1 = "cor1"
    COR2 = "cor2"
    SATS1 = "sats1"


class FamilyKind(str, enum.Enum):
    STEP3 = "step3"
    STEPQ = "stepq"
    FAILURE = "failure"


class OracleMass(str, enum.Enum):
    HARDY = "hardy"
    IDENTITY = "identity"


class Command(str, enum.Enum):
    CHECK_BETA = "check-beta"
    ALPHA2BETA = "alpha2beta"
    GAMMA = "gamma"
    EXPONENTS = "exponents"
    CANONICAL = "canonical"
    SHARPNESS = "sharpness"
    FAILURE = "failure"
    SOBOLEV = "sobolev"
    RAYLEIGH = "rayleigh"
    ORACLE = "oracle"
    SN = "sn"
