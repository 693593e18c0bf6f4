from src.numcore.errors import (  # noqa: F401
    ConfigError,
    ContractError,
    DegenerateSampleError,
    DegenerateShardWarning,
    F3Error,
    FormatParseError,
    FormatVersionError,
    LabelIndexError,
    MissingDataError,
    NumericDomainError,
    ShapeError,
)
from src.numcore.gradcheck import GradCheckReport, grad_check  # noqa: F401
from src.numcore.matrix import Matrix, as_matrix  # noqa: F401
from src.numcore.optim import Adam  # noqa: F401
from src.numcore.tape import Tape  # noqa: F401
