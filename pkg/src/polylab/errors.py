"""Exception types shared across the package.

Every error carries a short machine-readable ``code`` so callers (notably the
CLI) can map failures to exit codes and messages without string matching.
"""


class PolylabError(Exception):
    """Base class for all package errors."""

    code = "error"


class InvalidArgument(PolylabError, ValueError):
    """A caller-supplied value violates an operation's precondition."""

    code = "invalid-argument"


class MissingFile(PolylabError, FileNotFoundError):
    code = "missing-file"


class MissingLabelColumn(PolylabError, KeyError):
    code = "missing-label-column"


class NonNumericFeature(PolylabError, ValueError):
    """A feature cell failed to parse as a real number.

    ``row`` is the 1-based data row (header excluded), ``column`` the column
    name as it appears in the header.
    """

    code = "non-numeric-feature"

    def __init__(self, row: int, column: str, value: str):
        self.row = row
        self.column = column
        self.value = value
        super().__init__(
            f"non-numeric feature at row {row}, column {column!r}: {value!r}"
        )


class SingleClassFile(PolylabError, ValueError):
    code = "single-class-file"


class StratificationInfeasible(PolylabError, ValueError):
    """A class has too few members for the requested fold count."""

    code = "stratification-infeasible"

    def __init__(self, class_index: int, members: int, folds: int):
        self.class_index = class_index
        self.members = members
        self.folds = folds
        super().__init__(
            f"class {class_index} has {members} members, fewer than {folds} folds"
        )


class TrainingDiverged(PolylabError, ArithmeticError):
    """Training produced a non-finite loss; ``epoch`` is where it happened."""

    code = "training-diverged"

    def __init__(self, epoch: int):
        self.epoch = epoch
        super().__init__(f"non-finite loss at epoch {epoch}")


class ConfigError(PolylabError, ValueError):
    code = "config-error"
