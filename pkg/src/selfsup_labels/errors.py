"""Exception hierarchy.

Every error carries an exit-code category so the CLI can map failures to
its documented exit codes without inspecting messages.
"""


class SelfSupError(Exception):
    exit_code = 2


class ConfigError(SelfSupError):
    exit_code = 1


class DataError(SelfSupError):
    exit_code = 2


class NumericalError(SelfSupError):
    exit_code = 3


# market data
class SchemaMismatch(DataError):
    pass


class NonPositivePrice(DataError):
    def __init__(self, index, value=None):
        self.index = index
        super().__init__(f"non-positive or missing price at row {index}: {value!r}")


class NonMonotoneTimestamps(DataError):
    def __init__(self, index):
        self.index = index
        super().__init__(f"timestamps not strictly increasing at row {index}")


class BadRow(DataError):
    def __init__(self, index, reason):
        self.index = index
        super().__init__(f"unparseable row {index}: {reason}")


class SeriesTooShort(DataError):
    pass


# labeling / features
class NegativeTau(ConfigError):
    pass


class WindowOutOfRange(ConfigError):
    pass


class WindowOrder(ConfigError):
    pass


class DegenerateScaler(DataError):
    pass


# models
class ShapeMismatch(SelfSupError):
    exit_code = 2


class DimensionMismatch(ShapeMismatch):
    pass


class NonFiniteLoss(NumericalError):
    def __init__(self, epoch, loss):
        self.epoch = epoch
        self.loss = loss
        super().__init__(f"training diverged at epoch {epoch} (loss={loss})")


class NonFiniteFeature(DataError):
    pass


class EmptyInput(DataError):
    pass


class FormatError(DataError):
    """Raised when a binary artifact has a bad magic number or version."""
