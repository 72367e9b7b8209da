"""Exception hierarchy.

Everything raised on bad caller input derives from :class:`InputError`;
failures of the numerics themselves derive from :class:`NumericalError`.
The CLI maps these to exit codes 2 and 3.
"""


class TaskDecompError(Exception):
    pass


class InputError(TaskDecompError, ValueError):
    pass


class NumericalError(TaskDecompError, ArithmeticError):
    pass


class InvalidMatrix(InputError):
    pass


class NotSymmetric(InputError):
    pass


class DimensionMismatch(InputError):
    pass


class ZeroTaskVector(InputError):
    pass


class NeedTwoProjectors(InputError):
    pass


class InvalidThreshold(InputError):
    pass


class EmptyInput(InputError):
    pass


class LayerMismatch(InputError):
    pass


class NeedTwoVectors(InputError):
    pass


class ZeroSubspace(InputError):
    pass


class InvalidSpec(InputError):
    pass


class ArchitectureMismatch(InputError):
    pass


class DivergedTraining(NumericalError):
    def __init__(self, step: int, loss: float):
        super().__init__(f"non-finite loss {loss!r} at step {step}")
        self.step = step
        self.loss = loss


class TensorFileError(InputError):
    pass


class BadMagic(TensorFileError):
    pass


class ChecksumMismatch(TensorFileError):
    pass


class Truncated(TensorFileError):
    pass


class DuplicateName(TensorFileError):
    pass


class UnsupportedDtype(TensorFileError):
    pass
