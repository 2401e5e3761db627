"""Exception hierarchy for the producer side."""


class ExtractorError(Exception):
    """Base class for all extractor errors."""


class MissingCheckpointError(ExtractorError):
    """A backbone tag pointed at a checkpoint file that does not exist."""

    def __init__(self, path: str):
        self.path = path
        super().__init__(f"checkpoint not found: {path}")


class ImageReadError(ExtractorError):
    """The input image could not be opened or decoded."""

    def __init__(self, path: str, reason: str):
        self.path = path
        super().__init__(f"cannot read image {path}: {reason}")


class MaskShapeError(ExtractorError):
    """An annotation mask whose dims disagree with the recorded source dims."""

    def __init__(self, got: tuple, expected: tuple):
        self.got = got
        self.expected = expected
        super().__init__(f"mask shape {got} does not match source dims {expected}")
