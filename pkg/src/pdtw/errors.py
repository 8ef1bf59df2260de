"""Exception types raised across the pipeline."""


class PdtwError(Exception):
    """Base class for all pipeline errors."""


class DegenerateSample(PdtwError, ValueError):
    pass


class BadConfig(PdtwError, ValueError):
    pass


class LengthMismatch(PdtwError, ValueError):
    pass


class UnsupportedFormat(PdtwError, ValueError):
    pass


class TooShort(PdtwError, ValueError):
    pass


class MalformedHeader(PdtwError, ValueError):
    pass


class DimensionMismatch(PdtwError, ValueError):
    pass


class MalformedLine(PdtwError, ValueError):
    def __init__(self, message, line_number=None, path=None):
        where = ""
        if path is not None:
            where += f"{path}:"
        if line_number is not None:
            where += f"{line_number}: "
        elif where:
            where += " "
        super().__init__(where + message)
        self.line_number = line_number
        self.path = path


class OverlappingIntervals(PdtwError, ValueError):
    pass


class UnknownFile(PdtwError, KeyError):
    def __str__(self):
        return str(self.args[0]) if self.args else "unknown file"


class EmptyPairSet(PdtwError, ValueError):
    pass


class EmptyCorpus(PdtwError, ValueError):
    pass
