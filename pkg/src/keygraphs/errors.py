"""Exception hierarchy shared by all keygraphs modules."""


class KeygraphError(Exception):
    """Base class for every error raised by this package."""


class ParseError(KeygraphError, ValueError):
    def __init__(self, message, line=None, path=None):
        self.line = line
        self.path = path
        where = ""
        if path is not None:
            where += f"{path}:"
        if line is not None:
            where += f"{line}:"
        super().__init__(f"{where} {message}" if where else message)


class OutOfBoundsPoint(KeygraphError, ValueError):
    pass


class EmptyImage(KeygraphError, ValueError):
    pass


class FewerThanThreePoints(KeygraphError, ValueError):
    pass


class AllCollinear(KeygraphError, ValueError):
    pass


class StructureMismatch(KeygraphError, ValueError):
    pass


class DegenerateArc(KeygraphError, ValueError):
    pass


class InvalidDescriptor(KeygraphError, ValueError):
    pass


class EmptyModel(KeygraphError):
    pass


class DegenerateConfiguration(KeygraphError, ValueError):
    pass


class SingularMatrix(KeygraphError, ValueError):
    pass


class RectOutOfBounds(KeygraphError, ValueError):
    pass


class EmptyCandidateSet(KeygraphError, ValueError):
    pass


class NoPoseFound(KeygraphError):
    pass


class DatasetLayoutError(KeygraphError):
    pass


class EmptyFrameDirectory(KeygraphError):
    pass
