class GameSuiteError(Exception):
    """Base class for every error raised by the game suite."""


class SpecSyntaxError(GameSuiteError):
    def __init__(self, message: str, line: int, column: int = 1):
        self.line = line
        self.column = column
        super().__init__(f"line {line}, column {column}: {message}")


class SpecSemanticError(GameSuiteError):
    def __init__(self, message: str, invariant: str):
        self.invariant = invariant
        super().__init__(f"{invariant}: {message}")


class NotApplicable(GameSuiteError):
    """A variant that cannot be expressed for the given game."""


class LevelOutOfRange(GameSuiteError):
    pass


class TerminalStateError(GameSuiteError):
    pass


class InvalidAction(GameSuiteError):
    pass


class IdentificationFailed(GameSuiteError):
    pass


class AmbiguousAgent(GameSuiteError):
    def __init__(self, message: str, candidates=()):
        self.candidates = tuple(candidates)
        super().__init__(message)


class DimensionMismatch(GameSuiteError):
    pass


class ConfigError(GameSuiteError):
    pass


class ArtifactFormatError(GameSuiteError):
    """A model export, checkpoint or table file could not be read."""
