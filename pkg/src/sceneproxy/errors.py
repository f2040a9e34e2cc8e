"""Exception types shared across the toolchain.

Input-side problems (malformed prompts, files, parameters) derive from
``InputError`` so the CLI can map them to exit code 3; everything else that
goes wrong while computing derives from ``SceneProxyError`` and maps to 4.
"""


class SceneProxyError(Exception):
    """Base class for every error raised by this package."""


class InputError(SceneProxyError, ValueError):
    """Bad input: prompt text, file contents, or user parameters."""


# prompt parsing

class PromptError(InputError):
    def __init__(self, message, position=0):
        super().__init__(f"{message} (at byte {position})")
        self.position = position


class EmptyPrompt(PromptError):
    def __init__(self):
        super().__init__("empty prompt", 0)


class PromptSyntaxError(PromptError):
    def __init__(self, position, expected, found=None):
        self.expected = frozenset(expected)
        self.found = found
        what = "end of input" if found is None else repr(found)
        super().__init__(
            f"expected one of {sorted(self.expected)}, found {what}", position
        )


class UnknownRelation(PromptError):
    def __init__(self, token, position):
        self.token = token
        super().__init__(f"unknown relation {token!r}", position)


class UnknownMove(PromptError):
    def __init__(self, token, position):
        self.token = token
        super().__init__(f"unknown camera move {token!r}", position)


class DanglingReference(PromptError):
    def __init__(self, token, position):
        self.token = token
        super().__init__(f"relation refers to undeclared object {token!r}", position)


# file formats

class FormatError(InputError):
    pass


class BadMagic(FormatError):
    pass


class TruncatedFile(FormatError):
    pass


class DimensionMismatch(InputError):
    pass


class BadParameter(InputError):
    pass


# runtime

class EmptyLibrary(InputError):
    pass


class EmptyEnvIndex(InputError):
    pass


class EmptyScene(SceneProxyError):
    pass


class DegenerateCamera(SceneProxyError):
    pass


class LengthMismatch(InputError):
    pass


class ShapeMismatch(SceneProxyError, ValueError):
    pass


class TooFewPoints(InputError):
    pass


class DegenerateConfiguration(SceneProxyError):
    pass


class TooFewFrames(InputError):
    pass


class TooFewKeys(InputError):
    pass


class NonMonotoneTimes(InputError):
    pass


class EmptyDataset(InputError):
    pass


class MissingSource(InputError):
    pass


class DimensionError(DimensionMismatch):
    pass


class BadT(InputError):
    pass
