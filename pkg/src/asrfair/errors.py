"""Exception hierarchy shared by all asrfair modules."""


class AsrFairError(Exception):
    """Base class for every error raised by this package."""


# audio / transforms
class InvalidParameter(AsrFairError, ValueError):
    pass


class UnsupportedFormat(AsrFairError, ValueError):
    pass


class CorruptContainer(AsrFairError, ValueError):
    pass


class SilentClip(AsrFairError, ValueError):
    """The clip has no signal power (all samples zero)."""


class InfeasibleSelection(AsrFairError, ValueError):
    """Cannot pick the requested number of pairwise non-adjacent chunks."""


# backends
class BackendError(AsrFairError):
    pass


class AuthError(BackendError):
    pass


class RateLimited(BackendError):
    pass


class NetworkError(BackendError):
    pass


class BackendRejected(BackendError):
    pass


class UnknownBackend(BackendError, KeyError):
    pass


# metrics / fairness
class BothEmpty(AsrFairError, ValueError):
    pass


class AllClipsDegenerate(AsrFairError):
    pass


class ManifestError(AsrFairError, ValueError):
    pass


# grammar
class GrammarError(AsrFairError, ValueError):
    pass


class ParseError(GrammarError):
    pass


class MissingSlot(GrammarError):
    pass


class UnreachableNonterminal(GrammarError):
    pass


class DepthExceeded(GrammarError):
    pass
