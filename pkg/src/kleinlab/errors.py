"""Exception types shared across kleinlab.

Every error carries a short ``code`` string (used in reports) and the exit
status the command-line front end maps it to.
"""


class KleinlabError(Exception):
    code = "error"
    exit_code = 3


class BoundaryProximityError(KleinlabError):
    code = "boundary-proximity"


class PoleError(KleinlabError):
    code = "pole"


class BudgetExceededError(KleinlabError):
    code = "budget-exceeded"
    exit_code = 2


class InsufficientDepthError(KleinlabError):
    code = "insufficient-depth"
    exit_code = 2


class HeuristicModeRequired(KleinlabError):
    code = "heuristic-mode-required"


class HeuristicCosetsRejected(KleinlabError):
    code = "heuristic-cosets-rejected"


class EmptyMeasureError(KleinlabError):
    code = "empty-measure"


class NotFixedError(KleinlabError):
    code = "not-fixed"


class EndsOverlapError(KleinlabError):
    code = "ends-overlap"


class HypothesisError(KleinlabError):
    """A hypothesis the user must assert (e.g. convergence) is not indicated."""

    code = "hypothesis-missing"
    exit_code = 4
