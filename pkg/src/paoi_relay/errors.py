"""
exception hierarchy for the paoi_relay package.

every error raised on purpose by the library derives from PaoiError so the
CLI can map whole families of failures onto exit codes.
"""


class PaoiError(Exception):
    """base class for all paoi_relay errors."""


class InvalidScenarioError(PaoiError, ValueError):
    """a Scenario, Trajectory or Allocation breaks one of its invariants."""


class DomainError(PaoiError, ValueError):
    """an argument lies outside the domain of the formula it was passed to."""


class ConfigError(PaoiError, ValueError):
    """the INI configuration is malformed or contradicts itself."""


class InvalidProblemError(PaoiError, ValueError):
    """a QCQP was built with non-symmetric or indefinite quadratic forms."""


class InfeasibleError(PaoiError):
    """
    no allocation meets the energy budget of a phase.

    attributes:
        phase (str | None): 'up' or 'down' when raised for a scenario phase.
    """

    def __init__(self, message, phase=None):
        super().__init__(message)
        self.phase = phase


class BranchError(InfeasibleError):
    """the closed-form minimum-time branch was asked for with budget < E_min."""


class SubproblemInfeasibleError(PaoiError):
    """
    no strictly feasible starting point exists for a QCQP.

    attributes:
        report (FeasibilityReport | None): constraint check of the expansion
            point when raised from a trajectory step.
    """

    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report


class SolverStallError(PaoiError):
    """
    an iterative solver ran out of iterations.

    attributes:
        diagnostics (dict): solver state at the moment it gave up.
    """

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = dict(diagnostics or {})


class NumericError(PaoiError):
    """NaN or overflow appeared inside a numerical kernel."""
