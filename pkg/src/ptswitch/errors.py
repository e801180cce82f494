"""Exception hierarchy shared by all ptswitch modules."""


class PTSwitchError(Exception):
    """Base class for every error raised by this package."""


class ValidationError(PTSwitchError, ValueError):
    """A parameter or configuration value violates its constraint."""

    def __init__(self, field, message):
        self.field = field
        super().__init__(f"{field}: {message}")


class ParseError(PTSwitchError, ValueError):
    def __init__(self, message, line=None, path=None):
        self.line = line
        self.path = path
        where = ""
        if path is not None:
            where += f"{path}:"
        if line is not None:
            where += f"{line}:"
        super().__init__(f"{where} {message}" if where else message)


class AsymmetricRates(PTSwitchError, ValueError):
    """The closed-form layer needs gamma2 == gammab."""


class ZeroVector(PTSwitchError, ValueError):
    pass


class BelowExistence(PTSwitchError, ValueError):
    """Drive amplitude is below the lasing threshold Omega_ex."""


class NegativeIntensity(PTSwitchError, ValueError):
    """The requested nonzero branch has negative intensity at these parameters."""


class NumericalBlowup(PTSwitchError, ArithmeticError):
    def __init__(self, t, message="amplitude overflow or non-finite value"):
        self.t = t
        super().__init__(f"{message} at t = {t:.6g}")


class EnsembleFailure(PTSwitchError, ArithmeticError):
    """More trajectories blew up than the failure budget allows."""


class WindowTooShort(PTSwitchError, ValueError):
    pass


class DegeneratePhononIntensity(PTSwitchError, ArithmeticError):
    pass


class InvalidThresholds(PTSwitchError, ValueError):
    pass


class WindowNotCoherent(PTSwitchError, ValueError):
    pass
