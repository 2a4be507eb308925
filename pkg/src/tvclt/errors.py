"""Exception types shared across the package."""


class TVCLTError(Exception):
    """Base class for all errors raised by tvclt."""


class InvalidParameter(TVCLTError, ValueError):
    pass


class GridTooCoarse(InvalidParameter):
    pass


class ZeroScale(InvalidParameter):
    pass


class GridOverflow(TVCLTError):
    """A common grid would exceed the configured point cap."""


class AtomExplosion(TVCLTError):
    """An atomic convolution would exceed the configured atom cap."""


class QuadratureNonconvergence(TVCLTError):
    """A quadrature did not reach its requested absolute tolerance."""


class SingularInput(TVCLTError, ValueError):
    """The operation needs a non-singular distribution."""


class ZeroDensity(TVCLTError, ValueError):
    pass


class ShrinkExhausted(TVCLTError):
    """The level-set half-width shrank below four grid steps."""


class InsufficientPoints(TVCLTError, ValueError):
    pass


class MixedBranch(TVCLTError):
    """Some distances equal one and others are clearly below one."""
