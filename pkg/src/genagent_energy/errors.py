"""Exception types shared across the package."""


class TestbedError(Exception):
    """Base class for all domain errors raised by this package."""


class ConfigError(TestbedError):
    pass


# battery / dispatch
class InfeasibleAction(TestbedError):
    pass


class InvalidGrid(TestbedError):
    pass


class OutOfRange(TestbedError):
    pass


# auction
class UnknownItem(TestbedError):
    pass


class UnknownBidder(TestbedError):
    pass


class DuplicateBid(TestbedError):
    pass


class MismatchedAuction(TestbedError):
    pass


class TooManyItems(TestbedError):
    pass


class InstanceTooLarge(TestbedError):
    pass


# agent layer
class ParseFailure(TestbedError):
    """Raised when a TARJ response cannot be parsed.

    ``section`` names the first offending section (e.g. ``"Journal"``).
    """

    def __init__(self, section: str, detail: str = ""):
        self.section = section
        self.detail = detail
        msg = f"cannot parse section {section!r}"
        if detail:
            msg += f": {detail}"
        super().__init__(msg)


class AmbiguousAction(ParseFailure):
    def __init__(self, detail: str = ""):
        super().__init__("Action", detail)


class UnknownItemName(ParseFailure):
    def __init__(self, name: str):
        self.name = name
        super().__init__("ChosenSubset", f"unknown item name {name!r}")


class MissingPlaceholder(TestbedError):
    pass


# harness
class EmptySeries(TestbedError):
    pass


class IoFailure(TestbedError):
    pass
