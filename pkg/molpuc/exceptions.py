"""Bespoke exceptions and errors."""


class MeasureConfigError(Exception):
    """MeasureConfigError exception wrapper to handle invalid or missing measure configurations.

    Args:
        Exception : Exception to wrap.
    """

    pass


class InsufficientMomentsError(Exception):
    """InsufficientMomentsError exception wrapper to handle moment requests beyond the stored data.

    Args:
        Exception : Exception to wrap.
    """

    pass


class DomainError(Exception):
    """DomainError exception wrapper to handle evaluation points outside the admissible region.

    Args:
        Exception : Exception to wrap.
    """

    pass


class QuasiDefinitenessError(Exception):
    """QuasiDefinitenessError exception wrapper to handle singular leading block minors.

    Args:
        Exception : Exception to wrap.
    """

    def __init__(self, message: str, level: int = None) -> None:
        """Constructor.

        Args:
            message (str): Error message.
            level (int, optional): Truncation level l at which g^{[l]} is singular.
        """
        super().__init__(message)
        self.level = level


class ConsistencyError(Exception):
    """ConsistencyError exception wrapper to handle two computation routes that disagree beyond tolerance.

    Args:
        Exception : Exception to wrap.
    """

    pass
