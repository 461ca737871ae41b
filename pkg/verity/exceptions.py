class VerityError(Exception):
    pass


class MalformedAnswer(VerityError):
    pass


class InvalidBox(VerityError):
    pass


class InvalidConfidence(VerityError):
    pass


class EmptyAnswer(VerityError):
    pass


class GroupTooSmall(VerityError):
    pass


class SupportMismatch(VerityError):
    pass


class NonFiniteGradient(VerityError):
    pass


class LatticeTooCoarse(VerityError):
    pass


class MissingJudgment(VerityError):
    pass


class InconsistentDimensions(VerityError):
    pass


class ParseError(VerityError):
    pass


class ValidationError(VerityError):
    pass


class UnknownCategory(VerityError):
    pass


class MissingCategory(VerityError):
    pass


class UnknownId(VerityError):
    pass


class ConfigError(VerityError):
    pass
