"""Exception hierarchy shared by all parklot modules.

Every error carries the name of the module that raised it so the CLI can
report where a failure originated.
"""


class ParklotError(Exception):
    module = "parklot"

    def __str__(self):
        return f"[{self.module}] {super().__str__()}"


class ConfigError(ParklotError):
    module = "config"


# annot_ingest
class AnnotationError(ParklotError, ValueError):
    module = "annot_ingest"


class MalformedXml(AnnotationError):
    pass


class SchemaViolation(AnnotationError):
    pass


class InvalidBox(AnnotationError):
    pass


class UnknownClass(AnnotationError):
    pass


class HeaderMismatch(AnnotationError):
    pass


class RowParseError(AnnotationError):
    pass


class InconsistentImageSize(AnnotationError):
    pass


class EmptyInput(AnnotationError):
    pass


# depth_model
class DepthError(ParklotError, ValueError):
    module = "depth_model"


class NonFiniteInput(DepthError):
    pass


class NonPositiveArea(DepthError):
    pass


# view_fusion
class FusionError(ParklotError, ValueError):
    module = "view_fusion"


class InsufficientPoints(FusionError):
    pass


class DegenerateConfiguration(FusionError):
    pass


class PointAtInfinity(FusionError):
    pass


# vacancy
class VacancyError(ParklotError, ValueError):
    module = "vacancy"


class OverlappingRowBands(VacancyError):
    pass


# nav_routing
class RoutingError(ParklotError):
    module = "nav_routing"


class NoEntrances(RoutingError):
    pass


class UnknownNode(RoutingError, KeyError):
    pass


class NoVacantSpot(RoutingError):
    pass


class Unreachable(RoutingError):
    pass


# synth_harness
class HarnessError(ParklotError, ValueError):
    module = "synth_harness"


class InvalidSpec(HarnessError):
    def __init__(self, field, message):
        super().__init__(f"{field}: {message}")
        self.field = field


class GridMismatch(HarnessError):
    pass


class EmptyTruth(HarnessError):
    pass
