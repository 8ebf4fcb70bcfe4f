"""Exception types raised by the planner stages."""


class PlanningError(Exception):
    """Base class for all planner errors."""

    stage = "internal"


class DegenerateGeometry(PlanningError):
    stage = "geometry"


class InvalidFacet(PlanningError):
    stage = "geometry"


class UnknownPart(PlanningError, KeyError):
    stage = "geometry"

    def __str__(self):
        return Exception.__str__(self)


class NoContact(PlanningError):
    stage = "grasp"


class SceneError(PlanningError):
    stage = "scene"

    def __init__(self, violations):
        if isinstance(violations, str):
            violations = [violations]
        self.violations = list(violations)
        super().__init__("; ".join(self.violations))


class NoSolution(PlanningError):
    stage = "andor"


class NoPath(PlanningError):
    stage = "search"

    def __init__(self, message, empty_sets=()):
        super().__init__(message)
        self.empty_sets = list(empty_sets)


class NoCommonGrasp(PlanningError):
    stage = "grasp-assignment"

    def __init__(self, hop):
        super().__init__(f"no common grasp left for hop {hop}")
        self.hop = hop


class BudgetExhausted(PlanningError):
    stage = "replan"

    def __init__(self, message, cut_history=()):
        super().__init__(message)
        self.cut_history = list(cut_history)


class InvalidQuery(PlanningError):
    stage = "motion"


class MalformedGraph(PlanningError):
    stage = "sequence"
