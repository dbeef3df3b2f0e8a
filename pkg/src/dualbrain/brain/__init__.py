"""Cloud-brain planning and cerebellum decision making."""

from .mission import (
    DecisionTrace,
    MissionConfig,
    MissionLog,
    MissionResult,
    World,
    build_request,
    decide_step,
    plan_mission,
    run_mission,
)
from .policies import (
    CerebellumPolicy,
    CloudPolicy,
    ExternalPlanner,
    ExternalPolicy,
    GeometricPlanner,
    GeometricPolicy,
    ScriptedPolicy,
    SingleBrainPolicy,
)
from .schema import FALLBACK_DECISION, Decision, MissionPlan, SubGoal, validate_decision, validate_plan

__all__ = [
    "CerebellumPolicy",
    "CloudPolicy",
    "Decision",
    "DecisionTrace",
    "ExternalPlanner",
    "ExternalPolicy",
    "FALLBACK_DECISION",
    "GeometricPlanner",
    "GeometricPolicy",
    "MissionConfig",
    "MissionLog",
    "MissionPlan",
    "MissionResult",
    "ScriptedPolicy",
    "SingleBrainPolicy",
    "SubGoal",
    "World",
    "build_request",
    "decide_step",
    "plan_mission",
    "run_mission",
    "validate_decision",
    "validate_plan",
]
