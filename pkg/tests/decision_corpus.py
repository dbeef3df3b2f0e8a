"""Decision texts shared by the schema tests and the acceptance suite."""

# The structured-output example as printed, including the raw line break
# inside the reasoning string.
VERBATIM_BLOCK = """{
  "reasoning": "Obstacle detected left; 
  turning right.",
  "decision": "right",
  "velocity": "medium",
  "sub_task_done": false,
  "mission_done": false
}"""

_OK = '"reasoning": "r", "decision": "right", "velocity": "medium", "sub_task_done": false, "mission_done": false'

VALID = [
    VERBATIM_BLOCK,
    "{" + _OK + "}",
    "Sure, here is my answer:\n{" + _OK + "}\nLet me know if you need more.",
    "```json\n{" + _OK + "}\n```",
    "{" + _OK + ', "confidence": 0.9}',
    '{"reasoning": "keep {clear} of the pillar", "decision": "hold", "velocity": "low", '
    '"sub_task_done": true, "mission_done": true}',
]

MALFORMED = [
    # missing fields
    '{"reasoning": "r", "decision": "right", "sub_task_done": false, "mission_done": false}',
    '{"decision": "right", "velocity": "medium", "sub_task_done": false, "mission_done": false}',
    '{"reasoning": "r", "velocity": "medium", "sub_task_done": false, "mission_done": false}',
    '{"reasoning": "r", "decision": "right", "velocity": "medium", "mission_done": false}',
    '{"reasoning": "r", "decision": "right", "velocity": "medium", "sub_task_done": false}',
    # values outside the vocabularies
    "{" + _OK.replace('"right"', '"ascend"') + "}",
    "{" + _OK.replace('"medium"', '"fast"') + "}",
    "{" + _OK.replace('"right"', '""') + "}",
    "{" + _OK.replace('"medium"', '"very high"') + "}",
    "{" + _OK.replace('"right"', '"forwards"') + "}",
    # wrong types
    "{" + _OK.replace('"sub_task_done": false', '"sub_task_done": "false"') + "}",
    "{" + _OK.replace('"mission_done": false', '"mission_done": 0') + "}",
    "{" + _OK.replace('"decision": "right"', '"decision": 3') + "}",
    "{" + _OK.replace('"reasoning": "r"', '"reasoning": null') + "}",
    # truncation and broken syntax
    '{"reasoning": "r", "decision": "right", "velo',
    "{" + _OK[: _OK.rindex(",")],
    "{'reasoning': 'r', 'decision': 'right', 'velocity': 'medium', 'sub_task_done': False, 'mission_done': False}",
    "{" + _OK + ",}",
    # no object at all
    "turn right at medium speed",
    "",
]
