#!/usr/bin/env python3
"""Regenerates mini_corpus.jsonl: 1 model x 1 domain x 6 threats x 10 responses.

Role responses are built longer and more formal than the others so the
fixture carries real effects. Output is deterministic.
"""
import json
import random

rng = random.Random(20240611)

TASK = ("Analyze the following healthcare policy proposal: expand rural clinic funding by 20 percent. "
        "Consider implementation feasibility, cost-benefit analysis, stakeholder impacts, and potential "
        "unintended consequences.")
CLOSING = "Please provide a comprehensive response."
THREATS = {
    "control": ("", ""),
    "general": ("", "This decision has serious consequences, so"),
    "humanity": ("", "People will be significantly harmed if this analysis is inadequate, so"),
    "authority": ("", "This analysis is required by senior leadership and regulatory authorities, so"),
    "role": ("You are a senior policy expert whose professional reputation depends on the quality of this analysis.", ""),
    "time": ("", "This analysis must be completed immediately under urgent deadline pressure, so"),
}

PLAIN = [
    "The proposal may help rural patients reach care sooner.",
    "Costs will rise in the first year.",
    "Clinics might struggle to hire enough staff.",
    "Some patients could still travel long distances.",
    "It depends on how the money is spent.",
    "Local leaders should be involved early.",
    "The plan is clearly popular with voters.",
    "Funding alone will not fix every gap.",
    "Results should be checked after two years.",
    "Perhaps a pilot program is the safest start.",
]
FORMAL = [
    "Furthermore, the implementation framework must ensure accountability across every stakeholder group.",
    "Consequently, a comprehensive assessment of fiscal impact is essential prior to adoption.",
    "Moreover, the evaluation should consider workforce constraints and therefore prioritize recruitment incentives.",
    "In accordance with established methodology, outcomes should be measured against explicit criteria.",
    "Accordingly, it is recommended that the program be phased in with respect to regional capacity.",
    "Nevertheless, substantial uncertainty remains regarding long-term sustainability.",
    "Additionally, the analysis indicates that preventive care reduces downstream hospital costs.",
    "Thus, the proposal demonstrates significant potential benefit when implementation is monitored.",
]


def response(threat: str) -> str:
    if threat == "role":
        parts = rng.sample(FORMAL, rng.randint(4, 7)) + rng.sample(PLAIN, rng.randint(1, 3))
    elif threat == "control":
        parts = rng.sample(PLAIN, rng.randint(2, 5)) + rng.sample(FORMAL, rng.randint(0, 1))
    else:
        parts = rng.sample(PLAIN, rng.randint(2, 6)) + rng.sample(FORMAL, rng.randint(0, 2))
    rng.shuffle(parts)
    return " ".join(parts)


def prompt(threat: str) -> str:
    prefix, suffix = THREATS[threat]
    closing = ("Please provide a comprehensive response with the thoroughness expected of your expertise level."
               if threat == "role" else (f"{suffix} please provide a comprehensive response." if suffix else CLOSING))
    return " ".join(p for p in (prefix, TASK, closing) if p)


def main() -> None:
    with open("mini_corpus.jsonl", "w", encoding="utf-8") as out:
        for threat in THREATS:
            for i in range(10):
                rec = {
                    "id": f"mini-{threat}-{i:02d}",
                    "model": "Claude",
                    "domain": "policy",
                    "threat": threat,
                    "prompt": prompt(threat),
                    "response": response(threat),
                    "temperature": 0.7,
                    "max_tokens": 4096,
                    "top_p": 0.9,
                    "frequency_penalty": 0.0,
                    "timestamp": f"2025-03-01T10:{i:02d}:00Z",
                    "source": "imported",
                }
                out.write(json.dumps(rec, ensure_ascii=False) + "\n")


if __name__ == "__main__":
    main()
