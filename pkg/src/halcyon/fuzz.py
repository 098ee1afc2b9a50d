"""Random scenario texts for property and soak testing.

Generated rules always carry a ``payload contains`` predicate and reply
payloads never contain a rule keyword, and each ruleset holds at most one
forward action. Together this keeps delegation chains linear, so a scenario
cannot fan out exponentially before its tick limit.
"""

from __future__ import annotations

import random
from typing import Optional

KEYWORDS = ["fire", "alarm", "invoice", "storm", "lunch"]
FILLER = ["at", "home", "now", "please", "check", "the", "report", "door"]
REPLY_WORDS = ["ack", "noted", "on-it", "later"]
ACTIVITIES = ["meeting", "driving", "cooking", "sleeping"]
MODALITIES = ["audio", "visual", "haptic", "olfactory"]
LEVELS = ["low", "normal", "high", "critical"]


def _payload(rng: random.Random) -> str:
    words = rng.sample(FILLER, rng.randint(1, 3))
    if rng.random() < 0.6:
        word = rng.choice(KEYWORDS)
        if rng.random() < 0.2:
            word = word.upper()
        words.insert(rng.randrange(len(words) + 1), word)
    return " ".join(words)


def random_rules(rng: random.Random, principals: list[str], n: Optional[int] = None) -> list[str]:
    n = rng.randint(0, 3) if n is None else n
    lines = []
    forward_used = False
    for i in range(n):
        preds = [f'payload contains "{rng.choice(KEYWORDS)}"']
        if rng.random() < 0.3:
            preds.append(f"sender is {rng.choice(principals)}")
        if rng.random() < 0.3:
            preds.append(f"urgency >= {rng.choice(LEVELS)}")
        actions = []
        if not forward_used and rng.random() < 0.7:
            forward_used = True
            actions.append(f"forward {rng.choice(principals)} urgency={rng.choice(LEVELS)}")
        for _ in range(rng.randint(0 if actions else 1, 2)):
            target = "sender" if rng.random() < 0.6 else rng.choice(principals)
            actions.append(f'reply {target} "{rng.choice(REPLY_WORDS)}"')
        lines.append(f"rule r{i}: when {' and '.join(preds)} => {' ; '.join(actions)}")
    return lines


def random_scenario(rng: random.Random, max_principals: int = 5, max_messages: int = 20) -> str:
    n_principals = rng.randint(1, max_principals)
    principals = [f"p{i}" for i in range(n_principals)]
    tick_limit = rng.randint(40, 200)
    lines = [
        f"scenario fuzz-{rng.randrange(10**6)}",
        f"tick-limit {tick_limit}",
        f"recheck-delay {rng.randint(3, 40)}",
    ]
    if rng.random() < 0.2:
        lines.append(f"queue-limit {rng.randint(1, 4)}")
    if rng.random() < 0.2:
        lines.append(f"interrupt-urgency {rng.choice(LEVELS)}")
    lines += [f"principal {p}" for p in principals]

    for p in principals:
        for k in range(rng.randint(0, 3)):
            mods = ",".join(sorted(rng.sample(MODALITIES, rng.randint(1, 2))))
            line = f"device {p} {p}-d{k} modality={mods} priority={k + 1}"
            if rng.random() < 0.3:
                lo = rng.randint(0, tick_limit)
                line += f" present={lo}..{lo + rng.randint(0, 60)}"
            lines.append(line)
        tick = 0
        for _ in range(rng.randint(0, 4)):
            lo = tick + rng.randint(0, 20)
            hi = lo + rng.randint(0, 60)
            state = "free" if rng.random() < 0.4 else f"busy({rng.choice(ACTIVITIES)})"
            lines.append(f"availability {p} {lo}..{hi} {state}")
            tick = hi + 1

    lines += random_rules(rng, principals)
    for p in principals:
        others = [q for q in principals if q != p]
        if others and rng.random() < 0.25:
            lines.append(f"fallback {p} {rng.choice(others)}")
    if rng.random() < 0.2:
        row = ",".join(rng.sample(MODALITIES, rng.randint(1, 4)))
        lines.append(f"modality-table {rng.choice(ACTIVITIES + ['*'])} {row}")

    for _ in range(rng.randint(0, max_messages)):
        t = rng.randint(0, tick_limit)
        lo = rng.randint(max(0, t - 10), t)
        hi = "inf" if rng.random() < 0.4 else str(t + rng.randint(0, 80))
        to = ",".join(rng.sample(principals, rng.randint(1, n_principals)))
        flag = " perishable" if rng.random() < 0.3 else ""
        lines.append(
            f"at {t} send from={rng.choice(principals)} to=[{to}] urgency={rng.choice(LEVELS)} "
            f'valid={lo}..{hi}{flag} payload="{_payload(rng)}"'
        )
    return "\n".join(lines) + "\n"


def corpus(seed: int, count: int) -> list[str]:
    rng = random.Random(seed)
    return [random_scenario(rng) for _ in range(count)]
