"""Seeded synthetic corpora.

``maintenance_corpus`` mimics structured inspection phrases: a device or part
name, a measured quantity, then a spoken numeric value and unit.
``random_corpus`` draws tokens uniformly and serves as a high-perplexity
control.
"""

from __future__ import annotations

import random

DEVICES = [
    "main hydraulic pump",
    "cooling water pump",
    "number one compressor",
    "number two compressor",
    "boiler feed valve",
    "turbine main bearing",
    "generator stator winding",
    "fuel oil heater",
    "lube oil cooler",
    "air intake filter",
    "exhaust gas fan",
    "condenser vacuum line",
    "steam drum level gauge",
    "auxiliary diesel engine",
    "fire pump motor",
    "ballast pump motor",
    "sea water strainer",
    "starting air receiver",
    "main switchboard breaker",
    "emergency generator",
    "cargo hold ventilation fan",
    "steering gear hydraulic unit",
    "fresh water generator",
    "sewage treatment blower",
]

QUANTITIES = {
    "pressure": ["bar", "kilopascal"],
    "temperature": ["degrees celsius"],
    "vibration": ["millimeters per second"],
    "voltage": ["volts"],
    "current": ["amperes"],
    "flow rate": ["liters per minute", "cubic meters per hour"],
}

TEMPLATES = [
    ("{device} {quantity} {value} {unit}", 5),
    ("check {device} {quantity} reading {value} {unit}", 3),
    ("{device} {quantity} is {value} {unit} status normal", 2),
    ("record {device} {quantity} {value} {unit}", 1),
]

_UNITS = ["zero", "one", "two", "three", "four", "five", "six", "seven", "eight", "nine"]
_TENS = ["twenty", "thirty", "forty", "fifty", "sixty", "seventy", "eighty", "ninety"]
_TEENS = ["ten", "eleven", "twelve", "thirteen", "fourteen", "fifteen", "sixteen",
          "seventeen", "eighteen", "nineteen"]


def spoken_number(rng: random.Random) -> str:
    n = rng.randint(1, 99)
    if n < 10:
        words = [_UNITS[n]]
    elif n < 20:
        words = [_TEENS[n - 10]]
    else:
        words = [_TENS[n // 10 - 2]] + ([_UNITS[n % 10]] if n % 10 else [])
    if rng.random() < 0.4:
        words += ["point", _UNITS[rng.randint(0, 9)]]
    return " ".join(words)


def maintenance_corpus(n_sentences: int, seed: int = 0) -> list[str]:
    """Generate ``n_sentences`` inspection phrases, deterministically from ``seed``."""
    rng = random.Random(seed)
    # the device inventory and its measured quantities are fixed by a separate stream
    layout = random.Random(1234)
    quantities = list(QUANTITIES)
    device_qty = {d: layout.sample(quantities, layout.randint(1, 3)) for d in DEVICES}
    device_weights = [1.0 / (i + 1) ** 0.8 for i in range(len(DEVICES))]
    templates, template_weights = zip(*TEMPLATES)
    out = []
    for _ in range(n_sentences):
        device = rng.choices(DEVICES, device_weights)[0]
        quantity = rng.choice(device_qty[device])
        unit = rng.choice(QUANTITIES[quantity])
        template = rng.choices(templates, template_weights)[0]
        out.append(template.format(device=device, quantity=quantity,
                                   value=spoken_number(rng), unit=unit))
    return out


def random_corpus(n_sentences: int, vocab_size: int = 300, min_len: int = 6,
                  max_len: int = 14, seed: int = 0) -> list[str]:
    rng = random.Random(seed)
    words = [f"w{i}" for i in range(vocab_size)]
    return [" ".join(rng.choices(words, k=rng.randint(min_len, max_len)))
            for _ in range(n_sentences)]


def domain_split(n_train: int = 1000, n_test: int = 200, n_model: int | None = None,
                 seed: int = 0, kind: str = "maintenance") -> tuple[list[str], list[str], list[str]]:
    """Disjoint train / test / model-training samples from one generator stream.

    The main model is trained on its own sample of the domain, so agreement
    between map drafts and model output comes from shared structure rather
    than from both memorizing the same sentences.
    """
    n_model = n_train + n_test if n_model is None else n_model
    total = n_train + n_test + n_model
    if kind == "maintenance":
        sentences = maintenance_corpus(total, seed)
    elif kind == "random":
        sentences = random_corpus(total, seed=seed)
    else:
        raise ValueError(f"unknown corpus kind {kind!r}")
    return sentences[:n_train], sentences[n_train:n_train + n_test], sentences[n_train + n_test:]
