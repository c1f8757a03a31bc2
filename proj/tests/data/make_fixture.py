"""Regenerates the small review/metadata fixture under fixture/.

Output is deterministic; rerunning it must leave the files unchanged.
"""

import gzip
import json
import random
from pathlib import Path

HERE = Path(__file__).resolve().parent / "fixture"

DOMAINS = {
    "Kitchen": {
        "items": ["kettle", "toaster", "blender", "skillet", "knife", "grater", "teapot", "mixer"],
        "traits": ["sturdy", "shiny", "heavy", "compact", "quiet", "sharp", "sleek", "cheap"],
        "uses": ["boiling water", "making toast", "crushing ice", "frying eggs", "slicing bread",
                 "brewing tea", "baking cakes", "chopping onions"],
    },
    "Garden": {
        "items": ["hose", "rake", "shovel", "sprinkler", "trowel", "planter", "mower", "shears"],
        "traits": ["sturdy", "green", "heavy", "compact", "durable", "sharp", "flimsy", "cheap"],
        "uses": ["watering roses", "raking leaves", "digging holes", "cutting grass", "trimming hedges",
                 "planting bulbs", "moving soil", "pruning trees"],
    },
    "Games": {
        "items": ["puzzle", "chess set", "card deck", "board game", "dice", "domino set", "kite", "yo-yo"],
        "traits": ["colorful", "fun", "challenging", "compact", "durable", "cheap", "noisy", "classic"],
        "uses": ["family nights", "long trips", "rainy days", "birthday parties", "teaching kids",
                 "game clubs", "camping", "holidays"],
    },
}

REVIEW_TEMPLATES = [
    "I bought this {item} for {use}. It is {trait} and works well!",
    "The {item} arrived quickly. Very {trait}, though the box was damaged.",
    "Great {item}. My wife uses it for {use} every week.",
    "Not what I expected. The {item} feels {trait} and a bit odd.",
    "Dr. Smith recommended this {item} for {use}. Five stars from me.",
    "Works fine for {use}? Yes, but the {item} is too {trait} for my taste.",
    "Honestly the best {item} I have owned. So {trait}!",
    "Returned it. The {item} broke after two weeks of {use}.",
]

DESCRIPTION_TEMPLATES = [
    "{Trait} {item} designed for {use}",
    "Premium {trait} {item} with a two year warranty",
    "Ideal for {use}; the {item} is {trait} and easy to clean",
]


def review_lines(name, spec, rng):
    lines = []
    for i in range(200):
        item, trait, use = rng.choice(spec["items"]), rng.choice(spec["traits"]), rng.choice(spec["uses"])
        text = " ".join(rng.choice(REVIEW_TEMPLATES).format(item=item, trait=trait, use=use)
                        for _ in range(rng.randint(1, 3)))
        rec = {"overall": float(rng.choice([1, 2, 3, 4, 4, 5, 5, 5])), "verified": rng.random() < 0.8,
               "reviewText": text, "asin": f"{name[:3].upper()}{i:05d}"}
        if i == 17:
            del rec["reviewText"]
        if i == 42:
            rec["overall"] = 7.0
        lines.append(json.dumps(rec))
    lines.insert(100, '{"overall": 5.0, "reviewText": "truncated')
    return lines


def meta_lines(name, spec, rng):
    lines = []
    for i in range(40):
        item, trait, use = rng.choice(spec["items"]), rng.choice(spec["traits"]), rng.choice(spec["uses"])
        rec = {"asin": f"{name[:3].upper()}{i:05d}",
               "title": rng.choice(DESCRIPTION_TEMPLATES).format(item=item, trait=trait, Trait=trait.title(),
                                                                 use=use),
               "description": [rng.choice(DESCRIPTION_TEMPLATES).format(item=item, trait=t, Trait=t.title(),
                                                                       use=rng.choice(spec["uses"]))
                               for t in rng.sample(spec["traits"], 2)],
               "feature": [f"Made for {rng.choice(spec['uses'])}", f"{trait.title()} finish"]}
        if i == 5:
            rec = {"asin": rec["asin"]}
        lines.append(json.dumps(rec))
    return lines


def main():
    HERE.mkdir(exist_ok=True)
    rng = random.Random(20240501)
    for name, spec in DOMAINS.items():
        reviews = "\n".join(review_lines(name, spec, rng)) + "\n"
        meta = "\n".join(meta_lines(name, spec, rng)) + "\n"
        if name == "Garden":
            (HERE / f"{name}.reviews.json.gz").write_bytes(gzip.compress(reviews.encode(), mtime=0))
        else:
            (HERE / f"{name}.reviews.json").write_text(reviews)
        (HERE / f"{name}.meta.json").write_text(meta)


if __name__ == "__main__":
    main()
