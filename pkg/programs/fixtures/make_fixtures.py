"""Regenerate the stock replay fixtures (deterministic; seed fixed below).

    python3 programs/fixtures/make_fixtures.py

Writes prices_1.replay and prices_2.replay (about 1000 price records split
between two feeds) and tweets.replay (about 200 tweets) next to this file.
"""

import json
import random
from pathlib import Path

SEED = 20161016
STOCKS = ["AAPL", "AMZN", "GOOG", "IBM", "MSFT"]
N_PRICES = 1000
N_TWEETS = 200

TEMPLATES = [
    "{a} is going up today",
    "selling all my {a}",
    "{a} earnings call tonight",
    "{a} vs {b} who wins",
    "why is {a} so volatile",
    "long {a} short {b}",
    "coffee first then markets",
    "thinking about {a} again",
]


def prices(rng):
    level = {s: rng.uniform(50, 500) for s in STOCKS}
    feeds = ([], [])
    for t in range(N_PRICES):
        s = rng.choice(STOCKS)
        level[s] = max(1.0, level[s] * (1 + rng.gauss(0, 0.012)))
        feeds[rng.randrange(2)].append("%d\t(%s,%s)" % (t, json.dumps(s), repr(round(level[s], 2))))
    return feeds


def tweets(rng):
    times = sorted(rng.sample(range(N_PRICES), N_TWEETS))
    lines = []
    for t in times:
        a, b = rng.sample(STOCKS, 2)
        text = rng.choice(TEMPLATES).format(a=a, b=b)
        lines.append("%d\t%s" % (t, json.dumps(text)))
    return lines


def main():
    rng = random.Random(SEED)
    here = Path(__file__).resolve().parent
    f1, f2 = prices(rng)
    for name, lines in (("prices_1.replay", f1), ("prices_2.replay", f2), ("tweets.replay", tweets(rng))):
        (here / name).write_text("\n".join(lines) + "\n", encoding="utf-8")


if __name__ == "__main__":
    main()
