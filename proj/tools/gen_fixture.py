#!/usr/bin/env python3
"""Regenerates the bundled synthetic fixture (data/fixture). Deterministic."""

import csv
import datetime as dt
import json
import math
import random
import sys
from pathlib import Path

SEED = 20200301

THEMES = {
    "fear": ["scared", "virus", "infected", "mask", "maskless", "grocery", "panic", "cough", "wash", "hands",
             "exposed", "coworker", "temperature", "precautions", "symptoms", "hospital", "sick", "unmasked",
             "sanitizer", "store"],
    "school": ["college", "online", "learning", "class", "semester", "freshman", "exams", "zoom", "professor",
               "grades", "campus", "homework", "lectures", "study", "university"],
    "work": ["job", "lost", "unemployed", "laid", "income", "money", "rent", "bills", "career", "quit", "boss",
             "hours", "savings", "paycheck", "hiring"],
    "family": ["parents", "mom", "dad", "family", "house", "siblings", "arguing", "grandma", "kids", "home",
               "relatives", "visit", "brother", "sister", "husband"],
    "lonely": ["lonely", "alone", "friends", "isolated", "connection", "loneliness", "social", "interaction",
               "friendship", "disconnected", "socialize", "talk", "miss", "people", "friendless"],
    "symptoms": ["anxiety", "depression", "panic", "attacks", "sleep", "therapy", "therapist", "insomnia",
                 "medication", "breathing", "heart", "racing", "ocd", "intrusive", "thoughts"],
    "uncertainty": ["forever", "normal", "end", "permanent", "hope", "future", "endless", "lockdown",
                    "restrictions", "months", "waiting", "vaccine", "lose", "never", "ending"],
}

PHRASES = {
    "fear": ["people with no mask at the grocery", "without mask in the store", "wash my hands constantly"],
    "school": ["online learning is exhausting", "my class moved to zoom"],
    "work": ["I lost my job", "got laid off last week", "had to quit my job"],
    "family": ["stuck at home with family"],
    "lonely": ["I feel alone all the time", "I want to make friends", "my social life is gone"],
    "symptoms": ["panic attacks every night"],
    "uncertainty": ["will it ever end", "will we get back to normal", "this is the new normal", "I lose hope"],
}

FILLER = ["i", "feel", "really", "just", "today", "week", "anyone", "else", "know", "think", "like", "going",
          "been", "lot", "time", "day", "the", "and", "it", "is"]

FLAIRS = [
    ("Support", 26), ("Trigger Warning", 3), ("Questions", 11), ("Discussion", 6), ("Vaccines are SAFE", 1),
    ("Good News", 2), ("Resources", 1), ("News", 1), ("Firsthand Account", 1), ("Biosafety Request", 1),
    ("The answer is NO", 1), ("Misinformation-debunked", 1),
]

THEME_FLAIR = {
    "fear": "Support", "school": "Support", "work": "Support", "family": "Support", "lonely": "Support",
    "symptoms": "Trigger Warning", "uncertainty": "Questions",
}


def month_iter(start, end):
    y, m = start
    while (y, m) <= end:
        yield y, m
        y, m = (y + 1, 1) if m == 12 else (y, m + 1)


def theme_weights(idx):
    w = {
        "fear": 1.2 + math.cos(idx / 3.0),
        "school": 0.8 + 0.6 * math.sin(idx / 2.0),
        "work": 0.9 + 0.4 * math.cos(idx / 4.0),
        "family": 0.7,
        "lonely": 0.6 + 0.5 * math.sin(idx / 5.0 + 1.0),
        "symptoms": 0.9,
        "uncertainty": 0.5 + idx / 12.0,
    }
    return list(w), [max(0.05, v) for v in w.values()]


def make_text(rng, theme):
    words = []
    for _ in range(rng.randint(14, 34)):
        r = rng.random()
        if r < 0.55:
            words.append(rng.choice(THEMES[theme]))
        elif r < 0.7:
            words.append(rng.choice(THEMES[rng.choice(list(THEMES))]))
        else:
            words.append(rng.choice(FILLER))
    if rng.random() < 0.45:
        pos = rng.randrange(len(words) + 1)
        words[pos:pos] = rng.choice(PHRASES[theme]).split()
    title_len = rng.randint(3, 7)
    return " ".join(words[:title_len]).capitalize(), " ".join(words[title_len:]) + "."


def main(out_dir):
    rng = random.Random(SEED)
    out_dir.mkdir(parents=True, exist_ok=True)
    lines = []
    n = 0
    months = list(month_iter((2020, 2), (2021, 7)))
    for idx, (y, m) in enumerate(months):
        count = 26 + int(10 * math.sin(idx / 2.5)) + (12 if (y, m) in ((2020, 3), (2020, 4)) else 0)
        names, weights = theme_weights(idx)
        for _ in range(count):
            theme = rng.choices(names, weights)[0]
            title, body = make_text(rng, theme)
            if rng.random() < 0.06:
                body += " more at https://example.org/covid/" + str(rng.randrange(1000)) + " and www.cdc.gov"
            day = rng.randint(1, 28)
            ts = int(dt.datetime(y, m, day, tzinfo=dt.timezone.utc).timestamp()) + rng.randrange(86400)
            rec = {"id": f"t3_{n:05x}", "created_utc": ts, "title": title}
            r = rng.random()
            if r < 0.02:
                rec["selftext"] = "[removed]"
            elif r < 0.03:
                rec["selftext"] = "[deleted]"
            else:
                rec["selftext"] = body
            if rng.random() < 0.5:
                if rng.random() < 0.6:
                    rec["link_flair_text"] = THEME_FLAIR[theme]
                else:
                    rec["link_flair_text"] = rng.choices([f for f, _ in FLAIRS], [w for _, w in FLAIRS])[0]
            rec["permalink"] = f"/r/COVID19_support/comments/{n:05x}/"
            lines.append(json.dumps(rec, ensure_ascii=False))
            n += 1
    # One duplicate id and one truncated record exercise the loader's error paths.
    lines.insert(40, lines[10])
    lines.insert(77, '{"id": "t3_broken", "created_utc": 15')
    (out_dir / "corpus.jsonl").write_text("\n".join(lines) + "\n", encoding="utf-8")

    with open(out_dir / "owid_sample.csv", "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(["iso_code", "continent", "location", "date", "total_cases", "new_cases", "total_deaths",
                    "people_vaccinated"])
        for iso, loc, scale in (("USA", "United States", 1.0), ("GBR", "United Kingdom", 0.2),
                                ("CAN", "Canada", 0.12), ("FRA", "France", 0.2)):
            total = 0
            vacc = 0
            day = dt.date(2020, 1, 22)
            while day <= dt.date(2021, 7, 31):
                t = (day - dt.date(2020, 1, 22)).days
                wave = math.exp(-((t - 330) / 60.0) ** 2) + 0.4 * math.exp(-((t - 180) / 40.0) ** 2)
                new = int(scale * 200000 * wave + scale * 500)
                total += new
                if day >= dt.date(2020, 12, 14):
                    vacc += int(scale * 900000)
                # Sparse sampling keeps the file small: every fifth day.
                if t % 5 == 0:
                    w.writerow([iso, "", loc, day.isoformat(), total, new * 5, "",
                                vacc if vacc else ""])
                day += dt.timedelta(days=1)


if __name__ == "__main__":
    main(Path(sys.argv[1]) if len(sys.argv) > 1 else Path(__file__).resolve().parent.parent / "data" / "fixture")
