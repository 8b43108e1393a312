"""Independent reference implementation of the tone scoring rules.

Written separately from the package module, in a plain procedural style,
so the two can be compared token for token in tests.  Reads the same
lexicon files; every contextual rule (boosters, caps, negation, "no",
"least", "but", idioms, punctuation) is re-derived here from the rule
definitions rather than shared code.
"""

from __future__ import annotations

import html
import math
import string
from pathlib import Path

DATA = Path(__file__).resolve().parents[1] / "src" / "toneshift" / "data"

B = 0.293
CAPS = 0.733
NEG = -0.74

NEGATIONS = {
    "aint", "arent", "cannot", "cant", "couldnt", "darent", "didnt", "doesnt",
    "ain't", "aren't", "can't", "couldn't", "daren't", "didn't", "doesn't",
    "dont", "hadnt", "hasnt", "havent", "isnt", "mightnt", "mustnt", "neither",
    "don't", "hadn't", "hasn't", "haven't", "isn't", "mightn't", "mustn't",
    "neednt", "needn't", "never", "none", "nope", "nor", "not", "nothing",
    "nowhere", "oughtnt", "shant", "shouldnt", "uhuh", "wasnt", "werent",
    "oughtn't", "shan't", "shouldn't", "uh-uh", "wasn't", "weren't", "without",
    "wont", "wouldnt", "won't", "wouldn't", "rarely", "seldom", "despite",
}

UP = {
    "absolutely", "amazingly", "awfully", "completely", "considerable",
    "considerably", "decidedly", "deeply", "effing", "enormous", "enormously",
    "entirely", "especially", "exceptional", "exceptionally", "extreme",
    "extremely", "fabulously", "flipping", "flippin", "frackin", "fracking",
    "fricking", "frickin", "frigging", "friggin", "fully", "fuckin",
    "fucking", "fuggin", "fugging", "greatly", "hella", "highly", "hugely",
    "incredible", "incredibly", "intensely", "major", "majorly", "more",
    "most", "particularly", "purely", "quite", "really", "remarkably", "so",
    "substantially", "thoroughly", "total", "totally", "tremendous",
    "tremendously", "uber", "unbelievably", "unusually", "utter", "utterly",
    "very",
}
DOWN = {
    "almost", "barely", "hardly", "just enough", "kind of", "kinda", "kindof",
    "kind-of", "less", "little", "marginal", "marginally", "occasional",
    "occasionally", "partly", "scarce", "scarcely", "slight", "slightly",
    "somewhat", "sort of", "sorta", "sortof", "sort-of",
}

IDIOMS = {
    "the shit": 3.0, "the bomb": 3.0, "bad ass": 1.5, "badass": 1.5,
    "bus stop": 0.0, "yeah right": -2.0, "kiss of death": -1.5,
    "to die for": 3.0, "beating heart": 3.1, "broken heart": -2.9,
}


def _load_lexicon() -> dict[str, float]:
    table = {}
    for line in (DATA / "tone_lexicon.txt").read_text().splitlines():
        if line.strip():
            parts = line.split("\t")
            table[parts[0]] = float(parts[1])
    return table


def _load_emojis() -> dict[str, str]:
    table = {}
    for line in (DATA / "emoji_lexicon.txt").read_text().splitlines():
        if line.strip():
            emoji, desc = line.split("\t")[:2]
            table[emoji] = desc
    return table


LEXICON = _load_lexicon()
EMOJIS = _load_emojis()


def _booster_value(word: str) -> float:
    w = word.lower()
    if w in UP:
        return B
    if w in DOWN:
        return -B
    return 0.0


def _tokens(text: str) -> list[str]:
    out = []
    for tok in text.split():
        bare = tok.strip(string.punctuation)
        out.append(tok if len(bare) <= 2 else bare)
    return out


def _swap_emojis(text: str) -> str:
    if not any(c in EMOJIS for c in text):
        return text
    pieces = []
    prev_space = True
    for c in text:
        if c in EMOJIS:
            if not prev_space:
                pieces.append(" ")
            pieces.append(EMOJIS[c])
            prev_space = False
        else:
            pieces.append(c)
            prev_space = c == " "
    return "".join(pieces).strip()


def _is_negation(word: str) -> bool:
    return word in NEGATIONS or "n't" in word


def oracle_compound(text: str) -> float:
    """Reference compound score, rounded to 4 decimals."""
    text = html.unescape(str(text))
    text = _swap_emojis(text)
    if not text.strip():
        return 0.0

    toks = _tokens(text)
    low = [t.lower() for t in toks]
    mixed_caps = 0 < sum(t.isupper() for t in toks) < len(toks)

    valences = []
    for i, tok in enumerate(toks):
        w = low[i]
        if w in UP or w in DOWN:
            valences.append(0.0)
            continue
        if w == "kind" and i + 1 < len(toks) and low[i + 1] == "of":
            valences.append(0.0)
            continue
        if w not in LEXICON:
            valences.append(0.0)
            continue

        v = LEXICON[w]
        if w == "no" and i + 1 < len(toks) and low[i + 1] in LEXICON:
            v = 0.0
        if (
            (i >= 1 and low[i - 1] == "no")
            or (i >= 2 and low[i - 2] == "no")
            or (i >= 3 and low[i - 3] == "no" and low[i - 1] in ("or", "nor"))
        ):
            v = LEXICON[w] * NEG
        if tok.isupper() and mixed_caps:
            v = v + CAPS if v > 0 else v - CAPS

        for back in (1, 2, 3):
            if i - back < 0:
                continue
            prior = toks[i - back]
            if prior.lower() in LEXICON:
                continue
            s = _booster_value(prior)
            if s != 0.0:
                if v < 0:
                    s = -s
                if prior.isupper() and mixed_caps:
                    s = s + CAPS if v > 0 else s - CAPS
                if back == 2:
                    s *= 0.95
                elif back == 3:
                    s *= 0.9
            v += s

            if back == 1 and _is_negation(low[i - 1]):
                v *= NEG
            if back == 2:
                if low[i - 2] == "never" and low[i - 1] in ("so", "this"):
                    v *= 1.25
                elif low[i - 2] == "without" and low[i - 1] == "doubt":
                    pass
                elif _is_negation(low[i - 2]):
                    v *= NEG
            if back == 3:
                if low[i - 3] == "never" and (
                    low[i - 2] in ("so", "this") or low[i - 1] in ("so", "this")
                ):
                    v *= 1.25
                elif low[i - 3] == "without" and "doubt" in (low[i - 2], low[i - 1]):
                    pass
                elif _is_negation(low[i - 3]):
                    v *= NEG
                # idiom window around position i
                windows = [
                    " ".join(low[i - 1 : i + 1]),
                    " ".join(low[i - 2 : i + 1]),
                    " ".join(low[i - 2 : i]),
                    " ".join(low[i - 3 : i]),
                    " ".join(low[i - 3 : i - 1]),
                ]
                for seq in windows:
                    if seq in IDIOMS:
                        v = IDIOMS[seq]
                        break
                if i + 1 < len(toks) and " ".join(low[i : i + 2]) in IDIOMS:
                    v = IDIOMS[" ".join(low[i : i + 2])]
                if i + 2 < len(toks) and " ".join(low[i : i + 3]) in IDIOMS:
                    v = IDIOMS[" ".join(low[i : i + 3])]
                for seq in (windows[3], windows[4], windows[2]):
                    if seq in UP:
                        v += B
                    elif seq in DOWN:
                        v -= B

        # trailing "least" damper ("at least" / "very least" excluded)
        if i >= 1 and low[i - 1] == "least" and low[i - 1] not in LEXICON:
            if not (i >= 2 and low[i - 2] in ("at", "very")):
                v *= NEG
        valences.append(v)

    if "but" in low:
        cut = low.index("but")
        valences = [
            val * 0.5 if j < cut else val * 1.5 if j > cut else val
            for j, val in enumerate(valences)
        ]

    total = math.fsum(valences)
    bangs = min(text.count("!"), 4) * 0.292
    marks = text.count("?")
    questions = 0.0 if marks <= 1 else (marks * 0.18 if marks <= 3 else 0.96)
    emphasis = bangs + questions
    if total > 0:
        total += emphasis
    elif total < 0:
        total -= emphasis
    compound = total / math.sqrt(total * total + 15.0)
    compound = max(-1.0, min(1.0, compound))
    return round(compound, 4)
