"""Rule-based emotional tone scoring.

Lexicon-driven valence scoring with the usual contextual rules: booster
words, ALL-CAPS emphasis, punctuation emphasis, negation, "but" clause
reweighting, idiom handling and an emoji-to-description table.  The
compound score in [-1, 1] is the emotional tone (EmT) used throughout the
pipeline.
"""

from __future__ import annotations

import hashlib
import html
import json
import math
import string
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Protocol

B_INCR = 0.293
B_DECR = -0.293
C_INCR = 0.733
N_SCALAR = -0.74
ALPHA = 15.0  # normalization denominator constant

NEGATE = {
    "aint", "arent", "cannot", "cant", "couldnt", "darent", "didnt", "doesnt",
    "ain't", "aren't", "can't", "couldn't", "daren't", "didn't", "doesn't",
    "dont", "hadnt", "hasnt", "havent", "isnt", "mightnt", "mustnt", "neither",
    "don't", "hadn't", "hasn't", "haven't", "isn't", "mightn't", "mustn't",
    "neednt", "needn't", "never", "none", "nope", "nor", "not", "nothing",
    "nowhere", "oughtnt", "shant", "shouldnt", "uhuh", "wasnt", "werent",
    "oughtn't", "shan't", "shouldn't", "uh-uh", "wasn't", "weren't", "without",
    "wont", "wouldnt", "won't", "wouldn't", "rarely", "seldom", "despite",
}

BOOSTER_DICT = {
    "absolutely": B_INCR, "amazingly": B_INCR, "awfully": B_INCR,
    "completely": B_INCR, "considerable": B_INCR, "considerably": B_INCR,
    "decidedly": B_INCR, "deeply": B_INCR, "effing": B_INCR,
    "enormous": B_INCR, "enormously": B_INCR, "entirely": B_INCR,
    "especially": B_INCR, "exceptional": B_INCR, "exceptionally": B_INCR,
    "extreme": B_INCR, "extremely": B_INCR, "fabulously": B_INCR,
    "flipping": B_INCR, "flippin": B_INCR, "frackin": B_INCR,
    "fracking": B_INCR, "fricking": B_INCR, "frickin": B_INCR,
    "frigging": B_INCR, "friggin": B_INCR, "fully": B_INCR,
    "fuckin": B_INCR, "fucking": B_INCR, "fuggin": B_INCR,
    "fugging": B_INCR, "greatly": B_INCR, "hella": B_INCR, "highly": B_INCR,
    "hugely": B_INCR, "incredible": B_INCR, "incredibly": B_INCR,
    "intensely": B_INCR, "major": B_INCR, "majorly": B_INCR, "more": B_INCR,
    "most": B_INCR, "particularly": B_INCR, "purely": B_INCR, "quite": B_INCR,
    "really": B_INCR, "remarkably": B_INCR, "so": B_INCR,
    "substantially": B_INCR, "thoroughly": B_INCR, "total": B_INCR,
    "totally": B_INCR, "tremendous": B_INCR, "tremendously": B_INCR,
    "uber": B_INCR, "unbelievably": B_INCR, "unusually": B_INCR,
    "utter": B_INCR, "utterly": B_INCR, "very": B_INCR,
    "almost": B_DECR, "barely": B_DECR, "hardly": B_DECR,
    "just enough": B_DECR, "kind of": B_DECR, "kinda": B_DECR,
    "kindof": B_DECR, "kind-of": B_DECR, "less": B_DECR, "little": B_DECR,
    "marginal": B_DECR, "marginally": B_DECR, "occasional": B_DECR,
    "occasionally": B_DECR, "partly": B_DECR, "scarce": B_DECR,
    "scarcely": B_DECR, "slight": B_DECR, "slightly": B_DECR,
    "somewhat": B_DECR, "sort of": B_DECR, "sorta": B_DECR,
    "sortof": B_DECR, "sort-of": B_DECR,
}

SPECIAL_CASES = {
    "the shit": 3.0, "the bomb": 3.0, "bad ass": 1.5, "badass": 1.5,
    "bus stop": 0.0, "yeah right": -2.0, "kiss of death": -1.5,
    "to die for": 3.0, "beating heart": 3.1, "broken heart": -2.9,
}


@dataclass(frozen=True)
class ToneScore:
    pos: float
    neg: float
    neu: float
    compound: float


class ToneScorer(Protocol):
    def score_text(self, text: str) -> ToneScore: ...


def normalize_valence(raw_sum: float, alpha: float = ALPHA) -> float:
    """Map an unbounded valence sum onto (-1, 1)."""
    norm = raw_sum / math.sqrt(raw_sum * raw_sum + alpha)
    return max(-1.0, min(1.0, norm))


def negated(words: list[str]) -> bool:
    for word in words:
        if word in NEGATE or "n't" in word:
            return True
    return False


def scalar_inc_dec(word: str, valence: float, is_cap_diff: bool) -> float:
    scalar = 0.0
    word_lower = word.lower()
    if word_lower in BOOSTER_DICT:
        scalar = BOOSTER_DICT[word_lower]
        if valence < 0:
            scalar *= -1
        if word.isupper() and is_cap_diff:
            scalar += C_INCR if valence > 0 else -C_INCR
    return scalar


def _strip_punc_if_word(token: str) -> str:
    stripped = token.strip(string.punctuation)
    if len(stripped) <= 2:
        return token  # keeps emoticons like ":)" intact
    return stripped


def _words_and_emoticons(text: str) -> list[str]:
    return [_strip_punc_if_word(tok) for tok in text.split()]


def _allcap_differential(words: list[str]) -> bool:
    upper = sum(1 for w in words if w.isupper())
    return 0 < upper < len(words)


def load_lexicon(path: str | Path) -> dict[str, float]:
    lexicon: dict[str, float] = {}
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.rstrip("\n")
            if not line.strip():
                continue
            token, valence = line.split("\t")[0:2]
            lexicon[token] = float(valence)
    return lexicon


def load_emoji_table(path: str | Path) -> dict[str, str]:
    table: dict[str, str] = {}
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.rstrip("\n")
            if not line.strip():
                continue
            emoji, description = line.split("\t")[0:2]
            table[emoji] = description
    return table


def _packaged(name: str) -> Path:
    return Path(resources.files("toneshift").joinpath("data", name))


class RuleBasedToneScorer:
    """Deterministic lexicon + rules scorer; stateless after construction."""

    def __init__(
        self,
        lexicon_path: str | Path | None = None,
        emoji_path: str | Path | None = None,
    ):
        self.lexicon_path = Path(lexicon_path or _packaged("tone_lexicon.txt"))
        self.emoji_path = Path(emoji_path or _packaged("emoji_lexicon.txt"))
        self.lexicon = load_lexicon(self.lexicon_path)
        self.emojis = load_emoji_table(self.emoji_path)

    @property
    def lexicon_checksum(self) -> str:
        return hashlib.sha256(self.lexicon_path.read_bytes()).hexdigest()

    # -- main entry -------------------------------------------------------

    def score_text(self, text: str) -> ToneScore:
        if not isinstance(text, str):
            text = str(text)
        text = html.unescape(text)
        text = self._replace_emojis(text)
        if not text.strip():
            return ToneScore(pos=0.0, neg=0.0, neu=1.0, compound=0.0)

        words = _words_and_emoticons(text)
        is_cap_diff = _allcap_differential(words)

        sentiments: list[float] = []
        for i, item in enumerate(words):
            item_lower = item.lower()
            if item_lower in BOOSTER_DICT:
                sentiments.append(0.0)
                continue
            if (
                i < len(words) - 1
                and item_lower == "kind"
                and words[i + 1].lower() == "of"
            ):
                sentiments.append(0.0)
                continue
            sentiments.append(self._word_valence(i, item, words, is_cap_diff))

        sentiments = self._but_check(words, sentiments)
        return self._score_valence(sentiments, text)

    # -- helpers ----------------------------------------------------------

    def _replace_emojis(self, text: str) -> str:
        if not any(ch in self.emojis for ch in text):
            return text
        out = []
        prev_space = True
        for ch in text:
            if ch in self.emojis:
                if not prev_space:
                    out.append(" ")
                out.append(self.emojis[ch])
                prev_space = False
            else:
                out.append(ch)
                prev_space = ch == " "
        return "".join(out).strip()

    def _word_valence(
        self, i: int, item: str, words: list[str], is_cap_diff: bool
    ) -> float:
        item_lower = item.lower()
        if item_lower not in self.lexicon:
            return 0.0
        valence = self.lexicon[item_lower]

        # "no" before a lexicon word acts as a negation, not a token
        if (
            item_lower == "no"
            and i != len(words) - 1
            and words[i + 1].lower() in self.lexicon
        ):
            valence = 0.0
        if (
            (i > 0 and words[i - 1].lower() == "no")
            or (i > 1 and words[i - 2].lower() == "no")
            or (
                i > 2
                and words[i - 3].lower() == "no"
                and words[i - 1].lower() in ("or", "nor")
            )
        ):
            valence = self.lexicon[item_lower] * N_SCALAR

        if item.isupper() and is_cap_diff:
            valence += C_INCR if valence > 0 else -C_INCR

        for start_i in range(3):
            if i <= start_i:
                continue
            prior = words[i - (start_i + 1)]
            if prior.lower() in self.lexicon:
                continue
            s = scalar_inc_dec(prior, valence, is_cap_diff)
            if s != 0:
                if start_i == 1:
                    s *= 0.95
                elif start_i == 2:
                    s *= 0.9
            valence += s
            valence = self._negation_check(valence, words, start_i, i)
            if start_i == 2:
                valence = self._special_idioms_check(valence, words, i)
        return self._least_check(valence, words, i)

    def _negation_check(
        self, valence: float, words: list[str], start_i: int, i: int
    ) -> float:
        wl = [w.lower() for w in words]
        if start_i == 0:
            if negated([wl[i - 1]]):
                valence *= N_SCALAR
        if start_i == 1:
            if wl[i - 2] == "never" and wl[i - 1] in ("so", "this"):
                valence *= 1.25
            elif wl[i - 2] == "without" and wl[i - 1] == "doubt":
                pass
            elif negated([wl[i - 2]]):
                valence *= N_SCALAR
        if start_i == 2:
            if wl[i - 3] == "never" and (
                wl[i - 2] in ("so", "this") or wl[i - 1] in ("so", "this")
            ):
                valence *= 1.25
            elif wl[i - 3] == "without" and "doubt" in (wl[i - 2], wl[i - 1]):
                pass
            elif negated([wl[i - 3]]):
                valence *= N_SCALAR
        return valence

    def _special_idioms_check(
        self, valence: float, words: list[str], i: int
    ) -> float:
        wl = [w.lower() for w in words]
        sequences = [
            f"{wl[i - 1]} {wl[i]}",
            f"{wl[i - 2]} {wl[i - 1]} {wl[i]}",
            f"{wl[i - 2]} {wl[i - 1]}",
            f"{wl[i - 3]} {wl[i - 2]} {wl[i - 1]}",
            f"{wl[i - 3]} {wl[i - 2]}",
        ]
        for seq in sequences:
            if seq in SPECIAL_CASES:
                valence = SPECIAL_CASES[seq]
                break
        if len(wl) - 1 > i:
            seq = f"{wl[i]} {wl[i + 1]}"
            if seq in SPECIAL_CASES:
                valence = SPECIAL_CASES[seq]
        if len(wl) - 1 > i + 1:
            seq = f"{wl[i]} {wl[i + 1]} {wl[i + 2]}"
            if seq in SPECIAL_CASES:
                valence = SPECIAL_CASES[seq]
        for n_gram in (sequences[3], sequences[4], sequences[2]):
            if n_gram in BOOSTER_DICT:
                valence += BOOSTER_DICT[n_gram]
        return valence

    def _least_check(self, valence: float, words: list[str], i: int) -> float:
        wl = [w.lower() for w in words]
        if i > 1 and wl[i - 1] not in self.lexicon and wl[i - 1] == "least":
            if wl[i - 2] != "at" and wl[i - 2] != "very":
                valence *= N_SCALAR
        elif i > 0 and wl[i - 1] not in self.lexicon and wl[i - 1] == "least":
            valence *= N_SCALAR
        return valence

    @staticmethod
    def _but_check(words: list[str], sentiments: list[float]) -> list[float]:
        wl = [w.lower() for w in words]
        if "but" in wl:
            bi = wl.index("but")
            sentiments = [
                s * 0.5 if si < bi else (s * 1.5 if si > bi else s)
                for si, s in enumerate(sentiments)
            ]
        return sentiments

    @staticmethod
    def _punctuation_emphasis(text: str) -> float:
        ep_count = min(text.count("!"), 4)
        ep = ep_count * 0.292
        qm_count = text.count("?")
        qm = 0.0
        if qm_count > 1:
            qm = qm_count * 0.18 if qm_count <= 3 else 0.96
        return ep + qm

    def _score_valence(self, sentiments: list[float], text: str) -> ToneScore:
        if not sentiments:
            return ToneScore(pos=0.0, neg=0.0, neu=1.0, compound=0.0)
        sum_s = math.fsum(sentiments)
        punct = self._punctuation_emphasis(text)
        if sum_s > 0:
            sum_s += punct
        elif sum_s < 0:
            sum_s -= punct
        compound = normalize_valence(sum_s)

        pos_sum = math.fsum(v + 1 for v in sentiments if v > 0)
        neg_sum = math.fsum(v - 1 for v in sentiments if v < 0)
        neu_count = float(sum(1 for v in sentiments if v == 0))
        if pos_sum > abs(neg_sum):
            pos_sum += punct
        elif pos_sum < abs(neg_sum):
            neg_sum -= punct
        total = pos_sum + abs(neg_sum) + neu_count
        return ToneScore(
            pos=round(abs(pos_sum / total), 3),
            neg=round(abs(neg_sum / total), 3),
            neu=round(abs(neu_count / total), 3),
            compound=round(compound, 4),
        )


def fingerprint(scorer: RuleBasedToneScorer) -> dict:
    """Identity block for manifests and the health endpoint."""
    return {
        "scorer": "rule_based",
        "lexicon_checksum": scorer.lexicon_checksum,
        "alpha": ALPHA,
    }
