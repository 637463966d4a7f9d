"""Generate data/corpus.txt: a seeded English-like text with Zipfian word use.

Sentences follow a small phrase grammar over pseudo-words built from common
syllables, so a character model has both spelling and word-order structure
to learn. Output is deterministic for a given seed.
"""

import argparse
import random

ONSETS = ["", "b", "c", "d", "f", "g", "h", "l", "m", "n", "p", "r", "s", "t", "w",
          "br", "ch", "cl", "dr", "gr", "pl", "sh", "st", "th", "tr"]
VOWELS = ["a", "e", "i", "o", "u", "ea", "ai", "ou", "oo"]
CODAS = ["", "", "n", "r", "s", "t", "l", "nd", "st", "ng", "ck", "m"]

FUNCTION = {
    "det": ["the", "a", "this", "that", "every", "some", "no"],
    "prep": ["of", "in", "on", "with", "from", "under", "near", "after"],
    "conj": ["and", "but", "so", "while", "because"],
    "pron": ["he", "she", "it", "they", "we", "i", "you"],
    "aux": ["was", "is", "had", "will", "could", "would", "did not"],
}


def make_word(rng, syllables):
    return "".join(rng.choice(ONSETS) + rng.choice(VOWELS) + rng.choice(CODAS)
                   for _ in range(syllables))


def lexicon(rng, size, lo, hi, taken):
    words = []
    while len(words) < size:
        w = make_word(rng, rng.randint(lo, hi))
        if 2 <= len(w) <= 12 and w not in taken:
            taken.add(w)
            words.append(w)
    return words


class Zipf:
    def __init__(self, rng, words, s=1.1):
        self.rng = rng
        self.words = words
        self.weights = [1.0 / (k + 1) ** s for k in range(len(words))]

    def __call__(self):
        return self.rng.choices(self.words, self.weights)[0]


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--seed", type=int, default=7)
    ap.add_argument("--bytes", type=int, default=200_000)
    ap.add_argument("--out", default="data/corpus.txt")
    args = ap.parse_args()

    rng = random.Random(args.seed)
    taken = {w for ws in FUNCTION.values() for w in ws}
    noun = Zipf(rng, lexicon(rng, 900, 1, 3, taken))
    verb = Zipf(rng, [w + "ed" for w in lexicon(rng, 400, 1, 2, taken)])
    adj = Zipf(rng, lexicon(rng, 300, 1, 2, taken))
    pick = {k: Zipf(rng, v, 0.8) for k, v in FUNCTION.items()}

    def noun_phrase():
        words = [pick["det"]()]
        if rng.random() < 0.35:
            words.append(adj())
        words.append(noun())
        if rng.random() < 0.2:
            words += [pick["prep"](), pick["det"](), noun()]
        return words

    def clause():
        subject = [pick["pron"]()] if rng.random() < 0.4 else noun_phrase()
        if rng.random() < 0.3:
            return subject + [pick["aux"](), verb()] + noun_phrase()
        return subject + [verb()] + noun_phrase()

    def sentence():
        words = clause()
        if rng.random() < 0.3:
            words += [","] + [pick["conj"]()] + clause()
        text = " ".join(words).replace(" ,", ",")
        return text[0].upper() + text[1:] + rng.choice([".", ".", ".", "?", "!"])

    paragraphs, size = [], 0
    while size < args.bytes:
        para = " ".join(sentence() for _ in range(rng.randint(3, 8)))
        paragraphs.append(para)
        size += len(para) + 2
    with open(args.out, "w", encoding="ascii") as f:
        f.write("\n\n".join(paragraphs) + "\n")


if __name__ == "__main__":
    main()
