#!/usr/bin/env python3
"""Regenerate the annotated fixture corpora under fixtures/.

Sentences come from a small probabilistic grammar that also emits the POS
tag and dependency head of every token, so the POS and DEP curricula can be
exercised without an external tagger or parser. Output is deterministic.

    python3 scripts/make_fixtures.py
"""

import json
import os
import random

DETERMINERS = ["the", "a", "every", "some", "this"]
ADJECTIVES = ["small", "old", "green", "quiet", "bright", "heavy", "strange",
              "early", "long", "cold", "rapid", "distant", "famous", "narrow"]
NOUNS = ["river", "city", "king", "ship", "song", "army", "church", "road",
         "storm", "village", "player", "album", "bridge", "station", "forest",
         "general", "season", "team", "island", "tower", "book", "family",
         "garden", "engine", "letter", "mountain", "queen", "school"]
VERBS = ["saw", "built", "crossed", "praised", "followed", "destroyed",
         "described", "reached", "joined", "released", "defended", "opened",
         "visited", "recorded", "named", "replaced"]
INTRANSITIVE = ["arrived", "collapsed", "returned", "sang", "waited", "fell"]
ADVERBS = ["quickly", "later", "finally", "slowly", "again", "often"]
PREPOSITIONS = ["near", "with", "under", "across", "behind", "during", "from"]


def zipf_choice(rng, words):
    weights = [1.0 / (i + 1) for i in range(len(words))]
    return rng.choices(words, weights=weights, k=1)[0]


class Phrase:
    """Tokens with tags and heads local to the phrase; -1 marks the phrase head."""

    def __init__(self):
        self.tokens, self.pos, self.heads = [], [], []
        self.head = None

    def add(self, token, tag, head):
        self.tokens.append(token)
        self.pos.append(tag)
        self.heads.append(head)
        return len(self.tokens) - 1

    def attach(self, other, governor):
        """Append `other`, hanging its head off `governor`; returns other's head index."""
        offset = len(self.tokens)
        for tok, tag, h in zip(other.tokens, other.pos, other.heads):
            self.tokens.append(tok)
            self.pos.append(tag)
            self.heads.append(governor if h == -1 else h + offset)
        return other.head + offset


def noun_phrase(rng, depth):
    p = Phrase()
    det = p.add(zipf_choice(rng, DETERMINERS), "DT", None)
    adjs = [p.add(zipf_choice(rng, ADJECTIVES), "JJ", None)
            for _ in range(rng.choice([0, 0, 0, 1, 1, 2]))]
    noun = p.add(zipf_choice(rng, NOUNS), "NN", -1)
    p.head = noun
    p.heads[det] = noun
    for a in adjs:
        p.heads[a] = noun
    if depth < 3 and rng.random() < 0.25:
        p.attach(prep_phrase(rng, depth + 1), noun)
    if depth < 2 and rng.random() < 0.12:
        rel = Phrase()
        that = rel.add("that", "WDT", None)
        vp = verb_phrase(rng, depth + 1)
        verb = rel.attach(vp, -1)
        rel.heads[that] = verb
        rel.head = verb
        p.attach(rel, noun)
    return p


def prep_phrase(rng, depth):
    p = Phrase()
    prep = p.add(zipf_choice(rng, PREPOSITIONS), "IN", -1)
    p.head = prep
    p.attach(noun_phrase(rng, depth), prep)
    return p


def verb_phrase(rng, depth):
    p = Phrase()
    transitive = rng.random() < 0.7
    verb = p.add(zipf_choice(rng, VERBS if transitive else INTRANSITIVE),
                 "VB", -1)
    p.head = verb
    if rng.random() < 0.2:
        p.add(zipf_choice(rng, ADVERBS), "RB", verb)
    if transitive:
        p.attach(noun_phrase(rng, depth), verb)
    if depth < 3 and rng.random() < 0.3:
        p.attach(prep_phrase(rng, depth + 1), verb)
    return p


def sentence(rng):
    subj = noun_phrase(rng, 0)
    vp = verb_phrase(rng, 0)
    s = Phrase()
    # Root verb goes first in attachment order; rebuild in surface order.
    subj_len = len(subj.tokens)
    for tok, tag, h in zip(subj.tokens, subj.pos, subj.heads):
        s.tokens.append(tok)
        s.pos.append(tag)
        s.heads.append(h)
    verb = s.attach(vp, -1)
    for i in range(subj_len):
        if s.heads[i] == -1:
            s.heads[i] = verb
    if rng.random() < 0.15:
        s.add("and", "CC", verb)
        s.attach(verb_phrase(rng, 1), verb)
    s.add(rng.choices([".", "!", "?"], weights=[20, 1, 1])[0], "PUNCT", verb)
    return s


def write_split(rng, n, stem, out_dir):
    with open(os.path.join(out_dir, stem + ".txt"), "w") as text, \
            open(os.path.join(out_dir, stem + ".ann.jsonl"), "w") as ann:
        for i in range(n):
            s = sentence(rng)
            assert s.heads.count(-1) == 1
            text.write(" ".join(s.tokens) + "\n")
            ann.write(json.dumps({"id": i, "pos": s.pos, "heads": s.heads},
                                 separators=(",", ":")) + "\n")


def main():
    out_dir = os.path.join(os.path.dirname(__file__), "..", "fixtures")
    os.makedirs(out_dir, exist_ok=True)
    rng = random.Random(20210512)
    write_split(rng, 1000, "train", out_dir)
    write_split(rng, 100, "valid", out_dir)


if __name__ == "__main__":
    main()
