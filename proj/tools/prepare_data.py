#!/usr/bin/env python3
"""Build the evaluation inputs used by the acceptance suite from a WordNet dict directory.

Outputs (written next to each other in --out):
  mammal_closure.tsv   transitive hypernym closure below mammal.n.01, "ancestor<TAB>descendant"
  wordnet_glosses.txt  every gloss and example sentence, one per line

The WordNet directory is the "dict" folder of a WordNet 3.x database
(data.noun, index.noun, ...). It is looked up from --wordnet, then
$WORDNET_DICT, then a few common install locations.
"""

import argparse
import os
import sys
from collections import defaultdict

CANDIDATES = [
    "/usr/share/wordnet",
    "/usr/local/share/wordnet",
    "/usr/share/wordnet/dict",
    os.path.expanduser("~/nltk_data/corpora/wordnet"),
    "/root/data/package/dict",
]

POS_FILES = {"n": "noun", "v": "verb", "a": "adj", "r": "adv"}


def find_dict(explicit):
    for path in [explicit, os.environ.get("WORDNET_DICT")] + CANDIDATES:
        if path and os.path.isfile(os.path.join(path, "data.noun")):
            return path
    return None


def data_lines(path):
    with open(path, encoding="latin-1") as f:
        for line in f:
            if not line.startswith("  "):
                yield line.rstrip("\n")


def parse_noun_synsets(dict_dir):
    """offset -> (first lemma, [hypernym offsets]), hypernyms excluding instance links."""
    synsets = {}
    for line in data_lines(os.path.join(dict_dir, "data.noun")):
        head = line.split("|", 1)[0].split()
        offset = head[0]
        w_cnt = int(head[3], 16)
        lemma = head[4].lower()
        pos = 4 + 2 * w_cnt
        p_cnt = int(head[pos])
        hypernyms = []
        for k in range(p_cnt):
            symbol, target, target_pos = head[pos + 1 + 4 * k : pos + 4 + 4 * k]
            if symbol == "@" and target_pos == "n":
                hypernyms.append(target)
        synsets[offset] = (lemma, hypernyms)
    return synsets


def sense_numbers(dict_dir):
    """(lemma, offset) -> 1-based sense number from index.noun."""
    senses = {}
    for line in data_lines(os.path.join(dict_dir, "index.noun")):
        parts = line.split()
        lemma = parts[0]
        synset_cnt = int(parts[2])
        offsets = parts[-synset_cnt:]
        for i, off in enumerate(offsets):
            senses[(lemma, off)] = i + 1
    return senses


def mammal_closure(dict_dir, root_name="mammal.n.01"):
    synsets = parse_noun_synsets(dict_dir)
    senses = sense_numbers(dict_dir)

    def name(off):
        lemma = synsets[off][0]
        return f"{lemma}.n.{senses.get((lemma, off), 1):02d}"

    roots = [off for off in synsets if name(off) == root_name]
    if len(roots) != 1:
        raise SystemExit(f"cannot locate {root_name} in {dict_dir}")
    root = roots[0]

    children = defaultdict(list)
    for off, (_, hypers) in synsets.items():
        for h in hypers:
            children[h].append(off)

    below = set()
    stack = [root]
    while stack:
        cur = stack.pop()
        for c in children[cur]:
            if c not in below:
                below.add(c)
                stack.append(c)

    memo = {}

    def ancestors(off):
        # ancestors of off that lie inside the subtree, root included
        if off in memo:
            return memo[off]
        out = set()
        for h in synsets[off][1]:
            if h == root or h in below:
                out.add(h)
                out |= ancestors(h)
        memo[off] = out
        return out

    edges = set()
    for off in below:
        for a in ancestors(off):
            edges.add((name(a), name(off)))
    return sorted(edges)


def glosses(dict_dir):
    for pos in ("noun", "verb", "adj", "adv"):
        for line in data_lines(os.path.join(dict_dir, "data." + pos)):
            if "|" not in line:
                continue
            text = line.split("|", 1)[1].strip()
            for part in text.split(";"):
                part = part.strip().strip('"').strip()
                if part:
                    yield part


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--wordnet", help="WordNet dict directory")
    ap.add_argument("--out", default=os.path.join(os.path.dirname(os.path.abspath(__file__)), "..", "data"))
    ap.add_argument("--force", action="store_true", help="rebuild outputs that already exist")
    args = ap.parse_args()

    dict_dir = find_dict(args.wordnet)
    if dict_dir is None:
        print("WordNet dict directory not found; pass --wordnet or set WORDNET_DICT", file=sys.stderr)
        return 2
    os.makedirs(args.out, exist_ok=True)

    closure_path = os.path.join(args.out, "mammal_closure.tsv")
    if args.force or not os.path.exists(closure_path):
        edges = mammal_closure(dict_dir)
        tmp = closure_path + ".tmp"
        with open(tmp, "w", encoding="utf-8") as f:
            for a, b in edges:
                f.write(f"{a}\t{b}\n")
        os.replace(tmp, closure_path)
        nodes = {x for e in edges for x in e}
        print(f"{closure_path}: {len(edges)} edges, {len(nodes)} nodes", file=sys.stderr)

    gloss_path = os.path.join(args.out, "wordnet_glosses.txt")
    if args.force or not os.path.exists(gloss_path):
        tmp = gloss_path + ".tmp"
        count = 0
        with open(tmp, "w", encoding="utf-8") as f:
            for g in glosses(dict_dir):
                f.write(g + "\n")
                count += 1
        os.replace(tmp, gloss_path)
        print(f"{gloss_path}: {count} lines", file=sys.stderr)
    return 0


if __name__ == "__main__":
    sys.exit(main())
