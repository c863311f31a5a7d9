"""Train the bundled byte-level BPE vocab and merges files.

Run from the repository root after an editable install:

    python3 scripts/build_bpe_vocab.py

The training corpus is the bundled Java test fixtures plus a fixed seed
text of common code vocabulary, so the output is reproducible from the
repository alone. Writes src/repoprompt/data/bpe/{vocab.json,merges.txt}.
"""

from __future__ import annotations

import json
from collections import Counter
from pathlib import Path

from repoprompt.tokenizers import _BPE_SPLIT_RE, byte_unicode_table

MERGE_COUNT = 744

SEED_TEXT = """
public private protected static final void int long boolean String char
double float byte short class interface extends implements import package
return new this super if else for while do switch case break continue try
catch finally throw throws null true false abstract synchronized volatile
transient native strictfp enum assert instanceof default goto const
System out println print err Override Deprecated SuppressWarnings
List ArrayList Map HashMap Set HashSet Collection Iterator Optional
Stream Collectors Arrays Objects Math Integer Long Double Boolean
Character StringBuilder StringBuffer Exception RuntimeException
IllegalArgumentException IllegalStateException NullPointerException
IndexOutOfBoundsException UnsupportedOperationException IOException
Thread Runnable Callable Future Executor ExecutorService
get set add remove contains size isEmpty clear put putAll keySet values
entrySet stream filter map reduce collect forEach toArray toString equals
hashCode compareTo clone length charAt substring indexOf lastIndexOf
startsWith endsWith trim split replace concat valueOf parseInt parseLong
format append insert delete reverse builder build create init start stop
run execute submit shutdown close open read write flush next hasNext
value name key index count total result item entry node parent child
left right head tail first last prev current temp buffer data input
output source target config options params args context handler listener
callback factory manager service util helper impl test main
the a an of to in for with and or not is are was be has have this that
0 1 2 3 4 5 6 7 8 9 10 100 1000 0.0 1.0 0.5 == != <= >= && || ++ -- += -=
( ) { } [ ] ; , . : :: -> => @ < > = + - * / % ! ? & | ^ ~ " ' ` # \\
"""


def train(words: Counter, merge_count: int) -> list[tuple[str, str]]:
    """Greedy pair-merge training over chunk frequencies."""
    split_words = {w: list(w) for w in words}
    merges: list[tuple[str, str]] = []
    for _ in range(merge_count):
        pair_freq: Counter = Counter()
        for word, parts in split_words.items():
            freq = words[word]
            for i in range(len(parts) - 1):
                pair_freq[(parts[i], parts[i + 1])] += freq
        if not pair_freq:
            break
        best_freq = max(pair_freq.values())
        if best_freq < 2:
            break
        best = min(p for p, f in pair_freq.items() if f == best_freq)
        merges.append(best)
        for word, parts in split_words.items():
            merged: list[str] = []
            i = 0
            while i < len(parts):
                if (
                    i < len(parts) - 1
                    and parts[i] == best[0]
                    and parts[i + 1] == best[1]
                ):
                    merged.append(parts[i] + parts[i + 1])
                    i += 2
                else:
                    merged.append(parts[i])
                    i += 1
            split_words[word] = merged
    return merges


def main() -> None:
    root = Path(__file__).resolve().parent.parent
    corpus = [SEED_TEXT]
    for path in sorted((root / "tests" / "data" / "minirepo").rglob("*.java")):
        corpus.append(path.read_text("utf-8"))

    table = byte_unicode_table()
    words: Counter = Counter()
    for text in corpus:
        for chunk in _BPE_SPLIT_RE.findall(text):
            mapped = "".join(table[b] for b in chunk.encode("utf-8"))
            words[mapped] += 1

    merges = train(words, MERGE_COUNT)

    vocab: dict[str, int] = {}
    for b in range(256):
        vocab[table[b]] = len(vocab)
    for left, right in merges:
        vocab[left + right] = len(vocab)

    out = root / "src" / "repoprompt" / "data" / "bpe"
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "vocab.json", "w", encoding="utf-8") as fh:
        json.dump(vocab, fh, ensure_ascii=False, separators=(",", ":"))
    with open(out / "merges.txt", "w", encoding="utf-8") as fh:
        fh.write("#version: 0.2\n")
        for left, right in merges:
            fh.write(f"{left} {right}\n")
    print(f"vocab size {len(vocab)}, merges {len(merges)}")


if __name__ == "__main__":
    main()
