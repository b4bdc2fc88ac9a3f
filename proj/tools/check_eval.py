#!/usr/bin/env python3
"""Recomputes eval metrics from the corpus, predictions.txt and mel files and
compares them with metrics.json."""

import argparse
import json
import math
import struct
import sys
from pathlib import Path


class Reader:
    def __init__(self, data, what):
        self.data, self.pos, self.what = data, 0, what

    def take(self, n):
        if self.pos + n > len(self.data):
            raise ValueError(f"{self.what}: truncated")
        out = self.data[self.pos:self.pos + n]
        self.pos += n
        return out

    def u8(self):
        return self.take(1)[0]

    def u32(self):
        return struct.unpack("<I", self.take(4))[0]

    def f64s(self, n):
        return struct.unpack(f"<{n}d", self.take(8 * n))


def read_corpus(path):
    r = Reader(Path(path).read_bytes(), "corpus")
    if r.take(8) != b"PTACOCRP" or r.u8() != 1:
        raise ValueError("corpus: bad magic or version")
    utts = []
    for _ in range(r.u32()):
        speaker = r.u32()
        n = r.u32()
        pairs = [(r.u32(), r.u32()) for _ in range(n)]
        bins, frames = r.u32(), r.u32()
        utts.append({"speaker": speaker, "phonemes": [p for p, _ in pairs],
                     "durations": [d for _, d in pairs], "bins": bins, "frames": frames,
                     "mel": r.f64s(frames * bins)})
    return utts


def read_mel(path):
    r = Reader(Path(path).read_bytes(), "mel")
    if r.take(8) != b"PTACOMEL" or r.u8() != 1:
        raise ValueError("mel: bad magic or version")
    frames, bins = r.u32(), r.u32()
    return frames, bins, r.f64s(frames * bins)


def recompute(corpus, pred_dir):
    lines = (pred_dir / "predictions.txt").read_text().splitlines()
    if lines[0] != "ptaco-predictions 1":
        raise ValueError("predictions: bad header")
    rows = lines[1:]
    if len(rows) != len(corpus):
        raise ValueError("predictions: utterance count differs from corpus")
    abs_sum = compared = dur_abs = correct = tokens = len_err = failures = 0
    for row, utt in zip(rows, corpus):
        fields = row.split()
        speaker, mel_name, n = int(fields[1]), fields[2], int(fields[3])
        if speaker != utt["speaker"] or n != len(utt["phonemes"]):
            raise ValueError(f"predictions: row {fields[0]} does not match the corpus")
        pred_total = 0
        for j, triple in enumerate(fields[4:4 + n]):
            target, pred, nonzero = (int(x) for x in triple.split(":"))
            if target != utt["durations"][j]:
                raise ValueError(f"predictions: row {fields[0]} target duration differs")
            correct += int(bool(nonzero) == (target > 0))
            dur_abs += abs(pred - target)
            pred_total += pred
        tokens += n
        len_err += abs(pred_total - utt["frames"])
        if mel_name == "-":
            failures += 1
            continue
        frames, bins, values = read_mel(pred_dir / mel_name)
        if bins != utt["bins"]:
            raise ValueError(f"{mel_name}: bin count differs from the corpus")
        m = min(frames, utt["frames"])
        abs_sum += sum(abs(values[i] - utt["mel"][i]) for i in range(m * bins))
        compared += m * bins
    return {
        "utterances": len(corpus),
        "spec_l1": abs_sum / compared if compared else 0.0,
        "duration_mae": dur_abs / tokens if tokens else 0.0,
        "nonzero_accuracy": correct / tokens if tokens else 0.0,
        "length_error": len_err / len(corpus) if corpus else 0.0,
        "failures": failures,
    }


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--corpus", required=True, help="corpus.bin or its directory")
    ap.add_argument("--eval", required=True, help="eval output directory")
    ap.add_argument("--tolerance", type=float, default=1e-9)
    args = ap.parse_args()
    corpus_path = Path(args.corpus)
    if corpus_path.is_dir():
        corpus_path = corpus_path / "corpus.bin"
    eval_dir = Path(args.eval)
    ours = recompute(read_corpus(corpus_path), eval_dir)
    theirs = json.loads((eval_dir / "metrics.json").read_text())
    ok = True
    for key, value in ours.items():
        got = theirs.get(key)
        match = got is not None and math.isclose(got, value, rel_tol=args.tolerance, abs_tol=args.tolerance)
        print(f"{'ok  ' if match else 'FAIL'} {key}: recomputed {value!r}, reported {got!r}")
        ok = ok and match
    return 0 if ok else 1


if __name__ == "__main__":
    sys.exit(main())
