#!/usr/bin/env python3
"""End-to-end checks of the ptaco command line."""

import csv
import subprocess
import sys
import tempfile
from pathlib import Path

PTACO = Path(sys.argv[1])
CHECK_EVAL = Path(sys.argv[2])

TINY = """\
mel_bins = 8
d_model = 8
encoder_conv_blocks = 1
encoder_blocks = 1
encoder_heads = 2
speaker_dim = 4
latent_dim = 3
latent_proj = 4
vae_width = 8
vae_heads = 2
vae_plain_blocks = 1
vae_strided_blocks = 2
fine_blocks = 1
prior_hidden = 6
duration_blocks = 1
duration_heads = 2
decoder_blocks = 2
decoder_heads = 2
batch_size = 3
total_steps = 12
warmup_steps = 4
decay_start = 6
decay_end = 10
checkpoint_every = 4
seed = 9
"""

failures = []


def run(*args, expect=0):
    proc = subprocess.run([str(PTACO), *map(str, args)], capture_output=True, text=True)
    if expect is not None and proc.returncode != expect:
        failures.append(f"{' '.join(map(str, args))}: exit {proc.returncode}, expected {expect}\n{proc.stderr}")
    return proc


def check(cond, what):
    if not cond:
        failures.append(what)


def main():
    with tempfile.TemporaryDirectory() as tmp:
        tmp = Path(tmp)
        spec = tmp / "spec.txt"
        spec.write_text("mel_bins = 8\nmax_words = 2\nmax_word_phonemes = 2\n")
        cfg = tmp / "tiny.cfg"
        cfg.write_text(TINY)

        # gen
        run("gen", "--spec", spec, "--count", 6, "--seed", 3, "--out", tmp / "c1")
        run("gen", "--spec", spec, "--count", 6, "--seed", 3, "--out", tmp / "c2")
        for name in ("corpus.bin", "corpus.txt", "durations.txt"):
            check((tmp / "c1" / name).read_bytes() == (tmp / "c2" / name).read_bytes(), f"gen: {name} differs")
        check((tmp / "c1" / "manifest.json").exists(), "gen: no manifest")
        run("gen", "--count", 0, "--out", tmp / "c0", expect=1)
        run("gen", "--spec", spec, "--count", 6, "--out", tmp / "c1", expect=1)
        default = run("gen", "--count", 16, "--out", tmp / "c16")
        check(len((tmp / "c16" / "corpus.txt").read_text().splitlines()) == 16, "gen: default count 16")

        # train: config validation
        run("train", "--config", cfg, "--corpus", tmp / "c1", "--variant", "fine", "--out", tmp / "bad", expect=1)
        bad = run("train", "--config", cfg, "--corpus", tmp / "c1", "--variant", "fine", "--out", tmp / "bad",
                  expect=1)
        check("beta_start_step" in bad.stderr and "beta_final" in bad.stderr, "train: missing beta keys not listed")
        typo = tmp / "typo.cfg"
        typo.write_text(TINY + "d_modle = 3\nmomentum = 7\n")
        bad = run("train", "--config", typo, "--corpus", tmp / "c1", "--out", tmp / "bad2", expect=1)
        check("d_modle" in bad.stderr and "momentum" in bad.stderr, "train: errors not listed together")

        # train: resume reproduces the uninterrupted metrics
        fine = tmp / "fine.cfg"
        fine.write_text(TINY + "beta_start_step = 2\nbeta_end_step = 8\nbeta_final = 1\n")
        run("train", "--config", fine, "--corpus", tmp / "c1", "--variant", "fine", "--out", tmp / "full")
        run("train", "--config", fine, "--corpus", tmp / "c1", "--variant", "fine", "--out", tmp / "part",
            "--stop-after", 8, "--no-eval")
        run("train", "--config", fine, "--corpus", tmp / "c1", "--variant", "fine", "--out", tmp / "part",
            "--resume", tmp / "part" / "checkpoint-4.ckpt", "--force")
        full = (tmp / "full" / "metrics.csv").read_text()
        check(full == (tmp / "part" / "metrics.csv").read_text(), "train: resumed metrics differ")
        rows = list(csv.DictReader(full.splitlines()))
        check(len(rows) == 12 and rows[0]["step"] == "0", "train: metrics rows")

        # train: novae loss decreases
        nov = tmp / "nov.cfg"
        nov.write_text(TINY.replace("total_steps = 12", "total_steps = 40").replace("batch_size = 3", "batch_size = 6"))
        run("train", "--config", nov, "--corpus", tmp / "c1", "--variant", "novae", "--out", tmp / "nov")
        rows = list(csv.DictReader((tmp / "nov" / "metrics.csv").read_text().splitlines()))
        check(float(rows[-1]["loss"]) < float(rows[0]["loss"]), "train: novae loss did not decrease")

        # synth
        ckpt = tmp / "full" / "checkpoint.ckpt"
        a = run("synth", "--ckpt", ckpt, "--text", "AA D sil ER .", "--speaker", 1, "--out", tmp / "a.mel",
                expect=None)
        b = run("synth", "--ckpt", ckpt, "--text", "AA D sil ER .", "--speaker", 1, "--out", tmp / "b.mel",
                expect=None)
        check(a.returncode == b.returncode and a.returncode in (0, 2), "synth: unexpected exit")
        if a.returncode == 2:
            check("gated to zero" in a.stderr, "synth: unexpected runtime failure")
        else:
            check((tmp / "a.mel").read_bytes() == (tmp / "b.mel").read_bytes(), "synth: output not bit-identical")
        bad = run("synth", "--ckpt", ckpt, "--text", "AA qq", "--out", tmp / "x.mel", expect=1)
        check("qq" in bad.stderr, "synth: unknown symbol not named")

        # eval, cross-checked independently
        for mode in ("teacher", "free-running"):
            out = tmp / f"eval-{mode}"
            run("eval", "--ckpt", ckpt, "--corpus", tmp / "c1", "--mode", mode, "--out", out)
            proc = subprocess.run([sys.executable, str(CHECK_EVAL), "--corpus", tmp / "c1", "--eval", out],
                                  capture_output=True, text=True)
            check(proc.returncode == 0, f"eval {mode}: cross-check failed\n{proc.stdout}{proc.stderr}")

        # gradcheck
        run("gradcheck", "--module", "upsampler")
        bad = run("gradcheck", "--module", "lconv", "--inject-fault", "matmul:1.5", expect=3)
        run("gradcheck", "--module", "nonsense", expect=1)

        # bench
        out = tmp / "bench.csv"
        run("bench", "--decoder", "lconv,transformer", "--frames", "16,32", "--repeats", 2, "--width", 16,
            "--out", out)
        rows = list(csv.DictReader(out.read_text().splitlines()))
        check(len(rows) == 4, "bench: row count")
        check(all(r["stddev_ms"] not in ("", "nan") for r in rows), "bench: stddev column empty")

    for f in failures:
        print("FAIL:", f)
    print("cli checks:", "failed" if failures else "passed")
    return 1 if failures else 0


if __name__ == "__main__":
    sys.exit(main())
