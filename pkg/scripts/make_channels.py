"""Regenerate the bundled channel corpus in channels/.

Four desk-scale channels:
  flip    binary state XORed onto the input; perfectly invertible with
          state knowledge, useless without it.
  stuck   memory cell stuck at |0> with probability 0.3, writable otherwise.
  skew    flip channel with a biased state prior (0.78, 0.22).
  purecq  non-commuting pure outputs at angles {0, 45, 90, 135} degrees.
"""

import pathlib
import sys

import numpy as np

sys.path.insert(0, str(pathlib.Path(__file__).resolve().parent.parent / "src"))

from gpcq.channel import build_channel, serialize_channel


def ket(theta: float) -> np.ndarray:
    v = np.array([np.cos(theta), np.sin(theta)])
    return np.outer(v, v).astype(complex)


KET0 = np.diag([1.0, 0.0]).astype(complex)
KET1 = np.diag([0.0, 1.0]).astype(complex)


def flip_channel(p1: float = 0.5):
    states = {
        (s, x): (KET0 if (int(s) + int(x)) % 2 == 0 else KET1)
        for s in "01"
        for x in "01"
    }
    return build_channel("01", "01", 2, states, [1 - p1, p1])


def stuck_channel(p_stuck: float = 0.3):
    states = {}
    for x in "01":
        states[("ok", x)] = KET0 if x == "0" else KET1
        states[("stuck", x)] = KET0
    return build_channel(["ok", "stuck"], "01", 2, states, [1 - p_stuck, p_stuck])


def purecq_channel():
    states = {
        (s, x): ket((2 * int(s) + int(x)) * np.pi / 4) for s in "01" for x in "01"
    }
    return build_channel("01", "01", 2, states, [0.5, 0.5])


def main(out_dir: str = "channels"):
    out = pathlib.Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    corpus = {
        "flip": flip_channel(),
        "stuck": stuck_channel(),
        "skew": flip_channel(p1=0.22),
        "purecq": purecq_channel(),
    }
    for name, ch in corpus.items():
        path = out / f"{name}.chan"
        path.write_text(serialize_channel(ch))
        print(f"wrote {path}")


if __name__ == "__main__":
    main(*sys.argv[1:])
