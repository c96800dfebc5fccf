#!/usr/bin/env python3
# Copyright 2026 The agic Authors
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
# http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.
"""Regenerates data/toy: a 5-image fixture bundle, its caption file and images.

Deterministic: the committed files are exactly what this script writes.
"""

import json
import pathlib

import numpy as np
from PIL import Image

OUT = pathlib.Path(__file__).resolve().parent.parent / "data" / "toy"

VOCAB = ["<bos>", "<eos>", "a", "two", "girls", "black", "dog", "runs", "on", "the",
         "grass", "man", "rides", "bike", "child", "plays", "in", "water", "white", "cat",
         "sits", "red", "mat", "blowing", "bubbles", "brown", "street", "boy", "beach"]
TOK = {w: i for i, w in enumerate(VOCAB)}
BOS, EOS = 0, 1
SIDE = 4
M = SIDE * SIDE + 1
LAYERS, HEADS = 4, 2

# image id -> (greedy caption, focus patch (row, col), distractor words per step)
IMAGES = {
    "girls.png": ("two girls", (1, 1), ["a", "girls"]),
    "dog.jpg": ("a black dog runs on the grass", (2, 1), ["brown", "white", "street"]),
    "man.png": ("a man rides a bike", (1, 2), ["boy", "street"]),
    "child.png": ("a child plays in the water", (2, 2), ["boy", "beach"]),
    "cat.png": ("a white cat sits on a red mat", (0, 3), ["black", "dog", "the"]),
}

CAPTIONS = {
    "girls.png": ["Two girls blowing bubbles.", "Two young girls are playing outside.",
                  "Two girls, blowing bubbles!"],
    "dog.jpg": ["A black dog runs on the grass.", "A dog is running across a green lawn.",
                "The black dog runs through the grass."],
    "man.png": ["A man rides a bike down the street.", "A man riding a bicycle.",
                "A cyclist rides on the road."],
    "child.png": ["A child plays in the water.", "A young boy splashes in the water at the beach.",
                  "A kid playing in the water."],
    "cat.png": ["A white cat sits on a red mat.", "A cat is sitting on a mat.",
                "A white cat resting on a red rug."],
}


def softmax_rows(x):
    x = x - x.max(axis=-1, keepdims=True)
    e = np.exp(x)
    return e / e.sum(axis=-1, keepdims=True)


def attention_stack(rng, focus):
    fr, fc = focus
    rows, cols = np.divmod(np.arange(SIDE * SIDE), SIDE)
    bump = -((rows - fr) ** 2 + (cols - fc) ** 2) / 1.5
    stack = []
    for layer in range(LAYERS):
        heads = []
        for _ in range(HEADS):
            logits = rng.normal(0.0, 0.5, size=(M, M))
            # CLS query row sharpens around the focus patch in deeper layers
            logits[0, 1:] += bump * (0.5 + 0.5 * layer)
            a = softmax_rows(logits).astype(np.float32)
            heads.append(a)
        stack.append(heads)
    return stack


def rules_for(image_id, caption, distractors, rng):
    words = caption.split() + ["<eos>"]
    rules = []
    prefix = [BOS]
    for step, w in enumerate(words):
        logits = np.zeros(len(VOCAB))
        logits[TOK[w]] = 4.0
        for j, d in enumerate(distractors):
            if d != w:
                logits[TOK[d]] = 2.8 - 0.4 * j + 0.1 * ((step + j) % 3)
        logits += rng.uniform(0.0, 0.2, size=len(VOCAB))
        logits[BOS] = -10.0
        rules.append({"image_id": image_id, "prefix": list(prefix),
                      "logits": [float(np.float32(v)) for v in logits]})
        prefix.append(TOK[w])
    return rules


def main():
    rng = np.random.default_rng(20231014)
    (OUT / "images").mkdir(parents=True, exist_ok=True)
    images, rules = {}, []
    for image_id, (caption, focus, distractors) in IMAGES.items():
        stack = attention_stack(rng, focus)
        images[image_id] = {"attention": [[h.tolist() for h in layer] for layer in stack]}
        rules.extend(rules_for(image_id, caption, distractors, rng))
        pix = rng.integers(0, 256, size=(40, 48, 3), dtype=np.uint8)
        img = Image.fromarray(pix, "RGB")
        if image_id.endswith(".jpg"):
            img.save(OUT / "images" / image_id, quality=90)
        else:
            img.save(OUT / "images" / image_id)

    fallback = np.zeros(len(VOCAB))
    fallback[EOS] = 3.0
    fallback[BOS] = -10.0
    bundle = {
        "descriptor": {"vocab_size": len(VOCAB), "eos_token": EOS, "bos_token": BOS,
                       "patch_grid_side": SIDE, "input_height": 32, "input_width": 32,
                       "value_range": [0.0, 1.0]},
        "vocab": VOCAB,
        "images": images,
        "logit_rules": rules,
        "fallback_logits": [float(v) for v in fallback],
    }
    (OUT / "fixture.json").write_text(json.dumps(bundle, sort_keys=True) + "\n")
    with open(OUT / "captions.txt", "w", encoding="utf-8") as f:
        for image_id, caps in CAPTIONS.items():
            for i, c in enumerate(caps):
                f.write(f"{image_id}#{i}\t{c}\n")


if __name__ == "__main__":
    main()
