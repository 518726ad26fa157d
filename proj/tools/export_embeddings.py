#!/usr/bin/env python3
"""Encode the label file with a Hugging Face model and write a grunet embeddings file.

    python3 tools/export_embeddings.py data/labels.txt data/embeddings.txt \
        --model distilbert-base-uncased --pooling cls
"""
import argparse
import base64
import json
import sys

import numpy as np


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("labels")
    ap.add_argument("output")
    ap.add_argument("--model", default="distilbert-base-uncased")
    ap.add_argument("--pooling", choices=["cls", "mean"], default="cls")
    args = ap.parse_args()

    import torch
    from transformers import AutoModel, AutoTokenizer

    with open(args.labels, encoding="utf-8") as f:
        labels = [line.rstrip("\r\n") for line in f if line.strip()]
    if len(labels) != 16:
        sys.exit(f"expected 16 labels, found {len(labels)}")

    tok = AutoTokenizer.from_pretrained(args.model)
    model = AutoModel.from_pretrained(args.model).eval()
    rows = []
    with torch.no_grad():
        for label in labels:
            enc = tok(label, return_tensors="pt")
            hidden = model(**enc).last_hidden_state[0]
            vec = hidden[0] if args.pooling == "cls" else hidden.mean(dim=0)
            rows.append(vec.double().numpy())
    matrix = np.stack(rows).astype("<f8")

    header = {
        "format": "grunet-text-embeddings",
        "version": 1,
        "rows": matrix.shape[0],
        "cols": matrix.shape[1],
        "encoder_id": f"{args.model}:{args.pooling}",
        "dtype": "float64",
        "byte_order": "little",
        "labels": labels,
    }
    with open(args.output, "w", encoding="utf-8") as f:
        f.write(json.dumps(header) + "\n")
        f.write(base64.b64encode(matrix.tobytes(order="C")).decode("ascii") + "\n")


if __name__ == "__main__":
    main()
