#!/usr/bin/env python3
"""Encode a segmented corpus with a Hugging Face model.

Reads corpus.jsonl as written by `megclass prepare` and writes the
precomputed embedding layout read by `megclass embed`: manifest.json plus one
raw little-endian float32 file per document.
"""

import argparse
import json
import os
import sys


def parse_args():
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--corpus", required=True)
    p.add_argument("--model", required=True)
    p.add_argument("--layer", type=int, default=-1)
    p.add_argument("--out", required=True)
    p.add_argument("--device", default=None)
    p.add_argument("--max-tokens", type=int, default=512)
    return p.parse_args()


def main():
    args = parse_args()
    try:
        import numpy as np
        import torch
        from transformers import AutoModel, AutoTokenizer
    except ImportError as e:
        print(f"hf_encode: missing dependency: {e.name} (pip install torch transformers numpy)", file=sys.stderr)
        return 3

    device = args.device or ("cuda" if torch.cuda.is_available() else "cpu")
    tok = AutoTokenizer.from_pretrained(args.model, use_fast=True)
    if not tok.is_fast:
        print("hf_encode: a fast tokenizer is required for word alignment", file=sys.stderr)
        return 3
    model = AutoModel.from_pretrained(args.model, output_hidden_states=True).to(device).eval()
    dim = model.config.hidden_size

    os.makedirs(args.out, exist_ok=True)
    documents = []
    with open(args.corpus, encoding="utf-8") as f:
        for index, line in enumerate(f):
            if not line.strip():
                continue
            doc = json.loads(line)
            file_name = f"doc{index}.f32"
            sentences = []
            with open(os.path.join(args.out, file_name), "wb") as payload:
                for s_index, sent in enumerate(doc["sentences"]):
                    words = sent["words"]
                    enc = tok(words, is_split_into_words=True, truncation=True,
                              max_length=args.max_tokens, return_tensors="pt")
                    word_ids = enc.word_ids(0)
                    with torch.no_grad():
                        hidden = model(**{k: v.to(device) for k, v in enc.items()}).hidden_states[args.layer][0]
                    keep = [i for i, w in enumerate(word_ids) if w is not None]
                    if len({word_ids[i] for i in keep}) != len(words):
                        print(f"hf_encode: {doc['id']}#{s_index}: sentence exceeds {args.max_tokens} tokens",
                              file=sys.stderr)
                        return 4
                    rows = hidden[keep].float().cpu().numpy().astype("<f4")
                    if not np.isfinite(rows).all():
                        print(f"hf_encode: {doc['id']}#{s_index}: non-finite activations", file=sys.stderr)
                        return 4
                    payload.write(rows.tobytes())
                    sentences.append({"token_to_word": [word_ids[i] for i in keep]})
            documents.append({"id": doc["id"], "file": file_name, "sentences": sentences})

    manifest = {
        "format": "megclass-precomputed",
        "version": 1,
        "dim": dim,
        "provider_id": f"hf:{args.model}@layer{args.layer}",
        "documents": documents,
    }
    tmp = os.path.join(args.out, "manifest.json.tmp")
    with open(tmp, "w", encoding="utf-8") as f:
        json.dump(manifest, f)
    os.replace(tmp, os.path.join(args.out, "manifest.json"))
    return 0


if __name__ == "__main__":
    sys.exit(main())
