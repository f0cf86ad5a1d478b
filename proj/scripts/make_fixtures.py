# Copyright 2026 The Influence Authors.
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#     http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.

"""Regenerates the test fixtures under tests/fixtures/.

bundles/<identifier>/   tiny randomly initialised encoders, one per registry
                        family, exported to ONNX with a tokenizer trained on
                        CORPUS. Parity vectors come from the PyTorch model.
tokenizers/<name>.json  extra tokenizer.json files covering components the
                        bundles do not use.
tokenizer_cases.json    expected ids from the Python tokenizers library.

Needs torch, transformers, tokenizers, sentencepiece and onnx. The output is
committed; rerun only when the fixture set changes.
"""

import argparse
import json
import os
import tempfile

import onnx
import sentencepiece as spm
import torch
from sentencepiece import sentencepiece_model_pb2
from tokenizers import AddedToken, Regex, Tokenizer, decoders, models, normalizers, pre_tokenizers, processors, trainers

CORPUS = [
    "The council shall adopt the measures referred to in this chapter.",
    "Member states may request an exemption before the end of the year.",
    "Each authority keeps a register of the decisions it has taken.",
    "Citizens have the right to access documents held by the institutions.",
    "A report on the application of these rules is published every two years.",
    "The committee consults experts whenever the technical questions are complex.",
    "Data should be processed lawfully, fairly and in a transparent manner.",
    "Controllers must demonstrate compliance with the obligations set out here.",
    "Good character and honest conduct are expected of every official.",
    "Duties follow from the rules, whatever the consequences may be.",
    "The outcome that produces the greatest benefit for most people is preferred.",
    "Virtue grows through practice, habit and the example of wise persons.",
    "Obligations bind all parties equally and cannot be waived lightly.",
    "Consequences for welfare and happiness guide the choice between options.",
    "An independent supervisor monitors the processing of personal information.",
    "Transfers to third countries require adequate safeguards and remedies.",
    "Penalties shall be effective, proportionate and dissuasive in each case.",
    "Children deserve specific protection with regard to their personal data.",
    "The regulation enters into force on the twentieth day after publication.",
    "Naïve café owners résumé their coöperation; façades glisten in Zürich.",
    "Numbers like 42, 3.14 and 2026 appear in dates, tables and annexes.",
    "Questions? Answers! Brackets (round) [square] {curly} and quotes \"here\".",
    "東京 and 北京 are cities; emoji 🙂 and symbols © ™ show up rarely.",
    "Hyphen-separated words, under_scores and slash/separated terms occur too.",
]

CASES = [
    "The council shall adopt the measures.",
    "  leading and trailing spaces   ",
    "UPPER case and MiXeD Case words",
    "Naïve café résumé Zürich façade",
    "東京 北京 mixed with latin",
    "emoji 🙂🙂 and symbols © ™ ½",
    "tabs\tand\nnewlines\r\nhere",
    "numbers 42 3.14 2026 1,000,000",
    "punctuation!!! ... ??? (brackets) [x] {y}",
    "unknownwordzzzqqq xylophonequartz",
    "``quoted'' text with double  spaces",
    "a",
    "Duties follow from the rules, whatever the consequences may be. " * 3,
]

PARITY_TEXTS = [
    "The council shall adopt the measures referred to in this chapter.",
    "Virtue grows through practice.",
    "Obligations bind all parties equally and cannot be waived lightly, "
    "whatever the consequences for welfare and happiness may be in each case.",
    "Naïve café 🙂",
]

HIDDEN = 32
LAYERS = 2
HEADS = 4
INTERMEDIATE = 37
POSITIONS = 64
MAX_TOKENS = 24


def wordpiece(specials, cls, sep, unk, vocab_size=220):
    tok = Tokenizer(models.WordPiece(unk_token=unk))
    tok.normalizer = normalizers.BertNormalizer(lowercase=True)
    tok.pre_tokenizer = pre_tokenizers.BertPreTokenizer()
    tok.train_from_iterator(CORPUS, trainers.WordPieceTrainer(vocab_size=vocab_size, special_tokens=specials))
    tok.post_processor = processors.TemplateProcessing(
        single=f"{cls} $A {sep}", special_tokens=[(cls, tok.token_to_id(cls)), (sep, tok.token_to_id(sep))])
    tok.decoder = decoders.WordPiece()
    return tok


def byte_level_bpe(vocab_size=400):
    specials = ["<s>", "<pad>", "</s>", "<unk>"]
    tok = Tokenizer(models.BPE())
    tok.pre_tokenizer = pre_tokenizers.ByteLevel(add_prefix_space=False)
    tok.train_from_iterator(CORPUS, trainers.BpeTrainer(
        vocab_size=vocab_size, special_tokens=specials, initial_alphabet=pre_tokenizers.ByteLevel.alphabet()))
    tok.add_special_tokens([AddedToken("<mask>", lstrip=True, special=True)])
    tok.post_processor = processors.RobertaProcessing(("</s>", tok.token_to_id("</s>")), ("<s>", tok.token_to_id("<s>")))
    tok.decoder = decoders.ByteLevel()
    return tok


def sentencepiece_unigram(workdir, vocab_size=160):
    path = os.path.join(workdir, "corpus.txt")
    with open(path, "w", encoding="utf-8") as f:
        f.write("\n".join(CORPUS * 4))
    prefix = os.path.join(workdir, "spm")
    spm.SentencePieceTrainer.train(
        input=path, model_prefix=prefix, vocab_size=vocab_size, model_type="unigram",
        pad_id=0, unk_id=1, bos_id=-1, eos_id=-1, control_symbols=["[CLS]", "[SEP]", "[MASK]"],
        normalization_rule_name="nmt_nfkc", character_coverage=0.98, seed_sentencepiece_size=2000,
        num_threads=1, minloglevel=2)
    proto = sentencepiece_model_pb2.ModelProto()
    with open(prefix + ".model", "rb") as f:
        proto.ParseFromString(f.read())
    vocab = [(p.piece, p.score) for p in proto.pieces]
    tok = Tokenizer(models.Unigram(vocab, unk_id=1, byte_fallback=False))
    tok.normalizer = normalizers.Sequence([
        normalizers.Replace("``", '"'),
        normalizers.Replace("''", '"'),
        normalizers.NFKD(),
        normalizers.StripAccents(),
        normalizers.Lowercase(),
        normalizers.Precompiled(proto.normalizer_spec.precompiled_charsmap),
        normalizers.Replace(Regex(" {2,}"), " "),
    ])
    tok.pre_tokenizer = pre_tokenizers.Metaspace(replacement="▁", prepend_scheme="always")
    tok.add_special_tokens(["<pad>", "<unk>", "[CLS]", "[SEP]", "[MASK]"])
    tok.post_processor = processors.TemplateProcessing(
        single="[CLS]:0 $A:0 [SEP]:0",
        special_tokens=[("[CLS]", tok.token_to_id("[CLS]")), ("[SEP]", tok.token_to_id("[SEP]"))])
    tok.decoder = decoders.Metaspace()
    return tok


def extra_tokenizers():
    """Small hand-built files for the remaining components."""
    out = {}

    t = Tokenizer(models.WordPiece(unk_token="[UNK]"))
    t.normalizer = normalizers.Sequence([normalizers.NFC(), normalizers.Strip(), normalizers.Lowercase()])
    t.pre_tokenizer = pre_tokenizers.Sequence([
        pre_tokenizers.Whitespace(), pre_tokenizers.Digits(individual_digits=True)])
    t.train_from_iterator(CORPUS, trainers.WordPieceTrainer(vocab_size=150, special_tokens=["[UNK]", "[CLS]", "[SEP]"]))
    t.post_processor = processors.BertProcessing(("[SEP]", t.token_to_id("[SEP]")), ("[CLS]", t.token_to_id("[CLS]")))
    out["whitespace_digits_wordpiece"] = t

    t = Tokenizer(models.BPE(unk_token="<unk>", continuing_subword_prefix="##", end_of_word_suffix="</w>", fuse_unk=True))
    t.normalizer = normalizers.Sequence([normalizers.NFKC(), normalizers.Prepend("~")])
    t.pre_tokenizer = pre_tokenizers.Sequence([
        pre_tokenizers.WhitespaceSplit(), pre_tokenizers.Punctuation(behavior="isolated"),
        pre_tokenizers.Digits(individual_digits=False)])
    t.train_from_iterator(CORPUS[:12], trainers.BpeTrainer(
        vocab_size=160, special_tokens=["<unk>"], continuing_subword_prefix="##", end_of_word_suffix="</w>",
        limit_alphabet=40))
    out["bpe_affixes_fuse_unk"] = t

    t = Tokenizer(models.BPE(byte_fallback=True, unk_token="<unk>"))
    t.normalizer = normalizers.NFD()
    t.pre_tokenizer = pre_tokenizers.Sequence([
        pre_tokenizers.Split(Regex(r"\s+"), behavior="removed"),
        pre_tokenizers.Split(",", behavior="merged_with_previous"),
        pre_tokenizers.Split(Regex(r"[0-9]"), behavior="merged_with_next"),
        pre_tokenizers.Split(Regex(r"[aeiou]"), behavior="contiguous", invert=False)])
    byte_tokens = [f"<0x{b:02X}>" for b in range(256)]
    t.train_from_iterator(CORPUS[:10], trainers.BpeTrainer(
        vocab_size=400, special_tokens=["<unk>"] + byte_tokens, limit_alphabet=30))
    t.post_processor = processors.Sequence([
        processors.ByteLevel(trim_offsets=False),
        processors.TemplateProcessing(single="<unk>:1 $A:0", special_tokens=[("<unk>", 0)])])
    out["bpe_byte_fallback_split"] = t

    t = Tokenizer(models.WordPiece(unk_token="[UNK]"))
    t.normalizer = normalizers.BertNormalizer(lowercase=False, strip_accents=True, handle_chinese_chars=True)
    t.pre_tokenizer = pre_tokenizers.Metaspace(replacement="_", prepend_scheme="first", split=True)
    t.train_from_iterator(CORPUS, trainers.WordPieceTrainer(vocab_size=200, special_tokens=["[UNK]", "[X]"]))
    t.add_tokens([AddedToken("council", single_word=True, normalized=True)])
    out["metaspace_first_added"] = t
    return out


class Pooled(torch.nn.Module):
    """Mean-pooled sentence embedding computed inside the graph."""

    def __init__(self, model):
        super().__init__()
        self.model = model

    def forward(self, input_ids, attention_mask):
        h = self.model(input_ids=input_ids, attention_mask=attention_mask).last_hidden_state
        m = attention_mask.unsqueeze(-1).to(h.dtype)
        return (h * m).sum(1) / m.sum(1).clamp(min=1e-9)


class Tokens(torch.nn.Module):
    def __init__(self, model, with_types):
        super().__init__()
        self.model = model
        self.with_types = with_types

    def forward(self, input_ids, attention_mask, token_type_ids=None):
        kw = dict(input_ids=input_ids, attention_mask=attention_mask)
        if self.with_types:
            kw["token_type_ids"] = token_type_ids
        return self.model(**kw).last_hidden_state


def build_model(arch, vocab_size, pad_id):
    import transformers as tf
    kw = dict(vocab_size=vocab_size, hidden_size=HIDDEN, num_hidden_layers=LAYERS, num_attention_heads=HEADS,
              intermediate_size=INTERMEDIATE, max_position_embeddings=POSITIONS)
    if arch == "mpnet":
        return tf.MPNetModel(tf.MPNetConfig(pad_token_id=pad_id, **{**kw, "max_position_embeddings": POSITIONS + 2}))
    if arch == "albert":
        return tf.AlbertModel(tf.AlbertConfig(embedding_size=16, pad_token_id=pad_id, **kw))
    if arch == "distilbert":
        return tf.DistilBertModel(tf.DistilBertConfig(
            vocab_size=vocab_size, dim=HIDDEN, n_layers=LAYERS, n_heads=HEADS, hidden_dim=INTERMEDIATE,
            max_position_embeddings=POSITIONS, pad_token_id=pad_id))
    if arch == "roberta":
        return tf.RobertaModel(tf.RobertaConfig(pad_token_id=pad_id, **{**kw, "max_position_embeddings": POSITIONS + 2}))
    if arch == "bert":
        return tf.BertModel(tf.BertConfig(pad_token_id=pad_id, **kw))
    raise ValueError(arch)


BUNDLES = [
    # identifier, architecture, tokenizer kind, output kind, normalized, token types
    ("all-MPNet-base-v2", "mpnet", "wordpiece-s", "token_embeddings", True, False),
    ("paraphrase-albert-small-v2", "albert", "unigram", "token_embeddings", False, True),
    ("distilbert-base-nli-stsb-mean-tokens", "distilbert", "wordpiece", "sentence_embedding", False, False),
    ("all-distilroberta-v1", "roberta", "bytelevel", "token_embeddings", True, False),
    ("paraphrase-TinyBERT-L6-v2", "bert", "wordpiece", "token_embeddings", False, True),
]


def make_tokenizer(kind, workdir):
    if kind == "wordpiece":
        return wordpiece(["[PAD]", "[UNK]", "[CLS]", "[SEP]", "[MASK]"], "[CLS]", "[SEP]", "[UNK]")
    if kind == "wordpiece-s":
        return wordpiece(["<s>", "<pad>", "</s>", "<unk>", "<mask>"], "<s>", "</s>", "<unk>")
    if kind == "bytelevel":
        return byte_level_bpe()
    if kind == "unigram":
        return sentencepiece_unigram(workdir)
    raise ValueError(kind)


def pad_id_of(tok):
    for name in ("[PAD]", "<pad>"):
        if tok.token_to_id(name) is not None:
            return tok.token_to_id(name)
    return 0


def export_bundle(out_dir, identifier, arch, tok_kind, output_kind, normalized, with_types, seed, workdir):
    torch.manual_seed(seed)
    tok = make_tokenizer(tok_kind, workdir)
    model = build_model(arch, tok.get_vocab_size(), pad_id_of(tok)).eval()
    bundle = os.path.join(out_dir, identifier)
    os.makedirs(bundle, exist_ok=True)
    tok.save(os.path.join(bundle, "tokenizer.json"))

    if output_kind == "sentence_embedding":
        wrapper, names, out_name = Pooled(model), ["input_ids", "attention_mask"], "sentence_embedding"
    else:
        wrapper = Tokens(model, with_types)
        names = ["input_ids", "attention_mask"] + (["token_type_ids"] if with_types else [])
        out_name = "token_embeddings"
    wrapper.eval()
    ids = torch.tensor([[2, 5, 6, 7, 3]])
    args = tuple([ids, torch.ones_like(ids)] + ([torch.zeros_like(ids)] if len(names) == 3 else []))
    dyn = {n: {0: "batch", 1: "tokens"} for n in names}
    dyn[out_name] = {0: "batch"} if output_kind == "sentence_embedding" else {0: "batch", 1: "tokens"}
    graph = os.path.join(bundle, "model.onnx")
    torch.onnx.export(wrapper, args, graph, input_names=names, output_names=[out_name], dynamic_axes=dyn,
                      opset_version=17, dynamo=False)
    onnx.checker.check_model(onnx.load(graph))
    # export() puts the wrapper back into its original (training) mode
    wrapper.eval()

    tok.enable_truncation(MAX_TOKENS)
    parity = []
    with torch.no_grad():
        for text in PARITY_TEXTS:
            enc = tok.encode(text)
            t_ids = torch.tensor([enc.ids])
            mask = torch.ones_like(t_ids)
            feeds = [t_ids, mask] + ([torch.zeros_like(t_ids)] if len(names) == 3 else [])
            out = wrapper(*feeds)
            if output_kind == "token_embeddings":
                vec = out[0].mean(0)
            else:
                vec = out[0]
            if normalized:
                vec = vec / vec.norm()
            parity.append({"text": text, "vector": [float(v) for v in vec.double()]})
    tok.no_truncation()

    import tokenizers
    import transformers
    manifest = {
        "format_version": 1,
        "identifier": identifier,
        "dims": HIDDEN,
        "max_tokens": MAX_TOKENS,
        "pooling": "mean",
        "normalized": normalized,
        "graph_file": "model.onnx",
        "tokenizer_file": "tokenizer.json",
        "input_names": names,
        "output_name": out_name,
        "output_kind": output_kind,
        "parity": parity,
        "revision": f"tiny-random-{arch}-seed{seed}",
        "tools": {"torch": torch.__version__, "transformers": transformers.__version__,
                  "tokenizers": tokenizers.__version__, "onnx": onnx.__version__, "opset": 17},
    }
    with open(os.path.join(bundle, "manifest.json"), "w", encoding="utf-8") as f:
        json.dump(manifest, f, indent=2, ensure_ascii=False)
        f.write("\n")
    return tok


def cases_for(tok):
    rows = []
    for text in CASES:
        tok.no_truncation()
        full = tok.encode(text)
        tok.enable_truncation(12)
        cut = tok.encode(text)
        tok.no_truncation()
        rows.append({"text": text, "ids": full.ids, "type_ids": full.type_ids, "ids_max12": cut.ids})
    return rows


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--out", default=os.path.join(os.path.dirname(__file__), "..", "tests", "fixtures"))
    args = ap.parse_args()
    out = os.path.abspath(args.out)
    cases = {}
    with tempfile.TemporaryDirectory() as workdir:
        for seed, (identifier, arch, tok_kind, output_kind, normalized, with_types) in enumerate(BUNDLES):
            tok = export_bundle(os.path.join(out, "bundles"), identifier, arch, tok_kind, output_kind, normalized,
                                with_types, seed + 1, workdir)
            cases[f"bundles/{identifier}/tokenizer.json"] = cases_for(tok)
    os.makedirs(os.path.join(out, "tokenizers"), exist_ok=True)
    for name, tok in extra_tokenizers().items():
        rel = f"tokenizers/{name}.json"
        tok.save(os.path.join(out, rel))
        cases[rel] = cases_for(tok)
    with open(os.path.join(out, "tokenizer_cases.json"), "w", encoding="utf-8") as f:
        json.dump(cases, f, indent=1, ensure_ascii=False)
        f.write("\n")


if __name__ == "__main__":
    main()
