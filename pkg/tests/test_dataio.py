import logging
import struct

import numpy as np
import pytest

from orderemb.dataio import (
    CaptionRecord,
    FeatureMatrix,
    RetrievalCorpus,
    build_vocab,
    load_captions,
    load_checkpoint,
    load_entail,
    load_features,
    save_checkpoint,
    save_features,
    tokenize,
)
from orderemb.encoders import Vocabulary
from orderemb.errors import (
    CheckpointError,
    CheckpointVersionError,
    ContractError,
    DataFormatError,
)
from orderemb.training import Checkpoint


@pytest.fixture
def vocab():
    return Vocabulary(["<unk>", "a", "dog", "park", "the", "walking", "woman"])


def test_tokenize_lowercase_and_punctuation():
    assert tokenize("A Dog.") == ["a", "dog", "."]
    assert tokenize("woman, walking her dog!") == \
        ["woman", ",", "walking", "her", "dog", "!"]
    assert tokenize("  spaced\tout\nlines ") == ["spaced", "out", "lines"]
    assert tokenize("") == []
    assert tokenize("...") == [".", ".", "."]


def test_feature_roundtrip(tmp_path):
    path = tmp_path / "feat.oef"
    fm = FeatureMatrix(ids=["img1", "img2"],
                       data=np.array([[1.5, -2.25, 0.125], [4.0, 5.0, -6.5]]))
    save_features(path, fm)
    back = load_features(path)
    assert back.ids == ["img1", "img2"]
    np.testing.assert_array_equal(back.data, fm.data)  # exactly representable in f32


def test_feature_empty_file_valid(tmp_path):
    path = tmp_path / "empty.oef"
    save_features(path, FeatureMatrix(ids=[], data=np.zeros((0, 7))))
    back = load_features(path)
    assert back.ids == [] and back.data.shape == (0, 7)


def test_feature_hand_encoded_bytes(tmp_path):
    # 2 x 3 matrix with ids "a" and "bc", known little-endian layout
    payload = struct.pack("<6f", 1.0, 2.0, 3.0, -1.0, 0.5, 8.0)
    blob = b"OEF1" + struct.pack("<II", 2, 3) \
        + struct.pack("<H", 1) + b"a" + struct.pack("<H", 2) + b"bc" + payload
    path = tmp_path / "hand.oef"
    path.write_bytes(blob)
    fm = load_features(path)
    assert fm.ids == ["a", "bc"]
    np.testing.assert_array_equal(fm.data, [[1.0, 2.0, 3.0], [-1.0, 0.5, 8.0]])


def test_feature_bad_magic_reports_offset(tmp_path):
    path = tmp_path / "bad.oef"
    path.write_bytes(b"XXXX" + b"\x00" * 8)
    with pytest.raises(DataFormatError, match="byte 0"):
        load_features(path)


def test_feature_truncation_reports_offset(tmp_path):
    path = tmp_path / "trunc.oef"
    fm = FeatureMatrix(ids=["a", "b"], data=np.ones((2, 4)))
    save_features(path, fm)
    blob = path.read_bytes()
    path.write_bytes(blob[:-5])
    with pytest.raises(DataFormatError, match="byte"):
        load_features(path)


def test_feature_duplicate_id_rejected(tmp_path):
    blob = b"OEF1" + struct.pack("<II", 2, 1) \
        + struct.pack("<H", 1) + b"a" + struct.pack("<H", 1) + b"a" \
        + struct.pack("<2f", 0.0, 0.0)
    path = tmp_path / "dup.oef"
    path.write_bytes(blob)
    with pytest.raises(DataFormatError, match="duplicate"):
        load_features(path)


def test_load_captions_and_unknown_tokens(tmp_path, vocab):
    path = tmp_path / "caps.jsonl"
    path.write_text(
        '{"caption_id": "c1", "image_id": "i1", "caption": "Woman walking a dog"}\n'
        '{"caption_id": "c2", "image_id": "i2", "caption": "zebra zebra zebra"}\n',
        encoding="utf-8",
    )
    recs = load_captions(path, vocab)
    assert [r.caption_id for r in recs] == ["c1", "c2"]
    assert recs[0].tokens == [vocab.id("woman"), vocab.id("walking"), vocab.id("a"),
                              vocab.id("dog")]
    assert recs[1].tokens == [0, 0, 0]  # all unknown, length preserved


def test_load_captions_malformed_line_number(tmp_path, vocab):
    path = tmp_path / "bad.jsonl"
    path.write_text('{"caption_id": "c1", "image_id": "i1", "caption": "ok"}\nnot json\n',
                    encoding="utf-8")
    with pytest.raises(DataFormatError, match=":2"):
        load_captions(path, vocab)


def test_load_captions_empty_after_tokenization_skipped(tmp_path, vocab, caplog):
    path = tmp_path / "caps.jsonl"
    path.write_text('{"caption_id": "c1", "image_id": "i1", "caption": "   "}\n'
                    '{"caption_id": "c2", "image_id": "i1", "caption": "dog"}\n',
                    encoding="utf-8")
    with caplog.at_level(logging.WARNING, logger="orderemb"):
        recs = load_captions(path, vocab)
    assert len(recs) == 1 and recs[0].caption_id == "c2"
    assert any("skipped" in r.message for r in caplog.records)


def test_load_entail_label_collapse(tmp_path, vocab):
    path = tmp_path / "snli.tsv"
    path.write_text(
        "entailment\tthe woman walking\tthe woman\n"
        "neutral\tthe dog\tthe dog walking\n"
        "contradiction\ta dog\ta park\n"
        "-\tignored\tignored\n",
        encoding="utf-8",
    )
    pairs = load_entail(path, vocab)
    assert [p.label for p in pairs] == [True, False, False]
    assert pairs[0].premise == [vocab.id("the"), vocab.id("woman"), vocab.id("walking")]


def test_load_entail_unknown_label(tmp_path, vocab):
    path = tmp_path / "bad.tsv"
    path.write_text("maybe\ta\tb\n", encoding="utf-8")
    with pytest.raises(DataFormatError, match="maybe"):
        load_entail(path, vocab)


def test_load_entail_malformed_line(tmp_path, vocab):
    path = tmp_path / "bad.tsv"
    path.write_text("entailment\tonly-premise\n", encoding="utf-8")
    with pytest.raises(DataFormatError, match=":1"):
        load_entail(path, vocab)


def test_retrieval_corpus_validates_image_ids(vocab):
    fm = FeatureMatrix(ids=["i1"], data=np.ones((1, 3)))
    caps = [CaptionRecord("c1", "i1", [1]), CaptionRecord("c2", "i9", [2])]
    with pytest.raises(DataFormatError, match="i9"):
        RetrievalCorpus.assemble(caps, fm)
    corpus = RetrievalCorpus.assemble(caps[:1], fm)
    assert list(corpus.caption_image) == [0]


def test_build_vocab_min_count():
    vocab = build_vocab([["dog", "dog", "cat"], ["dog", "bird"]], min_count=2)
    assert vocab.tokens == ["<unk>", "dog"]


def test_checkpoint_roundtrip_bit_identical(tmp_path):
    rng = np.random.default_rng(31)
    ckpt = Checkpoint(
        task="hypernym",
        config={"dim": "50", "lr": "0.01"},
        epoch=7,
        dev_metric=91.25,
        tensors={"concept_table": rng.normal(size=(13, 5)),
                 "bias": rng.normal(size=4)},
    )
    path = tmp_path / "model.oec"
    save_checkpoint(ckpt, path)
    back = load_checkpoint(path)
    assert back.task == "hypernym" and back.epoch == 7
    assert back.dev_metric == 91.25
    assert back.config == ckpt.config
    for name, arr in ckpt.tensors.items():
        np.testing.assert_array_equal(back.tensors[name], arr)
    # a second save of the loaded checkpoint is byte-identical
    path2 = tmp_path / "model2.oec"
    save_checkpoint(back, path2)
    assert path.read_bytes() == path2.read_bytes()


def test_checkpoint_truncation_is_corruption(tmp_path):
    ckpt = Checkpoint(task="retrieval", config={}, epoch=1, dev_metric=0.0,
                      tensors={"w": np.ones((2, 2))})
    path = tmp_path / "m.oec"
    save_checkpoint(ckpt, path)
    blob = path.read_bytes()
    path.write_bytes(blob[:-1])
    with pytest.raises(CheckpointError):
        load_checkpoint(path)


def test_checkpoint_bitflip_is_corruption(tmp_path):
    ckpt = Checkpoint(task="retrieval", config={}, epoch=1, dev_metric=0.0,
                      tensors={"w": np.ones((2, 2))})
    path = tmp_path / "m.oec"
    save_checkpoint(ckpt, path)
    blob = bytearray(path.read_bytes())
    blob[len(blob) // 2] ^= 0xFF
    path.write_bytes(bytes(blob))
    with pytest.raises(CheckpointError):
        load_checkpoint(path)


def test_checkpoint_task_mismatch_is_version_error(tmp_path):
    ckpt = Checkpoint(task="hypernym", config={}, epoch=1, dev_metric=0.0,
                      tensors={"concept_table": np.ones((2, 2))})
    path = tmp_path / "m.oec"
    save_checkpoint(ckpt, path)
    with pytest.raises(CheckpointVersionError):
        load_checkpoint(path, expected_task="retrieval")


def test_checkpoint_unknown_tensor_names_rejected_by_tasks(tmp_path):
    from orderemb.tasks import HypernymTask

    ckpt = Checkpoint(task="hypernym", config={}, epoch=1, dev_metric=0.0,
                      tensors={"mystery": np.ones((2, 2))})
    path = tmp_path / "m.oec"
    save_checkpoint(ckpt, path)
    with pytest.raises(CheckpointVersionError, match="mystery"):
        HypernymTask.from_checkpoint(load_checkpoint(path), n_concepts=2)


def test_feature_matrix_duplicate_ids_rejected():
    with pytest.raises(ContractError):
        FeatureMatrix(ids=["a", "a"], data=np.zeros((2, 2)))
