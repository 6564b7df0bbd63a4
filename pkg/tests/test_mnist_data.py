"""IDX parsing against hand-built fixtures, label embedding, stream building."""

import gzip
import struct

import numpy as np
import pytest

from fflab.errors import FormatError, UsageError
from fflab.ffnet import Polarity
from fflab.mnist_data import (
    build_training_stream,
    embed_label,
    embed_label_batch,
    make_negative,
    neutral_batch,
    parse_idx_images,
    parse_idx_labels,
    wrong_label,
)
from fflab.rng import Rng


def build_image_idx(images_u8):
    """Byte-by-byte IDX image container for the given uint8 images."""
    n = len(images_u8)
    header = struct.pack(">IIII", 0x00000803, n, 28, 28)
    return header + b"".join(bytes(img) for img in images_u8)


def build_label_idx(labels):
    return struct.pack(">II", 0x00000801, len(labels)) + bytes(labels)


class TestParseImages:
    def test_single_image_fixture(self):
        """Parsed values equal fixture bytes / 255, position by position."""
        img = bytes((i * 7) % 256 for i in range(784))
        X = parse_idx_images(build_image_idx([img]))
        assert X.shape == (1, 784)
        np.testing.assert_allclose(X[0], np.frombuffer(img, dtype=np.uint8) / 255.0)

    def test_bad_magic(self):
        data = struct.pack(">IIII", 0x00000802, 1, 28, 28) + bytes(784)
        with pytest.raises(FormatError, match="magic") as exc:
            parse_idx_images(data)
        assert exc.value.offset == 0

    def test_truncated_payload_reports_offset(self):
        data = build_image_idx([bytes(784)])[:-1]
        with pytest.raises(FormatError, match="payload") as exc:
            parse_idx_images(data)
        assert exc.value.offset == 16 + 783

    def test_wrong_dims(self):
        data = struct.pack(">IIII", 0x00000803, 1, 27, 28) + bytes(27 * 28)
        with pytest.raises(FormatError, match="28x28"):
            parse_idx_images(data)

    def test_gzip_variant(self):
        img = bytes(range(256)) + bytes(784 - 256)
        raw = build_image_idx([img])
        np.testing.assert_array_equal(
            parse_idx_images(gzip.compress(raw)), parse_idx_images(raw)
        )


class TestParseLabels:
    def test_roundtrip(self):
        labels = [3, 1, 4, 1, 5, 9]
        np.testing.assert_array_equal(
            parse_idx_labels(build_label_idx(labels)), labels
        )

    def test_bad_magic(self):
        with pytest.raises(FormatError, match="magic"):
            parse_idx_labels(struct.pack(">II", 0x00000803, 0))

    def test_count_mismatch(self):
        data = struct.pack(">II", 0x00000801, 5) + bytes([1, 2, 3])
        with pytest.raises(FormatError, match="payload"):
            parse_idx_labels(data)

    def test_out_of_range_label(self):
        with pytest.raises(FormatError, match="out of range"):
            parse_idx_labels(build_label_idx([10]))


class TestEmbedLabel:
    def test_sets_exactly_one_slot(self):
        pixels = Rng(1).uniform_array(784)
        out = embed_label(pixels, 3)
        assert out[3] == 1.0
        for i in range(10):
            if i != 3:
                assert out[i] == 0.0

    def test_argmax_roundtrip(self):
        pixels = Rng(2).uniform_array(784)
        assert int(np.argmax(embed_label(pixels, 7)[:10])) == 7

    def test_pixels_beyond_ten_untouched(self):
        pixels = Rng(3).uniform_array(784)
        out = embed_label(pixels, 0)
        np.testing.assert_array_equal(out[10:], pixels[10:])

    def test_idempotent(self):
        pixels = Rng(4).uniform_array(784)
        once = embed_label(pixels, 5)
        np.testing.assert_array_equal(once, embed_label(once, 5))

    def test_label_out_of_range(self):
        with pytest.raises(UsageError):
            embed_label(np.zeros(784), 10)

    def test_batch_matches_single(self):
        X = Rng(5).uniform_array(3 * 784).reshape(3, 784)
        batch = embed_label_batch(X, 6)
        for i in range(3):
            np.testing.assert_array_equal(batch[i], embed_label(X[i], 6))

    def test_neutral_zeroes_slots_only(self):
        X = Rng(6).uniform_array(784).reshape(1, 784)
        out = neutral_batch(X)
        assert np.all(out[0, :10] == 0.0)
        np.testing.assert_array_equal(out[0, 10:], X[0, 10:])


class TestMakeNegative:
    def test_never_true_label(self):
        rng = Rng(7)
        pixels = np.zeros(784)
        for _ in range(500):
            s = make_negative(pixels, 0, rng)
            assert int(np.argmax(s.features[:10])) != 0

    def test_polarity_and_bookkeeping(self):
        s = make_negative(np.zeros(784), 4, Rng(8))
        assert s.polarity == Polarity.NEGATIVE
        assert s.true_label == 4

    def test_wrong_labels_near_uniform(self):
        """Over 9000 draws each wrong label appears 1000 +- 100 times."""
        rng = Rng(9)
        counts = np.zeros(10, dtype=int)
        for _ in range(9000):
            counts[wrong_label(3, rng)] += 1
        assert counts[3] == 0
        others = np.delete(counts, 3)
        assert np.all(np.abs(others - 1000) <= 100)


class TestParserTotality:
    """Any byte string either parses or raises a located FormatError."""

    def test_random_bytes_never_crash(self):
        rng = Rng(99)
        for trial in range(200):
            n = int(rng.randint(64))
            blob = bytes(int(rng.randint(256)) for _ in range(n))
            for parser in (parse_idx_images, parse_idx_labels):
                try:
                    parser(blob)
                except FormatError as e:
                    assert e.offset is not None
                except Exception as e:  # pragma: no cover
                    raise AssertionError(f"non-FormatError {type(e).__name__}") from e

    def test_header_prefixes_of_valid_file(self):
        img = bytes(784)
        good = build_image_idx([img])
        for cut in (0, 3, 4, 8, 15, 16, 400):
            try:
                parse_idx_images(good[:cut])
            except FormatError:
                pass


class TestTrainingStream:
    def _small_set(self, n=100):
        rng = Rng(10)
        X = rng.uniform_array(n * 784).reshape(n, 784)
        y = np.array([rng.randint(10) for _ in range(n)])
        return X, y

    def test_counts_and_balance(self):
        X, y = self._small_set()
        stream = build_training_stream(X, y, Rng(11))
        assert len(stream) == 200
        pos = [s for s in stream if s.polarity == Polarity.POSITIVE]
        neg = [s for s in stream if s.polarity == Polarity.NEGATIVE]
        assert len(pos) == 100 and len(neg) == 100

    def test_deterministic_order(self):
        X, y = self._small_set()
        s1 = build_training_stream(X, y, Rng(12))
        s2 = build_training_stream(X, y, Rng(12))
        for a, b in zip(s1, s2):
            assert a.polarity == b.polarity and a.true_label == b.true_label
            np.testing.assert_array_equal(a.features, b.features)

    def test_positive_samples_carry_true_label(self):
        X, y = self._small_set()
        for s in build_training_stream(X, y, Rng(13)):
            if s.polarity == Polarity.POSITIVE:
                assert int(np.argmax(s.features[:10])) == s.true_label

    def test_empty_rejected(self):
        with pytest.raises(UsageError):
            build_training_stream(np.empty((0, 784)), np.empty(0), Rng(1))
