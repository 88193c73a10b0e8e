import logging

import numpy as np
import pytest

from memmatch.data import (
    PWM,
    Dataset,
    SequenceRecord,
    consensus_pwm,
    generate_synthetic,
    load_dataset,
    read_pwm,
    save_dataset,
    split,
    write_pwm,
)
from memmatch.errors import FormatError, InputError, ParseError
from memmatch.model import ALPHABET


def write(tmp_path, name, text):
    path = tmp_path / name
    path.write_text(text)
    return path


class TestLoad:
    def test_minimal_tsv(self, tmp_path):
        ds = load_dataset(write(tmp_path, "a.tsv", "ACGT\t1\nTTTT\t0\n"))
        assert len(ds) == 2 and ds.t == 4
        assert ds.records[0] == SequenceRecord("ACGT", 1)

    def test_length_mismatch_names_line(self, tmp_path):
        lines = ["A" * 101 + "\t1"] * 3 + ["A" * 100 + "\t0"] + ["C" * 101 + "\t0"]
        with pytest.raises(FormatError, match="line 4"):
            load_dataset(write(tmp_path, "b.tsv", "\n".join(lines) + "\n"))

    def test_invalid_character_position(self, tmp_path):
        with pytest.raises(ParseError, match=r"line 2.*position 3"):
            load_dataset(write(tmp_path, "c.tsv", "ACGT\t1\nACGX\t0\n"))

    def test_malformed_line(self, tmp_path):
        with pytest.raises(ParseError, match="line 1"):
            load_dataset(write(tmp_path, "d.tsv", "ACGT 1\n"))
        with pytest.raises(ParseError, match="line 2"):
            load_dataset(write(tmp_path, "e.tsv", "ACGT\t1\nACGT\t2\n"))

    def test_lowercase_is_uppercased(self, tmp_path):
        ds = load_dataset(write(tmp_path, "f.tsv", "acgn\t1\nACGT\t0\n"))
        assert ds.records[0].seq == "ACGN"

    def test_balanced_thousand_reported(self, tmp_path, caplog):
        rng = np.random.default_rng(0)
        rows = [f"{''.join(rng.choice(list(ALPHABET), 101))}\t{i % 2}" for i in range(1000)]
        with caplog.at_level(logging.INFO, logger="memmatch.data"):
            ds = load_dataset(write(tmp_path, "g.tsv", "\n".join(rows) + "\n"))
        assert ds.counts() == (500, 500)
        assert "500 positive / 500 negative" in caplog.text

    def test_imbalance_warns_not_fails(self, tmp_path, caplog):
        with caplog.at_level(logging.WARNING, logger="memmatch.data"):
            ds = load_dataset(write(tmp_path, "h.tsv", "ACGT\t1\nACGT\t1\nACGT\t0\n"))
        assert len(ds) == 3
        assert "imbalance" in caplog.text

    def test_fasta(self, tmp_path):
        text = ">s1 label=1\nACGT\nAC\n>s2 some note label=0\nTTTTTT\n"
        ds = load_dataset(write(tmp_path, "a.fa", text), format="fasta")
        assert [(r.seq, r.label) for r in ds] == [("ACGTAC", 1), ("TTTTTT", 0)]

    def test_fasta_header_needs_label(self, tmp_path):
        with pytest.raises(ParseError, match="line 1"):
            load_dataset(write(tmp_path, "b.fa", ">s1\nACGT\n"), format="fasta")


class TestSave:
    def test_tsv_bytes(self, tmp_path):
        ds = Dataset([SequenceRecord("ACGT", 1), SequenceRecord("TTNA", 0)], 4)
        save_dataset(ds, tmp_path / "o.tsv")
        assert (tmp_path / "o.tsv").read_bytes() == b"ACGT\t1\nTTNA\t0\n"

    @pytest.mark.parametrize("fmt", ["tsv", "fasta"])
    def test_round_trip(self, tmp_path, fmt):
        ds = generate_synthetic([consensus_pwm("TGACGTA")], 40, 30, 1.0, seed=1)
        save_dataset(ds, tmp_path / "o", fmt)
        back = load_dataset(tmp_path / "o", fmt)
        assert [(r.seq, r.label) for r in back] == [(r.seq, r.label) for r in ds]
        assert back.t == ds.t


class TestConsensusPwm:
    def test_pure(self):
        np.testing.assert_array_equal(consensus_pwm("A", 0.0).probs, [[1, 0, 0, 0]])

    def test_tgacgta(self):
        pwm = consensus_pwm("TGACGTA")
        assert pwm.width == 7
        np.testing.assert_allclose(pwm.probs.max(axis=1), 0.85)
        assert pwm.consensus() == "TGACGTA"

    def test_columns_normalized(self):
        rng = np.random.default_rng(2)
        for _ in range(20):
            cons = "".join(rng.choice(list(ALPHABET), rng.integers(1, 15)))
            pwm = consensus_pwm(cons, rng.uniform(0, 0.25))
            np.testing.assert_allclose(pwm.probs.sum(axis=1), 1.0, atol=1e-12)

    def test_invalid(self):
        with pytest.raises(InputError):
            consensus_pwm("ACGU")

    def test_pwm_validation(self):
        with pytest.raises(InputError):
            PWM(np.array([[0.5, 0.5, 0.5, 0.0]]))

    def test_file_round_trip(self, tmp_path):
        pwm = consensus_pwm("TGACGTA", 0.07, name="site1")
        write_pwm(pwm, tmp_path / "m.pwm")
        text = (tmp_path / "m.pwm").read_text().splitlines()
        assert text[0] == ">site1 width=7"
        assert all(len(line.split("\t")) == 4 for line in text[1:])
        back = read_pwm(tmp_path / "m.pwm")
        assert np.array_equal(back.probs, pwm.probs) and back.name == "site1"


class TestSynthetic:
    def test_one_hot_planting_writes_consensus(self):
        ds = generate_synthetic([consensus_pwm("TGACGTA", 0.0)], 200, 50, 1.0, seed=3)
        positives = [r for r in ds if r.label == 1]
        assert len(positives) == 100
        for r in positives:
            a, b = r.planted_span
            assert 0 <= a < b <= 50
            assert r.seq[a:b] == "TGACGTA"
        assert all(r.planted_span is None for r in ds if r.label == 0)

    def test_deterministic(self):
        mot = [consensus_pwm("TGACGTA")]
        a = generate_synthetic(mot, 100, 40, 0.7, seed=11)
        b = generate_synthetic(mot, 100, 40, 0.7, seed=11)
        assert a.records == b.records
        assert generate_synthetic(mot, 100, 40, 0.7, seed=12).records != a.records

    def test_background_frequencies(self):
        ds = generate_synthetic([], 10000, 101, 0.0, seed=5)
        neg = ds.codes[ds.labels == 0]
        freqs = np.bincount(neg.ravel(), minlength=4) / neg.size
        assert np.all(np.abs(freqs - 0.25) < 0.01)

    def test_plant_rate_fraction(self):
        ds = generate_synthetic([consensus_pwm("ACGT")], 2000, 30, 0.3, seed=6)
        planted = sum(r.planted_span is not None for r in ds)
        assert abs(planted / 1000 - 0.3) < 0.05

    def test_errors(self):
        with pytest.raises(InputError):
            generate_synthetic([consensus_pwm("ACGTACGT")], 10, 5, 1.0, seed=0)
        with pytest.raises(InputError):
            generate_synthetic([consensus_pwm("ACG")], 11, 10, 1.0, seed=0)

    def test_planted_window_beats_median_window(self):
        """Planted 0.85-consensus windows outscore the record's median window."""
        pwm = consensus_pwm("TGACGTA")
        logp = np.log(pwm.probs)
        ds = generate_synthetic([pwm], 2000, 101, 1.0, seed=8)
        wins = 0
        positives = [r for r in ds if r.label == 1]
        for r, codes in zip(positives, ds.codes[ds.labels == 1]):
            windows = np.lib.stride_tricks.sliding_window_view(codes, 7)
            scores = logp[np.arange(7), windows].sum(axis=1)
            a, _ = r.planted_span
            wins += scores[a] > np.median(scores)
        assert len(positives) == 1000
        assert wins / 1000 >= 0.95


def test_split_is_seeded_and_disjoint():
    ds = generate_synthetic([], 100, 10, 0.0, seed=1)
    tr, va = split(ds, 0.1, seed=4)
    assert len(va) == 10 and len(tr) == 90
    tr2, va2 = split(ds, 0.1, seed=4)
    assert va.records == va2.records
    assert set(tr.records).isdisjoint(va.records) or len(set(ds.records)) < len(ds)


def test_split_keeps_both_classes():
    ds = generate_synthetic([], 20, 10, 0.0, seed=2)
    _, va = split(ds, 0.05, seed=0)
    assert sorted(set(va.labels.tolist())) == [0, 1]
