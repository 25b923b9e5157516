import numpy as np
import pytest

from conftest import make_corpus, tone_i16, write_wav
from kurdasr.corpus import (
    IngestError,
    SplitConfigError,
    file_digest,
    hours_summary,
    ingest,
    load_manifest,
    manifest_to_text,
    save_manifest,
    split,
    validate_test_set,
)


class TestIngest:
    def test_three_rows_all_present(self, small_corpus):
        tsv, clips = small_corpus
        records = ingest(tsv, clips)
        assert len(records) == 3
        assert all(r.split == "unassigned" for r in records)
        assert all(r.duration > 0 for r in records)
        assert [r.speaker_id for r in records] == ["spk1", "spk2", "spk1"]

    def test_missing_clip_is_excluded_with_reason(self, small_corpus, tmp_path):
        tsv, clips = small_corpus
        (clips / "clip_b.wav").unlink()
        records = ingest(tsv, clips)
        excluded = [r for r in records if r.split == "excluded"]
        assert len(excluded) == 1
        assert excluded[0].id == "clip_b"
        assert "missing" in excluded[0].exclude_reason

    def test_transcripts_are_normalized(self, small_corpus):
        tsv, clips = small_corpus
        records = {r.id: r for r in ingest(tsv, clips)}
        assert "heştê û pênc ji sed" in records["clip_b"].transcript_normalized
        assert records["clip_a"].transcript_normalized == "wênê baş e"
        assert records["clip_a"].transcript_raw == "wéné baş e"

    def test_missing_column_named(self, tmp_path):
        tsv = tmp_path / "bad.tsv"
        tsv.write_text("path\tsentence\nx.wav\thello\n", encoding="utf-8")
        with pytest.raises(IngestError, match="client_id"):
            ingest(tsv, tmp_path)

    def test_duplicate_id_rejected(self, tmp_path):
        tsv = tmp_path / "dup.tsv"
        tsv.write_text(
            "path\tsentence\tclient_id\na.wav\tx\ts1\na.wav\ty\ts2\n", encoding="utf-8"
        )
        with pytest.raises(IngestError, match="duplicate"):
            ingest(tsv, tmp_path)

    def test_idempotent(self, small_corpus):
        tsv, clips = small_corpus
        assert ingest(tsv, clips) == ingest(tsv, clips)

    def test_unreadable_audio_excluded(self, tmp_path):
        clips = tmp_path / "clips"
        clips.mkdir()
        (clips / "bad.wav").write_bytes(b"RIFFxxxx")  # corrupt
        tsv = tmp_path / "c.tsv"
        tsv.write_text("path\tsentence\tclient_id\nbad.wav\tyek\ts1\n", encoding="utf-8")
        (record,) = ingest(tsv, clips)
        assert record.split == "excluded"
        assert "unreadable" in record.exclude_reason


class TestSplit:
    def test_90_10(self, tmp_path):
        tsv, clips = make_corpus(tmp_path, 100, speakers=10)
        records = ingest(tsv, clips)
        manifest = split(records, seed=7)
        counts = {s: sum(1 for r in manifest.records if r.split == s) for s in ("train", "dev")}
        assert counts == {"train": 90, "dev": 10}

    def test_deterministic_byte_identical(self, tmp_path):
        tsv, clips = make_corpus(tmp_path, 30, speakers=5)
        records = ingest(tsv, clips)
        a = manifest_to_text(split(records, seed=3))
        b = manifest_to_text(split(ingest(tsv, clips), seed=3))
        assert a.encode() == b.encode()

    def test_different_seeds_differ(self, tmp_path):
        tsv, clips = make_corpus(tmp_path, 50, speakers=5)
        records = ingest(tsv, clips)
        a = [r.split for r in split(records, seed=1).records]
        b = [r.split for r in split(records, seed=2).records]
        assert a != b

    def test_single_record_goes_to_train(self, tmp_path):
        tsv, clips = make_corpus(tmp_path, 1, speakers=1)
        manifest = split(ingest(tsv, clips), seed=0)
        assert [r.split for r in manifest.records] == ["train"]

    def test_partition_excludes_stay_excluded(self, small_corpus):
        tsv, clips = small_corpus
        (clips / "clip_c.wav").unlink()
        manifest = split(ingest(tsv, clips), seed=5)
        by_id = {r.id: r.split for r in manifest.records}
        assert by_id["clip_c"] == "excluded"
        assert set(by_id.values()) <= {"train", "dev", "excluded"}
        for record in manifest.records:
            assert record.split in ("train", "dev", "excluded")

    def test_bad_ratios_rejected(self, small_corpus):
        tsv, clips = small_corpus
        records = ingest(tsv, clips)
        with pytest.raises(SplitConfigError):
            split(records, seed=0, ratios=(0.8, 0.1))

    def test_counts_within_one_of_ratio(self, tmp_path):
        tsv, clips = make_corpus(tmp_path, 37, speakers=4)
        manifest = split(ingest(tsv, clips), seed=11)
        n_train = sum(1 for r in manifest.records if r.split == "train")
        n_dev = sum(1 for r in manifest.records if r.split == "dev")
        assert abs(n_train - 0.9 * 37) <= 1
        assert abs(n_dev - 0.1 * 37) <= 1
        assert n_train + n_dev == 37

    def test_provenance_recorded(self, small_corpus):
        tsv, clips = small_corpus
        manifest = split(ingest(tsv, clips), seed=1, provenance={tsv.name: file_digest(tsv)})
        assert manifest.provenance[tsv.name] == file_digest(tsv)

    def test_speaker_disjoint_option(self, tmp_path):
        tsv, clips = make_corpus(tmp_path, 60, speakers=12)
        records = ingest(tsv, clips)
        manifest = split(records, seed=4, speaker_disjoint=True)
        by_split = {"train": set(), "dev": set()}
        for record in manifest.records:
            by_split[record.split].add(record.speaker_id)
        assert not (by_split["train"] & by_split["dev"])
        assert by_split["train"] and by_split["dev"]
        # deterministic too
        again = split(ingest(tsv, clips), seed=4, speaker_disjoint=True)
        assert manifest_to_text(again) == manifest_to_text(manifest)

    def test_default_split_is_not_speaker_disjoint_here(self, tmp_path):
        # with 12 speakers over 60 rows, a plain shuffle splits some speaker
        tsv, clips = make_corpus(tmp_path, 60, speakers=12)
        manifest = split(ingest(tsv, clips), seed=4)
        train_speakers = {r.speaker_id for r in manifest.records if r.split == "train"}
        dev_speakers = {r.speaker_id for r in manifest.records if r.split == "dev"}
        assert train_speakers & dev_speakers


class TestManifestIO:
    def test_save_load_round_trip(self, tmp_path, small_corpus):
        tsv, clips = small_corpus
        manifest = split(ingest(tsv, clips), seed=9, provenance={"corpus.tsv": "ff"})
        path = tmp_path / "manifest.jsonl"
        save_manifest(manifest, path)
        loaded = load_manifest(path)
        assert loaded == manifest

    def test_hours_summary_reports_both(self, small_corpus):
        tsv, clips = small_corpus
        (clips / "clip_a.wav").unlink()
        records = ingest(tsv, clips)
        total, kept = hours_summary(records)
        assert total == pytest.approx(2 * 0.25 / 3600)
        assert kept == total  # exclusion had zero duration anyway
        assert kept <= total


def _test_set(tmp_path, n_sentences=200, n_speakers=50, rate=22050, prefix="test"):
    return make_corpus(tmp_path, n_sentences, speakers=n_speakers, prefix=prefix, rate=rate)


class TestValidateTestSet:
    def _train_manifest(self, tmp_path):
        tsv, clips = make_corpus(tmp_path, 40, speakers=8, prefix="train")
        return split(ingest(tsv, clips), seed=1)

    def test_conformant_fixture_passes(self, tmp_path):
        manifest = self._train_manifest(tmp_path)
        tsv, clips = _test_set(tmp_path)
        report = validate_test_set(manifest, ingest(tsv, clips))
        assert report.passed, report.format_table()

    def test_shared_speaker_fails_with_name(self, tmp_path):
        manifest = self._train_manifest(tmp_path)
        tsv, clips = _test_set(tmp_path)
        records = ingest(tsv, clips)
        train_speaker = next(r.speaker_id for r in manifest.records if r.split == "train")
        from dataclasses import replace

        spoiled = [replace(records[0], speaker_id=train_speaker)] + records[1:]
        report = validate_test_set(manifest, spoiled)
        assert not report.passed
        check = next(c for c in report.checks if c.name == "speaker disjointness")
        assert not check.passed and train_speaker in check.detail

    def test_shared_sentence_fails(self, tmp_path):
        manifest = self._train_manifest(tmp_path)
        tsv, clips = _test_set(tmp_path)
        records = ingest(tsv, clips)
        train_sentence = next(
            r.transcript_normalized for r in manifest.records if r.split == "train"
        )
        from dataclasses import replace

        spoiled = [replace(records[0], transcript_normalized=train_sentence)] + records[1:]
        report = validate_test_set(manifest, spoiled)
        check = next(c for c in report.checks if c.name == "sentence disjointness")
        assert not check.passed

    def test_wrong_sample_rate_names_expected(self, tmp_path):
        manifest = self._train_manifest(tmp_path)
        tsv, clips = _test_set(tmp_path)
        # re-record one clip at 16 kHz
        write_wav(clips / "test_0000.wav", tone_i16(0.1, 16000), rate=16000)
        report = validate_test_set(manifest, ingest(tsv, clips))
        check = next(c for c in report.checks if c.name == "audio format")
        assert not check.passed and "22.05 kHz" in check.detail

    def test_stereo_clip_fails(self, tmp_path):
        manifest = self._train_manifest(tmp_path)
        tsv, clips = _test_set(tmp_path)
        stereo = np.repeat(tone_i16(0.1, 22050), 2)
        write_wav(clips / "test_0001.wav", stereo, rate=22050, channels=2)
        report = validate_test_set(manifest, ingest(tsv, clips))
        check = next(c for c in report.checks if c.name == "audio format")
        assert not check.passed and "mono" in check.detail

    def test_wrong_counts_fail(self, tmp_path):
        manifest = self._train_manifest(tmp_path)
        tsv, clips = _test_set(tmp_path, n_sentences=150, n_speakers=50)
        report = validate_test_set(manifest, ingest(tsv, clips))
        count_check = next(c for c in report.checks if c.name == "sentence count")
        assert not count_check.passed and "150" in count_check.detail
