"""Command-line interface: subcommands, config handling, exit codes."""

import json

import numpy as np
import pytest

from conftest import MINI_WORDS
from prondet.cli import DATA_EXIT, NUMERICAL_EXIT, USAGE_EXIT, main
from prondet.corpus import CANONICAL_RATE, write_wav


def spec_payload():
    return {
        "words": [{"label": label, "syllables": list(syls)}
                  for label, syls in MINI_WORDS],
        "native_speakers": 3,
        "non_native_speakers": 3,
        "repetitions": 2,
    }


@pytest.fixture(scope="module")
def cli_dir(tmp_path_factory):
    """Corpus, bundle, and LOO outputs produced through the CLI."""
    root = tmp_path_factory.mktemp("cli")
    spec_path = root / "spec.json"
    spec_path.write_text(json.dumps(spec_payload()))
    corpus = root / "corpus"
    code = main(["synth", "--spec", str(spec_path), "--seed", "11",
                 "--out", str(corpus)])
    assert code == 0
    return root


def manifest_path(cli_dir):
    return cli_dir / "corpus" / "manifest.json"


@pytest.fixture(scope="module")
def bundle_path(cli_dir):
    out = cli_dir / "models"
    code = main(["train", "--manifest", str(manifest_path(cli_dir)),
                 "--word", "2", "--out", str(out)])
    assert code == 0
    return out / "bundle_w02_mfcc13.prdb"


class TestSynth:
    def test_corpus_layout(self, cli_dir, capsys):
        assert manifest_path(cli_dir).exists()
        wavs = list((cli_dir / "corpus" / "wav").glob("*.wav"))
        assert len(wavs) == 3 * 6 * 2

    def test_rerun_is_up_to_date(self, cli_dir, capsys):
        spec_path = cli_dir / "spec.json"
        code = main(["synth", "--spec", str(spec_path), "--seed", "11",
                     "--out", str(cli_dir / "corpus")])
        assert code == 0
        out = capsys.readouterr().out
        assert "up to date" in out

    def test_seed_required(self, tmp_path, capsys):
        code = main(["synth", "--out", str(tmp_path / "c")])
        assert code == USAGE_EXIT
        assert "seed" in capsys.readouterr().err

    def test_bad_spec_rejected(self, tmp_path, capsys):
        bad = tmp_path / "spec.json"
        bad.write_text(json.dumps({"words": [{"label": "x"}]}))
        code = main(["synth", "--spec", str(bad), "--seed", "1",
                     "--out", str(tmp_path / "c")])
        assert code == USAGE_EXIT


class TestTrain:
    def test_bundle_written(self, bundle_path):
        assert bundle_path.exists()
        assert bundle_path.read_bytes()[:4] == b"PRDB"

    def test_word_required(self, cli_dir, capsys):
        code = main(["train", "--manifest", str(manifest_path(cli_dir))])
        assert code == USAGE_EXIT

    def test_manifest_required(self, capsys):
        code = main(["train", "--word", "1"])
        assert code == USAGE_EXIT

    def test_unknown_word_is_data_error(self, cli_dir, capsys):
        code = main(["train", "--manifest", str(manifest_path(cli_dir)),
                     "--word", "42"])
        assert code == DATA_EXIT

    def test_bad_variance_fraction(self, cli_dir, capsys):
        code = main(["train", "--manifest", str(manifest_path(cli_dir)),
                     "--word", "1", "--variance-fraction", "1.5"])
        assert code == USAGE_EXIT


class TestDetect:
    def wav_of(self, cli_dir, name):
        return cli_dir / "corpus" / "wav" / name

    def test_outcome_schema(self, cli_dir, bundle_path, capsys):
        code = main(["detect", "--bundle", str(bundle_path),
                     "--wav", str(self.wav_of(cli_dir, "w02_s01_r0.wav")),
                     "--manifest", str(manifest_path(cli_dir))])
        assert code == 0
        payload = json.loads(capsys.readouterr().out)
        assert set(payload) == {"stage", "word_distance", "native_distance",
                                "syllables"}
        assert payload["stage"] in ("rejected-word", "native", "non-native")
        assert payload["word_distance"] >= 0.0
        if payload["stage"] == "non-native":
            assert len(payload["syllables"]) == 2
            for row in payload["syllables"]:
                assert set(row) == {"label", "distance", "mispronounced"}

    def test_boundaries_from_manifest_match_explicit(self, cli_dir,
                                                     bundle_path, capsys):
        manifest = json.loads(manifest_path(cli_dir).read_text())
        entry = next(e for e in manifest["samples"]
                     if e["path"] == "w02_s05_r0.wav")
        code = main(["detect", "--bundle", str(bundle_path),
                     "--wav", str(self.wav_of(cli_dir, "w02_s05_r0.wav")),
                     "--manifest", str(manifest_path(cli_dir))])
        assert code == 0
        via_manifest = capsys.readouterr().out
        text = ",".join(f"{s}:{e}" for s, e in entry["boundaries"])
        code = main(["detect", "--bundle", str(bundle_path),
                     "--wav", str(self.wav_of(cli_dir, "w02_s05_r0.wav")),
                     "--boundaries", text])
        assert code == 0
        assert capsys.readouterr().out == via_manifest

    def test_bad_boundary_syntax(self, cli_dir, bundle_path, capsys):
        code = main(["detect", "--bundle", str(bundle_path),
                     "--wav", str(self.wav_of(cli_dir, "w02_s01_r0.wav")),
                     "--boundaries", "10-20,30-40"])
        assert code == USAGE_EXIT

    def test_missing_bundle_is_data_error(self, cli_dir, capsys):
        code = main(["detect", "--bundle", "no_such.prdb",
                     "--wav", str(self.wav_of(cli_dir, "w02_s01_r0.wav"))])
        assert code == DATA_EXIT

    def test_silent_wav_is_numerical_error(self, cli_dir, bundle_path,
                                           tmp_path, capsys):
        silent = tmp_path / "silent.wav"
        write_wav(silent, np.zeros(CANONICAL_RATE), CANONICAL_RATE)
        code = main(["detect", "--bundle", str(bundle_path),
                     "--wav", str(silent)])
        assert code == NUMERICAL_EXIT


class TestLoo:
    def test_writes_result_and_reports(self, cli_dir, capsys):
        out = cli_dir / "loo"
        code = main(["loo", "--manifest", str(manifest_path(cli_dir)),
                     "--step", "2", "--word", "2", "--out", str(out)])
        assert code == 0
        printed = capsys.readouterr().out.split()
        assert (out / "result_step2_mfcc13.json").exists()
        assert (out / "report_step2_mfcc13.json").exists()
        assert (out / "report_step2_mfcc13.csv").exists()
        assert (out / "plot_step2_mfcc13.csv").exists()
        assert len(printed) == 4

    def test_report_reemission_is_identical(self, cli_dir, capsys):
        out = cli_dir / "loo"
        if not (out / "result_step2_mfcc13.json").exists():
            main(["loo", "--manifest", str(manifest_path(cli_dir)),
                  "--step", "2", "--word", "2", "--out", str(out)])
            capsys.readouterr()
        original = (out / "report_step2_mfcc13.csv").read_bytes()
        redo = cli_dir / "loo_redo"
        code = main(["report", "--result",
                     str(out / "result_step2_mfcc13.json"),
                     "--format", "csv", "--out", str(redo)])
        assert code == 0
        assert (redo / "report_step2_mfcc13.csv").read_bytes() == original

    def test_step_flag_validated_by_parser(self, cli_dir):
        with pytest.raises(SystemExit) as err:
            main(["loo", "--manifest", str(manifest_path(cli_dir)),
                  "--step", "7"])
        assert err.value.code == USAGE_EXIT

    def test_unknown_report_format(self, cli_dir, capsys):
        code = main(["loo", "--manifest", str(manifest_path(cli_dir)),
                     "--step", "2", "--word", "2", "--format", "xml",
                     "--out", str(cli_dir / "loo_bad")])
        assert code == DATA_EXIT


class TestConfig:
    def test_config_supplies_settings(self, cli_dir, tmp_path, capsys):
        config = tmp_path / "config.json"
        config.write_text(json.dumps({
            "manifest": str(manifest_path(cli_dir)),
            "out": str(tmp_path / "models"),
        }))
        code = main(["--config", str(config), "train", "--word", "1"])
        assert code == 0
        assert (tmp_path / "models" / "bundle_w01_mfcc13.prdb").exists()

    def test_flag_overrides_config(self, cli_dir, tmp_path, capsys):
        config = tmp_path / "config.json"
        config.write_text(json.dumps({
            "manifest": str(manifest_path(cli_dir)),
            "feature": "spectrogram50",
            "out": str(tmp_path / "models"),
        }))
        code = main(["--config", str(config), "train", "--word", "1",
                     "--feature", "mfcc13"])
        assert code == 0
        assert (tmp_path / "models" / "bundle_w01_mfcc13.prdb").exists()

    def test_unknown_field_rejected(self, tmp_path, capsys):
        config = tmp_path / "config.json"
        config.write_text(json.dumps({"mainfest": "typo.json"}))
        code = main(["--config", str(config), "train", "--word", "1"])
        assert code == USAGE_EXIT
        assert "mainfest" in capsys.readouterr().err

    def test_config_must_be_object(self, tmp_path, capsys):
        config = tmp_path / "config.json"
        config.write_text("[1, 2]")
        code = main(["--config", str(config), "train", "--word", "1"])
        assert code == USAGE_EXIT

    def test_missing_config_file(self, tmp_path, capsys):
        code = main(["--config", str(tmp_path / "nope.json"),
                     "train", "--word", "1"])
        assert code == USAGE_EXIT

    def test_preprocess_section(self, cli_dir, tmp_path, capsys):
        config = tmp_path / "config.json"
        config.write_text(json.dumps({
            "manifest": str(manifest_path(cli_dir)),
            "out": str(tmp_path / "models"),
            "preprocess": {"vad_threshold": 0.03},
        }))
        code = main(["--config", str(config), "train", "--word", "1"])
        assert code == 0

    def test_bad_preprocess_section(self, cli_dir, tmp_path, capsys):
        config = tmp_path / "config.json"
        config.write_text(json.dumps({
            "manifest": str(manifest_path(cli_dir)),
            "preprocess": {"vad_threshold": -1.0},
        }))
        code = main(["--config", str(config), "train", "--word", "1"])
        assert code == USAGE_EXIT


class TestParser:
    def test_no_command_is_usage_error(self):
        with pytest.raises(SystemExit) as err:
            main([])
        assert err.value.code == USAGE_EXIT

    def test_unknown_command(self):
        with pytest.raises(SystemExit) as err:
            main(["frobnicate"])
        assert err.value.code == USAGE_EXIT
